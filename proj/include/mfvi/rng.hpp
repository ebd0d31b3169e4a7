#pragma once

// Counter-based random streams.
//
// Every draw in the simulator is addressed by a master seed and a lane
// (replica, step, index, purpose). The Philox4x32-10 block cipher maps
// (key = seed, counter = lane + block index) to 128 random bits, so any lane
// can be regenerated in isolation, in any order, on any thread.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>

namespace mfvi {

/// What a lane's draws are used for. Distinct purposes never share bits.
enum class Purpose : std::uint8_t {
  Teacher = 1,
  Data = 2,
  Init = 3,
  IdealGamma = 4,
  BbbNoise = 5,
  MiviNoise = 6,
  MeanFieldInit = 7,
  MeanFieldData = 8,
  MeanFieldGamma = 9,
  CovarianceData = 10,
  CovarianceGamma = 11,
  PredInputs = 12,
  PredWeights = 13,
  Test = 200,
};

/// Largest replica id representable in a lane (24 bits).
inline constexpr std::uint32_t kMaxReplica = (1u << 24) - 1;

struct Lane {
  std::uint32_t replica = 0;
  std::uint32_t step = 0;
  std::uint32_t index = 0;
  Purpose purpose = Purpose::Test;
};

namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace detail

using PhiloxBlock = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds.
inline PhiloxBlock philox4x32(PhiloxBlock ctr, PhiloxKey key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    detail::mulhilo(detail::kPhiloxM0, ctr[0], hi0, lo0);
    detail::mulhilo(detail::kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += detail::kPhiloxW0;
    key[1] += detail::kPhiloxW1;
  }
  return ctr;
}

/// Sequential reader over one lane. Cheap to construct; holds no heap state.
class RngStream {
 public:
  RngStream(std::uint64_t seed, Lane lane)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32)} {
    if (lane.replica > kMaxReplica) {
      throw std::out_of_range("RngStream: replica id exceeds 24 bits");
    }
    ctr_ = {0u, lane.index, lane.step,
            (static_cast<std::uint32_t>(lane.purpose) << 24) | lane.replica};
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() {
    if (pos_ >= 4) refill();
    const std::uint32_t a = buf_[pos_++];
    const std::uint32_t b = buf_[pos_++];
    return static_cast<double>((static_cast<std::uint64_t>(a >> 5) << 26) |
                               (b >> 6)) *
           0x1.0p-53;
  }

  /// Standard normal via Box-Muller; both variates of a pair are used.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
  }

  void fill_normal(std::span<double> out) {
    for (double& v : out) v = normal();
  }

  void fill_uniform(std::span<double> out, double lo, double hi) {
    for (double& v : out) v = lo + (hi - lo) * uniform();
  }

 private:
  void refill() {
    buf_ = philox4x32(ctr_, key_);
    ++ctr_[0];
    pos_ = 0;
  }

  PhiloxKey key_;
  PhiloxBlock ctr_{};
  PhiloxBlock buf_{};
  int pos_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Derive an independent 64-bit seed from a master seed and a salt
/// (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t salt) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace mfvi
