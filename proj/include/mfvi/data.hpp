#pragma once

// Synthetic teacher data: x ~ U([-1,1]^d_in),
// y = tanh(<x, w_in*>) * w_out* + noise_gamma * eps, eps ~ N(0, I_d_out).

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfvi/model.hpp"
#include "mfvi/rng.hpp"

namespace mfvi {

struct TeacherSpec {
  std::vector<double> w_in_star;
  std::vector<double> w_out_star;
  double noise_gamma = 0.0;

  Dims dims() const { return {w_in_star.size(), w_out_star.size()}; }
};

inline void to_json(nlohmann::json& j, const TeacherSpec& t) {
  j = nlohmann::json{{"w_in_star", t.w_in_star},
                     {"w_out_star", t.w_out_star},
                     {"noise_gamma", t.noise_gamma}};
}

inline void from_json(const nlohmann::json& j, TeacherSpec& t) {
  j.at("w_in_star").get_to(t.w_in_star);
  j.at("w_out_star").get_to(t.w_out_star);
  j.at("noise_gamma").get_to(t.noise_gamma);
}

struct Sample {
  std::vector<double> x;
  std::vector<double> y;
};

inline TeacherSpec init_teacher(std::size_t d_in, std::size_t d_out,
                                double noise_gamma, std::uint64_t seed) {
  if (d_in == 0 || d_out == 0) {
    throw std::invalid_argument("init_teacher: dimensions must be >= 1");
  }
  if (!(noise_gamma >= 0.0)) {
    throw std::invalid_argument("init_teacher: noise_gamma must be >= 0");
  }
  TeacherSpec t;
  t.noise_gamma = noise_gamma;
  t.w_in_star.resize(d_in);
  t.w_out_star.resize(d_out);
  RngStream rng(seed, {0, 0, 0, Purpose::Teacher});
  rng.fill_normal(t.w_in_star);
  rng.fill_normal(t.w_out_star);
  return t;
}

/// Evaluate the noiseless teacher at x.
inline std::vector<double> teacher_mean(const TeacherSpec& t,
                                        std::span<const double> x) {
  const double h = std::tanh(dot(x, t.w_in_star));
  std::vector<double> y(t.w_out_star.size());
  for (std::size_t o = 0; o < y.size(); ++o) y[o] = h * t.w_out_star[o];
  return y;
}

/// Random-access stream of (x_k, y_k) pairs. Pair (k, sub) depends only on
/// (seed, stream, k, sub).
struct DataSource {
  TeacherSpec teacher;
  std::uint64_t seed = 0;
  std::uint32_t stream = 0;

  Sample sample(std::uint64_t k, std::uint32_t sub = 0,
                Purpose purpose = Purpose::Data) const {
    if (k > UINT32_MAX) throw std::out_of_range("DataSource: step too large");
    RngStream rng(seed, {stream, static_cast<std::uint32_t>(k), sub, purpose});
    Sample s;
    s.x.resize(teacher.w_in_star.size());
    rng.fill_uniform(s.x, -1.0, 1.0);
    s.y = teacher_mean(teacher, s.x);
    if (teacher.noise_gamma > 0.0) {
      for (double& v : s.y) v += teacher.noise_gamma * rng.normal();
    }
    return s;
  }
};

}  // namespace mfvi
