#pragma once

// Particle approximation of the deterministic mean-field flow mu_bar_t.
//
// M particles follow the self-consistent ODE
//   dX^i/dt = -kappa E_pi[ <phi(.,.,x) - y, mu_t (x) gamma> . <grad phi(X^i,.,x), gamma> ]
//             - kappa grad KL(X^i),
// where mu_t is the empirical measure of the M particles themselves. The
// pi- and gamma-expectations are replaced by one fresh data batch and one
// fresh Gaussian batch per Euler step, shared by every particle.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfvi/cloud.hpp"
#include "mfvi/data.hpp"
#include "mfvi/model.hpp"
#include "mfvi/parallel.hpp"
#include "mfvi/rng.hpp"
#include "mfvi/schemes.hpp"
#include "mfvi/test_functions.hpp"

namespace mfvi {

/// Data stream id reserved for the mean-field solver.
inline constexpr std::uint32_t kMeanFieldStream = kMaxReplica;

struct MeanFieldConfig {
  std::size_t particles = 2000;
  double dt = 1.0 / 2000.0;
  double horizon_t = 10.0;
  double kappa = 1.0;
  PriorSpec prior;
  InitSpec init;
  std::size_t mc_gamma = 100;
  std::size_t mc_data = 100;
  /// Spacing of stored snapshots, in time units.
  double record_interval = 0.05;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  /// Test hook: when false only the KL pull acts.
  bool data_term = true;
};

struct MeanFieldTrajectory {
  Dims dims;
  std::vector<double> times;
  std::vector<ParticleCloud> clouds;
  double dt = 0.0;
  double kappa = 0.0;
  std::size_t mc_gamma = 0;
  std::size_t mc_data = 0;
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t particles() const { return clouds.empty() ? 0 : clouds.front().size(); }
  double horizon() const { return times.empty() ? 0.0 : times.back(); }
};

namespace detail {

inline constexpr std::size_t kMeanFieldChunk = 64;

inline void check_time(const MeanFieldTrajectory& traj, double t) {
  if (traj.times.empty() || t < 0.0 ||
      t > traj.times.back() * (1.0 + 1e-12) + 1e-12) {
    throw std::out_of_range("time " + std::to_string(t) +
                            " outside the trajectory horizon");
  }
}

/// Index k with times[k] <= t < times[k+1] (or the last index), and the
/// fractional position within that interval (0 when t is on the grid).
inline std::pair<std::size_t, double> locate(const MeanFieldTrajectory& traj,
                                             double t) {
  check_time(traj, t);
  const auto& ts = traj.times;
  const auto it = std::upper_bound(ts.begin(), ts.end(), t);
  std::size_t k = it == ts.begin() ? 0 : static_cast<std::size_t>(it - ts.begin()) - 1;
  if (k + 1 >= ts.size()) return {ts.size() - 1, 0.0};
  const double tol = 1e-12 * std::max(1.0, std::abs(t));
  if (std::abs(t - ts[k]) <= tol) return {k, 0.0};
  if (std::abs(ts[k + 1] - t) <= tol) return {k + 1, 0.0};
  return {k, (t - ts[k]) / (ts[k + 1] - ts[k])};
}

}  // namespace detail

inline MeanFieldTrajectory solve_meanfield(const MeanFieldConfig& cfg,
                                           const TeacherSpec& teacher) {
  const Dims dims = teacher.dims();
  if (cfg.particles < 1) throw std::invalid_argument("solve_meanfield: particles < 1");
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("solve_meanfield: dt <= 0");
  if (!(cfg.horizon_t > 0.0)) throw std::invalid_argument("solve_meanfield: horizon_t <= 0");
  if (cfg.mc_gamma < 1 || cfg.mc_data < 1) {
    throw std::invalid_argument("solve_meanfield: Monte-Carlo sizes must be >= 1");
  }
  cfg.prior.validate(dims);
  cfg.init.validate(dims);

  const std::size_t M = cfg.particles, G = cfg.mc_gamma, B = cfg.mc_data;
  const std::size_t din = dims.d_in, dout = dims.d_out, d = dims.d(),
                    np = dims.n_params();
  const auto n_steps = static_cast<std::uint64_t>(
      std::max<long long>(1, std::llround(cfg.horizon_t / cfg.dt)));
  const double dt = cfg.horizon_t / static_cast<double>(n_steps);
  const auto record_every = static_cast<std::uint64_t>(
      std::max<long long>(1, std::llround(cfg.record_interval / dt)));

  MeanFieldTrajectory traj;
  traj.dims = dims;
  traj.dt = dt;
  traj.kappa = cfg.kappa;
  traj.mc_gamma = G;
  traj.mc_data = B;

  ParticleCloud cloud = init_cloud(M, dims, cfg.init, cfg.seed, kMeanFieldStream,
                                   Purpose::MeanFieldInit);
  traj.times.push_back(0.0);
  traj.clouds.push_back(cloud);

  const DataSource source{teacher, cfg.seed, kMeanFieldStream};
  const bool data_on = cfg.data_term && cfg.kappa != 0.0;
  const std::size_t n_chunks = (M + detail::kMeanFieldChunk - 1) / detail::kMeanFieldChunk;

  std::vector<double> xs(B * din), ys(B * dout), zs(G * d), q(G * B), az(G * B),
      A(B * dout), partial(n_chunks * B * dout);
  ParticleCloud next = cloud;

  for (std::uint64_t k = 0; k < n_steps; ++k) {
    if (data_on) {
      for (std::size_t b = 0; b < B; ++b) {
        const Sample s = source.sample(k, static_cast<std::uint32_t>(b),
                                       Purpose::MeanFieldData);
        std::copy(s.x.begin(), s.x.end(), xs.begin() + b * din);
        std::copy(s.y.begin(), s.y.end(), ys.begin() + b * dout);
      }
      for (std::size_t g = 0; g < G; ++g) {
        RngStream rz(cfg.seed, {0, static_cast<std::uint32_t>(k),
                                static_cast<std::uint32_t>(g), Purpose::MeanFieldGamma});
        rz.fill_normal(std::span<double>(zs).subspan(g * d, d));
        for (std::size_t b = 0; b < B; ++b) {
          q[g * B + b] = dot(std::span<const double>(zs).subspan(g * d, din),
                             std::span<const double>(xs).subspan(b * din, din));
        }
      }

      // Pass 1: A_b = <phi(., ., x_b), mu (x) gamma> - y_b.
      parallel_for(n_chunks, cfg.threads, [&](std::size_t c) {
        double* part = &partial[c * B * dout];
        std::fill(part, part + B * dout, 0.0);
        const std::size_t lo = c * detail::kMeanFieldChunk;
        const std::size_t hi = std::min(M, lo + detail::kMeanFieldChunk);
        std::vector<double> tz(dout);
        for (std::size_t i = lo; i < hi; ++i) {
          const ParamView th = cloud.view(i);
          const double sp = softplus(th.rho);
          for (std::size_t b = 0; b < B; ++b) {
            const double a = dot(th.m.first(din),
                                 std::span<const double>(xs).subspan(b * din, din));
            double tsum = 0.0;
            std::fill(tz.begin(), tz.end(), 0.0);
            for (std::size_t g = 0; g < G; ++g) {
              const double t = std::tanh(a + sp * q[g * B + b]);
              tsum += t;
              const double* zo = &zs[g * d + din];
              for (std::size_t o = 0; o < dout; ++o) tz[o] += t * zo[o];
            }
            for (std::size_t o = 0; o < dout; ++o) {
              part[b * dout + o] += th.m[din + o] * tsum + sp * tz[o];
            }
          }
        }
      });
      const double norm = 1.0 / (static_cast<double>(M) * static_cast<double>(G));
      for (std::size_t j = 0; j < B * dout; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < n_chunks; ++c) s += partial[c * B * dout + j];
        A[j] = s * norm - ys[j];
      }
      for (std::size_t g = 0; g < G; ++g) {
        for (std::size_t b = 0; b < B; ++b) {
          az[g * B + b] = dot(std::span<const double>(zs).subspan(g * d + din, dout),
                              std::span<const double>(A).subspan(b * dout, dout));
        }
      }
    }

    // Pass 2: Euler update of every particle against the frozen A.
    parallel_for(M, cfg.threads, [&](std::size_t i) {
      const ParamView th = cloud.view(i);
      auto out = next.row(i);
      std::vector<double> drift(np, 0.0);
      if (data_on) {
        const double sp = softplus(th.rho);
        const double inv = 1.0 / (static_cast<double>(G) * static_cast<double>(B));
        double rho_acc = 0.0;
        for (std::size_t b = 0; b < B; ++b) {
          const auto xb = std::span<const double>(xs).subspan(b * din, din);
          const auto Ab = std::span<const double>(A).subspan(b * dout, dout);
          const double a = dot(th.m.first(din), xb);
          const double am = dot(th.m.subspan(din, dout), Ab);
          double c_in = 0.0, c_t = 0.0;
          for (std::size_t g = 0; g < G; ++g) {
            const double qq = q[g * B + b];
            const double t = std::tanh(a + sp * qq);
            const double sech2 = 1.0 - t * t;
            const double rz = az[g * B + b];
            const double rw = am + sp * rz;
            c_in += sech2 * rw;
            c_t += t;
            rho_acc += sech2 * rw * qq + t * rz;
          }
          for (std::size_t k2 = 0; k2 < din; ++k2) drift[k2] += xb[k2] * c_in;
          for (std::size_t o = 0; o < dout; ++o) drift[din + o] += Ab[o] * c_t;
        }
        for (std::size_t k2 = 0; k2 < d; ++k2) drift[k2] *= -cfg.kappa * inv;
        drift[d] = -cfg.kappa * inv * softplus_deriv(th.rho) * rho_acc;
      }
      const auto gk = grad_kl(th, cfg.prior);
      for (std::size_t k2 = 0; k2 < np; ++k2) {
        out[k2] = cloud.row(i)[k2] + dt * (drift[k2] - cfg.kappa * gk[k2]);
      }
    });
    std::swap(cloud, next);
    cloud.set_step(k + 1);
    if (!cloud.all_finite()) {
      throw DivergenceError(kMeanFieldStream, k + 1);
    }
    if ((k + 1) % record_every == 0 || k + 1 == n_steps) {
      traj.times.push_back(static_cast<double>(k + 1) * dt);
      traj.clouds.push_back(cloud);
    }
  }
  return traj;
}

/// <f, mu_bar_t>, linearly interpolated between stored times.
inline double eval_observable(const MeanFieldTrajectory& traj,
                              const TestFunction& f, double t) {
  const auto [k, frac] = detail::locate(traj, t);
  const double v0 = f.average(traj.clouds[k]);
  if (frac == 0.0) return v0;
  const double v1 = f.average(traj.clouds[k + 1]);
  return (1.0 - frac) * v0 + frac * v1;
}

/// Particle positions at time t, interpolated along each particle path.
inline ParticleCloud cloud_at(const MeanFieldTrajectory& traj, double t) {
  const auto [k, frac] = detail::locate(traj, t);
  if (frac == 0.0) return traj.clouds[k];
  ParticleCloud out = traj.clouds[k];
  const auto next = traj.clouds[k + 1].data();
  auto data = out.data();
  for (std::size_t j = 0; j < data.size(); ++j) {
    data[j] = (1.0 - frac) * data[j] + frac * next[j];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Binary checkpoint: "MFVITRJ1", u64 json length, json metadata, u64 number
// of snapshots, then per snapshot an f64 time and M*(d+1) f64 parameters.
// Native byte order (little-endian on every supported target).

inline void save_trajectory(const MeanFieldTrajectory& traj, const std::string& path) {
  nlohmann::json meta = traj.metadata;
  meta["d_in"] = traj.dims.d_in;
  meta["d_out"] = traj.dims.d_out;
  meta["particles"] = traj.particles();
  meta["dt"] = traj.dt;
  meta["kappa"] = traj.kappa;
  meta["mc_gamma"] = traj.mc_gamma;
  meta["mc_data"] = traj.mc_data;
  const std::string text = meta.dump();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  auto put_u64 = [&](std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); };
  os.write("MFVITRJ1", 8);
  put_u64(text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  put_u64(traj.times.size());
  for (std::size_t s = 0; s < traj.times.size(); ++s) {
    os.write(reinterpret_cast<const char*>(&traj.times[s]), 8);
    const auto data = traj.clouds[s].data();
    os.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("failed writing " + path);
}

inline MeanFieldTrajectory load_trajectory(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open trajectory " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, "MFVITRJ1", 8) != 0) {
    throw std::runtime_error(path + ": not a trajectory file");
  }
  auto get_u64 = [&] {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    if (!is) throw std::runtime_error(path + ": truncated");
    return v;
  };
  std::string text(get_u64(), '\0');
  is.read(text.data(), static_cast<std::streamsize>(text.size()));
  MeanFieldTrajectory traj;
  traj.metadata = nlohmann::json::parse(text);
  traj.dims = {traj.metadata.at("d_in").get<std::size_t>(),
               traj.metadata.at("d_out").get<std::size_t>()};
  traj.dt = traj.metadata.at("dt").get<double>();
  traj.kappa = traj.metadata.at("kappa").get<double>();
  traj.mc_gamma = traj.metadata.at("mc_gamma").get<std::size_t>();
  traj.mc_data = traj.metadata.at("mc_data").get<std::size_t>();
  const auto M = traj.metadata.at("particles").get<std::size_t>();
  const std::uint64_t n_snap = get_u64();
  for (std::uint64_t s = 0; s < n_snap; ++s) {
    double t = 0.0;
    is.read(reinterpret_cast<char*>(&t), 8);
    ParticleCloud c(traj.dims, M);
    auto data = c.data();
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!is) throw std::runtime_error(path + ": truncated");
    c.set_step(static_cast<std::uint64_t>(std::llround(t / traj.dt)));
    traj.times.push_back(t);
    traj.clouds.push_back(std::move(c));
  }
  return traj;
}

}  // namespace mfvi
