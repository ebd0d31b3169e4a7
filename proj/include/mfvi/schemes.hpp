#pragma once

// The three SGD update rules for the regularized ELBO and the training loop.
//
// Every scheme moves neuron i by
//   -(kappa/N^2) * sum_j (phi^j - y) . grad phi^i  -  (kappa/N) * grad KL(theta^i)
// and they differ only in how the Gaussian integrals inside that sum are
// handled:
//   Idealized  Monte-Carlo averages with mc_samples draws per neuron,
//   BbB        one fresh draw Z^i per neuron,
//   MiVI       two draws (Z^1, Z^2) shared by all neurons.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mfvi/cloud.hpp"
#include "mfvi/data.hpp"
#include "mfvi/model.hpp"
#include "mfvi/rng.hpp"
#include "mfvi/test_functions.hpp"

namespace mfvi {

enum class Scheme { Idealized, BbB, MiVI };

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::Idealized: return "idealized";
    case Scheme::BbB: return "bbb";
    case Scheme::MiVI: return "mivi";
  }
  return "?";
}

inline Scheme parse_scheme(std::string_view s) {
  if (s == "idealized" || s == "ideal" || s == "isgd") return Scheme::Idealized;
  if (s == "bbb") return Scheme::BbB;
  if (s == "mivi") return Scheme::MiVI;
  throw std::invalid_argument("unknown scheme '" + std::string(s) + "'");
}

struct SchemeConfig {
  Scheme scheme = Scheme::BbB;
  double kappa = 1.0;
  std::size_t mc_samples = 100;
  double horizon_t = 10.0;
  PriorSpec prior;
  InitSpec init;
  /// Test hook: when false only the KL pull acts.
  bool data_term = true;

  void validate(const Dims& dims) const {
    if (!(kappa >= 0.0) || !std::isfinite(kappa)) {
      throw std::invalid_argument("SchemeConfig: kappa must be >= 0");
    }
    if (mc_samples < 1) throw std::invalid_argument("SchemeConfig: mc_samples < 1");
    if (!(horizon_t > 0.0)) throw std::invalid_argument("SchemeConfig: horizon_t <= 0");
    prior.validate(dims);
    init.validate(dims);
  }
};

/// Gaussian vectors of dimension d drawn so far.
struct DrawCounter {
  std::uint64_t gaussian_vectors = 0;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::uint32_t replica, std::uint64_t step)
      : std::runtime_error("non-finite parameters at replica " +
                           std::to_string(replica) + ", step " +
                           std::to_string(step)),
        replica_(replica),
        step_(step) {}
  std::uint32_t replica() const { return replica_; }
  std::uint64_t step() const { return step_; }

 private:
  std::uint32_t replica_;
  std::uint64_t step_;
};

/// Where a step reads its randomness from.
struct StepRng {
  std::uint64_t seed = 0;
  std::uint32_t replica = 0;
};

/// floor(t * N), robust to representation error in t.
inline std::uint64_t steps_for(double t, std::size_t n) {
  return static_cast<std::uint64_t>(
      std::floor(t * static_cast<double>(n) + 1e-9));
}

namespace detail {

inline void apply_increment(ParticleCloud& cloud, std::span<const double> inc,
                            const StepRng& rng) {
  auto data = cloud.data();
  bool finite = true;
  for (std::size_t k = 0; k < data.size(); ++k) {
    data[k] += inc[k];
    finite = finite && std::isfinite(data[k]);
  }
  if (!finite) throw DivergenceError(rng.replica, cloud.step());
  cloud.advance_step();
}

inline void add_kl_pull(const ParticleCloud& cloud, const SchemeConfig& cfg,
                        std::span<double> inc) {
  const std::size_t np = cloud.dims().n_params();
  const double c = cfg.kappa / static_cast<double>(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto gk = grad_kl(cloud.view(i), cfg.prior);
    for (std::size_t k = 0; k < np; ++k) inc[i * np + k] -= c * gk[k];
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Idealized scheme.
//
// phi(theta, z, x) depends on z only through q = <z_in, x> and z_out, and
// q ~ ||x|| * N(0, 1). Each Monte-Carlo draw is therefore sampled as
// (u, z_out) with q = ||x|| u, which has exactly the law of a full
// d-dimensional draw and costs 1 + d_out normals instead of d.

/// Reconstruct the draws neuron `i` uses at `step` as full d-vectors
/// (z_in = u x / ||x||). Row-major mc_samples x d.
inline std::vector<double> ideal_gamma_draws(const StepRng& rng,
                                             std::uint64_t step, std::size_t i,
                                             std::span<const double> x,
                                             const Dims& dims,
                                             std::size_t mc_samples) {
  const std::size_t din = dims.d_in, d = dims.d();
  const double xnorm = std::sqrt(dot(x, x));
  RngStream s(rng.seed, {rng.replica, static_cast<std::uint32_t>(step),
                         static_cast<std::uint32_t>(i), Purpose::IdealGamma});
  std::vector<double> z(mc_samples * d, 0.0);
  for (std::size_t g = 0; g < mc_samples; ++g) {
    const double u = s.normal();
    if (xnorm > 0.0) {
      for (std::size_t k = 0; k < din; ++k) z[g * d + k] = u * x[k] / xnorm;
    }
    for (std::size_t o = 0; o < dims.d_out; ++o) z[g * d + din + o] = s.normal();
  }
  return z;
}

enum class DiagonalMode {
  /// j = i term is <(phi^i - y) grad phi^i, gamma>, as in the idealized rule.
  Exact,
  /// j = i term is <phi^i - y, gamma> <grad phi^i, gamma>; the expectation of
  /// a MiVI step.
  Factorized,
};

/// Increment (row-major N x (d+1)) of one idealized step, without applying it.
inline std::vector<double> idealized_increment(
    const ParticleCloud& cloud, const Sample& sample, const SchemeConfig& cfg,
    const StepRng& rng, std::uint64_t step, DiagonalMode mode = DiagonalMode::Exact,
    DrawCounter* draws = nullptr) {
  const Dims& dims = cloud.dims();
  const std::size_t n = cloud.size(), din = dims.d_in, dout = dims.d_out,
                    d = dims.d(), np = dims.n_params(), G = cfg.mc_samples;
  const auto x = std::span<const double>(sample.x);
  const auto y = std::span<const double>(sample.y);
  std::vector<double> inc(n * np, 0.0);

  if (cfg.data_term && cfg.kappa != 0.0) {
    const double xnorm = std::sqrt(dot(x, x));
    // Per-neuron Gaussian averages:
    //   phi_bar = <phi>, alpha = <(1-t^2) w_out>, t_bar = <t>,
    //   beta = <(1-t^2) q w_out + t z_out>, diag = <(phi - y) . grad phi>.
    std::vector<double> phi_bar(n * dout), alpha(n * dout), beta(n * dout),
        t_bar(n), diag(n * np);
    std::vector<double> zo(dout), w(dout), res(dout);
    const double inv_g = 1.0 / static_cast<double>(G);
    for (std::size_t i = 0; i < n; ++i) {
      const ParamView th = cloud.view(i);
      const double sp = softplus(th.rho);
      const double spd = softplus_deriv(th.rho);
      const double a = dot(th.m.first(din), x);
      RngStream s(rng.seed, {rng.replica, static_cast<std::uint32_t>(step),
                             static_cast<std::uint32_t>(i), Purpose::IdealGamma});
      double* pb = &phi_bar[i * dout];
      double* al = &alpha[i * dout];
      double* be = &beta[i * dout];
      double tb = 0.0, dg_in = 0.0, dg_rho = 0.0;
      double* dg = &diag[i * np];
      for (std::size_t k = 0; k < np; ++k) dg[k] = 0.0;
      for (std::size_t g = 0; g < G; ++g) {
        const double q = xnorm * s.normal();
        for (std::size_t o = 0; o < dout; ++o) zo[o] = s.normal();
        const double t = std::tanh(a + sp * q);
        const double sech2 = 1.0 - t * t;
        double rw = 0.0, rz = 0.0;
        for (std::size_t o = 0; o < dout; ++o) {
          w[o] = th.m[din + o] + sp * zo[o];
          const double ph = t * w[o];
          res[o] = ph - y[o];
          pb[o] += ph;
          al[o] += sech2 * w[o];
          be[o] += sech2 * q * w[o] + t * zo[o];
          rw += res[o] * w[o];
          rz += res[o] * zo[o];
          dg[din + o] += t * res[o];
        }
        tb += t;
        dg_in += sech2 * rw;
        dg_rho += sech2 * rw * q + t * rz;
      }
      for (std::size_t o = 0; o < dout; ++o) {
        pb[o] *= inv_g;
        al[o] *= inv_g;
        be[o] *= inv_g;
        dg[din + o] *= inv_g;
      }
      t_bar[i] = tb * inv_g;
      for (std::size_t k = 0; k < din; ++k) dg[k] = x[k] * dg_in * inv_g;
      dg[d] = spd * dg_rho * inv_g;
    }
    if (draws) draws->gaussian_vectors += n * G;

    std::vector<double> total(dout, 0.0);  // sum_j (phi_bar^j - y)
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t o = 0; o < dout; ++o) total[o] += phi_bar[j * dout + o] - y[o];
    }
    const double c = cfg.kappa / (static_cast<double>(n) * static_cast<double>(n));
    std::vector<double> r(dout);
    for (std::size_t i = 0; i < n; ++i) {
      const ParamView th = cloud.view(i);
      for (std::size_t o = 0; o < dout; ++o) {
        r[o] = mode == DiagonalMode::Exact
                   ? total[o] - (phi_bar[i * dout + o] - y[o])
                   : total[o];
      }
      double ar = 0.0, br = 0.0;
      for (std::size_t o = 0; o < dout; ++o) {
        ar += alpha[i * dout + o] * r[o];
        br += beta[i * dout + o] * r[o];
      }
      double* out = &inc[i * np];
      for (std::size_t k = 0; k < din; ++k) out[k] = x[k] * ar;
      for (std::size_t o = 0; o < dout; ++o) out[din + o] = t_bar[i] * r[o];
      out[d] = softplus_deriv(th.rho) * br;
      if (mode == DiagonalMode::Exact) {
        for (std::size_t k = 0; k < np; ++k) out[k] += diag[i * np + k];
      }
      for (std::size_t k = 0; k < np; ++k) out[k] *= -c;
    }
  }
  detail::add_kl_pull(cloud, cfg, inc);
  return inc;
}

inline void step_idealized(ParticleCloud& cloud, const Sample& sample,
                           const SchemeConfig& cfg, const StepRng& rng,
                           DrawCounter* draws = nullptr) {
  const auto inc = idealized_increment(cloud, sample, cfg, rng, cloud.step(),
                                       DiagonalMode::Exact, draws);
  detail::apply_increment(cloud, inc, rng);
}

// ---------------------------------------------------------------------------

/// Increment of one Bayes-by-Backprop step (N x (d+1)).
inline std::vector<double> bbb_increment(const ParticleCloud& cloud,
                                         const Sample& sample,
                                         const SchemeConfig& cfg,
                                         const StepRng& rng, std::uint64_t step,
                                         DrawCounter* draws = nullptr) {
  const Dims& dims = cloud.dims();
  const std::size_t n = cloud.size(), d = dims.d(), np = dims.n_params(),
                    dout = dims.d_out;
  std::vector<double> inc(n * np, 0.0);
  if (cfg.data_term && cfg.kappa != 0.0) {
    std::vector<double> z(n * d);
    std::vector<double> total(dout, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto zi = std::span<double>(z).subspan(i * d, d);
      RngStream s(rng.seed, {rng.replica, static_cast<std::uint32_t>(step),
                             static_cast<std::uint32_t>(i), Purpose::BbbNoise});
      s.fill_normal(zi);
      const auto p = phi(cloud.view(i), zi, sample.x, dims);
      for (std::size_t o = 0; o < dout; ++o) total[o] += p[o] - sample.y[o];
    }
    if (draws) draws->gaussian_vectors += n;
    const double c = cfg.kappa / (static_cast<double>(n) * static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      auto out = std::span<double>(inc).subspan(i * np, np);
      grad_phi_vjp(cloud.view(i), std::span<const double>(z).subspan(i * d, d),
                   sample.x, total, dims, out);
      for (double& v : out) v *= -c;
    }
  }
  detail::add_kl_pull(cloud, cfg, inc);
  return inc;
}

inline void step_bbb(ParticleCloud& cloud, const Sample& sample,
                     const SchemeConfig& cfg, const StepRng& rng,
                     DrawCounter* draws = nullptr) {
  const auto inc = bbb_increment(cloud, sample, cfg, rng, cloud.step(), draws);
  detail::apply_increment(cloud, inc, rng);
}

// ---------------------------------------------------------------------------

/// Increment of one Minimal-VI step. The residual sum over j is formed once,
/// so the step costs O(N).
inline std::vector<double> mivi_increment(const ParticleCloud& cloud,
                                          const Sample& sample,
                                          const SchemeConfig& cfg,
                                          const StepRng& rng, std::uint64_t step,
                                          DrawCounter* draws = nullptr) {
  const Dims& dims = cloud.dims();
  const std::size_t n = cloud.size(), d = dims.d(), np = dims.n_params(),
                    dout = dims.d_out;
  std::vector<double> inc(n * np, 0.0);
  if (cfg.data_term && cfg.kappa != 0.0) {
    std::vector<double> z1(d), z2(d);
    RngStream s(rng.seed, {rng.replica, static_cast<std::uint32_t>(step), 0,
                           Purpose::MiviNoise});
    s.fill_normal(z1);
    s.fill_normal(z2);
    if (draws) draws->gaussian_vectors += 2;
    std::vector<double> total(dout, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const auto p = phi(cloud.view(j), z1, sample.x, dims);
      for (std::size_t o = 0; o < dout; ++o) total[o] += p[o] - sample.y[o];
    }
    const double c = cfg.kappa / (static_cast<double>(n) * static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      auto out = std::span<double>(inc).subspan(i * np, np);
      grad_phi_vjp(cloud.view(i), z2, sample.x, total, dims, out);
      for (double& v : out) v *= -c;
    }
  }
  detail::add_kl_pull(cloud, cfg, inc);
  return inc;
}

inline void step_mivi(ParticleCloud& cloud, const Sample& sample,
                      const SchemeConfig& cfg, const StepRng& rng,
                      DrawCounter* draws = nullptr) {
  const auto inc = mivi_increment(cloud, sample, cfg, rng, cloud.step(), draws);
  detail::apply_increment(cloud, inc, rng);
}

inline void step(ParticleCloud& cloud, const Sample& sample,
                 const SchemeConfig& cfg, const StepRng& rng,
                 DrawCounter* draws = nullptr) {
  switch (cfg.scheme) {
    case Scheme::Idealized: step_idealized(cloud, sample, cfg, rng, draws); break;
    case Scheme::BbB: step_bbb(cloud, sample, cfg, rng, draws); break;
    case Scheme::MiVI: step_mivi(cloud, sample, cfg, rng, draws); break;
  }
}

/// Gaussian d-vectors one run of `steps` iterations draws.
inline std::uint64_t expected_draws(const SchemeConfig& cfg, std::size_t n,
                                    std::uint64_t steps) {
  if (!cfg.data_term || cfg.kappa == 0.0) return 0;
  switch (cfg.scheme) {
    case Scheme::Idealized: return steps * n * cfg.mc_samples;
    case Scheme::BbB: return steps * n;
    case Scheme::MiVI: return 2 * steps;
  }
  return 0;
}

// ---------------------------------------------------------------------------

/// <f, nu_k^N> for each observable at each checkpoint.
struct ObservableTrace {
  std::vector<double> times;
  std::vector<std::uint64_t> steps;
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;  // [observable][checkpoint]
};

struct TrainResult {
  ObservableTrace trace;
  ParticleCloud cloud;
  DrawCounter draws;
  std::vector<ParticleCloud> snapshots;  // one per checkpoint, if requested
};

/// Run floor(horizon_t * N) steps from a fresh cloud. `data.stream` selects
/// the (x_k, y_k) sequence; `rng.replica` selects init and scheme noise.
inline TrainResult train(const SchemeConfig& cfg, std::size_t n,
                         const DataSource& data,
                         const std::vector<double>& checkpoints,
                         const std::vector<TestFunction>& observables,
                         const StepRng& rng, bool keep_snapshots = false) {
  const Dims dims = data.teacher.dims();
  cfg.validate(dims);
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    if (checkpoints[c] < 0.0 || checkpoints[c] > cfg.horizon_t + 1e-12) {
      throw std::invalid_argument("train: checkpoint outside [0, horizon_t]");
    }
    if (c > 0 && checkpoints[c] < checkpoints[c - 1]) {
      throw std::invalid_argument("train: checkpoints must be ascending");
    }
  }
  TrainResult out;
  out.cloud = init_cloud(n, dims, cfg.init, rng.seed, rng.replica);
  auto& tr = out.trace;
  tr.times = checkpoints;
  for (const auto& f : observables) tr.names.push_back(f.name());
  tr.values.assign(observables.size(), std::vector<double>(checkpoints.size()));
  for (double t : checkpoints) tr.steps.push_back(steps_for(t, n));

  const std::uint64_t total_steps = steps_for(cfg.horizon_t, n);
  std::size_t next = 0;
  auto record = [&] {
    while (next < checkpoints.size() && tr.steps[next] == out.cloud.step()) {
      for (std::size_t f = 0; f < observables.size(); ++f) {
        tr.values[f][next] = observables[f].average(out.cloud);
      }
      if (keep_snapshots) out.snapshots.push_back(out.cloud);
      ++next;
    }
  };
  record();
  if (cfg.kappa == 0.0) {
    // Every increment is a signed zero, so the cloud never moves.
    while (out.cloud.step() < total_steps) {
      out.cloud.advance_step();
      record();
    }
    return out;
  }
  while (out.cloud.step() < total_steps) {
    const Sample s = data.sample(out.cloud.step());
    step(out.cloud, s, cfg, rng, &out.draws);
    record();
  }
  return out;
}

}  // namespace mfvi
