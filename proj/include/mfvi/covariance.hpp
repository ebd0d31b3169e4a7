#pragma once

// Monte-Carlo estimators for the covariance of the martingale noise that
// drives the fluctuation limit.
//
// Shared family (idealized / BbB):
//   Q[f](x, y) = <phi(.,.,x) - y, mu (x) gamma> . <grad f . grad phi(.,.,x), mu (x) gamma>
// MiVI family:
//   Q[f](x, y, z1, z2) = <phi(., z1, x) - y, mu> . <grad f . grad phi(., z2, x), mu>
//
// The shared kernel is the conditional expectation of the MiVI kernel given
// (x, y), so Var_shared(Q[f]) <= Var_mivi(Q[f]).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfvi/cloud.hpp"
#include "mfvi/data.hpp"
#include "mfvi/meanfield.hpp"
#include "mfvi/model.hpp"
#include "mfvi/parallel.hpp"
#include "mfvi/rng.hpp"
#include "mfvi/test_functions.hpp"

namespace mfvi {

enum class KernelFamily { Shared, MiVI };

inline std::string_view to_string(KernelFamily f) {
  return f == KernelFamily::Shared ? "shared" : "mivi";
}

struct QKernelSample {
  double value = 0.0;
  KernelFamily family = KernelFamily::Shared;
  std::uint32_t data_id = 0;   // index of the (x, y) draw
  std::uint32_t noise_id = 0;  // index of the Gaussian draws
};

struct CovarianceReport {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
  double t = 0.0;
};

namespace detail {

// tanh through one exp call; absolute error below 4e-16, about 3x faster than
// std::tanh on the spread of arguments the kernel sees.
inline double kernel_tanh(double u) {
  u = std::clamp(u, -20.0, 20.0);
  return 1.0 - 2.0 / (std::exp(2.0 * u) + 1.0);
}

}  // namespace detail

/// A frozen cloud together with the gradients of a set of test functions at
/// every particle. Evaluates Q for all functions from the same draws.
class QKernel {
 public:
  QKernel(const ParticleCloud& cloud, const std::vector<TestFunction>& fs)
      : cloud_(&cloud), n_f_(fs.size()) {
    const std::size_t np = cloud.dims().n_params();
    grads_.resize(n_f_ * cloud.size() * np);
    for (std::size_t f = 0; f < n_f_; ++f) {
      for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto g = fs[f].gradient(cloud.view(i));
        std::copy(g.begin(), g.end(), grads_.begin() + (f * cloud.size() + i) * np);
      }
    }
  }

  std::size_t n_functions() const { return n_f_; }
  const ParticleCloud& cloud() const { return *cloud_; }

  /// Shared-family kernel; gamma1 / gamma2 hold G draws each (row-major G x d)
  /// for the first and second bracket.
  std::vector<double> shared(std::span<const double> x, std::span<const double> y,
                             std::span<const double> gamma1,
                             std::span<const double> gamma2) const {
    return evaluate(x, y, gamma1, gamma2);
  }

  /// MiVI-family kernel at the fixed pair (z1, z2).
  std::vector<double> mivi(std::span<const double> x, std::span<const double> y,
                           std::span<const double> z1,
                           std::span<const double> z2) const {
    const std::size_t d = cloud_->dims().d();
    if (z1.size() != d || z2.size() != d) {
      throw std::invalid_argument("q_mivi: noise has wrong length");
    }
    return evaluate(x, y, z1, z2);
  }

 private:
  std::vector<double> evaluate(std::span<const double> x, std::span<const double> y,
                               std::span<const double> g1,
                               std::span<const double> g2) const {
    const ParticleCloud& c = *cloud_;
    const Dims& dims = c.dims();
    const std::size_t din = dims.d_in, dout = dims.d_out, d = dims.d(),
                      np = dims.n_params(), M = c.size();
    if (x.size() != din || y.size() != dout || g1.size() % d != 0 ||
        g2.size() % d != 0 || g1.empty() || g2.empty()) {
      throw std::invalid_argument("QKernel: dimension mismatch");
    }
    const std::size_t G1 = g1.size() / d, G2 = g2.size() / d;
    std::vector<double> q1(G1), q2(G2);
    for (std::size_t g = 0; g < G1; ++g) q1[g] = dot(g1.subspan(g * d, din), x);
    for (std::size_t g = 0; g < G2; ++g) q2[g] = dot(g2.subspan(g * d, din), x);

    std::vector<double> first(dout, 0.0);
    std::vector<double> second(n_f_ * dout, 0.0);
    std::vector<double> xv(n_f_);
    for (std::size_t i = 0; i < M; ++i) {
      const ParamView th = c.view(i);
      const double sp = softplus(th.rho);
      const double spd = softplus_deriv(th.rho);
      const double a = dot(th.m.first(din), x);
      for (std::size_t g = 0; g < G1; ++g) {
        const double t = detail::kernel_tanh(a + sp * q1[g]);
        const double* zo = &g1[g * d + din];
        for (std::size_t o = 0; o < dout; ++o) first[o] += t * (th.m[din + o] + sp * zo[o]);
      }
      for (std::size_t f = 0; f < n_f_; ++f) {
        xv[f] = dot(std::span<const double>(grads_).subspan((f * M + i) * np, din), x);
      }
      for (std::size_t g = 0; g < G2; ++g) {
        const double t = detail::kernel_tanh(a + sp * q2[g]);
        const double sech2 = 1.0 - t * t;
        const double* zo = &g2[g * d + din];
        for (std::size_t f = 0; f < n_f_; ++f) {
          const double* v = &grads_[(f * M + i) * np];
          for (std::size_t o = 0; o < dout; ++o) {
            const double wo = th.m[din + o] + sp * zo[o];
            second[f * dout + o] += sech2 * wo * xv[f] + t * v[din + o] +
                                    v[d] * spd * (sech2 * wo * q2[g] + t * zo[o]);
          }
        }
      }
    }
    const double n1 = static_cast<double>(M) * static_cast<double>(G1);
    const double n2 = static_cast<double>(M) * static_cast<double>(G2);
    std::vector<double> out(n_f_, 0.0);
    for (std::size_t f = 0; f < n_f_; ++f) {
      for (std::size_t o = 0; o < dout; ++o) {
        out[f] += (first[o] / n1 - y[o]) * (second[f * dout + o] / n2);
      }
    }
    return out;
  }

  const ParticleCloud* cloud_;
  std::size_t n_f_;
  std::vector<double> grads_;  // [f][particle][param]
};

/// Q[f] for the shared family with mc_gamma fresh draws per bracket.
inline double q_shared(const TestFunction& f, std::span<const double> x,
                       std::span<const double> y, const ParticleCloud& mu,
                       std::size_t mc_gamma, RngStream& rng) {
  const std::size_t d = mu.dims().d();
  std::vector<double> g1(mc_gamma * d), g2(mc_gamma * d);
  rng.fill_normal(g1);
  rng.fill_normal(g2);
  return QKernel(mu, {f}).shared(x, y, g1, g2)[0];
}

inline double q_mivi(const TestFunction& f, std::span<const double> x,
                     std::span<const double> y, std::span<const double> z1,
                     std::span<const double> z2, const ParticleCloud& mu) {
  return QKernel(mu, {f}).mivi(x, y, z1, z2)[0];
}

// ---------------------------------------------------------------------------

struct CovarianceOptions {
  std::size_t mc_gamma = 100;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  /// Reuse the same draws at every time node (frozen-integrand checks).
  bool common_draws = false;
};

/// n_mc i.i.d. kernel samples, one row per sample with one column per
/// function in the kernel. `lane` separates independent sample sets.
inline std::vector<std::vector<double>> q_samples(const QKernel& kernel,
                                                  KernelFamily family,
                                                  const TeacherSpec& teacher,
                                                  std::size_t n_mc,
                                                  std::uint32_t lane,
                                                  const CovarianceOptions& opt) {
  const std::size_t d = kernel.cloud().dims().d();
  const DataSource source{teacher, opt.seed, lane};
  std::vector<std::vector<double>> out(n_mc);
  parallel_for(n_mc, opt.threads, [&](std::size_t s) {
    const Sample xy = source.sample(s, 0, Purpose::CovarianceData);
    RngStream rng(opt.seed, {lane, static_cast<std::uint32_t>(s), 0,
                             Purpose::CovarianceGamma});
    if (family == KernelFamily::Shared) {
      std::vector<double> g1(opt.mc_gamma * d), g2(opt.mc_gamma * d);
      rng.fill_normal(g1);
      rng.fill_normal(g2);
      out[s] = kernel.shared(xy.x, xy.y, g1, g2);
    } else {
      std::vector<double> z1(d), z2(d);
      rng.fill_normal(z1);
      rng.fill_normal(z2);
      out[s] = kernel.mivi(xy.x, xy.y, z1, z2);
    }
  });
  return out;
}

/// Sample covariance (n - 1 denominator) with delete-one jackknife error.
inline CovarianceReport sample_covariance(std::span<const double> a,
                                          std::span<const double> b) {
  const std::size_t n = a.size();
  if (n < 2 || b.size() != n) {
    throw std::invalid_argument("sample_covariance: need n >= 2 paired samples");
  }
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0;
  for (std::size_t i = 0; i < n; ++i) sab += (a[i] - ma) * (b[i] - mb);
  const double nn = static_cast<double>(n);
  CovarianceReport r;
  r.n_samples = n;
  r.estimate = sab / (nn - 1.0);
  if (n == 2) {
    r.std_error = std::numeric_limits<double>::infinity();
    return r;
  }
  // Leave-one-out covariance: (sab - n/(n-1) a_i b_i) / (n - 2) on centered data.
  std::vector<double> loo(n);
  double mean_loo = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = (a[i] - ma) * (b[i] - mb);
    loo[i] = (sab - nn / (nn - 1.0) * p) / (nn - 2.0);
    mean_loo += loo[i];
  }
  mean_loo /= nn;
  double ss = 0.0;
  for (double v : loo) ss += (v - mean_loo) * (v - mean_loo);
  r.std_error = std::sqrt((nn - 1.0) / nn * ss);
  return r;
}

inline std::vector<double> column(const std::vector<std::vector<double>>& rows,
                                  std::size_t c) {
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = rows[i][c];
  return out;
}

/// Variance of Q[f] under the data law (shared) or data x noise law (MiVI).
inline CovarianceReport var_q(KernelFamily family, const TestFunction& f,
                              const ParticleCloud& mu, std::size_t n_mc,
                              const TeacherSpec& teacher,
                              const CovarianceOptions& opt, std::uint32_t lane = 0) {
  if (n_mc < 2) throw std::invalid_argument("var_q: n_mc must be >= 2");
  const QKernel kernel(mu, {f});
  const auto col = column(q_samples(kernel, family, teacher, n_mc, lane, opt), 0);
  return sample_covariance(col, col);
}

/// kappa^2 * int_0^s Cov(Q[f_a], Q[f_b]) dv for every pair (a, b) and every
/// s, by the trapezoid rule over the trajectory's stored times (plus s itself
/// when it falls between them). Result is indexed [s][a][b]. Stored time k
/// uses lane k; an off-grid s uses the lane of its position in the node list.
inline std::vector<std::vector<std::vector<CovarianceReport>>> covariance_integrals(
    const std::vector<TestFunction>& fs, const std::vector<double>& s_list,
    const MeanFieldTrajectory& traj, KernelFamily family, std::size_t n_mc_per_time,
    const TeacherSpec& teacher, const CovarianceOptions& opt) {
  if (fs.empty()) throw std::invalid_argument("covariance_integrals: no test functions");
  const std::size_t nf = fs.size();
  using Matrix = std::vector<std::vector<CovarianceReport>>;
  auto node_matrix = [&](double t, std::uint32_t lane) {
    const ParticleCloud mu = cloud_at(traj, t);
    const QKernel kernel(mu, fs);
    const auto rows =
        q_samples(kernel, family, teacher, n_mc_per_time, opt.common_draws ? 0u : lane, opt);
    std::vector<std::vector<double>> cols(nf);
    for (std::size_t a = 0; a < nf; ++a) cols[a] = column(rows, a);
    Matrix m(nf, std::vector<CovarianceReport>(nf));
    for (std::size_t a = 0; a < nf; ++a) {
      for (std::size_t b = a; b < nf; ++b) m[a][b] = m[b][a] = sample_covariance(cols[a], cols[b]);
    }
    return m;
  };
  auto below = [](double t, double s) { return t < s - 1e-12 * std::max(1.0, s); };

  std::vector<Matrix> grid;  // lazily filled per stored time
  std::vector<std::vector<std::vector<CovarianceReport>>> out;
  for (double s : s_list) {
    detail::check_time(traj, s);
    std::vector<double> nodes;
    for (double t : traj.times) {
      if (below(t, s)) nodes.push_back(t);
    }
    nodes.push_back(s);
    Matrix result(nf, std::vector<CovarianceReport>(nf));
    for (auto& r : result) {
      for (auto& c : r) c.t = s;
    }
    if (nodes.size() >= 2) {
      const std::size_t last = nodes.size() - 1;
      while (grid.size() < last) {
        grid.push_back(node_matrix(traj.times[grid.size()], static_cast<std::uint32_t>(grid.size())));
      }
      const bool on_grid = last < traj.times.size() && traj.times[last] == s;
      if (on_grid && grid.size() == last) {
        grid.push_back(node_matrix(s, static_cast<std::uint32_t>(last)));
      }
      const Matrix end_node =
          on_grid ? grid[last] : node_matrix(s, static_cast<std::uint32_t>(last));
      const double k2 = traj.kappa * traj.kappa;
      for (std::size_t a = 0; a < nf; ++a) {
        for (std::size_t b = 0; b < nf; ++b) {
          double integral = 0.0, var = 0.0;
          std::size_t n = 0;
          for (std::size_t k = 0; k < nodes.size(); ++k) {
            const auto& rep = k < last ? grid[k][a][b] : end_node[a][b];
            const double left = k > 0 ? nodes[k] - nodes[k - 1] : 0.0;
            const double right = k + 1 < nodes.size() ? nodes[k + 1] - nodes[k] : 0.0;
            const double w = 0.5 * (left + right);
            integral += w * rep.estimate;
            var += w * w * rep.std_error * rep.std_error;
            n += rep.n_samples;
          }
          result[a][b].estimate = k2 * integral;
          result[a][b].std_error = k2 * std::sqrt(var);
          result[a][b].n_samples = n;
        }
      }
    }
    out.push_back(std::move(result));
  }
  return out;
}

/// Single-pair, single-time form of covariance_integrals.
inline CovarianceReport covariance_integral(const TestFunction& f,
                                            const TestFunction& g, double s,
                                            const MeanFieldTrajectory& traj,
                                            KernelFamily family,
                                            std::size_t n_mc_per_time,
                                            const TeacherSpec& teacher,
                                            const CovarianceOptions& opt) {
  return covariance_integrals({f, g}, {s}, traj, family, n_mc_per_time, teacher, opt)[0][0][1];
}

// ---------------------------------------------------------------------------

struct JensenRow {
  std::string f;
  double t = 0.0;
  CovarianceReport shared;
  CovarianceReport mivi;
  /// One-sided z for Var_mivi >= Var_shared; empty when both are zero.
  std::optional<double> z;
};

/// z-score of (a - b) with independent errors; nullopt when degenerate.
inline std::optional<double> ordering_z(const CovarianceReport& a,
                                        const CovarianceReport& b) {
  const double se = std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
  if (a.estimate == 0.0 && b.estimate == 0.0) return std::nullopt;
  if (!(se > 0.0)) return std::nullopt;
  return (a.estimate - b.estimate) / se;
}

inline std::vector<JensenRow> jensen_report(const std::vector<TestFunction>& fs,
                                            const MeanFieldTrajectory& traj,
                                            const std::vector<double>& times,
                                            std::size_t n_mc,
                                            const TeacherSpec& teacher,
                                            const CovarianceOptions& opt) {
  if (fs.empty()) throw std::invalid_argument("jensen_report: no test functions");
  std::vector<JensenRow> rows;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const ParticleCloud mu = cloud_at(traj, times[k]);
    const QKernel kernel(mu, fs);
    const auto lane = static_cast<std::uint32_t>(k);
    const auto s_rows = q_samples(kernel, KernelFamily::Shared, teacher, n_mc, lane, opt);
    const auto m_rows = q_samples(kernel, KernelFamily::MiVI, teacher, n_mc, lane, opt);
    for (std::size_t f = 0; f < fs.size(); ++f) {
      JensenRow row;
      row.f = fs[f].name();
      row.t = times[k];
      const auto sc = column(s_rows, f);
      const auto mc = column(m_rows, f);
      row.shared = sample_covariance(sc, sc);
      row.mivi = sample_covariance(mc, mc);
      row.shared.t = row.mivi.t = times[k];
      row.z = ordering_z(row.mivi, row.shared);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace mfvi
