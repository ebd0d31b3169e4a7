#pragma once

// Straight-from-the-update-rule implementations of one training step, written
// without the library's factorizations, for comparison against step().

#include <algorithm>
#include <cmath>
#include <vector>

#include "mfvi/mfvi.hpp"

namespace mfvi::testing {

// theta_i - kappa/N^2 * sum_j sum_o r_{j,o} * J_i(., o) - kappa/N * grad KL, where
// r_j and J_i are supplied per neuron.
inline ParticleCloud apply_rule(const ParticleCloud& c, const SchemeConfig& cfg,
                         const std::vector<std::vector<double>>& update) {
  ParticleCloud out = c;
  const double n = static_cast<double>(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto gk = grad_kl(c.view(i), cfg.prior);
    auto r = out.row(i);
    for (std::size_t p = 0; p < r.size(); ++p) {
      r[p] = r[p] - cfg.kappa / (n * n) * update[i][p] - cfg.kappa / n * gk[p];
    }
  }
  out.advance_step();
  return out;
}

inline ParticleCloud oracle_bbb(const ParticleCloud& c, const Sample& s, const SchemeConfig& cfg,
                         const StepRng& rng) {
  const Dims dims = c.dims();
  const std::size_t n = c.size();
  std::vector<std::vector<double>> z(n, std::vector<double>(dims.d()));
  for (std::size_t i = 0; i < n; ++i) {
    RngStream st(rng.seed, {rng.replica, static_cast<std::uint32_t>(c.step()),
                            static_cast<std::uint32_t>(i), Purpose::BbbNoise});
    st.fill_normal(z[i]);
  }
  std::vector<std::vector<double>> upd(n, std::vector<double>(dims.n_params(), 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const auto J = grad_phi(c.view(i), z[i], s.x, dims);
    for (std::size_t j = 0; j < n; ++j) {
      const auto pj = phi(c.view(j), z[j], s.x, dims);
      for (std::size_t p = 0; p < dims.n_params(); ++p)
        for (std::size_t o = 0; o < dims.d_out; ++o) upd[i][p] += (pj[o] - s.y[o]) * J(p, o);
    }
  }
  return apply_rule(c, cfg, upd);
}

inline ParticleCloud oracle_mivi(const ParticleCloud& c, const Sample& s, const SchemeConfig& cfg,
                          const StepRng& rng) {
  const Dims dims = c.dims();
  const std::size_t n = c.size();
  RngStream st(rng.seed, {rng.replica, static_cast<std::uint32_t>(c.step()), 0,
                          Purpose::MiviNoise});
  std::vector<double> z1(dims.d()), z2(dims.d());
  st.fill_normal(z1);
  st.fill_normal(z2);
  std::vector<std::vector<double>> upd(n, std::vector<double>(dims.n_params(), 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const auto J = grad_phi(c.view(i), z2, s.x, dims);
    for (std::size_t j = 0; j < n; ++j) {
      const auto pj = phi(c.view(j), z1, s.x, dims);
      for (std::size_t p = 0; p < dims.n_params(); ++p)
        for (std::size_t o = 0; o < dims.d_out; ++o) upd[i][p] += (pj[o] - s.y[o]) * J(p, o);
    }
  }
  return apply_rule(c, cfg, upd);
}

inline ParticleCloud oracle_idealized(const ParticleCloud& c, const Sample& s,
                               const SchemeConfig& cfg, const StepRng& rng) {
  const Dims dims = c.dims();
  const std::size_t n = c.size(), np = dims.n_params(), G = cfg.mc_samples;
  std::vector<std::vector<double>> phi_avg(n, std::vector<double>(dims.d_out, 0.0));
  std::vector<Jacobian> grad_avg(n, Jacobian(np, dims.d_out));
  std::vector<std::vector<double>> joint_avg(n, std::vector<double>(np, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const auto z = ideal_gamma_draws(rng, c.step(), i, s.x, dims, G);
    for (std::size_t g = 0; g < G; ++g) {
      const std::vector<double> zg(z.begin() + g * dims.d(), z.begin() + (g + 1) * dims.d());
      const auto p = phi(c.view(i), zg, s.x, dims);
      const auto J = grad_phi(c.view(i), zg, s.x, dims);
      for (std::size_t o = 0; o < dims.d_out; ++o) {
        phi_avg[i][o] += p[o] / G;
        for (std::size_t q = 0; q < np; ++q) {
          grad_avg[i](q, o) += J(q, o) / G;
          joint_avg[i][q] += (p[o] - s.y[o]) * J(q, o) / G;
        }
      }
    }
  }
  std::vector<std::vector<double>> upd(n, std::vector<double>(np, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      for (std::size_t q = 0; q < np; ++q)
        for (std::size_t o = 0; o < dims.d_out; ++o)
          upd[i][q] += (phi_avg[j][o] - s.y[o]) * grad_avg[i](q, o);
    }
    for (std::size_t q = 0; q < np; ++q) upd[i][q] += joint_avg[i][q];
  }
  return apply_rule(c, cfg, upd);
}

inline double max_abs_diff(const ParticleCloud& a, const ParticleCloud& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.data().size(); ++k)
    m = std::max(m, std::abs(a.data()[k] - b.data()[k]));
  return m;
}

}  // namespace mfvi::testing
