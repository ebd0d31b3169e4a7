#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "mfvi/model.hpp"
#include "mfvi/rng.hpp"

namespace mfvi {

/// N neurons' parameters at one SGD iteration, stored row-major N x (d+1).
class ParticleCloud {
 public:
  ParticleCloud() = default;
  ParticleCloud(Dims dims, std::size_t n)
      : dims_(dims), n_(n), params_(n * dims.n_params()) {
    if (n == 0) throw std::invalid_argument("ParticleCloud: n must be >= 1");
  }

  const Dims& dims() const { return dims_; }
  std::size_t size() const { return n_; }
  std::uint64_t step() const { return step_; }
  void advance_step() { ++step_; }
  void set_step(std::uint64_t s) { step_ = s; }

  ParamView view(std::size_t i) const {
    const auto row = this->row(i);
    return {row.first(dims_.d()), row[dims_.d()]};
  }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(params_).subspan(i * dims_.n_params(),
                                                    dims_.n_params());
  }
  std::span<double> row(std::size_t i) {
    return std::span<double>(params_).subspan(i * dims_.n_params(),
                                              dims_.n_params());
  }
  NeuronParam neuron(std::size_t i) const {
    const auto v = view(i);
    return {std::vector<double>(v.m.begin(), v.m.end()), v.rho};
  }
  void set_neuron(std::size_t i, const NeuronParam& p) {
    auto r = row(i);
    for (std::size_t k = 0; k < dims_.d(); ++k) r[k] = p.m.at(k);
    r[dims_.d()] = p.rho;
  }

  std::span<const double> data() const { return params_; }
  std::span<double> data() { return params_; }

  bool all_finite() const {
    for (double v : params_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const ParticleCloud& a, const ParticleCloud& b) {
    return a.dims_ == b.dims_ && a.n_ == b.n_ && a.step_ == b.step_ &&
           a.params_ == b.params_;
  }

 private:
  Dims dims_{};
  std::size_t n_ = 0;
  std::uint64_t step_ = 0;
  std::vector<double> params_;
};

/// Law of the initial parameters mu_0.
struct InitSpec {
  std::vector<double> m_init_mean;  // length d
  double m_init_std = 0.1;
  double rho_init = 0.5413248546129181;  // softplus^{-1}(1)
  double rho_init_std = 0.0;

  void validate(const Dims& dims) const {
    if (m_init_mean.size() != dims.d()) {
      throw std::invalid_argument("InitSpec: m_init_mean has wrong length");
    }
    if (!(m_init_std >= 0.0) || !(rho_init_std >= 0.0) ||
        !std::isfinite(rho_init)) {
      throw std::invalid_argument("InitSpec: invalid spread or rho_init");
    }
  }
};

/// Draw theta_0^i i.i.d. from mu_0. Neuron i reads lane
/// (replica, 0, i, purpose), so clouds of different sizes share prefixes.
inline ParticleCloud init_cloud(std::size_t n, const Dims& dims,
                                const InitSpec& init, std::uint64_t seed,
                                std::uint32_t replica,
                                Purpose purpose = Purpose::Init) {
  init.validate(dims);
  ParticleCloud cloud(dims, n);
  const std::size_t d = dims.d();
  for (std::size_t i = 0; i < n; ++i) {
    RngStream rng(seed, {replica, 0, static_cast<std::uint32_t>(i), purpose});
    auto r = cloud.row(i);
    for (std::size_t k = 0; k < d; ++k) {
      r[k] = init.m_init_mean[k] + init.m_init_std * rng.normal();
    }
    r[d] = init.rho_init + init.rho_init_std * rng.normal();
  }
  return cloud;
}

/// (1/N) sum_i phi(theta^i, z^i, x). `z` holds either one shared noise vector
/// (length d) or one per neuron (length N*d).
inline std::vector<double> network_output(const ParticleCloud& cloud,
                                          std::span<const double> x,
                                          std::span<const double> z) {
  const Dims& dims = cloud.dims();
  const std::size_t d = dims.d(), n = cloud.size();
  const bool shared = z.size() == d;
  if (!shared && z.size() != n * d) {
    throw std::invalid_argument("network_output: noise has wrong length");
  }
  std::vector<double> out(dims.d_out, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto zi = shared ? z : z.subspan(i * d, d);
    const auto p = phi(cloud.view(i), zi, x, dims);
    for (std::size_t o = 0; o < dims.d_out; ++o) out[o] += p[o];
  }
  for (double& v : out) v /= static_cast<double>(n);
  return out;
}

}  // namespace mfvi
