#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "mfvi/mfvi.hpp"

namespace mfvi::testing {

/// A cloud with every entry drawn from N(0, scale^2) and rho in [-1, 1].
inline ParticleCloud random_cloud(const Dims& dims, std::size_t n, std::uint64_t seed,
                                  double scale = 0.7) {
  ParticleCloud c(dims, n);
  RngStream rng(seed, {0, 0, 0, Purpose::Test});
  for (std::size_t i = 0; i < n; ++i) {
    auto r = c.row(i);
    for (std::size_t k = 0; k < dims.d(); ++k) r[k] = scale * rng.normal();
    r[dims.d()] = -1.0 + 2.0 * rng.uniform();
  }
  return c;
}

inline std::vector<double> normals(std::size_t n, std::uint64_t seed, std::uint32_t index = 0) {
  std::vector<double> v(n);
  RngStream rng(seed, {0, 1, index, Purpose::Test});
  rng.fill_normal(v);
  return v;
}

inline std::vector<double> uniforms(std::size_t n, std::uint64_t seed, std::uint32_t index = 0) {
  std::vector<double> v(n);
  RngStream rng(seed, {0, 2, index, Purpose::Test});
  rng.fill_uniform(v, -1.0, 1.0);
  return v;
}

inline PriorSpec standard_prior(const Dims& dims) {
  return PriorSpec{std::vector<double>(dims.d(), 0.0), 1.0};
}

inline InitSpec default_init(const Dims& dims) {
  InitSpec s;
  s.m_init_mean.assign(dims.d(), 0.0);
  return s;
}

}  // namespace mfvi::testing
