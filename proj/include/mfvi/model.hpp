#pragma once

// Variational two-layer network primitives.
//
// A neuron carries theta = (m, rho) with m in R^d, d = d_in + d_out. Its
// weights are w = m + softplus(rho) * z with z ~ N(0, I_d), and its output is
// s(w, x) = tanh(<w_in, x>) * w_out, where w_in is the first d_in entries of w
// and w_out the last d_out.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfvi {

struct Dims {
  std::size_t d_in = 1;
  std::size_t d_out = 1;

  constexpr std::size_t d() const { return d_in + d_out; }
  /// Length of theta = (m, rho).
  constexpr std::size_t n_params() const { return d_in + d_out + 1; }

  friend bool operator==(const Dims&, const Dims&) = default;
};

/// Read-only view of one neuron's parameters.
struct ParamView {
  std::span<const double> m;
  double rho = 0.0;
};

struct NeuronParam {
  std::vector<double> m;
  double rho = 0.0;

  operator ParamView() const { return {m, rho}; }  // NOLINT(google-explicit-constructor)
};

struct PriorSpec {
  std::vector<double> m0;
  double sigma0 = 1.0;

  void validate(const Dims& dims) const {
    if (!(sigma0 > 0.0) || !std::isfinite(sigma0)) {
      throw std::invalid_argument("PriorSpec: sigma0 must be positive");
    }
    if (m0.size() != dims.d()) {
      throw std::invalid_argument("PriorSpec: m0 has wrong length");
    }
  }
};

namespace detail {
inline void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}
}  // namespace detail

// ---------------------------------------------------------------------------
// softplus and friends. Branches switch at |rho| > 30.

inline double softplus(double rho) {
  if (rho > 30.0) return rho + std::log1p(std::exp(-rho));
  return std::log1p(std::exp(rho));
}

/// d/drho softplus(rho), the logistic function.
inline double softplus_deriv(double rho) {
  if (rho >= 0.0) return 1.0 / (1.0 + std::exp(-rho));
  const double e = std::exp(rho);
  return e / (1.0 + e);
}

/// rho such that softplus(rho) == s, for s > 0.
inline double softplus_inverse(double s) {
  if (!(s > 0.0)) throw std::invalid_argument("softplus_inverse: s <= 0");
  if (s > 30.0) return s + std::log1p(-std::exp(-s));
  return std::log(std::expm1(s));
}

// ---------------------------------------------------------------------------

inline std::vector<double> psi(ParamView theta, std::span<const double> z) {
  detail::require(theta.m.size() == z.size(), "psi: dimension mismatch");
  const double g = softplus(theta.rho);
  std::vector<double> w(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) w[k] = theta.m[k] + g * z[k];
  return w;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline std::vector<double> activation(std::span<const double> w,
                                      std::span<const double> x,
                                      const Dims& dims) {
  detail::require(w.size() == dims.d() && x.size() == dims.d_in,
                  "activation: dimension mismatch");
  const double t = std::tanh(dot(w.first(dims.d_in), x));
  std::vector<double> out(dims.d_out);
  for (std::size_t o = 0; o < dims.d_out; ++o) out[o] = t * w[dims.d_in + o];
  return out;
}

inline void check_dims(ParamView theta, std::span<const double> z,
                       std::span<const double> x, const Dims& dims,
                       const char* who) {
  if (theta.m.size() != dims.d() || z.size() != dims.d() ||
      x.size() != dims.d_in) {
    throw std::invalid_argument(std::string(who) + ": dimension mismatch");
  }
}

inline std::vector<double> phi(ParamView theta, std::span<const double> z,
                               std::span<const double> x, const Dims& dims) {
  check_dims(theta, z, x, dims, "phi");
  return activation(psi(theta, z), x, dims);
}

/// Jacobian of phi w.r.t. theta, stored row-major as (d+1) x d_out:
/// rows 0..d-1 are d/dm, row d is d/drho.
struct Jacobian {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Jacobian(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c) {}
  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return values[r * cols + c];
  }
};

inline Jacobian grad_phi(ParamView theta, std::span<const double> z,
                         std::span<const double> x, const Dims& dims) {
  check_dims(theta, z, x, dims, "grad_phi");
  const std::size_t din = dims.d_in, dout = dims.d_out;
  const double gp = softplus_deriv(theta.rho);
  const std::vector<double> w = psi(theta, z);
  const double t = std::tanh(dot(std::span(w).first(din), x));
  const double sech2 = 1.0 - t * t;
  const double xz = dot(z.first(din), x);

  Jacobian J(dims.n_params(), dout);
  for (std::size_t o = 0; o < dout; ++o) {
    const double wo = w[din + o];
    for (std::size_t k = 0; k < din; ++k) J(k, o) = sech2 * wo * x[k];
    J(din + o, o) = t;
    J(dims.d(), o) = gp * (sech2 * wo * xz + t * z[din + o]);
  }
  return J;
}

/// Vector-Jacobian product sum_o r_o * d phi_o / d theta, written to `out`
/// (length d+1). This is the contraction every SGD update needs.
inline void grad_phi_vjp(ParamView theta, std::span<const double> z,
                         std::span<const double> x, std::span<const double> r,
                         const Dims& dims, std::span<double> out) {
  const std::size_t din = dims.d_in, dout = dims.d_out;
  const double g = softplus(theta.rho);
  double a = 0.0, xz = 0.0;
  for (std::size_t k = 0; k < din; ++k) {
    a += (theta.m[k] + g * z[k]) * x[k];
    xz += z[k] * x[k];
  }
  const double t = std::tanh(a);
  const double sech2 = 1.0 - t * t;
  double r_w = 0.0, r_z = 0.0;
  for (std::size_t o = 0; o < dout; ++o) {
    r_w += r[o] * (theta.m[din + o] + g * z[din + o]);
    r_z += r[o] * z[din + o];
  }
  for (std::size_t k = 0; k < din; ++k) out[k] = sech2 * r_w * x[k];
  for (std::size_t o = 0; o < dout; ++o) out[din + o] = t * r[o];
  out[dims.d()] = softplus_deriv(theta.rho) * (sech2 * r_w * xz + t * r_z);
}

/// Jacobian-vector product (d phi / d theta) . v, a d_out vector.
inline void grad_phi_jvp(ParamView theta, std::span<const double> z,
                         std::span<const double> x, std::span<const double> v,
                         const Dims& dims, std::span<double> out) {
  const std::size_t din = dims.d_in, dout = dims.d_out;
  const double g = softplus(theta.rho);
  double a = 0.0, xz = 0.0, xv = 0.0;
  for (std::size_t k = 0; k < din; ++k) {
    a += (theta.m[k] + g * z[k]) * x[k];
    xz += z[k] * x[k];
    xv += v[k] * x[k];
  }
  const double t = std::tanh(a);
  const double sech2 = 1.0 - t * t;
  const double gp = softplus_deriv(theta.rho);
  const double vr = v[dims.d()];
  for (std::size_t o = 0; o < dout; ++o) {
    const double wo = theta.m[din + o] + g * z[din + o];
    out[o] = sech2 * wo * xv + t * v[din + o] +
             vr * gp * (sech2 * wo * xz + t * z[din + o]);
  }
}

// ---------------------------------------------------------------------------
// KL(q_theta | N(m0, sigma0^2 I_d))

inline double kl(ParamView theta, const PriorSpec& prior) {
  const std::size_t d = theta.m.size();
  detail::require(prior.m0.size() == d, "kl: dimension mismatch");
  const double s2 = prior.sigma0 * prior.sigma0;
  double dist2 = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const double diff = theta.m[k] - prior.m0[k];
    dist2 += diff * diff;
  }
  const double g = softplus(theta.rho);
  const double ratio = g * g / s2;
  const double half_d = 0.5 * static_cast<double>(d);
  return dist2 / (2.0 * s2) + half_d * (ratio - 1.0) - half_d * std::log(ratio);
}

inline std::vector<double> grad_kl(ParamView theta, const PriorSpec& prior) {
  const std::size_t d = theta.m.size();
  detail::require(prior.m0.size() == d, "grad_kl: dimension mismatch");
  const double s2 = prior.sigma0 * prior.sigma0;
  std::vector<double> out(d + 1);
  for (std::size_t k = 0; k < d; ++k) out[k] = (theta.m[k] - prior.m0[k]) / s2;
  const double g = softplus(theta.rho);
  const double gp = softplus_deriv(theta.rho);
  const double dd = static_cast<double>(d);
  out[d] = dd / s2 * gp * g - dd * gp / g;
  return out;
}

}  // namespace mfvi
