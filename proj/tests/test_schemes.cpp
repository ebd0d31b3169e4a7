#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "oracles.hpp"
#include "mfvi/schemes.hpp"

namespace mfvi {
namespace {

using testing::max_abs_diff;
using testing::oracle_bbb;
using testing::oracle_idealized;
using testing::oracle_mivi;
using testing::random_cloud;

SchemeConfig make_cfg(Scheme s, const Dims& dims, double kappa = 0.8, std::size_t mc = 7) {
  SchemeConfig c;
  c.scheme = s;
  c.kappa = kappa;
  c.mc_samples = mc;
  c.horizon_t = 1.0;
  c.prior = PriorSpec{std::vector<double>(dims.d(), 0.1), 1.3};
  c.init = testing::default_init(dims);
  return c;
}

Sample make_sample(const Dims& dims, std::uint64_t seed) {
  const auto t = init_teacher(dims.d_in, dims.d_out, 0.5, seed);
  return DataSource{t, seed, 0}.sample(3);
}

class OracleTest : public ::testing::TestWithParam<std::tuple<Scheme, std::size_t>> {};

TEST_P(OracleTest, OneStepMatchesEquation) {
  const auto [scheme, n] = GetParam();
  for (const Dims dims : {Dims{10, 1}, Dims{4, 3}}) {
    const auto cfg = make_cfg(scheme, dims);
    auto cloud = random_cloud(dims, n, 100 + n);
    cloud.set_step(5);
    const auto s = make_sample(dims, 7);
    const StepRng rng{31, 2};
    ParticleCloud expected = cloud;
    switch (scheme) {
      case Scheme::Idealized: expected = oracle_idealized(cloud, s, cfg, rng); break;
      case Scheme::BbB: expected = oracle_bbb(cloud, s, cfg, rng); break;
      case Scheme::MiVI: expected = oracle_mivi(cloud, s, cfg, rng); break;
    }
    step(cloud, s, cfg, rng);
    EXPECT_EQ(cloud.step(), 6u);
    EXPECT_LE(max_abs_diff(cloud, expected), 1e-12) << to_string(scheme) << " N=" << n;
  }
}

INSTANTIATE_TEST_SUITE_P(
    AllSchemes, OracleTest,
    ::testing::Combine(::testing::Values(Scheme::Idealized, Scheme::BbB, Scheme::MiVI),
                       ::testing::Values(std::size_t{1}, std::size_t{2}, std::size_t{3})));

TEST(Schemes, ZeroKappaLeavesCloudUnchanged) {
  const Dims dims{5, 2};
  for (Scheme s : {Scheme::Idealized, Scheme::BbB, Scheme::MiVI}) {
    const auto cfg = make_cfg(s, dims, 0.0);
    auto cloud = random_cloud(dims, 4, 3);
    const auto before = cloud;
    step(cloud, make_sample(dims, 1), cfg, StepRng{1, 0});
    for (std::size_t k = 0; k < cloud.data().size(); ++k)
      EXPECT_EQ(cloud.data()[k], before.data()[k]);
    EXPECT_EQ(cloud.step(), 1u);
  }
}

TEST(Schemes, SingleNeuronIdealizedHasNoPairwiseTerm) {
  // At N = 1 the idealized move is -kappa <(phi - y) grad phi> - kappa grad KL.
  const Dims dims{3, 1};
  const auto cfg = make_cfg(Scheme::Idealized, dims, 0.5, 11);
  const auto cloud = random_cloud(dims, 1, 4);
  const auto s = make_sample(dims, 2);
  const StepRng rng{3, 0};
  const auto inc = idealized_increment(cloud, s, cfg, rng, 0);
  const auto z = ideal_gamma_draws(rng, 0, 0, s.x, dims, 11);
  const auto gk = grad_kl(cloud.view(0), cfg.prior);
  std::vector<double> ref(dims.n_params(), 0.0);
  for (std::size_t g = 0; g < 11; ++g) {
    const std::vector<double> zg(z.begin() + g * 4, z.begin() + (g + 1) * 4);
    const auto p = phi(cloud.view(0), zg, s.x, dims);
    const auto J = grad_phi(cloud.view(0), zg, s.x, dims);
    for (std::size_t q = 0; q < dims.n_params(); ++q) ref[q] += (p[0] - s.y[0]) * J(q, 0) / 11;
  }
  for (std::size_t q = 0; q < dims.n_params(); ++q)
    EXPECT_NEAR(inc[q], -0.5 * ref[q] - 0.5 * gk[q], 1e-13);
}

TEST(Schemes, IdealizedReducedDrawsHaveFullLaw) {
  // The reduced draws put all of z_in along x; <z_in, x> must be N(0, ||x||^2).
  const Dims dims{6, 1};
  const std::vector<double> x{0.3, -0.2, 0.9, 0.1, 0.0, -0.5};
  const double xn2 = 0.3 * 0.3 + 0.04 + 0.81 + 0.01 + 0.25;
  const std::size_t G = 100000;
  const auto z = ideal_gamma_draws(StepRng{5, 0}, 0, 0, x, dims, G);
  double s = 0.0, s2 = 0.0, zo2 = 0.0;
  for (std::size_t g = 0; g < G; ++g) {
    double q = 0.0;
    for (std::size_t k = 0; k < 6; ++k) q += z[g * 7 + k] * x[k];
    s += q;
    s2 += q * q;
    zo2 += z[g * 7 + 6] * z[g * 7 + 6];
  }
  EXPECT_NEAR(s / G, 0.0, 4.0 * std::sqrt(xn2 / G));
  EXPECT_NEAR(s2 / G, xn2, 4.0 * xn2 * std::sqrt(2.0 / G));
  EXPECT_NEAR(zo2 / G, 1.0, 4.0 * std::sqrt(2.0 / G));
}

TEST(Schemes, MiviIsPermutationEquivariant) {
  const Dims dims{4, 2};
  const auto cfg = make_cfg(Scheme::MiVI, dims);
  auto cloud = random_cloud(dims, 5, 8);
  const std::size_t perm[] = {2, 4, 0, 1, 3};
  ParticleCloud permuted(dims, 5);
  for (std::size_t i = 0; i < 5; ++i) permuted.set_neuron(i, cloud.neuron(perm[i]));
  const auto s = make_sample(dims, 6);
  step(cloud, s, cfg, StepRng{4, 0});
  step(permuted, s, cfg, StepRng{4, 0});
  // Only the summation order of the shared residual differs.
  for (std::size_t i = 0; i < 5; ++i) {
    const auto a = cloud.row(perm[i]);
    const auto b = permuted.row(i);
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-15);
  }
}

TEST(Schemes, KlOnlyPullContractsGeometrically) {
  const Dims dims{3, 1};
  auto cfg = make_cfg(Scheme::BbB, dims, 0.5);
  cfg.data_term = false;
  const std::size_t n = 4;
  auto cloud = random_cloud(dims, n, 12);
  const double factor = 1.0 - cfg.kappa / (n * cfg.prior.sigma0 * cfg.prior.sigma0);
  for (int k = 0; k < 50; ++k) {
    const auto before = cloud;
    step(cloud, make_sample(dims, 1), cfg, StepRng{1, 0});
    for (std::size_t i = 0; i < n; ++i) {
      double a = 0.0, b = 0.0;
      for (std::size_t j = 0; j < dims.d(); ++j) {
        a += std::pow(cloud.view(i).m[j] - cfg.prior.m0[j], 2);
        b += std::pow(before.view(i).m[j] - cfg.prior.m0[j], 2);
      }
      EXPECT_LE(std::sqrt(a), factor * std::sqrt(b) * (1 + 1e-14));
    }
  }
}

TEST(Schemes, DivergenceIsReported) {
  const Dims dims{2, 1};
  const auto cfg = make_cfg(Scheme::BbB, dims, 1e308);
  auto cloud = random_cloud(dims, 2, 1, 50.0);
  EXPECT_THROW(step(cloud, make_sample(dims, 1), cfg, StepRng{1, 0}), DivergenceError);
}

TEST(Train, DrawCountsMatchAccounting) {
  const Dims dims{3, 1};
  const auto teacher = init_teacher(3, 1, 0.0, 1);
  for (std::size_t n : {7u, 20u}) {
    for (Scheme s : {Scheme::Idealized, Scheme::BbB, Scheme::MiVI}) {
      auto cfg = make_cfg(s, dims, 1.0, 5);
      cfg.horizon_t = 1.3;
      const auto res = train(cfg, n, DataSource{teacher, 1, 0}, {}, {}, StepRng{1, 0});
      const std::uint64_t steps = static_cast<std::uint64_t>(std::floor(1.3 * n));
      EXPECT_EQ(res.cloud.step(), steps);
      const std::uint64_t want = s == Scheme::BbB   ? steps * n
                                 : s == Scheme::MiVI ? 2 * steps
                                                     : steps * n * 5;
      EXPECT_EQ(res.draws.gaussian_vectors, want);
      EXPECT_EQ(expected_draws(cfg, n, steps), want);
    }
  }
}

TEST(Train, ZeroStepsRecordsInitialObservables) {
  const Dims dims{3, 1};
  auto cfg = make_cfg(Scheme::BbB, dims);
  cfg.horizon_t = 0.05;  // floor(0.05 * 10) = 0
  const auto f = TestFunction::mean();
  const auto res =
      train(cfg, 10, DataSource{init_teacher(3, 1, 0, 1), 1, 0}, {0.0, 0.05}, {f}, StepRng{2, 0});
  const auto init = init_cloud(10, dims, cfg.init, 2, 0);
  EXPECT_EQ(res.trace.values[0][0], f.average(init));
  EXPECT_EQ(res.trace.values[0][1], f.average(init));
}

TEST(Train, ZeroKappaMatchesExplicitSteps) {
  const Dims dims{4, 2};
  const DataSource data{init_teacher(4, 2, 0.3, 2), 5, 0};
  for (Scheme s : {Scheme::Idealized, Scheme::BbB, Scheme::MiVI}) {
    auto cfg = make_cfg(s, dims, 0.0, 3);
    cfg.horizon_t = 1.5;
    const std::size_t n = 12;
    const StepRng rng{4, 2};
    const auto res = train(cfg, n, data, {0.0, 0.75, 1.5}, {TestFunction::mean()}, rng);
    auto cloud = init_cloud(n, dims, cfg.init, rng.seed, rng.replica);
    DrawCounter draws;
    while (cloud.step() < steps_for(cfg.horizon_t, n)) {
      step(cloud, data.sample(cloud.step()), cfg, rng, &draws);
    }
    EXPECT_EQ(res.cloud.step(), cloud.step());
    for (std::size_t k = 0; k < cloud.data().size(); ++k) {
      EXPECT_EQ(res.cloud.data()[k], cloud.data()[k]);
    }
    EXPECT_EQ(res.draws.gaussian_vectors, draws.gaussian_vectors);
    for (double v : res.trace.values[0]) EXPECT_EQ(v, TestFunction::mean().average(cloud));
  }
}

TEST(Train, ConstantObservableAndReproducibility) {
  const Dims dims{4, 2};
  auto cfg = make_cfg(Scheme::MiVI, dims);
  cfg.horizon_t = 2.0;
  const auto one = TestFunction::custom("one", [](ParamView) { return 1.0; });
  const DataSource data{init_teacher(4, 2, 0.3, 2), 3, 1};
  const std::vector<double> cps{0.0, 0.5, 1.0, 2.0};
  const auto a = train(cfg, 15, data, cps, {one, TestFunction::std_dev()}, StepRng{3, 1});
  const auto b = train(cfg, 15, data, cps, {one, TestFunction::std_dev()}, StepRng{3, 1});
  for (double v : a.trace.values[0]) EXPECT_EQ(v, 1.0);
  EXPECT_EQ(a.trace.values, b.trace.values);
  EXPECT_EQ(a.trace.steps, (std::vector<std::uint64_t>{0, 7, 15, 30}));
  EXPECT_THROW(train(cfg, 15, data, {3.0}, {one}, StepRng{3, 1}), std::invalid_argument);
}

}  // namespace
}  // namespace mfvi
