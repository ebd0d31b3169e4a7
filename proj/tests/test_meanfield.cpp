#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "helpers.hpp"
#include "mfvi/meanfield.hpp"

namespace mfvi {
namespace {

MeanFieldConfig small_config(const Dims& dims) {
  MeanFieldConfig c;
  c.particles = 150;
  c.dt = 0.01;
  c.horizon_t = 0.5;
  c.kappa = 1.0;
  c.prior = testing::standard_prior(dims);
  c.init = testing::default_init(dims);
  c.mc_gamma = 5;
  c.mc_data = 6;
  c.record_interval = 0.1;
  c.seed = 3;
  c.threads = 1;
  return c;
}

TEST(MeanField, ZeroKappaIsConstant) {
  const Dims dims{4, 1};
  auto cfg = small_config(dims);
  cfg.kappa = 0.0;
  const auto traj = solve_meanfield(cfg, init_teacher(4, 1, 0.0, 1));
  ASSERT_EQ(traj.times.size(), 6u);
  for (const auto& c : traj.clouds) {
    for (std::size_t k = 0; k < c.data().size(); ++k)
      EXPECT_EQ(c.data()[k], traj.clouds[0].data()[k]);
  }
}

// With only the KL term a single particle's mean follows
// m' = -kappa (m - m0) / sigma0^2, so m(t) - m0 = exp(-kappa t / sigma0^2)(m(0) - m0).
double kl_only_error(double dt) {
  const Dims dims{2, 1};
  auto cfg = small_config(dims);
  cfg.particles = 1;
  cfg.data_term = false;
  cfg.dt = dt;
  cfg.horizon_t = 1.0;
  cfg.kappa = 0.7;
  cfg.prior = PriorSpec{{0.2, -0.1, 0.4}, 1.5};
  cfg.init.m_init_mean = {1.0, 2.0, -1.0};
  cfg.init.m_init_std = 0.0;
  const auto traj = solve_meanfield(cfg, init_teacher(2, 1, 0.0, 1));
  const double rate = cfg.kappa / (1.5 * 1.5);
  double err = 0.0;
  for (std::size_t s = 0; s < traj.times.size(); ++s) {
    for (std::size_t k = 0; k < 3; ++k) {
      const double exact = cfg.prior.m0[k] + std::exp(-rate * traj.times[s]) *
                                                 (cfg.init.m_init_mean[k] - cfg.prior.m0[k]);
      err = std::max(err, std::abs(traj.clouds[s].view(0).m[k] - exact));
    }
  }
  return err;
}

TEST(MeanField, KlOnlyMatchesClosedFormToFirstOrder) {
  const double e1 = kl_only_error(0.01);
  const double e2 = kl_only_error(0.005);
  // Global Euler error for this linear ODE is about (rate^2 t e^{-rate t} / 2) dt.
  EXPECT_LT(e1, 0.01 * 1.0);
  EXPECT_NEAR(e1 / e2, 2.0, 0.05);
}

TEST(MeanField, DeterministicAcrossThreadCounts) {
  const Dims dims{3, 2};
  auto cfg = small_config(dims);
  cfg.particles = 200;  // more than one reduction chunk
  const auto teacher = init_teacher(3, 2, 0.5, 2);
  const auto a = solve_meanfield(cfg, teacher);
  cfg.threads = 4;
  const auto b = solve_meanfield(cfg, teacher);
  ASSERT_EQ(a.clouds.size(), b.clouds.size());
  for (std::size_t s = 0; s < a.clouds.size(); ++s) EXPECT_TRUE(a.clouds[s] == b.clouds[s]);
}

TEST(MeanField, ObservableAtStartAndConstants) {
  const Dims dims{3, 1};
  auto cfg = small_config(dims);
  cfg.particles = 1000;
  const auto traj = solve_meanfield(cfg, init_teacher(3, 1, 0.0, 5));
  const auto one = TestFunction::custom("one", [](ParamView) { return 1.0; });
  EXPECT_EQ(eval_observable(traj, one, 0.37), 1.0);
  // f_std at t=0 is exactly softplus(rho_init) since rho is not jittered.
  EXPECT_NEAR(eval_observable(traj, TestFunction::std_dev(), 0.0), 1.0, 1e-15);
  EXPECT_THROW(eval_observable(traj, one, 0.6), std::out_of_range);
  EXPECT_THROW(eval_observable(traj, one, -0.1), std::out_of_range);
  const auto f = TestFunction::mean();
  const double mid = eval_observable(traj, f, 0.15);
  EXPECT_NEAR(mid, 0.5 * (eval_observable(traj, f, 0.1) + eval_observable(traj, f, 0.2)),
              1e-15);
}

TEST(MeanField, InitialLawMean) {
  const Dims dims{5, 1};
  auto cfg = small_config(dims);
  cfg.particles = 4000;
  cfg.horizon_t = 0.01;
  cfg.init.m_init_std = 0.4;
  const auto traj = solve_meanfield(cfg, init_teacher(5, 1, 0.0, 5));
  const auto f = TestFunction::custom("m0sq", [](ParamView t) { return t.m[0] * t.m[0]; });
  // E[m_0^2] = 0.16, sd = 0.16 sqrt(2)
  EXPECT_NEAR(eval_observable(traj, f, 0.0), 0.16, 4.0 * 0.16 * std::sqrt(2.0 / 4000));

  cfg.init.m_init_std = 0.0;
  cfg.init.m_init_mean = {3.0, 0.0, 0.0, 0.0, 4.0, 0.0};
  const auto t2 = solve_meanfield(cfg, init_teacher(5, 1, 0.0, 5));
  EXPECT_DOUBLE_EQ(eval_observable(t2, TestFunction::mean(), 0.0), 5.0);
}

TEST(MeanField, SaveLoadRoundTripIsExact) {
  const Dims dims{3, 2};
  const auto traj = solve_meanfield(small_config(dims), init_teacher(3, 2, 0.0, 9));
  const auto path = std::filesystem::temp_directory_path() / "mfvi_traj_test.bin";
  save_trajectory(traj, path.string());
  const auto back = load_trajectory(path.string());
  std::filesystem::remove(path);
  EXPECT_EQ(back.times, traj.times);
  EXPECT_EQ(back.dt, traj.dt);
  ASSERT_EQ(back.clouds.size(), traj.clouds.size());
  for (std::size_t s = 0; s < traj.clouds.size(); ++s) EXPECT_TRUE(back.clouds[s] == traj.clouds[s]);
  for (double t : {0.0, 0.13, 0.5}) {
    EXPECT_EQ(eval_observable(back, TestFunction::mean(), t),
              eval_observable(traj, TestFunction::mean(), t));
  }
  EXPECT_THROW(load_trajectory("/nonexistent/traj.bin"), std::runtime_error);
}

TEST(MeanField, RefinementChangesObservableLittle) {
  const Dims dims{10, 1};
  auto cfg = small_config(dims);
  cfg.particles = 400;
  cfg.horizon_t = 1.0;
  cfg.dt = 0.02;
  cfg.mc_gamma = 8;
  cfg.mc_data = 8;
  const auto teacher = init_teacher(10, 1, 0.0, 4);
  const auto f = TestFunction::mean();
  const double start = eval_observable(solve_meanfield(cfg, teacher), f, 0.0);
  const double coarse = eval_observable(solve_meanfield(cfg, teacher), f, 1.0);
  cfg.dt /= 2;
  cfg.mc_gamma *= 2;
  cfg.mc_data *= 2;
  const double fine = eval_observable(solve_meanfield(cfg, teacher), f, 1.0);
  EXPECT_LT(std::abs(fine - coarse), 0.1 * std::abs(coarse - start));
}

}  // namespace
}  // namespace mfvi
