#pragma once

// Replica orchestration and the fixed-time statistics of <f, mu_t^N>.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfvi/data.hpp"
#include "mfvi/meanfield.hpp"
#include "mfvi/parallel.hpp"
#include "mfvi/schemes.hpp"
#include "mfvi/test_functions.hpp"

namespace mfvi {

inline constexpr double kZ95 = 1.959963984540054;

/// Unbiased sample variance by two passes.
inline double sample_variance(std::span<const double> v) {
  if (v.size() < 2) throw std::invalid_argument("sample_variance: need >= 2 values");
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

inline double sample_mean(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("sample_mean: empty");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

struct Interval {
  double value = 0.0;
  double low = 0.0;
  double high = 0.0;
  /// 1.96 * standard error; NaN when fewer than two groups.
  double half_width() const { return 0.5 * (high - low); }
};

/// mean +- 1.96 sd / sqrt(n) over the given values.
inline Interval mean_ci(std::span<const double> v) {
  Interval r;
  r.value = sample_mean(v);
  if (v.size() < 2) {
    r.low = r.high = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  const double h = kZ95 * std::sqrt(sample_variance(v) / static_cast<double>(v.size()));
  r.low = r.value - h;
  r.high = r.value + h;
  return r;
}

struct ReplicaStats {
  Scheme scheme = Scheme::BbB;
  std::size_t n = 0;
  std::size_t n_replicas = 0;
  std::size_t n_groups = 0;
  std::uint64_t seed = 0;
  std::vector<double> times;
  std::vector<std::string> names;
  /// values[f][c][g * n_replicas + r]; NaN for excluded replicas.
  std::vector<std::vector<std::vector<double>>> values;
  std::vector<std::uint32_t> diverged;  // global replica ids
  /// Gaussian d-vectors drawn by one completed run, as counted.
  std::uint64_t draws_per_run = 0;

  std::size_t total() const { return n_replicas * n_groups; }
  bool excluded(std::size_t r) const {
    for (auto d : diverged) {
      if (d == r) return true;
    }
    return false;
  }
};

/// n_groups x n_replicas independent training runs. Replica r (global id)
/// reads data stream r and init / scheme noise lane r, so different schemes
/// run with common random numbers.
inline ReplicaStats run_replicas(const SchemeConfig& cfg, std::size_t n,
                                 const TeacherSpec& teacher,
                                 const std::vector<TestFunction>& fs,
                                 const std::vector<double>& checkpoints,
                                 std::size_t n_replicas, std::size_t n_groups,
                                 std::uint64_t seed, unsigned threads = 0) {
  if (n_replicas < 2) throw std::invalid_argument("run_replicas: n_replicas must be >= 2");
  if (n_groups < 1) throw std::invalid_argument("run_replicas: n_groups must be >= 1");
  ReplicaStats st;
  st.scheme = cfg.scheme;
  st.n = n;
  st.n_replicas = n_replicas;
  st.n_groups = n_groups;
  st.seed = seed;
  st.times = checkpoints;
  for (const auto& f : fs) st.names.push_back(f.name());
  const std::size_t total = st.total();
  if (total > kMaxReplica) throw std::invalid_argument("run_replicas: too many replicas");
  st.values.assign(fs.size(), std::vector<std::vector<double>>(
                                  checkpoints.size(), std::vector<double>(total)));

  std::vector<std::uint8_t> failed(total, 0);
  std::vector<std::uint64_t> draws(total, 0);
  std::vector<std::uint64_t> failed_step(total, 0);
  std::vector<std::string> reasons(total);
  parallel_for(total, threads, [&](std::size_t r) {
    const auto id = static_cast<std::uint32_t>(r);
    try {
      const auto res = train(cfg, n, DataSource{teacher, seed, id}, checkpoints, fs,
                             StepRng{seed, id});
      draws[r] = res.draws.gaussian_vectors;
      for (std::size_t f = 0; f < fs.size(); ++f) {
        for (std::size_t c = 0; c < checkpoints.size(); ++c) {
          st.values[f][c][r] = res.trace.values[f][c];
        }
      }
    } catch (const DivergenceError& e) {
      failed[r] = 1;
      failed_step[r] = e.step();
      reasons[r] = e.what();
      for (auto& fv : st.values) {
        for (auto& cv : fv) cv[r] = std::numeric_limits<double>::quiet_NaN();
      }
    }
  });
  for (std::size_t r = 0; r < total; ++r) {
    if (failed[r]) {
      st.diverged.push_back(static_cast<std::uint32_t>(r));
    } else {
      st.draws_per_run = std::max(st.draws_per_run, draws[r]);
    }
  }
  if (!st.diverged.empty()) {
    if (st.diverged.size() * 100 >= total) {
      throw DivergenceError(st.diverged.front(), failed_step[st.diverged.front()]);
    }
    std::fprintf(stderr, "warning: %zu of %zu replicas diverged and were excluded (%s)\n",
                 st.diverged.size(), total, reasons[st.diverged.front()].c_str());
  }
  return st;
}

/// Non-excluded values of one group at (f, c), sorted so that statistics do
/// not depend on replica order.
inline std::vector<double> group_values(const ReplicaStats& st, std::size_t f,
                                        std::size_t c, std::size_t g) {
  std::vector<double> out;
  out.reserve(st.n_replicas);
  for (std::size_t r = g * st.n_replicas; r < (g + 1) * st.n_replicas; ++r) {
    if (!st.excluded(r)) out.push_back(st.values[f][c][r]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct VarianceRow {
  double t = 0.0;
  std::string f;
  Interval scaled;             // N * V-hat over groups
  std::vector<double> groups;  // N * V-hat per group
};

/// N * Var[<f, mu_t^N>]: per-group variance scaled by N, then mean and 95%
/// interval across groups. Rows are ordered by checkpoint, then function.
inline std::vector<VarianceRow> scaled_variance(const ReplicaStats& st) {
  std::vector<VarianceRow> rows;
  const double nn = static_cast<double>(st.n);
  for (std::size_t c = 0; c < st.times.size(); ++c) {
    for (std::size_t f = 0; f < st.names.size(); ++f) {
      VarianceRow row;
      row.t = st.times[c];
      row.f = st.names[f];
      for (std::size_t g = 0; g < st.n_groups; ++g) {
        row.groups.push_back(nn * sample_variance(group_values(st, f, c, g)));
      }
      row.scaled = mean_ci(row.groups);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

/// Replica mean of <f, mu_t^N> with its 95% interval, pooled over groups.
inline Interval replica_mean(const ReplicaStats& st, std::size_t f, std::size_t c) {
  std::vector<double> v;
  for (std::size_t r = 0; r < st.total(); ++r) {
    if (!st.excluded(r)) v.push_back(st.values[f][c][r]);
  }
  std::sort(v.begin(), v.end());
  return mean_ci(v);
}

/// z-score of a - b from two 95% intervals, treated as independent.
inline double difference_z(const Interval& a, const Interval& b) {
  const double se = std::hypot(a.half_width(), b.half_width()) / kZ95;
  return (a.value - b.value) / se;
}

/// Whether the 95% interval of the slope between two points contains zero.
inline bool slope_ci_contains_zero(const Interval& a, const Interval& b) {
  return std::abs(difference_z(a, b)) <= kZ95;
}

struct GapRow {
  Scheme scheme = Scheme::BbB;
  std::size_t n = 0;
  Interval gap;    // mean |<f, mu_t^N> - <f, mu-bar_t>| over replicas
  Interval value;  // mean <f, mu_t^N> over replicas
};

/// Replica-averaged distance to the mean-field value at time t.
inline std::vector<GapRow> lln_gap(const std::vector<Scheme>& schemes,
                                   const std::vector<std::size_t>& n_list,
                                   const TestFunction& f, double t,
                                   const MeanFieldTrajectory& traj,
                                   const SchemeConfig& base,
                                   const TeacherSpec& teacher,
                                   std::size_t n_replicas, std::uint64_t seed,
                                   unsigned threads = 0) {
  const double limit = eval_observable(traj, f, t);
  std::vector<GapRow> rows;
  for (Scheme s : schemes) {
    for (std::size_t n : n_list) {
      SchemeConfig cfg = base;
      cfg.scheme = s;
      cfg.horizon_t = t;
      const auto st = run_replicas(cfg, n, teacher, {f}, {t}, n_replicas, 1, seed, threads);
      std::vector<double> vals, gaps;
      for (std::size_t r = 0; r < st.total(); ++r) {
        if (st.excluded(r)) continue;
        vals.push_back(st.values[0][0][r]);
        gaps.push_back(std::abs(st.values[0][0][r] - limit));
      }
      rows.push_back({s, n, mean_ci(gaps), mean_ci(vals)});
    }
  }
  return rows;
}

}  // namespace mfvi
