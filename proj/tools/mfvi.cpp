// mfvi: command-line driver for training runs, sweeps, the mean-field solver
// and the covariance estimators.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfvi/mfvi.hpp"

#ifndef MFVI_GIT_DESCRIBE
#define MFVI_GIT_DESCRIBE "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitPartial = 4;

struct Common {
  std::string config_path;
  std::string setting;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<double> kappa;
  std::optional<double> horizon;
  std::vector<std::string> schemes;
  std::vector<std::size_t> n_list;
  std::optional<std::size_t> replicas;
  std::optional<std::size_t> groups;
  std::vector<std::string> observables;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "JSON config file (comments allowed)");
  app->add_option("--setting", c.setting, "Preset: simple, complex or custom");
  app->add_option("--out", c.out, "Output directory; all outputs are written below it");
  app->add_option("--seed", c.seed, "Master seed (overrides MFVI_SEED and the config)");
  app->add_option("--threads", c.threads, "Worker threads (0 = available parallelism)");
  app->add_option("--kappa", c.kappa, "Learning rate");
  app->add_option("--t", c.horizon, "Horizon t");
  app->add_option("--scheme", c.schemes, "Schemes: idealized, bbb, mivi");
  app->add_option("--n", c.n_list, "Numbers of neurons");
  app->add_option("--replicas", c.replicas, "Replicas per group");
  app->add_option("--groups", c.groups, "Independent groups");
  app->add_option("--observable", c.observables, "f_mean, f_std, f_pred");
}

mfvi::ExperimentConfig resolve(const Common& c) {
  json j = json::object();
  if (!c.config_path.empty()) {
    std::ifstream in(c.config_path);
    if (!in) throw mfvi::ConfigError("cannot open config file '" + c.config_path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    j = mfvi::parse_config_text(ss.str());
    if (!j.is_object()) throw mfvi::ConfigError("config must be a JSON object");
  }
  if (!c.setting.empty()) {
    // A preset given on the command line replaces the preset-controlled keys.
    j["setting"] = c.setting;
    for (const char* k : {"d_in", "d_out", "noise_gamma", "t"}) j.erase(k);
  }
  if (const char* env = std::getenv("MFVI_SEED"); env && *env) {
    try {
      std::size_t pos = 0;
      j["seed"] = std::stoull(env, &pos);
      if (env[pos] != '\0') throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw mfvi::ConfigError(std::string("MFVI_SEED is not an integer: '") + env + "'");
    }
  }
  if (c.seed) j["seed"] = *c.seed;
  if (c.threads) j["threads"] = *c.threads;
  if (c.kappa) j["kappa"] = *c.kappa;
  if (c.horizon) {
    j["t"] = *c.horizon;
    j.erase("checkpoints");
  }
  if (!c.schemes.empty()) j["schemes"] = c.schemes;
  if (!c.n_list.empty()) j["n_list"] = c.n_list;
  if (c.replicas) j["replicas"] = *c.replicas;
  if (c.groups) j["groups"] = *c.groups;
  if (!c.observables.empty()) j["observables"] = c.observables;
  auto cfg = mfvi::config_from_json(j);
  cfg.validate();
  return cfg;
}

fs::path prepare_out(const std::string& out) {
  fs::path p(out);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw mfvi::ConfigError("cannot create output directory '" + out + "'");
  return p;
}

json snapshot(const mfvi::ExperimentConfig& cfg, const std::string& command) {
  json j;
  j["command"] = command;
  j["build"] = MFVI_GIT_DESCRIBE;
  j["config"] = mfvi::config_to_json(cfg);
  j["config"].erase("threads");  // outputs do not depend on it
  j["seed"] = cfg.seed;
  j["teacher"] = cfg.teacher();
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << text;
    if (!os) throw std::runtime_error("failed writing " + path.string());
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::size_t replica = 0;
  bool clouds = true;
};

int cmd_train(const Common& common, const TrainArgs& args) {
  const auto cfg = resolve(common);
  const auto out = prepare_out(common.out);
  const auto teacher = cfg.teacher();
  const auto fs_list = cfg.test_functions();
  const auto cps = cfg.resolved_checkpoints();
  if (args.replica > mfvi::kMaxReplica) throw mfvi::ConfigError("--replica too large");
  const auto rep = static_cast<std::uint32_t>(args.replica);

  std::ostringstream trace, clouds;
  mfvi::CsvWriter tw(trace, {"scheme", "N", "replica", "step", "t", "f", "value",
                             "gaussian_draws", "seed"});
  std::vector<std::string> header{"scheme", "N", "replica", "step", "t", "neuron"};
  for (std::size_t k = 0; k < cfg.dims().d(); ++k) header.push_back("m" + std::to_string(k));
  header.push_back("rho");
  header.push_back("seed");
  mfvi::CsvWriter cw(clouds, header);

  for (auto scheme : cfg.schemes) {
    for (auto n : cfg.n_list) {
      const auto res = mfvi::train(cfg.scheme_config(scheme), n,
                                   mfvi::DataSource{teacher, cfg.seed, rep}, cps, fs_list,
                                   mfvi::StepRng{cfg.seed, rep}, args.clouds);
      const std::string sname(mfvi::to_string(scheme));
      for (std::size_t c = 0; c < cps.size(); ++c) {
        for (std::size_t f = 0; f < fs_list.size(); ++f) {
          tw.row({sname, std::uint64_t{n}, std::uint64_t{rep}, res.trace.steps[c], cps[c],
                  res.trace.names[f], res.trace.values[f][c],
                  mfvi::expected_draws(cfg.scheme_config(scheme), n, res.trace.steps[c]),
                  cfg.seed});
        }
        if (args.clouds) {
          const auto& cl = res.snapshots[c];
          for (std::size_t i = 0; i < cl.size(); ++i) {
            std::vector<mfvi::CsvField> row{sname, std::uint64_t{n}, std::uint64_t{rep},
                                            res.trace.steps[c], cps[c], std::uint64_t{i}};
            for (double v : cl.row(i)) row.emplace_back(v);
            row.emplace_back(cfg.seed);
            cw.row(row);
          }
        }
      }
    }
  }
  write_text(out / "trace.csv", trace.str());
  if (args.clouds) write_text(out / "clouds.csv", clouds.str());
  auto snap = snapshot(cfg, "train");
  snap["replica"] = rep;
  write_json(out / "config.json", snap);
  return kExitOk;
}

// ---------------------------------------------------------------------------

json cell_key(const mfvi::ExperimentConfig& cfg, mfvi::Scheme s, std::size_t n) {
  json k = mfvi::config_to_json(cfg);
  k.erase("threads");
  k.erase("schemes");
  k.erase("n_list");
  k.erase("meanfield");
  k.erase("covariance");
  k["scheme"] = mfvi::to_string(s);
  k["N"] = n;
  return k;
}

json run_cell(const mfvi::ExperimentConfig& cfg, mfvi::Scheme s, std::size_t n) {
  const auto fs_list = cfg.test_functions();
  const auto st = mfvi::run_replicas(cfg.scheme_config(s), n, cfg.teacher(), fs_list,
                                     cfg.resolved_checkpoints(), cfg.replicas, cfg.groups,
                                     cfg.seed, cfg.threads);
  json rows = json::array();
  const double nn = static_cast<double>(n);
  const auto var_rows = mfvi::scaled_variance(st);
  for (std::size_t c = 0, r = 0; c < st.times.size(); ++c) {
    for (std::size_t f = 0; f < st.names.size(); ++f, ++r) {
      const auto& v = var_rows[r];
      const auto m = mfvi::replica_mean(st, f, c);
      rows.push_back({st.times[c], st.names[f], "scaled_variance", v.scaled.value,
                      v.scaled.low, v.scaled.high});
      rows.push_back({st.times[c], st.names[f], "variance", v.scaled.value / nn,
                      v.scaled.low / nn, v.scaled.high / nn});
      rows.push_back({st.times[c], st.names[f], "mean", m.value, m.low, m.high});
    }
  }
  json cell;
  cell["rows"] = rows;
  cell["steps"] = mfvi::steps_for(cfg.horizon_t, n);
  cell["gaussian_draws"] = st.draws_per_run;
  cell["diverged"] = st.diverged;
  return cell;
}

double json_number(const json& v) {
  return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

int cmd_sweep(const Common& common) {
  const auto cfg = resolve(common);
  const auto out = prepare_out(common.out);
  const fs::path cells = out / "cells";
  fs::create_directories(cells);

  std::ostringstream sweep, draws, failures;
  mfvi::CsvWriter sw(sweep, {"scheme", "N", "t", "f", "statistic", "value", "ci_low",
                             "ci_high", "n_replicas", "n_groups", "seed"});
  mfvi::CsvWriter dw(draws, {"scheme", "N", "t", "steps", "gaussian_draws", "seed"});
  mfvi::CsvWriter fw(failures, {"scheme", "N", "error"});
  std::size_t n_failed = 0;

  for (auto scheme : cfg.schemes) {
    for (auto n : cfg.n_list) {
      const std::string sname(mfvi::to_string(scheme));
      const fs::path file = cells / (sname + "_N" + std::to_string(n) + ".json");
      const json key = cell_key(cfg, scheme, n);
      json cell;
      if (fs::exists(file)) {
        try {
          std::ifstream in(file);
          const json cached = json::parse(in);
          if (cached.at("key") == key) cell = cached;
        } catch (const std::exception&) {
          cell = json();
        }
      }
      if (cell.is_null()) {
        try {
          cell = run_cell(cfg, scheme, n);
        } catch (const std::exception& e) {
          ++n_failed;
          std::cerr << "cell " << sname << " N=" << n << " failed: " << e.what() << "\n";
          fw.row({sname, std::uint64_t{n}, std::string(e.what())});
          continue;
        }
        cell["key"] = key;
        write_json(file, cell);
      } else {
        std::cerr << "cell " << sname << " N=" << n << " cached\n";
      }
      for (const auto& r : cell.at("rows")) {
        sw.row({sname, std::uint64_t{n}, r[0].get<double>(), r[1].get<std::string>(),
                r[2].get<std::string>(), json_number(r[3]), json_number(r[4]),
                json_number(r[5]), std::uint64_t{cfg.replicas}, std::uint64_t{cfg.groups},
                cfg.seed});
      }
      dw.row({sname, std::uint64_t{n}, cfg.horizon_t, cell.at("steps").get<std::uint64_t>(),
              cell.at("gaussian_draws").get<std::uint64_t>(), cfg.seed});
    }
  }
  write_text(out / "sweep.csv", sweep.str());
  write_text(out / "draws.csv", draws.str());
  write_json(out / "config.json", snapshot(cfg, "sweep"));
  if (n_failed > 0) {
    write_text(out / "failures.csv", failures.str());
    std::cerr << n_failed << " sweep cell(s) failed; see failures.csv\n";
    return kExitPartial;
  }
  std::error_code ec;
  fs::remove(out / "failures.csv", ec);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct MeanFieldArgs {
  bool refine = false;
  std::optional<std::size_t> particles;
  std::optional<double> dt;
  std::optional<std::size_t> mc_gamma, mc_data;
};

mfvi::MeanFieldConfig meanfield_config(const mfvi::ExperimentConfig& cfg,
                                       const MeanFieldArgs& a) {
  auto mc = cfg.meanfield_config();
  if (a.particles) mc.particles = *a.particles;
  if (a.dt) mc.dt = *a.dt;
  if (a.mc_gamma) mc.mc_gamma = *a.mc_gamma;
  if (a.mc_data) mc.mc_data = *a.mc_data;
  if (mc.particles < 1 || !(mc.dt > 0.0) || mc.mc_gamma < 1 || mc.mc_data < 1) {
    throw mfvi::ConfigError("invalid mean-field solver parameters");
  }
  return mc;
}

int cmd_meanfield(const Common& common, const MeanFieldArgs& args) {
  const auto cfg = resolve(common);
  const auto out = prepare_out(common.out);
  const auto teacher = cfg.teacher();
  const auto mc = meanfield_config(cfg, args);
  auto traj = mfvi::solve_meanfield(mc, teacher);
  auto snap = snapshot(cfg, "meanfield");
  snap["solver"] = {{"particles", mc.particles},  {"dt", traj.dt},
                    {"mc_gamma", mc.mc_gamma},    {"mc_data", mc.mc_data},
                    {"record_interval", mc.record_interval}};
  traj.metadata = snap;
  mfvi::save_trajectory(traj, (out / "trajectory.bin").string());

  const auto fs_list = cfg.test_functions();
  std::ostringstream csv;
  mfvi::CsvWriter w(csv, {"t", "f", "value", "particles", "dt", "seed"});
  for (std::size_t s = 0; s < traj.times.size(); ++s) {
    for (const auto& f : fs_list) {
      w.row({traj.times[s], f.name(), f.average(traj.clouds[s]),
             std::uint64_t{mc.particles}, traj.dt, cfg.seed});
    }
  }
  write_text(out / "meanfield.csv", csv.str());

  if (args.refine) {
    auto fine_cfg = mc;
    fine_cfg.dt = traj.dt / 2.0;
    fine_cfg.mc_gamma *= 2;
    fine_cfg.mc_data *= 2;
    const auto fine = mfvi::solve_meanfield(fine_cfg, teacher);
    std::ostringstream r;
    mfvi::CsvWriter rw(r, {"t", "f", "coarse", "fine", "delta", "seed"});
    double worst = 0.0;
    for (double t : traj.times) {
      for (const auto& f : fs_list) {
        const double a = mfvi::eval_observable(traj, f, t);
        const double b = mfvi::eval_observable(fine, f, t);
        worst = std::max(worst, std::abs(a - b));
        rw.row({t, f.name(), a, b, b - a, cfg.seed});
      }
    }
    write_text(out / "refine.csv", r.str());
    std::cout << "self-convergence: max |fine - coarse| = " << mfvi::format_double(worst)
              << "\n";
  }
  write_json(out / "config.json", snap);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct CovarianceArgs {
  std::string trajectory = "trajectory.bin";
  std::optional<std::size_t> n_mc;
  std::optional<std::size_t> n_mc_per_time;
  std::optional<std::size_t> mc_gamma;
};

std::string jensen_flag(const mfvi::JensenRow& r) {
  if (!r.z) return "degenerate";
  if (*r.z >= mfvi::kZ95) return "mivi_greater";
  if (*r.z <= -mfvi::kZ95) return "reversed";
  return "indistinguishable";
}

int cmd_covariance(const Common& common, const CovarianceArgs& args) {
  auto cfg = resolve(common);
  const auto out = prepare_out(common.out);
  if (args.n_mc) cfg.cov_n_mc = *args.n_mc;
  if (args.n_mc_per_time) cfg.cov_n_mc_per_time = *args.n_mc_per_time;
  if (args.mc_gamma) cfg.cov_mc_gamma = *args.mc_gamma;
  cfg.validate();
  fs::path tpath(args.trajectory);
  if (tpath.is_relative()) tpath = out / tpath;
  if (!fs::exists(tpath)) {
    throw mfvi::ConfigError("trajectory file '" + tpath.string() + "' does not exist");
  }
  const auto traj = mfvi::load_trajectory(tpath.string());
  if (!(traj.dims == cfg.dims())) {
    throw mfvi::ConfigError("trajectory dimensions do not match the config");
  }
  for (double t : cfg.cov_times) {
    if (t > traj.horizon() + 1e-12) {
      throw mfvi::ConfigError("covariance time beyond the trajectory horizon");
    }
  }
  const auto teacher = cfg.teacher();
  const auto fs_list = cfg.test_functions();
  mfvi::CovarianceOptions opt;
  opt.mc_gamma = cfg.cov_mc_gamma;
  opt.seed = cfg.seed;
  opt.threads = cfg.threads;

  std::ostringstream jcsv;
  mfvi::CsvWriter jw(jcsv, {"f", "t", "var_shared", "se_shared", "var_mivi", "se_mivi", "z",
                            "flag", "n_samples", "seed"});
  for (const auto& r :
       mfvi::jensen_report(fs_list, traj, cfg.cov_times, cfg.cov_n_mc, teacher, opt)) {
    jw.row({r.f, r.t, r.shared.estimate, r.shared.std_error, r.mivi.estimate,
            r.mivi.std_error, r.z ? *r.z : std::numeric_limits<double>::quiet_NaN(),
            jensen_flag(r), std::uint64_t{r.shared.n_samples}, cfg.seed});
  }
  write_text(out / "jensen.csv", jcsv.str());

  std::ostringstream ccsv;
  mfvi::CsvWriter cw(ccsv, {"f", "g", "family", "t", "estimate", "std_error", "n_samples",
                            "seed"});
  std::vector<double> svals{0.0};
  for (double t : cfg.cov_times) {
    if (t > 0.0) svals.push_back(t);
  }
  for (auto fam : {mfvi::KernelFamily::Shared, mfvi::KernelFamily::MiVI}) {
    const auto all = mfvi::covariance_integrals(fs_list, svals, traj, fam,
                                                cfg.cov_n_mc_per_time, teacher, opt);
    for (std::size_t a = 0; a < fs_list.size(); ++a) {
      for (std::size_t b = a; b < fs_list.size(); ++b) {
        for (std::size_t k = 0; k < svals.size(); ++k) {
          const auto& r = all[k][a][b];
          cw.row({fs_list[a].name(), fs_list[b].name(), std::string(mfvi::to_string(fam)),
                  svals[k], r.estimate, r.std_error, std::uint64_t{r.n_samples}, cfg.seed});
        }
      }
    }
  }
  write_text(out / "covariance.csv", ccsv.str());
  auto snap = snapshot(cfg, "covariance");
  snap["trajectory"] = tpath.filename().string();
  snap["trajectory_metadata"] = traj.metadata;
  write_json(out / "config.json", snap);
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_selftest() {
  using namespace mfvi;
  int failures = 0;
  auto report = [&](const char* name, bool ok) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << "\n";
    if (!ok) ++failures;
  };

  report("philox known answer",
         philox4x32({0, 0, 0, 0}, {0, 0}) ==
             PhiloxBlock{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});

  const Dims dims{4, 2};
  RngStream rng(1, {0, 0, 0, Purpose::Test});
  std::vector<double> m(dims.d()), z(dims.d()), x(dims.d_in);
  rng.fill_normal(m);
  rng.fill_normal(z);
  rng.fill_uniform(x, -1.0, 1.0);
  const double rho = 0.3, h = 1e-5;
  const auto J = grad_phi(ParamView{m, rho}, z, x, dims);
  double err = 0.0, scale = 0.0;
  for (std::size_t k = 0; k <= dims.d(); ++k) {
    auto mp = m, mm = m;
    double rp = rho, rm = rho;
    if (k < dims.d()) {
      mp[k] += h;
      mm[k] -= h;
    } else {
      rp += h;
      rm -= h;
    }
    const auto fp = phi(ParamView{mp, rp}, z, x, dims);
    const auto fm = phi(ParamView{mm, rm}, z, x, dims);
    for (std::size_t o = 0; o < dims.d_out; ++o) {
      err = std::max(err, std::abs(J(k, o) - (fp[o] - fm[o]) / (2 * h)));
      scale = std::max(scale, std::abs(J(k, o)));
    }
  }
  report("grad_phi finite differences", err <= 1e-5 * scale);

  PriorSpec prior{std::vector<double>(dims.d(), 0.0), 1.0};
  report("kl zero at prior", std::abs(kl(ParamView{prior.m0, softplus_inverse(1.0)}, prior)) < 1e-14);

  SchemeConfig sc;
  sc.horizon_t = 1.5;
  sc.prior = prior;
  sc.init.m_init_mean.assign(dims.d(), 0.0);
  const auto teacher = init_teacher(dims.d_in, dims.d_out, 0.0, 1);
  bool counts = true, repro = true;
  for (Scheme s : {Scheme::Idealized, Scheme::BbB, Scheme::MiVI}) {
    sc.scheme = s;
    sc.mc_samples = 3;
    const auto a = train(sc, 12, DataSource{teacher, 1, 0}, {1.5}, {TestFunction::mean()},
                         StepRng{1, 0});
    const auto b = train(sc, 12, DataSource{teacher, 1, 0}, {1.5}, {TestFunction::mean()},
                         StepRng{1, 0});
    counts = counts && a.draws.gaussian_vectors == expected_draws(sc, 12, 18);
    repro = repro && a.trace.values == b.trace.values;
  }
  report("gaussian draw accounting", counts);
  report("training reproducibility", repro);
  return failures == 0 ? kExitOk : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field variational inference simulator"};
  app.require_subcommand(1);
  Common common;
  TrainArgs train_args;
  MeanFieldArgs mf_args;
  CovarianceArgs cov_args;

  auto* train = app.add_subcommand("train", "Single training run per scheme and N");
  add_common(train, common);
  train->add_option("--replica", train_args.replica, "Replica id (selects random streams)");
  train->add_flag("!--no-clouds", train_args.clouds, "Skip writing clouds.csv");

  auto* sweep = app.add_subcommand("sweep", "Replica statistics over schemes x N");
  add_common(sweep, common);

  auto* mf = app.add_subcommand("meanfield", "Solve the mean-field particle system");
  add_common(mf, common);
  mf->add_flag("--refine", mf_args.refine, "Also solve with halved dt and doubled MC sizes");
  mf->add_option("--particles", mf_args.particles, "Number of particles M");
  mf->add_option("--dt", mf_args.dt, "Euler step");
  mf->add_option("--mc-gamma", mf_args.mc_gamma, "Gaussian draws per step");
  mf->add_option("--mc-data", mf_args.mc_data, "Data samples per step");

  auto* cov = app.add_subcommand("covariance", "Q-kernel variances and covariance integrals");
  add_common(cov, common);
  cov->add_option("--trajectory", cov_args.trajectory, "Trajectory file (relative to --out)");
  cov->add_option("--n-mc", cov_args.n_mc, "Kernel samples for the variance comparison");
  cov->add_option("--n-mc-per-time", cov_args.n_mc_per_time,
                  "Kernel samples per time node of the integrals");
  cov->add_option("--mc-gamma", cov_args.mc_gamma, "Gaussian draws per shared bracket");

  auto* self = app.add_subcommand("selftest", "Quick internal consistency checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (train->parsed()) return cmd_train(common, train_args);
    if (sweep->parsed()) return cmd_sweep(common);
    if (mf->parsed()) return cmd_meanfield(common, mf_args);
    if (cov->parsed()) return cmd_covariance(common, cov_args);
    if (self->parsed()) return cmd_selftest();
  } catch (const mfvi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const mfvi::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitConfig;
}
