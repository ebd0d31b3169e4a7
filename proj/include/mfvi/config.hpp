#pragma once

// Experiment configuration: JSON with comments, named presets, flag overrides.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfvi/cloud.hpp"
#include "mfvi/data.hpp"
#include "mfvi/meanfield.hpp"
#include "mfvi/model.hpp"
#include "mfvi/schemes.hpp"
#include "mfvi/test_functions.hpp"

namespace mfvi {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string setting = "simple";
  std::size_t d_in = 10;
  std::size_t d_out = 1;
  double noise_gamma = 0.0;

  std::vector<Scheme> schemes{Scheme::Idealized, Scheme::BbB, Scheme::MiVI};
  std::vector<std::size_t> n_list{100, 200, 400};
  double kappa = 1.0;
  double horizon_t = 10.0;
  std::vector<double> checkpoints;  // empty means {horizon_t}
  std::size_t mc_samples = 100;
  std::size_t replicas = 100;
  std::size_t groups = 10;
  std::vector<std::string> observables{"f_mean", "f_std", "f_pred"};
  std::size_t pred_n_x = 100;
  std::size_t pred_n_w = 100;

  double sigma0 = 1.0;
  double m0 = 0.0;  // every coordinate of the prior mean
  double m_init_mean = 0.0;
  double m_init_std = 0.1;
  std::optional<double> rho_init;  // default softplus^{-1}(sigma0)
  double rho_init_std = 0.0;

  std::size_t mf_particles = 2000;
  double mf_dt = 1.0 / 2000.0;
  std::size_t mf_mc_gamma = 100;
  std::size_t mf_mc_data = 100;
  double mf_record_interval = 0.05;

  std::size_t cov_n_mc = 10000;
  std::size_t cov_mc_gamma = 100;
  std::size_t cov_n_mc_per_time = 1000;
  std::vector<double> cov_times{0.5, 1.0, 2.0};

  std::uint64_t seed = 1;
  unsigned threads = 0;

  Dims dims() const { return Dims{d_in, d_out}; }

  std::vector<double> resolved_checkpoints() const {
    return checkpoints.empty() ? std::vector<double>{horizon_t} : checkpoints;
  }

  PriorSpec prior() const { return PriorSpec{std::vector<double>(dims().d(), m0), sigma0}; }

  InitSpec init() const {
    InitSpec s;
    s.m_init_mean.assign(dims().d(), m_init_mean);
    s.m_init_std = m_init_std;
    s.rho_init = rho_init ? *rho_init : softplus_inverse(sigma0);
    s.rho_init_std = rho_init_std;
    return s;
  }

  SchemeConfig scheme_config(Scheme s) const {
    SchemeConfig c;
    c.scheme = s;
    c.kappa = kappa;
    c.mc_samples = mc_samples;
    c.horizon_t = horizon_t;
    c.prior = prior();
    c.init = init();
    return c;
  }

  MeanFieldConfig meanfield_config() const {
    MeanFieldConfig c;
    c.particles = mf_particles;
    c.dt = mf_dt;
    c.horizon_t = horizon_t;
    c.kappa = kappa;
    c.prior = prior();
    c.init = init();
    c.mc_gamma = mf_mc_gamma;
    c.mc_data = mf_mc_data;
    c.record_interval = mf_record_interval;
    c.seed = seed;
    c.threads = threads;
    return c;
  }

  TeacherSpec teacher() const { return init_teacher(d_in, d_out, noise_gamma, seed); }

  std::vector<TestFunction> test_functions() const {
    std::vector<TestFunction> out;
    for (const auto& name : observables) out.push_back(make_observable(name));
    return out;
  }

  TestFunction make_observable(const std::string& name) const {
    if (name == "f_mean") return TestFunction::mean();
    if (name == "f_std") return TestFunction::std_dev();
    if (name == "f_pred") return TestFunction::pred(dims(), pred_n_x, pred_n_w, seed);
    throw ConfigError("unknown observable '" + name + "'");
  }

  void validate() const {
    auto need = [](bool ok, const std::string& what) {
      if (!ok) throw ConfigError(what);
    };
    need(d_in >= 1 && d_out >= 1, "d_in and d_out must be >= 1");
    need(noise_gamma >= 0.0, "noise_gamma must be >= 0");
    need(!schemes.empty(), "schemes must be nonempty");
    need(!n_list.empty(), "n_list must be nonempty");
    for (auto n : n_list) need(n >= 1, "every N must be >= 1");
    need(kappa >= 0.0 && std::isfinite(kappa), "kappa must be >= 0");
    need(horizon_t > 0.0, "t must be > 0");
    for (double c : checkpoints) need(c >= 0.0 && c <= horizon_t, "checkpoint outside [0, t]");
    for (std::size_t i = 1; i < checkpoints.size(); ++i) {
      need(checkpoints[i] > checkpoints[i - 1], "checkpoints must be increasing");
    }
    need(mc_samples >= 1, "mc_samples must be >= 1");
    need(replicas >= 2, "replicas must be >= 2");
    need(groups >= 1, "groups must be >= 1");
    need(!observables.empty(), "observables must be nonempty");
    for (const auto& o : observables) {
      need(o == "f_mean" || o == "f_std" || o == "f_pred", "unknown observable '" + o + "'");
    }
    need(pred_n_x >= 2 && pred_n_w >= 2, "pred n_x and n_w must be >= 2");
    need(sigma0 > 0.0, "sigma0 must be > 0");
    need(m_init_std >= 0.0 && rho_init_std >= 0.0, "init spreads must be >= 0");
    need(mf_particles >= 1 && mf_dt > 0.0 && mf_mc_gamma >= 1 && mf_mc_data >= 1 &&
             mf_record_interval > 0.0,
         "invalid meanfield section");
    need(cov_n_mc >= 2 && cov_mc_gamma >= 1 && cov_n_mc_per_time >= 2,
         "invalid covariance section");
    for (double t : cov_times) need(t >= 0.0 && std::isfinite(t), "covariance times must be finite and >= 0");
  }
};

namespace detail {

inline void apply_preset(ExperimentConfig& c, const std::string& name) {
  if (name == "simple") {
    c.noise_gamma = 0.0;
    c.d_in = 10;
    c.d_out = 1;
    c.horizon_t = 10.0;
  } else if (name == "complex") {
    c.noise_gamma = 1.0;
    c.d_in = 50;
    c.d_out = 10;
    c.horizon_t = 3.0;
  } else if (name != "custom") {
    throw ConfigError("unknown setting '" + name + "'");
  }
  c.setting = name;
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                       const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

}  // namespace detail

/// Build a config from parsed JSON. The preset is applied first, so explicit
/// keys override it.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using detail::read;
  detail::check_keys(j,
                     {"setting", "d_in", "d_out", "noise_gamma", "schemes", "n_list",
                      "kappa", "t", "checkpoints", "mc_samples", "replicas", "groups",
                      "observables", "pred", "prior", "init", "meanfield", "covariance",
                      "seed", "threads"},
                     "config");
  ExperimentConfig c;
  detail::apply_preset(c, j.value("setting", std::string("simple")));
  read(j, "d_in", c.d_in);
  read(j, "d_out", c.d_out);
  read(j, "noise_gamma", c.noise_gamma);
  if (j.contains("schemes")) {
    std::vector<std::string> names;
    read(j, "schemes", names);
    c.schemes.clear();
    try {
      for (const auto& s : names) c.schemes.push_back(parse_scheme(s));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  read(j, "n_list", c.n_list);
  read(j, "kappa", c.kappa);
  read(j, "t", c.horizon_t);
  read(j, "checkpoints", c.checkpoints);
  read(j, "mc_samples", c.mc_samples);
  read(j, "replicas", c.replicas);
  read(j, "groups", c.groups);
  read(j, "observables", c.observables);
  read(j, "seed", c.seed);
  read(j, "threads", c.threads);
  if (j.contains("pred")) {
    const auto& p = j["pred"];
    detail::check_keys(p, {"n_x", "n_w"}, "pred");
    read(p, "n_x", c.pred_n_x);
    read(p, "n_w", c.pred_n_w);
  }
  if (j.contains("prior")) {
    const auto& p = j["prior"];
    detail::check_keys(p, {"m0", "sigma0"}, "prior");
    read(p, "m0", c.m0);
    read(p, "sigma0", c.sigma0);
  }
  if (j.contains("init")) {
    const auto& p = j["init"];
    detail::check_keys(p, {"m_mean", "m_std", "rho", "rho_std"}, "init");
    read(p, "m_mean", c.m_init_mean);
    read(p, "m_std", c.m_init_std);
    if (p.contains("rho") && !p["rho"].is_null()) {
      double r = 0.0;
      read(p, "rho", r);
      c.rho_init = r;
    }
    read(p, "rho_std", c.rho_init_std);
  }
  if (j.contains("meanfield")) {
    const auto& p = j["meanfield"];
    detail::check_keys(p, {"particles", "dt", "mc_gamma", "mc_data", "record_interval"},
                       "meanfield");
    read(p, "particles", c.mf_particles);
    read(p, "dt", c.mf_dt);
    read(p, "mc_gamma", c.mf_mc_gamma);
    read(p, "mc_data", c.mf_mc_data);
    read(p, "record_interval", c.mf_record_interval);
  }
  if (j.contains("covariance")) {
    const auto& p = j["covariance"];
    detail::check_keys(p, {"n_mc", "mc_gamma", "n_mc_per_time", "times"}, "covariance");
    read(p, "n_mc", c.cov_n_mc);
    read(p, "mc_gamma", c.cov_mc_gamma);
    read(p, "n_mc_per_time", c.cov_n_mc_per_time);
    read(p, "times", c.cov_times);
  }
  return c;
}

/// Fully resolved config; feeding it back to config_from_json reproduces it.
inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["setting"] = c.setting;
  j["d_in"] = c.d_in;
  j["d_out"] = c.d_out;
  j["noise_gamma"] = c.noise_gamma;
  std::vector<std::string> schemes;
  for (auto s : c.schemes) schemes.emplace_back(to_string(s));
  j["schemes"] = schemes;
  j["n_list"] = c.n_list;
  j["kappa"] = c.kappa;
  j["t"] = c.horizon_t;
  j["checkpoints"] = c.resolved_checkpoints();
  j["mc_samples"] = c.mc_samples;
  j["replicas"] = c.replicas;
  j["groups"] = c.groups;
  j["observables"] = c.observables;
  j["pred"] = {{"n_x", c.pred_n_x}, {"n_w", c.pred_n_w}};
  j["prior"] = {{"m0", c.m0}, {"sigma0", c.sigma0}};
  j["init"] = {{"m_mean", c.m_init_mean},
               {"m_std", c.m_init_std},
               {"rho", c.init().rho_init},
               {"rho_std", c.rho_init_std}};
  j["meanfield"] = {{"particles", c.mf_particles},
                    {"dt", c.mf_dt},
                    {"mc_gamma", c.mf_mc_gamma},
                    {"mc_data", c.mf_mc_data},
                    {"record_interval", c.mf_record_interval}};
  j["covariance"] = {{"n_mc", c.cov_n_mc},
                     {"mc_gamma", c.cov_mc_gamma},
                     {"n_mc_per_time", c.cov_n_mc_per_time},
                     {"times", c.cov_times}};
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  return j;
}

inline nlohmann::json parse_config_text(const std::string& text) {
  try {
    return nlohmann::json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(parse_config_text(ss.str()));
}

}  // namespace mfvi
