#include "wendy/config.hpp"

#include <set>

#include <json.hpp>

namespace wendy {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::ConfigError, "config key '" + path + "': " + what);
}

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
  if (!obj.is_object()) config_error(path, "expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) config_error(path.empty() ? key : path + "." + key, "unknown key");
  }
}

template <class T>
void read(const json& obj, const std::string& path, const char* key, T& out) {
  if (!obj.contains(key)) return;
  const std::string full = path.empty() ? key : path + "." + key;
  const json& v = obj.at(key);
  try {
    if constexpr (std::is_same_v<T, int> || std::is_same_v<T, long> || std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_integer()) config_error(full, "expected an integer");
      if constexpr (std::is_same_v<T, std::uint64_t>) {
        if (v.is_number_unsigned() || v.get<long long>() >= 0) {
          out = v.get<std::uint64_t>();
        } else {
          config_error(full, "expected a non-negative integer");
        }
      } else {
        out = v.get<T>();
      }
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) config_error(full, "expected a number");
      out = v.get<double>();
    } else {
      out = v.get<T>();
    }
  } catch (const json::exception& e) {
    config_error(full, e.what());
  }
}

std::pair<int, int> line_col(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

std::string to_string(IntegratorMethod m) {
  return m == IntegratorMethod::ExplicitRK45 ? "explicit_rk45" : "stiff_implicit";
}

IntegratorMethod integrator_method_from(const std::string& s) {
  if (s == "explicit_rk45") return IntegratorMethod::ExplicitRK45;
  if (s == "stiff_implicit") return IntegratorMethod::StiffImplicit;
  throw Error(ErrorCode::ConfigError, "unknown integrator method '" + s + "'");
}

void RunConfig::validate() const {
  experiment.validate();
  if (jobs < 0) throw Error(ErrorCode::ConfigError, "jobs must be >= 0");
  if (!(ci_level > 0.0 && ci_level < 1.0)) throw Error(ErrorCode::ConfigError, "ci_level must lie in (0, 1)");
}

RunConfig parse_run_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
    throw Error(ErrorCode::ParseError,
                "config is not valid JSON at line " + std::to_string(line) + ", column " + std::to_string(col));
  }
  RunConfig cfg;
  check_keys(j, "", {"schema_version", "experiment", "irls", "test_functions", "integrator", "fsnls", "jobs", "ci_level"});
  if (j.contains("schema_version")) {
    int v = 0;
    read(j, "", "schema_version", v);
    if (v != 1) config_error("schema_version", "unsupported version " + std::to_string(v));
  }
  read(j, "", "jobs", cfg.jobs);
  read(j, "", "ci_level", cfg.ci_level);

  ExperimentConfig& e = cfg.experiment;
  if (j.contains("experiment")) {
    const json& x = j["experiment"];
    check_keys(x, "experiment", {"model", "noise_ratios", "subsample_factors", "n_trials", "seed_base", "estimators"});
    read(x, "experiment", "model", e.model);
    read(x, "experiment", "noise_ratios", e.noise_ratios);
    read(x, "experiment", "subsample_factors", e.subsample_factors);
    read(x, "experiment", "n_trials", e.n_trials);
    read(x, "experiment", "seed_base", e.seed_base);
    read(x, "experiment", "estimators", e.estimators);
  }
  if (j.contains("irls")) {
    const json& x = j["irls"];
    IRLSOptions& o = e.wendy.irls;
    check_keys(x, "irls", {"alpha", "tau_fp", "tau_sw", "n0", "max_its", "alpha_retry"});
    read(x, "irls", "alpha", o.alpha);
    read(x, "irls", "tau_fp", o.tau_fp);
    read(x, "irls", "tau_sw", o.tau_sw);
    read(x, "irls", "n0", o.n0);
    read(x, "irls", "max_its", o.max_its);
    read(x, "irls", "alpha_retry", o.alpha_retry);
  }
  if (j.contains("test_functions")) {
    const json& x = j["test_functions"];
    TestFunctionOptions& o = e.wendy.testfn;
    check_keys(x, "test_functions", {"eta", "s", "stride", "num_radius_candidates", "num_levels", "min_radius"});
    read(x, "test_functions", "eta", o.eta);
    read(x, "test_functions", "s", o.s);
    read(x, "test_functions", "stride", o.stride);
    read(x, "test_functions", "num_radius_candidates", o.num_radius_candidates);
    read(x, "test_functions", "num_levels", o.num_levels);
    if (x.contains("min_radius") && !x["min_radius"].is_null()) {
      int r = 0;
      read(x, "test_functions", "min_radius", r);
      o.min_radius = r;
    }
  }
  if (j.contains("integrator")) {
    const json& x = j["integrator"];
    IntegratorOptions& o = e.integrator;
    check_keys(x, "integrator", {"rel_tol", "abs_tol", "method", "max_steps"});
    read(x, "integrator", "rel_tol", o.rel_tol);
    read(x, "integrator", "abs_tol", o.abs_tol);
    read(x, "integrator", "max_steps", o.max_steps);
    if (x.contains("method")) {
      std::string m;
      read(x, "integrator", "method", m);
      o.method = integrator_method_from(m);
    }
  }
  if (j.contains("fsnls")) {
    const json& x = j["fsnls"];
    FsnlsOptions& o = e.fsnls;
    check_keys(x, "fsnls", {"max_evals", "max_iter", "min_step", "lambda0", "fd_step", "sim_tol", "sim_max_steps",
                            "n_starts", "spread", "init"});
    read(x, "fsnls", "max_evals", o.lm.max_evals);
    read(x, "fsnls", "max_iter", o.lm.max_iter);
    read(x, "fsnls", "min_step", o.lm.min_step);
    read(x, "fsnls", "lambda0", o.lm.lambda0);
    read(x, "fsnls", "fd_step", o.lm.fd_step);
    read(x, "fsnls", "sim_tol", o.sim_tol);
    read(x, "fsnls", "sim_max_steps", o.sim_max_steps);
    read(x, "fsnls", "n_starts", o.n_starts);
    read(x, "fsnls", "spread", o.spread);
    if (x.contains("init")) {
      std::string s;
      read(x, "fsnls", "init", s);
      if (s == "uniform") o.gaussian_init = false;
      else if (s == "gaussian") o.gaussian_init = true;
      else config_error("fsnls.init", "expected 'uniform' or 'gaussian'");
    }
  }
  try {
    cfg.validate();
  } catch (const Error& err) {
    if (err.code() == ErrorCode::UnknownModel) config_error("experiment.model", err.what());
    if (err.code() == ErrorCode::ConfigError) throw;
    throw Error(ErrorCode::ConfigError, err.what());
  }
  return cfg;
}

std::string dump_run_config(const RunConfig& cfg) {
  const ExperimentConfig& e = cfg.experiment;
  json j;
  j["schema_version"] = 1;
  j["jobs"] = cfg.jobs;
  j["ci_level"] = cfg.ci_level;
  j["experiment"] = {{"model", e.model},
                     {"noise_ratios", e.noise_ratios},
                     {"subsample_factors", e.subsample_factors},
                     {"n_trials", e.n_trials},
                     {"seed_base", e.seed_base},
                     {"estimators", e.estimators}};
  const IRLSOptions& i = e.wendy.irls;
  j["irls"] = {{"alpha", i.alpha}, {"tau_fp", i.tau_fp},   {"tau_sw", i.tau_sw},
               {"n0", i.n0},       {"max_its", i.max_its}, {"alpha_retry", i.alpha_retry}};
  const TestFunctionOptions& t = e.wendy.testfn;
  j["test_functions"] = {{"eta", t.eta},
                         {"s", t.s},
                         {"stride", t.stride},
                         {"num_radius_candidates", t.num_radius_candidates},
                         {"num_levels", t.num_levels},
                         {"min_radius", t.min_radius ? json(*t.min_radius) : json(nullptr)}};
  const IntegratorOptions& g = e.integrator;
  j["integrator"] = {{"rel_tol", g.rel_tol}, {"abs_tol", g.abs_tol}, {"method", to_string(g.method)}, {"max_steps", g.max_steps}};
  const FsnlsOptions& f = e.fsnls;
  j["fsnls"] = {{"max_evals", f.lm.max_evals}, {"max_iter", f.lm.max_iter},   {"min_step", f.lm.min_step},
                {"lambda0", f.lm.lambda0},     {"fd_step", f.lm.fd_step},     {"sim_tol", f.sim_tol},
                {"sim_max_steps", f.sim_max_steps}, {"n_starts", f.n_starts}, {"spread", f.spread},
                {"init", f.gaussian_init ? "gaussian" : "uniform"}};
  return j.dump(2) + "\n";
}

}  // namespace wendy
