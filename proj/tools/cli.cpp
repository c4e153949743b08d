#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "wendy/bench.hpp"
#include "wendy/config.hpp"
#include "wendy/csv_io.hpp"
#include "wendy/estimator.hpp"
#include "wendy/library_spec.hpp"
#include "wendy/models.hpp"

namespace wendy::cli {

namespace {

using nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;

bool is_validation_error(ErrorCode c) {
  switch (c) {
    case ErrorCode::DimensionMismatch:
    case ErrorCode::NonFiniteData:
    case ErrorCode::DomainViolation:
    case ErrorCode::InvalidArgument:
    case ErrorCode::UnknownModel:
    case ErrorCode::IndivisibleFactor:
    case ErrorCode::NonUniformGrid:
    case ErrorCode::ParseError:
    case ErrorCode::ConfigError:
      return true;
    default:
      return false;
  }
}

// JSON has no infinity, write null instead
ordered_json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

ordered_json vec_json(const Vector& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}

RunConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  return parse_run_config(read_text_file(path));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_text_file(path, text);
  }
}

// models list

void models_list(bool as_json, std::ostream& out) {
  if (as_json) {
    ordered_json arr = ordered_json::array();
    for (const auto& name : model_names()) {
      const ModelSpec s = catalog(name);
      ordered_json card;
      card["name"] = s.name;
      card["title"] = s.title;
      card["dim"] = s.dim();
      card["equations"] = s.equations;
      ordered_json labels = ordered_json::array();
      for (int p = 0; p < s.lib.num_params(); ++p) labels.push_back(s.lib.param_label(p));
      card["param_labels"] = labels;
      card["w_star"] = vec_json(s.w_star);
      card["u0"] = vec_json(s.u0);
      card["T"] = s.T;
      card["finest_M"] = s.finest_M;
      card["rms_ref"] = s.rms_ref;
      card["fit_solver"] = to_string(s.fit_method);
      card["notes"] = s.notes;
      arr.push_back(card);
    }
    ordered_json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["models"] = arr;
    out << doc.dump(2) << '\n';
    return;
  }
  for (const auto& name : model_names()) {
    const ModelSpec s = catalog(name);
    out << std::left << std::setw(22) << s.name << " d=" << s.dim() << "  params=" << s.lib.num_params()
        << "  T=" << s.T << "  M=" << s.finest_M << "  " << s.title << '\n';
    for (const auto& eq : s.equations) out << "    " << eq << '\n';
  }
}

// simulate

struct SimulateArgs {
  std::string model;
  int M = 0;
  double sigma_nr = 0.0;
  std::uint64_t seed = 0;
  std::string out_path;
};

void simulate(const SimulateArgs& a, std::ostream& out) {
  const ModelSpec spec = catalog(a.model);
  if (a.M < 1) throw Error(ErrorCode::InvalidArgument, "M must be positive");
  if (!(a.sigma_nr >= 0.0) || !std::isfinite(a.sigma_nr)) {
    throw Error(ErrorCode::InvalidArgument, "noise ratio must be finite and non-negative");
  }
  const Dataset truth = generate_truth(spec, a.M);
  const Dataset noisy = add_noise(truth, a.sigma_nr, a.seed);
  write_dataset(a.out_path, noisy);
  write_dataset(truth_path(a.out_path), truth);
  out << "wrote " << a.out_path << " and " << truth_path(a.out_path) << '\n';
}

// estimate

struct EstimateArgs {
  std::string data;
  std::string model;
  std::string library;
  std::string config;
  std::optional<double> alpha;
  std::string estimator;
  std::optional<int> min_radius;
  std::optional<double> ci_level;
  std::string out_path;
  bool print_config = false;
};

RunConfig resolve_estimate_config(const EstimateArgs& a) {
  RunConfig cfg = load_config(a.config);
  auto& w = cfg.experiment.wendy;
  if (a.alpha) w.irls.alpha = *a.alpha;
  if (a.min_radius) w.testfn.min_radius = *a.min_radius;
  if (a.ci_level) cfg.ci_level = *a.ci_level;
  if (!a.estimator.empty()) {
    if (a.estimator == "ols") {
      w.estimator = EstimatorKind::OLS;
    } else if (a.estimator == "wendy") {
      w.estimator = EstimatorKind::WENDy;
    } else {
      throw Error(ErrorCode::InvalidArgument, "--estimator must be ols or wendy");
    }
  }
  cfg.validate();
  return cfg;
}

void estimate_cmd(const EstimateArgs& a, std::ostream& out) {
  const RunConfig cfg = resolve_estimate_config(a);
  if (a.print_config) {
    out << dump_run_config(cfg) << '\n';
    return;
  }
  if (a.data.empty()) throw Error(ErrorCode::InvalidArgument, "a data file is required");
  if (a.model.empty() == a.library.empty()) {
    throw Error(ErrorCode::InvalidArgument, "give exactly one of --model or --library");
  }
  const Dataset ds = read_dataset(a.data);
  std::optional<ModelSpec> spec;
  std::optional<FeatureLibrary> lib;
  if (!a.model.empty()) {
    spec = catalog(a.model);
    lib = spec->lib;
  } else {
    lib = library_from_json(read_text_file(a.library));
  }

  const WendyOptions& wopts = cfg.experiment.wendy;
  const WendyFit fit = estimate(ds, *lib, wopts);
  const EstimationResult& r = fit.result;
  const auto ci = confidence_intervals(r, cfg.ci_level);

  ordered_json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["estimator"] = wopts.estimator == EstimatorKind::OLS ? "ols" : "wendy";
  doc["data"] = a.data;
  if (spec) doc["model"] = spec->name;
  doc["num_samples"] = ds.grid.num_samples();
  doc["dim"] = ds.dim();
  ordered_json params = ordered_json::array();
  for (int p = 0; p < lib->num_params(); ++p) {
    ordered_json e;
    e["label"] = lib->param_label(p);
    e["w_hat"] = num(r.w_hat(p));
    e["stdx"] = num(r.stdx(p));
    e["ci"] = {num(ci[p].first), num(ci[p].second)};
    params.push_back(e);
  }
  doc["params"] = params;
  doc["w_hat"] = vec_json(r.w_hat);
  doc["stdx"] = vec_json(r.stdx);
  doc["ci_level"] = cfg.ci_level;
  doc["sigma_hat"] = num(r.sigma_hat);
  doc["n_iters"] = r.n_iters;
  doc["stop_reason"] = std::string(to_string(r.stop_reason));
  doc["alpha_used"] = r.alpha_used;
  doc["min_radius"] = fit.basis.min_radius;
  doc["K"] = fit.basis.K;
  doc["w_ols"] = vec_json(r.w_ols);
  if (spec) {
    doc["w_star"] = vec_json(spec->w_star);
    doc["E2"] = num(metric_E2(r.w_hat, spec->w_star));
  }
  emit(doc.dump(2) + "\n", a.out_path, out);
}

// benchmark

struct BenchmarkArgs {
  std::string config;
  std::string out_dir;
  std::optional<int> jobs;
  std::optional<int> trials;
  bool full_scale = false;
  bool print_config = false;
};

constexpr int kFullScaleTrials = 100;

void benchmark_cmd(const BenchmarkArgs& a, std::ostream& out) {
  RunConfig cfg = load_config(a.config);
  if (a.full_scale) cfg.experiment.n_trials = kFullScaleTrials;
  if (a.trials) cfg.experiment.n_trials = *a.trials;
  if (a.jobs) cfg.jobs = *a.jobs;
  cfg.validate();
  if (a.print_config) {
    out << dump_run_config(cfg) << '\n';
    return;
  }
  if (a.out_dir.empty()) throw Error(ErrorCode::InvalidArgument, "--out-dir is required");
  std::error_code ec;
  std::filesystem::create_directories(a.out_dir, ec);
  if (ec) throw Error(ErrorCode::IOError, "cannot create " + a.out_dir + ": " + ec.message());

  const auto records = run_experiment(cfg.experiment, cfg.jobs);
  const auto cells = summarize(records);
  const std::filesystem::path dir(a.out_dir);
  write_text_file((dir / "trials.csv").string(), trials_csv(records));
  write_text_file((dir / "summary.json").string(), summary_json(cells, cfg.experiment));
  write_text_file((dir / "long.csv").string(), long_csv(cells));
  out << "wrote " << records.size() << " trial rows and " << cells.size() << " cells to " << a.out_dir << '\n';
}

// compare

struct CompareArgs {
  std::string model;
  std::string config;
  std::optional<int> M;
  std::optional<double> noise;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed_base;
  std::string estimators;
  std::optional<int> jobs;
  std::string out_path;
  bool print_config = false;
};

std::string fmt(double v, int prec = 4) {
  if (!std::isfinite(v)) return "inf";
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

void compare_cmd(const CompareArgs& a, std::ostream& out) {
  RunConfig cfg = load_config(a.config);
  auto& ex = cfg.experiment;
  if (!a.model.empty()) ex.model = a.model;
  const ModelSpec spec = catalog(ex.model);
  ex.model = spec.name;
  if (a.M) {
    if (*a.M < 1 || spec.finest_M % *a.M != 0) {
      throw Error(ErrorCode::IndivisibleFactor,
                  "M=" + std::to_string(*a.M) + " does not divide " + std::to_string(spec.finest_M));
    }
    ex.subsample_factors = {spec.finest_M / *a.M};
  }
  if (a.noise) ex.noise_ratios = {*a.noise};
  if (a.trials) ex.n_trials = *a.trials;
  if (a.seed_base) ex.seed_base = *a.seed_base;
  if (!a.estimators.empty()) ex.estimators = split_list(a.estimators);
  if (a.jobs) cfg.jobs = *a.jobs;
  cfg.validate();
  if (a.print_config) {
    out << dump_run_config(cfg) << '\n';
    return;
  }

  const auto records = run_experiment(ex, cfg.jobs);
  const auto cells = summarize(records);
  if (!a.out_path.empty()) write_text_file(a.out_path, summary_json(cells, ex));

  out << std::left << std::setw(8) << "M" << std::setw(9) << "sigma_nr" << std::setw(13) << "estimator"
      << std::setw(12) << "median_E2" << std::setw(12) << "mean_E2" << std::setw(12) << "median_EFS"
      << std::setw(12) << "walltime_s" << std::setw(9) << "failed" << "drop_vs_ols_%\n";
  for (const auto& c : cells) {
    out << std::left << std::setw(8) << c.M << std::setw(9) << fmt(c.sigma_nr) << std::setw(13) << c.estimator
        << std::setw(12) << fmt(c.median_E2) << std::setw(12) << fmt(c.mean_E2) << std::setw(12)
        << fmt(c.median_EFS) << std::setw(12) << fmt(c.median_walltime) << std::setw(9) << c.n_failed
        << (c.pct_drop_E2_vs_ols ? fmt(*c.pct_drop_E2_vs_ols, 3) : "-") << '\n';
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Weak-form estimation of ODE parameters"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "wendy 0.1.0");

  auto* models = app.add_subcommand("models", "Inspect the model catalog");
  models->require_subcommand(1);
  auto* models_ls = models->add_subcommand("list", "List catalog models");
  bool models_json = false;
  models_ls->add_flag("--json", models_json, "Emit model cards as JSON");

  SimulateArgs sim;
  auto* simulate_sc = app.add_subcommand("simulate", "Generate a noisy dataset and its truth file");
  simulate_sc->add_option("model", sim.model, "Model name")->required();
  simulate_sc->add_option("M", sim.M, "Number of time intervals")->required();
  simulate_sc->add_option("sigma_nr", sim.sigma_nr, "Noise ratio")->required();
  simulate_sc->add_option("--seed", sim.seed, "Noise seed")->capture_default_str();
  simulate_sc->add_option("-o,--out", sim.out_path, "Output CSV path")->required();

  EstimateArgs est;
  auto* estimate_sc = app.add_subcommand("estimate", "Estimate parameters from a CSV dataset");
  estimate_sc->add_option("data", est.data, "CSV file with columns t,u1..ud");
  estimate_sc->add_option("--model", est.model, "Catalog model supplying the library");
  estimate_sc->add_option("--library", est.library, "JSON library description");
  estimate_sc->add_option("--config", est.config, "JSON config file");
  estimate_sc->add_option("--alpha", est.alpha, "Covariance relaxation");
  estimate_sc->add_option("--estimator", est.estimator, "ols or wendy");
  estimate_sc->add_option("--min-radius", est.min_radius, "Fixed minimum test-function radius");
  estimate_sc->add_option("--ci-level", est.ci_level, "Confidence level");
  estimate_sc->add_option("--out", est.out_path, "Write JSON here instead of stdout");
  estimate_sc->add_flag("--print-config", est.print_config, "Print the resolved config and exit");

  BenchmarkArgs bench;
  auto* bench_sc = app.add_subcommand("benchmark", "Run a noise/resolution sweep");
  bench_sc->add_option("config", bench.config, "JSON config file");
  bench_sc->add_option("--out-dir", bench.out_dir, "Directory for trials.csv, summary.json, long.csv");
  bench_sc->add_option("--jobs", bench.jobs, "Worker threads (0 = all cores)");
  bench_sc->add_option("--trials", bench.trials, "Override the number of trials");
  bench_sc->add_flag("--full-scale", bench.full_scale, "Use 100 trials per cell");
  bench_sc->add_flag("--print-config", bench.print_config, "Print the resolved config and exit");

  CompareArgs cmp;
  auto* compare_sc = app.add_subcommand("compare", "Compare estimators on one model");
  compare_sc->add_option("--model", cmp.model, "Model name");
  compare_sc->add_option("--M", cmp.M, "Number of time intervals");
  compare_sc->add_option("--noise", cmp.noise, "Noise ratio");
  compare_sc->add_option("--trials", cmp.trials, "Number of trials");
  compare_sc->add_option("--seed-base", cmp.seed_base, "First trial seed");
  compare_sc->add_option("--estimators", cmp.estimators, "Comma list from ols,wendy,fsnls,wendy_fsnls");
  compare_sc->add_option("--config", cmp.config, "JSON config file");
  compare_sc->add_option("--jobs", cmp.jobs, "Worker threads (0 = all cores)");
  compare_sc->add_option("--out", cmp.out_path, "Write the summary JSON here");
  compare_sc->add_flag("--print-config", cmp.print_config, "Print the resolved config and exit");

  std::vector<std::string> argv_store;
  argv_store.reserve(args.size() + 1);
  argv_store.emplace_back("wendy");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion& e) {
    out << e.what() << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error[InvalidArgument]: " << e.what() << '\n';
    return 2;
  }

  try {
    if (models_ls->parsed()) {
      models_list(models_json, out);
    } else if (simulate_sc->parsed()) {
      simulate(sim, out);
    } else if (estimate_sc->parsed()) {
      estimate_cmd(est, out);
    } else if (bench_sc->parsed()) {
      benchmark_cmd(bench, out);
    } else if (compare_sc->parsed()) {
      compare_cmd(cmp, out);
    }
  } catch (const Error& e) {
    err << "error[" << to_string(e.code()) << "]: " << e.what() << '\n';
    return is_validation_error(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace wendy::cli
