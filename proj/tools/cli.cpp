#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <iostream>
#include <optional>

#include <nlohmann/json.hpp>

#include "rffpsr/arx.hpp"
#include "rffpsr/datagen.hpp"
#include "rffpsr/evaluate.hpp"
#include "rffpsr/log.hpp"
#include "rffpsr/random.hpp"
#include "rffpsr/refine.hpp"
#include "rffpsr/text.hpp"

namespace rffpsr::cli {

namespace {

using Json = nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flags shared by the subcommands. Unset flags fall back to the config file, then to defaults.
struct Flags {
  std::string data;
  std::string out;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> k;
  std::optional<int> history;
  std::optional<long> rff;
  std::optional<long> pca;
  std::optional<std::string> s1;
  std::optional<double> lambda1;
  std::optional<double> lambda2;
  std::optional<std::string> horizons;
  bool quiet = false;
  bool verbose = false;
};

struct Settings {
  Json config = Json::object();

  template <class T>
  T get(const std::optional<T>& flag, const char* key, T fallback) const {
    if (flag) return *flag;
    if (config.contains(key)) {
      try {
        return config.at(key).get<T>();
      } catch (const Json::exception&) {
        throw UsageError(std::string("config key '") + key + "' has the wrong type");
      }
    }
    return fallback;
  }

  template <class T>
  std::optional<T> get_optional(const std::optional<T>& flag, const char* key) const {
    if (flag) return flag;
    if (config.contains(key)) return get<T>(flag, key, T{});
    return std::nullopt;
  }

  std::string get_string(const std::string& flag, const char* key, const std::string& fallback = {}) const {
    return flag.empty() ? get<std::string>(std::nullopt, key, fallback) : flag;
  }
};

Settings load_settings(const Flags& f) {
  Settings s;
  if (f.config.empty()) return s;
  try {
    s.config = Json::parse(read_file(f.config));
  } catch (const Json::parse_error& e) {
    throw UsageError("config file is not valid JSON: " + std::string(e.what()));
  }
  if (!s.config.is_object()) throw UsageError("config file must hold a JSON object");
  return s;
}

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "JSON config file (flags take precedence)");
  app->add_flag("--quiet", f.quiet, "Suppress warnings");
  app->add_flag("--verbose", f.verbose, "Progress messages on stderr");
}

void add_learning(CLI::App* app, Flags& f) {
  app->add_option("--seed", f.seed, "Random seed");
  app->add_option("--k", f.k, "Future window length");
  app->add_option("--history", f.history, "History window length");
  app->add_option("--rff", f.rff, "Random Fourier frequencies per map");
  app->add_option("--pca", f.pca, "Projection dimension (0 = none)");
}

void apply_log_level(const Flags& f) {
  set_log_level(f.quiet ? LogLevel::quiet : f.verbose ? LogLevel::info : LogLevel::warning);
}

std::string require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
  return value;
}

FutureSpec spec_from(const Flags& f, const Settings& s) {
  FutureSpec spec;
  spec.k = s.get(f.k, "k", 10);
  spec.history_len = s.get(f.history, "history", 20);
  if (spec.k < 1 || spec.history_len < 0) throw UsageError("--k must be >= 1 and --history >= 0");
  return spec;
}

FeatureConfig features_from(const Flags& f, const Settings& s, std::uint64_t seed) {
  FeatureConfig cfg;
  cfg.num_freq = s.get(f.rff, "rff", 2000L);
  cfg.pca_dim = s.get(f.pca, "pca", 20L);
  if (cfg.num_freq < 1 || cfg.pca_dim < 0) throw UsageError("--rff must be >= 1 and --pca >= 0");
  cfg.seed = derive_seed(seed, 1);
  return cfg;
}

std::vector<double> grid_for(const std::optional<double>& lambda) {
  return lambda ? std::vector<double>{*lambda} : kDefaultLambdaGrid;
}

std::string sidecar(const std::string& out, const char* suffix) { return out + suffix; }

// ---------------------------------------------------------------------------

int cmd_simulate(const Flags& f, const std::string& system, std::optional<std::size_t> n_traj,
                 std::optional<long> len) {
  const Settings s = load_settings(f);
  const std::string out = require(s.get_string(f.out, "out"), "--out");
  const std::string sys = s.get_string(system, "system", "benchmark");
  const auto n = s.get(n_traj, "n_traj", std::size_t{20});
  const auto length = s.get(len, "len", 100L);
  const auto seed = s.get(f.seed, "seed", std::uint64_t{0});
  if (n < 1 || length < 1) throw UsageError("--n-traj and --len must be positive");
  Dataset ds;
  if (sys == "benchmark") {
    BenchmarkOptions o;
    o.n_traj = n;
    o.length = length;
    o.seed = seed;
    ds = simulate_benchmark(o);
  } else if (sys == "lds") {
    LdsOptions o;
    o.n_traj = n;
    o.length = length;
    o.seed = seed;
    ds = simulate_lds(default_lds(), o);
  } else {
    throw UsageError("--system must be benchmark or lds");
  }
  write_dataset(ds, out);
  return kExitOk;
}

int cmd_train(const Flags& f, const std::string& init) {
  const Settings s = load_settings(f);
  const std::string data = require(s.get_string(f.data, "data"), "--data");
  const std::string out = require(s.get_string(f.out, "out"), "--out");
  const auto seed = s.get(f.seed, "seed", std::uint64_t{0});
  Hyperparams hp;
  hp.spec = spec_from(f, s);
  hp.features = features_from(f, s, seed);
  hp.seed = seed;
  hp.s1 = s1_mode_from_string(s.get(f.s1, "s1", std::string("joint")));
  const std::string init_mode = s.get_string(init, "init", "two-stage");
  if (init_mode != "two-stage" && init_mode != "random") throw UsageError("--init must be two-stage or random");
  const auto l1 = s.get_optional(f.lambda1, "lambda1");
  const auto l2 = s.get_optional(f.lambda2, "lambda2");

  const Dataset ds = read_dataset(data);
  LambdaSelection chosen;
  RffPsrModel m = learn_selected(ds, hp, grid_for(l1), grid_for(l2), &chosen);
  log_info("train: lambda1=" + format_double(chosen.lambda1) + " lambda2=" + format_double(chosen.lambda2));
  if (init_mode == "random") m = random_init(m, derive_seed(seed, 2));
  save_model(m, out);
  return kExitOk;
}

int cmd_refine(const Flags& f, const std::string& model_path, const std::string& log_path,
               std::optional<int> max_epochs, bool freeze_q0) {
  const Settings s = load_settings(f);
  const std::string data = require(s.get_string(f.data, "data"), "--data");
  const std::string out = require(s.get_string(f.out, "out"), "--out");
  const std::string model_file = require(s.get_string(model_path, "model"), "--model");
  RefineConfig cfg;
  cfg.max_epochs = s.get(max_epochs, "max_epochs", cfg.max_epochs);
  cfg.refine_q0 = !freeze_q0;
  const Dataset ds = read_dataset(data);
  const RffPsrModel m = load_model(model_file);
  const RefineResult r = refine(m, ds.select(Split::train), ds.select(Split::val), cfg);
  log_info("refine: validation loss " + format_double(r.initial_val_loss) + " -> " +
           format_double(r.best_val_loss));
  save_model(r.model, out);
  write_file(log_path.empty() ? sidecar(out, ".epochs.csv") : log_path, epoch_log_csv(r.log));
  return kExitOk;
}

int cmd_arx(const Flags& f) {
  const Settings s = load_settings(f);
  const std::string data = require(s.get_string(f.data, "data"), "--data");
  const std::string out = require(s.get_string(f.out, "out"), "--out");
  const auto seed = s.get(f.seed, "seed", std::uint64_t{0});
  const FutureSpec spec = spec_from(f, s);
  const FeatureConfig cfg = features_from(f, s, seed);
  const auto lambda = s.get_optional(f.lambda1, "lambda1");
  const Dataset ds = read_dataset(data);
  ds.validate();
  const ArxModel m = arx_train_selected(ds.select(Split::train), ds.select(Split::val), spec, cfg,
                                        grid_for(lambda));
  save_arx(m, out);
  return kExitOk;
}

int cmd_eval(const Flags& f, std::vector<std::string> models, bool baselines) {
  const Settings s = load_settings(f);
  const std::string data = require(s.get_string(f.data, "data"), "--data");
  const std::string out = require(s.get_string(f.out, "out"), "--out");
  if (models.empty() && s.config.contains("model")) models = {s.get<std::string>(std::nullopt, "model", "")};
  if (models.empty()) throw UsageError("--model is required");
  const std::vector<int> horizons = parse_horizons(s.get(f.horizons, "horizons", std::string("1..10")));

  const Dataset ds = read_dataset(data);
  ds.validate();
  std::vector<EvalMethod> methods;
  std::optional<Eigen::Index> skip;
  int k = 0;
  for (const std::string& path : models) {
    const std::string text = read_file(path);
    std::string format;
    try {
      format = Json::parse(text).at("format").get<std::string>();
    } catch (const Json::exception& e) {
      throw ParseError(path + ": not a model file (" + e.what() + ")");
    }
    const std::string name = std::filesystem::path(path).stem().string();
    if (format.rfind("rffpsr-arx", 0) == 0) {
      ArxModel m = arx_from_json(text);
      k = m.spec.k;
      skip = skip.value_or(m.spec.history_len);
      methods.push_back(arx_method(name, std::move(m)));
    } else {
      RffPsrModel m = model_from_json(text);
      k = m.features.spec.k;
      skip = skip.value_or(m.features.spec.history_len);
      methods.push_back(psr_method(name, std::move(m)));
    }
    if (horizons.back() > k) throw UsageError("horizons must not exceed the model's k");
  }
  if (baselines) methods.push_back(mean_method(ds.select(Split::train), k));
  EvalReport report = evaluate(methods, ds.select(Split::test), horizons, skip.value_or(0));
  report.dataset_hash = dataset_hash(ds);
  report.seed = s.get(f.seed, "seed", std::uint64_t{0});
  write_file(out, report_csv(report));
  write_file(sidecar(out, ".meta.json"), report_meta_json(report));
  return kExitOk;
}

}  // namespace

std::vector<int> parse_horizons(const std::string& text) {
  std::vector<int> out;
  auto to_int = [&](const std::string& s) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || v < 1)
      throw UsageError("invalid horizon list '" + text + "'");
    return v;
  };
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const int lo = to_int(text.substr(0, dots));
    const int hi = to_int(text.substr(dots + 2));
    if (hi < lo) throw UsageError("invalid horizon range '" + text + "'");
    for (int h = lo; h <= hi; ++h) out.push_back(h);
  } else {
    std::size_t start = 0;
    while (start <= text.size()) {
      const auto comma = text.find(',', start);
      out.push_back(to_int(text.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Random-Fourier-feature predictive state models: simulate, learn, refine, evaluate"};
  app.require_subcommand(1);
  Flags f;

  auto* simulate = app.add_subcommand("simulate", "Generate a trajectory dataset");
  std::string system;
  std::optional<std::size_t> n_traj;
  std::optional<long> len;
  simulate->add_option("--system", system, "benchmark or lds");
  simulate->add_option("--n-traj", n_traj, "Number of trajectories");
  simulate->add_option("--len", len, "Trajectory length");
  simulate->add_option("--seed", f.seed, "Random seed");
  simulate->add_option("--out", f.out, "Output dataset directory");
  add_common(simulate, f);

  auto* train = app.add_subcommand("train", "Learn an RFF-PSR by two-stage regression");
  std::string init;
  train->add_option("--data", f.data, "Dataset directory");
  train->add_option("--out", f.out, "Output model file");
  add_learning(train, f);
  train->add_option("--s1", f.s1, "S1 regression: joint or cond")->check(CLI::IsMember({"joint", "cond"}));
  train->add_option("--lambda1", f.lambda1, "S1 ridge (selected on validation if omitted)");
  train->add_option("--lambda2", f.lambda2, "S2 ridge (selected on validation if omitted)");
  train->add_option("--init", init, "two-stage (default) or random parameters");
  add_common(train, f);

  auto* refine_cmd = app.add_subcommand("refine", "Refine a model by backpropagation through time");
  std::string model_path;
  std::string log_path;
  std::optional<int> max_epochs;
  bool freeze_q0 = false;
  refine_cmd->add_option("--model", model_path, "Input model file");
  refine_cmd->add_option("--data", f.data, "Dataset directory");
  refine_cmd->add_option("--out", f.out, "Output model file");
  refine_cmd->add_option("--log", log_path, "Epoch log CSV (default <out>.epochs.csv)");
  refine_cmd->add_option("--max-epochs", max_epochs, "Epoch limit");
  refine_cmd->add_flag("--freeze-q0", freeze_q0, "Keep the initial state fixed");
  refine_cmd->add_option("--seed", f.seed, "Random seed");
  add_common(refine_cmd, f);

  auto* eval = app.add_subcommand("eval", "Score models on the test split");
  std::vector<std::string> models;
  bool baselines = false;
  eval->add_option("--model", models, "Model file (repeatable; RFF-PSR or ARX)");
  eval->add_option("--data", f.data, "Dataset directory");
  eval->add_option("--out", f.out, "Results CSV");
  eval->add_option("--horizons", f.horizons, "Horizons, e.g. 1..10");
  eval->add_option("--seed", f.seed, "Seed recorded in the metadata");
  eval->add_flag("--baselines", baselines, "Add the training-mean predictor");
  add_common(eval, f);

  auto* arx = app.add_subcommand("arx", "Train the RFF-ARX baseline");
  arx->add_option("--data", f.data, "Dataset directory");
  arx->add_option("--out", f.out, "Output model file");
  add_learning(arx, f);
  arx->add_option("--lambda1", f.lambda1, "Ridge (selected on validation if omitted)");
  add_common(arx, f);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    apply_log_level(f);
    if (*simulate) return cmd_simulate(f, system, n_traj, len);
    if (*train) return cmd_train(f, init);
    if (*refine_cmd) return cmd_refine(f, model_path, log_path, max_epochs, freeze_q0);
    if (*eval) return cmd_eval(f, models, baselines);
    if (*arx) return cmd_arx(f);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace rffpsr::cli
