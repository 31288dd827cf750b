// Experiment runner: dataset generation, training, evaluation, hyper-parameter
// sweeps, posterior-learning checks, and decision-boundary exports.

#include <array>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "adaabc/experiment.hpp"

namespace {

using adaabc::ConfigError;

struct CommonArgs {
  std::string config_file;
  std::vector<std::string> sets;
  std::string preset;
  std::string data_dir;
  std::string out;
  std::string name;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_file, "config file of key = value lines");
  cmd->add_option("--set", args.sets, "explicit dotted-key override, key=value")
      ->take_all();
  cmd->add_option("--data,--preset", args.preset, "data preset: toy2d|sbp99|sbp95|sbp90");
  cmd->add_option("--data-dir", args.data_dir, "directory with train/val/test csv files");
  cmd->add_option("--out", args.out, "output root directory");
  cmd->add_option("--name", args.name, "run name (output subdirectory)");
  cmd->add_option("--seed", args.seed, "master seed (data + training)");
}

adaabc::ExperimentConfig build_config(const CommonArgs& args) {
  adaabc::ExperimentConfig cfg;
  if (!args.config_file.empty()) {
    for (const auto& [key, value] : adaabc::parse_config_file(args.config_file)) {
      cfg.apply(key, value);
    }
  }
  if (!args.preset.empty()) cfg.apply("data.preset", args.preset);
  if (!args.data_dir.empty()) cfg.apply("data.dir", args.data_dir);
  if (!args.out.empty()) cfg.apply("run.out", args.out);
  if (!args.name.empty()) cfg.apply("run.name", args.name);
  if (args.seed) cfg.apply("run.seed", std::to_string(*args.seed));
  for (const std::string& kv : args.sets) {
    std::size_t eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got " + kv);
    cfg.apply(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

std::vector<double> parse_real_list(const std::string& s, const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError(std::string(what) + ": bad number '" + item + "'");
    }
  }
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  for (double v : parse_real_list(s, "--seeds")) {
    out.push_back(static_cast<std::uint64_t>(v));
  }
  return out;
}

// "lo:hi:step" ranges or a plain comma list.
std::vector<double> parse_grid(const std::string& s, const char* what) {
  if (s.find(':') == std::string::npos) return parse_real_list(s, what);
  std::stringstream ss(s);
  std::string part;
  std::vector<double> parts;
  while (std::getline(ss, part, ':')) parts.push_back(std::stod(part));
  if (parts.size() != 3 || parts[2] <= 0.0) {
    throw ConfigError(std::string(what) + ": expected lo:hi:step");
  }
  std::vector<double> out;
  for (double v = parts[0]; v <= parts[1] + 1e-12; v += parts[2]) out.push_back(v);
  return out;
}

void print_metrics(const adaabc::MetricBlock& mb, std::ostream& os) {
  auto show = [&](const char* name, const std::optional<double>& v) {
    os << name << ": " << (v ? adaabc::detail::format_double(*v) : "undefined") << "\n";
  };
  show("aligned_auc", mb.aligned_auc);
  show("conflicting_auc", mb.conflicting_auc);
  show("balanced_auc", mb.balanced_auc);
  show("overall_auc", mb.overall_auc);
  show("aligned_acc", mb.aligned_accuracy());
  show("conflicting_acc", mb.conflicting_accuracy());
  show("overall_acc", mb.overall_accuracy());
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Adaptive agree/disagree debiasing on synthetic spurious-correlation data"};
  app.require_subcommand(1);

  std::ostringstream keys_help;
  keys_help << "Config keys (for --config files and --set):\n";
  for (const auto& [key, help] : adaabc::ExperimentConfig::key_help()) {
    keys_help << "  " << key << "  --  " << help << "\n";
  }
  app.footer(keys_help.str());

  CommonArgs gen_args, train_args, eval_args, sweep_args;

  CLI::App* gen = app.add_subcommand("generate", "write train/val/test csv files");
  add_common(gen, gen_args);

  CLI::App* train = app.add_subcommand("train", "train one model and write the run directory");
  add_common(train, train_args);
  std::string method;
  double lambda = -1.0;
  std::int64_t heads = -1;
  std::int64_t epochs = -1;
  train->add_option("--method", method, "ada_abc|erm|agree_only|disagree_only");
  train->add_option("--lambda", lambda, "disagreement weight");
  train->add_option("--heads", heads, "council heads");
  train->add_option("--epochs", epochs, "epoch budget");

  CLI::App* eval = app.add_subcommand("evaluate", "group metrics of a checkpoint");
  add_common(eval, eval_args);
  std::string eval_model, eval_split = "test", eval_csv;
  eval->add_option("--model", eval_model, "model checkpoint")->required();
  eval->add_option("--split", eval_split, "train|val|test (default test)");
  eval->add_option("--csv", eval_csv, "append a metrics row to this csv");

  CLI::App* sweep = app.add_subcommand("sweep", "train over a value grid x seeds");
  add_common(sweep, sweep_args);
  std::string axis = "lambda", values_str, seeds_str = "0,1,2";
  sweep->add_option("--axis", axis, "lambda|heads");
  sweep->add_option("--values", values_str, "comma-separated values")->required();
  sweep->add_option("--seeds", seeds_str, "comma-separated seeds (default 0,1,2)");

  CLI::App* theorem = app.add_subcommand(
      "theorem", "posterior recovered by the adaptive objective, per bias-quality level");
  double th_lambda = 1.0, th_epsilon = 1e-8, th_grid = 1e-3;
  std::string th_pi, th_corruption = "0", th_csv;
  theorem->add_option("--lambda", th_lambda, "disagreement weight (default 1)");
  theorem->add_option("--epsilon", th_epsilon, "opposite-loss stabilizer (default 1e-8)");
  theorem->add_option("--pi", th_pi, "cell masses p11,p00,p01,p10 (default uniform)");
  theorem->add_option("--corruption", th_corruption,
                      "levels toward 0.5: lo:hi:step or comma list (default 0)");
  theorem->add_option("--grid-step", th_grid, "search resolution (default 0.001)");
  theorem->add_option("--csv", th_csv, "export the sweep table to this path");

  CLI::App* boundary = app.add_subcommand("boundary", "probability grid of a 2d model");
  std::string b_model, b_bounds = "-4,4,-4,4", b_out = "boundary.csv";
  std::int64_t b_res = 100;
  boundary->add_option("--model", b_model, "model checkpoint")->required();
  boundary->add_option("--bounds", b_bounds, "xmin,xmax,ymin,ymax (default -4,4,-4,4)");
  boundary->add_option("--resolution", b_res, "points per axis (default 100)");
  boundary->add_option("--out", b_out, "output csv (default boundary.csv)");

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    auto dir = adaabc::run_generate(build_config(gen_args));
    std::cout << "wrote dataset splits to " << dir.string() << "\n";
    return 0;
  }

  if (train->parsed()) {
    adaabc::ExperimentConfig cfg = build_config(train_args);
    if (!method.empty()) cfg.apply("trainer.method", method);
    if (lambda >= 0.0) cfg.trainer.lambda = lambda;
    if (heads >= 0) cfg.trainer.council.n_heads = static_cast<std::size_t>(heads);
    if (epochs >= 0) cfg.trainer.max_epochs = static_cast<std::size_t>(epochs);
    adaabc::TrainOutcome outcome = adaabc::run_train(cfg);
    std::cout << "run directory: " << outcome.run_dir.string() << "\n";
    if (outcome.result.record.diverged) {
      std::cerr << "run diverged: " << outcome.result.record.diagnostic << "\n";
    } else if (outcome.result.record.test_metrics) {
      print_metrics(*outcome.result.record.test_metrics, std::cout);
    }
    return outcome.exit_code;
  }

  if (eval->parsed()) {
    adaabc::ExperimentConfig cfg = build_config(eval_args);
    adaabc::DatasetSplits splits = adaabc::resolve_splits(cfg);
    const adaabc::Dataset* ds = &splits.test;
    if (eval_split == "train") {
      ds = &splits.train;
    } else if (eval_split == "val") {
      ds = &splits.val;
    } else if (eval_split != "test") {
      throw ConfigError("--split must be train, val, or test");
    }
    adaabc::Mlp model = adaabc::load_model(eval_model);
    adaabc::MetricBlock mb = adaabc::evaluate_groups(model, *ds);
    print_metrics(mb, std::cout);
    if (!eval_csv.empty()) {
      bool fresh = !std::filesystem::exists(eval_csv);
      std::ofstream os(eval_csv, std::ios::app);
      if (!os) throw ConfigError("cannot open for writing: " + eval_csv);
      if (fresh) os << adaabc::metric_csv_header() << "\n";
      os << adaabc::metric_csv_row(cfg.run_name, cfg.trainer.seed,
                                   adaabc::method_name(cfg.trainer.method),
                                   cfg.trainer.lambda, cfg.trainer.council.n_heads, eval_split,
                                   mb)
         << "\n";
    }
    return 0;
  }

  if (sweep->parsed()) {
    adaabc::ExperimentConfig cfg = build_config(sweep_args);
    auto csv = adaabc::run_sweep(cfg, axis, parse_real_list(values_str, "--values"),
                                 parse_seed_list(seeds_str));
    std::cout << "sweep table: " << csv.string() << "\n";
    return 0;
  }

  if (theorem->parsed()) {
    adaabc::CellDistribution pi = adaabc::CellDistribution::uniform();
    if (!th_pi.empty()) {
      std::vector<double> masses = parse_real_list(th_pi, "--pi");
      if (masses.size() != 4) throw ConfigError("--pi expects 4 masses p11,p00,p01,p10");
      for (std::size_t c = 0; c < 4; ++c) pi.pi[c] = masses[c];
    }
    std::optional<std::filesystem::path> csv;
    if (!th_csv.empty()) csv = th_csv;
    adaabc::run_theorem(pi, th_lambda, th_epsilon,
                        parse_grid(th_corruption, "--corruption"), th_grid, std::cout, csv);
    return 0;
  }

  if (boundary->parsed()) {
    std::vector<double> b = parse_real_list(b_bounds, "--bounds");
    if (b.size() != 4) throw ConfigError("--bounds expects xmin,xmax,ymin,ymax");
    if (b_res < 1) throw ConfigError("--resolution must be >= 1");
    adaabc::Mlp model = adaabc::load_model(b_model);
    adaabc::run_boundary(model, {b[0], b[1], b[2], b[3]},
                         static_cast<std::size_t>(b_res), b_out);
    std::cout << "wrote " << b_out << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const adaabc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const adaabc::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const adaabc::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
