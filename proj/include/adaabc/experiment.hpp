#pragma once

#include <array>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "adaabc/checkpoint.hpp"
#include "adaabc/metrics.hpp"
#include "adaabc/synthdata.hpp"
#include "adaabc/theorem.hpp"
#include "adaabc/trainer.hpp"

namespace adaabc {

// Environment variable naming the default output root.
constexpr const char* kOutRootEnv = "ADAABC_OUT";

// Full experiment description addressable by dotted keys. Later assignments
// win; applying a preset expands it immediately, so keys given afterwards
// override preset values.
struct ExperimentConfig {
  std::string run_name = "run";
  std::filesystem::path out_root;
  std::string data_preset;  // last preset applied, recorded for provenance
  std::string data_dir;     // when set, splits are loaded instead of generated
  std::uint64_t run_seed = 0;
  SynthSpec data = toy2d_spec();
  TrainerConfig trainer;

  ExperimentConfig() {
    if (const char* env = std::getenv(kOutRootEnv); env && *env) {
      out_root = env;
    } else {
      out_root = "runs";
    }
    apply_preset_defaults_("toy2d");
  }

  void apply(const std::string& key, const std::string& value);
  std::string snapshot() const;

  static const std::vector<std::array<std::string, 2>>& key_help();

 private:
  // Presets bundle the cell layout with the matching hyper-parameters, and
  // a learning rate / epoch budget calibrated for these data sizes.
  void apply_preset_defaults_(const std::string& name) {
    data_preset = name;
    data = preset_spec(name, data.seed);
    trainer.learning_rate = 1e-3;
    if (name == "toy2d") {
      trainer.lambda = 1.0;
      trainer.council.n_heads = 4;
      trainer.max_epochs = 200;
    } else if (name == "sbp99") {
      trainer.lambda = 100.0;
      trainer.council.n_heads = 16;
      trainer.max_epochs = 12;
    } else if (name == "sbp95") {
      trainer.lambda = 10.0;
      trainer.council.n_heads = 64;
      trainer.max_epochs = 12;
    } else if (name == "sbp90") {
      trainer.lambda = 5.0;
      trainer.council.n_heads = 2;
      trainer.max_epochs = 12;
    }
  }
};

namespace detail {

inline std::uint64_t parse_u64(const std::string& v, const std::string& key) {
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
}

inline std::size_t parse_count(const std::string& v, const std::string& key) {
  return static_cast<std::size_t>(parse_u64(v, key));
}

inline double parse_real(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

inline bool parse_flag(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

inline std::vector<std::size_t> parse_count_list(const std::string& v, const std::string& key) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(parse_count(item, key));
  }
  return out;
}

inline std::string format_real(double v) { return adaabc::detail::format_double(v); }

}  // namespace detail

inline void ExperimentConfig::apply(const std::string& key, const std::string& value) {
  using detail::parse_count;
  using detail::parse_flag;
  using detail::parse_real;
  using detail::parse_u64;

  if (key == "run.name") {
    run_name = value;
  } else if (key == "run.out") {
    out_root = value;
  } else if (key == "run.seed") {
    run_seed = parse_u64(value, key);
    data.seed = run_seed;
    trainer.seed = run_seed;
  } else if (key == "data.preset") {
    apply_preset_defaults_(value);
  } else if (key == "data.dir") {
    data_dir = value;
  } else if (key == "data.seed") {
    data.seed = parse_u64(value, key);
  } else if (key == "data.kind") {
    if (value == "toy2d") {
      data.kind = SynthKind::toy2d;
    } else if (value == "highdim") {
      data.kind = SynthKind::highdim;
    } else {
      throw ConfigError("data.kind: expected toy2d or highdim");
    }
  } else if (key == "data.target_dims") {
    data.target_dims = parse_count(value, key);
  } else if (key == "data.bias_dims") {
    data.bias_dims = parse_count(value, key);
  } else if (key == "data.noise_dims") {
    data.noise_dims = parse_count(value, key);
  } else if (key == "data.target_mu") {
    data.target_mu = parse_real(value, key);
  } else if (key == "data.target_sigma") {
    data.target_sigma = parse_real(value, key);
  } else if (key == "data.bias_mu") {
    data.bias_mu = parse_real(value, key);
  } else if (key == "data.bias_sigma") {
    data.bias_sigma = parse_real(value, key);
  } else if (key == "data.train.n11") {
    data.counts.train.n11 = parse_count(value, key);
  } else if (key == "data.train.n00") {
    data.counts.train.n00 = parse_count(value, key);
  } else if (key == "data.train.n01") {
    data.counts.train.n01 = parse_count(value, key);
  } else if (key == "data.train.n10") {
    data.counts.train.n10 = parse_count(value, key);
  } else if (key == "data.val.n11") {
    data.counts.val.n11 = parse_count(value, key);
  } else if (key == "data.val.n00") {
    data.counts.val.n00 = parse_count(value, key);
  } else if (key == "data.val.n01") {
    data.counts.val.n01 = parse_count(value, key);
  } else if (key == "data.val.n10") {
    data.counts.val.n10 = parse_count(value, key);
  } else if (key == "data.test.n11") {
    data.counts.test.n11 = parse_count(value, key);
  } else if (key == "data.test.n00") {
    data.counts.test.n00 = parse_count(value, key);
  } else if (key == "data.test.n01") {
    data.counts.test.n01 = parse_count(value, key);
  } else if (key == "data.test.n10") {
    data.counts.test.n10 = parse_count(value, key);
  } else if (key == "trainer.method") {
    trainer.method = parse_method(value);
  } else if (key == "trainer.lambda") {
    trainer.lambda = parse_real(value, key);
  } else if (key == "trainer.epsilon") {
    trainer.epsilon = parse_real(value, key);
  } else if (key == "trainer.q") {
    trainer.gce.q = parse_real(value, key);
  } else if (key == "trainer.lr") {
    trainer.learning_rate = parse_real(value, key);
  } else if (key == "trainer.batch_size") {
    trainer.batch_size = parse_count(value, key);
  } else if (key == "trainer.epochs") {
    trainer.max_epochs = parse_count(value, key);
  } else if (key == "trainer.patience") {
    trainer.patience = parse_count(value, key);
  } else if (key == "trainer.seed") {
    trainer.seed = parse_u64(value, key);
  } else if (key == "trainer.hidden") {
    trainer.hidden = detail::parse_count_list(value, key);
  } else if (key == "council.heads") {
    trainer.council.n_heads = parse_count(value, key);
  } else if (key == "council.fraction") {
    trainer.council.subset_fraction = parse_real(value, key);
  } else if (key == "council.with_replacement") {
    trainer.council.with_replacement = parse_flag(value, key);
  } else {
    throw ConfigError("unknown config key: " + key);
  }
}

inline const std::vector<std::array<std::string, 2>>& ExperimentConfig::key_help() {
  static const std::vector<std::array<std::string, 2>> help = {
      {"run.name", "run directory name (default: run)"},
      {"run.out", "output root (default: $ADAABC_OUT or ./runs)"},
      {"run.seed", "master seed; sets data.seed and trainer.seed"},
      {"data.preset", "toy2d | sbp99 | sbp95 | sbp90 (also sets lambda/heads/epochs)"},
      {"data.dir", "load train/val/test csv from this directory instead of generating"},
      {"data.seed", "dataset generation seed"},
      {"data.kind", "toy2d | highdim"},
      {"data.target_dims", "coordinates carrying the target signal"},
      {"data.bias_dims", "coordinates carrying the bias signal"},
      {"data.noise_dims", "pure-noise coordinates"},
      {"data.target_mu", "target cluster center magnitude (default 1)"},
      {"data.target_sigma", "target noise (default 0.6; the hard feature)"},
      {"data.bias_mu", "bias cluster center magnitude (default 1)"},
      {"data.bias_sigma", "bias noise (default 0.25; the easy feature)"},
      {"data.train.n11", "train samples with (t,b)=(1,1); same pattern for n00/n01/n10"},
      {"data.val.n11", "validation cell counts, as above"},
      {"data.test.n11", "test cell counts, as above"},
      {"trainer.method", "ada_abc | erm | agree_only | disagree_only"},
      {"trainer.lambda", "disagreement weight (>= 0)"},
      {"trainer.epsilon", "opposite-loss stabilizer (default 1e-8)"},
      {"trainer.q", "generalized cross entropy exponent in (0,1] (default 0.7)"},
      {"trainer.lr", "adam learning rate (default 1e-4)"},
      {"trainer.batch_size", "minibatch size (default 128)"},
      {"trainer.epochs", "epoch budget"},
      {"trainer.patience", "early-stop patience on validation overall AUC"},
      {"trainer.seed", "training seed (initialization and shuffling)"},
      {"trainer.hidden", "comma-separated hidden layer widths (default by input dim)"},
      {"council.heads", "number of council heads"},
      {"council.fraction", "per-head training subset fraction in (0,1] (default 0.7)"},
      {"council.with_replacement", "sample head subsets with replacement (default false)"},
  };
  return help;
}

inline std::string ExperimentConfig::snapshot() const {
  std::ostringstream os;
  os << "# generated config snapshot; re-run with --config <this file>\n";
  os << "run.name = " << run_name << "\n";
  os << "run.out = " << out_root.string() << "\n";
  if (!data_dir.empty()) os << "data.dir = " << data_dir << "\n";
  os << "data.seed = " << data.seed << "\n";
  os << "data.kind = " << (data.kind == SynthKind::toy2d ? "toy2d" : "highdim") << "\n";
  os << "data.target_dims = " << data.target_dims << "\n";
  os << "data.bias_dims = " << data.bias_dims << "\n";
  os << "data.noise_dims = " << data.noise_dims << "\n";
  os << "data.target_mu = " << detail::format_real(data.target_mu) << "\n";
  os << "data.target_sigma = " << detail::format_real(data.target_sigma) << "\n";
  os << "data.bias_mu = " << detail::format_real(data.bias_mu) << "\n";
  os << "data.bias_sigma = " << detail::format_real(data.bias_sigma) << "\n";
  auto cells = [&os](const char* split, const CellCounts& c) {
    os << "data." << split << ".n11 = " << c.n11 << "\n";
    os << "data." << split << ".n00 = " << c.n00 << "\n";
    os << "data." << split << ".n01 = " << c.n01 << "\n";
    os << "data." << split << ".n10 = " << c.n10 << "\n";
  };
  cells("train", data.counts.train);
  cells("val", data.counts.val);
  cells("test", data.counts.test);
  os << "trainer.method = " << method_name(trainer.method) << "\n";
  os << "trainer.lambda = " << detail::format_real(trainer.lambda) << "\n";
  os << "trainer.epsilon = " << detail::format_real(trainer.epsilon) << "\n";
  os << "trainer.q = " << detail::format_real(trainer.gce.q) << "\n";
  os << "trainer.lr = " << detail::format_real(trainer.learning_rate) << "\n";
  os << "trainer.batch_size = " << trainer.batch_size << "\n";
  os << "trainer.epochs = " << trainer.max_epochs << "\n";
  os << "trainer.patience = " << trainer.patience << "\n";
  os << "trainer.seed = " << trainer.seed << "\n";
  if (!trainer.hidden.empty()) {
    os << "trainer.hidden = ";
    for (std::size_t i = 0; i < trainer.hidden.size(); ++i) {
      os << (i ? "," : "") << trainer.hidden[i];
    }
    os << "\n";
  }
  os << "council.heads = " << trainer.council.n_heads << "\n";
  os << "council.fraction = " << detail::format_real(trainer.council.subset_fraction) << "\n";
  os << "council.with_replacement = " << (trainer.council.with_replacement ? "true" : "false")
     << "\n";
  return os.str();
}

// Flat key-value config files: one `key = value` per line, '#' comments.
inline std::vector<std::pair<std::string, std::string>> parse_config_file(
    const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path.string());
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(is, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                        ": expected key = value");
    }
    entries.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return entries;
}

namespace detail {

inline std::string opt_str(const std::optional<double>& v) {
  return v ? format_real(*v) : std::string("undefined");
}

}  // namespace detail

inline std::string metric_csv_header() {
  return "run,seed,method,lambda,heads,split,aligned_auc,conflicting_auc,balanced_auc,"
         "overall_auc,acc_t1b1,acc_t0b0,acc_t0b1,acc_t1b0,aligned_acc,conflicting_acc,"
         "overall_acc";
}

inline std::string metric_csv_row(const std::string& run, std::uint64_t seed,
                                  const std::string& method, double lambda, std::size_t heads,
                                  const std::string& split, const MetricBlock& mb) {
  std::ostringstream os;
  os << run << ',' << seed << ',' << method << ',' << detail::format_real(lambda) << ','
     << heads << ',' << split << ',' << detail::opt_str(mb.aligned_auc) << ','
     << detail::opt_str(mb.conflicting_auc) << ',' << detail::opt_str(mb.balanced_auc) << ','
     << detail::opt_str(mb.overall_auc) << ',' << detail::opt_str(mb.cell_11.accuracy) << ','
     << detail::opt_str(mb.cell_00.accuracy) << ',' << detail::opt_str(mb.cell_01.accuracy)
     << ',' << detail::opt_str(mb.cell_10.accuracy) << ','
     << detail::opt_str(mb.aligned_accuracy()) << ','
     << detail::opt_str(mb.conflicting_accuracy()) << ','
     << detail::opt_str(mb.overall_accuracy());
  return os.str();
}

inline void write_epoch_csv(const RunRecord& record, std::ostream& os) {
  os << "epoch,agree_loss,disagree_loss,biased_loss,val_aligned_auc,val_conflicting_auc,"
        "val_balanced_auc,val_overall_auc\n";
  for (const EpochStats& e : record.epochs) {
    os << e.epoch << ',' << detail::format_real(e.agree_loss) << ','
       << detail::format_real(e.disagree_loss) << ',' << detail::format_real(e.biased_loss)
       << ',' << detail::opt_str(e.validation.aligned_auc) << ','
       << detail::opt_str(e.validation.conflicting_auc) << ','
       << detail::opt_str(e.validation.balanced_auc) << ','
       << detail::opt_str(e.validation.overall_auc) << "\n";
  }
}

inline void write_summary(const RunRecord& record, const std::string& run_name,
                          std::ostream& os) {
  os << "run: " << run_name << "\n";
  os << "method: " << record.method << "\n";
  os << "seed: " << record.seed << "\n";
  os << "epochs_completed: " << record.epochs.size() << "\n";
  os << "best_epoch: " << record.best_epoch << "\n";
  os << "diverged: " << (record.diverged ? "true" : "false") << "\n";
  if (!record.diagnostic.empty()) os << "diagnostic: " << record.diagnostic << "\n";
  if (!record.epochs.empty() && record.best_epoch > 0) {
    const MetricBlock& v = record.epochs[record.best_epoch - 1].validation;
    os << "val.aligned_auc: " << detail::opt_str(v.aligned_auc) << "\n";
    os << "val.conflicting_auc: " << detail::opt_str(v.conflicting_auc) << "\n";
    os << "val.balanced_auc: " << detail::opt_str(v.balanced_auc) << "\n";
    os << "val.overall_auc: " << detail::opt_str(v.overall_auc) << "\n";
  }
  if (record.test_metrics) {
    const MetricBlock& m = *record.test_metrics;
    os << "test.aligned_auc: " << detail::opt_str(m.aligned_auc) << "\n";
    os << "test.conflicting_auc: " << detail::opt_str(m.conflicting_auc) << "\n";
    os << "test.balanced_auc: " << detail::opt_str(m.balanced_auc) << "\n";
    os << "test.overall_auc: " << detail::opt_str(m.overall_auc) << "\n";
    os << "test.aligned_acc: " << detail::opt_str(m.aligned_accuracy()) << "\n";
    os << "test.conflicting_acc: " << detail::opt_str(m.conflicting_accuracy()) << "\n";
  }
  if (!record.config_snapshot.empty()) {
    os << "config:\n";
    std::stringstream ss(record.config_snapshot);
    std::string line;
    while (std::getline(ss, line)) os << "  " << line << "\n";
  }
}

struct TrainOutcome {
  int exit_code = 0;
  std::filesystem::path run_dir;
  TrainResult result;
};

// Resolves the dataset splits for a config: generated from the SynthSpec,
// or loaded from data.dir when set.
inline DatasetSplits resolve_splits(const ExperimentConfig& cfg) {
  if (!cfg.data_dir.empty()) {
    std::filesystem::path dir = cfg.data_dir;
    DatasetSplits splits;
    splits.train = load_dataset(dir / "train.csv");
    splits.val = load_dataset(dir / "val.csv");
    splits.test = load_dataset(dir / "test.csv");
    return splits;
  }
  return generate(cfg.data);
}

inline std::filesystem::path ensure_run_dir(const ExperimentConfig& cfg) {
  std::filesystem::path dir = cfg.out_root / cfg.run_name;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string());
  return dir;
}

inline std::filesystem::path run_generate(const ExperimentConfig& cfg) {
  DatasetSplits splits = generate(cfg.data);
  std::filesystem::path dir = ensure_run_dir(cfg);
  save_dataset(splits.train, dir / "train.csv");
  save_dataset(splits.val, dir / "val.csv");
  save_dataset(splits.test, dir / "test.csv");
  std::ofstream(dir / "config.cfg") << cfg.snapshot();
  return dir;
}

inline TrainOutcome run_train(const ExperimentConfig& cfg, bool write_outputs = true) {
  DatasetSplits splits = resolve_splits(cfg);

  TrainOutcome out;
  if (cfg.trainer.method == TrainMethod::ada_abc) {
    out.result = train_ada_abc(splits.train, splits.val, cfg.trainer);
  } else {
    out.result = train_baseline(splits.train, splits.val, cfg.trainer);
  }
  out.result.record.config_snapshot = cfg.snapshot();

  if (!out.result.record.diverged) {
    out.result.record.test_metrics = evaluate_groups(out.result.model, splits.test);
  } else {
    out.exit_code = 3;
  }

  if (write_outputs) {
    std::filesystem::path dir = ensure_run_dir(cfg);
    out.run_dir = dir;
    std::ofstream(dir / "config.cfg") << cfg.snapshot();
    {
      std::ofstream os(dir / "summary.txt");
      write_summary(out.result.record, cfg.run_name, os);
    }
    {
      std::ofstream os(dir / "epochs.csv");
      write_epoch_csv(out.result.record, os);
    }
    save_model(out.result.model, dir / "model.ckpt");
    if (out.result.council) save_council(*out.result.council, dir / "council.ckpt");
    if (out.result.reference) save_model(*out.result.reference, dir / "reference.ckpt");
    {
      std::ofstream os(dir / "metrics.csv");
      os << metric_csv_header() << "\n";
      const RunRecord& rec = out.result.record;
      if (!rec.epochs.empty() && rec.best_epoch > 0) {
        os << metric_csv_row(cfg.run_name, rec.seed, rec.method, cfg.trainer.lambda,
                             cfg.trainer.council.n_heads, "val",
                             rec.epochs[rec.best_epoch - 1].validation)
           << "\n";
      }
      if (rec.test_metrics) {
        os << metric_csv_row(cfg.run_name, rec.seed, rec.method, cfg.trainer.lambda,
                             cfg.trainer.council.n_heads, "test", *rec.test_metrics)
           << "\n";
      }
    }
  }
  return out;
}

// One sweep over lambda or the head count: one child run per (value, seed),
// then one aggregate row per value with mean and stdev columns filled.
inline std::filesystem::path run_sweep(const ExperimentConfig& base, const std::string& axis,
                                       const std::vector<double>& values,
                                       const std::vector<std::uint64_t>& seeds) {
  if (axis != "lambda" && axis != "heads") {
    throw ConfigError("sweep axis must be lambda or heads");
  }
  if (values.empty()) throw ConfigError("sweep: empty value list");
  if (seeds.empty()) throw ConfigError("sweep: empty seed list");

  std::filesystem::path dir = ensure_run_dir(base);
  std::ofstream os(dir / "sweep.csv");
  os << "axis,value,seed,status,aligned_auc,conflicting_auc,balanced_auc,overall_auc,"
        "aligned_acc,conflicting_acc,balanced_auc_stdev,conflicting_acc_stdev\n";

  struct Agg {
    std::vector<double> balanced, aligned, conflicting, overall, aligned_acc, conflicting_acc;
  };

  for (double value : values) {
    Agg agg;
    for (std::uint64_t seed : seeds) {
      ExperimentConfig child = base;
      std::ostringstream name;
      name << base.run_name << "/" << axis << "_" << detail::format_real(value) << "_seed"
           << seed;
      child.run_name = name.str();
      child.apply("run.seed", std::to_string(seed));
      if (axis == "lambda") {
        child.trainer.lambda = value;
      } else {
        child.trainer.council.n_heads = static_cast<std::size_t>(value);
      }

      std::string status = "ok";
      MetricBlock mb;
      try {
        TrainOutcome outcome = run_train(child);
        if (outcome.exit_code != 0 || !outcome.result.record.test_metrics) {
          status = "diverged";
        } else {
          mb = *outcome.result.record.test_metrics;
        }
      } catch (const std::exception& e) {
        status = std::string("error: ") + e.what();
      }

      os << axis << ',' << detail::format_real(value) << ',' << seed << ',' << status << ',';
      if (status == "ok") {
        os << detail::opt_str(mb.aligned_auc) << ',' << detail::opt_str(mb.conflicting_auc)
           << ',' << detail::opt_str(mb.balanced_auc) << ',' << detail::opt_str(mb.overall_auc)
           << ',' << detail::opt_str(mb.aligned_accuracy()) << ','
           << detail::opt_str(mb.conflicting_accuracy());
        auto push = [](std::vector<double>& v, const std::optional<double>& x) {
          if (x) v.push_back(*x);
        };
        push(agg.aligned, mb.aligned_auc);
        push(agg.conflicting, mb.conflicting_auc);
        push(agg.balanced, mb.balanced_auc);
        push(agg.overall, mb.overall_auc);
        push(agg.aligned_acc, mb.aligned_accuracy());
        push(agg.conflicting_acc, mb.conflicting_accuracy());
      } else {
        os << ",,,,,";
      }
      os << ",,\n";
    }

    auto mean = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) s += x;
      return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    };
    auto stdev = [&](const std::vector<double>& v) {
      if (v.size() < 2) return 0.0;
      double m = mean(v);
      double s = 0.0;
      for (double x : v) s += (x - m) * (x - m);
      return std::sqrt(s / static_cast<double>(v.size() - 1));
    };
    os << axis << ',' << detail::format_real(value) << ",aggregate,ok,"
       << detail::format_real(mean(agg.aligned)) << ','
       << detail::format_real(mean(agg.conflicting)) << ','
       << detail::format_real(mean(agg.balanced)) << ','
       << detail::format_real(mean(agg.overall)) << ','
       << detail::format_real(mean(agg.aligned_acc)) << ','
       << detail::format_real(mean(agg.conflicting_acc)) << ','
       << detail::format_real(stdev(agg.balanced)) << ','
       << detail::format_real(stdev(agg.conflicting_acc)) << "\n";
  }
  return dir / "sweep.csv";
}

// Theorem-lab driver: prints the per-cell minimizer for each corruption
// level and exports the long-format table.
inline void run_theorem(const CellDistribution& pi, double lambda, double epsilon,
                        const std::vector<double>& corruption_levels, double grid_step,
                        std::ostream& console,
                        const std::optional<std::filesystem::path>& csv_path) {
  std::vector<SweepRow> rows = sweep_bias_quality(pi, lambda, epsilon, corruption_levels,
                                                  grid_step);
  console << "cells: (t,b) = (1,1) (0,0) (0,1) (1,0)\n";
  for (const SweepRow& row : rows) {
    console << "corruption " << detail::format_real(row.corruption) << ": minimizer =";
    for (double v : row.minimizer.p) console << ' ' << detail::format_real(v);
    console << "\n";
  }
  if (csv_path) {
    std::ofstream os(*csv_path);
    if (!os) throw ConfigError("cannot open for writing: " + csv_path->string());
    os << "corruption,cell_t,cell_b,biased_posterior,minimizer,objective\n";
    for (const SweepRow& row : rows) {
      for (std::size_t c = 0; c < 4; ++c) {
        os << detail::format_real(row.corruption) << ',' << kCellOrder[c][0] << ','
           << kCellOrder[c][1] << ',' << detail::format_real(row.biased.p[c]) << ','
           << detail::format_real(row.minimizer.p[c]) << ','
           << detail::format_real(row.objective[c]) << "\n";
      }
    }
  }
}

// Decision-boundary export in long format: x,y,probability per row.
inline void run_boundary(const Mlp& model, const std::array<double, 4>& bounds,
                         std::size_t resolution, const std::filesystem::path& out_path) {
  DecisionGrid grid = export_decision_grid(model, bounds, resolution);
  std::ofstream os(out_path);
  if (!os) throw ConfigError("cannot open for writing: " + out_path.string());
  os << "x,y,prob\n";
  auto coord = [&](double lo, double hi, std::size_t i) {
    if (resolution == 1) return 0.5 * (lo + hi);
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(resolution - 1);
  };
  for (std::size_t r = 0; r < resolution; ++r) {
    for (std::size_t c = 0; c < resolution; ++c) {
      os << detail::format_real(coord(bounds[0], bounds[1], c)) << ','
         << detail::format_real(coord(bounds[2], bounds[3], r)) << ','
         << detail::format_real(grid.values(r, c)) << "\n";
    }
  }
}

}  // namespace adaabc
