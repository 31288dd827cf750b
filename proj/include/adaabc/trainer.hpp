#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "adaabc/council.hpp"
#include "adaabc/losses.hpp"
#include "adaabc/metrics.hpp"
#include "adaabc/nn.hpp"
#include "adaabc/optimizer.hpp"
#include "adaabc/synthdata.hpp"

namespace adaabc {

enum class TrainMethod { ada_abc, erm, agree_only, disagree_only };

inline const char* method_name(TrainMethod m) {
  switch (m) {
    case TrainMethod::ada_abc: return "ada_abc";
    case TrainMethod::erm: return "erm";
    case TrainMethod::agree_only: return "agree_only";
    case TrainMethod::disagree_only: return "disagree_only";
  }
  return "?";
}

inline TrainMethod parse_method(const std::string& s) {
  if (s == "ada_abc") return TrainMethod::ada_abc;
  if (s == "erm") return TrainMethod::erm;
  if (s == "agree_only") return TrainMethod::agree_only;
  if (s == "disagree_only") return TrainMethod::disagree_only;
  throw ConfigError("unknown method: " + s);
}

struct TrainerConfig {
  TrainMethod method = TrainMethod::ada_abc;
  double lambda = 1.0;
  double epsilon = 1e-8;
  GceConfig gce;
  CouncilConfig council;
  double learning_rate = 1e-4;
  std::size_t batch_size = 128;
  std::size_t max_epochs = 40;
  std::size_t patience = 10;  // epochs without a validation overall-AUC gain
  std::uint64_t seed = 0;
  std::vector<std::size_t> hidden;  // empty: derived from the input dimension

  void validate() const {
    if (!(lambda >= 0.0)) throw ConfigError("trainer: lambda must be >= 0");
    if (!(epsilon > 0.0)) throw ConfigError("trainer: epsilon must be > 0");
    if (!(learning_rate > 0.0)) throw ConfigError("trainer: learning rate must be > 0");
    if (batch_size == 0) throw ConfigError("trainer: batch size must be >= 1");
    if (max_epochs == 0) throw ConfigError("trainer: epoch budget must be >= 1");
    if (!(gce.q > 0.0 && gce.q <= 1.0)) throw ConfigError("trainer: gce q must be in (0,1]");
  }

  // 2D toy inputs get a small net, wider synthetics a deeper trunk.
  std::vector<std::size_t> arch_for(std::size_t input_dim) const {
    std::vector<std::size_t> dims;
    dims.push_back(input_dim);
    if (hidden.empty()) {
      if (input_dim <= 2) {
        dims.insert(dims.end(), {16, 16});
      } else {
        dims.insert(dims.end(), {64, 32});
      }
    } else {
      dims.insert(dims.end(), hidden.begin(), hidden.end());
    }
    dims.push_back(1);
    return dims;
  }
};

struct EpochStats {
  std::size_t epoch = 0;       // 1-based
  double agree_loss = 0.0;     // mean c * ce(c~) over the epoch
  double disagree_loss = 0.0;  // mean (1-c) * opp over the epoch
  double biased_loss = 0.0;    // council GCE (or reference/ERM CE)
  MetricBlock validation;
};

struct RunRecord {
  std::string method;
  std::uint64_t seed = 0;
  std::string config_snapshot;  // reproduces the run when replayed
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;  // 1-based; 0 when no finite epoch completed
  std::optional<MetricBlock> test_metrics;
  bool diverged = false;
  std::string diagnostic;
};

// Instrumentation hook: fires inside every training batch so callers can
// inspect intermediate state (e.g. assert the council is untouched by the
// debias update).
struct BatchEvent {
  enum class Phase { after_predict, after_debias_update, after_council_update };
  Phase phase;
  std::size_t epoch = 0;
  std::size_t batch = 0;
  const BiasCouncil* council = nullptr;  // null for baseline methods
  const Mlp* model = nullptr;            // the model being debiased / trained
  const Mlp* reference = nullptr;        // ERM reference for baselines
};
using BatchObserver = std::function<void(const BatchEvent&)>;

struct TrainResult {
  Mlp model;                          // best-validation snapshot
  std::optional<BiasCouncil> council;  // ada_abc only
  std::optional<Mlp> reference;        // erm / agree_only / disagree_only
  RunRecord record;
};

namespace detail {

inline void check_validation_classes(const Dataset& val) {
  bool pos = false, neg = false;
  for (std::uint8_t y : val.y) (y ? pos : neg) = true;
  if (!pos || !neg) throw ConfigError("validation split must contain both classes");
}

inline std::vector<std::vector<std::size_t>> make_batches(std::vector<std::size_t>& order,
                                                          Rng& rng, std::size_t batch_size) {
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    std::size_t end = std::min(start + batch_size, order.size());
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

// Accumulates weighted epoch means over batches of uneven size.
struct MeanTracker {
  double sum = 0.0;
  double weight = 0.0;
  void add(double mean_value, double n) {
    sum += mean_value * n;
    weight += n;
  }
  double mean() const { return weight > 0.0 ? sum / weight : 0.0; }
};

inline bool better_auc(const std::optional<double>& candidate,
                       const std::optional<double>& incumbent) {
  if (!candidate) return false;
  if (!incumbent) return true;
  return *candidate > *incumbent;  // ties keep the earlier epoch
}

}  // namespace detail

// Simultaneous training of the bias council (GCE) and the debiasing model
// (adaptive agreement). Per batch, strictly in order: council prediction is
// taken from the pre-update council, the debias model steps on the
// agree/disagree objective, and only then does the council take its GCE
// step. The best model by validation overall AUC is returned.
inline TrainResult train_ada_abc(const Dataset& train, const Dataset& val,
                                 const TrainerConfig& cfg,
                                 const BatchObserver* observer = nullptr) {
  cfg.validate();
  if (train.size() == 0) throw ConfigError("training split is empty");
  detail::check_validation_classes(val);

  std::vector<std::size_t> arch = cfg.arch_for(train.dim);
  std::vector<std::size_t> trunk_dims(arch.begin(), arch.end() - 1);

  TrainResult result;
  result.record.method = method_name(TrainMethod::ada_abc);
  result.record.seed = cfg.seed;

  Mlp debias = Mlp::classifier(arch, mix_seed(cfg.seed, seed_stream::kDebiasNet));
  CouncilConfig council_cfg = cfg.council;
  council_cfg.gce = cfg.gce;
  BiasCouncil council = build_council(council_cfg, trunk_dims, train.size(),
                                      mix_seed(cfg.seed, seed_stream::kBiasedNet));

  OptimizerState debias_opt = OptimizerState::adam(cfg.learning_rate);
  CouncilOptimizers council_opt =
      make_council_optimizers(council, OptimizerState::adam(cfg.learning_rate));

  Rng shuffle_rng(mix_seed(cfg.seed, seed_stream::kShuffle));
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  Mlp best_model = debias;
  std::optional<BiasCouncil> best_council;
  std::optional<double> best_auc;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    auto batches = detail::make_batches(order, shuffle_rng, cfg.batch_size);
    detail::MeanTracker agree, disagree, biased;

    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto& idx = batches[bi];
      Matrix x = train.gather(idx);
      std::vector<std::uint8_t> labels(idx.size());
      for (std::size_t s = 0; s < idx.size(); ++s) labels[s] = train.y[idx[s]];

      std::vector<double> p = council_predict(council, x);
      if (observer) {
        BatchEvent ev{BatchEvent::Phase::after_predict, epoch, bi, &council, &debias, nullptr};
        (*observer)(ev);
      }

      // NaN model outputs surface as DomainError from the losses and
      // non-finite gradients as NumericError: both mean the run diverged.
      try {
        const Matrix& out = debias.forward(x);
        Matrix upstream(idx.size(), 1);
        double inv_n = 1.0 / static_cast<double>(idx.size());
        double batch_agr = 0.0, batch_dis = 0.0;
        for (std::size_t s = 0; s < idx.size(); ++s) {
          double sign = labels[s] ? 1.0 : -1.0;
          PredPair pair;
          pair.biased = labels[s] ? p[s] : 1.0 - p[s];
          pair.debias = labels[s] ? out(s, 0) : 1.0 - out(s, 0);
          AdaptiveLoss ad = adaptive_agreement_loss(pair, cfg.lambda, cfg.epsilon);
          batch_agr += ad.agree_part * inv_n;
          batch_dis += ad.disagree_part * inv_n;
          upstream(s, 0) = ad.total.grad * sign * inv_n;
        }
        if (!std::isfinite(batch_agr + cfg.lambda * batch_dis)) {
          throw NumericError("non-finite adaptive loss");
        }

        optimizer_step(debias, debias.backward(upstream).grads, debias_opt);
        if (observer) {
          BatchEvent ev{BatchEvent::Phase::after_debias_update, epoch, bi, &council, &debias,
                        nullptr};
          (*observer)(ev);
        }
        CouncilStepResult cs = council_gce_step(council, x, idx, labels, council_opt);
        biased.add(cs.mean_gce_loss, static_cast<double>(idx.size()));
        agree.add(batch_agr, static_cast<double>(idx.size()));
        disagree.add(batch_dis, static_cast<double>(idx.size()));
      } catch (const NumericError& e) {
        result.record.diverged = true;
        result.record.diagnostic = std::string(e.what()) + " at epoch " +
                                   std::to_string(epoch) + " batch " + std::to_string(bi);
        result.model = std::move(best_model);
        result.council = best_council ? std::move(best_council) : std::make_optional(council);
        return result;
      } catch (const DomainError& e) {
        result.record.diverged = true;
        result.record.diagnostic = std::string(e.what()) + " at epoch " +
                                   std::to_string(epoch) + " batch " + std::to_string(bi);
        result.model = std::move(best_model);
        result.council = best_council ? std::move(best_council) : std::make_optional(council);
        return result;
      }
      if (observer) {
        BatchEvent ev{BatchEvent::Phase::after_council_update, epoch, bi, &council, &debias,
                      nullptr};
        (*observer)(ev);
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.agree_loss = agree.mean();
    stats.disagree_loss = disagree.mean();
    stats.biased_loss = biased.mean();
    stats.validation = evaluate_groups(debias, val);
    result.record.epochs.push_back(stats);

    if (detail::better_auc(stats.validation.overall_auc, best_auc)) {
      best_auc = stats.validation.overall_auc;
      best_model = debias;
      best_council = council;
      result.record.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best > cfg.patience) {
      break;
    }
  }

  result.model = best_auc ? std::move(best_model) : std::move(debias);
  result.council = best_council ? std::move(best_council) : std::make_optional(council);
  return result;
}

// Baselines sharing the ada_abc loop skeleton. erm trains a single model
// with plain cross entropy. agree_only / disagree_only co-train a second
// model against an ERM reference: the reference predicts, the second model
// steps on ce (agree) or opp (disagree), then the reference takes its own
// CE step -- so the reference trajectory is exactly the erm trajectory.
inline TrainResult train_baseline(const Dataset& train, const Dataset& val,
                                  const TrainerConfig& cfg,
                                  const BatchObserver* observer = nullptr) {
  cfg.validate();
  if (cfg.method == TrainMethod::ada_abc) {
    throw ConfigError("train_baseline: use train_ada_abc for method ada_abc");
  }
  if (train.size() == 0) throw ConfigError("training split is empty");
  detail::check_validation_classes(val);

  std::vector<std::size_t> arch = cfg.arch_for(train.dim);
  bool co_trained = cfg.method != TrainMethod::erm;

  TrainResult result;
  result.record.method = method_name(cfg.method);
  result.record.seed = cfg.seed;

  Mlp reference = Mlp::classifier(arch, mix_seed(cfg.seed, seed_stream::kBiasedNet));
  Mlp second;
  if (co_trained) {
    second = Mlp::classifier(arch, mix_seed(cfg.seed, seed_stream::kDebiasNet));
  }
  Mlp& tracked = co_trained ? second : reference;

  OptimizerState ref_opt = OptimizerState::adam(cfg.learning_rate);
  OptimizerState second_opt = OptimizerState::adam(cfg.learning_rate);

  Rng shuffle_rng(mix_seed(cfg.seed, seed_stream::kShuffle));
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  // Validation-AUC selection would pick the least-trained checkpoint of a
  // model whose goal is to be anti-correct, so the disagree-only ablation
  // keeps its final state instead.
  const bool keep_final = cfg.method == TrainMethod::disagree_only;

  Mlp best_model = tracked;
  std::optional<double> best_auc;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    auto batches = detail::make_batches(order, shuffle_rng, cfg.batch_size);
    detail::MeanTracker second_loss, ref_loss;

    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto& idx = batches[bi];
      Matrix x = train.gather(idx);
      std::vector<std::uint8_t> labels(idx.size());
      for (std::size_t s = 0; s < idx.size(); ++s) labels[s] = train.y[idx[s]];
      double inv_n = 1.0 / static_cast<double>(idx.size());

      try {
        std::vector<double> p;
        if (co_trained) {
          p = reference.eval_probs(x);  // detached reference prediction
          if (observer) {
            BatchEvent ev{BatchEvent::Phase::after_predict, epoch, bi, nullptr, &second,
                          &reference};
            (*observer)(ev);
          }

          const Matrix& out = second.forward(x);
          Matrix upstream(idx.size(), 1);
          double batch_loss = 0.0;
          for (std::size_t s = 0; s < idx.size(); ++s) {
            double sign = labels[s] ? 1.0 : -1.0;
            double prob_true = labels[s] ? out(s, 0) : 1.0 - out(s, 0);
            LossValue lv;
            if (cfg.method == TrainMethod::agree_only) {
              lv = ce_loss(prob_true);
            } else {
              PredPair pair;
              pair.biased = labels[s] ? p[s] : 1.0 - p[s];
              pair.debias = prob_true;
              lv = opp_loss(pair, cfg.epsilon);
            }
            batch_loss += lv.value * inv_n;
            upstream(s, 0) = lv.grad * sign * inv_n;
          }
          if (!std::isfinite(batch_loss)) throw NumericError("non-finite loss");
          optimizer_step(second, second.backward(upstream).grads, second_opt);
          second_loss.add(batch_loss, static_cast<double>(idx.size()));
          if (observer) {
            BatchEvent ev{BatchEvent::Phase::after_debias_update, epoch, bi, nullptr, &second,
                          &reference};
            (*observer)(ev);
          }
        }

        // Reference / ERM cross-entropy step.
        const Matrix& out = reference.forward(x);
        Matrix upstream(idx.size(), 1);
        double batch_loss = 0.0;
        for (std::size_t s = 0; s < idx.size(); ++s) {
          double sign = labels[s] ? 1.0 : -1.0;
          LossValue lv = ce_loss(labels[s] ? out(s, 0) : 1.0 - out(s, 0));
          batch_loss += lv.value * inv_n;
          upstream(s, 0) = lv.grad * sign * inv_n;
        }
        if (!std::isfinite(batch_loss)) throw NumericError("non-finite reference loss");
        optimizer_step(reference, reference.backward(upstream).grads, ref_opt);
        ref_loss.add(batch_loss, static_cast<double>(idx.size()));
      } catch (const NumericError& e) {
        result.record.diverged = true;
        result.record.diagnostic = std::string(e.what()) + " at epoch " +
                                   std::to_string(epoch) + " batch " + std::to_string(bi);
        result.model = std::move(best_model);
        result.reference = std::move(reference);
        return result;
      } catch (const DomainError& e) {
        result.record.diverged = true;
        result.record.diagnostic = std::string(e.what()) + " at epoch " +
                                   std::to_string(epoch) + " batch " + std::to_string(bi);
        result.model = std::move(best_model);
        result.reference = std::move(reference);
        return result;
      }
      if (observer) {
        BatchEvent ev{BatchEvent::Phase::after_council_update, epoch, bi, nullptr, &tracked,
                      &reference};
        (*observer)(ev);
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.agree_loss = cfg.method == TrainMethod::agree_only ? second_loss.mean() : 0.0;
    stats.disagree_loss = cfg.method == TrainMethod::disagree_only ? second_loss.mean() : 0.0;
    stats.biased_loss = ref_loss.mean();
    stats.validation = evaluate_groups(tracked, val);
    result.record.epochs.push_back(stats);

    if (keep_final) {
      best_model = tracked;
      result.record.best_epoch = epoch;
    } else if (detail::better_auc(stats.validation.overall_auc, best_auc)) {
      best_auc = stats.validation.overall_auc;
      best_model = tracked;
      result.record.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best > cfg.patience) {
      break;
    }
  }

  result.model = (best_auc || keep_final) ? std::move(best_model) : std::move(tracked);
  result.reference = std::move(reference);
  return result;
}

// Probability surface over a rectangle, for 2-input models only. values is
// resolution x resolution, row r = y index, column c = x index; a resolution
// of 1 samples the cell midpoint.
struct DecisionGrid {
  std::array<double, 4> bounds{};  // xmin, xmax, ymin, ymax
  std::size_t resolution = 0;
  Matrix values;
};

inline DecisionGrid export_decision_grid(const Mlp& model, const std::array<double, 4>& bounds,
                                         std::size_t resolution) {
  if (model.input_dim() != 2) {
    throw ConfigError("export_decision_grid: model must take exactly 2 inputs");
  }
  if (resolution == 0) throw ConfigError("export_decision_grid: resolution must be >= 1");
  auto coord = [&](double lo, double hi, std::size_t i) {
    if (resolution == 1) return 0.5 * (lo + hi);
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(resolution - 1);
  };
  Matrix points(resolution * resolution, 2);
  for (std::size_t r = 0; r < resolution; ++r) {
    for (std::size_t c = 0; c < resolution; ++c) {
      points(r * resolution + c, 0) = coord(bounds[0], bounds[1], c);
      points(r * resolution + c, 1) = coord(bounds[2], bounds[3], r);
    }
  }
  std::vector<double> probs = model.eval_probs(points);
  DecisionGrid grid;
  grid.bounds = bounds;
  grid.resolution = resolution;
  grid.values = Matrix(resolution, resolution);
  for (std::size_t r = 0; r < resolution; ++r) {
    for (std::size_t c = 0; c < resolution; ++c) {
      grid.values(r, c) = probs[r * resolution + c];
    }
  }
  return grid;
}

}  // namespace adaabc
