#pragma once

#include <cmath>

#include "adaabc/common.hpp"

namespace adaabc {

// Predictions for one sample, both expressed as the probability assigned to
// the sample's TRUE label. The biased side carries a stop-gradient contract:
// no loss in this module ever produces a gradient with respect to it.
struct PredPair {
  double biased = 0.0;  // bias-council probability of the true label
  double debias = 0.0;  // debiasing-model probability of the true label
};

struct GceConfig {
  double q = 0.7;  // in (0, 1]; q=1 is mean absolute error, q->0 recovers CE
};

// Scalar loss with its analytic input gradients. grad is the derivative with
// respect to the (debiasing-side) probability argument; grad_biased is kept
// explicit and is identically zero under the stop-gradient contract.
struct LossValue {
  double value = 0.0;
  double grad = 0.0;
  double grad_biased = 0.0;
};

namespace detail {

inline void check_prob(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw DomainError(std::string(what) + ": probability outside [0,1]");
  }
}

inline void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
}

}  // namespace detail

// Cross entropy of the true-label probability: -log p.
inline LossValue ce_loss(double prob_true_label) {
  detail::check_prob(prob_true_label, "ce_loss");
  double p = clamp_prob(prob_true_label);
  return {-std::log(p), -1.0 / p, 0.0};
}

// Generalized cross entropy (1 - p^q)/q. Interpolates between cross entropy
// (q -> 0) and mean absolute error (q = 1); its gradient down-weights
// low-confidence samples by the factor p^q.
inline LossValue gce_loss(double prob_true_label, const GceConfig& cfg = {}) {
  if (!(cfg.q > 0.0 && cfg.q <= 1.0)) throw ConfigError("gce q must be in (0,1]");
  detail::check_prob(prob_true_label, "gce_loss");
  double p = clamp_prob(prob_true_label);
  return {(1.0 - std::pow(p, cfg.q)) / cfg.q, -std::pow(p, cfg.q - 1.0), 0.0};
}

// The confidence weight p^q relating the GCE and CE gradients:
// d/dp gce = p^q * d/dp ce, exactly.
inline double gce_gradient_weight(double prob_true_label, const GceConfig& cfg = {}) {
  if (!(cfg.q > 0.0 && cfg.q <= 1.0)) throw ConfigError("gce q must be in (0,1]");
  detail::check_prob(prob_true_label, "gce_gradient_weight");
  return std::pow(clamp_prob(prob_true_label), cfg.q);
}

// Opposite-prediction loss -log(c~(1-c) + c(1-c~) + eps): minimal when the
// two predictions disagree maximally. The log argument is capped at 1 so the
// loss never goes below zero for eps <= 1. Gradient taken with respect to
// the debiasing side only.
inline LossValue opp_loss(const PredPair& pair, double epsilon) {
  detail::check_epsilon(epsilon);
  detail::check_prob(pair.biased, "opp_loss");
  detail::check_prob(pair.debias, "opp_loss");
  double c = pair.biased;
  double ct = pair.debias;
  double arg = ct * (1.0 - c) + c * (1.0 - ct) + epsilon;
  if (arg >= 1.0) {
    return {0.0, 0.0, 0.0};
  }
  return {-std::log(arg), -(1.0 - 2.0 * c) / arg, 0.0};
}

struct AdaptiveLoss {
  LossValue total;
  double agree_part = 0.0;     // c * ce(c~)
  double disagree_part = 0.0;  // (1-c) * opp(c, c~)
};

// Adaptive agreement objective: the biased side's confidence in the true
// label gates agreement (cross entropy) against disagreement (opposite
// loss), total = agree + lambda * disagree. All gradients flow to the
// debiasing side only.
inline AdaptiveLoss adaptive_agreement_loss(const PredPair& pair, double lambda,
                                            double epsilon) {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  detail::check_prob(pair.biased, "adaptive_agreement_loss");
  detail::check_prob(pair.debias, "adaptive_agreement_loss");
  double c = pair.biased;
  LossValue ce = ce_loss(pair.debias);
  LossValue opp = opp_loss(pair, epsilon);

  AdaptiveLoss out;
  out.agree_part = c * ce.value;
  out.disagree_part = (1.0 - c) * opp.value;
  out.total.value = out.agree_part + lambda * out.disagree_part;
  out.total.grad = c * ce.grad + lambda * (1.0 - c) * opp.grad;
  out.total.grad_biased = 0.0;
  return out;
}

}  // namespace adaabc
