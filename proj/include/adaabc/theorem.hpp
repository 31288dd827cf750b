#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "adaabc/common.hpp"
#include "adaabc/losses.hpp"

namespace adaabc {

// Cell order everywhere in this module: (t,b) = (1,1), (0,0), (0,1), (1,0).
constexpr std::array<std::array<int, 2>, 4> kCellOrder = {{{1, 1}, {0, 0}, {0, 1}, {1, 0}}};

// Joint probability mass over the four (t,b) cells.
struct CellDistribution {
  std::array<double, 4> pi{0.25, 0.25, 0.25, 0.25};

  static CellDistribution uniform() { return {}; }

  void validate() const {
    double sum = 0.0;
    for (double v : pi) {
      if (!(v >= 0.0)) throw DomainError("cell distribution: negative mass");
      sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-12) {
      throw DomainError("cell distribution: mass must sum to 1");
    }
  }
};

// Conditional table P(Y=1 | T=t, B=b), one entry per cell.
struct PosteriorTable {
  std::array<double, 4> p{};

  // The maximally biased posterior: probability equal to the bias attribute.
  static PosteriorTable bias_indicator() {
    PosteriorTable t;
    for (std::size_t c = 0; c < 4; ++c) t.p[c] = static_cast<double>(kCellOrder[c][1]);
    return t;
  }
  // The target posterior the debiasing objective should recover.
  static PosteriorTable target_indicator() {
    PosteriorTable t;
    for (std::size_t c = 0; c < 4; ++c) t.p[c] = static_cast<double>(kCellOrder[c][0]);
    return t;
  }

  void validate() const {
    for (double v : p) {
      if (!(v >= 0.0 && v <= 1.0)) throw DomainError("posterior table: entry outside [0,1]");
    }
  }
};

// Candidate probabilities are clamped away from {0,1} during evaluation so
// the log terms stay finite; minimizers that land inside the clamp band are
// reported as exact 0 or 1.
constexpr double kPosteriorClamp = 1e-6;

namespace detail {

// Adaptive-agreement loss of one cell for candidate value v = P~(Y=1|t,b).
// The label in a cell is its target attribute, so both predictions are
// converted to true-label probabilities before applying the loss.
inline double cell_ad_loss(int t, double biased_p1, double v, double lambda, double epsilon) {
  double c = t ? biased_p1 : 1.0 - biased_p1;
  double vc = std::clamp(v, kPosteriorClamp, 1.0 - kPosteriorClamp);
  double ct = t ? vc : 1.0 - vc;
  return adaptive_agreement_loss({c, ct}, lambda, epsilon).total.value;
}

}  // namespace detail

// Exact expectation of the adaptive agreement loss over the four cells; no
// sampling involved.
inline double expected_ad_loss(const CellDistribution& pi, const PosteriorTable& biased,
                               const PosteriorTable& candidate, double lambda,
                               double epsilon) {
  pi.validate();
  biased.validate();
  candidate.validate();
  if (!(lambda >= 0.0)) throw DomainError("expected_ad_loss: lambda must be >= 0");
  double loss = 0.0;
  for (std::size_t c = 0; c < 4; ++c) {
    if (pi.pi[c] == 0.0) continue;
    loss += pi.pi[c] *
            detail::cell_ad_loss(kCellOrder[c][0], biased.p[c], candidate.p[c], lambda, epsilon);
  }
  return loss;
}

// Minimizes the expected loss per cell (the objective is separable across
// cells): a full grid pass at grid_step, then three rounds of trisection
// around the best point. Returns the best evaluated candidate per cell.
inline PosteriorTable minimize_posterior(const CellDistribution& pi,
                                         const PosteriorTable& biased, double lambda,
                                         double epsilon, double grid_step = 1e-3) {
  pi.validate();
  biased.validate();
  if (!(grid_step > 0.0 && grid_step <= 0.5)) {
    throw DomainError("minimize_posterior: grid_step must be in (0, 0.5]");
  }

  PosteriorTable out;
  for (std::size_t c = 0; c < 4; ++c) {
    int t = kCellOrder[c][0];
    auto objective = [&](double v) {
      return detail::cell_ad_loss(t, biased.p[c], v, lambda, epsilon);
    };

    double best_v = 0.0;
    double best_f = objective(0.0);
    std::size_t steps = static_cast<std::size_t>(std::ceil(1.0 / grid_step));
    for (std::size_t k = 1; k <= steps; ++k) {
      double v = std::min(1.0, static_cast<double>(k) * grid_step);
      double f = objective(v);
      if (f < best_f) {
        best_f = f;
        best_v = v;
      }
    }

    double lo = std::max(0.0, best_v - grid_step);
    double hi = std::min(1.0, best_v + grid_step);
    for (int round = 0; round < 3; ++round) {
      double third = (hi - lo) / 3.0;
      double a = lo + third, b = hi - third;
      double fa = objective(a), fb = objective(b);
      if (fa < best_f) {
        best_f = fa;
        best_v = a;
      }
      if (fb < best_f) {
        best_f = fb;
        best_v = b;
      }
      if (fa < fb) {
        hi = b;
      } else {
        lo = a;
      }
    }

    if (best_v < kPosteriorClamp) best_v = 0.0;
    if (best_v > 1.0 - kPosteriorClamp) best_v = 1.0;
    out.p[c] = best_v;
  }
  return out;
}

// One row of a bias-quality sweep: the biased table is blended toward the
// uninformative 0.5 by `corruption` in [0, 0.5], and the induced minimizer
// recorded per cell together with its objective value.
struct SweepRow {
  double corruption = 0.0;
  PosteriorTable biased;
  PosteriorTable minimizer;
  std::array<double, 4> objective{};
};

inline PosteriorTable corrupt_toward_half(const PosteriorTable& table, double corruption) {
  if (!(corruption >= 0.0 && corruption <= 0.5)) {
    throw DomainError("corruption must be in [0, 0.5]");
  }
  PosteriorTable out;
  for (std::size_t c = 0; c < 4; ++c) {
    out.p[c] = (1.0 - 2.0 * corruption) * table.p[c] + corruption;
  }
  return out;
}

inline std::vector<SweepRow> sweep_bias_quality(const CellDistribution& pi, double lambda,
                                                double epsilon,
                                                const std::vector<double>& corruption_levels,
                                                double grid_step = 1e-3) {
  std::vector<SweepRow> rows;
  rows.reserve(corruption_levels.size());
  for (double level : corruption_levels) {
    SweepRow row;
    row.corruption = level;
    row.biased = corrupt_toward_half(PosteriorTable::bias_indicator(), level);
    row.minimizer = minimize_posterior(pi, row.biased, lambda, epsilon, grid_step);
    for (std::size_t c = 0; c < 4; ++c) {
      row.objective[c] = detail::cell_ad_loss(kCellOrder[c][0], row.biased.p[c],
                                              row.minimizer.p[c], lambda, epsilon);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace adaabc
