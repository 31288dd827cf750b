#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "adaabc/common.hpp"
#include "adaabc/nn.hpp"
#include "adaabc/synthdata.hpp"

namespace adaabc {

// ROC AUC as the normalized Mann-Whitney U statistic, midrank tie handling.
// Requires at least one positive and one negative label.
inline double auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw ShapeError("auc: scores/labels length mismatch");
  std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (std::uint8_t l : labels) n_pos += (l != 0);
  std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw DomainError("auc: undefined, needs both classes");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Midranks: tied scores all receive the mean of their rank range.
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    double midrank = 0.5 * static_cast<double>(i + j) + 1.0;  // ranks are 1-based
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] != 0) pos_rank_sum += midrank;
    }
    i = j + 1;
  }

  double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// Group evaluation block. Sub-population AUCs are left empty ("undefined")
// when a subgroup holds a single class; they are never imputed.
struct MetricBlock {
  std::optional<double> aligned_auc;
  std::optional<double> conflicting_auc;
  std::optional<double> balanced_auc;
  std::optional<double> overall_auc;

  struct CellStats {
    std::size_t count = 0;
    std::optional<double> accuracy;
  };
  CellStats cell_11, cell_00, cell_01, cell_10;  // (t,b) cells

  std::optional<double> aligned_accuracy() const { return pooled_(cell_11, cell_00); }
  std::optional<double> conflicting_accuracy() const { return pooled_(cell_01, cell_10); }
  std::optional<double> overall_accuracy() const {
    auto a = aligned_accuracy(), c = conflicting_accuracy();
    std::size_t na = cell_11.count + cell_00.count, nc = cell_01.count + cell_10.count;
    if (!a && !c) return std::nullopt;
    if (!a) return c;
    if (!c) return a;
    return (*a * static_cast<double>(na) + *c * static_cast<double>(nc)) /
           static_cast<double>(na + nc);
  }

 private:
  static std::optional<double> pooled_(const CellStats& x, const CellStats& y) {
    std::size_t n = x.count + y.count;
    if (n == 0) return std::nullopt;
    double hits = 0.0;
    if (x.accuracy) hits += *x.accuracy * static_cast<double>(x.count);
    if (y.accuracy) hits += *y.accuracy * static_cast<double>(y.count);
    return hits / static_cast<double>(n);
  }
};

namespace detail {

inline std::optional<double> subgroup_auc(const std::vector<double>& scores,
                                          const Dataset& ds,
                                          const std::vector<std::size_t>& idx) {
  if (idx.empty()) return std::nullopt;
  std::vector<double> s(idx.size());
  std::vector<std::uint8_t> l(idx.size());
  bool has_pos = false, has_neg = false;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    s[k] = scores[idx[k]];
    l[k] = ds.y[idx[k]];
    (l[k] ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) return std::nullopt;
  return auc(s, l);
}

}  // namespace detail

// Metrics from precomputed scores, scores[n] = predicted P(y=1 | x_n).
inline MetricBlock evaluate_scores(const std::vector<double>& scores, const Dataset& ds) {
  if (scores.size() != ds.size()) throw ShapeError("evaluate_scores: size mismatch");
  std::vector<std::size_t> aligned, conflicting, all(ds.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (std::size_t n = 0; n < ds.size(); ++n) {
    (ds.aligned(n) ? aligned : conflicting).push_back(n);
  }

  MetricBlock mb;
  mb.aligned_auc = detail::subgroup_auc(scores, ds, aligned);
  mb.conflicting_auc = detail::subgroup_auc(scores, ds, conflicting);
  mb.overall_auc = detail::subgroup_auc(scores, ds, all);
  if (mb.aligned_auc && mb.conflicting_auc) {
    mb.balanced_auc = 0.5 * (*mb.aligned_auc + *mb.conflicting_auc);
  }

  auto cell = [&](std::uint8_t t, std::uint8_t b) {
    MetricBlock::CellStats st;
    std::size_t hits = 0;
    for (std::size_t n = 0; n < ds.size(); ++n) {
      if (ds.t[n] != t || ds.b[n] != b) continue;
      ++st.count;
      bool predicted = scores[n] >= 0.5;
      if (predicted == (ds.y[n] != 0)) ++hits;
    }
    if (st.count) st.accuracy = static_cast<double>(hits) / static_cast<double>(st.count);
    return st;
  };
  mb.cell_11 = cell(1, 1);
  mb.cell_00 = cell(0, 0);
  mb.cell_01 = cell(0, 1);
  mb.cell_10 = cell(1, 0);
  return mb;
}

inline MetricBlock evaluate_groups(const Mlp& model, const Dataset& ds) {
  return evaluate_scores(model.eval_probs(ds.features), ds);
}

}  // namespace adaabc
