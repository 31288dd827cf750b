#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "adaabc/nn.hpp"

namespace adaabc {

enum class OptimizerAlgo { sgd, adam };

// Per-model optimizer state. Adam moments are allocated lazily on the first
// step so the state can be declared before the model shapes are known.
struct OptimizerState {
  OptimizerAlgo algo = OptimizerAlgo::adam;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step_count = 0;
  std::vector<LayerGrads> m;  // first moments
  std::vector<LayerGrads> v;  // second moments

  static OptimizerState sgd(double lr) {
    OptimizerState s;
    s.algo = OptimizerAlgo::sgd;
    s.learning_rate = lr;
    return s;
  }
  static OptimizerState adam(double lr) {
    OptimizerState s;
    s.algo = OptimizerAlgo::adam;
    s.learning_rate = lr;
    return s;
  }
};

namespace detail {

inline void ensure_moments(std::vector<LayerGrads>& mom, const Mlp& model) {
  if (!mom.empty()) return;
  mom.resize(model.layer_count());
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    const DenseLayer& layer = model.layers()[l];
    mom[l].weights = Matrix(layer.out_dim(), layer.in_dim());
    mom[l].bias.assign(layer.out_dim(), 0.0);
  }
}

}  // namespace detail

// One parameter update in place. sgd: p -= lr*g. adam: bias-corrected
// first/second moment update.
inline void optimizer_step(Mlp& model, const GradientSet& grads, OptimizerState& state) {
  if (state.learning_rate <= 0.0) {
    throw ConfigError("optimizer_step: learning rate must be positive");
  }
  if (!model.congruent_with(grads)) {
    throw ShapeError("optimizer_step: gradient set not congruent with model");
  }
  for (std::size_t l = 0; l < grads.layers.size(); ++l) {
    if (!grads.layers[l].weights.all_finite()) {
      throw NumericError("optimizer_step: non-finite weight gradient in layer " +
                         std::to_string(l));
    }
    for (double g : grads.layers[l].bias) {
      if (!std::isfinite(g)) {
        throw NumericError("optimizer_step: non-finite bias gradient in layer " +
                           std::to_string(l));
      }
    }
  }

  if (state.algo == OptimizerAlgo::sgd) {
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
      DenseLayer& layer = model.layers()[l];
      const LayerGrads& g = grads.layers[l];
      for (std::size_t i = 0; i < layer.weights.data.size(); ++i) {
        layer.weights.data[i] -= state.learning_rate * g.weights.data[i];
      }
      for (std::size_t i = 0; i < layer.bias.size(); ++i) {
        layer.bias[i] -= state.learning_rate * g.bias[i];
      }
    }
    ++state.step_count;
    return;
  }

  detail::ensure_moments(state.m, model);
  detail::ensure_moments(state.v, model);
  ++state.step_count;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));

  auto update = [&](double& p, double g, double& m, double& v) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g * g;
    double mhat = m / bc1;
    double vhat = v / bc2;
    p -= state.learning_rate * mhat / (std::sqrt(vhat) + state.eps);
  };

  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    DenseLayer& layer = model.layers()[l];
    const LayerGrads& g = grads.layers[l];
    for (std::size_t i = 0; i < layer.weights.data.size(); ++i) {
      update(layer.weights.data[i], g.weights.data[i], state.m[l].weights.data[i],
             state.v[l].weights.data[i]);
    }
    for (std::size_t i = 0; i < layer.bias.size(); ++i) {
      update(layer.bias[i], g.bias[i], state.m[l].bias[i], state.v[l].bias[i]);
    }
  }
}

}  // namespace adaabc
