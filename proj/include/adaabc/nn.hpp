#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "adaabc/common.hpp"
#include "adaabc/matrix.hpp"

namespace adaabc {

enum class Activation { relu, sigmoid, identity };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::identity: return "identity";
  }
  return "?";
}

// One dense layer: y = act(W x + b), W is out x in.
struct DenseLayer {
  Matrix weights;
  std::vector<double> bias;
  Activation activation = Activation::identity;

  std::size_t in_dim() const { return weights.cols; }
  std::size_t out_dim() const { return weights.rows; }
};

struct LayerGrads {
  Matrix weights;
  std::vector<double> bias;
};

// Per-layer gradients, shape-congruent with the network they came from.
struct GradientSet {
  std::vector<LayerGrads> layers;

  bool all_finite() const {
    for (const auto& l : layers) {
      if (!l.weights.all_finite()) return false;
      for (double v : l.bias) {
        if (!std::isfinite(v)) return false;
      }
    }
    return true;
  }
};

namespace detail {

inline double sigmoid(double x) {
  double v = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  // Keep sigmoid outputs strictly inside (0,1) even in deep saturation.
  return std::clamp(v, kProbClamp, 1.0 - kProbClamp);
}

inline double apply_activation(Activation a, double x) {
  switch (a) {
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::sigmoid: return sigmoid(x);
    case Activation::identity: return x;
  }
  return x;
}

// Derivative expressed through the layer output y = act(x).
inline double activation_slope(Activation a, double y) {
  switch (a) {
    case Activation::relu: return y > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid: return y * (1.0 - y);
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

}  // namespace detail

class Mlp;

struct BackwardResult {
  GradientSet grads;
  Matrix input_grad;  // d(loss)/d(batch), same shape as the forward input
};

// Minimal dense feedforward network with exact manual backpropagation.
// forward() caches per-layer activations; backward() consumes the cache.
// The upstream gradient passed to backward() is d(scalar loss)/d(output),
// entry by entry -- any 1/N batch-mean factor belongs to the caller.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    check_chain_();
  }

  // Glorot-uniform weights, zero biases. Layer l draws from the sub-stream
  // mix_seed(seed, layer_stream_base + l).
  static Mlp seeded(const std::vector<std::size_t>& dims,
                    const std::vector<Activation>& acts, std::uint64_t seed,
                    std::uint64_t layer_stream_base = 0) {
    if (dims.size() < 2 || acts.size() != dims.size() - 1) {
      throw ConfigError("Mlp::seeded: need n dims and n-1 activations");
    }
    std::vector<DenseLayer> layers(dims.size() - 1);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      std::size_t in = dims[l], out = dims[l + 1];
      Rng rng(mix_seed(seed, layer_stream_base + l));
      double bound = std::sqrt(6.0 / static_cast<double>(in + out));
      layers[l].weights = Matrix(out, in);
      for (double& w : layers[l].weights.data) w = rng.uniform(-bound, bound);
      layers[l].bias.assign(out, 0.0);
      layers[l].activation = acts[l];
    }
    return Mlp(std::move(layers));
  }

  // Binary classifier: relu hidden layers, sigmoid output.
  static Mlp classifier(const std::vector<std::size_t>& dims, std::uint64_t seed,
                        std::uint64_t layer_stream_base = 0) {
    std::vector<Activation> acts(dims.size() - 1, Activation::relu);
    acts.back() = Activation::sigmoid;
    return seeded(dims, acts, seed, layer_stream_base);
  }

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  std::size_t layer_count() const { return layers_.size(); }
  std::size_t input_dim() const { return layers_.front().in_dim(); }
  std::size_t output_dim() const { return layers_.back().out_dim(); }

  // Pure evaluation: no cache, safe to call concurrently on a const model.
  Matrix eval(const Matrix& batch) const {
    check_input_(batch);
    Matrix cur = batch;
    for (const auto& layer : layers_) cur = apply_layer_(layer, cur);
    return cur;
  }

  // Column 0 of eval(), for single-output classifiers.
  std::vector<double> eval_probs(const Matrix& batch) const {
    Matrix out = eval(batch);
    std::vector<double> p(out.rows);
    for (std::size_t n = 0; n < out.rows; ++n) p[n] = out(n, 0);
    return p;
  }

  // Evaluation with activation caching for a subsequent backward().
  const Matrix& forward(const Matrix& batch) {
    check_input_(batch);
    acts_.assign(1, batch);
    acts_.reserve(layers_.size() + 1);
    for (const auto& layer : layers_) {
      acts_.push_back(apply_layer_(layer, acts_.back()));
    }
    has_cache_ = true;
    return acts_.back();
  }

  std::vector<double> forward_probs(const Matrix& batch) {
    const Matrix& out = forward(batch);
    std::vector<double> p(out.rows);
    for (std::size_t n = 0; n < out.rows; ++n) p[n] = out(n, 0);
    return p;
  }

  // Exact gradients of the scalar loss whose output-gradient is `upstream`,
  // with respect to every parameter and to the forward input.
  BackwardResult backward(const Matrix& upstream) const {
    if (!has_cache_) {
      throw StateError("Mlp::backward called before forward");
    }
    const Matrix& out = acts_.back();
    if (!upstream.same_shape(out)) {
      throw ShapeError("Mlp::backward: upstream shape mismatch");
    }
    BackwardResult res;
    res.grads.layers.resize(layers_.size());

    // delta = d(loss)/d(pre-activation of current layer)
    Matrix delta(upstream.rows, upstream.cols);
    for (std::size_t i = 0; i < delta.data.size(); ++i) {
      delta.data[i] =
          upstream.data[i] * detail::activation_slope(layers_.back().activation, out.data[i]);
    }

    for (std::size_t k = layers_.size(); k-- > 0;) {
      const DenseLayer& layer = layers_[k];
      const Matrix& in = acts_[k];  // input to layer k
      LayerGrads& g = res.grads.layers[k];
      g.weights = Matrix(layer.out_dim(), layer.in_dim());
      g.bias.assign(layer.out_dim(), 0.0);

      for (std::size_t n = 0; n < delta.rows; ++n) {
        const double* d = delta.row(n);
        const double* x = in.row(n);
        for (std::size_t o = 0; o < layer.out_dim(); ++o) {
          double dn = d[o];
          if (dn == 0.0) continue;
          double* gw = g.weights.row(o);
          for (std::size_t i = 0; i < layer.in_dim(); ++i) gw[i] += dn * x[i];
          g.bias[o] += dn;
        }
      }

      // Propagate to the layer input.
      Matrix prev(delta.rows, layer.in_dim());
      for (std::size_t n = 0; n < delta.rows; ++n) {
        const double* d = delta.row(n);
        double* p = prev.row(n);
        for (std::size_t o = 0; o < layer.out_dim(); ++o) {
          double dn = d[o];
          if (dn == 0.0) continue;
          const double* w = layer.weights.row(o);
          for (std::size_t i = 0; i < layer.in_dim(); ++i) p[i] += dn * w[i];
        }
      }
      if (k > 0) {
        const Activation act = layers_[k - 1].activation;
        for (std::size_t i = 0; i < prev.data.size(); ++i) {
          prev.data[i] *= detail::activation_slope(act, in.data[i]);
        }
      }
      delta = std::move(prev);
    }
    res.input_grad = std::move(delta);
    return res;
  }

  void clear_cache() {
    acts_.clear();
    has_cache_ = false;
  }

  bool congruent_with(const GradientSet& g) const {
    if (g.layers.size() != layers_.size()) return false;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      if (!g.layers[l].weights.same_shape(layers_[l].weights)) return false;
      if (g.layers[l].bias.size() != layers_[l].bias.size()) return false;
    }
    return true;
  }

  bool params_equal(const Mlp& o) const {
    if (o.layers_.size() != layers_.size()) return false;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      if (!(layers_[l].weights == o.layers_[l].weights)) return false;
      if (layers_[l].bias != o.layers_[l].bias) return false;
      if (layers_[l].activation != o.layers_[l].activation) return false;
    }
    return true;
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.data.size() + l.bias.size();
    return n;
  }

 private:
  void check_chain_() const {
    if (layers_.empty()) throw ConfigError("Mlp: at least one layer required");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      if (layers_[l].bias.size() != layers_[l].out_dim()) {
        throw ShapeError("Mlp: bias length != weight rows in layer " + std::to_string(l));
      }
      if (l > 0 && layers_[l].in_dim() != layers_[l - 1].out_dim()) {
        throw ShapeError("Mlp: dimension break between layers " + std::to_string(l - 1) +
                         " and " + std::to_string(l));
      }
    }
  }

  void check_input_(const Matrix& batch) const {
    if (batch.cols != input_dim()) {
      throw ShapeError("Mlp: batch has " + std::to_string(batch.cols) +
                       " features, expected " + std::to_string(input_dim()));
    }
  }

  static Matrix apply_layer_(const DenseLayer& layer, const Matrix& in) {
    Matrix out(in.rows, layer.out_dim());
    for (std::size_t n = 0; n < in.rows; ++n) {
      const double* x = in.row(n);
      double* y = out.row(n);
      for (std::size_t o = 0; o < layer.out_dim(); ++o) {
        const double* w = layer.weights.row(o);
        double acc = layer.bias[o];
        for (std::size_t i = 0; i < layer.in_dim(); ++i) acc += w[i] * x[i];
        y[o] = detail::apply_activation(layer.activation, acc);
      }
    }
    return out;
  }

  std::vector<DenseLayer> layers_;
  std::vector<Matrix> acts_;  // acts_[0] = input, acts_[k+1] = layer k output
  bool has_cache_ = false;
};

// Value and output-gradient of a scalar loss of the network output.
struct LossEval {
  double value = 0.0;
  Matrix output_grad;
};
using BatchLoss = std::function<LossEval(const Matrix& outputs)>;

// Central-difference check of an analytic gradient set against the loss
// landscape: returns max over parameters of |analytic-numeric|/(|numeric|+1e-12).
inline double finite_difference_check(Mlp& model, const BatchLoss& loss, const Matrix& batch,
                                      const GradientSet& analytic, double step = 1e-5) {
  if (!model.congruent_with(analytic)) {
    throw ShapeError("finite_difference_check: gradient set not congruent with model");
  }
  double worst = 0.0;
  auto probe = [&](double& param, double analytic_g) {
    double saved = param;
    param = saved + step;
    double up = loss(model.eval(batch)).value;
    param = saved - step;
    double down = loss(model.eval(batch)).value;
    param = saved;
    double numeric = (up - down) / (2.0 * step);
    double rel = std::fabs(analytic_g - numeric) / (std::fabs(numeric) + 1e-12);
    worst = std::max(worst, rel);
  };
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    DenseLayer& layer = model.layers()[l];
    const LayerGrads& g = analytic.layers[l];
    for (std::size_t i = 0; i < layer.weights.data.size(); ++i) {
      probe(layer.weights.data[i], g.weights.data[i]);
    }
    for (std::size_t i = 0; i < layer.bias.size(); ++i) {
      probe(layer.bias[i], g.bias[i]);
    }
  }
  return worst;
}

// Same check with the analytic side produced by the model's own backward().
inline double finite_difference_check(Mlp& model, const BatchLoss& loss, const Matrix& batch,
                                      double step = 1e-5) {
  LossEval at = loss(model.forward(batch));
  GradientSet analytic = model.backward(at.output_grad).grads;
  return finite_difference_check(model, loss, batch, analytic, step);
}

}  // namespace adaabc
