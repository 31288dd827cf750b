#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include "adaabc/checkpoint.hpp"
#include "adaabc/losses.hpp"
#include "adaabc/nn.hpp"
#include "adaabc/optimizer.hpp"

namespace adaabc {

struct CouncilConfig {
  std::size_t n_heads = 16;
  double subset_fraction = 0.7;  // of the training set, per head
  bool with_replacement = false;
  GceConfig gce;

  void validate(std::size_t dataset_size) const {
    if (n_heads < 1) throw ConfigError("council: n_heads must be >= 1");
    if (!(subset_fraction > 0.0 && subset_fraction <= 1.0)) {
      throw ConfigError("council: subset_fraction must be in (0,1]");
    }
    if (subset_fraction * static_cast<double>(dataset_size) < 1.0) {
      throw ConfigError("council: subset_fraction selects no samples");
    }
  }
};

// Bias council: a shared trunk feeding n independently initialized sigmoid
// heads, each trained on its own fixed random subset of the training set.
// The council's prediction is the plain average of the head outputs and is
// returned by value: consumers can never push gradients back into it.
struct BiasCouncil {
  Mlp trunk;               // relu feature extractor
  std::vector<Mlp> heads;  // single sigmoid layer each
  std::vector<std::vector<std::uint8_t>> subset_masks;  // per head, over the training set
  CouncilConfig config;

  std::size_t n_heads() const { return heads.size(); }
  std::size_t input_dim() const { return trunk.input_dim(); }
  std::size_t feature_dim() const { return trunk.output_dim(); }

  bool params_equal(const BiasCouncil& o) const {
    if (!trunk.params_equal(o.trunk) || heads.size() != o.heads.size()) return false;
    for (std::size_t i = 0; i < heads.size(); ++i) {
      if (!heads[i].params_equal(o.heads[i])) return false;
    }
    return true;
  }
};

// Head i's parameters come from the layer stream that a monolithic network
// (trunk + one output layer) would use for its final layer, offset by i; a
// one-head council therefore initializes identically to that network.
inline BiasCouncil build_council(const CouncilConfig& cfg,
                                 const std::vector<std::size_t>& trunk_dims,
                                 std::size_t dataset_size, std::uint64_t seed) {
  if (dataset_size < 1) throw ConfigError("council: empty dataset");
  cfg.validate(dataset_size);
  if (trunk_dims.size() < 2) throw ConfigError("council: trunk needs at least one layer");

  BiasCouncil council;
  council.config = cfg;
  std::vector<Activation> trunk_acts(trunk_dims.size() - 1, Activation::relu);
  council.trunk = Mlp::seeded(trunk_dims, trunk_acts, seed);

  std::size_t trunk_layers = trunk_dims.size() - 1;
  std::size_t z_dim = trunk_dims.back();
  council.heads.reserve(cfg.n_heads);
  for (std::size_t i = 0; i < cfg.n_heads; ++i) {
    council.heads.push_back(Mlp::seeded({z_dim, 1}, {Activation::sigmoid}, seed,
                                        trunk_layers + i));
  }

  std::size_t subset = static_cast<std::size_t>(
      std::ceil(cfg.subset_fraction * static_cast<double>(dataset_size)));
  subset = std::min(subset, dataset_size);
  council.subset_masks.assign(cfg.n_heads, std::vector<std::uint8_t>(dataset_size, 0));
  for (std::size_t i = 0; i < cfg.n_heads; ++i) {
    Rng rng(mix_seed(seed, seed_stream::kMaskBase + i));
    auto& mask = council.subset_masks[i];
    if (cfg.with_replacement) {
      for (std::size_t k = 0; k < subset; ++k) mask[rng.index(dataset_size)] = 1;
    } else {
      for (std::size_t idx : rng.sample_without_replacement(dataset_size, subset)) {
        mask[idx] = 1;
      }
    }
  }
  return council;
}

// Averaged head probability; detached by construction.
inline std::vector<double> council_predict(const BiasCouncil& council, const Matrix& batch) {
  Matrix z = council.trunk.eval(batch);
  std::vector<double> p(batch.rows, 0.0);
  for (const Mlp& head : council.heads) {
    Matrix out = head.eval(z);
    for (std::size_t n = 0; n < p.size(); ++n) p[n] += out(n, 0);
  }
  double inv = 1.0 / static_cast<double>(council.n_heads());
  for (double& v : p) v *= inv;
  return p;
}

struct CouncilOptimizers {
  OptimizerState trunk;
  std::vector<OptimizerState> heads;
};

inline CouncilOptimizers make_council_optimizers(const BiasCouncil& council,
                                                 const OptimizerState& proto) {
  CouncilOptimizers opt;
  opt.trunk = proto;
  opt.heads.assign(council.n_heads(), proto);
  return opt;
}

struct CouncilStepResult {
  double mean_gce_loss = 0.0;  // mean over heads of each head's masked-mean loss
};

// One generalized-cross-entropy training step. Head i sees only the batch
// samples inside its subset mask (a head whose mask misses the whole batch
// simply contributes nothing this step); the trunk receives the mean of the
// head losses so the head count does not rescale its effective step size.
inline CouncilStepResult council_gce_step(BiasCouncil& council, const Matrix& batch,
                                          const std::vector<std::size_t>& batch_indices,
                                          const std::vector<std::uint8_t>& labels,
                                          CouncilOptimizers& opt) {
  std::size_t n = batch.rows;
  if (batch_indices.size() != n || labels.size() != n) {
    throw ShapeError("council_gce_step: batch/indices/labels size mismatch");
  }

  const Matrix& z = council.trunk.forward(batch);
  Matrix dz(n, council.feature_dim());
  double loss_sum = 0.0;
  double inv_heads = 1.0 / static_cast<double>(council.n_heads());

  std::vector<GradientSet> head_grads(council.n_heads());
  for (std::size_t i = 0; i < council.n_heads(); ++i) {
    const auto& mask = council.subset_masks[i];
    Mlp& head = council.heads[i];
    const Matrix& out = head.forward(z);

    std::size_t m = 0;
    for (std::size_t s = 0; s < n; ++s) {
      if (batch_indices[s] >= mask.size()) {
        throw ShapeError("council_gce_step: batch index outside the mask range");
      }
      m += mask[batch_indices[s]];
    }

    Matrix upstream(n, 1);
    double head_loss = 0.0;
    if (m > 0) {
      double inv_m = 1.0 / static_cast<double>(m);
      for (std::size_t s = 0; s < n; ++s) {
        if (!mask[batch_indices[s]]) continue;
        double p1 = out(s, 0);
        double p_true = labels[s] ? p1 : 1.0 - p1;
        LossValue gce = gce_loss(p_true, council.config.gce);
        head_loss += gce.value * inv_m;
        upstream(s, 0) = gce.grad * (labels[s] ? 1.0 : -1.0) * inv_m;
      }
    }
    loss_sum += head_loss;

    BackwardResult br = head.backward(upstream);
    head_grads[i] = std::move(br.grads);
    for (std::size_t k = 0; k < dz.data.size(); ++k) {
      dz.data[k] += br.input_grad.data[k] * inv_heads;
    }
  }

  GradientSet trunk_grads = council.trunk.backward(dz).grads;
  optimizer_step(council.trunk, trunk_grads, opt.trunk);
  for (std::size_t i = 0; i < council.n_heads(); ++i) {
    optimizer_step(council.heads[i], head_grads[i], opt.heads[i]);
  }
  return {loss_sum * inv_heads};
}

// Council checkpoints reuse the model layout with a head-count field.
inline void save_council(const BiasCouncil& council, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open for writing: " + path.string());
  os.write(kCouncilMagic, 8);
  detail::write_u32(os, static_cast<std::uint32_t>(council.n_heads()));
  detail::write_mlp_body(os, council.trunk);
  for (const Mlp& head : council.heads) detail::write_mlp_body(os, head);
  if (!os) throw ConfigError("write failed: " + path.string());
}

inline BiasCouncil load_council(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open for reading: " + path.string());
  detail::check_magic(is, kCouncilMagic, "council");
  std::uint32_t n_heads = detail::read_u32(is, "head count");
  if (n_heads == 0 || n_heads > 4096) {
    throw ParseError("council checkpoint: implausible head count");
  }
  BiasCouncil council;
  council.trunk = detail::read_mlp_body(is);
  council.heads.reserve(n_heads);
  for (std::uint32_t i = 0; i < n_heads; ++i) {
    council.heads.push_back(detail::read_mlp_body(is));
  }
  council.config.n_heads = n_heads;
  return council;
}

}  // namespace adaabc
