#include "adaabc/council.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "adaabc/synthdata.hpp"
#include "oracles.hpp"

using namespace adaabc;

namespace {

CouncilConfig small_cfg(std::size_t heads, double fraction) {
  CouncilConfig cfg;
  cfg.n_heads = heads;
  cfg.subset_fraction = fraction;
  return cfg;
}

TEST(BuildCouncil, DeterministicGivenSeed) {
  CouncilConfig cfg = small_cfg(4, 0.7);
  BiasCouncil a = build_council(cfg, {3, 8}, 100, 42);
  BiasCouncil b = build_council(cfg, {3, 8}, 100, 42);
  EXPECT_TRUE(a.params_equal(b));
  EXPECT_EQ(a.subset_masks, b.subset_masks);
  BiasCouncil c = build_council(cfg, {3, 8}, 100, 43);
  EXPECT_FALSE(c.params_equal(a));
}

TEST(BuildCouncil, MaskSizesFollowTheFraction) {
  BiasCouncil council = build_council(small_cfg(3, 0.7), {2, 4}, 10, 1);
  for (const auto& mask : council.subset_masks) {
    std::size_t count = 0;
    for (auto m : mask) count += m;
    EXPECT_EQ(count, 7u);  // ceil(0.7 * 10)
  }
  // Heads draw from independent streams, so masks should differ.
  EXPECT_NE(council.subset_masks[0], council.subset_masks[1]);
}

TEST(BuildCouncil, RejectsEmptySubsets) {
  EXPECT_THROW(build_council(small_cfg(2, 0.001), {2, 4}, 100, 1), ConfigError);
  EXPECT_THROW(build_council(small_cfg(0, 0.7), {2, 4}, 100, 1), ConfigError);
  EXPECT_THROW(build_council(small_cfg(2, 0.7), {2, 4}, 0, 1), ConfigError);
}

TEST(BuildCouncil, SingleHeadFullDataInitializesLikeMonolithicClassifier) {
  BiasCouncil council = build_council(small_cfg(1, 1.0), {2, 16, 16}, 50, 7);
  Mlp mono = Mlp::classifier({2, 16, 16, 1}, 7);
  EXPECT_TRUE(council.trunk.layers()[0].weights == mono.layers()[0].weights);
  EXPECT_TRUE(council.trunk.layers()[1].weights == mono.layers()[1].weights);
  EXPECT_TRUE(council.heads[0].layers()[0].weights == mono.layers()[2].weights);

  Rng rng(5);
  Matrix batch(6, 2);
  for (double& v : batch.data) v = rng.normal(0.0, 1.0);
  std::vector<double> via_council = council_predict(council, batch);
  std::vector<double> via_mono = mono.eval_probs(batch);
  for (std::size_t n = 0; n < via_council.size(); ++n) {
    EXPECT_EQ(via_council[n], via_mono[n]);
  }
}

TEST(CouncilPredict, AveragesHeadOutputs) {
  // Identity trunk, two constant heads emitting 0.2 and 0.8.
  BiasCouncil council;
  DenseLayer trunk_layer;
  trunk_layer.weights = Matrix::from_rows({{1.0}});
  trunk_layer.bias = {0.0};
  trunk_layer.activation = Activation::identity;
  council.trunk = Mlp({trunk_layer});
  double logit02 = std::log(0.2 / 0.8);
  for (double logit : {logit02, -logit02}) {
    DenseLayer head;
    head.weights = Matrix::from_rows({{0.0}});
    head.bias = {logit};
    head.activation = Activation::sigmoid;
    council.heads.push_back(Mlp({head}));
  }
  council.config.n_heads = 2;
  std::vector<double> p = council_predict(council, Matrix::from_rows({{3.0}, {-1.0}}));
  EXPECT_NEAR(p[0], 0.5, 1e-12);
  EXPECT_NEAR(p[1], 0.5, 1e-12);
}

TEST(CouncilPredict, MatchesPerHeadForwardOracle) {
  BiasCouncil council = build_council(small_cfg(4, 0.5), {3, 8}, 40, 11);
  Rng rng(2);
  Matrix batch(5, 3);
  for (double& v : batch.data) v = rng.normal(0.0, 1.0);

  Matrix z = council.trunk.eval(batch);
  for (std::size_t n = 0; n < batch.rows; ++n) {
    double sum = 0.0;
    for (const Mlp& head : council.heads) sum += head.eval(z)(n, 0);
    EXPECT_NEAR(council_predict(council, batch)[n], sum / 4.0, 1e-15);
  }
}

TEST(CouncilPredict, InvariantUnderHeadPermutation) {
  BiasCouncil council = build_council(small_cfg(5, 0.5), {2, 6}, 30, 3);
  BiasCouncil permuted = council;
  std::rotate(permuted.heads.begin(), permuted.heads.begin() + 2, permuted.heads.end());
  Matrix batch = Matrix::from_rows({{0.4, -1.2}, {2.0, 0.1}});
  std::vector<double> a = council_predict(council, batch);
  std::vector<double> b = council_predict(permuted, batch);
  for (std::size_t n = 0; n < a.size(); ++n) EXPECT_NEAR(a[n], b[n], 1e-14);
}

TEST(CouncilStep, DegenerateCouncilTracksPlainGceTraining) {
  // One head on the full data must reproduce a monolithic GCE-trained
  // classifier bit for bit, step for step.
  const std::size_t n = 24;
  Rng rng(9);
  Matrix x(n, 2);
  for (double& v : x.data) v = rng.normal(0.0, 1.5);
  std::vector<std::uint8_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = x(i, 0) > 0.0;
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;

  CouncilConfig cfg = small_cfg(1, 1.0);
  BiasCouncil council = build_council(cfg, {2, 16, 16}, n, 31);
  CouncilOptimizers copt = make_council_optimizers(council, OptimizerState::adam(1e-3));

  Mlp mono = Mlp::classifier({2, 16, 16, 1}, 31);
  OptimizerState mopt = OptimizerState::adam(1e-3);

  for (int step = 0; step < 25; ++step) {
    council_gce_step(council, x, idx, labels, copt);

    const Matrix& out = mono.forward(x);
    Matrix upstream(n, 1);
    double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t s = 0; s < n; ++s) {
      double p_true = labels[s] ? out(s, 0) : 1.0 - out(s, 0);
      upstream(s, 0) = gce_loss(p_true, cfg.gce).grad * (labels[s] ? 1.0 : -1.0) * inv_n;
    }
    optimizer_step(mono, mono.backward(upstream).grads, mopt);

    ASSERT_TRUE(council.trunk.layers()[0].weights == mono.layers()[0].weights) << step;
    ASSERT_TRUE(council.trunk.layers()[1].weights == mono.layers()[1].weights) << step;
    ASSERT_TRUE(council.heads[0].layers()[0].weights == mono.layers()[2].weights) << step;
    ASSERT_EQ(council.heads[0].layers()[0].bias, mono.layers()[2].bias) << step;
  }
}

TEST(CouncilStep, EmptyMaskIntersectionContributesNothing) {
  // Two samples, head 0 owns sample 0, head 1 owns sample 1. A batch holding
  // only sample 0 must leave head 1 with zero gradient and zero loss share.
  BiasCouncil council = build_council(small_cfg(2, 0.5), {1, 4}, 2, 5);
  council.subset_masks[0] = {1, 0};
  council.subset_masks[1] = {0, 1};
  CouncilOptimizers opt = make_council_optimizers(council, OptimizerState::sgd(0.1));

  Mlp head1_before = council.heads[1];
  Matrix batch = Matrix::from_rows({{0.7}});
  CouncilStepResult res = council_gce_step(council, batch, {0}, {1}, opt);

  EXPECT_TRUE(council.heads[1].params_equal(head1_before));  // sgd, zero grad
  EXPECT_GT(res.mean_gce_loss, 0.0);  // the idle head contributes zero
}

TEST(CouncilStep, PrefersTheEasySpuriousFeature) {
  // Bias coordinate separable at 4 sigma, target at ~1.7 sigma, 95% aligned:
  // after GCE training the council should be more confident on aligned
  // samples than on conflicting ones.
  SynthSpec spec = toy2d_spec(3);
  spec.counts.train = {475, 475, 25, 25};
  DatasetSplits data = generate(spec);

  CouncilConfig cfg = small_cfg(2, 0.7);
  BiasCouncil council = build_council(cfg, {2, 16, 16}, data.train.size(), 12);
  CouncilOptimizers opt = make_council_optimizers(council, OptimizerState::adam(1e-3));

  std::vector<std::size_t> idx(data.train.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Matrix x = data.train.gather(idx);
  for (int step = 0; step < 150; ++step) {
    council_gce_step(council, x, idx, data.train.y, opt);
  }

  std::vector<double> p = council_predict(council, x);
  double aligned_conf = 0.0, conflicting_conf = 0.0;
  std::size_t na = 0, nc = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    double conf = data.train.y[i] ? p[i] : 1.0 - p[i];
    if (data.train.aligned(i)) {
      aligned_conf += conf;
      ++na;
    } else {
      conflicting_conf += conf;
      ++nc;
    }
  }
  EXPECT_GT(aligned_conf / na, conflicting_conf / nc);
}

TEST(CouncilCheckpoint, RoundTripsWithHeadCount) {
  namespace fs = std::filesystem;
  fs::path path = fs::temp_directory_path() / "adaabc_council_test.bin";
  BiasCouncil council = build_council(small_cfg(3, 0.5), {4, 8}, 20, 8);
  save_council(council, path);
  BiasCouncil loaded = load_council(path);
  EXPECT_EQ(loaded.n_heads(), 3u);
  EXPECT_TRUE(loaded.trunk.params_equal(council.trunk));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_TRUE(loaded.heads[i].params_equal(council.heads[i]));
  }
  EXPECT_THROW(load_model(path), ParseError);  // wrong magic for a model file
  fs::remove(path);
}

}  // namespace
