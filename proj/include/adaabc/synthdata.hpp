#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "adaabc/common.hpp"
#include "adaabc/matrix.hpp"

namespace adaabc {

// One labeled sample with its (target, bias) attribute pair. The label always
// equals the target attribute; a sample is bias-aligned when t == b.
struct BiasedSample {
  std::vector<double> x;
  std::uint8_t y = 0;
  std::uint8_t t = 0;
  std::uint8_t b = 0;
  bool aligned() const { return t == b; }
};

// Columnar dataset; row n of features pairs with y[n], t[n], b[n].
struct Dataset {
  std::size_t dim = 0;
  Matrix features;  // n x dim
  std::vector<std::uint8_t> y, t, b;

  std::size_t size() const { return y.size(); }

  void push_back(const BiasedSample& s) {
    if (s.x.size() != dim) throw ShapeError("Dataset: sample dimension mismatch");
    features.rows += 1;
    features.cols = dim;
    features.data.insert(features.data.end(), s.x.begin(), s.x.end());
    y.push_back(s.y);
    t.push_back(s.t);
    b.push_back(s.b);
  }

  bool aligned(std::size_t n) const { return t[n] == b[n]; }

  Matrix gather(const std::vector<std::size_t>& idx) const {
    Matrix out(idx.size(), dim);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const double* src = features.row(idx[k]);
      double* dst = out.row(k);
      for (std::size_t j = 0; j < dim; ++j) dst[j] = src[j];
    }
    return out;
  }
};

// Sample counts for the four (t,b) cells, in the order
// (1,1), (0,0), (0,1), (1,0) used throughout the library.
struct CellCounts {
  std::size_t n11 = 0, n00 = 0, n01 = 0, n10 = 0;

  std::size_t total() const { return n11 + n00 + n01 + n10; }
  std::size_t aligned() const { return n11 + n00; }
  std::size_t conflicting() const { return n01 + n10; }
  double aligned_fraction() const {
    return total() ? static_cast<double>(aligned()) / static_cast<double>(total()) : 0.0;
  }
};

struct GroupCounts {
  CellCounts train, val, test;
};

enum class SynthKind { toy2d, highdim };

// Construction recipe for a spuriously correlated synthetic set. The bias
// signal must be stronger relative to its noise than the target signal, so
// that the bias feature is the easier one to learn.
//
// toy2d is (x_target, x_bias) with plain mean-shifted Gaussians per axis.
// highdim carries the bias linearly but encodes the target in sign products
// of coordinate pairs: each pair is (u, u*s) * target_mu plus noise, with u
// a random sign and s = 2t-1, so no single coordinate correlates with the
// label and first-order training has to discover the pattern, not just
// scale it.
struct SynthSpec {
  SynthKind kind = SynthKind::toy2d;
  std::size_t target_dims = 1;
  std::size_t bias_dims = 1;
  std::size_t noise_dims = 0;
  double target_mu = 1.0;
  double target_sigma = 0.6;
  double bias_mu = 1.0;
  double bias_sigma = 0.25;
  GroupCounts counts;
  std::uint64_t seed = 0;

  std::size_t dim() const { return target_dims + bias_dims + noise_dims; }

  void validate() const {
    if (target_dims == 0 || bias_dims == 0) {
      throw ConfigError("SynthSpec: target and bias blocks must be non-empty");
    }
    if (!(target_sigma > 0.0 && bias_sigma > 0.0)) {
      throw ConfigError("SynthSpec: sigmas must be positive");
    }
    if (!(bias_mu / bias_sigma > target_mu / target_sigma)) {
      throw ConfigError("SynthSpec: bias margin/noise ratio must exceed the target's");
    }
    if (kind == SynthKind::toy2d && (target_dims != 1 || bias_dims != 1 || noise_dims != 0)) {
      throw ConfigError("SynthSpec: toy2d is (x_target, x_bias) only");
    }
    if (kind == SynthKind::toy2d && !(bias_sigma < target_sigma)) {
      throw ConfigError("SynthSpec: toy2d needs bias_sigma < target_sigma");
    }
    std::size_t pos = counts.train.n11 + counts.train.n10;
    std::size_t neg = counts.train.n00 + counts.train.n01;
    if (pos == 0 || neg == 0) {
      throw ConfigError("SynthSpec: a training class is empty");
    }
  }
};

struct DatasetSplits {
  Dataset train, val, test;
};

namespace detail {

inline void fill_cell(Dataset& out, const SynthSpec& spec, Rng& rng, std::uint8_t t,
                      std::uint8_t b, std::size_t count) {
  BiasedSample s;
  s.x.resize(spec.dim());
  s.t = t;
  s.b = b;
  s.y = t;  // labels are the target attribute
  double ts = spec.target_mu * (2.0 * t - 1.0);
  double bc = spec.bias_mu * (2.0 * b - 1.0);
  for (std::size_t n = 0; n < count; ++n) {
    std::size_t j = 0;
    if (spec.kind == SynthKind::toy2d) {
      s.x[j++] = rng.normal(ts, spec.target_sigma);
    } else {
      // Pair-encoded target signal; a trailing odd coordinate is in-block
      // noise.
      std::size_t k = 0;
      while (k + 1 < spec.target_dims) {
        double u = rng.uniform01() < 0.5 ? -1.0 : 1.0;
        s.x[j++] = rng.normal(u * spec.target_mu, spec.target_sigma);
        s.x[j++] = rng.normal(u * ts, spec.target_sigma);
        k += 2;
      }
      if (k < spec.target_dims) {
        s.x[j++] = rng.normal(0.0, spec.target_sigma);
      }
    }
    for (std::size_t k = 0; k < spec.bias_dims; ++k) {
      s.x[j++] = rng.normal(bc, spec.bias_sigma);
    }
    for (std::size_t k = 0; k < spec.noise_dims; ++k) {
      s.x[j++] = rng.normal(0.0, 1.0);
    }
    out.push_back(s);
  }
}

inline Dataset generate_split(const SynthSpec& spec, const CellCounts& cells,
                              std::uint64_t stream) {
  Dataset out;
  out.dim = spec.dim();
  out.features.cols = out.dim;
  Rng rng(mix_seed(spec.seed, stream));
  fill_cell(out, spec, rng, 1, 1, cells.n11);
  fill_cell(out, spec, rng, 0, 0, cells.n00);
  fill_cell(out, spec, rng, 0, 1, cells.n01);
  fill_cell(out, spec, rng, 1, 0, cells.n10);
  return out;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline DatasetSplits generate(const SynthSpec& spec) {
  spec.validate();
  DatasetSplits splits;
  splits.train = detail::generate_split(spec, spec.counts.train, seed_stream::kSplitTrain);
  splits.val = detail::generate_split(spec, spec.counts.val, seed_stream::kSplitVal);
  splits.test = detail::generate_split(spec, spec.counts.test, seed_stream::kSplitTest);
  return splits;
}

// Text format: header line "dim=<d>", then one sample per line as
// comma-separated features followed by y, t, b.
inline void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open for writing: " + path.string());
  os << "dim=" << ds.dim << "\n";
  for (std::size_t n = 0; n < ds.size(); ++n) {
    const double* x = ds.features.row(n);
    for (std::size_t j = 0; j < ds.dim; ++j) {
      os << detail::format_double(x[j]) << ',';
    }
    os << int(ds.y[n]) << ',' << int(ds.t[n]) << ',' << int(ds.b[n]) << "\n";
  }
  if (!os) throw ConfigError("write failed: " + path.string());
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open for reading: " + path.string());
  std::string line;
  if (!std::getline(is, line) || line.rfind("dim=", 0) != 0) {
    throw ParseError(path.string() + ":1: expected header line dim=<d>");
  }
  Dataset ds;
  try {
    ds.dim = std::stoul(line.substr(4));
  } catch (const std::exception&) {
    throw ParseError(path.string() + ":1: bad dimension in header");
  }
  ds.features.cols = ds.dim;

  std::size_t lineno = 1;
  BiasedSample s;
  s.x.resize(ds.dim);
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::size_t count = 0;
    std::array<int, 3> tail{};
    while (std::getline(ss, field, ',')) {
      try {
        if (count < ds.dim) {
          s.x[count] = std::stod(field);
        } else if (count < ds.dim + 3) {
          int v = std::stoi(field);
          if (v != 0 && v != 1) throw std::invalid_argument("not a flag");
          tail[count - ds.dim] = v;
        }
      } catch (const std::exception&) {
        throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad field '" +
                         field + "'");
      }
      ++count;
    }
    if (count != ds.dim + 3) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(ds.dim + 3) + " fields, got " + std::to_string(count));
    }
    s.y = static_cast<std::uint8_t>(tail[0]);
    s.t = static_cast<std::uint8_t>(tail[1]);
    s.b = static_cast<std::uint8_t>(tail[2]);
    ds.push_back(s);
  }
  return ds;
}

// Bundled recipes mirroring the synthetic benchmark layouts.
inline SynthSpec toy2d_spec(std::uint64_t seed = 0) {
  SynthSpec spec;
  spec.kind = SynthKind::toy2d;
  spec.target_dims = 1;
  spec.bias_dims = 1;
  spec.noise_dims = 0;
  // The easy axis needs a visibly wider separation than the hard axis, or
  // plain training learns both at once instead of latching onto the bias.
  spec.bias_mu = 3.0;
  spec.target_sigma = 0.4;
  spec.seed = seed;
  spec.counts.train = {1485, 1485, 15, 15};  // 99% aligned
  spec.counts.val = {100, 100, 100, 100};
  spec.counts.test = {250, 250, 250, 250};
  return spec;
}

// High-dimensional family with the standard cell layout: 5000 per aligned
// training cell, `conflicting_per_cell` per conflicting cell, balanced
// validation (200/cell) and test (400/cell) splits.
inline SynthSpec sbp_spec(std::size_t conflicting_per_cell, std::uint64_t seed = 0) {
  SynthSpec spec;
  spec.kind = SynthKind::highdim;
  spec.target_dims = 5;
  spec.bias_dims = 5;
  spec.noise_dims = 10;
  spec.seed = seed;
  spec.counts.train = {5000, 5000, conflicting_per_cell, conflicting_per_cell};
  spec.counts.val = {200, 200, 200, 200};
  spec.counts.test = {400, 400, 400, 400};
  return spec;
}

inline SynthSpec preset_spec(const std::string& name, std::uint64_t seed = 0) {
  if (name == "toy2d") return toy2d_spec(seed);
  if (name == "sbp99") return sbp_spec(50, seed);
  if (name == "sbp95") return sbp_spec(250, seed);
  if (name == "sbp90") return sbp_spec(500, seed);
  throw ConfigError("unknown data preset: " + name);
}

}  // namespace adaabc
