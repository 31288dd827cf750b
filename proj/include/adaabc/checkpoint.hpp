#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "adaabc/nn.hpp"

namespace adaabc {

// Binary model checkpoints. Layout:
//   8-byte magic/version, u32 layer count, then per layer
//   u32 out, u32 in, u8 activation, f64 weights (row-major), f64 bias.
// Doubles are dumped bit-exactly, so save/load round-trips are lossless.
constexpr char kModelMagic[8] = {'A', 'D', 'A', 'B', 'C', 'K', '0', '1'};
constexpr char kCouncilMagic[8] = {'A', 'D', 'A', 'B', 'C', 'C', '0', '1'};

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint32_t read_u32(std::istream& is, const char* what) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(v))) {
    throw ParseError(std::string("checkpoint: truncated while reading ") + what);
  }
  return v;
}

inline void write_doubles(std::ostream& os, const double* p, std::size_t n) {
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

inline void read_doubles(std::istream& is, double* p, std::size_t n, const char* what) {
  if (!is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)))) {
    throw ParseError(std::string("checkpoint: truncated while reading ") + what);
  }
}

inline void write_mlp_body(std::ostream& os, const Mlp& model) {
  write_u32(os, static_cast<std::uint32_t>(model.layer_count()));
  for (const auto& layer : model.layers()) {
    write_u32(os, static_cast<std::uint32_t>(layer.out_dim()));
    write_u32(os, static_cast<std::uint32_t>(layer.in_dim()));
    char act = static_cast<char>(layer.activation);
    os.write(&act, 1);
    write_doubles(os, layer.weights.data.data(), layer.weights.data.size());
    write_doubles(os, layer.bias.data(), layer.bias.size());
  }
}

inline Mlp read_mlp_body(std::istream& is) {
  std::uint32_t n_layers = read_u32(is, "layer count");
  if (n_layers == 0 || n_layers > 1024) {
    throw ParseError("checkpoint: implausible layer count " + std::to_string(n_layers));
  }
  std::vector<DenseLayer> layers(n_layers);
  for (auto& layer : layers) {
    std::uint32_t out = read_u32(is, "layer out dim");
    std::uint32_t in = read_u32(is, "layer in dim");
    char act = 0;
    if (!is.read(&act, 1)) throw ParseError("checkpoint: truncated while reading activation");
    if (act < 0 || act > 2) throw ParseError("checkpoint: unknown activation code");
    layer.activation = static_cast<Activation>(act);
    layer.weights = Matrix(out, in);
    layer.bias.assign(out, 0.0);
    read_doubles(is, layer.weights.data.data(), layer.weights.data.size(), "weights");
    read_doubles(is, layer.bias.data(), layer.bias.size(), "bias");
  }
  return Mlp(std::move(layers));
}

inline void check_magic(std::istream& is, const char (&magic)[8], const char* kind) {
  char got[8] = {};
  if (!is.read(got, 8) || std::memcmp(got, magic, 8) != 0) {
    throw ParseError(std::string("checkpoint: bad or missing ") + kind + " header");
  }
}

}  // namespace detail

inline void save_model(const Mlp& model, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open for writing: " + path.string());
  os.write(kModelMagic, 8);
  detail::write_mlp_body(os, model);
  if (!os) throw ConfigError("write failed: " + path.string());
}

inline Mlp load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open for reading: " + path.string());
  detail::check_magic(is, kModelMagic, "model");
  return detail::read_mlp_body(is);
}

}  // namespace adaabc
