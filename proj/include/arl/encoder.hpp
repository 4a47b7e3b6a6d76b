#pragma once

// Fully connected encoder with hand-written backward pass and Adam.
// Batches are column-major: X is d x b, Z is out x b.

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "arl/numlin.hpp"

namespace arl::encoder {

enum class Activation { relu, leaky_relu };

inline constexpr double kLeakySlope = 0.2;
inline constexpr double kNormEps = 1e-8;

inline std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "leaky_relu"; }

inline Activation activation_from_string(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "leaky_relu") return Activation::leaky_relu;
  throw config_error("unknown activation '" + std::string(s) + "'");
}

struct MlpSpec {
  Index input_dim = 1;
  std::vector<Index> hidden;
  Index output_dim = 1;
  Activation activation = Activation::relu;
  bool instance_norm_output = false;

  void validate() const {
    if (input_dim < 1 || output_dim < 1) throw invalid_argument("mlp: dimensions must be positive");
    for (Index h : hidden)
      if (h < 1) throw invalid_argument("mlp: hidden widths must be positive");
  }

  /// input_dim, hidden..., output_dim
  std::vector<Index> widths() const {
    std::vector<Index> w{input_dim};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(output_dim);
    return w;
  }

  std::size_t num_layers() const { return hidden.size() + 1; }

  Index param_count() const {
    auto w = widths();
    Index n = 0;
    for (std::size_t l = 0; l + 1 < w.size(); ++l) n += w[l] * w[l + 1] + w[l + 1];
    return n;
  }

  bool operator==(const MlpSpec&) const = default;
};

/// One affine map: out = weight * in + bias, weight is fan_out x fan_in.
struct Layer {
  Matrix weight;
  Vector bias;
};

using LayerSet = std::vector<Layer>;

struct AdamState {
  LayerSet m;
  LayerSet v;
  std::int64_t step = 0;
};

struct EncoderParams {
  MlpSpec spec;
  LayerSet layers;
  AdamState adam;
  std::uint64_t seed = 0;
};

struct Gradients {
  LayerSet layers;
  Matrix input;  // dL/dX
};

struct Cache {
  std::vector<Matrix> inputs;  // input to each layer
  std::vector<Matrix> pre;     // pre-activation of each layer
  Matrix raw;                  // last-layer output before normalisation
  Vector norms;                // clamped column norms of raw (normalisation only)
};

struct ForwardResult {
  Matrix z;
  Cache cache;
};

inline LayerSet zeros_like(const LayerSet& ls) {
  LayerSet out;
  out.reserve(ls.size());
  for (const Layer& l : ls) out.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
  return out;
}

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
inline EncoderParams init(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  EncoderParams p;
  p.spec = spec;
  p.seed = seed;
  std::mt19937_64 rng(seed);
  auto w = spec.widths();
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Layer layer{Matrix(w[l + 1], w[l]), Vector::Zero(w[l + 1])};
    for (Index j = 0; j < layer.weight.cols(); ++j)
      for (Index i = 0; i < layer.weight.rows(); ++i) layer.weight(i, j) = dist(rng);
    p.layers.push_back(std::move(layer));
  }
  p.adam = {zeros_like(p.layers), zeros_like(p.layers), 0};
  return p;
}

inline Matrix activate(Activation a, const Matrix& x) {
  if (a == Activation::relu) return x.cwiseMax(0.0);
  return x.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
}

inline Matrix activation_slope(Activation a, const Matrix& x) {
  const double neg = a == Activation::relu ? 0.0 : kLeakySlope;
  return x.unaryExpr([neg](double v) { return v > 0.0 ? 1.0 : neg; });
}

inline ForwardResult forward(const EncoderParams& p, const Eigen::Ref<const Matrix>& x) {
  if (x.rows() != p.spec.input_dim) throw invalid_argument("mlp forward: input dimension mismatch");
  ForwardResult r;
  Matrix h = x;
  const std::size_t n = p.layers.size();
  for (std::size_t l = 0; l < n; ++l) {
    Matrix pre = p.layers[l].weight * h;
    pre.colwise() += p.layers[l].bias;
    r.cache.inputs.push_back(std::move(h));
    h = l + 1 < n ? activate(p.spec.activation, pre) : pre;
    r.cache.pre.push_back(std::move(pre));
  }
  r.cache.raw = h;
  if (p.spec.instance_norm_output) {
    r.cache.norms = h.colwise().norm().transpose().cwiseMax(kNormEps);
    r.z = h * r.cache.norms.cwiseInverse().asDiagonal();
  } else {
    r.z = std::move(h);
  }
  return r;
}

inline Matrix embed(const EncoderParams& p, const Eigen::Ref<const Matrix>& x) { return forward(p, x).z; }

inline Gradients backward(const EncoderParams& p, const Cache& cache, const Eigen::Ref<const Matrix>& dz) {
  const std::size_t n = p.layers.size();
  if (cache.pre.size() != n || dz.rows() != p.spec.output_dim || dz.cols() != cache.raw.cols()) {
    throw invalid_argument("mlp backward: shape mismatch");
  }
  Matrix g = dz;
  if (p.spec.instance_norm_output) {
    // d(u/|u|) = (I - zz^T) du / |u|
    Matrix z = cache.raw * cache.norms.cwiseInverse().asDiagonal();
    RowVector proj = z.cwiseProduct(g).colwise().sum();
    g = (g - z * proj.asDiagonal()) * cache.norms.cwiseInverse().asDiagonal();
  }
  Gradients out;
  out.layers.resize(n);
  for (std::size_t l = n; l-- > 0;) {
    if (l + 1 < n) g = g.cwiseProduct(activation_slope(p.spec.activation, cache.pre[l]));
    out.layers[l].weight = g * cache.inputs[l].transpose();
    out.layers[l].bias = g.rowwise().sum();
    g = p.layers[l].weight.transpose() * g;
  }
  out.input = std::move(g);
  return out;
}

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 2e-4;
};

inline bool all_finite(const Gradients& g) {
  for (const Layer& l : g.layers)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

/// Decoupled weight decay on weights, then a bias-corrected Adam step on everything.
inline void adam_step(EncoderParams& p, const Gradients& g, const AdamConfig& cfg) {
  if (g.layers.size() != p.layers.size()) throw invalid_argument("adam_step: gradient layer count mismatch");
  if (!all_finite(g)) throw diverged("diverged: non-finite gradient");
  ++p.adam.step;
  const double t = static_cast<double>(p.adam.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  auto update = [&](auto& param, auto& m, auto& v, const auto& grad) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    param.array() -= cfg.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.eps);
  };
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    Layer& layer = p.layers[l];
    if (g.layers[l].weight.rows() != layer.weight.rows() || g.layers[l].weight.cols() != layer.weight.cols() ||
        g.layers[l].bias.size() != layer.bias.size()) {
      throw invalid_argument("adam_step: gradient shape mismatch");
    }
    layer.weight *= 1.0 - cfg.lr * cfg.weight_decay;
    update(layer.weight, p.adam.m[l].weight, p.adam.v[l].weight, g.layers[l].weight);
    update(layer.bias, p.adam.m[l].bias, p.adam.v[l].bias, g.layers[l].bias);
  }
}

/// The parameters an Adam step would reach, leaving `p` (and its moments) untouched.
inline EncoderParams adam_lookahead(const EncoderParams& p, const Gradients& g, const AdamConfig& cfg) {
  EncoderParams q = p;
  adam_step(q, g, cfg);
  q.adam = p.adam;
  return q;
}

/// FNV-1a over the bit patterns of every weight and bias.
inline std::uint64_t checksum(const EncoderParams& p) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](double v) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffu;
      h *= 1099511628211ull;
    }
  };
  for (const Layer& l : p.layers) {
    for (Index i = 0; i < l.weight.size(); ++i) mix(l.weight.data()[i]);
    for (Index i = 0; i < l.bias.size(); ++i) mix(l.bias(i));
  }
  return h;
}

// ---- head losses ------------------------------------------------------------

struct Loss {
  double value = 0.0;
  Matrix grad;  // dL/dprediction
};

/// (1/b) ||pred - target||_F^2
inline Loss mse_loss(const Eigen::Ref<const Matrix>& pred, const Eigen::Ref<const Matrix>& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw invalid_argument("mse_loss: shape mismatch");
  const double b = static_cast<double>(pred.cols());
  Matrix diff = pred - target;
  return {diff.squaredNorm() / b, (2.0 / b) * diff};
}

/// Mean binary cross-entropy of sigmoid(logits) against {0,1} targets.
inline Loss bce_logits_loss(const Eigen::Ref<const Matrix>& logits, const Eigen::Ref<const Matrix>& target) {
  if (logits.rows() != target.rows() || logits.cols() != target.cols()) throw invalid_argument("bce_logits_loss: shape mismatch");
  const double b = static_cast<double>(logits.cols());
  double total = 0.0;
  Matrix grad(logits.rows(), logits.cols());
  for (Index j = 0; j < logits.cols(); ++j) {
    for (Index i = 0; i < logits.rows(); ++i) {
      const double z = logits(i, j), t = target(i, j);
      // log(1 + e^z) - t z, evaluated without overflow
      total += std::max(z, 0.0) - t * z + std::log1p(std::exp(-std::abs(z)));
      grad(i, j) = (1.0 / (1.0 + std::exp(-z)) - t) / b;
    }
  }
  return {total / b, std::move(grad)};
}

// ---- checkpoint -------------------------------------------------------------
//
// {"format": "arl-mlp", "version": 1, "spec": {...}, "seed": u64, "adam_step": i64,
//  "layers": [{"rows": r, "cols": c, "weight": [u64...], "bias": [u64...]}, ...],
//  "adam_m": [...same layout...], "adam_v": [...]}
// Arrays hold IEEE-754 bit patterns, weights column-major.

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json spec_to_json(const MlpSpec& s) {
  return {{"input_dim", s.input_dim},
          {"hidden", s.hidden},
          {"output_dim", s.output_dim},
          {"activation", to_string(s.activation)},
          {"instance_norm_output", s.instance_norm_output}};
}

inline MlpSpec spec_from_json(const nlohmann::json& j) {
  MlpSpec s;
  s.input_dim = j.at("input_dim").get<Index>();
  s.hidden = j.at("hidden").get<std::vector<Index>>();
  s.output_dim = j.at("output_dim").get<Index>();
  s.activation = activation_from_string(j.at("activation").get<std::string>());
  s.instance_norm_output = j.at("instance_norm_output").get<bool>();
  s.validate();
  return s;
}

namespace detail {

inline nlohmann::json bits(const double* data, Index n) {
  auto arr = nlohmann::json::array();
  for (Index i = 0; i < n; ++i) arr.push_back(std::bit_cast<std::uint64_t>(data[i]));
  return arr;
}

inline void unbits(const nlohmann::json& arr, double* data, Index n) {
  if (!arr.is_array() || static_cast<Index>(arr.size()) != n) throw data_error("checkpoint: array length mismatch");
  for (Index i = 0; i < n; ++i) data[i] = std::bit_cast<double>(arr[static_cast<std::size_t>(i)].get<std::uint64_t>());
}

inline nlohmann::json layers_to_json(const LayerSet& ls) {
  auto arr = nlohmann::json::array();
  for (const Layer& l : ls) {
    arr.push_back({{"rows", l.weight.rows()},
                   {"cols", l.weight.cols()},
                   {"weight", bits(l.weight.data(), l.weight.size())},
                   {"bias", bits(l.bias.data(), l.bias.size())}});
  }
  return arr;
}

inline LayerSet layers_from_json(const nlohmann::json& arr, const MlpSpec& spec) {
  auto w = spec.widths();
  if (!arr.is_array() || arr.size() != spec.num_layers()) throw data_error("checkpoint: layer count mismatch");
  LayerSet ls;
  for (std::size_t l = 0; l < arr.size(); ++l) {
    const auto& j = arr[l];
    if (j.at("rows").get<Index>() != w[l + 1] || j.at("cols").get<Index>() != w[l]) {
      throw data_error("checkpoint: layer " + std::to_string(l) + " shape does not match spec");
    }
    Layer layer{Matrix(w[l + 1], w[l]), Vector(w[l + 1])};
    unbits(j.at("weight"), layer.weight.data(), layer.weight.size());
    unbits(j.at("bias"), layer.bias.data(), layer.bias.size());
    ls.push_back(std::move(layer));
  }
  return ls;
}

}  // namespace detail

inline nlohmann::json to_json(const EncoderParams& p) {
  return {{"format", "arl-mlp"},
          {"version", kCheckpointVersion},
          {"spec", spec_to_json(p.spec)},
          {"seed", p.seed},
          {"adam_step", p.adam.step},
          {"layers", detail::layers_to_json(p.layers)},
          {"adam_m", detail::layers_to_json(p.adam.m)},
          {"adam_v", detail::layers_to_json(p.adam.v)}};
}

inline EncoderParams from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "arl-mlp") throw data_error("checkpoint: unexpected format tag");
    if (j.at("version").get<int>() != kCheckpointVersion) throw data_error("checkpoint: unsupported version");
    EncoderParams p;
    p.spec = spec_from_json(j.at("spec"));
    p.seed = j.at("seed").get<std::uint64_t>();
    p.adam.step = j.at("adam_step").get<std::int64_t>();
    p.layers = detail::layers_from_json(j.at("layers"), p.spec);
    p.adam.m = detail::layers_from_json(j.at("adam_m"), p.spec);
    p.adam.v = detail::layers_from_json(j.at("adam_v"), p.spec);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw data_error(std::string("checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const EncoderParams& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write checkpoint '" + path + "'");
  out << to_json(p).dump() << '\n';
}

inline EncoderParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open checkpoint '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw data_error("checkpoint '" + path + "': " + e.what());
  }
  return from_json(j);
}

}  // namespace arl::encoder
