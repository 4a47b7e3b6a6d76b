#pragma once

// Trainers: OptNet (encoder descent through closed-form ridge heads), SGDA and
// ExtraSGDA (encoder, target head and adversary head as three Adam players),
// plus the lambda x seed sweep.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "arl/datasets.hpp"
#include "arl/dimension.hpp"
#include "arl/encoder.hpp"
#include "arl/evaluation.hpp"
#include "arl/log.hpp"
#include "arl/ridge.hpp"

namespace arl::training {

using datasets::Dataset;
using encoder::EncoderParams;
using encoder::MlpSpec;
using evaluation::TradeoffPoint;

enum class Method { optnet, sgda, extra_sgda };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::optnet: return "optnet";
    case Method::sgda: return "sgda";
    case Method::extra_sgda: return "extra_sgda";
  }
  return "?";
}

inline Method method_from_string(std::string_view s) {
  if (s == "optnet") return Method::optnet;
  if (s == "sgda") return Method::sgda;
  if (s == "extra_sgda") return Method::extra_sgda;
  throw config_error("unknown method '" + std::string(s) + "'");
}

struct TrainConfig {
  Method method = Method::optnet;
  double lambda = 0.0;
  kernels::KernelSpec kernel = kernels::KernelSpec::rbf(1.0);
  double gamma_y = 1e-4;
  double gamma_s = 1e-4;
  Index batch_size = 200;
  int epochs = 200;
  double lr = 3e-4;
  double weight_decay = 2e-4;
  std::uint64_t seed = 0;
  std::vector<Index> encoder_hidden{8, 4};
  encoder::Activation activation = encoder::Activation::relu;
  std::optional<Index> embedding_dim;      // default: dimension::optimal_dim on the train split, clamped >= 1
  std::optional<bool> instance_norm;       // default: on unless the embedding is one-dimensional
  std::vector<Index> target_head_hidden{8, 4};     // baselines only
  std::vector<Index> adversary_head_hidden{8, 4};  // baselines only
  ridge::GradRoute route = ridge::GradRoute::resolvent;

  void validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw config_error("lambda must lie in [0, 1]");
    kernel.validate();
    if (!(gamma_y > 0.0) || !(gamma_s > 0.0)) throw config_error("gamma_y and gamma_s must be positive");
    if (batch_size < 2) throw config_error("batch_size must be at least 2");
    if (epochs < 1) throw config_error("epochs must be positive");
    if (!(lr > 0.0)) throw config_error("lr must be positive");
    if (!(weight_decay >= 0.0)) throw config_error("weight_decay must be non-negative");
    if (embedding_dim && *embedding_dim < 1) throw config_error("embedding_dim must be positive");
    for (const auto* widths : {&encoder_hidden, &target_head_hidden, &adversary_head_hidden})
      for (Index w : *widths)
        if (w < 1) throw config_error("hidden widths must be positive");
  }

  encoder::AdamConfig adam() const { return {lr, 0.9, 0.999, 1e-8, weight_decay}; }
};

struct EpochRecord {
  int epoch = 0;
  double objective = 0.0;    // (1 - lambda) J_y - lambda J_s
  double j_target = 0.0;
  double j_sensitive = 0.0;
  double seconds = 0.0;      // wall clock, excluded from comparisons
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  Index embedding_dim = 0;
  std::string checkpoint;  // path, when written

  const EpochRecord& last() const { return epochs.back(); }

  /// Equality of everything except wall-clock times.
  bool same_values(const TrainHistory& o) const {
    if (epochs.size() != o.epochs.size() || embedding_dim != o.embedding_dim) return false;
    for (std::size_t i = 0; i < epochs.size(); ++i) {
      const auto &a = epochs[i], &b = o.epochs[i];
      if (a.epoch != b.epoch || a.objective != b.objective || a.j_target != b.j_target || a.j_sensitive != b.j_sensitive)
        return false;
    }
    return true;
  }
};

struct TrainResult {
  EncoderParams encoder;
  TrainHistory history;
};

/// Called after every epoch; returning false stops training early.
using EpochCallback = std::function<bool(const EpochRecord&)>;

namespace detail {

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a * 0x9e3779b97f4a7c15ull + b + 0x632be59bd9b4e019ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Batches of one epoch; the permutation depends only on (seed, epoch).
inline std::vector<std::vector<Index>> epoch_batches(Index n, Index b, std::uint64_t seed, int epoch) {
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(mix(seed, static_cast<std::uint64_t>(epoch)));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<Index>> out;
  for (Index start = 0; start + b <= n; start += b) out.emplace_back(order.begin() + start, order.begin() + start + b);
  return out;
}

inline void check_finite(const EpochRecord& r) {
  if (!std::isfinite(r.objective) || !std::isfinite(r.j_target) || !std::isfinite(r.j_sensitive)) {
    throw diverged("diverged: non-finite loss at epoch " + std::to_string(r.epoch));
  }
}

}  // namespace detail

/// Embedding dimension: configured value, else the eigenvalue criterion on the train split.
inline Index resolve_embedding_dim(const TrainConfig& cfg, const Dataset& d) {
  if (cfg.embedding_dim) return *cfg.embedding_dim;
  auto train = datasets::part(d, datasets::Split::train);
  Index r = dimension::optimal_dim(train.y, train.s, cfg.lambda, dimension::Mode::lowrank).optimal_r;
  if (r < 1) {
    log::warn("optimal embedding dimension is 0 at lambda = " + std::to_string(cfg.lambda) + "; using r = 1");
    r = 1;
  }
  return r;
}

inline MlpSpec encoder_spec(const TrainConfig& cfg, const Dataset& d, Index r) {
  return {d.x.rows(), cfg.encoder_hidden, r, cfg.activation, cfg.instance_norm.value_or(r > 1)};
}

inline void check_batch(const TrainConfig& cfg, Index n_train) {
  if (cfg.batch_size > n_train) {
    throw config_error("batch_size " + std::to_string(cfg.batch_size) + " exceeds the training-set size " +
                       std::to_string(n_train));
  }
}

inline TrainResult train_optnet(const TrainConfig& cfg, const Dataset& d, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  const auto train = datasets::part(d, datasets::Split::train);
  check_batch(cfg, train.n());
  TrainResult res;
  const Index r = resolve_embedding_dim(cfg, d);
  res.history.embedding_dim = r;
  res.encoder = encoder::init(encoder_spec(cfg, d, r), cfg.seed);
  const auto adam = cfg.adam();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    auto batches = detail::epoch_batches(train.n(), cfg.batch_size, cfg.seed, epoch);
    for (const auto& idx : batches) {
      Matrix xb = train.x(Eigen::all, idx);
      auto fr = encoder::forward(res.encoder, xb);
      if (!fr.z.allFinite()) throw diverged("diverged: non-finite embedding at epoch " + std::to_string(epoch));
      ridge::ArlGradient g = ridge::arl_objective_grad(fr.z, train.y(Eigen::all, idx), train.s(Eigen::all, idx),
                                                       cfg.gamma_y, cfg.gamma_s, cfg.lambda, cfg.kernel, cfg.route);
      if (!std::isfinite(g.value.total)) throw diverged("diverged: non-finite loss at epoch " + std::to_string(epoch));
      encoder::adam_step(res.encoder, encoder::backward(res.encoder, fr.cache, g.grad), adam);
      rec.objective += g.value.total;
      rec.j_target += g.value.j_target;
      rec.j_sensitive += g.value.j_sensitive;
    }
    const double nb = static_cast<double>(batches.size());
    rec.objective /= nb;
    rec.j_target /= nb;
    rec.j_sensitive /= nb;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    detail::check_finite(rec);
    res.history.epochs.push_back(rec);
    if (on_epoch && !on_epoch(rec)) break;
  }
  return res;
}

// ---- baselines ----------------------------------------------------------------

/// Encoder plus MLP target and adversary heads (mean-squared-error losses).
struct GamePlayers {
  EncoderParams encoder;
  EncoderParams target;
  EncoderParams adversary;
};

struct GameGradients {
  encoder::Gradients encoder;
  encoder::Gradients target;
  encoder::Gradients adversary;
  double l_target = 0.0;
  double l_sensitive = 0.0;
};

/// Simultaneous gradients at the current players: the encoder descends
/// (1 - lambda) L_y - lambda L_s, each head descends its own loss.
inline GameGradients game_gradients(const GamePlayers& p, const Matrix& x, const Matrix& y, const Matrix& s, double lambda) {
  auto fe = encoder::forward(p.encoder, x);
  auto ft = encoder::forward(p.target, fe.z);
  auto fa = encoder::forward(p.adversary, fe.z);
  encoder::Loss ly = encoder::mse_loss(ft.z, y);
  encoder::Loss ls = encoder::mse_loss(fa.z, s);
  GameGradients g;
  g.l_target = ly.value;
  g.l_sensitive = ls.value;
  g.target = encoder::backward(p.target, ft.cache, ly.grad);
  g.adversary = encoder::backward(p.adversary, fa.cache, ls.grad);
  Matrix dz = (1.0 - lambda) * g.target.input;
  if (lambda != 0.0) dz -= lambda * g.adversary.input;
  g.encoder = encoder::backward(p.encoder, fe.cache, dz);
  return g;
}

inline GamePlayers init_players(const TrainConfig& cfg, const Dataset& d, Index r) {
  GamePlayers p;
  p.encoder = encoder::init(encoder_spec(cfg, d, r), cfg.seed);
  p.target = encoder::init({r, cfg.target_head_hidden, d.y.rows(), cfg.activation, false}, detail::mix(cfg.seed, 1));
  p.adversary = encoder::init({r, cfg.adversary_head_hidden, d.s.rows(), cfg.activation, false}, detail::mix(cfg.seed, 2));
  return p;
}

inline TrainResult train_game(const TrainConfig& cfg, const Dataset& d, bool extragradient, const EpochCallback& on_epoch) {
  cfg.validate();
  const auto train = datasets::part(d, datasets::Split::train);
  check_batch(cfg, train.n());
  const Index r = resolve_embedding_dim(cfg, d);
  GamePlayers p = init_players(cfg, d, r);
  const auto adam = cfg.adam();
  TrainResult res;
  res.history.embedding_dim = r;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    auto batches = detail::epoch_batches(train.n(), cfg.batch_size, cfg.seed, epoch);
    for (const auto& idx : batches) {
      Matrix xb = train.x(Eigen::all, idx), yb = train.y(Eigen::all, idx), sb = train.s(Eigen::all, idx);
      GameGradients g = game_gradients(p, xb, yb, sb, cfg.lambda);
      if (!std::isfinite(g.l_target) || !std::isfinite(g.l_sensitive)) {
        throw diverged("diverged: non-finite loss at epoch " + std::to_string(epoch));
      }
      rec.j_target += g.l_target;
      rec.j_sensitive += g.l_sensitive;
      if (extragradient) {
        GamePlayers ahead{encoder::adam_lookahead(p.encoder, g.encoder, adam), encoder::adam_lookahead(p.target, g.target, adam),
                          encoder::adam_lookahead(p.adversary, g.adversary, adam)};
        g = game_gradients(ahead, xb, yb, sb, cfg.lambda);
      }
      encoder::adam_step(p.encoder, g.encoder, adam);
      encoder::adam_step(p.target, g.target, adam);
      encoder::adam_step(p.adversary, g.adversary, adam);
    }
    const double nb = static_cast<double>(batches.size());
    rec.j_target /= nb;
    rec.j_sensitive /= nb;
    rec.objective = (1.0 - cfg.lambda) * rec.j_target - cfg.lambda * rec.j_sensitive;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    detail::check_finite(rec);
    res.history.epochs.push_back(rec);
    if (on_epoch && !on_epoch(rec)) break;
  }
  res.encoder = std::move(p.encoder);
  return res;
}

inline TrainResult train_sgda(const TrainConfig& cfg, const Dataset& d, const EpochCallback& on_epoch = {}) {
  return train_game(cfg, d, false, on_epoch);
}

/// Extragradient: gradients at the current point give a provisional Adam step (moments
/// untouched); the real step from the original parameters uses the gradients there.
inline TrainResult train_extra_sgda(const TrainConfig& cfg, const Dataset& d, const EpochCallback& on_epoch = {}) {
  return train_game(cfg, d, true, on_epoch);
}

inline TrainResult train(const TrainConfig& cfg, const Dataset& d, const EpochCallback& on_epoch = {}) {
  switch (cfg.method) {
    case Method::optnet: return train_optnet(cfg, d, on_epoch);
    case Method::sgda: return train_sgda(cfg, d, on_epoch);
    case Method::extra_sgda: return train_extra_sgda(cfg, d, on_epoch);
  }
  throw invalid_argument("train: unknown method");
}

// ---- sweep ----------------------------------------------------------------------

/// {0, 0.1, ..., 1}
inline std::vector<double> default_lambda_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 10; ++i) g.push_back(static_cast<double>(i) / 10.0);
  return g;
}

struct SweepOptions {
  unsigned threads = 1;
  /// Called (serialised) when a cell finishes.
  std::function<void(const TradeoffPoint&)> on_cell;
};

/// Trains and evaluates one encoder per (lambda, seed). Cell failures become error markers.
/// Points are ordered by (lambda, seed) as given, regardless of completion order.
inline std::vector<TradeoffPoint> sweep(const TrainConfig& base, const std::vector<double>& grid,
                                        const std::vector<std::uint64_t>& seeds, const Dataset& d,
                                        const evaluation::HeadSpec& eval_head, const SweepOptions& opts = {}) {
  if (grid.empty() || seeds.empty()) throw invalid_argument("sweep: empty lambda grid or seed list");
  base.validate();
  eval_head.validate();
  const std::size_t cells = grid.size() * seeds.size();
  std::vector<TradeoffPoint> out(cells);
  std::atomic<std::size_t> next{0};
  std::mutex report_mu;

  auto worker = [&] {
    for (std::size_t i = next++; i < cells; i = next++) {
      TrainConfig cfg = base;
      cfg.lambda = grid[i / seeds.size()];
      cfg.seed = seeds[i % seeds.size()];
      TradeoffPoint pt;
      pt.lambda = cfg.lambda;
      pt.seed = cfg.seed;
      pt.kind = evaluation::metric_kind(d);
      try {
        TrainResult tr = train(cfg, d);
        pt = evaluation::evaluate_frozen(tr.encoder, d, eval_head, cfg.seed);
        pt.lambda = cfg.lambda;
        pt.seed = cfg.seed;
      } catch (const std::exception& e) {
        pt.error = e.what();
        log::warn(std::string(to_string(cfg.method)) + " cell lambda=" + std::to_string(cfg.lambda) +
                  " seed=" + std::to_string(cfg.seed) + " failed: " + e.what());
      }
      out[i] = pt;
      if (opts.on_cell) {
        std::lock_guard lock(report_mu);
        opts.on_cell(pt);
      }
    }
  };

  const unsigned n_threads = std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(cells)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  return out;
}

}  // namespace arl::training
