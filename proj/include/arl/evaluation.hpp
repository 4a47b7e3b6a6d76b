#pragma once

// Frozen-encoder evaluation, Pareto fronts, hypervolume and attainment surfaces.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "arl/datasets.hpp"
#include "arl/encoder.hpp"

namespace arl::evaluation {

using datasets::Dataset;
using datasets::Split;
using encoder::EncoderParams;

enum class MetricKind { accuracy, mse };

inline std::string_view to_string(MetricKind k) { return k == MetricKind::accuracy ? "accuracy" : "mse"; }

inline MetricKind metric_kind_from_string(std::string_view s) {
  if (s == "accuracy") return MetricKind::accuracy;
  if (s == "mse") return MetricKind::mse;
  throw data_error("unknown metric kind '" + std::string(s) + "'");
}

inline MetricKind metric_kind(const Dataset& d) {
  return d.task == datasets::TaskKind::classification ? MetricKind::accuracy : MetricKind::mse;
}

struct TradeoffPoint {
  double lambda = 0.0;
  std::uint64_t seed = 0;
  double target_metric = std::numeric_limits<double>::quiet_NaN();
  double adversary_metric = std::numeric_limits<double>::quiet_NaN();
  MetricKind kind = MetricKind::mse;
  std::string error;  // empty when the cell succeeded

  bool ok() const { return error.empty() && std::isfinite(target_metric) && std::isfinite(adversary_metric); }
};

// ---- heads ------------------------------------------------------------------

/// Fresh predictor trained on frozen embeddings. No hidden layers = linear/logistic.
struct HeadSpec {
  std::vector<Index> hidden;
  encoder::Activation activation = encoder::Activation::leaky_relu;
  int epochs = 200;
  double lr = 3e-4;
  double weight_decay = 2e-4;
  Index batch_size = 64;

  void validate() const {
    if (epochs < 1) throw config_error("head: epochs must be positive");
    if (!(lr > 0.0)) throw config_error("head: lr must be positive");
    if (!(weight_decay >= 0.0)) throw config_error("head: weight_decay must be non-negative");
    if (batch_size < 1) throw config_error("head: batch_size must be positive");
    for (Index h : hidden)
      if (h < 1) throw config_error("head: hidden widths must be positive");
  }
};

/// Classification heads emit logits and train with cross-entropy; regression heads train with MSE.
inline EncoderParams fit_head(const Eigen::Ref<const Matrix>& z, const Eigen::Ref<const Matrix>& labels, bool classification,
                              const HeadSpec& spec, std::uint64_t seed) {
  spec.validate();
  if (z.cols() != labels.cols()) throw invalid_argument("fit_head: sample count mismatch");
  EncoderParams head = encoder::init({z.rows(), spec.hidden, labels.rows(), spec.activation, false}, seed);
  const encoder::AdamConfig adam{spec.lr, 0.9, 0.999, 1e-8, spec.weight_decay};
  const Index n = z.cols();
  const Index b = std::min(spec.batch_size, n);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Index start = 0; start + b <= n; start += b) {
      std::vector<Index> idx(order.begin() + start, order.begin() + start + b);
      Matrix zb = z(Eigen::all, idx);
      Matrix yb = labels(Eigen::all, idx);
      auto fr = encoder::forward(head, zb);
      encoder::Loss loss = classification ? encoder::bce_logits_loss(fr.z, yb) : encoder::mse_loss(fr.z, yb);
      if (!std::isfinite(loss.value)) throw diverged("diverged: head loss is not finite at epoch " + std::to_string(epoch));
      encoder::adam_step(head, encoder::backward(head, fr.cache, loss.grad), adam);
    }
  }
  return head;
}

/// Fraction of correct predictions: threshold at logit 0 for one row, argmax otherwise.
inline double accuracy(const Eigen::Ref<const Matrix>& logits, const Eigen::Ref<const Matrix>& labels) {
  if (logits.rows() != labels.rows() || logits.cols() != labels.cols()) throw invalid_argument("accuracy: shape mismatch");
  if (logits.cols() == 0) throw invalid_argument("accuracy: empty input");
  Index correct = 0;
  for (Index j = 0; j < logits.cols(); ++j) {
    if (logits.rows() == 1) {
      correct += (logits(0, j) > 0.0) == (labels(0, j) > 0.5);
    } else {
      Index a = 0, b = 0;
      logits.col(j).maxCoeff(&a);
      labels.col(j).maxCoeff(&b);
      correct += a == b;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(logits.cols());
}

/// Mean over samples of the squared error summed over rows.
inline double mse(const Eigen::Ref<const Matrix>& pred, const Eigen::Ref<const Matrix>& labels) {
  return encoder::mse_loss(pred, labels).value;
}

/// Per-row z-score of train embeddings, applied to both splits.
inline void standardize(Matrix& train, Matrix& test) {
  for (Index r = 0; r < train.rows(); ++r) {
    const double mean = train.row(r).mean();
    double sd = std::sqrt((train.row(r).array() - mean).square().mean());
    if (!(sd > 1e-12)) sd = 1.0;
    train.row(r) = (train.row(r).array() - mean) / sd;
    test.row(r) = (test.row(r).array() - mean) / sd;
  }
}

/// Embeds both splits with the frozen encoder, trains fresh target and adversary heads on the
/// train split and reports their test-split metrics.
inline TradeoffPoint evaluate_frozen(const EncoderParams& enc, const Dataset& d, const HeadSpec& head, std::uint64_t seed) {
  TradeoffPoint pt;
  pt.seed = seed;
  pt.kind = metric_kind(d);
  const datasets::Part train = datasets::part(d, Split::train);
  const datasets::Part test = datasets::part(d, Split::test);
  if (test.n() == 0) throw invalid_argument("evaluate_frozen: dataset has no test split");
  Matrix ztr = encoder::embed(enc, train.x);
  Matrix zte = encoder::embed(enc, test.x);
  if (!ztr.allFinite() || !zte.allFinite()) {
    pt.error = "non-finite embedding";
    return pt;
  }
  standardize(ztr, zte);
  const bool cls = pt.kind == MetricKind::accuracy;
  try {
    EncoderParams target = fit_head(ztr, train.y, cls, head, seed * 2 + 1);
    EncoderParams adversary = fit_head(ztr, train.s, cls, head, seed * 2 + 2);
    Matrix py = encoder::embed(target, zte), ps = encoder::embed(adversary, zte);
    pt.target_metric = cls ? accuracy(py, test.y) : mse(py, test.y);
    pt.adversary_metric = cls ? accuracy(ps, test.s) : mse(ps, test.s);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::divergence) throw;
    pt.error = e.what();
  }
  return pt;
}

// ---- fronts -----------------------------------------------------------------

struct Point2 {
  double first = 0.0;
  double second = 0.0;

  bool operator==(const Point2&) const = default;
};

struct Orientation {
  bool maximize_first = true;
  bool maximize_second = true;
};

/// Orientation of raw (target, adversary) metrics: better target, worse adversary.
inline Orientation raw_orientation(MetricKind k) {
  return k == MetricKind::accuracy ? Orientation{true, false} : Orientation{false, true};
}

/// `a` strictly better than `b` on both axes.
inline bool dominates(const Point2& a, const Point2& b, Orientation o) {
  const bool first = o.maximize_first ? a.first > b.first : a.first < b.first;
  const bool second = o.maximize_second ? a.second > b.second : a.second < b.second;
  return first && second;
}

/// Indices of points no other point strictly dominates, stably ordered by first axis.
inline std::vector<std::size_t> pareto_indices(const std::vector<Point2>& pts, Orientation o) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < pts.size() && !dominated; ++j) dominated = dominates(pts[j], pts[i], o);
    if (!dominated) keep.push_back(i);
  }
  std::stable_sort(keep.begin(), keep.end(), [&](std::size_t a, std::size_t b) { return pts[a].first < pts[b].first; });
  return keep;
}

inline std::vector<Point2> pareto_front(const std::vector<Point2>& pts, Orientation o) {
  std::vector<Point2> out;
  for (std::size_t i : pareto_indices(pts, o)) out.push_back(pts[i]);
  return out;
}

/// Area of the union of boxes [reference, p] for maximise/maximise points.
inline double hypervolume(std::vector<Point2> pts, Point2 reference = {0.0, 0.0}) {
  for (const auto& p : pts) {
    if (!std::isfinite(p.first) || !std::isfinite(p.second)) throw invalid_argument("hypervolume: non-finite point");
    if (p.first < reference.first || p.second < reference.second) {
      throw invalid_argument("hypervolume: point lies below the reference");
    }
  }
  std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) {
    return a.first != b.first ? a.first > b.first : a.second > b.second;
  });
  double area = 0.0, height = reference.second;
  for (const auto& p : pts) {
    if (p.second > height) {
      area += (p.first - reference.first) * (p.second - height);
      height = p.second;
    }
  }
  return area;
}

/// Linear interpolation between order statistics.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw invalid_argument("quantile: empty input");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Empirical attainment surface. Grid = every first-axis value in any run; at each abscissa a
/// run attains the best second-axis value among its points at least as good as a on the first
/// axis. The reported value is the q-quantile across runs (of the values ordered from best to
/// worst); abscissae that fewer than q of the runs attain are omitted.
inline std::vector<Point2> attainment_surface(const std::vector<std::vector<Point2>>& runs, double q, Orientation o) {
  if (runs.empty()) throw invalid_argument("attainment_surface: no runs");
  if (!(q > 0.0 && q < 1.0)) throw invalid_argument("attainment_surface: quantile must lie in (0, 1)");
  std::vector<double> grid;
  for (const auto& r : runs)
    for (const auto& p : r) grid.push_back(p.first);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  const double worst = o.maximize_second ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
  std::vector<Point2> out;
  for (double a : grid) {
    std::vector<double> vals;
    for (const auto& r : runs) {
      double best = worst;
      for (const auto& p : r) {
        const bool attains = o.maximize_first ? p.first >= a : p.first <= a;
        if (!attains) continue;
        best = o.maximize_second ? std::max(best, p.second) : std::min(best, p.second);
      }
      vals.push_back(best);
    }
    const double v = quantile(vals, o.maximize_second ? 1.0 - q : q);
    if (std::isfinite(v)) out.push_back({a, v});
  }
  return out;
}

// ---- normalisation ----------------------------------------------------------

/// Maps (target, adversary) metrics to [0,1]^2, both axes increasing in desirability.
///   accuracy: (target_acc, 1 - |adv_acc - chance| / (1 - chance))
///   mse:      (1 / (1 + target_mse), adv_mse / (adv_mse + var_s))
struct Normalization {
  MetricKind kind = MetricKind::mse;
  double chance = 0.5;  // majority rate of the sensitive attribute, test split
  double var_s = 0.25;  // variance of the sensitive attribute, test split

  Point2 apply(const TradeoffPoint& p) const {
    if (kind == MetricKind::accuracy) {
      const double privacy = chance < 1.0 ? 1.0 - std::abs(p.adversary_metric - chance) / (1.0 - chance) : 1.0;
      return {p.target_metric, std::clamp(privacy, 0.0, 1.0)};
    }
    return {1.0 / (1.0 + p.target_metric), p.adversary_metric / (p.adversary_metric + var_s)};
  }
};

inline Normalization normalization_for(const Dataset& d) {
  const datasets::Part test = datasets::part(d, Split::test);
  Normalization n;
  n.kind = metric_kind(d);
  const RowVector s = test.s.row(0);
  const double rate = s.mean();
  n.chance = std::max(rate, 1.0 - rate);
  n.var_s = (s.array() - rate).square().mean();
  if (!(n.var_s > 0.0)) n.var_s = 1.0;
  return n;
}

struct FrontReport {
  std::vector<TradeoffPoint> front;  // nondominated successful points, raw metrics
  double hypervolume = 0.0;
  Point2 reference{0.0, 0.0};
  Normalization normalization;
  std::size_t failed = 0;
};

inline FrontReport front_report(const std::vector<TradeoffPoint>& pts, const Normalization& norm) {
  FrontReport rep;
  rep.normalization = norm;
  std::vector<TradeoffPoint> good;
  std::vector<Point2> mapped;
  for (const auto& p : pts) {
    if (!p.ok()) {
      ++rep.failed;
      continue;
    }
    good.push_back(p);
    mapped.push_back(norm.apply(p));
  }
  for (std::size_t i : pareto_indices(mapped, {true, true})) rep.front.push_back(good[i]);
  rep.hypervolume = hypervolume(mapped, rep.reference);
  return rep;
}

inline double points_hypervolume(const std::vector<TradeoffPoint>& pts, const Normalization& norm) {
  return front_report(pts, norm).hypervolume;
}

// ---- serialisation ----------------------------------------------------------

/// Shortest representation that round-trips; "nan" for non-finite values.
inline std::string format_double(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline constexpr std::string_view kCsvHeader = "lambda,seed,target_metric,adversary_metric,kind";

inline std::string points_csv(const std::vector<TradeoffPoint>& pts) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& p : pts) {
    out += format_double(p.lambda) + ',' + std::to_string(p.seed) + ',' + format_double(p.target_metric) + ',' +
           format_double(p.adversary_metric) + ',' + std::string(to_string(p.kind)) + '\n';
  }
  return out;
}

inline double parse_double(std::string_view s, std::size_t line) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw data_error("points csv line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<TradeoffPoint> parse_points_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw data_error("points csv: missing or unexpected header");
  std::vector<TradeoffPoint> pts;
  std::size_t no = 1;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 5) throw data_error("points csv line " + std::to_string(no) + ": expected 5 fields");
    TradeoffPoint p;
    p.lambda = parse_double(f[0], no);
    try {
      p.seed = std::stoull(f[1]);
    } catch (const std::exception&) {
      throw data_error("points csv line " + std::to_string(no) + ": bad seed");
    }
    p.target_metric = parse_double(f[2], no);
    p.adversary_metric = parse_double(f[3], no);
    p.kind = metric_kind_from_string(f[4]);
    if (!std::isfinite(p.target_metric) || !std::isfinite(p.adversary_metric)) p.error = "failed";
    pts.push_back(p);
  }
  return pts;
}

inline std::vector<TradeoffPoint> load_points_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open points csv '" + path + "'");
  return parse_points_csv(in);
}

inline nlohmann::json to_json(const TradeoffPoint& p) {
  nlohmann::json j{{"lambda", p.lambda}, {"seed", p.seed}, {"kind", to_string(p.kind)}};
  j["target_metric"] = std::isfinite(p.target_metric) ? nlohmann::json(p.target_metric) : nlohmann::json(nullptr);
  j["adversary_metric"] = std::isfinite(p.adversary_metric) ? nlohmann::json(p.adversary_metric) : nlohmann::json(nullptr);
  if (!p.error.empty()) j["error"] = p.error;
  return j;
}

inline nlohmann::json to_json(const FrontReport& r) {
  auto front = nlohmann::json::array();
  for (const auto& p : r.front) front.push_back(to_json(p));
  return {{"front", front},
          {"hypervolume", r.hypervolume},
          {"reference", {r.reference.first, r.reference.second}},
          {"normalization", {{"kind", to_string(r.normalization.kind)}, {"chance", r.normalization.chance}, {"var_s", r.normalization.var_s}}},
          {"failed_points", r.failed}};
}

inline std::string surface_csv(const std::vector<Point2>& surface) {
  std::string out = "first,second\n";
  for (const auto& p : surface) out += format_double(p.first) + ',' + format_double(p.second) + '\n';
  return out;
}

}  // namespace arl::evaluation
