#include "arl/evaluation.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "test_util.hpp"

namespace arl::evaluation {
namespace {

using datasets::Dataset;

// Two well separated clusters; y = s = cluster label (linearly separable).
Dataset separable(Index n_train, Index n_test, std::uint64_t seed) {
  Dataset d;
  d.name = "separable";
  d.task = datasets::TaskKind::classification;
  const Index n = n_train + n_test;
  d.x.resize(2, n);
  d.y.resize(1, n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.3);
  std::bernoulli_distribution coin(0.5);
  for (Index i = 0; i < n; ++i) {
    const bool pos = coin(rng);
    d.x(0, i) = (pos ? 2.0 : -2.0) + noise(rng);
    d.x(1, i) = noise(rng);
    d.y(0, i) = pos ? 1.0 : 0.0;
  }
  d.s = d.y;
  d.split.assign(static_cast<std::size_t>(n_train), datasets::Split::train);
  d.split.resize(static_cast<std::size_t>(n), datasets::Split::test);
  return d;
}

EncoderParams identity_encoder(Index dim) {
  EncoderParams e = encoder::init({dim, {}, dim}, 0);
  e.layers[0].weight.setIdentity();
  return e;
}

HeadSpec quick_head() {
  HeadSpec h;
  h.epochs = 30;
  h.lr = 1e-2;
  h.hidden = {4};
  return h;
}

TEST(EvaluateFrozen, IdentityEncoderOnSeparableData) {
  Dataset d = separable(400, 200, 1);
  EncoderParams e = identity_encoder(2);
  const auto before = encoder::checksum(e);
  TradeoffPoint p = evaluate_frozen(e, d, quick_head(), 3);
  EXPECT_EQ(encoder::checksum(e), before);
  ASSERT_TRUE(p.ok()) << p.error;
  EXPECT_EQ(p.kind, MetricKind::accuracy);
  EXPECT_GE(p.target_metric, 0.99);
}

TEST(EvaluateFrozen, ConstantEncoderLeavesAdversaryAtMajorityRate) {
  Dataset d = separable(400, 300, 2);
  // Skew the sensitive attribute so that the majority rate is informative.
  std::mt19937_64 rng(5);
  std::bernoulli_distribution coin(0.7);
  for (Index i = 0; i < d.n(); ++i) d.s(0, i) = coin(rng) ? 1.0 : 0.0;
  EncoderParams e = encoder::init({2, {3}, 1}, 4);
  e.layers.back().weight.setZero();
  TradeoffPoint p = evaluate_frozen(e, d, quick_head(), 6);
  ASSERT_TRUE(p.ok());
  const double majority = normalization_for(d).chance;
  EXPECT_NEAR(p.adversary_metric, majority, 0.02);
}

TEST(EvaluateFrozen, Deterministic) {
  Dataset d = datasets::gaussian_mixture(300, 100, 3);
  EncoderParams e = encoder::init({2, {8, 4}, 2, encoder::Activation::relu, true}, 9);
  TradeoffPoint a = evaluate_frozen(e, d, quick_head(), 1), b = evaluate_frozen(e, d, quick_head(), 1);
  EXPECT_EQ(a.kind, MetricKind::mse);
  EXPECT_EQ(a.target_metric, b.target_metric);
  EXPECT_EQ(a.adversary_metric, b.adversary_metric);
}

TEST(Metrics, AccuracyAndMse) {
  Matrix logits(1, 4), labels(1, 4);
  logits << 1.0, -1.0, 2.0, -0.5;
  labels << 1.0, 0.0, 0.0, 0.0;
  EXPECT_DOUBLE_EQ(accuracy(logits, labels), 0.75);
  Matrix multi(2, 2), onehot(2, 2);
  multi << 0.1, 0.9, 0.8, 0.2;
  onehot << 0, 1, 1, 0;
  EXPECT_DOUBLE_EQ(accuracy(multi, onehot), 1.0);
  EXPECT_DOUBLE_EQ(accuracy(multi, Matrix(onehot.colwise().reverse())), 0.0);
  EXPECT_DOUBLE_EQ(mse(logits, labels), (0.0 + 1.0 + 4.0 + 0.25) / 4.0);
}

TEST(ParetoFront, DefinitionExamples) {
  Orientation o{true, false};
  EXPECT_EQ(pareto_front({{0.5, 0.5}}, o).size(), 1u);
  EXPECT_EQ(pareto_front({{0.9, 0.9}, {0.8, 0.6}}, o).size(), 2u);
  auto f = pareto_front({{0.9, 0.6}, {0.8, 0.7}}, o);
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f[0], (Point2{0.9, 0.6}));
  // Ties on one axis do not dominate.
  EXPECT_EQ(pareto_front({{0.9, 0.6}, {0.9, 0.7}}, o).size(), 2u);
}

TEST(ParetoFront, OrderedByFirstAxis) {
  auto f = pareto_front({{0.3, 0.9}, {0.1, 1.0}, {0.2, 0.95}}, {true, true});
  ASSERT_EQ(f.size(), 3u);
  EXPECT_LT(f[0].first, f[1].first);
  EXPECT_LT(f[1].first, f[2].first);
}

TEST(Hypervolume, HandExamples) {
  EXPECT_DOUBLE_EQ(hypervolume({{0.5, 0.5}}), 0.25);
  EXPECT_NEAR(hypervolume({{0.6, 0.4}, {0.4, 0.7}}), 0.36, 1e-15);
  EXPECT_NEAR(hypervolume({{0.6, 0.4}, {0.4, 0.7}, {0.3, 0.3}}), 0.36, 1e-15);
  EXPECT_EQ(hypervolume({}), 0.0);
  EXPECT_THROW(hypervolume({{-0.1, 0.5}}), Error);
}

// Independent oracle: area of the union of boxes by inclusion on a fine grid of cell midpoints
// over all distinct coordinates (exact for axis-aligned boxes anchored at the origin).
double union_area(const std::vector<Point2>& pts) {
  std::vector<double> xs{0.0}, ys{0.0};
  for (const auto& p : pts) {
    xs.push_back(p.first);
    ys.push_back(p.second);
  }
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
      const double cx = 0.5 * (xs[i] + xs[i + 1]), cy = 0.5 * (ys[j] + ys[j + 1]);
      bool covered = false;
      for (const auto& p : pts) covered = covered || (cx < p.first && cy < p.second);
      if (covered) area += (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]);
    }
  }
  return area;
}

TEST(Hypervolume, MatchesUnionOracleAndInvariances) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Point2> pts(1 + trial % 9);
    for (auto& p : pts) p = {u(rng), u(rng)};
    const double hv = hypervolume(pts);
    EXPECT_NEAR(hv, union_area(pts), 1e-12);
    auto shuffled = pts;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_NEAR(hypervolume(shuffled), hv, 1e-15);
    // A point outside the current union strictly increases the volume.
    Point2 extra{1.01, 0.5};
    auto more = pts;
    more.push_back(extra);
    EXPECT_GT(hypervolume(more), hv);
  }
}

TEST(Attainment, Examples) {
  Orientation o{true, false};
  std::vector<Point2> run{{0.2, 0.1}, {0.5, 0.4}, {0.9, 0.8}};
  auto one = attainment_surface({run}, 0.5, o);
  ASSERT_EQ(one.size(), 3u);
  EXPECT_EQ(one[0], (Point2{0.2, 0.1}));
  EXPECT_EQ(one[2], (Point2{0.9, 0.8}));
  EXPECT_EQ(attainment_surface({run, run}, 0.5, o), one);
  EXPECT_EQ(attainment_surface({run}, 0.9, o), one);
  auto med = attainment_surface({{{1.0, 1.0}}, {{1.0, 3.0}}}, 0.5, o);
  ASSERT_EQ(med.size(), 1u);
  EXPECT_DOUBLE_EQ(med[0].second, 2.0);
  EXPECT_THROW(attainment_surface({}, 0.5, o), Error);
  EXPECT_THROW(attainment_surface({run}, 1.0, o), Error);
}

TEST(Normalization, AccuracyAndMseAxes) {
  Normalization acc{MetricKind::accuracy, 0.8, 0.16};
  TradeoffPoint p;
  p.kind = MetricKind::accuracy;
  p.target_metric = 0.75;
  p.adversary_metric = 0.8;
  EXPECT_EQ(acc.apply(p), (Point2{0.75, 1.0}));
  p.adversary_metric = 0.9;
  EXPECT_NEAR(acc.apply(p).second, 0.5, 1e-12);
  Normalization m{MetricKind::mse, 0.5, 0.25};
  p.kind = MetricKind::mse;
  p.target_metric = 1.0;
  p.adversary_metric = 0.25;
  EXPECT_EQ(m.apply(p), (Point2{0.5, 0.5}));
}

TEST(FrontReport, SkipsFailedPointsAndIgnoresDominated) {
  Normalization n{MetricKind::accuracy, 0.5, 0.25};
  std::vector<TradeoffPoint> pts(4);
  pts[0] = {0.0, 1, 0.9, 0.9, MetricKind::accuracy, ""};
  pts[1] = {0.5, 1, 0.8, 0.6, MetricKind::accuracy, ""};
  pts[2] = {0.7, 1, 0.7, 0.7, MetricKind::accuracy, ""};  // dominated by pts[1]
  pts[3] = {1.0, 1, 0.5, 0.5, MetricKind::accuracy, "diverged"};
  FrontReport r = front_report(pts, n);
  EXPECT_EQ(r.failed, 1u);
  EXPECT_EQ(r.front.size(), 2u);
  EXPECT_NEAR(r.hypervolume, hypervolume({{0.9, 0.2}, {0.8, 0.8}}), 1e-15);
  auto without = pts;
  without.erase(without.begin() + 2);
  EXPECT_EQ(front_report(without, n).hypervolume, r.hypervolume);
}

TEST(Csv, RoundTripIsExact) {
  std::vector<TradeoffPoint> pts(2);
  pts[0] = {0.1, 3, 0.1 + 0.2, 1.0 / 3.0, MetricKind::mse, ""};
  pts[1] = {1.0, 4, std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(), MetricKind::mse, "x"};
  std::string csv = points_csv(pts);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "lambda,seed,target_metric,adversary_metric,kind");
  std::istringstream in(csv);
  auto back = parse_points_csv(in);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].target_metric, pts[0].target_metric);
  EXPECT_EQ(back[0].adversary_metric, pts[0].adversary_metric);
  EXPECT_FALSE(back[1].ok());
  EXPECT_EQ(points_csv(back), csv);
  std::istringstream bad("lambda,seed,target_metric,adversary_metric,kind\n0.1,1,abc,0.2,mse\n");
  EXPECT_THROW(parse_points_csv(bad), Error);
}

}  // namespace
}  // namespace arl::evaluation
