#include "arl/training.hpp"

#include <gtest/gtest.h>

#include <chrono>

#include "test_util.hpp"

namespace arl::training {
namespace {

TrainConfig small_config(Method m, double lambda) {
  TrainConfig c;
  c.method = m;
  c.lambda = lambda;
  c.embedding_dim = 2;
  c.batch_size = 100;
  c.epochs = 3;
  return c;
}

TEST(EpochBatches, PermutationDependsOnSeedAndEpoch) {
  auto a = detail::epoch_batches(10, 3, 1, 0);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a, detail::epoch_batches(10, 3, 1, 0));
  EXPECT_NE(a, detail::epoch_batches(10, 3, 1, 1));
  EXPECT_NE(a, detail::epoch_batches(10, 3, 2, 0));
  std::vector<Index> seen;
  for (const auto& b : detail::epoch_batches(12, 4, 5, 0)) seen.insert(seen.end(), b.begin(), b.end());
  std::sort(seen.begin(), seen.end());
  for (Index i = 0; i < 12; ++i) EXPECT_EQ(seen[static_cast<std::size_t>(i)], i);
}

TEST(Config, Validation) {
  TrainConfig c;
  c.lambda = 1.5;
  EXPECT_THROW(c.validate(), Error);
  c = TrainConfig{};
  c.batch_size = 1;
  EXPECT_THROW(c.validate(), Error);
  c = TrainConfig{};
  c.gamma_s = 0.0;
  EXPECT_THROW(c.validate(), Error);
  auto d = datasets::gaussian_mixture(50, 10, 1);
  c = TrainConfig{};
  c.batch_size = 51;
  EXPECT_THROW(train_optnet(c, d), Error);
}

TEST(EmbeddingDim, DefaultsToEigenCriterionWithClamp) {
  auto d = datasets::gaussian_mixture(400, 100, 1);
  TrainConfig c;
  c.lambda = 0.0;
  EXPECT_EQ(resolve_embedding_dim(c, d), 2);
  c.lambda = 1.0;
  EXPECT_EQ(resolve_embedding_dim(c, d), 1);
  c.embedding_dim = 5;
  EXPECT_EQ(resolve_embedding_dim(c, d), 5);
  EXPECT_TRUE(encoder_spec(c, d, 2).instance_norm_output);
  EXPECT_FALSE(encoder_spec(c, d, 1).instance_norm_output);
}

TEST(OptNet, DeterministicHistory) {
  auto d = datasets::gaussian_mixture(300, 50, 2);
  TrainConfig c = small_config(Method::optnet, 0.5);
  TrainResult a = train_optnet(c, d), b = train_optnet(c, d);
  EXPECT_TRUE(a.history.same_values(b.history));
  EXPECT_EQ(encoder::checksum(a.encoder), encoder::checksum(b.encoder));
  c.seed = 1;
  EXPECT_FALSE(train_optnet(c, d).history.same_values(a.history));
}

TEST(OptNet, ReconstructsGaussianMixtureAtLambdaZero) {
  auto d = datasets::gaussian_mixture(4000, 1000, 0);
  TrainConfig c;
  c.lambda = 0.0;
  c.embedding_dim = 2;
  c.batch_size = 200;
  c.epochs = 100;
  TrainResult r = train_optnet(c, d);
  ASSERT_EQ(r.history.epochs.size(), 100u);
  // Golden value from the reference run: 0.0374 (input variance 0.29 per coordinate).
  EXPECT_LE(r.history.last().j_target, 0.05);
}

TEST(OptNet, PerStepCostGrowsCubicallyInBatch) {
  auto d = datasets::gaussian_mixture(5120, 10, 0);
  auto per_step = [&](Index b) {
    TrainConfig c;
    c.lambda = 0.5;
    c.embedding_dim = 2;
    c.batch_size = b;
    c.epochs = 3;
    const auto h = train_optnet(c, d).history;
    double best = h.epochs.front().seconds;
    for (const auto& e : h.epochs) best = std::min(best, e.seconds);
    return best / static_cast<double>(5120 / b);
  };
  const double ratio = per_step(256) / per_step(128);
  EXPECT_GE(ratio, 4.0);
  EXPECT_LE(ratio, 12.0);
}

TEST(OptNet, AdversaryPushedToChanceAtLambdaOne) {
  auto d = datasets::gaussian_mixture(2000, 100, 3);
  TrainConfig c;
  c.lambda = 1.0;
  c.embedding_dim = 2;
  c.batch_size = 200;
  c.epochs = 60;
  TrainResult r = train_optnet(c, d);
  const auto train = datasets::part(d, datasets::Split::train);
  const double chance = numlin::center_cols(train.s).squaredNorm() / static_cast<double>(train.n());
  double tail = 0.0;
  for (std::size_t i = r.history.epochs.size() - 10; i < r.history.epochs.size(); ++i) tail += r.history.epochs[i].j_sensitive;
  EXPECT_GE(tail / 10.0, 0.9 * chance);
}

TEST(OptNet, NonFiniteInputDiverges) {
  auto d = datasets::gaussian_mixture(200, 10, 4);
  d.x(0, 3) = std::numeric_limits<double>::infinity();
  TrainConfig c = small_config(Method::optnet, 0.5);
  try {
    train_optnet(c, d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::divergence);
    EXPECT_NE(std::string(e.what()).find("epoch 0"), std::string::npos) << e.what();
  }
}

TEST(Sgda, DeterministicAndMatchesOptNetScaleAtLambdaZero) {
  auto d = datasets::gaussian_mixture(4000, 1000, 0);
  TrainConfig c;
  c.lambda = 0.0;
  c.embedding_dim = 2;
  c.batch_size = 200;
  c.epochs = 100;
  c.method = Method::sgda;
  TrainResult s1 = train_sgda(c, d), s2 = train_sgda(c, d);
  EXPECT_TRUE(s1.history.same_values(s2.history));
  const double optnet_jy = 0.0374;  // golden, see ReconstructsGaussianMixtureAtLambdaZero
  EXPECT_LE(s1.history.last().j_target, 2.0 * optnet_jy);
  EXPECT_GE(s1.history.last().j_target, 0.5 * optnet_jy);
}

TEST(ExtraSgda, Deterministic) {
  auto d = datasets::gaussian_mixture(300, 50, 2);
  TrainConfig c = small_config(Method::extra_sgda, 0.5);
  EXPECT_TRUE(train_extra_sgda(c, d).history.same_values(train_extra_sgda(c, d).history));
}

TEST(ExtraSgda, ApproachesSgdaAtLambdaZeroForSmallSteps) {
  // With no adversary in the encoder objective both trainers minimise the same loss; the
  // extrapolation changes each step by O(lr^2).
  auto d = datasets::gaussian_mixture(300, 50, 2);
  TrainConfig c = small_config(Method::sgda, 0.0);
  c.lr = 1e-7;
  c.weight_decay = 0.0;
  c.instance_norm = false;
  c.activation = encoder::Activation::leaky_relu;
  const auto a = train_sgda(c, d).history, b = train_extra_sgda(c, d).history;
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    EXPECT_NEAR(a.epochs[i].j_target, b.epochs[i].j_target, 1e-6);
    EXPECT_NEAR(a.epochs[i].j_sensitive, b.epochs[i].j_sensitive, 1e-6);
  }
}

// min_x max_y x*y with 1x1 "networks": x is the encoder weight, y the adversary weight.
struct Bilinear {
  encoder::EncoderParams x = encoder::init({1, {}, 1}, 0);
  encoder::EncoderParams y = encoder::init({1, {}, 1}, 0);

  Bilinear() {
    x.layers[0].weight(0, 0) = 1.0;
    y.layers[0].weight(0, 0) = 1.0;
  }
  double xv() const { return x.layers[0].weight(0, 0); }
  double yv() const { return y.layers[0].weight(0, 0); }
  static encoder::Gradients grad(double g) {
    encoder::Gradients out;
    out.layers.push_back({Matrix::Constant(1, 1, g), Vector::Zero(1)});
    return out;
  }
  double norm() const { return std::hypot(xv(), yv()); }
};

TEST(BilinearGame, ExtragradientStaysBoundedWhereSimultaneousDiverges) {
  // beta1 = beta2 = 0 and a huge eps make the Adam step lr * g / (|g| + eps) ~ 0.05 g (plain gradient step).
  const encoder::AdamConfig sgd_like{0.05e8, 0.0, 0.0, 1e8, 0.0};
  Bilinear gda, extra;
  double prev = gda.norm();
  bool monotone = true;
  for (int t = 0; t < 10000; ++t) {
    // Simultaneous: x descends d(xy)/dx = y, y ascends d(xy)/dy = x.
    const double gx = gda.yv(), gy = -gda.xv();
    encoder::adam_step(gda.x, Bilinear::grad(gx), sgd_like);
    encoder::adam_step(gda.y, Bilinear::grad(gy), sgd_like);
    monotone = monotone && gda.norm() > prev;
    prev = gda.norm();

    auto xh = encoder::adam_lookahead(extra.x, Bilinear::grad(extra.yv()), sgd_like);
    auto yh = encoder::adam_lookahead(extra.y, Bilinear::grad(-extra.xv()), sgd_like);
    encoder::adam_step(extra.x, Bilinear::grad(yh.layers[0].weight(0, 0)), sgd_like);
    encoder::adam_step(extra.y, Bilinear::grad(-xh.layers[0].weight(0, 0)), sgd_like);
    ASSERT_LE(extra.norm(), std::sqrt(2.0) + 1e-9) << "step " << t;
  }
  EXPECT_TRUE(monotone);
  EXPECT_GT(gda.norm(), 10.0);
}

TEST(Sweep, SingleCell) {
  auto d = datasets::gaussian_mixture(200, 50, 1);
  TrainConfig c = small_config(Method::optnet, 0.0);
  evaluation::HeadSpec h;
  h.epochs = 2;
  auto pts = sweep(c, {0.0}, {1}, d, h);
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_TRUE(pts[0].ok()) << pts[0].error;
  EXPECT_EQ(pts[0].seed, 1u);
}

TEST(Sweep, OrderedAndDeterministicAcrossThreadCounts) {
  auto d = datasets::gaussian_mixture(200, 50, 1);
  TrainConfig c = small_config(Method::sgda, 0.0);
  evaluation::HeadSpec h;
  h.epochs = 2;
  auto a = sweep(c, {0.0, 0.5, 1.0}, {3, 1}, d, h, {1, {}});
  auto b = sweep(c, {0.0, 0.5, 1.0}, {3, 1}, d, h, {3, {}});
  ASSERT_EQ(a.size(), 6u);
  EXPECT_EQ(evaluation::points_csv(a), evaluation::points_csv(b));
  EXPECT_EQ(a[0].lambda, 0.0);
  EXPECT_EQ(a[0].seed, 3u);
  EXPECT_EQ(a[1].seed, 1u);
  EXPECT_EQ(a[5].lambda, 1.0);
}

TEST(Sweep, FailedCellIsMarked) {
  auto d = datasets::gaussian_mixture(200, 50, 1);
  TrainConfig c = small_config(Method::optnet, 0.0);
  c.batch_size = 150;
  evaluation::HeadSpec h;
  h.epochs = 1;
  auto tiny = d;
  tiny.x(0, 0) = std::numeric_limits<double>::quiet_NaN();
  auto pts = sweep(c, {0.0, 1.0}, {0}, tiny, h);
  ASSERT_EQ(pts.size(), 2u);
  for (const auto& p : pts) EXPECT_FALSE(p.ok());
  EXPECT_THROW(sweep(c, {}, {0}, d, h), Error);
}

TEST(DefaultGrid, ElevenEquispacedValues) {
  auto g = default_lambda_grid();
  ASSERT_EQ(g.size(), 11u);
  EXPECT_EQ(g.front(), 0.0);
  EXPECT_EQ(g.back(), 1.0);
  EXPECT_DOUBLE_EQ(g[3], 0.3);
}

}  // namespace
}  // namespace arl::training
