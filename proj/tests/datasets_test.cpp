#include "arl/datasets.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "test_util.hpp"

namespace arl::datasets {
namespace {

const std::string kData = ARL_DATA_DIR;

std::string write_temp(const std::string& name, const std::string& body) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p) << body;
  return p.string();
}

TabularSchema toy_schema() {
  return schema_from_json(nlohmann::ordered_json::parse(R"({
    "name": "toy",
    "test_fraction": 0.25,
    "split_seed": 3,
    "columns": {
      "h": {"kind": "continuous"},
      "c": {"kind": "categorical"},
      "g": {"kind": "sensitive", "positive": ["m"], "negative": ["f"]},
      "t": {"kind": "target", "positive": ["yes"], "negative": ["no"]}
    }
  })"));
}

TEST(GaussianMixture, ColourBalance) {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) total += gaussian_mixture(10000, 0, seed).s.mean();
  const double p_blue = total / 5.0;
  EXPECT_GE(p_blue, 0.47);
  EXPECT_LE(p_blue, 0.53);
}

TEST(GaussianMixture, ConditionalMeanAndVariance) {
  Dataset d = gaussian_mixture(100000, 0, 1);
  Vector red_sum = Vector::Zero(2);
  Index red = 0;
  for (Index i = 0; i < d.n(); ++i) {
    if (d.s(0, i) == 0.0) {
      red_sum += d.x.col(i);
      ++red;
    }
  }
  Vector red_mean = red_sum / static_cast<double>(red);
  EXPECT_NEAR(red_mean(0), 0.25, 0.02);
  EXPECT_NEAR(red_mean(1), 0.25, 0.02);
  for (Index r = 0; r < 2; ++r) {
    const double m = d.x.row(r).mean();
    EXPECT_NEAR((d.x.row(r).array() - m).square().mean(), 0.29, 0.01);
  }
  EXPECT_EQ(d.y, d.x);
}

TEST(GaussianMixture, SplitAndDeterminism) {
  Dataset a = gaussian_mixture(40, 10, 5), b = gaussian_mixture(40, 10, 5);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.s, b.s);
  EXPECT_EQ(a.count(Split::train), 40);
  EXPECT_EQ(a.count(Split::test), 10);
  EXPECT_EQ(part(a, Split::test).x, a.x.rightCols(10));
}

TEST(GaussianMixture, DisjointSeedsAreIndependent) {
  Dataset a = gaussian_mixture(10000, 0, 11), b = gaussian_mixture(10000, 0, 12);
  EXPECT_LT(std::abs(attribute_correlation(a.x.row(0), b.x.row(0))), 0.05);
  EXPECT_LT(std::abs(attribute_correlation(a.s.row(0), b.s.row(0))), 0.05);
}

TEST(GaussianMixture, InputColourCanonicalCorrelation) {
  Dataset d = gaussian_mixture(100000, 0, 2);
  const double rho = input_attribute_correlation(d.x, d.s.row(0));
  EXPECT_GE(rho, 0.55);
  EXPECT_LE(rho, 0.70);
  // Generative model: cov(x_k, s) = 1/8, C_xx = 0.29 I, var(s) = 1/4, so rho^2 = 2 (1/8)^2 / (0.29 / 4).
  EXPECT_NEAR(rho, 0.657, 0.01);
}

TEST(Correlation, TrivialCases) {
  RowVector a = testing::random_matrix(1, 50, 1);
  EXPECT_NEAR(attribute_correlation(a, a), 1.0, 1e-12);
  EXPECT_NEAR(attribute_correlation(a, -a), -1.0, 1e-12);
  EXPECT_NEAR(attribute_correlation(a, 3.0 * a.array() + 2.0), 1.0, 1e-12);
  EXPECT_THROW(attribute_correlation(a, RowVector::Ones(50)), Error);
  EXPECT_THROW(attribute_correlation(a, a.head(10)), Error);
}

TEST(Correlation, CanonicalMatchesCoordinate) {
  Matrix x = testing::random_matrix(3, 200, 2);
  EXPECT_NEAR(input_attribute_correlation(x, x.row(1)), 1.0, 1e-9);
}

TEST(Correlation, CanonicalOfIndependentSignsIsSmall) {
  Matrix x = gaussian_mixture(10000, 0, 3).x;
  std::mt19937_64 rng(4);
  std::bernoulli_distribution coin(0.5);
  RowVector s(10000);
  for (Index i = 0; i < s.size(); ++i) s(i) = coin(rng) ? 1.0 : -1.0;
  EXPECT_LE(input_attribute_correlation(x, s), 0.1);
}

TEST(Correlation, CanonicalToleratesSingularCovariance) {
  Matrix x(2, 100);
  x.row(0) = testing::random_matrix(1, 100, 5);
  x.row(1) = 2.0 * x.row(0);
  const double rho = input_attribute_correlation(x, x.row(0));
  EXPECT_NEAR(rho, 1.0, 1e-6);
}

TEST(Tabular, ToyFileEncoding) {
  std::string path = write_temp("arl_toy.csv",
                                "1.0, a, m, yes\n2.0, b, f, no\n\n3.0, ?, m, yes\n4.0, a, f, no\n5.0, c, m, no\n"
                                "6.0, b, f, yes\n7.0, a, m, no\n8.0, b, f, yes\n9.0, a, m, no\n");
  Dataset d = load_tabular(path, toy_schema());
  EXPECT_EQ(d.n(), 8);  // row with '?' dropped
  EXPECT_EQ(d.count(Split::test), 2);
  EXPECT_EQ(d.task, TaskKind::classification);
  ASSERT_EQ(d.categoricals.size(), 1u);  // the sensitive column is not a feature here
  EXPECT_EQ(d.x.rows(), 1 + static_cast<Index>(d.categoricals[0].vocabulary.size()));
  EXPECT_EQ(d.y.rows(), 1);
  EXPECT_EQ(d.s.rows(), 1);
  EXPECT_EQ(d.y(0, 0), 1.0);
  EXPECT_EQ(d.s(0, 1), 0.0);
  std::filesystem::remove(path);
}

TEST(Tabular, MalformedRowReportsLine) {
  std::string path = write_temp("arl_bad.csv", "1.0, a, m, yes\n2.0, b, f\n");
  try {
    load_tabular(path, toy_schema());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  std::string path2 = write_temp("arl_bad2.csv", "1.0, a, m, yes\nx, b, f, no\n");
  EXPECT_THROW(load_tabular(path2, toy_schema()), Error);
  std::string path3 = write_temp("arl_bad3.csv", "1.0, a, m, yes\n1.0, b, f, maybe\n");
  try {
    load_tabular(path3, toy_schema());
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  for (const auto& p : {path, path2, path3}) std::filesystem::remove(p);
}

TEST(Tabular, MissingFileIsDataError) {
  try {
    load_tabular("/nonexistent/file.csv", toy_schema());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
    EXPECT_NE(std::string(e.what()).find("/nonexistent/file.csv"), std::string::npos);
  }
}

TEST(Schema, RejectsBadDefinitions) {
  EXPECT_THROW(schema_from_json(nlohmann::ordered_json::parse(R"({"columns": {"a": {"kind": "target", "positive": ["1"]}}})")),
               Error);
  EXPECT_THROW(schema_from_json(nlohmann::ordered_json::parse(R"({"bogus": 1, "columns": {}})")), Error);
  EXPECT_THROW(schema_from_json(nlohmann::ordered_json::parse(R"({"columns": {"a": {"kind": "weird"}}})")), Error);
}

class AdultTest : public ::testing::Test {
protected:
  static void SetUpTestSuite() { adult = new Dataset(load_tabular(kData + "/adult/adult.data", kData + "/adult/adult.schema.json")); }
  static void TearDownTestSuite() { delete adult; }
  static Dataset* adult;
};
Dataset* AdultTest::adult = nullptr;

TEST_F(AdultTest, CleanedSize) {
  EXPECT_EQ(adult->n(), 45222);
  EXPECT_EQ(adult->count(Split::train), 30162);
  EXPECT_EQ(adult->count(Split::test), 15060);
}

TEST_F(AdultTest, TestMajorityRate) {
  Part test = part(*adult, Split::test);
  const double male = test.s.mean();
  EXPECT_NEAR(std::max(male, 1.0 - male), 0.6738, 0.0005);
}

TEST_F(AdultTest, OneHotBlocksSumToOneOnTrain) {
  auto train = adult->indices(Split::train);
  for (const auto& b : adult->categoricals) {
    const Index k = static_cast<Index>(b.vocabulary.size());
    for (Index i : train) ASSERT_EQ(adult->x.block(b.first_row, i, k, 1).sum(), 1.0) << b.column;
  }
}

TEST_F(AdultTest, ZScoresUseTrainStatisticsOnly) {
  auto train = adult->indices(Split::train);
  for (const auto& z : adult->zscores) {
    Vector v = adult->x(z.row, train).transpose();
    EXPECT_NEAR(v.mean(), 0.0, 1e-9) << z.column;
    EXPECT_NEAR(std::sqrt((v.array() - v.mean()).square().mean()), 1.0, 1e-9) << z.column;
  }
  // Recompute one raw column from the file and compare.
  const auto& age = adult->zscores.front();
  ASSERT_EQ(age.column, "age");
  EXPECT_NEAR(adult->x(age.row, 0) * age.scale + age.mean, 39.0, 1e-9);
}

TEST_F(AdultTest, CategoricalRoundTrip) {
  EXPECT_EQ(decode_categorical(*adult, "workclass", 0), "State-gov");
  EXPECT_EQ(decode_categorical(*adult, "education", 1), "Bachelors");
  EXPECT_EQ(decode_categorical(*adult, "sex", 0), "Male");
  EXPECT_THROW(decode_categorical(*adult, "age", 0), Error);
}

TEST(German, SizeAndAgeBinarisation) {
  Dataset d = load_tabular(kData + "/german/german.data", kData + "/german/german.schema.json");
  EXPECT_EQ(d.n(), 1000);
  EXPECT_EQ(d.count(Split::test), 300);
  EXPECT_EQ(d.s(0, 0), 1.0);  // age 67
  EXPECT_EQ(d.s(0, 1), 0.0);  // age 22
  EXPECT_EQ(d.y(0, 0), 1.0);  // good credit
  EXPECT_EQ(d.y(0, 1), 0.0);
  const double older = d.s.mean();
  EXPECT_NEAR(older, 0.81, 0.01);
  Dataset again = load_tabular(kData + "/german/german.data", kData + "/german/german.schema.json");
  EXPECT_EQ(again.split, d.split);
}

TEST(Container, RoundTripIsExact) {
  Dataset d = gaussian_mixture(30, 10, 9);
  auto path = (std::filesystem::temp_directory_path() / "arl_ds.json").string();
  save_dataset(d, path);
  Dataset e = load_dataset(path);
  std::filesystem::remove(path);
  EXPECT_EQ(e.x, d.x);
  EXPECT_EQ(e.s, d.s);
  EXPECT_EQ(e.split, d.split);
  EXPECT_EQ(e.task, d.task);
  EXPECT_EQ(e.feature_names, d.feature_names);
}

}  // namespace
}  // namespace arl::datasets
