#pragma once

// Datasets: the synthetic Gaussian mixture and delimited tabular files.
// Every matrix holds one sample per column.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "arl/numlin.hpp"

namespace arl::datasets {

enum class Split : std::uint8_t { train, test };

/// Metric family of both prediction tasks.
enum class TaskKind { regression, classification };

inline std::string_view to_string(TaskKind k) { return k == TaskKind::regression ? "regression" : "classification"; }

/// A one-hot block of X rows [first_row, first_row + vocabulary.size()).
struct CategoricalBlock {
  std::string column;
  Index first_row = 0;
  std::vector<std::string> vocabulary;
};

/// z = (x - mean) / scale, parameters from the train split.
struct ZScore {
  std::string column;
  Index row = 0;
  double mean = 0.0;
  double scale = 1.0;
};

struct Dataset {
  std::string name;
  TaskKind task = TaskKind::regression;
  Matrix x;  // d x n
  Matrix y;  // p x n
  Matrix s;  // q x n
  std::vector<std::string> feature_names;
  std::vector<std::string> target_names;
  std::vector<std::string> sensitive_names;
  std::vector<CategoricalBlock> categoricals;
  std::vector<ZScore> zscores;
  std::vector<Split> split;
  Index unknown_categories = 0;  // test-time values outside the vocabulary (encoded as all zeros)

  Index n() const { return x.cols(); }
  Index count(Split which) const { return static_cast<Index>(std::count(split.begin(), split.end(), which)); }

  std::vector<Index> indices(Split which) const {
    std::vector<Index> idx;
    for (std::size_t i = 0; i < split.size(); ++i)
      if (split[i] == which) idx.push_back(static_cast<Index>(i));
    return idx;
  }
};

/// Columns of one split, copied out.
struct Part {
  Matrix x, y, s;

  Index n() const { return x.cols(); }
};

inline Part part(const Dataset& d, Split which) {
  auto idx = d.indices(which);
  return {d.x(Eigen::all, idx), d.y(Eigen::all, idx), d.s(Eigen::all, idx)};
}

inline void validate(const Dataset& d) {
  const Index n = d.x.cols();
  if (d.y.cols() != n || d.s.cols() != n || static_cast<Index>(d.split.size()) != n) {
    throw data_error("dataset '" + d.name + "': inconsistent sample counts");
  }
  if (!d.x.allFinite() || !d.y.allFinite() || !d.s.allFinite()) throw data_error("dataset '" + d.name + "': non-finite entries");
}

// ---- Gaussian mixture -------------------------------------------------------

inline constexpr double kMixtureSigma = 0.2;

/// Colour s ~ Bernoulli(1/2) (red = 0, blue = 1). Red draws from means (0,0), (0,1), (1,0)
/// with probabilities 1/2, 1/4, 1/4; blue from (1,1), (0,1), (1,0). Y = X.
inline Dataset gaussian_mixture(Index n_train, Index n_test, std::uint64_t seed) {
  if (n_train < 1 || n_test < 0) throw invalid_argument("gaussian_mixture: sizes must be positive");
  static constexpr double means[4][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  const Index n = n_train + n_test;
  Dataset d;
  d.name = "gaussian_mixture";
  d.task = TaskKind::regression;
  d.x.resize(2, n);
  d.s.resize(1, n);
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution colour(0.5);
  std::discrete_distribution<int> component({2, 1, 1});
  std::normal_distribution<double> noise(0.0, kMixtureSigma);
  for (Index i = 0; i < n; ++i) {
    const bool blue = colour(rng);
    int c = component(rng);
    if (c == 0 && blue) c = 3;
    d.x(0, i) = means[c][0] + noise(rng);
    d.x(1, i) = means[c][1] + noise(rng);
    d.s(0, i) = blue ? 1.0 : 0.0;
  }
  d.y = d.x;
  d.feature_names = {"x0", "x1"};
  d.target_names = {"x0", "x1"};
  d.sensitive_names = {"blue"};
  d.split.assign(static_cast<std::size_t>(n_train), Split::train);
  d.split.resize(static_cast<std::size_t>(n), Split::test);
  return d;
}

// ---- tabular ----------------------------------------------------------------

enum class ColumnKind { continuous, categorical, target, sensitive, ignore };

inline ColumnKind column_kind_from_string(std::string_view s) {
  if (s == "continuous") return ColumnKind::continuous;
  if (s == "categorical") return ColumnKind::categorical;
  if (s == "target") return ColumnKind::target;
  if (s == "sensitive") return ColumnKind::sensitive;
  if (s == "ignore") return ColumnKind::ignore;
  throw config_error("schema: unknown column kind '" + std::string(s) + "'");
}

/// A target or sensitive column is binarised either by membership in `positive`
/// (with every other value required to be in `negative`) or numerically by value > threshold.
struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  std::vector<std::string> vocabulary;  // categorical; empty = learned from the train split
  std::vector<std::string> positive;
  std::vector<std::string> negative;
  std::optional<double> threshold;
  bool also_feature = false;  // sensitive column additionally enters X
};

struct TabularSchema {
  std::string name = "tabular";
  char delimiter = ',';  // ' ' splits on runs of whitespace
  std::vector<std::string> missing{"?"};
  std::string comment_prefix;
  std::vector<ColumnSchema> columns;
  std::optional<std::string> test_file;  // relative to the data file's directory
  double test_fraction = 0.3;
  std::uint64_t split_seed = 0;

  void validate() const {
    int targets = 0, sensitives = 0;
    for (const auto& c : columns) {
      if (c.kind == ColumnKind::target) ++targets;
      if (c.kind == ColumnKind::sensitive) ++sensitives;
      if ((c.kind == ColumnKind::target || c.kind == ColumnKind::sensitive) && c.positive.empty() && !c.threshold) {
        throw config_error("schema: column '" + c.name + "' needs 'positive' values or a 'threshold'");
      }
    }
    if (targets != 1 || sensitives != 1) throw config_error("schema: exactly one target and one sensitive column required");
    if (!test_file && !(test_fraction > 0.0 && test_fraction < 1.0)) {
      throw config_error("schema: test_fraction must lie in (0, 1)");
    }
  }
};

inline TabularSchema schema_from_json(const nlohmann::ordered_json& j) {
  static const std::vector<std::string> top_keys{"name", "delimiter", "missing", "comment_prefix", "columns",
                                                 "test_file", "test_fraction", "split_seed"};
  static const std::vector<std::string> col_keys{"kind", "vocabulary", "positive", "negative", "threshold", "also_feature"};
  auto known = [](const std::vector<std::string>& keys, const std::string& k) {
    return std::find(keys.begin(), keys.end(), k) != keys.end();
  };
  try {
    TabularSchema s;
    for (const auto& [k, v] : j.items()) {
      if (!known(top_keys, k)) throw config_error("schema: unknown key '" + k + "'");
    }
    if (j.contains("name")) s.name = j["name"].get<std::string>();
    if (j.contains("delimiter")) {
      auto d = j["delimiter"].get<std::string>();
      if (d.size() != 1) throw config_error("schema: delimiter must be a single character");
      s.delimiter = d[0];
    }
    if (j.contains("missing")) s.missing = j["missing"].get<std::vector<std::string>>();
    if (j.contains("comment_prefix")) s.comment_prefix = j["comment_prefix"].get<std::string>();
    if (j.contains("test_file")) s.test_file = j["test_file"].get<std::string>();
    if (j.contains("test_fraction")) s.test_fraction = j["test_fraction"].get<double>();
    if (j.contains("split_seed")) s.split_seed = j["split_seed"].get<std::uint64_t>();
    for (const auto& [name, spec] : j.at("columns").items()) {
      ColumnSchema c;
      c.name = name;
      for (const auto& [k, v] : spec.items()) {
        if (!known(col_keys, k)) throw config_error("schema: column '" + name + "' has unknown key '" + k + "'");
      }
      c.kind = column_kind_from_string(spec.at("kind").get<std::string>());
      if (spec.contains("vocabulary")) c.vocabulary = spec["vocabulary"].get<std::vector<std::string>>();
      if (spec.contains("positive")) c.positive = spec["positive"].get<std::vector<std::string>>();
      if (spec.contains("negative")) c.negative = spec["negative"].get<std::vector<std::string>>();
      if (spec.contains("threshold")) c.threshold = spec["threshold"].get<double>();
      if (spec.contains("also_feature")) c.also_feature = spec["also_feature"].get<bool>();
      s.columns.push_back(std::move(c));
    }
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("schema: ") + e.what());
  }
}

inline TabularSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open schema '" + path + "'");
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw config_error("schema '" + path + "': " + e.what());
  }
  return schema_from_json(j);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split_fields(std::string_view line, char delim) {
  std::vector<std::string> out;
  if (delim == ' ') {
    std::istringstream ss{std::string(line)};
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
  }
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

struct RawRow {
  std::vector<std::string> fields;
  Split split = Split::train;
};

/// Reads rows, dropping blank/comment lines and rows with missing values.
inline std::vector<RawRow> read_rows(const std::string& path, const TabularSchema& schema, Split tag, Index* dropped) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open data file '" + path + "'");
  std::vector<RawRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view t = trim(line);
    if (t.empty()) continue;
    if (!schema.comment_prefix.empty() && t.starts_with(schema.comment_prefix)) continue;
    auto fields = split_fields(t, schema.delimiter);
    if (fields.size() != schema.columns.size()) {
      throw data_error(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(schema.columns.size()) +
                       " fields, found " + std::to_string(fields.size()));
    }
    bool missing = false;
    for (std::size_t c = 0; c < fields.size() && !missing; ++c) {
      if (schema.columns[c].kind == ColumnKind::ignore) continue;
      missing = std::find(schema.missing.begin(), schema.missing.end(), fields[c]) != schema.missing.end();
    }
    if (missing) {
      ++*dropped;
      continue;
    }
    // Validate numbers and binary labels now so errors carry the line number.
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const ColumnSchema& col = schema.columns[c];
      const bool numeric = col.kind == ColumnKind::continuous || col.threshold.has_value();
      if (numeric) {
        try {
          std::size_t used = 0;
          std::stod(fields[c], &used);
          if (used != fields[c].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
          throw data_error(path + ":" + std::to_string(line_no) + ": column '" + col.name + "' is not numeric: '" +
                           fields[c] + "'");
        }
      } else if ((col.kind == ColumnKind::target || col.kind == ColumnKind::sensitive) && !col.negative.empty()) {
        auto in_list = [&](const std::vector<std::string>& l) { return std::find(l.begin(), l.end(), fields[c]) != l.end(); };
        if (!in_list(col.positive) && !in_list(col.negative)) {
          throw data_error(path + ":" + std::to_string(line_no) + ": column '" + col.name + "' has unexpected value '" +
                           fields[c] + "'");
        }
      }
    }
    rows.push_back({std::move(fields), tag});
  }
  return rows;
}

inline double binarize(const ColumnSchema& col, const std::string& v) {
  if (col.threshold) return std::stod(v) > *col.threshold ? 1.0 : 0.0;
  return std::find(col.positive.begin(), col.positive.end(), v) != col.positive.end() ? 1.0 : 0.0;
}

}  // namespace detail

/// Reads a delimited file described by `schema`. Continuous features are z-scored with
/// train-split statistics, categoricals one-hot encoded, target and sensitive columns
/// binarised into single {0,1} rows. Rows with missing values are dropped.
inline Dataset load_tabular(const std::string& path, const TabularSchema& schema) {
  schema.validate();
  Index dropped = 0;
  auto rows = detail::read_rows(path, schema, Split::train, &dropped);
  if (schema.test_file) {
    std::filesystem::path tp(*schema.test_file);
    if (tp.is_relative()) tp = std::filesystem::path(path).parent_path() / tp;
    auto test = detail::read_rows(tp.string(), schema, Split::test, &dropped);
    rows.insert(rows.end(), std::make_move_iterator(test.begin()), std::make_move_iterator(test.end()));
  } else {
    const std::size_t n = rows.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 rng(schema.split_seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(schema.test_fraction * static_cast<double>(n)));
    for (std::size_t k = 0; k < n_test; ++k) rows[order[k]].split = Split::test;
  }
  if (rows.empty()) throw data_error("'" + path + "': no usable rows");
  const Index n = static_cast<Index>(rows.size());

  Dataset d;
  d.name = schema.name;
  d.task = TaskKind::classification;
  for (const auto& r : rows) d.split.push_back(r.split);
  if (d.count(Split::train) < 2) throw data_error("'" + path + "': fewer than two training rows");

  // Feature layout.
  struct FeatureCol {
    std::size_t col;
    bool categorical;
    Index row;
    std::map<std::string, Index> index;
  };
  std::vector<FeatureCol> feats;
  Index d_rows = 0;
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    const ColumnSchema& col = schema.columns[c];
    const bool feature = col.kind == ColumnKind::continuous || col.kind == ColumnKind::categorical ||
                         (col.kind == ColumnKind::sensitive && col.also_feature);
    if (!feature) continue;
    const bool categorical = col.kind == ColumnKind::categorical ||
                             (col.kind == ColumnKind::sensitive && !col.threshold);
    FeatureCol f{c, categorical, d_rows, {}};
    if (categorical) {
      std::vector<std::string> vocab = col.vocabulary;
      if (vocab.empty()) {
        for (const auto& r : rows)
          if (r.split == Split::train) vocab.push_back(r.fields[c]);
        std::sort(vocab.begin(), vocab.end());
        vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
      }
      for (std::size_t k = 0; k < vocab.size(); ++k) {
        f.index[vocab[k]] = static_cast<Index>(k);
        d.feature_names.push_back(col.name + "=" + vocab[k]);
      }
      d.categoricals.push_back({col.name, d_rows, vocab});
      d_rows += static_cast<Index>(vocab.size());
    } else {
      d.feature_names.push_back(col.name);
      d_rows += 1;
    }
    feats.push_back(std::move(f));
  }

  d.x = Matrix::Zero(d_rows, n);
  d.y.resize(1, n);
  d.s.resize(1, n);
  for (Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    for (const auto& f : feats) {
      const std::string& v = r.fields[f.col];
      if (f.categorical) {
        auto it = f.index.find(v);
        if (it != f.index.end()) d.x(f.row + it->second, i) = 1.0;
        else ++d.unknown_categories;
      } else {
        d.x(f.row, i) = std::stod(v);
      }
    }
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
      const ColumnSchema& col = schema.columns[c];
      if (col.kind == ColumnKind::target) d.y(0, i) = detail::binarize(col, r.fields[c]);
      if (col.kind == ColumnKind::sensitive) d.s(0, i) = detail::binarize(col, r.fields[c]);
    }
  }
  for (const auto& col : schema.columns) {
    if (col.kind == ColumnKind::target) d.target_names = {col.name};
    if (col.kind == ColumnKind::sensitive) d.sensitive_names = {col.name};
  }

  auto train = d.indices(Split::train);
  for (const auto& f : feats) {
    if (f.categorical) continue;
    Vector vals = d.x(f.row, train).transpose();
    const double mean = vals.mean();
    double sd = std::sqrt((vals.array() - mean).square().mean());
    if (!(sd > 0.0)) sd = 1.0;
    d.x.row(f.row) = (d.x.row(f.row).array() - mean) / sd;
    d.zscores.push_back({schema.columns[f.col].name, f.row, mean, sd});
  }
  validate(d);
  return d;
}

inline Dataset load_tabular(const std::string& path, const std::string& schema_path) {
  return load_tabular(path, load_schema(schema_path));
}

/// Label of sample i in a one-hot block; empty for an all-zero (unknown) encoding.
inline std::string decode_categorical(const Dataset& d, const std::string& column, Index i) {
  for (const auto& b : d.categoricals) {
    if (b.column != column) continue;
    for (std::size_t k = 0; k < b.vocabulary.size(); ++k)
      if (d.x(b.first_row + static_cast<Index>(k), i) == 1.0) return b.vocabulary[k];
    return {};
  }
  throw invalid_argument("decode_categorical: no categorical column '" + column + "'");
}

// ---- correlations -----------------------------------------------------------

inline double attribute_correlation(const Eigen::Ref<const RowVector>& a, const Eigen::Ref<const RowVector>& b) {
  if (a.size() != b.size()) throw invalid_argument("attribute_correlation: length mismatch");
  if (a.size() < 2) throw invalid_argument("attribute_correlation: need at least two samples");
  RowVector ac = a.array() - a.mean();
  RowVector bc = b.array() - b.mean();
  const double va = ac.squaredNorm(), vb = bc.squaredNorm();
  if (!(va > 0.0) || !(vb > 0.0)) throw invalid_argument("attribute_correlation: zero variance");
  return std::clamp(ac.dot(bc) / std::sqrt(va * vb), -1.0, 1.0);
}

/// First canonical correlation between the rows of X and s:
/// rho^2 = c_xs^T C_xx^{-1} c_xs / var(s).
inline double input_attribute_correlation(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const RowVector>& s) {
  if (x.cols() != s.size()) throw invalid_argument("input_attribute_correlation: length mismatch");
  if (x.cols() < 2) throw invalid_argument("input_attribute_correlation: need at least two samples");
  Matrix xc = numlin::center_cols(x);
  RowVector sc = s.array() - s.mean();
  const double nm = static_cast<double>(x.cols());
  const double vs = sc.squaredNorm() / nm;
  if (!(vs > 0.0)) throw invalid_argument("input_attribute_correlation: zero variance");
  Matrix cxx = xc * xc.transpose() / nm;
  Vector cxs = xc * sc.transpose() / nm;
  Eigen::LDLT<Matrix> ldlt(cxx);
  if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-12) {
    cxx.diagonal().array() += 1e-9 * std::max(cxx.trace(), 1e-300);
    ldlt.compute(cxx);
  }
  const double r2 = cxs.dot(ldlt.solve(cxs)) / vs;
  return std::sqrt(std::clamp(r2, 0.0, 1.0));
}

// ---- container --------------------------------------------------------------

inline nlohmann::json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  const Index r = j.at("rows").get<Index>(), c = j.at("cols").get<Index>();
  auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Index>(data.size()) != r * c) throw data_error("dataset container: matrix size mismatch");
  return Eigen::Map<const Matrix>(data.data(), r, c);
}

/// Column-major arrays plus metadata. Doubles are written in shortest round-trip form.
inline nlohmann::json to_json(const Dataset& d) {
  std::string split(d.split.size(), 't');
  for (std::size_t i = 0; i < d.split.size(); ++i) split[i] = d.split[i] == Split::train ? 'r' : 't';
  auto cats = nlohmann::json::array();
  for (const auto& b : d.categoricals) cats.push_back({{"column", b.column}, {"first_row", b.first_row}, {"vocabulary", b.vocabulary}});
  auto zs = nlohmann::json::array();
  for (const auto& z : d.zscores) zs.push_back({{"column", z.column}, {"row", z.row}, {"mean", z.mean}, {"scale", z.scale}});
  return {{"format", "arl-dataset"},
          {"version", 1},
          {"name", d.name},
          {"task", to_string(d.task)},
          {"x", matrix_to_json(d.x)},
          {"y", matrix_to_json(d.y)},
          {"s", matrix_to_json(d.s)},
          {"feature_names", d.feature_names},
          {"target_names", d.target_names},
          {"sensitive_names", d.sensitive_names},
          {"categoricals", cats},
          {"zscores", zs},
          {"split", split},
          {"unknown_categories", d.unknown_categories}};
}

inline Dataset from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "arl-dataset") throw data_error("dataset container: unexpected format tag");
    Dataset d;
    d.name = j.at("name").get<std::string>();
    d.task = j.at("task").get<std::string>() == "regression" ? TaskKind::regression : TaskKind::classification;
    d.x = matrix_from_json(j.at("x"));
    d.y = matrix_from_json(j.at("y"));
    d.s = matrix_from_json(j.at("s"));
    d.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    d.target_names = j.at("target_names").get<std::vector<std::string>>();
    d.sensitive_names = j.at("sensitive_names").get<std::vector<std::string>>();
    for (const auto& b : j.at("categoricals"))
      d.categoricals.push_back({b.at("column"), b.at("first_row"), b.at("vocabulary").get<std::vector<std::string>>()});
    for (const auto& z : j.at("zscores")) d.zscores.push_back({z.at("column"), z.at("row"), z.at("mean"), z.at("scale")});
    for (char c : j.at("split").get<std::string>()) d.split.push_back(c == 'r' ? Split::train : Split::test);
    d.unknown_categories = j.at("unknown_categories").get<Index>();
    validate(d);
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw data_error(std::string("dataset container: ") + e.what());
  }
}

inline void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write dataset '" + path + "'");
  out << to_json(d).dump() << '\n';
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open dataset '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw data_error("dataset '" + path + "': " + e.what());
  }
  return from_json(j);
}

}  // namespace arl::datasets
