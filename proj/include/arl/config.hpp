#pragma once

// Experiment configuration: one JSON document with blocks
//   dataset, method, sweep, evaluation, dim_analyze, output_dir
// Unknown keys are rejected; missing keys take the defaults below.
// Relative dataset paths resolve against the config file's directory.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "arl/datasets.hpp"
#include "arl/dimension.hpp"
#include "arl/evaluation.hpp"
#include "arl/training.hpp"

namespace arl::config {

using nlohmann::json;

enum class DatasetKind { gaussian, tabular, container };

struct DatasetBlock {
  DatasetKind kind = DatasetKind::gaussian;
  Index n_train = 4000;
  Index n_test = 1000;
  std::uint64_t seed = 0;
  std::string path;    // tabular data file or dataset container
  std::string schema;  // tabular schema sidecar
};

struct SweepBlock {
  std::vector<double> lambdas = training::default_lambda_grid();
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::vector<training::Method> methods{training::Method::optnet};
  std::vector<double> quantiles{0.5};
};

struct DimBlock {
  std::vector<double> lambdas{0.0, 0.5, 1.0};
  dimension::Mode mode = dimension::Mode::lowrank;
  std::optional<Index> subsample;
  std::uint64_t subsample_seed = 0;
};

struct ExperimentConfig {
  DatasetBlock dataset;
  training::TrainConfig method;
  SweepBlock sweep;
  evaluation::HeadSpec evaluation;
  DimBlock dim_analyze;
  std::string output_dir = "arl-out";
};

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw config_error(where + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw config_error(where + ": unknown key '" + k + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline std::vector<Index> widths(const json& j, const char* key, std::vector<Index> fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<std::vector<Index>>();
}

inline std::string resolve(const std::string& p, const std::filesystem::path& base) {
  if (p.empty()) return p;
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path.string() : (base / path).lexically_normal().string();
}

}  // namespace detail

/// Parses and validates; `base` is the directory relative dataset paths resolve against.
inline ExperimentConfig parse(const json& j, const std::filesystem::path& base = {}) {
  using detail::read;
  ExperimentConfig c;
  try {
    detail::reject_unknown(j, {"dataset", "method", "sweep", "evaluation", "dim_analyze", "output_dir"}, "config");
    read(j, "output_dir", c.output_dir);

    if (j.contains("dataset")) {
      const json& d = j["dataset"];
      detail::reject_unknown(d, {"kind", "n_train", "n_test", "seed", "path", "schema"}, "dataset");
      const std::string kind = d.value("kind", "gaussian");
      if (kind == "gaussian") c.dataset.kind = DatasetKind::gaussian;
      else if (kind == "tabular") c.dataset.kind = DatasetKind::tabular;
      else if (kind == "container") c.dataset.kind = DatasetKind::container;
      else throw config_error("dataset: unknown kind '" + kind + "'");
      read(d, "n_train", c.dataset.n_train);
      read(d, "n_test", c.dataset.n_test);
      read(d, "seed", c.dataset.seed);
      read(d, "path", c.dataset.path);
      read(d, "schema", c.dataset.schema);
      c.dataset.path = detail::resolve(c.dataset.path, base);
      c.dataset.schema = detail::resolve(c.dataset.schema, base);
      if (c.dataset.kind != DatasetKind::gaussian && c.dataset.path.empty()) throw config_error("dataset: 'path' is required");
      if (c.dataset.kind == DatasetKind::tabular && c.dataset.schema.empty()) throw config_error("dataset: 'schema' is required");
      if (c.dataset.kind == DatasetKind::gaussian && (c.dataset.n_train < 1 || c.dataset.n_test < 1)) {
        throw config_error("dataset: n_train and n_test must be positive");
      }
    }

    if (j.contains("method")) {
      const json& m = j["method"];
      detail::reject_unknown(m, {"name", "lambda", "kernel", "gamma_y", "gamma_s", "batch_size", "epochs", "lr",
                                 "weight_decay", "seed", "encoder_hidden", "activation", "embedding_dim",
                                 "instance_norm", "target_head_hidden", "adversary_head_hidden", "grad_route"},
                             "method");
      auto& t = c.method;
      if (m.contains("name")) t.method = training::method_from_string(m["name"].get<std::string>());
      read(m, "lambda", t.lambda);
      if (m.contains("kernel")) {
        const json& k = m["kernel"];
        detail::reject_unknown(k, {"family", "scale"}, "method.kernel");
        t.kernel.family = kernels::family_from_string(k.value("family", "rbf"));
        t.kernel.scale = k.value("scale", 1.0);
      }
      read(m, "gamma_y", t.gamma_y);
      read(m, "gamma_s", t.gamma_s);
      read(m, "batch_size", t.batch_size);
      read(m, "epochs", t.epochs);
      read(m, "lr", t.lr);
      read(m, "weight_decay", t.weight_decay);
      read(m, "seed", t.seed);
      t.encoder_hidden = detail::widths(m, "encoder_hidden", t.encoder_hidden);
      if (m.contains("activation")) t.activation = encoder::activation_from_string(m["activation"].get<std::string>());
      if (m.contains("embedding_dim") && !m["embedding_dim"].is_null()) t.embedding_dim = m["embedding_dim"].get<Index>();
      if (m.contains("instance_norm") && !m["instance_norm"].is_null()) t.instance_norm = m["instance_norm"].get<bool>();
      t.target_head_hidden = detail::widths(m, "target_head_hidden", t.target_head_hidden);
      t.adversary_head_hidden = detail::widths(m, "adversary_head_hidden", t.adversary_head_hidden);
      if (m.contains("grad_route")) {
        const std::string r = m["grad_route"].get<std::string>();
        if (r == "resolvent") t.route = ridge::GradRoute::resolvent;
        else if (r == "spectral") t.route = ridge::GradRoute::spectral;
        else if (r == "projector") t.route = ridge::GradRoute::projector;
        else throw config_error("method: unknown grad_route '" + r + "'");
      }
      t.validate();
    }

    if (j.contains("sweep")) {
      const json& s = j["sweep"];
      detail::reject_unknown(s, {"lambdas", "seeds", "methods", "quantiles"}, "sweep");
      read(s, "lambdas", c.sweep.lambdas);
      read(s, "seeds", c.sweep.seeds);
      read(s, "quantiles", c.sweep.quantiles);
      if (s.contains("methods")) {
        c.sweep.methods.clear();
        for (const auto& name : s["methods"]) c.sweep.methods.push_back(training::method_from_string(name.get<std::string>()));
      }
      if (c.sweep.lambdas.empty() || c.sweep.seeds.empty() || c.sweep.methods.empty()) {
        throw config_error("sweep: lambdas, seeds and methods must be non-empty");
      }
      for (double l : c.sweep.lambdas)
        if (!(l >= 0.0 && l <= 1.0)) throw config_error("sweep: lambda values must lie in [0, 1]");
      for (double q : c.sweep.quantiles)
        if (!(q > 0.0 && q < 1.0)) throw config_error("sweep: quantiles must lie in (0, 1)");
    }

    if (j.contains("evaluation")) {
      const json& e = j["evaluation"];
      detail::reject_unknown(e, {"hidden", "activation", "epochs", "lr", "weight_decay", "batch_size"}, "evaluation");
      c.evaluation.hidden = detail::widths(e, "hidden", c.evaluation.hidden);
      if (e.contains("activation")) c.evaluation.activation = encoder::activation_from_string(e["activation"].get<std::string>());
      read(e, "epochs", c.evaluation.epochs);
      read(e, "lr", c.evaluation.lr);
      read(e, "weight_decay", c.evaluation.weight_decay);
      read(e, "batch_size", c.evaluation.batch_size);
      c.evaluation.validate();
    }

    if (j.contains("dim_analyze")) {
      const json& d = j["dim_analyze"];
      detail::reject_unknown(d, {"lambdas", "mode", "subsample", "subsample_seed"}, "dim_analyze");
      read(d, "lambdas", c.dim_analyze.lambdas);
      if (d.contains("mode")) c.dim_analyze.mode = dimension::mode_from_string(d["mode"].get<std::string>());
      if (d.contains("subsample") && !d["subsample"].is_null()) c.dim_analyze.subsample = d["subsample"].get<Index>();
      read(d, "subsample_seed", c.dim_analyze.subsample_seed);
      for (double l : c.dim_analyze.lambdas)
        if (!(l >= 0.0 && l <= 1.0)) throw config_error("dim_analyze: lambda values must lie in [0, 1]");
    }
  } catch (const json::exception& e) {
    throw config_error(std::string("config: ") + e.what());
  }
  return c;
}

inline ExperimentConfig load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw config_error("config '" + path + "': " + e.what());
  }
  return parse(j, std::filesystem::path(path).parent_path());
}

inline std::string_view to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::gaussian: return "gaussian";
    case DatasetKind::tabular: return "tabular";
    case DatasetKind::container: return "container";
  }
  return "?";
}

inline std::string_view to_string(ridge::GradRoute r) {
  switch (r) {
    case ridge::GradRoute::spectral: return "spectral";
    case ridge::GradRoute::resolvent: return "resolvent";
    case ridge::GradRoute::projector: return "projector";
  }
  return "?";
}

/// Fully resolved configuration, every default spelled out. Parsing it back yields the same config.
inline json to_json(const ExperimentConfig& c) {
  const auto& t = c.method;
  json methods = json::array();
  for (auto m : c.sweep.methods) methods.push_back(training::to_string(m));
  json dataset{{"kind", to_string(c.dataset.kind)}};
  if (c.dataset.kind == DatasetKind::gaussian) {
    dataset["n_train"] = c.dataset.n_train;
    dataset["n_test"] = c.dataset.n_test;
    dataset["seed"] = c.dataset.seed;
  } else {
    dataset["path"] = c.dataset.path;
    if (c.dataset.kind == DatasetKind::tabular) dataset["schema"] = c.dataset.schema;
  }
  return {{"dataset", dataset},
          {"method",
           {{"name", training::to_string(t.method)},
            {"lambda", t.lambda},
            {"kernel", {{"family", kernels::to_string(t.kernel.family)}, {"scale", t.kernel.scale}}},
            {"gamma_y", t.gamma_y},
            {"gamma_s", t.gamma_s},
            {"batch_size", t.batch_size},
            {"epochs", t.epochs},
            {"lr", t.lr},
            {"weight_decay", t.weight_decay},
            {"seed", t.seed},
            {"encoder_hidden", t.encoder_hidden},
            {"activation", encoder::to_string(t.activation)},
            {"embedding_dim", t.embedding_dim ? json(*t.embedding_dim) : json(nullptr)},
            {"instance_norm", t.instance_norm ? json(*t.instance_norm) : json(nullptr)},
            {"target_head_hidden", t.target_head_hidden},
            {"adversary_head_hidden", t.adversary_head_hidden},
            {"grad_route", to_string(t.route)}}},
          {"sweep", {{"lambdas", c.sweep.lambdas}, {"seeds", c.sweep.seeds}, {"methods", methods}, {"quantiles", c.sweep.quantiles}}},
          {"evaluation",
           {{"hidden", c.evaluation.hidden},
            {"activation", encoder::to_string(c.evaluation.activation)},
            {"epochs", c.evaluation.epochs},
            {"lr", c.evaluation.lr},
            {"weight_decay", c.evaluation.weight_decay},
            {"batch_size", c.evaluation.batch_size}}},
          {"dim_analyze",
           {{"lambdas", c.dim_analyze.lambdas},
            {"mode", dimension::to_string(c.dim_analyze.mode)},
            {"subsample", c.dim_analyze.subsample ? json(*c.dim_analyze.subsample) : json(nullptr)},
            {"subsample_seed", c.dim_analyze.subsample_seed}}},
          {"output_dir", c.output_dir}};
}

/// FNV-1a 64 of a byte string, as 16 hex digits.
inline std::string content_hash(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = hex[h & 0xf];
  return out;
}

inline std::string config_hash(const ExperimentConfig& c) { return content_hash(to_json(c).dump()); }

inline datasets::Dataset load_dataset(const DatasetBlock& d) {
  switch (d.kind) {
    case DatasetKind::gaussian: return datasets::gaussian_mixture(d.n_train, d.n_test, d.seed);
    case DatasetKind::tabular: return datasets::load_tabular(d.path, d.schema);
    case DatasetKind::container: return datasets::load_dataset(d.path);
  }
  throw invalid_argument("unknown dataset kind");
}

}  // namespace arl::config
