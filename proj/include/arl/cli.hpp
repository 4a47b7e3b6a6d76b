#pragma once

// Subcommand implementations. Each command takes a parsed config and returns an exit code;
// `guarded` maps exceptions onto the documented codes.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "arl/config.hpp"
#include "arl/datasets.hpp"
#include "arl/dimension.hpp"
#include "arl/error.hpp"
#include "arl/evaluation.hpp"
#include "arl/log.hpp"
#include "arl/training.hpp"

namespace arl::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using config::ExperimentConfig;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitDivergence = 4;
inline constexpr int kExitPartialSweep = 5;

/// Minimum fraction of successful sweep cells for exit code 0.
inline constexpr double kSweepSuccessFraction = 0.8;

inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_argument:
    case ErrorKind::config: return kExitConfig;
    case ErrorKind::data: return kExitData;
    case ErrorKind::divergence: return kExitDivergence;
  }
  return kExitInternal;
}

inline int guarded(const std::function<int()>& body, std::ostream& err = std::cerr) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInternal;
  }
}

/// `ARL_OUT` wins over the config's output_dir.
inline fs::path output_dir(const ExperimentConfig& c) {
  if (const char* env = std::getenv("ARL_OUT"); env && *env) return env;
  return c.output_dir;
}

inline fs::path prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw data_error("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

inline void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw data_error("write failed for '" + path.string() + "'");
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json provenance(const ExperimentConfig& c) {
  return {{"config", config::to_json(c)}, {"config_hash", config::config_hash(c)}};
}

inline datasets::Dataset load_dataset(const ExperimentConfig& c) {
  const auto& d = c.dataset;
  if (d.kind != config::DatasetKind::gaussian && !fs::exists(d.path)) throw data_error("dataset file not found: " + d.path);
  if (d.kind == config::DatasetKind::tabular && !fs::exists(d.schema)) throw data_error("schema file not found: " + d.schema);
  return config::load_dataset(d);
}

// ---- dim-analyze ------------------------------------------------------------

inline int cmd_dim_analyze(const ExperimentConfig& c, std::ostream& out = std::cout) {
  const datasets::Dataset d = load_dataset(c);
  const auto train = datasets::part(d, datasets::Split::train);
  dimension::DimOptions opts{c.dim_analyze.mode, c.dim_analyze.subsample, c.dim_analyze.subsample_seed};
  json reports = json::array();
  for (double lambda : c.dim_analyze.lambdas) {
    const dimension::DimReport rep = dimension::optimal_dim(train.y, train.s, lambda, opts);
    if (rep.optimal_r == 0) log::warn("optimal_r is 0 at lambda = " + evaluation::format_double(lambda) + "; training clamps to r = 1");
    reports.push_back({{"lambda", lambda},
                       {"eigenvalues", std::vector<double>(rep.eigenvalues.begin(), rep.eigenvalues.end())},
                       {"optimal_r", rep.optimal_r},
                       {"mode", dimension::to_string(rep.method)}});
    out << "lambda=" << evaluation::format_double(lambda) << " optimal_r=" << rep.optimal_r << '\n';
  }
  json doc = provenance(c);
  doc["dataset"] = d.name;
  doc["reports"] = reports;
  write_file(prepare_dir(output_dir(c)) / "dim.json", doc.dump(2) + '\n');
  return kExitOk;
}

// ---- train ------------------------------------------------------------------

inline json epoch_json(const training::EpochRecord& r) {
  return {{"record", "epoch"}, {"epoch", r.epoch}, {"objective", r.objective}, {"j_target", r.j_target}, {"j_sensitive", r.j_sensitive}};
}

/// history.jsonl: a header record, one record per epoch, and a summary record. Wall-clock
/// times go to timing.json so reruns produce identical history bytes.
inline int cmd_train(const ExperimentConfig& c, std::ostream& out = std::cout) {
  const datasets::Dataset d = load_dataset(c);
  const fs::path dir = prepare_dir(output_dir(c));
  json header = provenance(c);
  header["record"] = "header";
  header["dataset"] = d.name;
  std::string history = header.dump() + '\n';
  json seconds = json::array();

  auto flush = [&] {
    write_file(dir / "history.jsonl", history);
    write_file(dir / "timing.json", json{{"seconds_per_epoch", seconds}}.dump() + '\n');
  };
  training::TrainResult tr;
  try {
    tr = training::train(c.method, d, [&](const training::EpochRecord& r) {
      history += epoch_json(r).dump() + '\n';
      seconds.push_back(r.seconds);
      return true;
    });
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::divergence) flush();
    throw;
  }

  json ckpt = encoder::to_json(tr.encoder);
  ckpt["provenance"] = provenance(c);
  write_file(dir / "encoder.ckpt", ckpt.dump() + '\n');
  const auto& last = tr.history.last();
  history += json{{"record", "summary"},
                  {"embedding_dim", tr.history.embedding_dim},
                  {"epochs", tr.history.epochs.size()},
                  {"final_j_target", last.j_target},
                  {"final_j_sensitive", last.j_sensitive},
                  {"encoder_checksum", encoder::checksum(tr.encoder)}}
                 .dump() +
             '\n';
  flush();
  out << "final J_y=" << evaluation::format_double(last.j_target) << " J_s=" << evaluation::format_double(last.j_sensitive)
      << " r=" << tr.history.embedding_dim << '\n';
  return kExitOk;
}

// ---- sweep ------------------------------------------------------------------

/// Normalised per-seed point sets, the runs an attainment surface aggregates.
inline std::vector<std::vector<evaluation::Point2>> runs_by_seed(const std::vector<evaluation::TradeoffPoint>& pts,
                                                                 const evaluation::Normalization& norm) {
  std::map<std::uint64_t, std::vector<evaluation::Point2>> by_seed;
  for (const auto& p : pts) {
    auto& run = by_seed[p.seed];
    if (p.ok()) run.push_back(norm.apply(p));
  }
  std::vector<std::vector<evaluation::Point2>> runs;
  for (auto& [seed, run] : by_seed) runs.push_back(std::move(run));
  return runs;
}

inline std::string quantile_tag(double q) { return "attainment_q" + evaluation::format_double(q) + ".csv"; }

/// Writes <out>/<method>/{tradeoff.csv, front.json, attainment_q*.csv} per method and
/// <out>/manifest.json with the resolved config and a hash of every artifact.
inline int cmd_sweep(const ExperimentConfig& c, unsigned threads = 1, std::ostream& out = std::cout) {
  const datasets::Dataset d = load_dataset(c);
  const fs::path dir = prepare_dir(output_dir(c));
  const evaluation::Normalization norm = evaluation::normalization_for(d);
  json files = json::object();
  json hypervolumes = json::object();
  std::size_t cells = 0, failed = 0;

  auto emit = [&](const fs::path& rel, const std::string& content) {
    write_file(dir / rel, content);
    files[rel.generic_string()] = config::content_hash(content);
  };

  for (training::Method m : c.sweep.methods) {
    training::TrainConfig base = c.method;
    base.method = m;
    const std::string name(training::to_string(m));
    prepare_dir(dir / name);
    training::SweepOptions opts;
    opts.threads = threads;
    opts.on_cell = [&](const evaluation::TradeoffPoint& p) {
      log::info(name + " lambda=" + evaluation::format_double(p.lambda) + " seed=" + std::to_string(p.seed) +
                (p.ok() ? " target=" + evaluation::format_double(p.target_metric) +
                              " adversary=" + evaluation::format_double(p.adversary_metric)
                        : " failed"));
    };
    const auto pts = training::sweep(base, c.sweep.lambdas, c.sweep.seeds, d, c.evaluation, opts);
    const evaluation::FrontReport rep = evaluation::front_report(pts, norm);
    cells += pts.size();
    failed += rep.failed;

    json front = evaluation::to_json(rep);
    front["method"] = name;
    front["provenance"] = provenance(c);
    json failures = json::array();
    for (const auto& p : pts)
      if (!p.ok()) failures.push_back(evaluation::to_json(p));
    front["failures"] = failures;

    emit(fs::path(name) / "tradeoff.csv", evaluation::points_csv(pts));
    emit(fs::path(name) / "front.json", front.dump(2) + '\n');
    const auto runs = runs_by_seed(pts, norm);
    for (double q : c.sweep.quantiles) {
      emit(fs::path(name) / quantile_tag(q), evaluation::surface_csv(evaluation::attainment_surface(runs, q, {true, true})));
    }
    hypervolumes[name] = rep.hypervolume;
    out << name << ": hypervolume=" << evaluation::format_double(rep.hypervolume) << " failed=" << rep.failed << '/'
        << pts.size() << '\n';
  }

  json manifest = provenance(c);
  manifest["dataset"] = d.name;
  manifest["files"] = files;
  manifest["hypervolume"] = hypervolumes;
  manifest["cells"] = cells;
  manifest["failed_cells"] = failed;
  write_file(dir / "manifest.json", manifest.dump(2) + '\n');

  const double success = cells ? 1.0 - static_cast<double>(failed) / static_cast<double>(cells) : 0.0;
  if (success < kSweepSuccessFraction) {
    log::error("only " + std::to_string(cells - failed) + " of " + std::to_string(cells) + " sweep cells succeeded");
    return kExitPartialSweep;
  }
  return kExitOk;
}

// ---- eval -------------------------------------------------------------------

/// Fits the configured heads on a frozen checkpoint and reports test metrics.
inline int cmd_eval(const ExperimentConfig& c, const std::string& checkpoint, std::ostream& out = std::cout) {
  const datasets::Dataset d = load_dataset(c);
  const encoder::EncoderParams enc = encoder::load_checkpoint(checkpoint);
  if (enc.spec.input_dim != d.x.rows()) {
    throw data_error("checkpoint expects " + std::to_string(enc.spec.input_dim) + " input features, dataset has " +
                     std::to_string(d.x.rows()));
  }
  evaluation::TradeoffPoint pt = evaluation::evaluate_frozen(enc, d, c.evaluation, c.method.seed);
  pt.lambda = c.method.lambda;
  json doc = provenance(c);
  doc["checkpoint"] = checkpoint;
  doc["point"] = evaluation::to_json(pt);
  write_file(prepare_dir(output_dir(c)) / "eval.json", doc.dump(2) + '\n');
  if (!pt.ok()) throw diverged(pt.error);
  out << "target_" << evaluation::to_string(pt.kind) << '=' << evaluation::format_double(pt.target_metric) << " adversary_"
      << evaluation::to_string(pt.kind) << '=' << evaluation::format_double(pt.adversary_metric) << '\n';
  return kExitOk;
}

// ---- hv ---------------------------------------------------------------------

struct HvOptions {
  std::optional<double> chance;  // accuracy points
  std::optional<double> var_s;   // mse points
};

/// Hypervolume of a points CSV. The normalisation constants come from the options.
inline int cmd_hv(const std::string& csv, const HvOptions& o, std::ostream& out = std::cout) {
  const auto pts = evaluation::load_points_csv(csv);
  if (pts.empty()) throw data_error("points csv '" + csv + "' has no rows");
  evaluation::Normalization norm;
  norm.kind = pts.front().kind;
  for (const auto& p : pts)
    if (p.kind != norm.kind) throw data_error("points csv '" + csv + "' mixes metric kinds");
  if (norm.kind == evaluation::MetricKind::accuracy) {
    if (!o.chance) throw config_error("hv: accuracy points need --chance");
    if (!(*o.chance > 0.0 && *o.chance < 1.0)) throw config_error("hv: --chance must lie in (0, 1)");
    norm.chance = *o.chance;
  } else {
    if (!o.var_s) throw config_error("hv: mse points need --var-s");
    if (!(*o.var_s > 0.0)) throw config_error("hv: --var-s must be positive");
    norm.var_s = *o.var_s;
  }
  out << evaluation::to_json(evaluation::front_report(pts, norm)).dump(2) << '\n';
  return kExitOk;
}

// ---- gen-gaussian -----------------------------------------------------------

inline int cmd_gen_gaussian(Index n_train, Index n_test, std::uint64_t seed, const std::string& path,
                            std::ostream& out = std::cout) {
  if (n_train < 1 || n_test < 1) throw config_error("gen-gaussian: sample counts must be positive");
  const fs::path p(path);
  if (p.has_parent_path()) prepare_dir(p.parent_path());
  datasets::save_dataset(datasets::gaussian_mixture(n_train, n_test, seed), path);
  out << "wrote " << path << '\n';
  return kExitOk;
}

}  // namespace arl::cli
