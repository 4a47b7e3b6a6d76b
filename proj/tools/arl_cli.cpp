#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "arl/cli.hpp"

namespace {

int with_config(const std::string& path, const std::function<int(const arl::config::ExperimentConfig&)>& cmd) {
  return arl::cli::guarded([&] { return cmd(arl::config::load(path)); });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial representation learning with closed-form kernel ridge heads"};
  app.require_subcommand(1);
  app.footer("Exit codes: 0 ok, 2 config error, 3 data error, 4 divergence, 5 sweep with < 80% successful cells.");
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

  std::string config_path, checkpoint, csv, out_path;
  unsigned threads = 1;
  std::optional<double> chance, var_s;
  long long n_train = 4000, n_test = 1000;
  std::uint64_t seed = 0;

  auto* dim = app.add_subcommand("dim-analyze", "Eigenvalue criterion for the optimal embedding dimension");
  dim->add_option("config", config_path, "Experiment config JSON")->required()->check(CLI::ExistingFile);

  auto* train = app.add_subcommand("train", "Train one encoder; writes history.jsonl and encoder.ckpt");
  train->add_option("config", config_path, "Experiment config JSON")->required()->check(CLI::ExistingFile);

  auto* sweep = app.add_subcommand("sweep", "Lambda x seed sweep with trade-off fronts per method");
  sweep->add_option("config", config_path, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--threads", threads, "Maximum concurrent sweep cells")->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "Fit evaluation heads on a frozen encoder checkpoint");
  eval->add_option("config", config_path, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("checkpoint", checkpoint, "Encoder checkpoint")->required();

  auto* hv = app.add_subcommand("hv", "Hypervolume of a trade-off points CSV");
  hv->add_option("csv", csv, "Points CSV")->required();
  hv->add_option("--chance", chance, "Majority rate of the sensitive attribute (accuracy points)");
  hv->add_option("--var-s", var_s, "Variance of the sensitive attribute (mse points)");

  auto* gen = app.add_subcommand("gen-gaussian", "Write the Gaussian-mixture dataset container");
  gen->add_option("out", out_path, "Output path")->required();
  gen->add_option("--n-train", n_train, "Training samples")->capture_default_str();
  gen->add_option("--n-test", n_test, "Test samples")->capture_default_str();
  gen->add_option("--seed", seed, "Sampling seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : arl::cli::kExitConfig;
  }
  if (quiet) arl::log::set_level(arl::log::Level::warn);

  if (*dim) return with_config(config_path, [](const auto& c) { return arl::cli::cmd_dim_analyze(c); });
  if (*train) return with_config(config_path, [](const auto& c) { return arl::cli::cmd_train(c); });
  if (*sweep) return with_config(config_path, [&](const auto& c) { return arl::cli::cmd_sweep(c, threads); });
  if (*eval) return with_config(config_path, [&](const auto& c) { return arl::cli::cmd_eval(c, checkpoint); });
  if (*hv) return arl::cli::guarded([&] { return arl::cli::cmd_hv(csv, {chance, var_s}); });
  return arl::cli::guarded([&] { return arl::cli::cmd_gen_gaussian(n_train, n_test, seed, out_path); });
}
