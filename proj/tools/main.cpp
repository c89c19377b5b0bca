// causalsafe: gen-data, convert, fit-q, run-control, reproduce.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "causalsafe/runner.hpp"

namespace {

using causalsafe::ExperimentConfig;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& common, bool with_seed) {
  cmd->add_option("--config", common.config_path, "JSON experiment config")
      ->required();
  if (with_seed) cmd->add_option("--seed", common.seed, "Override the root seed");
  cmd->add_option("--out", common.out, "Output file or directory");
}

ExperimentConfig load(const Common& common) {
  return causalsafe::load_config(common.config_path);
}

std::string out_or(const Common& common, const std::string& fallback) {
  return common.out.empty() ? fallback : common.out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic safety certificates for confounded MDPs"};
  app.require_subcommand(1);

  Common gen, conv, fit, control, repro;
  std::string conv_in, fit_in, q_path;
  std::optional<unsigned> threads;

  auto* gen_cmd = app.add_subcommand("gen-data", "Log raw offline episodes");
  add_common(gen_cmd, gen, true);

  auto* conv_cmd = app.add_subcommand("convert", "Absorbing conversion of a raw dataset");
  add_common(conv_cmd, conv, false);
  conv_cmd->add_option("--in", conv_in, "Raw dataset JSONL")->required();

  auto* fit_cmd = app.add_subcommand("fit-q", "Front-door fitted Q from offline data");
  add_common(fit_cmd, fit, false);
  fit_cmd->add_option("--in", fit_in, "Dataset JSONL (raw or converted)");

  auto* control_cmd = app.add_subcommand("run-control", "Write controlled trajectories");
  add_common(control_cmd, control, true);
  control_cmd->add_option("--q", q_path, "Q table CSV (default: oracle)");

  auto* repro_cmd = app.add_subcommand("reproduce", "Monte Carlo and exact safety curves");
  add_common(repro_cmd, repro, true);
  repro_cmd->add_option("--q", q_path, "Q table CSV (default: oracle)");
  repro_cmd->add_option("--threads", threads, "Worker threads (0 = hardware)");

  CLI11_PARSE(app, argc, argv);

  return causalsafe::run_guarded(
      [&]() -> int {
        if (*gen_cmd) {
          ExperimentConfig c = load(gen);
          if (gen.seed) c.dataset.seed = *gen.seed;
          return causalsafe::cmd_gen_data(
              c, out_or(gen, c.output_dir + "/dataset.jsonl"), std::cout);
        }
        if (*conv_cmd) {
          const ExperimentConfig c = load(conv);
          return causalsafe::cmd_convert(
              c, conv_in, out_or(conv, c.output_dir + "/converted.jsonl"),
              std::cout);
        }
        if (*fit_cmd) {
          const ExperimentConfig c = load(fit);
          return causalsafe::cmd_fit_q(c, fit_in, out_or(fit, c.output_dir + "/fit"),
                                       std::cout);
        }
        if (*control_cmd) {
          ExperimentConfig c = load(control);
          if (control.seed) c.evaluation.seed = *control.seed;
          if (!q_path.empty()) c.q_source = q_path;
          return causalsafe::cmd_run_control(
              c, out_or(control, c.output_dir + "/control"), std::cout);
        }
        ExperimentConfig c = load(repro);
        if (repro.seed) c.evaluation.seed = *repro.seed;
        if (!q_path.empty()) c.q_source = q_path;
        if (threads) c.evaluation.threads = *threads;
        return causalsafe::cmd_reproduce(c, out_or(repro, c.output_dir + "/reproduce"),
                                         std::cout);
      },
      std::cerr);
}
