#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "causalsafe/evaluation.hpp"
#include "causalsafe/runner.hpp"

using namespace causalsafe;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("causalsafe_runner_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CAUSALSAFE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string toy_config(const fs::path& dir, int episodes, double epsilon = 0.2) {
  nlohmann::json j;
  j["env"] = "mediator-toy";
  j["horizon"] = 3;
  j["epsilon"] = epsilon;
  j["x0"] = {0};
  j["controllers"] = {"proposed"};
  j["dataset"] = {{"n_episodes", episodes}, {"seed", 7}, {"path", ""}};
  j["evaluation"] = {{"batches", 10}, {"trajectories", 20}, {"seed", 3}, {"threads", 2}};
  j["output_dir"] = dir.string();
  const fs::path path = dir / "input.json";
  std::ofstream(path) << j.dump(2);
  return path.string();
}

std::string exact_rows(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.find(",exact_") != std::string::npos) out += line + "\n";
  }
  return out;
}

}  // namespace

TEST_CASE("config parsing") {
  const ExperimentConfig d = load_config(fs::path(CAUSALSAFE_CONFIG_DIR) / "driving.json");
  CHECK(d.env == "driving");
  CHECK(d.horizon == 10);
  CHECK(d.epsilon == 0.2);
  CHECK(d.x0 == std::vector<int>{0, 0});
  CHECK(d.controllers == std::vector<std::string>{"proposed", "dtcbf"});
  CHECK(d.evaluation.batches == 100);
  CHECK(d.evaluation.trajectories == 100);
  CHECK_NOTHROW(d.validate());

  const ExperimentConfig t = load_config(fs::path(CAUSALSAFE_CONFIG_DIR) / "mediator_toy.json");
  CHECK(t.env == "mediator-toy");
  CHECK(t.horizon == 3);

  // Defaults fill in, and the normalized form parses back to itself.
  const ExperimentConfig empty = parse_config("{}");
  CHECK(empty.env == "driving");
  CHECK_FALSE(empty.feasibility_slack.has_value());
  CHECK(config_to_json(parse_config(config_to_json(d))) == config_to_json(d));

  CHECK_THROWS_AS(parse_config("{\"horizn\": 3}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"dataset\": {\"episodes\": 3}}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"horizon\": \"ten\"}"), ConfigError);
  CHECK_THROWS_AS(parse_config("not json"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"selection_mode\": \"closest\"}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"epsilon\": 1.5}").validate(), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"env\": \"grid\"}").validate(), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"env\": \"mismatch\", \"x0\": [0]}").validate(),
                  ConfigError);
  CHECK_THROWS_AS(parse_config("{\"fit_q\": {\"mode\": \"magic\"}}").validate(), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("commands compose on the mediator toy system") {
  const fs::path dir = scratch("compose");
  const std::string cfg = toy_config(dir, 20000);
  CHECK(run_cli("gen-data --config " + cfg) == 0);
  CHECK(fs::exists(dir / "dataset.jsonl"));
  CHECK(run_cli("convert --config " + cfg + " --in " + (dir / "dataset.jsonl").string()) == 0);
  CHECK(fs::exists(dir / "converted.jsonl"));
  CHECK(run_cli("fit-q --config " + cfg + " --in " + (dir / "converted.jsonl").string()) == 0);
  for (const char* f : {"qm.csv", "qm_cells.csv", "q.csv", "fit.json", "config.json"}) {
    CHECK(fs::exists(dir / "fit" / f));
  }
  const auto fit = nlohmann::json::parse(slurp(dir / "fit" / "fit.json"));
  CHECK(fit.at("iterations").get<int>() <= 4);

  const std::string q = (dir / "fit" / "q.csv").string();
  CHECK(run_cli("run-control --config " + cfg + " --q " + q) == 0);
  CHECK(fs::exists(dir / "control" / "trajectories_proposed.jsonl"));
  const int code = run_cli("reproduce --config " + cfg + " --q " + q);
  CHECK((code == 0 || code == 1));
  CHECK(fs::exists(dir / "reproduce" / "curves.csv"));
  CHECK(fs::exists(dir / "reproduce" / "summary.json"));
  CHECK(fs::exists(dir / "reproduce" / "config.json"));

  // Fitting straight from the raw file converts it on the way.
  CHECK(run_cli("fit-q --config " + cfg + " --in " + (dir / "dataset.jsonl").string() +
                " --out " + (dir / "fit_raw").string()) == 0);
  CHECK(slurp(dir / "fit_raw" / "q.csv") == slurp(dir / "fit" / "q.csv"));
  fs::remove_all(dir);
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("codes");
  const std::string cfg = toy_config(dir, 0);
  CHECK(run_cli("gen-data --config " + cfg) == 0);
  CHECK(run_cli("fit-q --config " + cfg + " --in " + (dir / "dataset.jsonl").string()) == 2);
  CHECK(run_cli("reproduce --config /nonexistent.json") == 2);
  CHECK(run_cli("fit-q --config " + std::string(CAUSALSAFE_CONFIG_DIR) +
                "/driving.json --in " + (dir / "dataset.jsonl").string()) == 2);
  CHECK(run_cli("no-such-command") != 0);

  // A threshold of 0.001 cannot fail.
  const std::string loose = toy_config(dir, 10, 0.999);
  CHECK(run_cli("reproduce --config " + loose) == 0);
  fs::remove_all(dir);
}

TEST_CASE("reproduce is deterministic; the seed moves only Monte Carlo rows") {
  const fs::path dir = scratch("determinism");
  ExperimentConfig c = parse_config(slurp(toy_config(dir, 10)));
  std::ostringstream log;
  c.evaluation.threads = 1;
  cmd_reproduce(c, dir / "a", log);
  c.evaluation.threads = 3;
  cmd_reproduce(c, dir / "b", log);
  const std::string a = slurp(dir / "a" / "curves.csv");
  CHECK_FALSE(a.empty());
  CHECK(a == slurp(dir / "b" / "curves.csv"));

  c.evaluation.seed = 4;
  cmd_reproduce(c, dir / "c", log);
  const std::string other = slurp(dir / "c" / "curves.csv");
  CHECK(other != a);
  CHECK(exact_rows(other) == exact_rows(a));
  CHECK_FALSE(exact_rows(a).empty());

  const auto summary = nlohmann::json::parse(slurp(dir / "a" / "summary.json"));
  CHECK(summary.at("env") == "mediator-toy");
  CHECK(summary.contains("value_x0"));
  fs::remove_all(dir);
}

TEST_CASE("guarded commands map errors to exit codes") {
  std::ostringstream err;
  CHECK(run_guarded([] { return 0; }, err) == 0);
  CHECK(run_guarded([]() -> int { throw ConfigError("bad"); }, err) == 2);
  CHECK(run_guarded([]() -> int { throw ConvergenceError("slow", 5, 0.1); }, err) == 1);
  CHECK(run_guarded([]() -> int { throw PositivityError("gap"); }, err) == 2);
  CHECK(err.str().find("bad") != std::string::npos);
}
