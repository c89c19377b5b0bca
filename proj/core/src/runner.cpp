#include "causalsafe/runner.hpp"

#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "causalsafe/causal_q.hpp"
#include "causalsafe/dataset.hpp"
#include "causalsafe/environments.hpp"
#include "causalsafe/evaluation.hpp"
#include "causalsafe/offline_tables.hpp"
#include "causalsafe/oracle.hpp"

namespace causalsafe {

using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
  if (horizon < 1) throw ConfigError("horizon must be at least 1");
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw ConfigError("epsilon must lie in (0, 1)");
  }
  if (feasibility_slack && !(*feasibility_slack >= 0.0)) {
    throw ConfigError("feasibility_slack must be nonnegative");
  }
  const Environment env = make_environment(this->env, horizon);
  env.encode_state(x0);
  for (const std::string& c : controllers) {
    if (c != "proposed" && c != "dtcbf") {
      throw ConfigError("unknown controller '" + c + "'");
    }
    if (c == "dtcbf" && this->env != "driving") {
      throw ConfigError("the dtcbf controller needs the driving environment");
    }
  }
  if (fit_q.mode != "sampled" && fit_q.mode != "exact") {
    throw ConfigError("fit_q.mode must be 'sampled' or 'exact'");
  }
  if (!(fit_q.tolerance > 0.0) || fit_q.max_iters < 1) {
    throw ConfigError("fit_q needs a positive tolerance and max_iters");
  }
  if (evaluation.batches < 1 || evaluation.trajectories < 1) {
    throw ConfigError("evaluation needs positive batches and trajectories");
  }
}

namespace {

void check_keys(const json& obj, std::initializer_list<std::string_view> keys,
                const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (std::string_view k : keys) known = known || key == k;
    if (!known) throw ConfigError("unknown config key '" + where + key + "'");
  }
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

ExperimentConfig parse_config(std::string_view json_text) {
  ExperimentConfig c;
  try {
    const json j = json::parse(json_text);
    check_keys(j,
               {"env", "horizon", "epsilon", "x0", "controllers",
                "selection_mode", "feasibility_slack", "q_source", "dataset",
                "fit_q", "evaluation", "output_dir"},
               "");
    read_field(j, "env", c.env);
    read_field(j, "horizon", c.horizon);
    read_field(j, "epsilon", c.epsilon);
    read_field(j, "x0", c.x0);
    read_field(j, "controllers", c.controllers);
    if (j.contains("selection_mode")) {
      c.selection_mode =
          parse_selection_mode(j.at("selection_mode").get<std::string>());
    }
    if (j.contains("feasibility_slack") && !j.at("feasibility_slack").is_null()) {
      c.feasibility_slack = j.at("feasibility_slack").get<double>();
    }
    read_field(j, "q_source", c.q_source);
    read_field(j, "output_dir", c.output_dir);
    if (j.contains("dataset")) {
      const json& d = j.at("dataset");
      check_keys(d, {"n_episodes", "seed", "path"}, "dataset.");
      read_field(d, "n_episodes", c.dataset.n_episodes);
      read_field(d, "seed", c.dataset.seed);
      read_field(d, "path", c.dataset.path);
    }
    if (j.contains("fit_q")) {
      const json& f = j.at("fit_q");
      check_keys(f, {"tolerance", "max_iters", "mode"}, "fit_q.");
      read_field(f, "tolerance", c.fit_q.tolerance);
      read_field(f, "max_iters", c.fit_q.max_iters);
      read_field(f, "mode", c.fit_q.mode);
    }
    if (j.contains("evaluation")) {
      const json& e = j.at("evaluation");
      check_keys(e, {"batches", "trajectories", "seed", "threads"},
                 "evaluation.");
      read_field(e, "batches", c.evaluation.batches);
      read_field(e, "trajectories", c.evaluation.trajectories);
      read_field(e, "seed", c.evaluation.seed);
      read_field(e, "threads", c.evaluation.threads);
    }
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("invalid config: ") + ex.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string config_to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["env"] = c.env;
  j["horizon"] = c.horizon;
  j["epsilon"] = c.epsilon;
  j["x0"] = c.x0;
  j["controllers"] = c.controllers;
  j["selection_mode"] = std::string(to_string(c.selection_mode));
  j["feasibility_slack"] =
      c.feasibility_slack ? ordered_json(*c.feasibility_slack) : ordered_json();
  j["q_source"] = c.q_source;
  j["dataset"] = {{"n_episodes", c.dataset.n_episodes},
                  {"seed", c.dataset.seed},
                  {"path", c.dataset.path}};
  j["fit_q"] = {{"tolerance", c.fit_q.tolerance},
                {"max_iters", c.fit_q.max_iters},
                {"mode", c.fit_q.mode}};
  j["evaluation"] = {{"batches", c.evaluation.batches},
                     {"trajectories", c.evaluation.trajectories},
                     {"seed", c.evaluation.seed},
                     {"threads", c.evaluation.threads}};
  j["output_dir"] = c.output_dir;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Commands

namespace {

void ensure_dir(const std::filesystem::path& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const std::filesystem::path& path) {
  ensure_dir(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void echo_config(const ExperimentConfig& config,
                 const std::filesystem::path& dir) {
  open_out(dir / "config.json") << config_to_json(config);
}

std::unique_ptr<Controller> make_controller(const std::string& name,
                                            const Environment& env,
                                            const ExperimentConfig& config,
                                            const TabularPolicy& nominal) {
  if (name == "dtcbf") return make_dtcbf_controller(env);

  const ConfoundedMdpModel& model = env.model;
  CertificateConfig cert;
  cert.epsilon = config.epsilon;
  cert.selection_mode = config.selection_mode;
  const bool oracle = config.q_source == "oracle";
  cert.feasibility_slack = config.feasibility_slack.value_or(oracle ? 1e-12 : 0.0);
  QTable q = [&] {
    if (oracle) return q_dp(model, nominal);
    std::ifstream in(config.q_source, std::ios::binary);
    if (!in) throw IoError("cannot open Q table " + config.q_source);
    return read_q_csv(in, model.num_states(), model.horizon(),
                      model.num_actions());
  }();
  const auto values = model.action_values();
  return std::make_unique<CertificateController>(
      "proposed", std::move(q), nominal, cert,
      std::vector<int>(values.begin(), values.end()));
}

}  // namespace

int cmd_gen_data(const ExperimentConfig& config, const std::filesystem::path& out,
                 std::ostream& log) {
  config.validate();
  const Environment env = make_environment(config.env, config.horizon);
  const EpisodeDataset data =
      generate_offline(env, config.dataset.n_episodes,
                       env.encode_state(config.x0), config.dataset.seed);
  {
    std::ofstream file = open_out(out);
    write_jsonl(file, data);
  }
  echo_config(config, out.parent_path());
  log << "wrote " << data.episodes.size() << " raw episodes to " << out.string()
      << '\n';
  return 0;
}

int cmd_convert(const ExperimentConfig& config, const std::filesystem::path& in,
                const std::filesystem::path& out, std::ostream& log) {
  config.validate();
  const Environment env = make_environment(config.env, config.horizon);
  const EpisodeDataset converted = convert_dataset(read_jsonl(in), env.model);
  {
    std::ofstream file = open_out(out);
    write_jsonl(file, converted);
  }
  echo_config(config, out.parent_path());
  log << "converted " << converted.episodes.size() << " episodes into "
      << out.string() << '\n';
  return 0;
}

int cmd_fit_q(const ExperimentConfig& config,
              const std::filesystem::path& dataset,
              const std::filesystem::path& out_dir, std::ostream& log) {
  config.validate();
  const Environment env = make_environment(config.env, config.horizon);
  if (!env.mediator) {
    throw UnsupportedEnvironment("fit-q needs an environment with a mediator; '" +
                                 env.id + "' has none");
  }
  const ConfoundedMdpModel& model = env.model;
  const TabularPolicy pi = TabularPolicy::uniform(
      model.num_states(), model.horizon(), model.num_actions());
  const int M = env.mediator->num_mediators();

  const bool exact = config.fit_q.mode == "exact";
  const OfflineTables tables = [&] {
    if (exact) return exact_offline_tables(env);
    const std::filesystem::path path =
        dataset.empty() ? std::filesystem::path(config.dataset.path) : dataset;
    if (path.empty()) throw ConfigError("fit-q needs a dataset path");
    EpisodeDataset data = read_jsonl(path);
    if (data.form == DatasetForm::kRaw) data = convert_dataset(data, model);
    if (data.episodes.empty()) {
      throw PositivityError("fit-q on an empty dataset");
    }
    if (data.horizon != model.horizon()) {
      throw FormError("dataset horizon does not match the config");
    }
    if (!data.has_mediators()) {
      throw UnsupportedEnvironment("dataset has no mediator sequences");
    }
    return empirical_offline_tables(data, model.num_states(),
                                    model.num_actions(), M);
  }();

  FittedQmOptions options;
  options.tolerance = config.fit_q.tolerance;
  options.max_iters = config.fit_q.max_iters;
  const FittedQm fit = fitted_qm(model, tables, pi, options);
  const QTable q = q_table_from_qm(fit.q, tables, model);

  ensure_dir(out_dir);
  {
    std::ofstream file = open_out(out_dir / "qm.csv");
    write_qm_csv(file, fit.q);
  }
  {
    std::ofstream file = open_out(out_dir / "qm_cells.csv");
    write_qm_csv(file, fit.cell);
  }
  {
    std::ofstream file = open_out(out_dir / "q.csv");
    write_oracle_csv(file, q);
  }
  ordered_json meta;
  meta["mode"] = config.fit_q.mode;
  meta["iterations"] = fit.iterations;
  meta["residual"] = fit.residual;
  meta["tolerance"] = options.tolerance;
  meta["unvisited_cells"] = fit.unvisited;
  meta["warnings"] = fit.warnings;
  open_out(out_dir / "fit.json") << meta.dump(2) << '\n';
  echo_config(config, out_dir);

  log << "fitted Q_M in " << fit.iterations << " sweeps (residual "
      << fit.residual << ")\n";
  for (const std::string& w : fit.warnings) log << "warning: " << w << '\n';
  return 0;
}

int cmd_run_control(const ExperimentConfig& config,
                    const std::filesystem::path& out_dir, std::ostream& log) {
  config.validate();
  const Environment env = make_environment(config.env, config.horizon);
  const ConfoundedMdpModel& model = env.model;
  const TabularPolicy pi = TabularPolicy::uniform(
      model.num_states(), model.horizon(), model.num_actions());
  const StateId x0 = env.encode_state(config.x0);

  ensure_dir(out_dir);
  for (const std::string& name : config.controllers) {
    const auto controller = make_controller(name, env, config, pi);
    std::ofstream file = open_out(out_dir / ("trajectories_" + name + ".jsonl"));
    std::size_t violations = 0;
    for (int j = 0; j < config.evaluation.trajectories; ++j) {
      const TrajectoryRecord rec = run_control_episode(
          model, *controller, pi, x0,
          derive_seed(config.evaluation.seed,
                      {0, static_cast<std::uint64_t>(j), 0}));
      violations += rec.feasibility_violations();
      write_trajectory_jsonl(file, rec, j);
    }
    log << name << ": " << config.evaluation.trajectories << " episodes, "
        << violations << " feasibility violations\n";
  }
  echo_config(config, out_dir);
  return 0;
}

int cmd_reproduce(const ExperimentConfig& config,
                  const std::filesystem::path& out_dir, std::ostream& log) {
  config.validate();
  const Environment env = make_environment(config.env, config.horizon);
  const ConfoundedMdpModel& model = env.model;
  const TabularPolicy pi = TabularPolicy::uniform(
      model.num_states(), model.horizon(), model.num_actions());
  const StateId x0 = env.encode_state(config.x0);
  const ValueTable value = value_dp(model, pi);

  ReportSummary summary;
  summary.env_id = env.id;
  summary.horizon = model.horizon();
  summary.epsilon = config.epsilon;
  summary.x0 = x0;
  summary.batches = config.evaluation.batches;
  summary.trajectories = config.evaluation.trajectories;
  summary.seed = config.evaluation.seed;
  summary.value_x0 = value({x0, model.horizon()});
  summary.precondition_met = summary.value_x0 > summary.threshold();
  log << "V(x0, H) = " << summary.value_x0 << " (threshold "
      << summary.threshold() << ", precondition "
      << (summary.precondition_met ? "met" : "not met") << ")\n";

  ExperimentOptions options;
  options.batches = config.evaluation.batches;
  options.trajectories = config.evaluation.trajectories;
  options.seed = config.evaluation.seed;
  options.threads = config.evaluation.threads;
  options.x0 = x0;

  std::vector<ExperimentResult> results;
  bool proposed_meets = true;
  for (const std::string& name : config.controllers) {
    const auto controller = make_controller(name, env, config, pi);
    ExperimentResult r = run_experiment(model, *controller, pi, value, options);
    r.env_id = env.id;
    r.epsilon = config.epsilon;
    for (Curve& c : exact_curves(model, *controller, pi, value, x0)) {
      r.curves.push_back(std::move(c));
    }
    const ControllerSummary s = summarize(r, summary.threshold());
    if (name == "proposed") proposed_meets = s.exact_meets_threshold;
    log << name << ": min exact long-term " << s.min_exact_long_term
        << ", min Monte Carlo long-term " << s.min_long_term
        << (s.exact_meets_threshold ? " (meets" : " (below") << " threshold)\n";
    summary.controllers.push_back(s);
    results.push_back(std::move(r));
  }
  summary.pass = !summary.precondition_met || proposed_meets;
  emit_report(out_dir, results, summary);
  echo_config(config, out_dir);
  return summary.pass ? 0 : 1;
}

int run_guarded(const std::function<int()>& command, std::ostream& err) {
  try {
    return command();
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << " (residual " << e.residual() << ")\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace causalsafe
