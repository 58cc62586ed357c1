// wnummpc: train, evaluate, sweep and replay winding-number MPC experiments.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "wnum/episode_io.hpp"
#include "wnum/errors.hpp"
#include "wnum/experiments.hpp"
#include "wnum/learning.hpp"
#include "wnum/policy.hpp"

namespace fs = std::filesystem;
using namespace wnum;

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kData = 3, kNumeric = 4 };

struct Options {
  std::string config;
  std::string policy;
  std::string out;
  std::string mode;
  std::string method;
  std::string resume;
  std::string grid;
  std::string episode_file;
  std::optional<std::uint64_t> seed;
  std::optional<int> episodes;
  std::optional<int> agents;
  std::optional<std::int64_t> steps;
  bool deterministic = false;
  bool stochastic = false;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("wnummpc");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* lvl = std::getenv("WNUM_LOG_LEVEL")) {
    const auto parsed = spdlog::level::from_str(lvl);
    if (parsed == spdlog::level::off && std::string(lvl) != "off") {
      spdlog::warn("ignoring unknown WNUM_LOG_LEVEL '{}'", lvl);
    } else {
      spdlog::set_level(parsed);
    }
  }
}

exp::ExperimentConfig build_config(const Options& o) {
  exp::ExperimentConfig cfg = o.config.empty() ? exp::parse_config("", o.agents)
                                               : exp::load_config(o.config, o.agents);
  if (o.seed) cfg.seed = *o.seed;
  if (o.episodes) cfg.n_episodes = *o.episodes;
  if (!o.mode.empty()) cfg.train.scenario.mode = env::parse_scenario_mode(o.mode);
  if (!o.method.empty()) cfg.method = exp::parse_method(o.method);
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (!o.policy.empty()) cfg.policy_path = o.policy;
  if (o.deterministic) cfg.deterministic_planner = true;
  if (o.stochastic) cfg.deterministic_planner = false;
  if (o.steps) cfg.train.ppo.total_env_steps = *o.steps;
  cfg.train.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

planner::PolicyParams read_policy(const fs::path& p) {
  if (!fs::exists(p)) throw ConfigError("policy file " + p.string() + " does not exist");
  return planner::load_params(p);
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw DataError("cannot write " + p.string());
  f << text;
}

int cmd_train(const Options& o) {
  exp::ExperimentConfig cfg = build_config(o);
  if (cfg.train.scenario.mode == env::ScenarioMode::kCrossing) {
    spdlog::warn("training on crossing instances; the reference protocol trains on random instances only");
  }
  cfg.train.out_dir = cfg.out_dir;
  std::optional<planner::PolicyParams> resume;
  if (!o.resume.empty()) {
    resume = read_policy(o.resume);
    const auto stamp = resume->training.value_or(planner::TrainingStamp{});
    spdlog::info("resuming from iteration {} ({} env steps)", stamp.iteration, stamp.env_steps);
  }
  spdlog::info("training: {} agents, {} env steps, batch {}, seed {}", cfg.train.scenario.n_agents,
               cfg.train.ppo.total_env_steps, cfg.train.ppo.batch_size, cfg.seed);
  const auto result = learning::train(cfg.train, std::move(resume), [](const learning::IterationMetrics& m) {
    spdlog::info("iter {:4d} steps {:7d} return {:+.4f} success {:.3f} collision {:.3f} len {:.1f} kl {:.5f}",
                 m.iteration, m.env_steps, m.mean_return, m.success_rate, m.collision_rate,
                 m.mean_episode_len, m.kl);
  });
  spdlog::info("wrote {}", (cfg.out_dir / "policy_final.json").string());
  (void)result;
  return kOk;
}

int cmd_eval(const Options& o) {
  const exp::ExperimentConfig cfg = build_config(o);
  std::optional<planner::PolicyParams> policy;
  if (cfg.method == exp::Method::kWnumMpc) {
    if (!cfg.policy_path) throw ConfigError("method wnummpc requires --policy");
    policy = read_policy(*cfg.policy_path);
  }
  fs::create_directories(cfg.out_dir);
  const fs::path ep_dir = cfg.out_dir / "episodes";
  auto on_episode = [&](std::int64_t index, std::uint64_t seed, const env::EpisodeResult& r) {
    if (!cfg.export_episodes) return;
    io::EpisodeMeta meta;
    meta.method = std::string(exp::to_string(cfg.method));
    meta.episode_index = index;
    meta.base_seed = cfg.seed;
    meta.instance_seed = seed;
    meta.v_max = cfg.train.dynamics.v_max;
    meta.dynamics_model = std::string(to_string(cfg.train.dynamics.model));
    io::export_episode(ep_dir, fmt::format("episode_{:06d}", index), r, meta);
  };
  const exp::AggregateReport rep = exp::evaluate(cfg, policy ? &*policy : nullptr, on_episode);
  if (rep.seed_overlap) spdlog::warn("evaluation instance seeds overlap the policy's training seeds");
  write_text(cfg.out_dir / "report.json", exp::report_json(rep));
  write_text(cfg.out_dir / "report.csv", exp::report_csv(rep));
  spdlog::info("{} on {} {} instances (N={}): success {:.3f} collision {:.3f} timeout {:.3f} extra time {}",
               exp::to_string(rep.method), rep.episodes, env::to_string(rep.mode), rep.n_agents,
               rep.success_rate, rep.collision_rate, rep.timeout_rate,
               std::isfinite(rep.mean_extra_time) ? fmt::format("{:.3f}", rep.mean_extra_time) : "n/a");
  return kOk;
}

int cmd_sweep(const Options& o) {
  exp::ExperimentConfig cfg = build_config(o);
  std::ifstream gf(o.grid);
  if (!gf) throw ConfigError("cannot read grid file " + o.grid);
  std::stringstream ss;
  ss << gf.rdbuf();
  const auto grid = exp::parse_grid(ss.str());
  std::optional<planner::PolicyParams> policy;
  if (cfg.method == exp::Method::kWnumMpc) {
    if (!cfg.policy_path) throw ConfigError("method wnummpc requires --policy");
    policy = read_policy(*cfg.policy_path);
  }
  const auto ranked = exp::sweep(cfg, grid, policy ? &*policy : nullptr);
  fs::create_directories(cfg.out_dir);
  write_text(cfg.out_dir / "sweep.csv", exp::sweep_csv(ranked));
  nlohmann::json j = nlohmann::json::array();
  for (const auto& e : ranked) {
    nlohmann::json cell = {{"alpha_g", e.cell.alpha_g}, {"alpha_o", e.cell.alpha_o}};
    cell["alpha_w"] = e.cell.alpha_w ? nlohmann::json(*e.cell.alpha_w) : nlohmann::json(nullptr);
    j.push_back({{"cell", cell}, {"report", nlohmann::json::parse(exp::report_json(e.report))}});
  }
  write_text(cfg.out_dir / "sweep.json", j.dump(2) + "\n");
  const auto& best = ranked.front();
  spdlog::info("best cell alpha_g={} alpha_o={}: success {:.3f}", best.cell.alpha_g, best.cell.alpha_o,
               best.report.success_rate);
  return kOk;
}

int cmd_replay(const Options& o) {
  const io::LoadedEpisode ep = io::load_episode(o.episode_file);
  const fs::path out = o.out.empty() ? fs::path(o.episode_file).parent_path() / "replay" : fs::path(o.out);
  const io::ReplayResult r = io::replay_episode(ep, out);
  spdlog::info("replayed {} steps: outcome {} (stored {}), max winding mismatch {:.3g}",
               ep.positions.size() - 1, env::to_string(r.outcome), ep.stored_outcome, r.max_winding_mismatch);
  if (!r.outcome_matches) throw DataError("replayed outcome does not match the stored outcome");
  if (r.max_winding_mismatch > 1e-9) throw DataError("replayed winding numbers do not match the stored values");
  return kOk;
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "INI experiment config");
  sub->add_option("--seed", o.seed, "Base seed");
  sub->add_option("--out", o.out, "Output directory");
  sub->add_option("--mode", o.mode, "Scenario mode")->check(CLI::IsMember({"random", "crossing"}));
  sub->add_option("--agents", o.agents, "Number of agents")->check(CLI::PositiveNumber);
}

void add_eval_flags(CLI::App* sub, Options& o) {
  sub->add_option("--policy", o.policy, "Policy file (wnummpc only)");
  sub->add_option("--episodes", o.episodes, "Number of episodes")->check(CLI::PositiveNumber);
  sub->add_option("--method", o.method, "Method")->check(CLI::IsMember({"wnummpc", "tmpc", "vanilla"}));
  auto* det = sub->add_flag("--deterministic-planner", o.deterministic, "Use the planner mean (default)");
  sub->add_flag("--stochastic-planner", o.stochastic, "Sample plans from the planner")->excludes(det);
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Winding-number MPC: multi-agent navigation experiments"};
  app.require_subcommand(1);
  Options o;

  auto* train = app.add_subcommand("train", "Train the planner with PPO");
  add_common(train, o);
  train->add_option("--resume", o.resume, "Checkpoint to continue from");
  train->add_option("--steps", o.steps, "Total env steps (overrides the config)");

  auto* eval = app.add_subcommand("eval", "Evaluate a method on fresh instances");
  add_common(eval, o);
  add_eval_flags(eval, o);

  auto* sweep = app.add_subcommand("sweep", "Grid search over controller weights");
  add_common(sweep, o);
  add_eval_flags(sweep, o);
  sweep->add_option("--grid", o.grid, "CSV grid: alpha_g,alpha_o[,alpha_w]")->required();

  auto* replay = app.add_subcommand("replay", "Turn an exported episode into plot data");
  replay->add_option("episode", o.episode_file, "Episode sidecar (.json) or trajectory (.csv)")->required();
  replay->add_option("--out", o.out, "Output directory (default: <episode dir>/replay)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (train->parsed()) return cmd_train(o);
    if (eval->parsed()) return cmd_eval(o);
    if (sweep->parsed()) return cmd_sweep(o);
    return cmd_replay(o);
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const InfeasibleScenarioError& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const DataError& e) {
    spdlog::error("{}", e.what());
    return kData;
  } catch (const NumericalError& e) {
    spdlog::error("{}", e.what());
    return kNumeric;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}
