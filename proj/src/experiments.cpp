#include "wnum/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <unordered_set>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "wnum/errors.hpp"
#include "wnum/seeding.hpp"

namespace wnum::exp {

using nlohmann::json;

std::string_view to_string(Method m) {
  switch (m) {
    case Method::kWnumMpc:
      return "wnummpc";
    case Method::kTmpc:
      return "tmpc";
    case Method::kVanilla:
      return "vanilla";
  }
  return "vanilla";
}

Method parse_method(std::string_view s) {
  if (s == "wnummpc") return Method::kWnumMpc;
  if (s == "tmpc") return Method::kTmpc;
  if (s == "vanilla") return Method::kVanilla;
  throw ConfigError("unknown method '" + std::string(s) + "' (expected wnummpc, tmpc or vanilla)");
}

ExperimentConfig default_config(int n_agents) {
  ExperimentConfig c;
  c.train.scenario.n_agents = n_agents;
  c.train.ppo = learning::PpoConfig::for_agents(n_agents);
  return c;
}

void ExperimentConfig::validate() const {
  if (n_episodes < 1) throw ConfigError("experiment.episodes must be >= 1");
  if (method != Method::kWnumMpc && policy_path) {
    throw ConfigError(fmt::format("method {} does not take a policy file", to_string(method)));
  }
  if (method == Method::kTmpc && !(tmpc_weight < 0.0)) {
    throw ConfigError("experiment.tmpc_weight must be negative");
  }
  if (train.scenario.n_agents > train.arch.n_max) {
    throw ConfigError(fmt::format("scenario.agents ({}) exceeds planner.n_max ({})",
                                  train.scenario.n_agents, train.arch.n_max));
  }
  if (train.limits.plan_refresh_steps < 1) throw ConfigError("planner.plan_refresh_steps must be >= 1");
  if (!(train.limits.timeout > 0.0)) throw ConfigError("environment.timeout must be > 0");
  if (!(train.limits.goal_tolerance > 0.0)) throw ConfigError("environment.goal_tolerance must be > 0");
  train.scenario.validate();
  train.dynamics.validate();
  train.controller.validate();
  train.arch.validate();
  train.ppo.validate();
}

namespace {

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  if (used != v.size() || !std::isfinite(x)) {
    throw ConfigError(key + ": expected a finite number, got '" + v + "'");
  }
  return x;
}

long long to_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long x = 0;
  try {
    x = std::stoll(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  if (used != v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return x;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  unsigned long long x = 0;
  try {
    x = std::stoull(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  if (used != v.size() || v.front() == '-') {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(' '));
    item.erase(item.find_last_not_of(' ') + 1);
    if (!item.empty()) out.push_back(static_cast<int>(to_int(key, item)));
  }
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& v)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["experiment.method"] = [](auto& c, auto&, auto& v) { c.method = parse_method(v); };
    t["experiment.episodes"] = [](auto& c, auto& k, auto& v) { c.n_episodes = static_cast<int>(to_int(k, v)); };
    t["experiment.seed"] = [](auto& c, auto& k, auto& v) { c.seed = to_u64(k, v); };
    t["experiment.out"] = [](auto& c, auto&, auto& v) { c.out_dir = v; };
    t["experiment.policy"] = [](auto& c, auto&, auto& v) {
      if (v.empty()) {
        c.policy_path.reset();
      } else {
        c.policy_path = v;
      }
    };
    t["experiment.deterministic_planner"] = [](auto& c, auto& k, auto& v) { c.deterministic_planner = to_bool(k, v); };
    t["experiment.export_episodes"] = [](auto& c, auto& k, auto& v) { c.export_episodes = to_bool(k, v); };
    t["experiment.tmpc_weight"] = [](auto& c, auto& k, auto& v) { c.tmpc_weight = to_double(k, v); };
    t["experiment.checkpoint_every"] = [](auto& c, auto& k, auto& v) { c.train.checkpoint_every = static_cast<int>(to_int(k, v)); };

    t["scenario.agents"] = [](auto& c, auto& k, auto& v) { c.train.scenario.n_agents = static_cast<int>(to_int(k, v)); };
    t["scenario.mode"] = [](auto& c, auto&, auto& v) { c.train.scenario.mode = env::parse_scenario_mode(v); };
    t["scenario.circle_radius"] = [](auto& c, auto& k, auto& v) { c.train.scenario.circle_radius = to_double(k, v); };
    t["scenario.noise"] = [](auto& c, auto& k, auto& v) { c.train.scenario.noise_half_width = to_double(k, v); };
    t["scenario.min_separation"] = [](auto& c, auto& k, auto& v) { c.train.scenario.min_start_separation = to_double(k, v); };
    t["scenario.agent_radius"] = [](auto& c, auto& k, auto& v) {
      c.train.scenario.agent_radius = to_double(k, v);
      c.train.dynamics.collision_radius = c.train.scenario.agent_radius;
    };
    t["scenario.center_x"] = [](auto& c, auto& k, auto& v) { c.train.scenario.center.x = to_double(k, v); };
    t["scenario.center_y"] = [](auto& c, auto& k, auto& v) { c.train.scenario.center.y = to_double(k, v); };

    t["dynamics.model"] = [](auto& c, auto&, auto& v) {
      const DynamicsModel m = parse_dynamics_model(v);
      const double radius = c.train.dynamics.collision_radius;
      c.train.dynamics = m == DynamicsModel::kDiffDrive ? DynamicsConfig::diff_drive() : DynamicsConfig::holonomic();
      c.train.dynamics.collision_radius = radius;
    };
    t["dynamics.dt"] = [](auto& c, auto& k, auto& v) { c.train.dynamics.dt = to_double(k, v); };
    t["dynamics.v_max"] = [](auto& c, auto& k, auto& v) { c.train.dynamics.v_max = to_double(k, v); };
    t["dynamics.wheel_coef"] = [](auto& c, auto& k, auto& v) { c.train.dynamics.wheel_coef = to_double(k, v); };

    t["controller.horizon"] = [](auto& c, auto& k, auto& v) { c.train.controller.horizon = static_cast<int>(to_int(k, v)); };
    t["controller.alpha_g"] = [](auto& c, auto& k, auto& v) { c.train.controller.alpha_g = to_double(k, v); };
    t["controller.alpha_o"] = [](auto& c, auto& k, auto& v) { c.train.controller.alpha_o = to_double(k, v); };
    t["controller.q_xx"] = [](auto& c, auto& k, auto& v) { c.train.controller.q_goal.xx = to_double(k, v); };
    t["controller.q_xy"] = [](auto& c, auto& k, auto& v) { c.train.controller.q_goal.xy = to_double(k, v); };
    t["controller.q_yy"] = [](auto& c, auto& k, auto& v) { c.train.controller.q_goal.yy = to_double(k, v); };
    t["controller.sigma_h"] = [](auto& c, auto& k, auto& v) { c.train.controller.sigma_h = to_double(k, v); };
    t["controller.sigma_r"] = [](auto& c, auto& k, auto& v) { c.train.controller.sigma_r = to_double(k, v); };
    t["controller.sigma_s"] = [](auto& c, auto& k, auto& v) { c.train.controller.sigma_s = to_double(k, v); };
    t["controller.candidates"] = [](auto& c, auto& k, auto& v) { c.train.controller.num_candidates = static_cast<int>(to_int(k, v)); };
    t["controller.segments"] = [](auto& c, auto& k, auto& v) { c.train.controller.segments = static_cast<int>(to_int(k, v)); };

    t["planner.n_max"] = [](auto& c, auto& k, auto& v) { c.train.arch.n_max = static_cast<int>(to_int(k, v)); };
    t["planner.hidden"] = [](auto& c, auto& k, auto& v) { c.train.arch.hidden = to_int_list(k, v); };
    t["planner.w_max"] = [](auto& c, auto& k, auto& v) { c.train.arch.w_max = to_double(k, v); };
    t["planner.weight_scale"] = [](auto& c, auto& k, auto& v) { c.train.arch.weight_scale = to_double(k, v); };
    t["planner.initial_weight"] = [](auto& c, auto& k, auto& v) { c.train.init.initial_weight = to_double(k, v); };
    t["planner.initial_log_std"] = [](auto& c, auto& k, auto& v) { c.train.init.log_std = to_double(k, v); };
    t["planner.plan_refresh_steps"] = [](auto& c, auto& k, auto& v) { c.train.limits.plan_refresh_steps = static_cast<int>(to_int(k, v)); };
    t["planner.random_refresh_offset"] = [](auto& c, auto& k, auto& v) { c.train.limits.random_refresh_offset = to_bool(k, v); };

    t["environment.timeout"] = [](auto& c, auto& k, auto& v) { c.train.limits.timeout = to_double(k, v); };
    t["environment.goal_tolerance"] = [](auto& c, auto& k, auto& v) { c.train.limits.goal_tolerance = to_double(k, v); };

    t["ppo.gamma"] = [](auto& c, auto& k, auto& v) { c.train.ppo.gamma = to_double(k, v); };
    t["ppo.gae_lambda"] = [](auto& c, auto& k, auto& v) { c.train.ppo.gae_lambda = to_double(k, v); };
    t["ppo.clip"] = [](auto& c, auto& k, auto& v) { c.train.ppo.clip = to_double(k, v); };
    t["ppo.epochs"] = [](auto& c, auto& k, auto& v) { c.train.ppo.epochs = static_cast<int>(to_int(k, v)); };
    t["ppo.learning_rate"] = [](auto& c, auto& k, auto& v) { c.train.ppo.learning_rate = to_double(k, v); };
    t["ppo.batch_size"] = [](auto& c, auto& k, auto& v) { c.train.ppo.batch_size = static_cast<int>(to_int(k, v)); };
    t["ppo.minibatch_size"] = [](auto& c, auto& k, auto& v) { c.train.ppo.minibatch_size = static_cast<int>(to_int(k, v)); };
    t["ppo.entropy_coef"] = [](auto& c, auto& k, auto& v) { c.train.ppo.entropy_coef = to_double(k, v); };
    t["ppo.value_coef"] = [](auto& c, auto& k, auto& v) { c.train.ppo.value_coef = to_double(k, v); };
    t["ppo.max_grad_norm"] = [](auto& c, auto& k, auto& v) { c.train.ppo.max_grad_norm = to_double(k, v); };
    t["ppo.total_env_steps"] = [](auto& c, auto& k, auto& v) { c.train.ppo.total_env_steps = to_int(k, v); };

    t["reward.collision"] = [](auto& c, auto& k, auto& v) { c.train.reward.collision = to_double(k, v); };
    t["reward.goal"] = [](auto& c, auto& k, auto& v) { c.train.reward.goal = to_double(k, v); };
    t["reward.proximity_threshold"] = [](auto& c, auto& k, auto& v) { c.train.reward.proximity_threshold = to_double(k, v); };
    t["reward.proximity_scale"] = [](auto& c, auto& k, auto& v) { c.train.reward.proximity_scale = to_double(k, v); };
    t["reward.goal_over_proximity"] = [](auto& c, auto& k, auto& v) { c.train.reward.goal_over_proximity = to_bool(k, v); };
    return t;
  }();
  return table;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, std::optional<int> n_agents) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  int n = 3;
  if (n_agents) {
    n = *n_agents;
  } else if (auto v = tree.get_optional<std::string>("scenario.agents")) {
    n = static_cast<int>(to_int("scenario.agents", *v));
  }
  ExperimentConfig cfg = default_config(n);
  const auto& table = setters();
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("config: key '" + section + "' must be inside a section");
    }
    for (const auto& [key, node] : body) {
      const std::string full = section + "." + key;
      const auto it = table.find(full);
      if (it == table.end()) throw ConfigError("config: unknown key '" + full + "'");
      it->second(cfg, full, node.data());
    }
  }
  if (n_agents) cfg.train.scenario.n_agents = *n_agents;
  cfg.train.seed = cfg.seed;
  cfg.train.scenario.agent_radius = cfg.train.dynamics.collision_radius;
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, std::optional<int> n_agents) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), n_agents);
}

std::uint64_t eval_instance_seed(std::uint64_t base, std::int64_t index) {
  return derive_seed(base, SeedStream::kEvalInstances, static_cast<std::uint64_t>(index));
}

bool seeds_overlap(const ExperimentConfig& cfg, const planner::TrainingStamp& stamp) {
  std::unordered_set<std::uint64_t> eval;
  for (std::int64_t e = 0; e < cfg.n_episodes; ++e) eval.insert(eval_instance_seed(cfg.seed, e));
  // Every episode yields at least one decision, so an iteration never
  // collects more than batch_size episodes.
  const std::int64_t per_iteration = cfg.train.ppo.batch_size;
  for (std::int64_t it = 0; it < stamp.iteration; ++it) {
    for (std::int64_t k = 0; k < per_iteration; ++k) {
      const auto s = learning::train_instance_seed(stamp.seed, learning::train_episode_index(it, k));
      if (eval.count(s) != 0) return true;
    }
  }
  return false;
}

AggregateReport evaluate(const ExperimentConfig& cfg, const planner::PolicyParams* policy,
                         const EpisodeFn& on_episode) {
  cfg.validate();
  if (cfg.method == Method::kWnumMpc && policy == nullptr) {
    throw ConfigError("method wnummpc requires a policy file");
  }
  if (policy != nullptr && cfg.method == Method::kWnumMpc && policy->arch.n_max < cfg.train.scenario.n_agents) {
    throw ConfigError("policy capacity is smaller than the agent count");
  }
  const int n = cfg.n_episodes;
  std::vector<env::EpisodeResult> results(static_cast<std::size_t>(n));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));

#pragma omp parallel for schedule(dynamic)
  for (int e = 0; e < n; ++e) {
    try {
      const std::uint64_t seed = eval_instance_seed(cfg.seed, e);
      env::ScenarioConfig scen = cfg.train.scenario;
      scen.rng_seed = seed;
      const env::Instance inst = env::generate_instance(scen);
      env::EpisodeLimits limits = cfg.train.limits;
      limits.seed = seed;
      std::unique_ptr<planner::Planner> pl;
      switch (cfg.method) {
        case Method::kVanilla:
          pl = std::make_unique<planner::ConstantPlanner>(0.0, 0.0);
          break;
        case Method::kTmpc:
          pl = std::make_unique<planner::ConstantPlanner>(0.0, cfg.tmpc_weight);
          break;
        case Method::kWnumMpc:
          pl = std::make_unique<planner::LearnedPlanner>(
              *policy, cfg.train.dynamics.v_max, !cfg.deterministic_planner,
              derive_seed(cfg.seed, SeedStream::kPlanner, static_cast<std::uint64_t>(e)));
          break;
      }
      results[static_cast<std::size_t>(e)] =
          env::run_episode(inst, *pl, cfg.train.controller, cfg.train.dynamics, limits);
    } catch (...) {
      errors[static_cast<std::size_t>(e)] = std::current_exception();
    }
  }
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }

  AggregateReport rep;
  rep.method = cfg.method;
  rep.mode = cfg.train.scenario.mode;
  rep.n_agents = cfg.train.scenario.n_agents;
  rep.seed = cfg.seed;
  rep.episodes = n;
  std::size_t successes = 0, collisions = 0, timeouts = 0;
  double extra = 0.0;
  for (int e = 0; e < n; ++e) {
    const env::EpisodeResult& r = results[static_cast<std::size_t>(e)];
    EpisodeRow row;
    row.index = e;
    row.instance_seed = eval_instance_seed(cfg.seed, e);
    row.outcome = r.outcome;
    row.steps = r.steps;
    row.extra_time = r.extra_time;
    row.collision_step = r.collision_step;
    double w = 0.0;
    for (const env::PairWinding& p : r.realized_winding) w += std::abs(p.w);
    row.mean_abs_winding = r.realized_winding.empty() ? 0.0 : w / static_cast<double>(r.realized_winding.size());
    rep.mean_abs_winding += row.mean_abs_winding / static_cast<double>(n);
    switch (r.outcome) {
      case env::Outcome::kSuccess:
        ++successes;
        extra += r.extra_time;
        break;
      case env::Outcome::kCollision:
        ++collisions;
        break;
      case env::Outcome::kTimeout:
        ++timeouts;
        break;
    }
    rep.rows.push_back(row);
    if (on_episode) on_episode(e, row.instance_seed, r);
  }
  rep.success_rate = static_cast<double>(successes) / n;
  rep.collision_rate = static_cast<double>(collisions) / n;
  rep.timeout_rate = static_cast<double>(timeouts) / n;
  rep.mean_extra_time = successes > 0 ? extra / static_cast<double>(successes)
                                      : std::numeric_limits<double>::quiet_NaN();
  if (policy != nullptr && cfg.method == Method::kWnumMpc && policy->training) {
    rep.seed_overlap = seeds_overlap(cfg, *policy->training);
  }
  return rep;
}

namespace {

json nullable(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::string num(double x) { return std::isfinite(x) ? fmt::format("{:.17g}", x) : std::string(); }

}  // namespace

std::string report_json(const AggregateReport& r) {
  json j;
  j["format"] = "wnummpc-report";
  j["format_version"] = kReportFormatVersion;
  j["method"] = std::string(to_string(r.method));
  j["mode"] = std::string(env::to_string(r.mode));
  j["n_agents"] = r.n_agents;
  j["seed"] = r.seed;
  j["episodes"] = r.episodes;
  j["success_rate"] = r.success_rate;
  j["collision_rate"] = r.collision_rate;
  j["timeout_rate"] = r.timeout_rate;
  j["mean_extra_time"] = nullable(r.mean_extra_time);
  j["mean_abs_winding"] = r.mean_abs_winding;
  j["seed_overlap"] = r.seed_overlap;
  json rows = json::array();
  for (const EpisodeRow& row : r.rows) {
    rows.push_back({{"index", row.index},
                    {"instance_seed", row.instance_seed},
                    {"outcome", std::string(env::to_string(row.outcome))},
                    {"steps", row.steps},
                    {"extra_time", nullable(row.extra_time)},
                    {"mean_abs_winding", row.mean_abs_winding},
                    {"collision_step", row.collision_step >= 0 ? json(row.collision_step) : json(nullptr)}});
  }
  j["rows"] = rows;
  return j.dump(2) + "\n";
}

std::string report_csv(const AggregateReport& r) {
  std::string out = "index,instance_seed,outcome,steps,extra_time,mean_abs_winding,collision_step\n";
  for (const EpisodeRow& row : r.rows) {
    out += fmt::format("{},{},{},{},{},{},{}\n", row.index, row.instance_seed, env::to_string(row.outcome),
                       row.steps, num(row.extra_time), num(row.mean_abs_winding),
                       row.collision_step >= 0 ? std::to_string(row.collision_step) : std::string());
  }
  return out;
}

std::vector<GridCell> parse_grid(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<GridCell> cells;
  int columns = 0;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> parts;
    std::stringstream ss(line);
    std::string p;
    while (std::getline(ss, p, ',')) {
      p.erase(0, p.find_first_not_of(" \t"));
      p.erase(p.find_last_not_of(" \t") + 1);
      parts.push_back(p);
    }
    if (columns == 0) {
      if (parts == std::vector<std::string>{"alpha_g", "alpha_o"}) {
        columns = 2;
      } else if (parts == std::vector<std::string>{"alpha_g", "alpha_o", "alpha_w"}) {
        columns = 3;
      } else {
        throw ConfigError("grid: header must be alpha_g,alpha_o[,alpha_w]");
      }
      continue;
    }
    if (static_cast<int>(parts.size()) != columns) {
      throw ConfigError(fmt::format("grid line {}: expected {} values", line_no, columns));
    }
    const std::string where = fmt::format("grid line {}", line_no);
    GridCell c;
    c.alpha_g = to_double(where, parts[0]);
    c.alpha_o = to_double(where, parts[1]);
    if (columns == 3) c.alpha_w = to_double(where, parts[2]);
    if (c.alpha_g < 0.0 || c.alpha_o < 0.0) throw ConfigError(where + ": alpha_g and alpha_o must be >= 0");
    cells.push_back(c);
  }
  if (cells.empty()) throw ConfigError("grid: no cells");
  return cells;
}

ExperimentConfig apply_cell(const ExperimentConfig& cfg, const GridCell& cell) {
  ExperimentConfig c = cfg;
  c.train.controller.alpha_g = cell.alpha_g;
  c.train.controller.alpha_o = cell.alpha_o;
  if (cell.alpha_w) {
    if (c.method != Method::kTmpc) throw ConfigError("grid column alpha_w needs method tmpc");
    c.tmpc_weight = *cell.alpha_w;
  }
  return c;
}

std::vector<SweepEntry> sweep(const ExperimentConfig& cfg, const std::vector<GridCell>& grid,
                              const planner::PolicyParams* policy) {
  if (grid.empty()) throw ConfigError("grid: no cells");
  std::vector<SweepEntry> out;
  for (const GridCell& cell : grid) out.push_back({cell, evaluate(apply_cell(cfg, cell), policy)});
  auto extra_key = [](double x) { return std::isfinite(x) ? x : std::numeric_limits<double>::infinity(); };
  std::sort(out.begin(), out.end(), [&](const SweepEntry& a, const SweepEntry& b) {
    if (a.report.success_rate != b.report.success_rate) return a.report.success_rate > b.report.success_rate;
    const double ea = extra_key(a.report.mean_extra_time), eb = extra_key(b.report.mean_extra_time);
    if (ea != eb) return ea < eb;
    if (a.cell.alpha_g != b.cell.alpha_g) return a.cell.alpha_g < b.cell.alpha_g;
    if (a.cell.alpha_o != b.cell.alpha_o) return a.cell.alpha_o < b.cell.alpha_o;
    return a.cell.alpha_w.value_or(-std::numeric_limits<double>::infinity()) <
           b.cell.alpha_w.value_or(-std::numeric_limits<double>::infinity());
  });
  return out;
}

std::string sweep_csv(const std::vector<SweepEntry>& ranked) {
  std::string out = "rank,alpha_g,alpha_o,alpha_w,success_rate,collision_rate,timeout_rate,mean_extra_time\n";
  int rank = 1;
  for (const SweepEntry& e : ranked) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", rank++, num(e.cell.alpha_g), num(e.cell.alpha_o),
                       e.cell.alpha_w ? num(*e.cell.alpha_w) : std::string(), num(e.report.success_rate),
                       num(e.report.collision_rate), num(e.report.timeout_rate), num(e.report.mean_extra_time));
  }
  return out;
}

}  // namespace wnum::exp
