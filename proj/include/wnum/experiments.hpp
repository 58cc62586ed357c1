#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wnum/environment.hpp"
#include "wnum/learning.hpp"
#include "wnum/policy.hpp"

namespace wnum::exp {

enum class Method { kWnumMpc, kTmpc, kVanilla };
std::string_view to_string(Method m);
Method parse_method(std::string_view s);

inline constexpr int kReportFormatVersion = 1;

struct ExperimentConfig {
  Method method = Method::kWnumMpc;
  // Scenario, dynamics, controller, limits, PPO, reward and network settings.
  learning::TrainConfig train;
  int n_episodes = 100;
  // Base seed. Training and evaluation draw instances from separate streams.
  std::uint64_t seed = 0;
  double tmpc_weight = -3.0;
  std::filesystem::path out_dir = "out";
  std::optional<std::filesystem::path> policy_path;
  bool deterministic_planner = true;
  bool export_episodes = true;

  void validate() const;
};

// Defaults with every paper hyperparameter filled in for n_agents.
ExperimentConfig default_config(int n_agents = 3);

// INI file with sections experiment, scenario, dynamics, controller,
// planner, environment, ppo and reward. Unknown keys are errors. The agent
// count (file value or `n_agents`) selects the PPO defaults that the file
// may then override.
ExperimentConfig parse_config(const std::string& text, std::optional<int> n_agents = {});
ExperimentConfig load_config(const std::filesystem::path& path, std::optional<int> n_agents = {});

struct EpisodeRow {
  std::int64_t index = 0;
  std::uint64_t instance_seed = 0;
  env::Outcome outcome = env::Outcome::kTimeout;
  std::int64_t steps = 0;
  double extra_time = 0.0;  // NaN unless success
  double mean_abs_winding = 0.0;
  std::int64_t collision_step = -1;
};

struct AggregateReport {
  Method method = Method::kVanilla;
  env::ScenarioMode mode = env::ScenarioMode::kCrossing;
  int n_agents = 0;
  std::uint64_t seed = 0;
  int episodes = 0;
  double success_rate = 0.0;
  double collision_rate = 0.0;
  double timeout_rate = 0.0;
  double mean_extra_time = 0.0;  // NaN when nothing succeeded
  double mean_abs_winding = 0.0;
  bool seed_overlap = false;
  std::vector<EpisodeRow> rows;
};

std::uint64_t eval_instance_seed(std::uint64_t base, std::int64_t index);

// Evaluates cfg.method on cfg.n_episodes fresh instances. `policy` is
// required for the learned method. Every finished episode is passed to
// `on_episode` in index order.
using EpisodeFn = std::function<void(std::int64_t, std::uint64_t, const env::EpisodeResult&)>;
AggregateReport evaluate(const ExperimentConfig& cfg, const planner::PolicyParams* policy,
                         const EpisodeFn& on_episode = {});

// True when any evaluation instance seed was also used for training by a
// policy stamped with `stamp`.
bool seeds_overlap(const ExperimentConfig& cfg, const planner::TrainingStamp& stamp);

std::string report_json(const AggregateReport& r);
std::string report_csv(const AggregateReport& r);

struct GridCell {
  double alpha_g = 1.0;
  double alpha_o = 10.0;
  std::optional<double> alpha_w;
  friend bool operator==(const GridCell&, const GridCell&) = default;
};

// CSV with header alpha_g,alpha_o[,alpha_w].
std::vector<GridCell> parse_grid(const std::string& text);

struct SweepEntry {
  GridCell cell;
  AggregateReport report;
};

// Ranked by success rate (desc), mean extra time (asc, undefined last), then
// the cell values lexicographically.
std::vector<SweepEntry> sweep(const ExperimentConfig& cfg, const std::vector<GridCell>& grid,
                              const planner::PolicyParams* policy);
ExperimentConfig apply_cell(const ExperimentConfig& cfg, const GridCell& cell);
std::string sweep_csv(const std::vector<SweepEntry>& ranked);

}  // namespace wnum::exp
