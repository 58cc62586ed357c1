#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "wnum/controller.hpp"
#include "wnum/dynamics.hpp"
#include "wnum/environment.hpp"
#include "wnum/planner.hpp"
#include "wnum/policy.hpp"

namespace wnum::learning {

struct RewardConfig {
  double collision = -1.0;
  double goal = 1.0;
  double proximity_threshold = 0.25;
  double proximity_scale = 1.5;
  // When an agent arrives inside the proximity band, pay the goal reward.
  bool goal_over_proximity = true;
};

// Per-step reward from the clearance d_min to the nearest neighbour.
double reward(double d_min, bool at_goal, const RewardConfig& cfg = {});

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// Plain GAE with a fixed discount. A step flagged done ends its episode
// (bootstrap 0); the last step, when not done, bootstraps with last_value.
GaeResult gae(std::span<const double> rewards, std::span<const double> values,
              const std::vector<bool>& dones, double gamma, double lambda,
              double last_value = 0.0);

// General form used for plan-level decisions: each step has its own
// discount, and terminal steps bootstrap with their own value (0 for a true
// termination, V(s_T) for a truncated episode).
GaeResult gae(std::span<const double> rewards, std::span<const double> values,
              std::span<const double> discounts, const std::vector<bool>& terminal,
              std::span<const double> bootstrap, double lambda);

// One planner decision held over the following refresh interval.
struct TransitionRecord {
  std::vector<double> input;  // flattened observation
  std::vector<bool> mask;
  std::vector<double> raw_action;
  double log_prob = 0.0;
  // Sum of gamma^m * r_m over the held interval.
  double reward = 0.0;
  double value = 0.0;
  // gamma^M for an interval of M steps.
  double discount = 1.0;
  bool done = false;
  double bootstrap = 0.0;
  int agent_id = 0;
  std::int64_t episode_id = 0;
  std::int64_t step = 0;
};

struct PpoConfig {
  double gamma = 0.95;
  double gae_lambda = 0.9;
  double clip = 0.1;
  int epochs = 4;
  double learning_rate = 4e-4;
  // Decisions collected per update.
  int batch_size = 1024;
  int minibatch_size = 256;
  double entropy_coef = 1e-3;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double advantage_eps = 1e-8;
  // World steps of experience before training stops.
  std::int64_t total_env_steps = 200000;

  // Defaults for N agents: the small-team set up to five agents, the large
  // set beyond.
  static PpoConfig for_agents(int n_agents);
  void validate() const;
};

// Input to the loss: a record with its advantage and return attached.
struct PpoSample {
  std::span<const double> input;
  const std::vector<bool>* mask = nullptr;
  std::span<const double> raw_action;
  double old_log_prob = 0.0;
  double advantage = 0.0;
  double ret = 0.0;
};

struct PpoLoss {
  // total = -surrogate + value_coef * value_loss - entropy_coef * entropy
  double total = 0.0;
  double surrogate = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  std::vector<double> grad_weights;
  std::vector<double> grad_log_std;
};

// Minibatch loss and its exact gradient with respect to every parameter.
PpoLoss ppo_loss(const planner::PolicyParams& params, std::span<const PpoSample> batch,
                 const PpoConfig& cfg);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;
};

struct UpdateStats {
  double surrogate = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double grad_norm = 0.0;
  int minibatches = 0;
};

// Clipped-surrogate update over `epochs` shuffled passes. Advantages are
// normalised over the whole batch first. Throws NumericalError, leaving
// params untouched by the failing step, on a non-finite loss or gradient.
UpdateStats ppo_update(planner::PolicyParams& params, AdamState& adam,
                       std::span<const TransitionRecord> batch, const GaeResult& targets,
                       const PpoConfig& cfg, std::uint64_t shuffle_seed);

// Advantages and returns for a buffer laid out as contiguous per-agent
// decision sequences, each closed by a done record.
GaeResult compute_targets(std::span<const TransitionRecord> records, double lambda);

struct EpisodeSummary {
  std::int64_t episode_id = 0;
  env::Outcome outcome = env::Outcome::kTimeout;
  std::int64_t steps = 0;
  // Undiscounted per-step reward summed over the episode, averaged over agents.
  double mean_return = 0.0;
};

// Everything that defines a training run.
struct TrainConfig {
  PpoConfig ppo;
  RewardConfig reward;
  env::ScenarioConfig scenario;
  DynamicsConfig dynamics;
  control::ControllerConfig controller;
  env::EpisodeLimits limits;
  planner::Architecture arch;
  planner::InitOptions init;
  std::uint64_t seed = 0;
  // Empty disables checkpoints and the metrics log.
  std::filesystem::path out_dir;
  int checkpoint_every = 10;
};

// Converts one run_episode into per-agent decision records. Attach it as both
// the planner's decision sink and the episode observer.
class RolloutRecorder final : public planner::DecisionSink, public env::EpisodeObserver {
 public:
  RolloutRecorder(const planner::PolicyParams& params, const DynamicsConfig& dyn,
                  const RewardConfig& reward, double gamma, std::int64_t episode_id, int n_agents);

  void on_decision(const planner::PlanRequest& req, const planner::Observation& obs,
                   const planner::PlannerOutput& out) override;
  void on_step(const env::StepEvents& ev) override;
  void on_end(const env::WorldState& final_world, env::Outcome outcome) override;

  // Records grouped by agent, each sequence closed by a done record.
  std::vector<TransitionRecord> take_records();
  double mean_return() const;

 private:
  struct Open {
    TransitionRecord rec;
    int held_steps = 0;
  };

  const planner::PolicyParams* params_;
  DynamicsConfig dyn_;
  RewardConfig reward_;
  double gamma_;
  std::int64_t episode_id_;
  std::vector<std::vector<TransitionRecord>> closed_;
  std::vector<std::optional<Open>> open_;
  std::vector<double> returns_;
};

// Episode index of the k-th episode collected in a training iteration, and
// the instance seed it uses.
std::int64_t train_episode_index(std::int64_t iteration, std::int64_t k);
std::uint64_t train_instance_seed(std::uint64_t base, std::int64_t episode_index);

struct Rollout {
  std::vector<TransitionRecord> records;
  std::vector<EpisodeSummary> episodes;
  std::int64_t env_steps = 0;
};

// Runs whole episodes with the stochastic planner until at least
// min_records decisions are stored. Episode i uses instance seed
// train_instance_seed(cfg.seed, first_episode + i).
Rollout collect_rollouts(const TrainConfig& cfg, const planner::PolicyParams& params,
                         std::int64_t min_records, std::int64_t first_episode);

struct IterationMetrics {
  std::int64_t iteration = 0;
  std::int64_t env_steps = 0;
  double mean_return = 0.0;
  double success_rate = 0.0;
  double collision_rate = 0.0;
  double timeout_rate = 0.0;
  double mean_episode_len = 0.0;
  double entropy = 0.0;
  double kl = 0.0;
};

struct TrainResult {
  planner::PolicyParams params;
  std::vector<IterationMetrics> curve;
};

using ProgressFn = std::function<void(const IterationMetrics&)>;

// Alternates collection and updates until total_env_steps. With `resume`,
// training continues from the stamped iteration and step counters.
TrainResult train(const TrainConfig& cfg, std::optional<planner::PolicyParams> resume = {},
                  const ProgressFn& progress = {});

// Metrics CSV: header written only when the file is new or empty.
void append_metrics(const std::filesystem::path& path, const IterationMetrics& m);
std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::int64_t iteration);

}  // namespace wnum::learning
