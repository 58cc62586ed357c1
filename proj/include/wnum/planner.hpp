#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "wnum/controller.hpp"
#include "wnum/dynamics.hpp"
#include "wnum/policy.hpp"

namespace wnum::planner {

// Planner input in the agent's goal-aligned frame (+x toward the goal,
// origin at the agent). Neighbours are sorted by distance; unused slots are
// zero with mask false.
struct Observation {
  int n_max = 8;
  std::vector<double> self_features;      // kSelfFeatures
  std::vector<double> neighbor_features;  // slots * kNeighborFeatures
  std::vector<bool> mask;                 // slots
  std::vector<int> neighbor_ids;          // slots, -1 when padded

  int slots() const { return n_max - 1; }
  int valid_count() const;
  // Flat network input: self features, then per slot the features followed
  // by the mask flag. Masked slots are always zero.
  std::vector<double> flatten() const;
};

Observation encode_observation(const AgentState& s, std::span<const ObservedState> neighbors,
                               int n_max, double v_max);

// Every neighbour gets the same (target, weight). weight 0 is the Vanilla
// MPC plan; target 0 with a negative constant weight is the T-MPC plan.
control::WindingPlan plan_constant(std::span<const ObservedState> neighbors, double target,
                                   double weight);

struct PlanEntry {
  int neighbor_id = -1;
  double target = 0.0;
  double weight = 0.0;
};

struct PlannerOutput {
  std::vector<PlanEntry> entries;  // one per valid slot, in slot order
  std::vector<double> raw_action;  // pre-squash sample, all slots (padded slots 0)
  double value_estimate = 0.0;
  // Log density of the squashed (target, weight) sample.
  double log_prob = 0.0;

  control::WindingPlan to_plan() const;
};

// Squashing maps shared by sampling, log-probs and tests.
double squash_target(double x, const Architecture& a);
double squash_weight(double x, const Architecture& a);
// log |d squash / dx| summed over both outputs of one slot.
double squash_log_jacobian(double x_target, double x_weight, const Architecture& a);

// Gaussian log density of `raw` under (means, log_std), valid slots only.
double gaussian_log_prob(std::span<const double> means, std::span<const double> log_std,
                         std::span<const double> raw, const std::vector<bool>& mask);
// Change-of-variables correction for the squashed density, valid slots only.
double squash_correction(std::span<const double> raw, const std::vector<bool>& mask,
                         const Architecture& a);
double gaussian_entropy(std::span<const double> log_std, const std::vector<bool>& mask);

ForwardResult forward(const PolicyParams& params, const Observation& obs);

PlannerOutput sample_plan(const PolicyParams& params, const Observation& obs, std::mt19937_64& rng,
                          bool stochastic);

// True at step 0 and whenever (step + offset) is a multiple of period.
bool refresh_schedule(std::int64_t step, std::int64_t offset, std::int64_t period);

struct PlanRequest {
  int agent = 0;
  std::int64_t step = 0;
  const AgentState& self;
  std::span<const ObservedState> neighbors;
};

// High-level policy queried at refresh instants.
class Planner {
 public:
  virtual ~Planner() = default;
  virtual control::WindingPlan plan(const PlanRequest& req) = 0;
};

// Fixed (target, weight) for every neighbour.
class ConstantPlanner final : public Planner {
 public:
  ConstantPlanner(double target, double weight) : target_(target), weight_(weight) {}
  control::WindingPlan plan(const PlanRequest& req) override {
    return plan_constant(req.neighbors, target_, weight_);
  }

 private:
  double target_;
  double weight_;
};

// Receives every decision made by a LearnedPlanner (used by rollout collection).
class DecisionSink {
 public:
  virtual ~DecisionSink() = default;
  virtual void on_decision(const PlanRequest& req, const Observation& obs,
                           const PlannerOutput& out) = 0;
};

class LearnedPlanner final : public Planner {
 public:
  LearnedPlanner(const PolicyParams& params, double v_max, bool stochastic, std::uint64_t seed)
      : params_(&params), v_max_(v_max), stochastic_(stochastic), rng_(seed) {}

  void set_sink(DecisionSink* sink) { sink_ = sink; }
  control::WindingPlan plan(const PlanRequest& req) override;

 private:
  const PolicyParams* params_;
  double v_max_;
  bool stochastic_;
  std::mt19937_64 rng_;
  DecisionSink* sink_ = nullptr;
};

}  // namespace wnum::planner
