#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "wnum/dynamics.hpp"
#include "wnum/geometry.hpp"

// Winding-number-aware sampling MPC.
//
// Each call searches action sequences over a horizon of K steps and returns
// the first action of the cheapest one under
//
//   J = alpha_g * J_goal + alpha_o * J_collision + J_winding
//
// Neighbours are extrapolated at constant velocity. The search is seeded
// random shooting: piecewise-constant sequences drawn uniformly from the
// feasible input set plus three deterministic candidates (zero input,
// straight-to-goal feedback, previous solution shifted by one step).
//
// Everything is evaluated in a goal-aligned local frame centred on the
// agent, which makes the controller exactly equivariant under rotations and
// point reflections of the whole scene.
namespace wnum::control {

// Symmetric positive-definite 2x2 weight.
struct Matrix2 {
  double xx = 1.0;
  double xy = 0.0;
  double yy = 1.0;

  double quadratic(Vec2 v) const { return xx * v.x * v.x + 2.0 * xy * v.x * v.y + yy * v.y * v.y; }
  bool positive_definite() const { return xx > 0.0 && xx * yy - xy * xy > 0.0; }
  // R^T Q R for the rotation whose first column is `axis`.
  Matrix2 rotated_into(Vec2 axis) const;
  static Matrix2 diag(double a, double b) { return {a, 0.0, b}; }
};

struct ControllerConfig {
  int horizon = 10;
  double alpha_g = 1.0;
  double alpha_o = 10.0;
  Matrix2 q_goal;
  double sigma_h = 0.5;
  double sigma_r = 0.3;
  double sigma_s = 0.35;
  int num_candidates = 256;
  // Number of piecewise-constant segments in each random candidate.
  int segments = 2;
  std::uint64_t rng_seed = 0;
  // When every winding weight is zero the winding term is skipped entirely.
  bool skip_zero_weight_winding = true;

  void validate() const;
};

// Per-neighbour target winding numbers and weights, keyed by neighbour id.
struct WindingPlan {
  std::map<int, double> targets;
  std::map<int, double> weights;

  bool empty() const { return targets.empty(); }
  void set(int id, double target, double weight) {
    targets[id] = target;
    weights[id] = weight;
  }
};

// Constant-velocity extrapolation of one neighbour.
struct PredictedPath {
  int id = 0;
  double radius = 0.15;
  std::vector<Vec2> points;
};

struct CandidateRollout {
  std::vector<Action> actions;
  std::vector<AgentState> own_path;
  double cost = 0.0;
};

// Caller-owned solver memory carried between calls for one agent.
struct WarmStart {
  // Previous best sequence, world frame.
  std::vector<Action> sequence;
  // Number of completed solves; mixes into the sampling seed.
  std::uint64_t iteration = 0;
};

struct Solution {
  Action action;
  double cost = 0.0;
  std::size_t candidate_index = 0;
  std::size_t candidate_count = 0;
  WarmStart warm;
};

std::vector<PredictedPath> predict_others(std::span<const ObservedState> neighbors, int horizon,
                                          double dt);

double goal_cost(std::span<const AgentState> own_path, const Matrix2& q_goal);

// Heading-frame asymmetric Gaussian. `rel` is the offset of the other agent
// in the own heading frame (x forward). The offset is shortened by
// radii_sum along its own direction, so contact or overlap gives 1.
double asymmetric_gaussian(Vec2 rel, double sigma_h, double sigma_r, double sigma_s,
                           double radii_sum);

double collision_cost(std::span<const AgentState> own_path,
                      std::span<const PredictedPath> other_paths, const ControllerConfig& cfg);

// (1/(N-1)) * sum_j weight_j * (w(own, other_j) - target_j)^2. Throws
// ContractError unless the plan covers exactly the given neighbours.
double winding_cost(std::span<const AgentState> own_path,
                    std::span<const PredictedPath> other_paths, const WindingPlan& plan,
                    int n_agents);

double total_cost(std::span<const AgentState> own_path, std::span<const PredictedPath> other_paths,
                  const WindingPlan& plan, const ControllerConfig& cfg, int n_agents);

// Rolls an action sequence forward from s with the shared dynamics.
CandidateRollout rollout(const AgentState& s, std::span<const Action> actions,
                         const DynamicsConfig& dyn);

// Goal-seeking feedback sequence used as a deterministic candidate.
std::vector<Action> straight_to_goal_sequence(const AgentState& s, int horizon,
                                              const DynamicsConfig& dyn);

// Candidate evaluation runs in parallel with OpenMP; reduction picks the
// lowest cost with ties going to the lowest candidate index.
Solution solve(const AgentState& s, std::span<const ObservedState> neighbors,
               const WindingPlan& plan, const ControllerConfig& cfg, const DynamicsConfig& dyn,
               const WarmStart& warm = {});

// Single-threaded reference for `solve`; results are bit-identical.
Solution solve_serial(const AgentState& s, std::span<const ObservedState> neighbors,
                      const WindingPlan& plan, const ControllerConfig& cfg,
                      const DynamicsConfig& dyn, const WarmStart& warm = {});

// Same search with the winding term compiled out.
Solution solve_without_winding(const AgentState& s, std::span<const ObservedState> neighbors,
                               const ControllerConfig& cfg, const DynamicsConfig& dyn,
                               const WarmStart& warm = {});

// Costs of every candidate in candidate order (for diagnostics and tests).
std::vector<double> candidate_costs(const AgentState& s, std::span<const ObservedState> neighbors,
                                    const WindingPlan& plan, const ControllerConfig& cfg,
                                    const DynamicsConfig& dyn, const WarmStart& warm = {});

}  // namespace wnum::control
