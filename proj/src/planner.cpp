#include "wnum/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "wnum/errors.hpp"

namespace wnum::planner {

namespace {

constexpr double kDegenerateGoal = 1e-6;
constexpr double kLog2Pi = 1.8378770664093453;  // ln(2*pi)

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

}  // namespace

int Observation::valid_count() const {
  return static_cast<int>(std::count(mask.begin(), mask.end(), true));
}

std::vector<double> Observation::flatten() const {
  std::vector<double> x;
  x.reserve(static_cast<std::size_t>(kSelfFeatures + slots() * (kNeighborFeatures + 1)));
  x.insert(x.end(), self_features.begin(), self_features.end());
  for (int s = 0; s < slots(); ++s) {
    const bool valid = mask[static_cast<std::size_t>(s)];
    for (int f = 0; f < kNeighborFeatures; ++f) {
      x.push_back(valid ? neighbor_features[static_cast<std::size_t>(s * kNeighborFeatures + f)] : 0.0);
    }
    x.push_back(valid ? 1.0 : 0.0);
  }
  return x;
}

Observation encode_observation(const AgentState& s, std::span<const ObservedState> neighbors,
                               int n_max, double v_max) {
  if (n_max < 2) throw ContractError("encode_observation: n_max must be >= 2");
  if (static_cast<int>(neighbors.size()) > n_max - 1) {
    throw CapacityError("encode_observation: " + std::to_string(neighbors.size()) +
                        " neighbours exceed capacity " + std::to_string(n_max - 1));
  }
  const Vec2 to_goal = s.goal - s.position;
  const double goal_dist = norm(to_goal);
  const Vec2 heading_dir{std::cos(s.heading), std::sin(s.heading)};
  const Frame2 frame{s.position, goal_dist >= kDegenerateGoal ? to_goal * (1.0 / goal_dist) : heading_dir};

  Observation obs;
  obs.n_max = n_max;
  const Vec2 h = frame.to_local_dir(heading_dir);
  const Vec2 v = frame.to_local_dir(s.velocity);
  obs.self_features = {goal_dist, v_max, h.x, h.y, v.x, v.y, s.radius};

  std::vector<std::size_t> order(neighbors.size());
  std::vector<double> dist(neighbors.size());
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    order[i] = i;
    dist[i] = norm(neighbors[i].position - s.position);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dist[a] != dist[b]) return dist[a] < dist[b];
    return neighbors[a].id < neighbors[b].id;
  });

  const auto slots = static_cast<std::size_t>(n_max - 1);
  obs.neighbor_features.assign(slots * kNeighborFeatures, 0.0);
  obs.mask.assign(slots, false);
  obs.neighbor_ids.assign(slots, -1);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const ObservedState& n = neighbors[order[k]];
    const Vec2 rp = frame.to_local(n.position);
    const Vec2 rv = frame.to_local_dir(n.velocity - s.velocity);
    const double f[kNeighborFeatures] = {rp.x, rp.y, rv.x, rv.y, n.radius, n.radius + s.radius,
                                         dist[order[k]]};
    std::copy(std::begin(f), std::end(f), obs.neighbor_features.begin() + static_cast<std::ptrdiff_t>(k * kNeighborFeatures));
    obs.mask[k] = true;
    obs.neighbor_ids[k] = n.id;
  }
  return obs;
}

control::WindingPlan plan_constant(std::span<const ObservedState> neighbors, double target,
                                   double weight) {
  control::WindingPlan plan;
  for (const ObservedState& n : neighbors) plan.set(n.id, target, weight);
  return plan;
}

control::WindingPlan PlannerOutput::to_plan() const {
  control::WindingPlan plan;
  for (const PlanEntry& e : entries) plan.set(e.neighbor_id, e.target, e.weight);
  return plan;
}

double squash_target(double x, const Architecture& a) { return a.w_max * std::tanh(x); }

double squash_weight(double x, const Architecture& a) { return a.weight_scale * softplus(x); }

double squash_log_jacobian(double x_target, double x_weight, const Architecture& a) {
  // log(1 - tanh(x)^2) = 2 * (ln 2 - x - softplus(-2x)); log sigmoid(x) = -softplus(-x).
  const double log_dtanh = 2.0 * (std::numbers::ln2 - x_target - softplus(-2.0 * x_target));
  const double log_dsoftplus = -softplus(-x_weight);
  return std::log(a.w_max) + log_dtanh + std::log(a.weight_scale) + log_dsoftplus;
}

double gaussian_log_prob(std::span<const double> means, std::span<const double> log_std,
                         std::span<const double> raw, const std::vector<bool>& mask) {
  double lp = 0.0;
  for (std::size_t o = 0; o < means.size(); ++o) {
    if (!mask[o / kOutputsPerSlot]) continue;
    const double z = (raw[o] - means[o]) * std::exp(-log_std[o]);
    lp += -0.5 * z * z - log_std[o] - 0.5 * kLog2Pi;
  }
  return lp;
}

double squash_correction(std::span<const double> raw, const std::vector<bool>& mask,
                         const Architecture& a) {
  double c = 0.0;
  for (std::size_t s = 0; s < mask.size(); ++s) {
    if (!mask[s]) continue;
    c += squash_log_jacobian(raw[s * kOutputsPerSlot], raw[s * kOutputsPerSlot + 1], a);
  }
  return c;
}

double gaussian_entropy(std::span<const double> log_std, const std::vector<bool>& mask) {
  double h = 0.0;
  for (std::size_t o = 0; o < log_std.size(); ++o) {
    if (mask[o / kOutputsPerSlot]) h += log_std[o] + 0.5 * (kLog2Pi + 1.0);
  }
  return h;
}

ForwardResult forward(const PolicyParams& params, const Observation& obs) {
  if (obs.n_max != params.arch.n_max) {
    throw ContractError("observation capacity " + std::to_string(obs.n_max) +
                        " does not match the policy (" + std::to_string(params.arch.n_max) + ")");
  }
  const std::vector<double> x = obs.flatten();
  return forward_raw(params, x);
}

PlannerOutput sample_plan(const PolicyParams& params, const Observation& obs, std::mt19937_64& rng,
                          bool stochastic) {
  const ForwardResult f = forward(params, obs);
  PlannerOutput out;
  out.value_estimate = f.value;
  out.raw_action.assign(f.means.size(), 0.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int s = 0; s < obs.slots(); ++s) {
    if (!obs.mask[static_cast<std::size_t>(s)]) continue;
    const auto t = static_cast<std::size_t>(s * kOutputsPerSlot);
    const auto w = t + 1;
    out.raw_action[t] = f.means[t];
    out.raw_action[w] = f.means[w];
    if (stochastic) {
      out.raw_action[t] += std::exp(f.log_std[t]) * normal(rng);
      out.raw_action[w] += std::exp(f.log_std[w]) * normal(rng);
    }
    out.entries.push_back({obs.neighbor_ids[static_cast<std::size_t>(s)],
                           squash_target(out.raw_action[t], params.arch),
                           squash_weight(out.raw_action[w], params.arch)});
  }
  out.log_prob = gaussian_log_prob(f.means, f.log_std, out.raw_action, obs.mask) -
                 squash_correction(out.raw_action, obs.mask, params.arch);
  return out;
}

bool refresh_schedule(std::int64_t step, std::int64_t offset, std::int64_t period) {
  if (period < 1) throw ContractError("refresh_schedule: period must be >= 1");
  if (step == 0) return true;
  return (step + offset) % period == 0;
}

control::WindingPlan LearnedPlanner::plan(const PlanRequest& req) {
  const Observation obs = encode_observation(req.self, req.neighbors, params_->arch.n_max, v_max_);
  const PlannerOutput out = sample_plan(*params_, obs, rng_, stochastic_);
  if (sink_ != nullptr) sink_->on_decision(req, obs, out);
  return out.to_plan();
}

}  // namespace wnum::planner
