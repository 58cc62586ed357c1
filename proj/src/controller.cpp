#include "wnum/controller.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "wnum/errors.hpp"
#include "wnum/seeding.hpp"
#include "wnum/topology.hpp"

namespace wnum::control {

Matrix2 Matrix2::rotated_into(Vec2 axis) const {
  // Columns of R are axis and its left normal.
  const double c = axis.x;
  const double s = axis.y;
  const double a = xx, b = xy, d = yy;
  return {c * c * a + 2.0 * c * s * b + s * s * d, -c * s * a + (c * c - s * s) * b + c * s * d,
          s * s * a - 2.0 * c * s * b + c * c * d};
}

void ControllerConfig::validate() const {
  if (horizon < 1) throw ConfigError("controller.horizon must be >= 1");
  if (!(alpha_g >= 0.0) || !(alpha_o >= 0.0)) {
    throw ConfigError("controller.alpha_g and controller.alpha_o must be >= 0");
  }
  if (!q_goal.positive_definite()) throw ConfigError("controller.q_goal must be positive definite");
  if (!(sigma_h > 0.0) || !(sigma_r > 0.0) || !(sigma_s > 0.0)) {
    throw ConfigError("controller sigmas must be > 0");
  }
  if (num_candidates < 0) throw ConfigError("controller.num_candidates must be >= 0");
  if (segments < 1) throw ConfigError("controller.segments must be >= 1");
}

std::vector<PredictedPath> predict_others(std::span<const ObservedState> neighbors, int horizon,
                                          double dt) {
  std::vector<PredictedPath> out;
  out.reserve(neighbors.size());
  for (const ObservedState& n : neighbors) {
    PredictedPath p{n.id, n.radius, {}};
    p.points.reserve(static_cast<std::size_t>(horizon) + 1);
    for (int k = 0; k <= horizon; ++k) p.points.push_back(n.position + n.velocity * (k * dt));
    out.push_back(std::move(p));
  }
  return out;
}

double goal_cost(std::span<const AgentState> own_path, const Matrix2& q_goal) {
  double j = 0.0;
  for (const AgentState& s : own_path) j += q_goal.quadratic(s.position - s.goal);
  return j;
}

double asymmetric_gaussian(Vec2 rel, double sigma_h, double sigma_r, double sigma_s,
                           double radii_sum) {
  const double d = norm(rel);
  if (d <= radii_sum) return 1.0;
  const Vec2 eff = rel * ((d - radii_sum) / d);
  const double sx = eff.x >= 0.0 ? sigma_h : sigma_r;
  return std::exp(-0.5 * (eff.x * eff.x / (sx * sx) + eff.y * eff.y / (sigma_s * sigma_s)));
}

namespace {

// Squared penalty of every neighbour at step k, in the own heading frame.
double collision_step(const AgentState& s, std::span<const PredictedPath> others, std::size_t k,
                      const ControllerConfig& cfg) {
  if (others.empty()) return 0.0;
  const Vec2 h{std::cos(s.heading), std::sin(s.heading)};
  double j = 0.0;
  for (const PredictedPath& o : others) {
    const Vec2 r = o.points[k] - s.position;
    const double a = asymmetric_gaussian({dot(r, h), cross(h, r)}, cfg.sigma_h, cfg.sigma_r,
                                         cfg.sigma_s, s.radius + o.radius);
    j += a * a;
  }
  return j;
}

double winding_term(std::span<const Vec2> own, std::span<const PredictedPath> others,
                    std::span<const double> targets, std::span<const double> weights,
                    int n_agents) {
  if (others.empty()) return 0.0;
  double j = 0.0;
  for (std::size_t i = 0; i < others.size(); ++i) {
    const double w = topology::predicted_winding_number(own, others[i].points);
    const double e = w - targets[i];
    j += weights[i] * e * e;
  }
  return j / static_cast<double>(n_agents - 1);
}

// Plan entries aligned with `others`; throws unless the key sets match.
void align_plan(const WindingPlan& plan, std::span<const PredictedPath> others,
                std::vector<double>& targets, std::vector<double>& weights) {
  if (plan.targets.size() != others.size() || plan.weights.size() != others.size()) {
    throw ContractError("winding plan covers " + std::to_string(plan.targets.size()) +
                        " neighbours, expected " + std::to_string(others.size()));
  }
  targets.clear();
  weights.clear();
  for (const PredictedPath& o : others) {
    auto t = plan.targets.find(o.id);
    auto w = plan.weights.find(o.id);
    if (t == plan.targets.end() || w == plan.weights.end()) {
      throw ContractError("winding plan has no entry for neighbour " + std::to_string(o.id));
    }
    targets.push_back(t->second);
    weights.push_back(w->second);
  }
}

std::vector<Vec2> positions_of(std::span<const AgentState> path) {
  std::vector<Vec2> out;
  out.reserve(path.size());
  for (const AgentState& s : path) out.push_back(s.position);
  return out;
}

}  // namespace

double collision_cost(std::span<const AgentState> own_path,
                      std::span<const PredictedPath> other_paths, const ControllerConfig& cfg) {
  for (const PredictedPath& o : other_paths) {
    if (o.points.size() != own_path.size()) throw ShapeError("collision_cost: path length mismatch");
  }
  double j = 0.0;
  for (std::size_t k = 0; k < own_path.size(); ++k) {
    j += collision_step(own_path[k], other_paths, k, cfg);
  }
  return j;
}

double winding_cost(std::span<const AgentState> own_path,
                    std::span<const PredictedPath> other_paths, const WindingPlan& plan,
                    int n_agents) {
  std::vector<double> targets, weights;
  align_plan(plan, other_paths, targets, weights);
  const std::vector<Vec2> own = positions_of(own_path);
  return winding_term(own, other_paths, targets, weights, n_agents);
}

double total_cost(std::span<const AgentState> own_path, std::span<const PredictedPath> other_paths,
                  const WindingPlan& plan, const ControllerConfig& cfg, int n_agents) {
  return cfg.alpha_g * goal_cost(own_path, cfg.q_goal) +
         cfg.alpha_o * collision_cost(own_path, other_paths, cfg) +
         winding_cost(own_path, other_paths, plan, n_agents);
}

CandidateRollout rollout(const AgentState& s, std::span<const Action> actions,
                         const DynamicsConfig& dyn) {
  CandidateRollout r;
  r.actions.assign(actions.begin(), actions.end());
  r.own_path.reserve(actions.size() + 1);
  r.own_path.push_back(s);
  for (const Action& a : actions) r.own_path.push_back(step(r.own_path.back(), a, dyn));
  return r;
}

std::vector<Action> straight_to_goal_sequence(const AgentState& s, int horizon,
                                              const DynamicsConfig& dyn) {
  std::vector<Action> seq;
  seq.reserve(static_cast<std::size_t>(horizon));
  AgentState cur = s;
  for (int k = 0; k < horizon; ++k) {
    const Vec2 d = cur.goal - cur.position;
    Action a;
    if (dyn.model == DynamicsModel::kHolonomic) {
      a = Action::from(clamp_holonomic(d * (1.0 / dyn.dt), dyn.v_max));
    } else {
      const double dist = norm(d);
      double err = 0.0;
      if (dist > 0.0) err = wrap_angle(std::atan2(d.y, d.x) - cur.heading);
      const double v = std::min(dist / dyn.dt, dyn.v_max) * std::max(0.0, std::cos(err));
      a = Action::from(clamp_diffdrive({v, err / dyn.dt}, dyn.v_max, dyn.wheel_coef));
    }
    seq.push_back(a);
    cur = step(cur, a, dyn);
  }
  return seq;
}

namespace {

constexpr double kDegenerateGoal = 1e-6;

// The whole search problem expressed in the agent's local frame.
struct LocalProblem {
  Frame2 frame;
  AgentState self;
  std::vector<PredictedPath> others;
  std::vector<double> targets;
  std::vector<double> weights;
  ControllerConfig cfg;
  int n_agents = 1;
  bool winding = false;
};

Frame2 agent_frame(const AgentState& s) {
  const Vec2 d = s.goal - s.position;
  const double n = norm(d);
  if (n >= kDegenerateGoal) return {s.position, d * (1.0 / n)};
  return {s.position, {std::cos(s.heading), std::sin(s.heading)}};
}

Action to_local(const Frame2& f, Action a, const DynamicsConfig& dyn) {
  if (dyn.model == DynamicsModel::kDiffDrive) return a;
  const Vec2 v = f.to_local_dir({a.u0, a.u1});
  return {v.x, v.y};
}

Action to_world(const Frame2& f, Action a, const DynamicsConfig& dyn) {
  if (dyn.model == DynamicsModel::kDiffDrive) return a;
  const Vec2 v = f.to_world_dir({a.u0, a.u1});
  return {v.x, v.y};
}

LocalProblem make_problem(const AgentState& s, std::span<const ObservedState> neighbors,
                          const WindingPlan* plan, const ControllerConfig& cfg,
                          const DynamicsConfig& dyn) {
  cfg.validate();
  LocalProblem p;
  p.frame = agent_frame(s);
  p.cfg = cfg;
  p.cfg.q_goal = cfg.q_goal.rotated_into(p.frame.axis);
  p.self = s;
  p.self.position = {0.0, 0.0};
  p.self.goal = p.frame.to_local(s.goal);
  p.self.velocity = p.frame.to_local_dir(s.velocity);
  const Vec2 h = p.frame.to_local_dir({std::cos(s.heading), std::sin(s.heading)});
  p.self.heading = std::atan2(h.y, h.x);
  p.n_agents = static_cast<int>(neighbors.size()) + 1;

  std::vector<ObservedState> local(neighbors.begin(), neighbors.end());
  for (ObservedState& n : local) {
    n.position = p.frame.to_local(n.position);
    n.velocity = p.frame.to_local_dir(n.velocity);
  }
  p.others = predict_others(local, cfg.horizon, dyn.dt);

  if (plan != nullptr) {
    align_plan(*plan, p.others, p.targets, p.weights);
    p.winding = !p.others.empty();
    if (cfg.skip_zero_weight_winding) {
      p.winding = std::any_of(p.weights.begin(), p.weights.end(), [](double w) { return w != 0.0; });
    }
  }
  return p;
}

Action sample_feasible(std::mt19937_64& rng, const DynamicsConfig& dyn) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (dyn.model == DynamicsModel::kHolonomic) {
    const double r = dyn.v_max * std::sqrt(unit(rng));
    const double phi = kTwoPi * unit(rng);
    return {r * std::cos(phi), r * std::sin(phi)};
  }
  // Uniform over the diamond |u +- psi/c| <= L via the two wheel coordinates.
  std::uniform_real_distribution<double> wheel(-dyn.v_max, dyn.v_max);
  const double a = wheel(rng);
  const double b = wheel(rng);
  return {(a + b) / 2.0, dyn.wheel_coef * (a - b) / 2.0};
}

// Flat candidate table, `horizon` actions per row, local frame.
struct CandidateSet {
  std::vector<Action> actions;
  std::size_t count = 0;
  std::span<const Action> row(std::size_t i, std::size_t horizon) const {
    return std::span<const Action>(actions).subspan(i * horizon, horizon);
  }
};

CandidateSet make_candidates(const LocalProblem& p, const DynamicsConfig& dyn,
                             const WarmStart& warm) {
  const auto horizon = static_cast<std::size_t>(p.cfg.horizon);
  CandidateSet c;
  c.actions.reserve((static_cast<std::size_t>(p.cfg.num_candidates) + 3) * horizon);

  c.actions.insert(c.actions.end(), horizon, Action{});
  const std::vector<Action> straight = straight_to_goal_sequence(p.self, p.cfg.horizon, dyn);
  c.actions.insert(c.actions.end(), straight.begin(), straight.end());
  c.count = 2;

  if (warm.sequence.size() == horizon) {
    for (std::size_t k = 1; k < horizon; ++k) {
      c.actions.push_back(to_local(p.frame, warm.sequence[k], dyn));
    }
    c.actions.push_back(to_local(p.frame, warm.sequence.back(), dyn));
    ++c.count;
  }

  std::mt19937_64 rng(derive_seed(p.cfg.rng_seed, SeedStream::kController, warm.iteration));
  const auto segments = static_cast<std::size_t>(p.cfg.segments);
  const std::size_t seg_len = (horizon + segments - 1) / segments;
  for (int i = 0; i < p.cfg.num_candidates; ++i) {
    Action a{};
    for (std::size_t k = 0; k < horizon; ++k) {
      if (k % seg_len == 0) a = sample_feasible(rng, dyn);
      c.actions.push_back(a);
    }
    ++c.count;
  }
  return c;
}

template <bool kWinding>
double rollout_cost(const LocalProblem& p, std::span<const Action> seq, const DynamicsConfig& dyn,
                    std::vector<Vec2>& own) {
  AgentState s = p.self;
  own[0] = s.position;
  double jg = p.cfg.q_goal.quadratic(s.position - s.goal);
  double jo = collision_step(s, p.others, 0, p.cfg);
  for (std::size_t k = 0; k < seq.size(); ++k) {
    s = step(s, seq[k], dyn);
    own[k + 1] = s.position;
    jg += p.cfg.q_goal.quadratic(s.position - s.goal);
    jo += collision_step(s, p.others, k + 1, p.cfg);
  }
  double j = p.cfg.alpha_g * jg + p.cfg.alpha_o * jo;
  if constexpr (kWinding) j += winding_term(own, p.others, p.targets, p.weights, p.n_agents);
  return j;
}

template <bool kWinding, bool kParallel>
void evaluate(const LocalProblem& p, const CandidateSet& c, const DynamicsConfig& dyn,
              std::vector<double>& costs) {
  const auto horizon = static_cast<std::size_t>(p.cfg.horizon);
  const auto n = static_cast<std::ptrdiff_t>(c.count);
  costs.assign(c.count, 0.0);
  if constexpr (kParallel) {
#pragma omp parallel
    {
      std::vector<Vec2> own(horizon + 1);
#pragma omp for schedule(static)
      for (std::ptrdiff_t i = 0; i < n; ++i) {
        costs[static_cast<std::size_t>(i)] =
            rollout_cost<kWinding>(p, c.row(static_cast<std::size_t>(i), horizon), dyn, own);
      }
    }
  } else {
    std::vector<Vec2> own(horizon + 1);
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      costs[static_cast<std::size_t>(i)] =
          rollout_cost<kWinding>(p, c.row(static_cast<std::size_t>(i), horizon), dyn, own);
    }
  }
}

Solution pick(const LocalProblem& p, const CandidateSet& c, const std::vector<double>& costs,
              const DynamicsConfig& dyn, const WarmStart& warm) {
  const auto horizon = static_cast<std::size_t>(p.cfg.horizon);
  std::size_t best = 0;
  for (std::size_t i = 1; i < costs.size(); ++i) {
    if (costs[i] < costs[best]) best = i;
  }
  Solution sol;
  sol.cost = costs[best];
  sol.candidate_index = best;
  sol.candidate_count = c.count;
  const std::span<const Action> row = c.row(best, horizon);
  sol.warm.sequence.reserve(horizon);
  for (const Action& a : row) sol.warm.sequence.push_back(clamp(to_world(p.frame, a, dyn), dyn));
  sol.warm.iteration = warm.iteration + 1;
  sol.action = sol.warm.sequence.front();
  return sol;
}

template <bool kParallel>
Solution solve_impl(const AgentState& s, std::span<const ObservedState> neighbors,
                    const WindingPlan* plan, const ControllerConfig& cfg,
                    const DynamicsConfig& dyn, const WarmStart& warm) {
  const LocalProblem p = make_problem(s, neighbors, plan, cfg, dyn);
  const CandidateSet c = make_candidates(p, dyn, warm);
  std::vector<double> costs;
  if (p.winding) {
    evaluate<true, kParallel>(p, c, dyn, costs);
  } else {
    evaluate<false, kParallel>(p, c, dyn, costs);
  }
  return pick(p, c, costs, dyn, warm);
}

}  // namespace

Solution solve(const AgentState& s, std::span<const ObservedState> neighbors,
               const WindingPlan& plan, const ControllerConfig& cfg, const DynamicsConfig& dyn,
               const WarmStart& warm) {
  return solve_impl<true>(s, neighbors, &plan, cfg, dyn, warm);
}

Solution solve_serial(const AgentState& s, std::span<const ObservedState> neighbors,
                      const WindingPlan& plan, const ControllerConfig& cfg,
                      const DynamicsConfig& dyn, const WarmStart& warm) {
  return solve_impl<false>(s, neighbors, &plan, cfg, dyn, warm);
}

Solution solve_without_winding(const AgentState& s, std::span<const ObservedState> neighbors,
                               const ControllerConfig& cfg, const DynamicsConfig& dyn,
                               const WarmStart& warm) {
  return solve_impl<true>(s, neighbors, nullptr, cfg, dyn, warm);
}

std::vector<double> candidate_costs(const AgentState& s, std::span<const ObservedState> neighbors,
                                    const WindingPlan& plan, const ControllerConfig& cfg,
                                    const DynamicsConfig& dyn, const WarmStart& warm) {
  const LocalProblem p = make_problem(s, neighbors, &plan, cfg, dyn);
  const CandidateSet c = make_candidates(p, dyn, warm);
  std::vector<double> costs;
  if (p.winding) {
    evaluate<true, false>(p, c, dyn, costs);
  } else {
    evaluate<false, false>(p, c, dyn, costs);
  }
  return costs;
}

}  // namespace wnum::control
