// Acceptance checks. Each criterion prints one PASS/FAIL line; run a single
// one with --criterion N.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "oracles.hpp"
#include "wnum/controller.hpp"
#include "wnum/environment.hpp"
#include "wnum/episode_io.hpp"
#include "wnum/experiments.hpp"
#include "wnum/learning.hpp"
#include "wnum/seeding.hpp"
#include "wnum/topology.hpp"

using namespace wnum;
using wnum::topology::winding_number;
namespace fs = std::filesystem;

namespace {

// Tolerances and sizes.
constexpr double kOracleTol = 1e-6;
constexpr double kRoleTol = 1e-12;
constexpr double kRigidTol = 1e-9;
constexpr double kMirrorTol = 1e-9;
constexpr double kConcatTol = 1e-12;
constexpr double kOracleSeconds = 10.0;
constexpr double kSymmetryTol = 1e-9;
constexpr double kMinRealizedWinding = 0.3;
constexpr double kTopologySeconds = 30.0;
constexpr double kFdStep = 1e-6;
constexpr double kFdTol = 1e-5;
constexpr double kGaeTol = 1e-10;
constexpr std::int64_t kTrainSteps = 200000;
constexpr std::uint64_t kTrainSeed = 2024;
constexpr std::uint64_t kEvalSeed = 7;
constexpr int kEvalEpisodes = 100;
constexpr int kFeasibilityEpisodes = 1000;

struct Verdict {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------------------

Verdict criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_oracle = 0.0;
  {
    std::mt19937_64 rng(101);
    for (int trial = 0; trial < 1000; ++trial) {
      const auto pair = oracle::random_smooth_pair(rng, 30);
      const double w = winding_number(oracle::sample(pair.a, 30, 1), oracle::sample(pair.b, 30, 1));
      worst_oracle = std::max(worst_oracle, std::abs(w - oracle::dense_winding(pair, 30, 10)));
    }
  }
  double worst_role = 0.0, worst_rigid = 0.0, worst_mirror = 0.0, worst_concat = 0.0;
  {
    std::mt19937_64 rng(102);
    std::uniform_real_distribution<double> ang(-kPi, kPi), off(-5.0, 5.0);
    for (int trial = 0; trial < 200; ++trial) {
      const auto pair = oracle::random_smooth_pair(rng, 40);
      const auto a = oracle::sample(pair.a, 40, 1);
      const auto b = oracle::sample(pair.b, 40, 1);
      const double w = winding_number(a, b);
      worst_role = std::max(worst_role, std::abs(winding_number(b, a) - w));

      const double th = ang(rng);
      const Vec2 t{off(rng), off(rng)};
      const Vec2 d{std::cos(th), std::sin(th)};
      std::vector<Vec2> ra, rb, ma, mb;
      for (std::size_t k = 0; k < a.size(); ++k) {
        auto rigid = [&](Vec2 p) {
          return Vec2{d.x * p.x - d.y * p.y + t.x, d.y * p.x + d.x * p.y + t.y};
        };
        auto mirror = [&](Vec2 p) {
          const Vec2 r = p - t;
          return t + 2.0 * dot(r, d) * d - r;
        };
        ra.push_back(rigid(a[k]));
        rb.push_back(rigid(b[k]));
        ma.push_back(mirror(a[k]));
        mb.push_back(mirror(b[k]));
      }
      worst_rigid = std::max(worst_rigid, std::abs(winding_number(ra, rb) - w));
      worst_mirror = std::max(worst_mirror, std::abs(winding_number(ma, mb) + w));

      const std::size_t m = 1 + static_cast<std::size_t>(trial) % (a.size() - 2);
      const double head = winding_number(std::span(a).first(m + 1), std::span(b).first(m + 1));
      const double tail = winding_number(std::span(a).subspan(m), std::span(b).subspan(m));
      worst_concat = std::max(worst_concat, std::abs(head + tail - w));
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Verdict v;
  v.pass = worst_oracle <= kOracleTol && worst_role <= kRoleTol && worst_rigid <= kRigidTol &&
           worst_mirror <= kMirrorTol && worst_concat <= kConcatTol && secs < kOracleSeconds;
  v.detail = fmt::format(
      "oracle max err {:.2e}, role {:.1e}, rigid {:.1e}, mirror {:.1e}, concat {:.1e}, {:.2f} s",
      worst_oracle, worst_role, worst_rigid, worst_mirror, worst_concat, secs);
  return v;
}

// ---------------------------------------------------------------------------

env::Instance head_on_instance() {
  env::Instance inst;
  inst.mode = env::ScenarioMode::kCrossing;
  inst.starts = {{-2.0, 0.0}, {2.0, 0.0}};
  inst.goals = {{2.0, 0.0}, {-2.0, 0.0}};
  return inst;
}

Verdict criterion2() {
  const auto t0 = std::chrono::steady_clock::now();
  const env::Instance inst = head_on_instance();
  const control::ControllerConfig ctrl;
  const DynamicsConfig dyn = DynamicsConfig::holonomic();
  env::EpisodeLimits limits;
  limits.seed = 5;

  bool pass = true;
  std::string detail;
  for (double target : {0.5, -0.5}) {
    planner::ConstantPlanner pl(target, 10.0);
    const auto r = env::run_episode(inst, pl, ctrl, dyn, limits);
    const double w = r.realized_winding.at(0).w;
    const bool ok = r.outcome == env::Outcome::kSuccess && r.steps <= 200 &&
                    std::abs(w) >= kMinRealizedWinding && std::signbit(w) == std::signbit(target);
    pass = pass && ok;
    detail += fmt::format("target {:+.1f}: {} in {} steps, w {:+.3f}; ", target,
                          env::to_string(r.outcome), r.steps, w);
  }

  planner::ConstantPlanner vanilla(0.0, 0.0);
  const auto r = env::run_episode(inst, vanilla, ctrl, dyn, limits);
  double asym = 0.0;
  for (const auto& row : r.trajectory) {
    asym = std::max(asym, norm(row[0].position + row[1].position));
    asym = std::max(asym, norm(row[0].velocity + row[1].velocity));
  }
  pass = pass && asym <= kSymmetryTol;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  pass = pass && secs < kTopologySeconds;
  detail += fmt::format("vanilla symmetry err {:.1e} ({} after {} steps), {:.1f} s", asym,
                        env::to_string(r.outcome), r.steps, secs);
  return {pass, detail};
}

// ---------------------------------------------------------------------------

Verdict criterion3() {
  std::mt19937_64 rng(301);
  std::uniform_real_distribution<double> u(-2.0, 2.0), vel(-0.5, 0.5), h(-kPi, kPi), t(-1.0, 1.0);
  int identical = 0;
  const int states = 100;
  for (int k = 0; k < states; ++k) {
    const DynamicsConfig dyn = k % 2 == 0 ? DynamicsConfig::holonomic() : DynamicsConfig::diff_drive();
    AgentState s;
    s.position = {u(rng), u(rng)};
    s.goal = {u(rng), u(rng)};
    s.heading = h(rng);
    s.velocity = dyn.model == DynamicsModel::kDiffDrive
                     ? Vec2{0.3 * std::cos(s.heading), 0.3 * std::sin(s.heading)}
                     : Vec2{vel(rng), vel(rng)};
    std::vector<ObservedState> others;
    const int n_others = 1 + k % 4;
    for (int j = 0; j < n_others; ++j) {
      ObservedState o;
      o.id = j + 1;
      do {
        o.position = {u(rng), u(rng)};
      } while (norm(o.position - s.position) < 0.35);
      o.velocity = {vel(rng), vel(rng)};
      others.push_back(o);
    }
    control::ControllerConfig cfg;
    cfg.rng_seed = static_cast<std::uint64_t>(k);
    control::WindingPlan plan;
    for (const auto& o : others) plan.set(o.id, t(rng), 0.0);
    const auto a = control::solve(s, others, plan, cfg, dyn);
    const auto b = control::solve_without_winding(s, others, cfg, dyn);
    if (a.action == b.action && a.cost == b.cost && a.candidate_index == b.candidate_index) ++identical;
  }

  exp::ExperimentConfig cfg = exp::default_config(4);
  cfg.train.scenario.mode = env::ScenarioMode::kCrossing;
  cfg.n_episodes = 50;
  cfg.seed = 303;
  cfg.method = exp::Method::kVanilla;
  const auto vanilla = exp::evaluate(cfg, nullptr);
  cfg.method = exp::Method::kTmpc;
  const auto tmpc = exp::evaluate(cfg, nullptr);

  Verdict v;
  v.pass = identical == states && tmpc.mean_abs_winding > vanilla.mean_abs_winding;
  v.detail = fmt::format("{}/{} states bit-identical; mean |w| T-MPC {:.4f} vs Vanilla {:.4f}",
                         identical, states, tmpc.mean_abs_winding, vanilla.mean_abs_winding);
  return v;
}

// ---------------------------------------------------------------------------

double fd_gradient_error() {
  planner::Architecture arch;
  arch.n_max = 2;
  arch.hidden = {3};
  auto p = planner::init_params(arch, 3);
  std::mt19937_64 rng(401);
  std::normal_distribution<double> g(0.0, 1.0);
  for (double& w : p.weights) w += 0.5 * g(rng);
  for (double& s : p.log_std) s += 0.2 * g(rng);

  const int n = 12;
  std::vector<std::vector<double>> inputs(n), raws(n);
  std::vector<std::vector<bool>> masks(n, std::vector<bool>{true});
  std::vector<learning::PpoSample> batch;
  for (int k = 0; k < n; ++k) {
    inputs[k].resize(static_cast<std::size_t>(arch.input_size()));
    for (double& x : inputs[k]) x = g(rng);
    raws[k] = {g(rng), g(rng)};
  }
  for (int k = 0; k < n; ++k) {
    const auto f = planner::forward_raw(p, inputs[k]);
    const double lp = planner::gaussian_log_prob(f.means, f.log_std, raws[k], masks[k]) -
                      planner::squash_correction(raws[k], masks[k], arch);
    batch.push_back({inputs[k], &masks[k], raws[k], lp + 0.3 * g(rng), g(rng), g(rng)});
  }
  learning::PpoConfig cfg;
  cfg.entropy_coef = 0.05;
  const auto loss = learning::ppo_loss(p, batch, cfg);

  double worst = 0.0;
  auto probe = [&](std::vector<double>& (*field)(planner::PolicyParams&), const std::vector<double>& grad) {
    for (std::size_t i = 0; i < grad.size(); ++i) {
      auto a = p, b = p;
      field(a)[i] += kFdStep;
      field(b)[i] -= kFdStep;
      const double fd = (learning::ppo_loss(a, batch, cfg).total - learning::ppo_loss(b, batch, cfg).total) /
                        (2.0 * kFdStep);
      worst = std::max(worst, std::abs(fd - grad[i]));
    }
  };
  probe([](planner::PolicyParams& q) -> std::vector<double>& { return q.weights; }, loss.grad_weights);
  probe([](planner::PolicyParams& q) -> std::vector<double>& { return q.log_std; }, loss.grad_log_std);
  return worst;
}

double gae_monte_carlo_error() {
  std::mt19937_64 rng(402);
  std::uniform_real_distribution<double> u(-1.0, 1.0), d(0.5, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const int n = 1 + t % 37;
    std::vector<double> r(n), v(n), disc(n), boot(n, 0.0);
    std::vector<bool> term(n, false);
    for (int k = 0; k < n; ++k) {
      r[k] = u(rng);
      v[k] = u(rng);
      disc[k] = d(rng);
    }
    term[n - 1] = true;
    if (t % 2 == 0) boot[n - 1] = u(rng);
    const auto out = learning::gae(r, v, disc, term, boot, 1.0);
    double g = boot[n - 1];
    for (int k = n - 1; k >= 0; --k) {
      g = r[k] + disc[k] * g;
      worst = std::max(worst, std::abs(out.advantages[k] - (g - v[k])));
    }
  }
  return worst;
}

Verdict criterion4() {
  const double fd = fd_gradient_error();
  const double mc = gae_monte_carlo_error();
  // -0.1125 is not a double; the expected value is the correctly rounded
  // result for the double nearest 0.1.
  const bool rewards = learning::reward(-0.01, false) == -1.0 &&
                       learning::reward(0.1, false) == -0.11249999999999999 &&
                       learning::reward(0.5, true) == 1.0 && learning::reward(0.5, false) == 0.0;
  Verdict v;
  v.pass = fd <= kFdTol && mc <= kGaeTol && rewards;
  v.detail = fmt::format("grad fd err {:.2e}, gae err {:.1e}, rewards {} / {} / {}", fd, mc,
                         learning::reward(-0.01, false), learning::reward(0.1, false),
                         learning::reward(0.5, true));
  return v;
}

// ---------------------------------------------------------------------------

learning::TrainResult train_policy(int n_agents) {
  exp::ExperimentConfig cfg = exp::default_config(n_agents);
  cfg.train.scenario.mode = env::ScenarioMode::kRandom;
  cfg.train.ppo.total_env_steps = kTrainSteps;
  cfg.train.seed = kTrainSeed;
  return learning::train(cfg.train);
}

std::pair<double, double> return_window_means(const std::vector<learning::IterationMetrics>& curve) {
  const std::size_t k = std::max<std::size_t>(1, curve.size() / 10);
  double first = 0.0, last = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    first += curve[i].mean_return;
    last += curve[curve.size() - 1 - i].mean_return;
  }
  return {first / static_cast<double>(k), last / static_cast<double>(k)};
}

exp::AggregateReport eval_method(int n_agents, exp::Method m, const planner::PolicyParams* policy) {
  exp::ExperimentConfig cfg = exp::default_config(n_agents);
  cfg.train.scenario.mode = env::ScenarioMode::kCrossing;
  cfg.n_episodes = kEvalEpisodes;
  cfg.seed = kEvalSeed;
  cfg.method = m;
  return exp::evaluate(cfg, policy);
}

Verdict criterion5() {
  const auto trained = train_policy(3);
  const auto [first, last] = return_window_means(trained.curve);
  const auto learned = eval_method(3, exp::Method::kWnumMpc, &trained.params);
  const auto vanilla = eval_method(3, exp::Method::kVanilla, nullptr);
  Verdict v;
  v.pass = last > first && learned.success_rate >= vanilla.success_rate;
  v.detail = fmt::format(
      "{} iterations, return first 10% {:.4f} last 10% {:.4f}; crossing success WNumMPC {:.2f} vs Vanilla {:.2f}",
      trained.curve.size(), first, last, learned.success_rate, vanilla.success_rate);
  return v;
}

double mean_extra_over(const exp::AggregateReport& r, const std::vector<bool>& common) {
  double sum = 0.0;
  int n = 0;
  for (std::size_t e = 0; e < r.rows.size(); ++e) {
    if (!common[e]) continue;
    sum += r.rows[e].extra_time;
    ++n;
  }
  return n > 0 ? sum / n : std::nan("");
}

Verdict criterion6() {
  const auto trained = train_policy(4);
  const auto learned = eval_method(4, exp::Method::kWnumMpc, &trained.params);
  const auto tmpc = eval_method(4, exp::Method::kTmpc, nullptr);
  const auto vanilla = eval_method(4, exp::Method::kVanilla, nullptr);
  std::vector<bool> common(learned.rows.size());
  int n_common = 0;
  for (std::size_t e = 0; e < common.size(); ++e) {
    common[e] = learned.rows[e].outcome == env::Outcome::kSuccess &&
                tmpc.rows[e].outcome == env::Outcome::kSuccess;
    n_common += common[e] ? 1 : 0;
  }
  const double extra_learned = mean_extra_over(learned, common);
  const double extra_tmpc = mean_extra_over(tmpc, common);
  Verdict v;
  v.pass = learned.success_rate >= tmpc.success_rate && tmpc.success_rate >= vanilla.success_rate &&
           n_common > 0 && extra_learned <= extra_tmpc;
  v.detail = fmt::format(
      "success WNumMPC {:.2f} T-MPC {:.2f} Vanilla {:.2f}; extra time over {} common successes "
      "WNumMPC {:.3f} T-MPC {:.3f}",
      learned.success_rate, tmpc.success_rate, vanilla.success_rate, n_common, extra_learned, extra_tmpc);
  return v;
}

// ---------------------------------------------------------------------------

// Scenario for the k-th feasibility episode: varied team size, dynamics,
// scenario mode and method.
struct FeasibilityCase {
  env::Instance inst;
  DynamicsConfig dyn;
  env::EpisodeLimits limits;
  int method = 0;
};

FeasibilityCase feasibility_case(int k) {
  FeasibilityCase c;
  env::ScenarioConfig scen;
  scen.n_agents = 2 + k % 4;
  scen.mode = k % 2 == 0 ? env::ScenarioMode::kRandom : env::ScenarioMode::kCrossing;
  scen.rng_seed = derive_seed(701, SeedStream::kEvalInstances, static_cast<std::uint64_t>(k));
  c.inst = env::generate_instance(scen);
  c.dyn = (k / 4) % 2 == 0 ? DynamicsConfig::holonomic() : DynamicsConfig::diff_drive();
  c.limits.seed = scen.rng_seed;
  c.method = (k / 8) % 3;
  return c;
}

env::EpisodeResult run_feasibility_case(const FeasibilityCase& c, const planner::PolicyParams& policy,
                                        const control::ControllerConfig& ctrl) {
  std::unique_ptr<planner::Planner> pl;
  if (c.method == 0) pl = std::make_unique<planner::ConstantPlanner>(0.0, 0.0);
  if (c.method == 1) pl = std::make_unique<planner::ConstantPlanner>(0.0, -3.0);
  if (c.method == 2) pl = std::make_unique<planner::LearnedPlanner>(policy, c.dyn.v_max, true, c.limits.seed);
  return env::run_episode(c.inst, *pl, ctrl, c.dyn, c.limits);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

Verdict criterion7() {
  const auto policy = planner::init_params(planner::Architecture{}, 702);
  control::ControllerConfig ctrl;
  std::int64_t actions = 0, infeasible = 0;
  for (int k = 0; k < kFeasibilityEpisodes; ++k) {
    const auto c = feasibility_case(k);
    ctrl.rng_seed = c.limits.seed;
    const auto r = run_feasibility_case(c, policy, ctrl);
    for (const auto& step : r.actions) {
      for (const Action& a : step) {
        ++actions;
        if (!is_feasible(a, c.dyn)) ++infeasible;
      }
    }
  }

  const fs::path root = fs::temp_directory_path() / fmt::format("wnum_acceptance_{}", ::getpid());
  int identical = 0;
  const int exports = 6;
  for (int k = 0; k < exports; ++k) {
    const auto c = feasibility_case(k);
    io::EpisodeMeta meta;
    meta.method = "acceptance";
    meta.episode_index = k;
    meta.instance_seed = c.limits.seed;
    meta.v_max = c.dyn.v_max;
    meta.dynamics_model = std::string(to_string(c.dyn.model));
    const std::string stem = fmt::format("episode_{:06d}", k);
    for (const char* run : {"a", "b"}) {
      ctrl.rng_seed = c.limits.seed;
      io::export_episode(root / run, stem, run_feasibility_case(c, policy, ctrl), meta);
    }
    const bool same = slurp(root / "a" / (stem + ".csv")) == slurp(root / "b" / (stem + ".csv")) &&
                      slurp(root / "a" / (stem + ".json")) == slurp(root / "b" / (stem + ".json")) &&
                      !slurp(root / "a" / (stem + ".csv")).empty();
    identical += same ? 1 : 0;
  }
  fs::remove_all(root);

  Verdict v;
  v.pass = infeasible == 0 && identical == exports;
  v.detail = fmt::format("{} infeasible of {} actions over {} episodes; {}/{} exports byte-identical",
                         infeasible, actions, kFeasibilityEpisodes, identical, exports);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> only;
  app.add_option("--criterion", only, "Run only these criteria")->check(CLI::Range(1, 7));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::function<Verdict()>> all{criterion1, criterion2, criterion3, criterion4,
                                                   criterion5, criterion6, criterion7};
  if (only.empty()) {
    for (int i = 1; i <= 7; ++i) only.push_back(i);
  }
  int failed = 0;
  for (int i : only) {
    const auto t0 = std::chrono::steady_clock::now();
    const Verdict v = all[static_cast<std::size_t>(i - 1)]();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d: %s  %s  [%.1f s]\n", i, v.pass ? "PASS" : "FAIL", v.detail.c_str(), secs);
    std::fflush(stdout);
    failed += v.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
