#include "wnum/learning.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include <fmt/format.h>

#include "wnum/errors.hpp"
#include "wnum/seeding.hpp"

namespace wnum::learning {

double reward(double d_min, bool at_goal, const RewardConfig& cfg) {
  if (d_min < 0.0) return cfg.collision;
  if (at_goal && cfg.goal_over_proximity) return cfg.goal;
  if (d_min < cfg.proximity_threshold) {
    return cfg.proximity_scale * (d_min - cfg.proximity_threshold) / 2.0;
  }
  if (at_goal) return cfg.goal;
  return 0.0;
}

GaeResult gae(std::span<const double> rewards, std::span<const double> values,
              std::span<const double> discounts, const std::vector<bool>& terminal,
              std::span<const double> bootstrap, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || discounts.size() != n || terminal.size() != n ||
      bootstrap.size() != n) {
    throw ShapeError("gae: all inputs must have the same length");
  }
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_adv = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const bool end = terminal[k] || k + 1 == n;
    const double next_value = end ? bootstrap[k] : values[k + 1];
    const double delta = rewards[k] + discounts[k] * next_value - values[k];
    const double adv = delta + (end ? 0.0 : discounts[k] * lambda * next_adv);
    out.advantages[k] = adv;
    out.returns[k] = adv + values[k];
    next_adv = adv;
  }
  return out;
}

GaeResult gae(std::span<const double> rewards, std::span<const double> values,
              const std::vector<bool>& dones, double gamma, double lambda, double last_value) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) {
    throw ShapeError("gae: rewards, values and dones must have the same length");
  }
  std::vector<double> discounts(n, gamma);
  std::vector<double> boot(n, 0.0);
  if (n > 0 && !dones[n - 1]) boot[n - 1] = last_value;
  return gae(rewards, values, discounts, dones, boot, lambda);
}

GaeResult compute_targets(std::span<const TransitionRecord> records, double lambda) {
  const std::size_t n = records.size();
  std::vector<double> r(n), v(n), d(n), b(n);
  std::vector<bool> term(n);
  for (std::size_t k = 0; k < n; ++k) {
    r[k] = records[k].reward;
    v[k] = records[k].value;
    d[k] = records[k].discount;
    b[k] = records[k].bootstrap;
    term[k] = records[k].done;
  }
  return gae(r, v, d, term, b, lambda);
}

PpoConfig PpoConfig::for_agents(int n_agents) {
  PpoConfig c;
  if (n_agents > 5) {
    c.learning_rate = 2e-4;
    c.batch_size = 4096;
    c.entropy_coef = 3e-3;
  }
  return c;
}

void PpoConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("ppo.gamma must be in (0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("ppo.gae_lambda must be in [0, 1]");
  if (!(clip > 0.0)) throw ConfigError("ppo.clip must be > 0");
  if (epochs < 1) throw ConfigError("ppo.epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("ppo.learning_rate must be > 0");
  if (batch_size < 1 || minibatch_size < 1) throw ConfigError("ppo batch sizes must be >= 1");
  if (!(entropy_coef >= 0.0) || !(value_coef >= 0.0)) throw ConfigError("ppo coefficients must be >= 0");
  if (!(max_grad_norm > 0.0)) throw ConfigError("ppo.max_grad_norm must be > 0");
  if (total_env_steps < 1) throw ConfigError("ppo.total_env_steps must be >= 1");
}

PpoLoss ppo_loss(const planner::PolicyParams& params, std::span<const PpoSample> batch,
                 const PpoConfig& cfg) {
  if (batch.empty()) throw ContractError("ppo_loss: empty batch");
  PpoLoss out;
  out.grad_weights.assign(params.weights.size(), 0.0);
  out.grad_log_std.assign(params.log_std.size(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const std::size_t outputs = params.log_std.size();
  std::vector<double> grad_means(outputs);

  for (const PpoSample& s : batch) {
    const std::vector<bool>& mask = *s.mask;
    planner::ForwardCache cache;
    const planner::ForwardResult f = planner::forward_raw(params, s.input, &cache);
    const double logp = planner::gaussian_log_prob(f.means, f.log_std, s.raw_action, mask) -
                        planner::squash_correction(s.raw_action, mask, params.arch);
    const double ratio = std::exp(logp - s.old_log_prob);
    const double unclipped = ratio * s.advantage;
    const double clipped = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * s.advantage;
    const double surr = std::min(unclipped, clipped);
    const double dsurr_dlogp = unclipped <= clipped ? unclipped : 0.0;
    const double entropy = planner::gaussian_entropy(f.log_std, mask);
    const double verr = f.value - s.ret;

    out.surrogate += surr * inv_b;
    out.value_loss += verr * verr * inv_b;
    out.entropy += entropy * inv_b;
    out.clip_fraction += (std::abs(ratio - 1.0) > cfg.clip ? 1.0 : 0.0) * inv_b;
    out.approx_kl += ((ratio - 1.0) - (logp - s.old_log_prob)) * inv_b;

    for (std::size_t o = 0; o < outputs; ++o) {
      grad_means[o] = 0.0;
      if (!mask[o / planner::kOutputsPerSlot]) continue;
      const double inv_var = std::exp(-2.0 * f.log_std[o]);
      const double diff = s.raw_action[o] - f.means[o];
      grad_means[o] = -inv_b * dsurr_dlogp * diff * inv_var;
      out.grad_log_std[o] += -inv_b * dsurr_dlogp * (diff * diff * inv_var - 1.0) -
                             inv_b * cfg.entropy_coef;
    }
    const double grad_value = cfg.value_coef * 2.0 * verr * inv_b;
    planner::backward_raw(params, cache, grad_means, grad_value, out.grad_weights);
  }
  out.total = -out.surrogate + cfg.value_coef * out.value_loss - cfg.entropy_coef * out.entropy;
  return out;
}

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

UpdateStats ppo_update(planner::PolicyParams& params, AdamState& adam,
                       std::span<const TransitionRecord> batch, const GaeResult& targets,
                       const PpoConfig& cfg, std::uint64_t shuffle_seed) {
  if (batch.empty()) throw ContractError("ppo_update: empty batch");
  if (targets.advantages.size() != batch.size() || targets.returns.size() != batch.size()) {
    throw ShapeError("ppo_update: targets do not match the batch");
  }
  const std::size_t n = batch.size();
  const double mean =
      std::accumulate(targets.advantages.begin(), targets.advantages.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double a : targets.advantages) var += (a - mean) * (a - mean);
  const double std_dev = std::sqrt(var / static_cast<double>(n));

  std::vector<PpoSample> samples(n);
  for (std::size_t k = 0; k < n; ++k) {
    samples[k] = {batch[k].input, &batch[k].mask, batch[k].raw_action, batch[k].log_prob,
                  (targets.advantages[k] - mean) / (std_dev + cfg.advantage_eps),
                  targets.returns[k]};
  }

  const std::size_t nw = params.weights.size();
  const std::size_t total = params.size();
  if (adam.m.size() != total) {
    adam.m.assign(total, 0.0);
    adam.v.assign(total, 0.0);
    adam.t = 0;
  }

  std::mt19937_64 rng(shuffle_seed);
  std::vector<std::size_t> order(n);
  std::vector<PpoSample> mb;
  UpdateStats stats;
  const auto mbs = static_cast<std::size_t>(cfg.minibatch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += mbs) {
      const std::size_t stop = std::min(n, start + mbs);
      mb.clear();
      for (std::size_t k = start; k < stop; ++k) mb.push_back(samples[order[k]]);
      const PpoLoss loss = ppo_loss(params, mb, cfg);
      if (!std::isfinite(loss.total) || !all_finite(loss.grad_weights) ||
          !all_finite(loss.grad_log_std)) {
        throw NumericalError(fmt::format(
            "non-finite PPO loss or gradient (epoch {}, minibatch at {}, loss {}, value loss {})",
            epoch, start, loss.total, loss.value_loss));
      }
      double sq = 0.0;
      for (double g : loss.grad_weights) sq += g * g;
      for (double g : loss.grad_log_std) sq += g * g;
      const double norm = std::sqrt(sq);
      const double scale = norm > cfg.max_grad_norm ? cfg.max_grad_norm / norm : 1.0;

      ++adam.t;
      const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(adam.t));
      const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(adam.t));
      for (std::size_t k = 0; k < total; ++k) {
        const double g = scale * (k < nw ? loss.grad_weights[k] : loss.grad_log_std[k - nw]);
        adam.m[k] = cfg.adam_beta1 * adam.m[k] + (1.0 - cfg.adam_beta1) * g;
        adam.v[k] = cfg.adam_beta2 * adam.v[k] + (1.0 - cfg.adam_beta2) * g * g;
        const double delta =
            cfg.learning_rate * (adam.m[k] / c1) / (std::sqrt(adam.v[k] / c2) + cfg.adam_eps);
        if (k < nw) {
          params.weights[k] -= delta;
        } else {
          params.log_std[k - nw] -= delta;
        }
      }
      stats.surrogate += loss.surrogate;
      stats.value_loss += loss.value_loss;
      stats.entropy += loss.entropy;
      stats.clip_fraction += loss.clip_fraction;
      stats.approx_kl += loss.approx_kl;
      stats.grad_norm += norm;
      ++stats.minibatches;
    }
  }
  const double inv = 1.0 / static_cast<double>(stats.minibatches);
  stats.surrogate *= inv;
  stats.value_loss *= inv;
  stats.entropy *= inv;
  stats.clip_fraction *= inv;
  stats.approx_kl *= inv;
  stats.grad_norm *= inv;
  if (!all_finite(params.weights) || !all_finite(params.log_std)) {
    throw NumericalError("PPO update produced non-finite parameters");
  }
  return stats;
}

RolloutRecorder::RolloutRecorder(const planner::PolicyParams& params, const DynamicsConfig& dyn,
                                 const RewardConfig& reward, double gamma,
                                 std::int64_t episode_id, int n_agents)
    : params_(&params),
      dyn_(dyn),
      reward_(reward),
      gamma_(gamma),
      episode_id_(episode_id),
      closed_(static_cast<std::size_t>(n_agents)),
      open_(static_cast<std::size_t>(n_agents)),
      returns_(static_cast<std::size_t>(n_agents), 0.0) {}

void RolloutRecorder::on_decision(const planner::PlanRequest& req, const planner::Observation& obs,
                                  const planner::PlannerOutput& out) {
  const auto i = static_cast<std::size_t>(req.agent);
  if (open_[i]) {
    closed_[i].push_back(std::move(open_[i]->rec));
    open_[i].reset();
  }
  Open o;
  o.rec.input = obs.flatten();
  o.rec.mask = obs.mask;
  o.rec.raw_action = out.raw_action;
  o.rec.log_prob = out.log_prob;
  o.rec.value = out.value_estimate;
  o.rec.agent_id = req.agent;
  o.rec.episode_id = episode_id_;
  o.rec.step = req.step;
  open_[i] = std::move(o);
}

void RolloutRecorder::on_step(const env::StepEvents& ev) {
  for (int a = 0; a < ev.after.size(); ++a) {
    const auto i = static_cast<std::size_t>(a);
    if (ev.before.frozen[i]) continue;
    const double d = env::min_clearance(ev.after, a);
    const double r = d <= 0.0 ? reward_.collision : reward(d, ev.arrived[i], reward_);
    returns_[i] += r;
    if (!open_[i]) continue;
    TransitionRecord& rec = open_[i]->rec;
    rec.reward += rec.discount * r;
    rec.discount *= gamma_;
    ++open_[i]->held_steps;
    if (ev.arrived[i] || ev.collision) {
      rec.done = true;
      rec.bootstrap = 0.0;
      closed_[i].push_back(std::move(rec));
      open_[i].reset();
    }
  }
}

void RolloutRecorder::on_end(const env::WorldState& final_world, env::Outcome) {
  for (int a = 0; a < final_world.size(); ++a) {
    const auto i = static_cast<std::size_t>(a);
    if (!open_[i]) continue;
    TransitionRecord& rec = open_[i]->rec;
    const auto neighbors = final_world.neighbors_of(a);
    const planner::Observation obs = planner::encode_observation(
        final_world.agents[i], neighbors, params_->arch.n_max, dyn_.v_max);
    rec.done = true;
    rec.bootstrap = planner::forward(*params_, obs).value;
    closed_[i].push_back(std::move(rec));
    open_[i].reset();
  }
}

std::vector<TransitionRecord> RolloutRecorder::take_records() {
  std::vector<TransitionRecord> out;
  for (auto& seq : closed_) {
    for (auto& r : seq) out.push_back(std::move(r));
    seq.clear();
  }
  return out;
}

double RolloutRecorder::mean_return() const {
  if (returns_.empty()) return 0.0;
  return std::accumulate(returns_.begin(), returns_.end(), 0.0) /
         static_cast<double>(returns_.size());
}

namespace {

// Episode index space reserved per iteration so instance seeds never repeat.
constexpr std::int64_t kEpisodesPerIteration = 1'000'000;

}  // namespace

std::int64_t train_episode_index(std::int64_t iteration, std::int64_t k) {
  return iteration * kEpisodesPerIteration + k;
}

std::uint64_t train_instance_seed(std::uint64_t base, std::int64_t episode_index) {
  return derive_seed(base, SeedStream::kTrainInstances, static_cast<std::uint64_t>(episode_index));
}

Rollout collect_rollouts(const TrainConfig& cfg, const planner::PolicyParams& params,
                         std::int64_t min_records, std::int64_t first_episode) {
  Rollout out;
  std::int64_t ep = first_episode;
  while (static_cast<std::int64_t>(out.records.size()) < min_records) {
    const std::uint64_t inst_seed = train_instance_seed(cfg.seed, ep);
    env::ScenarioConfig scen = cfg.scenario;
    scen.rng_seed = inst_seed;
    const env::Instance inst = env::generate_instance(scen);
    env::EpisodeLimits limits = cfg.limits;
    limits.seed = inst_seed;
    planner::LearnedPlanner planner(params, cfg.dynamics.v_max, true,
                                    derive_seed(cfg.seed, SeedStream::kPlanner, static_cast<std::uint64_t>(ep)));
    RolloutRecorder rec(params, cfg.dynamics, cfg.reward, cfg.ppo.gamma, ep, inst.size());
    planner.set_sink(&rec);
    const env::EpisodeResult res =
        env::run_episode(inst, planner, cfg.controller, cfg.dynamics, limits, &rec);
    auto recs = rec.take_records();
    out.records.insert(out.records.end(), std::make_move_iterator(recs.begin()),
                       std::make_move_iterator(recs.end()));
    out.episodes.push_back({ep, res.outcome, res.steps, rec.mean_return()});
    out.env_steps += res.steps;
    ++ep;
  }
  return out;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::int64_t iteration) {
  return dir / fmt::format("policy_iter_{:06d}.json", iteration);
}

void append_metrics(const std::filesystem::path& path, const IterationMetrics& m) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream f(path, std::ios::app);
  if (!f) throw DataError("cannot open metrics log " + path.string());
  if (fresh) {
    f << "iteration,env_steps,mean_return,success_rate,collision_rate,timeout_rate,"
         "mean_episode_len,entropy,kl\n";
  }
  f << fmt::format("{},{},{},{},{},{},{},{},{}\n", m.iteration, m.env_steps, m.mean_return,
                   m.success_rate, m.collision_rate, m.timeout_rate, m.mean_episode_len,
                   m.entropy, m.kl);
}

TrainResult train(const TrainConfig& cfg, std::optional<planner::PolicyParams> resume,
                  const ProgressFn& progress) {
  cfg.ppo.validate();
  cfg.scenario.validate();
  cfg.dynamics.validate();
  cfg.controller.validate();
  cfg.arch.validate();

  TrainResult result;
  if (resume) {
    if (!(resume->arch == cfg.arch)) throw ConfigError("resumed policy architecture differs from config");
    result.params = std::move(*resume);
  } else {
    result.params = planner::init_params(cfg.arch, derive_seed(cfg.seed, SeedStream::kInit, 0), cfg.init);
  }
  planner::PolicyParams& params = result.params;
  const planner::TrainingStamp start = params.training.value_or(planner::TrainingStamp{0, 0, cfg.seed});
  std::int64_t iteration = start.iteration;
  std::int64_t env_steps = start.env_steps;

  const bool write = !cfg.out_dir.empty();
  if (write) std::filesystem::create_directories(cfg.out_dir);
  const auto metrics_path = cfg.out_dir / "metrics.csv";

  AdamState adam;
  std::int64_t last_saved = -1;
  while (env_steps < cfg.ppo.total_env_steps) {
    const Rollout roll = collect_rollouts(cfg, params, cfg.ppo.batch_size,
                                          train_episode_index(iteration, 0));
    const GaeResult targets = compute_targets(roll.records, cfg.ppo.gae_lambda);
    const planner::PolicyParams good = params;
    UpdateStats stats;
    try {
      stats = ppo_update(params, adam, roll.records, targets, cfg.ppo,
                         derive_seed(cfg.seed, SeedStream::kMinibatch, static_cast<std::uint64_t>(iteration)));
    } catch (const NumericalError&) {
      if (write) planner::save_json(good, cfg.out_dir / "policy_last_good.json");
      throw;
    }
    ++iteration;
    env_steps += roll.env_steps;
    params.training = planner::TrainingStamp{iteration, env_steps, cfg.seed};

    IterationMetrics m;
    m.iteration = iteration;
    m.env_steps = env_steps;
    double steps = 0.0;
    for (const EpisodeSummary& e : roll.episodes) {
      m.mean_return += e.mean_return;
      m.success_rate += e.outcome == env::Outcome::kSuccess ? 1.0 : 0.0;
      m.collision_rate += e.outcome == env::Outcome::kCollision ? 1.0 : 0.0;
      m.timeout_rate += e.outcome == env::Outcome::kTimeout ? 1.0 : 0.0;
      steps += static_cast<double>(e.steps);
    }
    const double ne = static_cast<double>(roll.episodes.size());
    m.mean_return /= ne;
    m.success_rate /= ne;
    m.collision_rate /= ne;
    m.timeout_rate /= ne;
    m.mean_episode_len = steps / ne;
    m.entropy = stats.entropy;
    m.kl = stats.approx_kl;
    result.curve.push_back(m);

    if (write) {
      append_metrics(metrics_path, m);
      if (cfg.checkpoint_every > 0 && iteration % cfg.checkpoint_every == 0) {
        planner::save_json(params, checkpoint_path(cfg.out_dir, iteration));
        last_saved = iteration;
      }
    }
    if (progress) progress(m);
  }
  if (write) {
    if (last_saved != iteration) planner::save_json(params, checkpoint_path(cfg.out_dir, iteration));
    planner::save_json(params, cfg.out_dir / "policy_final.json");
  }
  return result;
}

}  // namespace wnum::learning
