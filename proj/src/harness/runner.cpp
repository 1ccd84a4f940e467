#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

#include "atacom/harness.hpp"
#include "atacom/verify.hpp"

namespace atacom::harness {

namespace {

// splitmix64, used to derive independent per-episode streams.
std::uint64_t seed_mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

envs::ObserverMode observer_mode(const ExperimentConfig& config) {
  if (config.observer == "exact") return envs::ObserverMode::Exact;
  if (config.observer == "fd") return envs::ObserverMode::FiniteDifference;
  return envs::ObserverMode::None;
}

class Policy {
 public:
  Policy(const ExperimentConfig& config, int action_dim, std::uint64_t seed)
      : config_(config), action_dim_(action_dim), rng_(seed) {
    if (config.policy == "scripted_constant") {
      constant_ = Vec::Zero(action_dim);
      for (int i = 0; i < action_dim && i < static_cast<int>(config.policy_constant.size()); ++i)
        constant_(i) = config.policy_constant[i];
    }
  }

  Vec act(const envs::Observation& obs) {
    if (config_.policy == "attractor")
      return envs::attractor_policy(obs, config_.kp * Mat::Identity(2, 2));
    if (config_.policy == "uniform_random") {
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      Vec a(action_dim_);
      for (int i = 0; i < action_dim_; ++i) a(i) = u(rng_);
      return a;
    }
    return constant_;
  }

 private:
  const ExperimentConfig& config_;
  int action_dim_;
  std::mt19937_64 rng_;
  Vec constant_;
};

EpisodeRecord run_episode(const ExperimentConfig& config, std::uint64_t episode_seed) {
  EpisodeRecord record;
  auto env = make_env(config);
  envs::Observation obs = env->reset(episode_seed);

  envs::VelocityObserver observer;
  observer.mode = observer_mode(config);
  observer.position_noise_std = config.observer_noise_std;
  observer.reset(seed_mix(episode_seed, 1));

  Policy policy(config, env->action_dim(), seed_mix(episode_seed, 2));

  SlackModel slack;
  slack.family =
      config.slack_family == "linear" ? SlackFamily::Linear : SlackFamily::Exponential;
  slack.beta = config.beta;
  slack.tol = config.slack_tol;

  ControllerConfig ctrl;
  ctrl.lambda = config.lambda;
  ctrl.drift_clipping = config.drift_clipping;
  ctrl.zeta_gain = config.zeta_gain;

  const Variant variant = env->variant();
  double discount = 1.0;
  record.max_violation = -std::numeric_limits<double>::infinity();
  bool reached = false;

  for (int t = 0; t < env->horizon(); ++t) {
    const AugmentedState state = env->controller_state();
    std::optional<Vec> z_dot;
    if (variant == Variant::Separable) {
      const auto true_z_dot = env->uncontrolled_velocity();
      z_dot = observer.observe(*state.z, *true_z_dot, env->dt());
    }
    const Vec action = policy.act(obs);

    StepRecord step;
    step.t = t * env->dt();
    try {
      const StepResult result =
          atacom_step(variant, env->system(), env->constraints(), slack, state, action, ctrl, z_dot);
      const envs::EnvStep env_step = env->step(result.action.u_s);

      step.state = state.s_dot ? (Vec(state.s.size() + state.s_dot->size()) << state.s, *state.s_dot).finished()
                               : state.s;
      step.action = action;
      step.u_s = result.action.u_s;
      step.c = result.assembly.c;
      const auto report = verify::diagnostics(result.assembly, result.mu, config.lambda);
      step.V = report.V;
      step.max_violation = env_step.info.max_violation;
      step.saturated = result.action.saturated;
      step.residual = result.action.residual;
      record.singular_states += report.singular ? 1 : 0;
      record.rank_ok = record.rank_ok && report.rank_ok;
      record.steps.push_back(std::move(step));

      record.max_violation = std::max(record.max_violation, env_step.info.max_violation);
      record.discounted_return += discount * env_step.reward;
      discount *= config.gamma;
      obs = env_step.observation;
      reached = env_step.info.reached_target;
      if (env_step.done) break;
    } catch (const std::exception&) {
      record.fault = true;
      break;
    }
  }
  record.length = static_cast<int>(record.steps.size());
  record.success = !record.fault && episode_success(reached, record.max_violation);
  if (record.steps.empty()) record.max_violation = 0.0;
  return record;
}

Summary summarize(const std::vector<EpisodeRecord>& records) {
  Summary s;
  s.episodes = static_cast<int>(records.size());
  double violation_sum = 0.0;
  s.max_violation = -std::numeric_limits<double>::infinity();
  for (const auto& r : records) {
    s.faults += r.fault ? 1 : 0;
    s.success_rate += r.success ? 1.0 : 0.0;
    s.mean_episode_length += r.length;
    violation_sum += r.max_violation;
    s.max_violation = std::max(s.max_violation, r.max_violation);
    s.mean_return += r.discounted_return;
    s.singular_states += r.singular_states;
    s.rank_ok = s.rank_ok && r.rank_ok;
    s.episode_returns.push_back(r.discounted_return);
    s.episode_lengths.push_back(r.length);
  }
  if (s.episodes > 0) {
    s.success_rate /= s.episodes;
    s.mean_episode_length /= s.episodes;
    s.mean_return /= s.episodes;
    s.mean_violation = violation_sum / s.episodes;
  }
  return s;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, int parallel) {
  validate_config(config);
  {
    // policy/environment compatibility is a config error, not an episode fault
    const auto probe = make_env(config);
    if (config.policy == "attractor" && probe->action_dim() != 2)
      throw ConfigError("config field 'policy.id': 'attractor' needs a 2-dimensional action "
                        "space, environment '" +
                        config.env_id + "' has " + std::to_string(probe->action_dim()));
    if (config.policy == "scripted_constant" &&
        static_cast<int>(config.policy_constant.size()) != probe->action_dim())
      throw ConfigError("config field 'policy.constant': expected " +
                        std::to_string(probe->action_dim()) + " entries, got " +
                        std::to_string(config.policy_constant.size()));
  }
  ExperimentResult result;
  result.records.resize(config.episodes);

  if (parallel <= 1) {
    for (int i = 0; i < config.episodes; ++i)
      result.records[i] = run_episode(config, config.seed + static_cast<std::uint64_t>(i));
  } else {
    std::atomic<int> next{0};
    auto worker = [&]() {
      for (int i = next.fetch_add(1); i < config.episodes; i = next.fetch_add(1))
        result.records[i] = run_episode(config, config.seed + static_cast<std::uint64_t>(i));
    };
    std::vector<std::thread> pool;
    const int n = std::min(parallel, config.episodes);
    pool.reserve(n);
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  result.summary = summarize(result.records);
  return result;
}

std::vector<SweepCell> sweep(const ExperimentConfig& base, const std::vector<SweepAxis>& axes,
                             int parallel) {
  // Validate axis fields against the schema before running anything.
  for (const auto& axis : axes) {
    if (axis.values.empty()) throw ConfigError("sweep axis '" + axis.field + "' has no values");
    ExperimentConfig probe = base;
    apply_config_field(probe, axis.field, axis.values.front());
  }

  std::vector<SweepCell> cells;
  std::vector<size_t> index(axes.size(), 0);
  while (true) {
    SweepCell cell;
    cell.config = base;
    std::string label;
    for (size_t a = 0; a < axes.size(); ++a) {
      apply_config_field(cell.config, axes[a].field, axes[a].values[index[a]]);
      if (!label.empty()) label += "|";
      label += axes[a].field + "=" + axes[a].values[index[a]];
    }
    cell.label = label.empty() ? "all" : label;
    cells.push_back(std::move(cell));

    size_t a = 0;
    for (; a < axes.size(); ++a) {
      if (++index[a] < axes[a].values.size()) break;
      index[a] = 0;
    }
    if (a == axes.size()) break;
  }

  for (auto& cell : cells) {
    validate_config(cell.config);
    cell.summary = run_experiment(cell.config, parallel).summary;
  }
  return cells;
}

}  // namespace atacom::harness
