#include <algorithm>
#include <cmath>
#include <numeric>

#include "asymac/agent.hpp"

namespace asymac::agent {

void LearningCurve::add(long long timestep, double episode_return) {
  if (!points.empty() && timestep <= points.back().timestep)
    throw ContractViolation("learning curve timesteps must increase");
  CurvePoint p;
  p.timestep = timestep;
  p.episode = static_cast<long long>(points.size());
  p.episode_return = episode_return;
  const std::size_t n = std::min<std::size_t>(points.size() + 1, 100);
  double total = episode_return;
  for (std::size_t i = points.size() + 1 - n; i < points.size(); ++i) total += points[i].episode_return;
  p.rolling100 = total / static_cast<double>(n);
  points.push_back(p);
}

double LearningCurve::best_rolling100(std::size_t min_episodes) const {
  double best = -INFINITY;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (i + 1 >= min_episodes) best = std::max(best, points[i].rolling100);
  return best;
}

std::vector<int> belief_sampled_states(const Pomdp& p, const Trajectory& traj, Rng& rng) {
  oracle::Belief b = oracle::prior(p);
  if (traj.initial_observation) b = oracle::condition_initial(p, b, *traj.initial_observation);
  std::vector<int> out;
  out.reserve(traj.length() + 1);
  out.push_back(rng.categorical(b));
  for (std::size_t t = 0; t < traj.length(); ++t) {
    b = oracle::belief_update(p, b, traj.actions[t], traj.observations[t]);
    out.push_back(rng.categorical(b));
  }
  return out;
}

EpisodeData sample_training_episode(const envs::Environment& env, const AgentNets& nets, int cap,
                                    std::uint64_t seed, std::uint64_t episode) {
  Rng rng = Rng::for_episode(seed, 0, episode);
  IncrementalPolicy policy(nets);
  EpisodeData ep;
  ep.trajectory = sample_episode(env.pomdp, env.terminals, [&policy](const History& h) { return policy(h); }, cap, rng);
  if (nets.kind() == CriticKind::HistoryStateSampled) {
    Rng aux = Rng::for_episode(seed, 1, episode);
    ep.critic_states = belief_sampled_states(env.pomdp, ep.trajectory, aux);
  } else {
    ep.critic_states = ep.trajectory.states;
  }
  return ep;
}

TrainResult train(const envs::Environment& env, CriticKind kind, const TrainConfig& cfg, AgentNets& nets,
                  Optimizers& opt) {
  cfg.validate();
  if (nets.kind() != kind) throw ContractViolation("train: networks were built for a different critic kind");
  TrainResult result;
  long long t = 0;
  std::uint64_t episode = 0;
  try {
    while (t < cfg.max_timesteps) {
      std::vector<EpisodeData> batch;
      const long long before = t;
      for (int e = 0; e < cfg.episodes_per_update; ++e) {
        batch.push_back(sample_training_episode(env, nets, cfg.episode_cap, cfg.seed, episode++));
        const auto& traj = batch.back().trajectory;
        t += static_cast<long long>(traj.length());
        result.curve.add(t, std::accumulate(traj.rewards.begin(), traj.rewards.end(), 0.0));
      }
      result.timesteps = t;
      const double lambda = negentropy_schedule(t, cfg.lambda0, cfg.entropy_decay_steps);
      update(nets, opt, batch, env.pomdp.gamma, lambda, cfg.gamma_t_weighting);
      ++result.updates;
      if (t / cfg.target_period > before / cfg.target_period) nets.sync_target();
      if (cfg.stop_at_rolling100 && result.curve.points.size() >= 100 &&
          result.curve.final_rolling100() >= *cfg.stop_at_rolling100)
        break;
    }
  } catch (const TrainingDivergence& e) {
    result.diverged = true;
    result.divergence = std::string(e.what()) + "\n" + e.dump;
  }
  return result;
}

TrainResult train(const envs::Environment& env, CriticKind kind, const TrainConfig& cfg,
                  nn::Checkpoint* final_checkpoint) {
  cfg.validate();
  AgentNets nets(env.pomdp, kind, cfg.net, cfg.seed);
  Optimizers opt = make_optimizers(nets, cfg);
  TrainResult result = train(env, kind, cfg, nets, opt);
  if (final_checkpoint) {
    *final_checkpoint = save_checkpoint(nets, opt, env.name, result.timesteps);
    final_checkpoint->meta["seed"] = std::to_string(cfg.seed);
  }
  return result;
}

}  // namespace asymac::agent
