#include <cmath>
#include <sstream>

#include "asymac/agent.hpp"

namespace asymac::agent {

std::vector<double> td_errors(std::span<const double> rewards, std::span<const double> current,
                              std::span<const double> next, bool terminated, double gamma) {
  if (current.size() != rewards.size() || next.size() != rewards.size())
    throw ContractViolation("td_errors: rewards, current and next values differ in length");
  std::vector<double> delta(rewards.size());
  for (std::size_t t = 0; t < rewards.size(); ++t) {
    const double boot = (terminated && t + 1 == rewards.size()) ? 0.0 : next[t];
    delta[t] = rewards[t] + gamma * boot - current[t];
  }
  return delta;
}

Optimizers make_optimizers(AgentNets& nets, const TrainConfig& cfg) {
  nn::AdamConfig actor;
  actor.lr = cfg.lr_actor;
  nn::AdamConfig critic;
  critic.lr = cfg.lr_critic;
  return {nn::Adam(nets.policy_parameters(), actor), nn::Adam(nets.critic_parameters(), critic)};
}

namespace {

// Encoder features of h_t for t in [first, last], one row each.
std::vector<Var> history_rows(Tape& tape, const AgentNets& nets, const HistoryEncoder& enc, const Trajectory& traj,
                              int first, int last) {
  std::vector<Var> rows;
  if (last < first) return rows;
  if (nets.truncation() == 0) {
    const int offset = traj.initial_observation ? 1 : 0;
    auto in = enc.inputs(traj.history(static_cast<std::size_t>(last)));
    const auto prefix = enc.prefixes(tape, in);
    for (int t = first; t <= last; ++t) rows.push_back(prefix[t + offset]);
  } else {
    for (int t = first; t <= last; ++t) rows.push_back(enc.encode(tape, nets.window(traj.history(t))));
  }
  return rows;
}

Var critic_rows(Tape& tape, const AgentNets& nets, const CriticNet& net, const EpisodeData& ep, int first,
                int last) {
  Var features;
  if (net.uses_history) {
    const auto rows = history_rows(tape, nets, net.encoder, ep.trajectory, first, last);
    features = nn::stack_rows(rows);
  }
  if (net.uses_state) {
    std::vector<int> states(ep.critic_states.begin() + first, ep.critic_states.begin() + last + 1);
    Var s = net.states.forward(tape, states);
    features = net.uses_history ? nn::concat_cols(features, s) : s;
  }
  return net.head.forward(tape, features);
}

Matrix column(const std::vector<double>& v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
  return m;
}

}  // namespace

UpdateStats update(AgentNets& nets, Optimizers& opt, const std::vector<EpisodeData>& batch, double gamma,
                   double lambda, bool gamma_t_weighting) {
  if (batch.empty()) throw ContractViolation("update: empty batch");
  const double inv_e = 1.0 / static_cast<double>(batch.size());
  UpdateStats stats;
  stats.lambda = lambda;

  // Critic values at h_t (recorded) and target bootstraps at h_{t+1}.
  Tape critic_tape;
  Tape target_tape(false);
  std::vector<Var> current_parts;
  std::vector<double> targets, weights;
  std::vector<int> actions;
  for (const auto& ep : batch) {
    const auto& traj = ep.trajectory;
    const int T = static_cast<int>(traj.length());
    if (T == 0) throw ContractViolation("update: episode without steps");
    if (static_cast<int>(ep.critic_states.size()) != T + 1)
      throw ContractViolation("update: critic states must cover s_0 .. s_T");
    Var v = critic_rows(critic_tape, nets, nets.critic, ep, 0, T - 1);
    const Matrix next = critic_rows(target_tape, nets, nets.target, ep, 1, T).value();
    current_parts.push_back(v);
    std::vector<double> cur(T), nxt(T);
    for (int t = 0; t < T; ++t) {
      cur[t] = v.value()(t, 0);
      nxt[t] = next(t, 0);
    }
    const bool terminated = !traj.truncated;
    auto delta = td_errors(traj.rewards, cur, nxt, terminated, gamma);
    double discount = 1.0;
    for (int t = 0; t < T; ++t) {
      targets.push_back(delta[t] + cur[t]);  // r + gamma * bootstrap
      weights.push_back((gamma_t_weighting ? discount : 1.0) * delta[t] * inv_e);
      actions.push_back(traj.actions[t]);
      discount *= gamma;
    }
    stats.deltas.push_back(std::move(delta));
  }
  Var values = nn::stack_rows(current_parts);
  Var err = nn::sub(values, critic_tape.constant(column(targets)));
  Var critic_loss = nn::scale(nn::sum(nn::mul(err, err)), inv_e);

  Tape actor_tape;
  std::vector<Var> feature_parts;
  for (const auto& ep : batch) {
    const auto rows = history_rows(actor_tape, nets, nets.policy.encoder, ep.trajectory, 0,
                                   static_cast<int>(ep.trajectory.length()) - 1);
    feature_parts.insert(feature_parts.end(), rows.begin(), rows.end());
  }
  Var logp = nn::log_softmax(nets.policy.head.forward(actor_tape, nn::stack_rows(feature_parts)));
  Var chosen = nn::pick(logp, actions);
  Var policy_loss = nn::scale(nn::sum(nn::mul(chosen, actor_tape.constant(column(weights)))), -1.0);
  Var negentropy = nn::scale(nn::sum(nn::mul(nn::exp(logp), logp)), lambda * inv_e);
  Var actor_loss = nn::add(policy_loss, negentropy);

  stats.policy_loss = policy_loss.scalar();
  stats.negentropy_loss = negentropy.scalar();
  stats.critic_loss = critic_loss.scalar();
  if (!std::isfinite(stats.policy_loss) || !std::isfinite(stats.negentropy_loss) || !std::isfinite(stats.critic_loss)) {
    std::ostringstream dump;
    dump.precision(17);
    dump << "policy_loss " << stats.policy_loss << "\nnegentropy_loss " << stats.negentropy_loss << "\ncritic_loss "
         << stats.critic_loss << "\nlambda " << lambda << "\n";
    for (std::size_t i = 0; i < batch.size(); ++i) {
      dump << "episode " << i << " rewards";
      for (double r : batch[i].trajectory.rewards) dump << ' ' << r;
      dump << "\n";
    }
    throw TrainingDivergence("non-finite loss in A2C update", dump.str());
  }

  opt.actor.zero_grad();
  actor_tape.backward(actor_loss);
  opt.actor.step();
  opt.critic.zero_grad();
  critic_tape.backward(critic_loss);
  opt.critic.step();
  return stats;
}

}  // namespace asymac::agent
