#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "asymac/envs.hpp"
#include "asymac/nn/adam.hpp"
#include "asymac/nn/checkpoint.hpp"
#include "asymac/nn/layers.hpp"
#include "asymac/oracle.hpp"
#include "asymac/pomdp.hpp"

namespace asymac::agent {

using nn::Matrix;
using nn::Tape;
using nn::Var;

enum class CriticKind { History, State, HistoryState, Truncated2, Truncated4, HistoryStateSampled };

/// "h", "s", "hs", "h2", "h4", "hs-sampled".
std::string short_name(CriticKind kind);
/// Inverse of short_name; throws std::invalid_argument.
CriticKind parse_critic_kind(const std::string& name);
std::vector<CriticKind> all_critic_kinds();
/// Window length for the quasi-reactive kinds, 0 otherwise. Applies to both
/// the policy and the critic.
int truncation_of(CriticKind kind);
bool critic_sees_history(CriticKind kind);
bool critic_sees_state(CriticKind kind);

struct NetConfig {
  int embedding = 64;
  int hidden = 128;
  std::vector<int> mlp{512, 256};
};

struct TrainConfig {
  double lr_actor = 1e-3;
  double lr_critic = 1e-3;
  double lambda0 = 0.1;
  long long entropy_decay_steps = 2'000'000;
  int episodes_per_update = 2;
  int episode_cap = 100;
  long long target_period = 10'000;
  long long max_timesteps = 0;
  std::uint64_t seed = 0;
  bool gamma_t_weighting = true;
  /// Stop once the rolling-100 return reaches this value (100 episodes
  /// minimum).
  std::optional<double> stop_at_rolling100;
  NetConfig net;

  /// Throws std::invalid_argument on nonpositive rates, E < 1, and so on.
  void validate() const;
};

/// lambda0 * (1 - 0.9 * min(t, horizon) / horizon).
double negentropy_schedule(long long timestep, double lambda0, long long horizon = 2'000'000);

/// GRU over concatenated (action, observation) embeddings. The action table
/// has one extra row, the start symbol, which is paired with the initial
/// observation.
class HistoryEncoder {
 public:
  HistoryEncoder() = default;
  HistoryEncoder(const std::string& name, int n_actions, int n_obs, const NetConfig& cfg, Rng& rng);

  int start_symbol() const { return n_actions_; }
  int hidden() const { return gru.hidden(); }

  /// (action symbol, observation) inputs for h.
  std::vector<std::pair<int, int>> inputs(const History& h) const;
  Var zero(Tape& tape) const;
  /// One recurrence step on a single row.
  Var step(Tape& tape, Var h, int action_symbol, int observation) const;
  /// Final hidden state after unrolling h from zeros (1 x H).
  Var encode(Tape& tape, const History& h) const;
  /// Hidden states after each prefix of `inputs`: element i follows i inputs.
  std::vector<Var> prefixes(Tape& tape, const std::vector<std::pair<int, int>>& inputs) const;

  std::vector<nn::Parameter*> parameters();

  nn::Embedding actions;
  nn::Embedding observations;
  nn::GruCell gru;

 private:
  int n_actions_ = 0;
};

struct PolicyNet {
  HistoryEncoder encoder;
  nn::Mlp head;
  std::vector<nn::Parameter*> parameters();
};

struct CriticNet {
  bool uses_history = false;
  bool uses_state = false;
  HistoryEncoder encoder;
  nn::Embedding states;
  nn::Mlp head;
  std::vector<nn::Parameter*> parameters();
};

/// Separate policy and critic networks plus a frozen target critic.
class AgentNets {
 public:
  AgentNets(const Pomdp& pomdp, CriticKind kind, const NetConfig& cfg, std::uint64_t seed);

  CriticKind kind() const { return kind_; }
  int truncation() const { return truncation_of(kind_); }
  int n_actions() const { return n_actions_; }
  int n_obs() const { return n_obs_; }
  int n_states() const { return n_states_; }
  const NetConfig& config() const { return config_; }

  /// The history as each network sees it (suffix for truncated kinds).
  History window(const History& h) const;

  /// Policy features for h from a fresh unroll (1 x H).
  Var policy_features(Tape& tape, const History& h) const;
  /// Critic output for (h, s) as a 1 x 1 node; inputs the kind ignores are
  /// not read.
  Var critic_output(Tape& tape, const CriticNet& net, const History& h, int state) const;

  std::vector<double> action_probabilities(const History& h) const;
  double critic_value(const History& h, int state) const;
  double target_value(const History& h, int state) const;

  void sync_target();
  std::vector<nn::Parameter*> policy_parameters() { return policy.parameters(); }
  std::vector<nn::Parameter*> critic_parameters() { return critic.parameters(); }
  std::vector<nn::Parameter*> target_parameters() { return target.parameters(); }
  /// Policy, critic and target parameters in that order.
  std::vector<nn::Parameter*> all_parameters();

  PolicyNet policy;
  CriticNet critic;
  CriticNet target;

 private:
  CriticKind kind_;
  int n_actions_, n_obs_, n_states_;
  NetConfig config_;
};

/// Per-episode sampling adapter: carries the policy GRU state between calls
/// so each step costs one recurrence. Falls back to a fresh unroll when the
/// history is not a one-step extension of the previous call, and always
/// re-unrolls the window for truncated kinds.
class IncrementalPolicy {
 public:
  explicit IncrementalPolicy(const AgentNets& nets) : nets_(nets) {}
  std::vector<double> operator()(const History& h);
  /// Hidden state after the last call.
  const Matrix& hidden() const { return hidden_; }

 private:
  std::vector<double> head(const Matrix& features) const;
  const AgentNets& nets_;
  Matrix hidden_;
  History last_;
  bool valid_ = false;
};

/// delta_t = r_t + gamma * next_t - current_t, with next_{T-1} forced to 0
/// when the episode terminated.
std::vector<double> td_errors(std::span<const double> rewards, std::span<const double> current,
                              std::span<const double> next, bool terminated, double gamma);

/// One sampled episode plus the state fed to state-aware critics at each
/// time step (size T + 1).
struct EpisodeData {
  Trajectory trajectory;
  std::vector<int> critic_states;
};

struct UpdateStats {
  double policy_loss = 0.0;
  double critic_loss = 0.0;
  double negentropy_loss = 0.0;
  double lambda = 0.0;
  std::vector<std::vector<double>> deltas;  // per episode
};

class TrainingDivergence : public std::runtime_error {
 public:
  TrainingDivergence(const std::string& what, std::string dump) : std::runtime_error(what), dump(std::move(dump)) {}
  std::string dump;
};

struct Optimizers {
  nn::Adam actor;
  nn::Adam critic;
};
Optimizers make_optimizers(AgentNets& nets, const TrainConfig& cfg);

/// One A2C step on a batch of completed episodes. Losses are averaged over
/// episodes and summed over time.
UpdateStats update(AgentNets& nets, Optimizers& opt, const std::vector<EpisodeData>& batch, double gamma,
                   double lambda, bool gamma_t_weighting);

/// Samples s ~ b(h_t) for every prefix of the trajectory.
std::vector<int> belief_sampled_states(const Pomdp& pomdp, const Trajectory& traj, Rng& rng);

EpisodeData sample_training_episode(const envs::Environment& env, const AgentNets& nets, int cap,
                                    std::uint64_t seed, std::uint64_t episode);

struct CurvePoint {
  long long timestep = 0;
  long long episode = 0;
  double episode_return = 0.0;  // undiscounted
  double rolling100 = 0.0;
};

struct LearningCurve {
  std::vector<CurvePoint> points;
  void add(long long timestep, double episode_return);
  double final_rolling100() const { return points.empty() ? 0.0 : points.back().rolling100; }
  double best_rolling100(std::size_t min_episodes = 100) const;
};

struct TrainResult {
  LearningCurve curve;
  long long timesteps = 0;
  long long updates = 0;
  bool diverged = false;
  std::string divergence;
};

/// Alg. 1 loop: sample E episodes, log returns, schedule lambda, update,
/// refresh the target critic at every multiple of the target period.
/// Deterministic given cfg.seed. Divergence is reported in the result with
/// the curve so far.
TrainResult train(const envs::Environment& env, CriticKind kind, const TrainConfig& cfg, AgentNets& nets,
                  Optimizers& opt);
TrainResult train(const envs::Environment& env, CriticKind kind, const TrainConfig& cfg,
                  nn::Checkpoint* final_checkpoint = nullptr);

/// Networks, optimizer moments and counters.
nn::Checkpoint save_checkpoint(AgentNets& nets, Optimizers& opt, const std::string& env_name, long long timestep);
/// Rebuilds networks for `pomdp` from a checkpoint written by save_checkpoint.
AgentNets load_nets(const nn::Checkpoint& ck, const Pomdp& pomdp);
void load_optimizers(const nn::Checkpoint& ck, AgentNets& nets, Optimizers& opt);

struct Probe {
  std::string id;
  History history;
  int state = 0;
};

/// Raw critic outputs. Throws oracle::Unrealizable when a probe's state has
/// zero belief after its history.
std::vector<double> probe_critic(const AgentNets& nets, const Pomdp& pomdp, const std::vector<Probe>& probes);

/// The four fork probes of Heaven-Hell: heaven side x priest visited.
std::vector<Probe> heavenhell_fork_probes(int n);

/// Sampled-gradient calibration against the exact oracle: a tabular softmax
/// policy acts for `depth` steps, the critic is pinned to the oracle's
/// truncated values, and the per-entry mean of the sampled estimator is
/// compared with exact_policy_gradient.
struct CalibrationEntry {
  History history;
  int action = 0;
  double exact = 0.0;
  double mean = 0.0;
  double standard_error = 0.0;
  bool pass = true;
};

struct CalibrationReport {
  std::vector<CalibrationEntry> entries;
  int episodes = 0;
  bool pass() const;
  double worst_z() const;
};

CalibrationReport calibrate_estimator(const Pomdp& pomdp, const oracle::TabularPolicy& policy, int depth,
                                      oracle::GradientMode mode, int episodes, std::uint64_t seed,
                                      double sigmas = 3.0);

}  // namespace asymac::agent
