#include <algorithm>
#include <cmath>

#include "asymac/agent.hpp"

namespace asymac::agent {

std::string short_name(CriticKind kind) {
  switch (kind) {
    case CriticKind::History: return "h";
    case CriticKind::State: return "s";
    case CriticKind::HistoryState: return "hs";
    case CriticKind::Truncated2: return "h2";
    case CriticKind::Truncated4: return "h4";
    case CriticKind::HistoryStateSampled: return "hs-sampled";
  }
  return "?";
}

CriticKind parse_critic_kind(const std::string& name) {
  for (auto k : all_critic_kinds())
    if (short_name(k) == name) return k;
  throw std::invalid_argument("unknown critic kind '" + name + "' (expected h, s, hs, hs-sampled, h2 or h4)");
}

std::vector<CriticKind> all_critic_kinds() {
  return {CriticKind::History, CriticKind::State, CriticKind::HistoryState,
          CriticKind::Truncated2, CriticKind::Truncated4, CriticKind::HistoryStateSampled};
}

int truncation_of(CriticKind kind) {
  if (kind == CriticKind::Truncated2) return 2;
  if (kind == CriticKind::Truncated4) return 4;
  return 0;
}

bool critic_sees_history(CriticKind kind) { return kind != CriticKind::State; }

bool critic_sees_state(CriticKind kind) {
  return kind == CriticKind::State || kind == CriticKind::HistoryState || kind == CriticKind::HistoryStateSampled;
}

void TrainConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  need(lr_actor > 0.0 && std::isfinite(lr_actor), "lr_actor must be positive");
  need(lr_critic > 0.0 && std::isfinite(lr_critic), "lr_critic must be positive");
  need(lambda0 >= 0.0 && std::isfinite(lambda0), "lambda0 must be nonnegative");
  need(entropy_decay_steps > 0, "entropy decay horizon must be positive");
  need(episodes_per_update >= 1, "episodes per update must be at least 1");
  need(episode_cap >= 1, "episode cap must be at least 1");
  need(target_period >= 1, "target period must be positive");
  need(max_timesteps >= 0, "max timesteps must be nonnegative");
  need(net.embedding >= 1 && net.hidden >= 1, "network widths must be positive");
  for (int w : net.mlp) need(w >= 1, "network widths must be positive");
}

double negentropy_schedule(long long timestep, double lambda0, long long horizon) {
  if (timestep < 0) throw ContractViolation("negentropy_schedule: negative timestep");
  const double frac = static_cast<double>(std::min(timestep, horizon)) / static_cast<double>(horizon);
  return lambda0 * (1.0 - 0.9 * frac);
}

HistoryEncoder::HistoryEncoder(const std::string& name, int n_actions, int n_obs, const NetConfig& cfg, Rng& rng)
    : actions(name + ".action_embedding", n_actions + 1, cfg.embedding, rng),
      observations(name + ".observation_embedding", n_obs, cfg.embedding, rng),
      gru(name + ".gru", 2 * cfg.embedding, cfg.hidden, rng),
      n_actions_(n_actions) {}

std::vector<std::pair<int, int>> HistoryEncoder::inputs(const History& h) const {
  std::vector<std::pair<int, int>> out;
  out.reserve(h.steps.size() + 1);
  if (h.initial_observation) out.emplace_back(start_symbol(), *h.initial_observation);
  for (const auto& s : h.steps) out.emplace_back(s.action, s.observation);
  return out;
}

Var HistoryEncoder::zero(Tape& tape) const { return tape.constant(Matrix::Zero(1, hidden())); }

Var HistoryEncoder::step(Tape& tape, Var h, int action_symbol, int observation) const {
  Var x = nn::concat_cols(actions.forward(tape, {action_symbol}), observations.forward(tape, {observation}));
  return gru.step(tape, x, h);
}

Var HistoryEncoder::encode(Tape& tape, const History& h) const {
  Var state = zero(tape);
  for (auto [a, o] : inputs(h)) state = step(tape, state, a, o);
  return state;
}

std::vector<Var> HistoryEncoder::prefixes(Tape& tape, const std::vector<std::pair<int, int>>& in) const {
  std::vector<Var> out;
  out.reserve(in.size() + 1);
  out.push_back(zero(tape));
  for (auto [a, o] : in) out.push_back(step(tape, out.back(), a, o));
  return out;
}

std::vector<nn::Parameter*> HistoryEncoder::parameters() {
  std::vector<nn::Parameter*> out{&actions.table, &observations.table};
  for (auto* p : gru.parameters()) out.push_back(p);
  return out;
}

std::vector<nn::Parameter*> PolicyNet::parameters() {
  auto out = encoder.parameters();
  for (auto* p : head.parameters()) out.push_back(p);
  return out;
}

std::vector<nn::Parameter*> CriticNet::parameters() {
  std::vector<nn::Parameter*> out;
  if (uses_history) out = encoder.parameters();
  if (uses_state) out.push_back(&states.table);
  for (auto* p : head.parameters()) out.push_back(p);
  return out;
}

namespace {

CriticNet make_critic(const std::string& name, const Pomdp& p, CriticKind kind, const NetConfig& cfg, Rng& rng) {
  CriticNet c;
  c.uses_history = critic_sees_history(kind);
  c.uses_state = critic_sees_state(kind);
  int in = 0;
  if (c.uses_history) {
    c.encoder = HistoryEncoder(name + ".encoder", p.n_actions, p.n_obs, cfg, rng);
    in += cfg.hidden;
  }
  if (c.uses_state) {
    c.states = nn::Embedding(name + ".state_embedding", p.n_states, cfg.embedding, rng);
    in += cfg.embedding;
  }
  c.head = nn::Mlp(name + ".head", in, cfg.mlp, 1, rng);
  return c;
}

}  // namespace

AgentNets::AgentNets(const Pomdp& p, CriticKind kind, const NetConfig& cfg, std::uint64_t seed)
    : kind_(kind), n_actions_(p.n_actions), n_obs_(p.n_obs), n_states_(p.n_states), config_(cfg) {
  Rng rng(Rng::mix(seed ^ 0x6e6574696e6974ULL));
  policy.encoder = HistoryEncoder("policy.encoder", p.n_actions, p.n_obs, cfg, rng);
  policy.head = nn::Mlp("policy.head", cfg.hidden, cfg.mlp, p.n_actions, rng);
  critic = make_critic("critic", p, kind, cfg, rng);
  target = critic;
  auto rename = [](std::vector<nn::Parameter*> params) {
    for (auto* q : params) q->name.replace(0, 6, "target");
  };
  rename(target.parameters());
}

History AgentNets::window(const History& h) const {
  const int k = truncation();
  return k > 0 ? h.suffix(static_cast<std::size_t>(k)) : h;
}

Var AgentNets::policy_features(Tape& tape, const History& h) const { return policy.encoder.encode(tape, window(h)); }

Var AgentNets::critic_output(Tape& tape, const CriticNet& net, const History& h, int state) const {
  Var features;
  if (net.uses_history) features = net.encoder.encode(tape, window(h));
  if (net.uses_state) {
    if (state < 0 || state >= n_states_) throw ContractViolation("critic input: state out of range");
    Var s = net.states.forward(tape, {state});
    features = net.uses_history ? nn::concat_cols(features, s) : s;
  }
  return net.head.forward(tape, features);
}

std::vector<double> AgentNets::action_probabilities(const History& h) const {
  Tape tape(false);
  const Matrix lp = nn::log_softmax(policy.head.forward(tape, policy_features(tape, h))).value();
  std::vector<double> out(n_actions_);
  for (int a = 0; a < n_actions_; ++a) out[a] = std::exp(lp(0, a));
  return out;
}

double AgentNets::critic_value(const History& h, int state) const {
  Tape tape(false);
  return critic_output(tape, critic, h, state).scalar();
}

double AgentNets::target_value(const History& h, int state) const {
  Tape tape(false);
  return critic_output(tape, target, h, state).scalar();
}

std::vector<nn::Parameter*> AgentNets::all_parameters() {
  auto out = policy_parameters();
  for (auto* q : critic_parameters()) out.push_back(q);
  for (auto* q : target_parameters()) out.push_back(q);
  return out;
}

void AgentNets::sync_target() {
  auto src = critic.parameters();
  auto dst = target.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i]->value = src[i]->value;
}

std::vector<double> IncrementalPolicy::head(const Matrix& features) const {
  Tape tape(false);
  const Matrix lp = nn::log_softmax(nets_.policy.head.forward(tape, tape.constant(features))).value();
  std::vector<double> out(nets_.n_actions());
  for (int a = 0; a < nets_.n_actions(); ++a) out[a] = std::exp(lp(0, a));
  return out;
}

std::vector<double> IncrementalPolicy::operator()(const History& h) {
  const auto& enc = nets_.policy.encoder;
  Tape tape(false);
  const bool same = valid_ && h == last_;
  const bool extends = valid_ && h.initial_observation == last_.initial_observation &&
                       h.steps.size() == last_.steps.size() + 1 &&
                       std::equal(last_.steps.begin(), last_.steps.end(), h.steps.begin());
  if (nets_.truncation() == 0 && extends) {
    const auto& s = h.steps.back();
    hidden_ = enc.step(tape, tape.constant(hidden_), s.action, s.observation).value();
  } else if (!(nets_.truncation() == 0 && same)) {
    hidden_ = enc.encode(tape, nets_.window(h)).value();
  }
  last_ = h;
  valid_ = true;
  return head(hidden_);
}

}  // namespace asymac::agent
