#include "asymac/pomdp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace asymac {

double Pomdp::T(int s, int a, int next) const {
  for (const auto& out : outcomes(s, a))
    if (out.next == next) return out.prob;
  return 0.0;
}

double Pomdp::O(int s, int a, int next, int o) const {
  for (const auto& out : outcomes(s, a)) {
    if (out.next != next) continue;
    for (auto [idx, p] : out.observation)
      if (idx == o) return p;
  }
  return 0.0;
}

double Pomdp::O0(int s, int o) const {
  if (initial_emission.empty()) return 0.0;
  for (auto [idx, p] : initial_emission[s])
    if (idx == o) return p;
  return 0.0;
}

bool Pomdp::observation_depends_on_next_state_only() const {
  std::vector<const SparseRow*> seen(n_states, nullptr);
  for (const auto& row : dynamics) {
    for (const auto& out : row) {
      if (out.prob <= 0.0) continue;
      const SparseRow*& ref = seen[out.next];
      if (ref == nullptr) {
        ref = &out.observation;
      } else if (*ref != out.observation) {
        return false;
      }
    }
  }
  return true;
}

double Pomdp::max_abs_reward() const {
  double m = 0.0;
  for (double r : reward) m = std::max(m, std::abs(r));
  return m;
}

Pomdp Pomdp::with_dimensions(int n_states, int n_actions, int n_obs, double gamma) {
  Pomdp p;
  p.n_states = n_states;
  p.n_actions = n_actions;
  p.n_obs = n_obs;
  p.gamma = gamma;
  p.initial.assign(n_states, 0.0);
  p.dynamics.assign(static_cast<std::size_t>(n_states) * n_actions, {});
  p.reward.assign(static_cast<std::size_t>(n_states) * n_actions, 0.0);
  return p;
}

History History::suffix(std::size_t k) const {
  History h;
  if (steps.size() < k) {
    h.initial_observation = initial_observation;
    h.steps = steps;
  } else {
    h.steps.assign(steps.end() - static_cast<std::ptrdiff_t>(k), steps.end());
  }
  return h;
}

std::string History::key() const {
  std::string k;
  k.reserve(4 + steps.size() * 8);
  auto put = [&k](std::int32_t v) { k.append(reinterpret_cast<const char*>(&v), sizeof v); };
  put(initial_observation ? *initial_observation : -1);
  for (const auto& st : steps) {
    put(st.action);
    put(st.observation);
  }
  return k;
}

std::string History::to_string() const {
  std::ostringstream out;
  out << '[';
  if (initial_observation) out << 'o' << *initial_observation;
  for (const auto& st : steps) out << " a" << st.action << " o" << st.observation;
  out << ']';
  return out.str();
}

History Trajectory::history(std::size_t t) const {
  History h;
  h.initial_observation = initial_observation;
  h.steps.reserve(t);
  for (std::size_t i = 0; i < t; ++i) h.steps.push_back({actions[i], observations[i]});
  return h;
}

std::uint64_t Rng::mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng Rng::for_episode(std::uint64_t master, std::uint64_t run, std::uint64_t episode) {
  return Rng(mix(mix(mix(master) ^ run) ^ episode));
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

int Rng::categorical(std::span<const double> probs) {
  const double u = uniform();
  double acc = 0.0;
  int last_positive = -1;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last_positive = static_cast<int>(i);
    if (u < acc) return last_positive;
  }
  if (last_positive < 0) throw ContractViolation("categorical draw from an all-zero distribution");
  return last_positive;
}

int Rng::categorical(const SparseRow& row) {
  if (row.empty()) throw ContractViolation("categorical draw from an empty row");
  const double u = uniform();
  double acc = 0.0;
  for (auto [idx, p] : row) {
    acc += p;
    if (u < acc) return idx;
  }
  return row.back().first;
}

void check_distribution(std::span<const double> probs, std::size_t n, const char* what) {
  if (probs.size() != n) {
    throw ContractViolation(std::string(what) + ": expected " + std::to_string(n) +
                            " probabilities, got " + std::to_string(probs.size()));
  }
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ContractViolation(std::string(what) + ": negative or non-finite entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kDistributionTolerance)
    throw ContractViolation(std::string(what) + ": entries sum to " + std::to_string(sum));
}

namespace {

std::string row_name(const char* table, int s, int a) {
  return std::string(table) + "(s=" + std::to_string(s) + ", a=" + std::to_string(a) + ")";
}

// Checks index range, sign and total mass of a sparse row.
std::optional<std::string> check_row(const SparseRow& row, int n) {
  double sum = 0.0;
  int prev = -1;
  for (auto [idx, p] : row) {
    if (idx < 0 || idx >= n) return "index " + std::to_string(idx) + " out of range";
    if (idx <= prev) return "indices not strictly increasing";
    if (!(p >= 0.0) || !std::isfinite(p)) return "negative or non-finite probability";
    prev = idx;
    sum += p;
  }
  if (std::abs(sum - 1.0) > kDistributionTolerance) {
    std::ostringstream msg;
    msg.precision(12);
    msg << "row sums to " << sum;
    return msg.str();
  }
  return std::nullopt;
}

}  // namespace

std::vector<Diagnostic> validate(const Pomdp& p, const TerminalSpec& terminals) {
  std::vector<Diagnostic> out;
  if (p.n_states <= 0 || p.n_actions <= 0 || p.n_obs <= 0) {
    out.push_back({"dimensions", "state, action and observation counts must be positive"});
    return out;
  }
  const auto n_sa = static_cast<std::size_t>(p.n_states) * p.n_actions;
  if (p.dynamics.size() != n_sa) out.push_back({"T", "table has wrong number of rows"});
  if (p.reward.size() != n_sa) out.push_back({"R", "table has wrong number of entries"});
  if (p.initial.size() != static_cast<std::size_t>(p.n_states))
    out.push_back({"start", "distribution has wrong length"});
  if (!p.initial_emission.empty() && p.initial_emission.size() != static_cast<std::size_t>(p.n_states))
    out.push_back({"O0", "table has wrong number of rows"});
  if (!out.empty()) return out;

  if (!(p.gamma >= 0.0 && p.gamma < 1.0)) out.push_back({"discount", "gamma must lie in [0, 1)"});

  double start_sum = 0.0;
  bool start_ok = true;
  for (double b : p.initial) {
    start_ok = start_ok && b >= 0.0 && std::isfinite(b);
    start_sum += b;
  }
  if (!start_ok || std::abs(start_sum - 1.0) > kDistributionTolerance)
    out.push_back({"start", "initial distribution is not normalized"});

  for (int s = 0; s < p.n_states; ++s) {
    for (int a = 0; a < p.n_actions; ++a) {
      const auto& row = p.outcomes(s, a);
      SparseRow t_row;
      t_row.reserve(row.size());
      for (const auto& o : row) t_row.emplace_back(o.next, o.prob);
      if (auto err = check_row(t_row, p.n_states)) out.push_back({row_name("T", s, a), *err});
      for (const auto& o : row) {
        if (o.prob <= 0.0) continue;
        if (auto err = check_row(o.observation, p.n_obs)) {
          out.push_back({"O(s=" + std::to_string(s) + ", a=" + std::to_string(a) + ", s'=" +
                             std::to_string(o.next) + ")",
                         *err});
        }
      }
      if (!std::isfinite(p.R(s, a))) out.push_back({row_name("R", s, a), "non-finite reward"});
    }
    if (p.has_initial_observation()) {
      if (auto err = check_row(p.initial_emission[s], p.n_obs))
        out.push_back({"O0(s=" + std::to_string(s) + ")", *err});
    }
  }

  for (int s : terminals.terminal_states) {
    if (s < 0 || s >= p.n_states) {
      out.push_back({"terminal(s=" + std::to_string(s) + ")", "state out of range"});
      continue;
    }
    for (int a = 0; a < p.n_actions; ++a) {
      if (std::abs(p.T(s, a, s) - 1.0) > kDistributionTolerance || p.R(s, a) != 0.0) {
        std::ostringstream msg;
        msg << "terminal state is not absorbing with zero reward (action " << a
            << ": self-loop " << p.T(s, a, s) << ", reward " << p.R(s, a) << ")";
        out.push_back({"terminal(s=" + std::to_string(s) + ")", msg.str()});
        break;
      }
    }
  }
  for (auto [s, a] : terminals.terminal_transitions) {
    if (s < 0 || s >= p.n_states || a < 0 || a >= p.n_actions)
      out.push_back({"terminal(s=" + std::to_string(s) + ", a=" + std::to_string(a) + ")",
                     "transition out of range"});
  }
  return out;
}

void require_valid(const Pomdp& pomdp, const TerminalSpec& terminals) {
  auto diags = validate(pomdp, terminals);
  if (!diags.empty())
    throw ContractViolation("invalid POMDP: " + diags.front().where + ": " + diags.front().message);
}

StepResult step(const Pomdp& p, int s, int a, Rng& rng) {
  if (s < 0 || s >= p.n_states) throw ContractViolation("step: state index out of range");
  if (a < 0 || a >= p.n_actions) throw ContractViolation("step: action index out of range");
  const auto& row = p.outcomes(s, a);
  if (row.empty()) throw ContractViolation("step: empty transition row");
  const double u = rng.uniform();
  double acc = 0.0;
  const Outcome* chosen = &row.back();
  for (const auto& out : row) {
    acc += out.prob;
    if (u < acc) {
      chosen = &out;
      break;
    }
  }
  const int o = rng.categorical(chosen->observation);
  return {chosen->next, o, p.R(s, a)};
}

std::pair<int, std::optional<int>> sample_initial(const Pomdp& p, Rng& rng) {
  const int s0 = rng.categorical(p.initial);
  std::optional<int> o0;
  if (p.has_initial_observation()) o0 = rng.categorical(p.initial_emission[s0]);
  return {s0, o0};
}

Trajectory sample_episode(const Pomdp& p, const TerminalSpec& terminals, const HistoryPolicy& policy,
                          int max_steps, Rng& rng) {
  if (max_steps < 1) throw ContractViolation("sample_episode: max_steps must be at least 1");
  Trajectory traj;
  auto [s, o0] = sample_initial(p, rng);
  traj.initial_observation = o0;
  traj.states.push_back(s);
  History h;
  h.initial_observation = o0;
  for (int t = 0; t < max_steps; ++t) {
    const auto probs = policy(h);
    check_distribution(probs, static_cast<std::size_t>(p.n_actions), "policy");
    const int a = rng.categorical(probs);
    const auto res = step(p, s, a, rng);
    traj.actions.push_back(a);
    traj.observations.push_back(res.observation);
    traj.rewards.push_back(res.reward);
    traj.states.push_back(res.next_state);
    if (terminals.ends_episode(s, a, res.next_state)) return traj;
    s = res.next_state;
    h.steps.push_back({a, res.observation});
  }
  traj.truncated = true;
  return traj;
}

double discounted_return(std::span<const double> rewards, double gamma) {
  double g = 0.0;
  for (auto it = rewards.rbegin(); it != rewards.rend(); ++it) g = *it + gamma * g;
  return g;
}

}  // namespace asymac
