#include <Eigen/Dense>
#include <cmath>

#include "asymac/oracle.hpp"

namespace asymac::oracle {

namespace {

void append_int(std::string& key, std::int32_t v) { key.append(reinterpret_cast<const char*>(&v), sizeof v); }

}  // namespace

ValueOracle::ValueOracle(const Pomdp& pomdp, TabularPolicy policy, OracleOptions options)
    : pomdp_(pomdp), policy_(std::move(policy)), options_(options) {
  if (policy_.n_actions() != pomdp_.n_actions) throw ContractViolation("policy and POMDP disagree on |A|");
}

void ValueOracle::charge() {
  if (++nodes_ > options_.node_budget)
    throw BudgetExceeded("value oracle exceeded its node budget of " + std::to_string(options_.node_budget));
}

double ValueOracle::v_history(const History& h, Horizon hz) {
  if (hz.depth < 0) throw ContractViolation("horizon depth must be nonnegative");
  const Belief b = belief_of_history(pomdp_, h);
  return v_h(h, b, hz.depth);
}

double ValueOracle::q_history(const History& h, int action, Horizon hz) {
  if (hz.depth < 0) throw ContractViolation("horizon depth must be nonnegative");
  if (action < 0 || action >= pomdp_.n_actions) throw ContractViolation("q_history: action out of range");
  const Belief b = belief_of_history(pomdp_, h);
  if (hz.depth == 0) return 0.0;
  return q_h_with_belief(h, b, action, hz.depth);
}

double ValueOracle::v_history_state(const History& h, int state, Horizon hz) {
  if (hz.depth < 0) throw ContractViolation("horizon depth must be nonnegative");
  if (state < 0 || state >= pomdp_.n_states) throw ContractViolation("v_history_state: state out of range");
  const Belief b = belief_of_history(pomdp_, h);
  if (b[state] <= 0.0) throw Unrealizable("state " + std::to_string(state) + " has zero belief after " + h.to_string());
  return v_hs_unchecked(h, state, hz.depth);
}

double ValueOracle::q_history_state(const History& h, int state, int action, Horizon hz) {
  if (hz.depth < 0) throw ContractViolation("horizon depth must be nonnegative");
  if (action < 0 || action >= pomdp_.n_actions) throw ContractViolation("q_history_state: action out of range");
  const Belief b = belief_of_history(pomdp_, h);
  if (b[state] <= 0.0) throw Unrealizable("state " + std::to_string(state) + " has zero belief after " + h.to_string());
  if (hz.depth == 0) return 0.0;
  return q_hs_unchecked(h, state, action, hz.depth);
}

double ValueOracle::v_h(const History& h, const Belief& b, int depth) {
  if (depth == 0) return 0.0;
  std::string key = policy_.context(h);
  key.append(reinterpret_cast<const char*>(b.data()), b.size() * sizeof(double));
  append_int(key, depth);
  if (auto it = memo_h_.find(key); it != memo_h_.end()) return it->second;
  charge();
  const auto pi = policy_.probabilities(h);
  double v = 0.0;
  for (int a = 0; a < pomdp_.n_actions; ++a)
    if (pi[a] > 0.0) v += pi[a] * q_h_with_belief(h, b, a, depth);
  memo_h_.emplace(std::move(key), v);
  return v;
}

double ValueOracle::q_h_with_belief(const History& h, const Belief& b, int a, int depth) {
  if (depth == 0) return 0.0;
  const Pomdp& p = pomdp_;
  double r = 0.0;
  for (int s = 0; s < p.n_states; ++s) r += b[s] * p.R(s, a);
  if (depth == 1) return r;

  // joint[o][s'] = Pr(s', o | b, a)
  std::vector<double> joint(static_cast<std::size_t>(p.n_obs) * p.n_states, 0.0);
  std::vector<char> seen(p.n_obs, 0);
  for (int s = 0; s < p.n_states; ++s) {
    if (b[s] == 0.0) continue;
    for (const auto& out : p.outcomes(s, a)) {
      for (auto [o, q] : out.observation) {
        joint[static_cast<std::size_t>(o) * p.n_states + out.next] += b[s] * out.prob * q;
        seen[o] = 1;
      }
    }
  }
  double future = 0.0;
  for (int o = 0; o < p.n_obs; ++o) {
    if (!seen[o]) continue;
    Belief next(joint.begin() + static_cast<std::ptrdiff_t>(o) * p.n_states,
                joint.begin() + static_cast<std::ptrdiff_t>(o + 1) * p.n_states);
    double z = 0.0;
    for (double v : next) z += v;
    if (z <= 0.0) continue;
    for (double& v : next) v /= z;
    future += z * v_h(h.extended(a, o), next, depth - 1);
  }
  return r + p.gamma * future;
}

double ValueOracle::v_hs_unchecked(const History& h, int state, int depth) {
  if (depth == 0) return 0.0;
  return v_hs_all(h, depth)[state];
}

double ValueOracle::q_hs_unchecked(const History& h, int state, int a, int depth) {
  if (depth == 0) return 0.0;
  return q_hs_row(h, a, depth)[state];
}

// V(h, .) for every state at once; the expansion of h is shared by all states.
const std::vector<double>& ValueOracle::v_hs_all(const History& h, int depth) {
  std::string key = policy_.context(h);
  append_int(key, depth);
  if (auto it = memo_hs_.find(key); it != memo_hs_.end()) return it->second;
  charge();
  const auto pi = policy_.probabilities(h);
  std::vector<double> v(pomdp_.n_states, 0.0);
  for (int a = 0; a < pomdp_.n_actions; ++a) {
    if (pi[a] <= 0.0) continue;
    const auto q = q_hs_row(h, a, depth);
    for (int s = 0; s < pomdp_.n_states; ++s) v[s] += pi[a] * q[s];
  }
  return memo_hs_.emplace(std::move(key), std::move(v)).first->second;
}

std::vector<double> ValueOracle::q_hs_row(const History& h, int a, int depth) {
  const Pomdp& p = pomdp_;
  std::vector<double> q(p.n_states);
  for (int s = 0; s < p.n_states; ++s) q[s] = p.R(s, a);
  if (depth == 1) return q;
  std::vector<const std::vector<double>*> child(p.n_obs, nullptr);
  for (int s = 0; s < p.n_states; ++s)
    for (const auto& out : p.outcomes(s, a))
      for (auto [o, prob] : out.observation)
        if (child[o] == nullptr) child[o] = &v_hs_all(h.extended(a, o), depth - 1);
  for (int s = 0; s < p.n_states; ++s) {
    double future = 0.0;
    for (const auto& out : p.outcomes(s, a))
      for (auto [o, prob] : out.observation) future += out.prob * prob * (*child[o])[out.next];
    q[s] += p.gamma * future;
  }
  return q;
}

double v_history(const Pomdp& pomdp, const TabularPolicy& policy, const History& h, Horizon hz) {
  return ValueOracle(pomdp, policy).v_history(h, hz);
}

double q_history(const Pomdp& pomdp, const TabularPolicy& policy, const History& h, int action, Horizon hz) {
  return ValueOracle(pomdp, policy).q_history(h, action, hz);
}

double v_history_state(const Pomdp& pomdp, const TabularPolicy& policy, const History& h, int state, Horizon hz) {
  return ValueOracle(pomdp, policy).v_history_state(h, state, hz);
}

std::vector<double> v_state_reactive(const Pomdp& p, const TabularPolicy& policy) {
  if (policy.kind() != TabularPolicy::Kind::Reactive)
    throw IllDefinedValue("state values are only well defined for reactive policies");
  if (!p.observation_depends_on_next_state_only())
    throw IllDefinedValue("state values need observations that depend on the arrival state only");

  // O(. | s) for each state: from any transition arriving there, else from
  // the initial emission. Both must agree when both exist.
  std::vector<const SparseRow*> emission(p.n_states, nullptr);
  for (const auto& row : p.dynamics)
    for (const auto& out : row)
      if (out.prob > 0.0 && emission[out.next] == nullptr) emission[out.next] = &out.observation;
  for (int s = 0; s < p.n_states; ++s) {
    if (!p.has_initial_observation()) continue;
    const SparseRow& o0 = p.initial_emission[s];
    if (emission[s] == nullptr) {
      emission[s] = &o0;
    } else if (p.initial[s] > 0.0 && *emission[s] != o0) {
      throw IllDefinedValue("initial emission differs from the arrival emission of state " + std::to_string(s));
    }
  }

  const int n = p.n_states;
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (int s = 0; s < n; ++s) {
    std::vector<double> action_prob(p.n_actions, 0.0);
    if (emission[s] == nullptr) {
      action_prob = policy.reactive_row(-1);
    } else {
      for (auto [o, q] : *emission[s]) {
        const auto& row = policy.reactive_row(o);
        for (int a = 0; a < p.n_actions; ++a) action_prob[a] += q * row[a];
      }
    }
    for (int a = 0; a < p.n_actions; ++a) {
      if (action_prob[a] == 0.0) continue;
      rhs(s) += action_prob[a] * p.R(s, a);
      for (const auto& out : p.outcomes(s, a)) system(s, out.next) -= p.gamma * action_prob[a] * out.prob;
    }
  }
  const Eigen::VectorXd v = system.partialPivLu().solve(rhs);
  return std::vector<double>(v.data(), v.data() + n);
}

}  // namespace asymac::oracle
