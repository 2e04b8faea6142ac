#include <algorithm>
#include <cmath>

#include "asymac/oracle.hpp"

namespace asymac::oracle {

double PolicyGradient::max_abs_difference(const PolicyGradient& other) const {
  double worst = 0.0;
  auto scan = [&worst](const PolicyGradient& a, const PolicyGradient& b) {
    for (const auto& [h, row] : a.rows) {
      auto it = b.rows.find(h);
      for (std::size_t i = 0; i < row.size(); ++i) {
        const double other_v = it == b.rows.end() ? 0.0 : it->second[i];
        worst = std::max(worst, std::abs(row[i] - other_v));
      }
    }
  };
  scan(*this, other);
  scan(other, *this);
  return worst;
}

namespace {

struct WeightedHistory {
  History h;
  Belief belief;
  double prob;
};

std::vector<WeightedHistory> initial_histories(const Pomdp& p) {
  std::vector<WeightedHistory> out;
  if (!p.has_initial_observation()) {
    out.push_back({History{}, prior(p), 1.0});
    return out;
  }
  for (int o = 0; o < p.n_obs; ++o) {
    double z = 0.0;
    for (int s = 0; s < p.n_states; ++s) z += p.initial[s] * p.O0(s, o);
    if (z <= 0.0) continue;
    History h;
    h.initial_observation = o;
    out.push_back({h, condition_initial(p, prior(p), o), z});
  }
  return out;
}

PolicyGradient symmetric_gradient(const Pomdp& p, ValueOracle& oracle, int depth, std::size_t budget) {
  const TabularPolicy& policy = oracle.policy();
  PolicyGradient grad;
  std::vector<WeightedHistory> frontier = initial_histories(p);
  std::size_t visited = 0;
  double discount = 1.0;
  for (int t = 0; t < depth; ++t) {
    std::vector<WeightedHistory> next;
    for (const auto& node : frontier) {
      if (++visited > budget) throw BudgetExceeded("gradient enumeration exceeded its budget");
      const auto pi = policy.probabilities(node.h);
      std::vector<double> q(p.n_actions, 0.0);
      double v = 0.0;
      for (int a = 0; a < p.n_actions; ++a) {
        q[a] = oracle.q_h_with_belief(node.h, node.belief, a, depth - t);
        v += pi[a] * q[a];
      }
      auto& row = grad.rows[node.h];
      row.assign(p.n_actions, 0.0);
      for (int b = 0; b < p.n_actions; ++b) row[b] = -discount * node.prob * pi[b] * (q[b] - v);

      if (t + 1 == depth) continue;
      for (int a = 0; a < p.n_actions; ++a) {
        if (pi[a] == 0.0) continue;
        for (int o = 0; o < p.n_obs; ++o) {
          const double z = observation_probability(p, node.belief, a, o);
          if (z <= 0.0) continue;
          next.push_back({node.h.extended(a, o), belief_update(p, node.belief, a, o), node.prob * pi[a] * z});
        }
      }
    }
    frontier = std::move(next);
    discount *= p.gamma;
  }
  return grad;
}

PolicyGradient asymmetric_gradient(const Pomdp& p, ValueOracle& oracle, int depth, std::size_t budget) {
  const TabularPolicy& policy = oracle.policy();
  PolicyGradient grad;
  // Joint Pr(h, s) for every history at the current length.
  std::map<History, std::vector<double>> frontier;
  if (!p.has_initial_observation()) {
    frontier[History{}] = p.initial;
  } else {
    for (int s = 0; s < p.n_states; ++s) {
      if (p.initial[s] == 0.0) continue;
      for (auto [o, q] : p.initial_emission[s]) {
        History h;
        h.initial_observation = o;
        auto& joint = frontier[h];
        joint.resize(p.n_states, 0.0);
        joint[s] += p.initial[s] * q;
      }
    }
  }
  std::size_t visited = 0;
  double discount = 1.0;
  for (int t = 0; t < depth; ++t) {
    std::map<History, std::vector<double>> next;
    for (const auto& [h, joint] : frontier) {
      if (++visited > budget) throw BudgetExceeded("gradient enumeration exceeded its budget");
      const auto pi = policy.probabilities(h);
      auto& row = grad.rows[h];
      row.assign(p.n_actions, 0.0);
      for (int s = 0; s < p.n_states; ++s) {
        if (joint[s] == 0.0) continue;
        std::vector<double> q(p.n_actions, 0.0);
        double v = 0.0;
        for (int a = 0; a < p.n_actions; ++a) {
          q[a] = oracle.q_hs_unchecked(h, s, a, depth - t);
          v += pi[a] * q[a];
        }
        for (int b = 0; b < p.n_actions; ++b) row[b] -= discount * joint[s] * pi[b] * (q[b] - v);
      }

      if (t + 1 == depth) continue;
      for (int a = 0; a < p.n_actions; ++a) {
        if (pi[a] == 0.0) continue;
        for (int s = 0; s < p.n_states; ++s) {
          if (joint[s] == 0.0) continue;
          for (const auto& out : p.outcomes(s, a)) {
            for (auto [o, q] : out.observation) {
              auto& child = next[h.extended(a, o)];
              child.resize(p.n_states, 0.0);
              child[out.next] += joint[s] * pi[a] * out.prob * q;
            }
          }
        }
      }
    }
    frontier = std::move(next);
    discount *= p.gamma;
  }
  return grad;
}

}  // namespace

PolicyGradient exact_policy_gradient(const Pomdp& p, const TabularPolicy& policy, Horizon hz, GradientMode mode,
                                     std::size_t budget) {
  if (policy.kind() != TabularPolicy::Kind::Softmax)
    throw ContractViolation("exact_policy_gradient needs a softmax policy");
  if (hz.depth < 1) throw ContractViolation("exact_policy_gradient needs depth >= 1");
  ValueOracle oracle(p, policy);
  return mode == GradientMode::Symmetric ? symmetric_gradient(p, oracle, hz.depth, budget)
                                         : asymmetric_gradient(p, oracle, hz.depth, budget);
}

double expected_return(const Pomdp& p, const TabularPolicy& policy, Horizon hz) {
  ValueOracle oracle(p, policy);
  double total = 0.0;
  for (const auto& node : initial_histories(p)) total += node.prob * oracle.v_history(node.h, hz);
  return total;
}

}  // namespace asymac::oracle
