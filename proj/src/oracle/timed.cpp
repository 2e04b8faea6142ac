#include <cmath>
#include <limits>
#include <unordered_map>

#include "asymac/oracle.hpp"

namespace asymac::oracle {

std::vector<double> TimedLayer::state_marginal(int n_states) const {
  std::vector<double> m(n_states, 0.0);
  for (const auto& e : entries)
    for (int s = 0; s < n_states; ++s) m[s] += e.joint[s];
  return m;
}

std::vector<double> TimedLayer::action_given_state(const TabularPolicy& policy, int n_states) const {
  const int n_actions = policy.n_actions();
  std::vector<double> joint(static_cast<std::size_t>(n_states) * n_actions, 0.0);
  for (const auto& e : entries) {
    const auto pi = policy.probabilities(e.representative);
    for (int s = 0; s < n_states; ++s) {
      if (e.joint[s] == 0.0) continue;
      for (int a = 0; a < n_actions; ++a) joint[static_cast<std::size_t>(s) * n_actions + a] += e.joint[s] * pi[a];
    }
  }
  const auto marginal = state_marginal(n_states);
  for (int s = 0; s < n_states; ++s) {
    if (marginal[s] <= 0.0) continue;
    for (int a = 0; a < n_actions; ++a) joint[static_cast<std::size_t>(s) * n_actions + a] /= marginal[s];
  }
  return joint;
}

TimedLayer timed_layer_zero(const Pomdp& p, const TabularPolicy&) {
  TimedLayer layer;
  if (!p.has_initial_observation()) {
    layer.entries.push_back({History{}, p.initial});
    return layer;
  }
  for (int o = 0; o < p.n_obs; ++o) {
    std::vector<double> joint(p.n_states, 0.0);
    bool any = false;
    for (int s = 0; s < p.n_states; ++s) {
      joint[s] = p.initial[s] * p.O0(s, o);
      any = any || joint[s] > 0.0;
    }
    if (!any) continue;
    History h;
    h.initial_observation = o;
    layer.entries.push_back({h, std::move(joint)});
  }
  return layer;
}

TimedLayer advance_timed_layer(const Pomdp& p, const TabularPolicy& policy, const TimedLayer& layer,
                               std::size_t budget) {
  TimedLayer next;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& e : layer.entries) {
    const auto pi = policy.probabilities(e.representative);
    for (int a = 0; a < p.n_actions; ++a) {
      if (pi[a] == 0.0) continue;
      for (int s = 0; s < p.n_states; ++s) {
        if (e.joint[s] == 0.0) continue;
        for (const auto& out : p.outcomes(s, a)) {
          for (auto [o, q] : out.observation) {
            History h = e.representative.extended(a, o);
            std::string key = policy.context(h);
            auto [it, inserted] = index.emplace(std::move(key), next.entries.size());
            if (inserted) {
              if (next.entries.size() >= budget) throw BudgetExceeded("timed enumeration exceeded its budget");
              next.entries.push_back({std::move(h), std::vector<double>(p.n_states, 0.0)});
            }
            next.entries[it->second].joint[out.next] += e.joint[s] * pi[a] * out.prob * q;
          }
        }
      }
    }
  }
  return next;
}

std::vector<double> v_timed_states(const Pomdp& p, const TabularPolicy& policy, int t, Horizon hz) {
  if (t < 0) throw ContractViolation("time index must be nonnegative");
  if (hz.depth < 0) throw ContractViolation("horizon depth must be nonnegative");
  const int n = p.n_states;

  // V_t(s) = sum_h Pr(H_t = h | S_t = s) V(h, s). Grouping by policy context
  // is exact because V(h, s) only depends on h through that context.
  TimedLayer layer = timed_layer_zero(p, policy);
  for (int k = 0; k < t; ++k) layer = advance_timed_layer(p, policy, layer);
  ValueOracle oracle(p, policy);
  std::vector<double> num(n, 0.0), den(n, 0.0);
  for (const auto& e : layer.entries) {
    for (int s = 0; s < n; ++s) {
      if (e.joint[s] == 0.0) continue;
      num[s] += e.joint[s] * oracle.v_hs_unchecked(e.representative, s, hz.depth);
      den[s] += e.joint[s];
    }
  }
  std::vector<double> out(n, std::numeric_limits<double>::quiet_NaN());
  for (int s = 0; s < n; ++s)
    if (den[s] > 0.0) out[s] = num[s] / den[s];
  return out;
}

double v_timed_state(const Pomdp& p, const TabularPolicy& policy, int t, int state, Horizon hz) {
  if (state < 0 || state >= p.n_states) throw ContractViolation("v_timed_state: state out of range");
  const auto v = v_timed_states(p, policy, t, hz);
  if (std::isnan(v[state]))
    throw Unrealizable("Pr(S_" + std::to_string(t) + " = " + std::to_string(state) + ") is zero");
  return v[state];
}

}  // namespace asymac::oracle
