#include <cmath>

#include "asymac/envs.hpp"
#include "asymac/oracle.hpp"

namespace asymac::oracle {

BiasReport bias_report(const Pomdp& p, const TabularPolicy& policy, const History& h, Horizon hz) {
  ValueOracle oracle(p, policy);
  BiasReport report;
  report.v_h = oracle.v_history(h, hz);
  const Belief b = belief_of_history(p, h);
  for (int s = 0; s < p.n_states; ++s)
    if (b[s] > 0.0) report.e_vhs += b[s] * oracle.v_hs_unchecked(h, s, hz.depth);
  report.gap_hs = std::abs(report.v_h - report.e_vhs);
  try {
    const auto v_state = v_state_reactive(p, policy);
    double e = 0.0;
    for (int s = 0; s < p.n_states; ++s) e += b[s] * v_state[s];
    report.e_vs = e;
    report.gap_state = std::abs(report.v_h - e);
  } catch (const IllDefinedValue&) {
    // e_vs stays empty
  }
  return report;
}

GoodBadContradiction goodbad_contradiction(double gamma) {
  using envs::kBad;
  using envs::kGood;
  const auto env = envs::build_goodbad(gamma);
  const Pomdp& p = env.pomdp;
  const auto policy = TabularPolicy::last_observation(2);
  const auto v = v_state_reactive(p, policy);

  History h;
  h.initial_observation = kGood;
  const Belief b = belief_of_history(p, h);

  GoodBadContradiction out;
  out.belief_good = b[kGood];
  out.belief_bad = b[kBad];
  out.v_good = v[kGood];
  out.v_bad = v[kBad];
  out.lhs = b[kGood] * v[kGood] + b[kBad] * v[kBad];

  // Bootstrap one step, then apply V(hao) = E_{s'|hao}[V(s')].
  const auto pi = policy.probabilities(h);
  double rhs = 0.0;
  for (int a = 0; a < p.n_actions; ++a) {
    if (pi[a] == 0.0) continue;
    double r = 0.0;
    for (int s = 0; s < p.n_states; ++s) r += b[s] * p.R(s, a);
    double future = 0.0;
    for (int o = 0; o < p.n_obs; ++o) {
      const double z = observation_probability(p, b, a, o);
      if (a == kGood) (o == kGood ? out.prob_obs_good : out.prob_obs_bad) = z;
      if (z <= 0.0) continue;
      const Belief next = belief_update(p, b, a, o);
      future += z * (next[kGood] * v[kGood] + next[kBad] * v[kBad]);
    }
    rhs += pi[a] * (r + gamma * future);
  }
  out.rhs = rhs;
  out.gap = out.rhs - out.lhs;
  return out;
}

}  // namespace asymac::oracle
