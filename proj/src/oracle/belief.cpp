#include <cmath>

#include "asymac/oracle.hpp"

namespace asymac::oracle {

Belief prior(const Pomdp& pomdp) { return pomdp.initial; }

namespace {

// Unnormalized b'(s') = sum_s b(s) T(s'|s,a) O(o|s,a,s').
Belief propagate(const Pomdp& p, const Belief& b, int a, int o) {
  if (a < 0 || a >= p.n_actions) throw ContractViolation("belief update: action out of range");
  if (o < 0 || o >= p.n_obs) throw ContractViolation("belief update: observation out of range");
  Belief next(p.n_states, 0.0);
  for (int s = 0; s < p.n_states; ++s) {
    if (b[s] == 0.0) continue;
    for (const auto& out : p.outcomes(s, a)) {
      for (auto [idx, q] : out.observation) {
        if (idx == o) {
          next[out.next] += b[s] * out.prob * q;
          break;
        }
      }
    }
  }
  return next;
}

double normalize(Belief& b) {
  double z = 0.0;
  for (double v : b) z += v;
  if (z > 0.0)
    for (double& v : b) v /= z;
  return z;
}

}  // namespace

double observation_probability(const Pomdp& p, const Belief& b, int a, int o) {
  double z = 0.0;
  for (double v : propagate(p, b, a, o)) z += v;
  return z;
}

Belief belief_update(const Pomdp& p, const Belief& b, int a, int o) {
  Belief next = propagate(p, b, a, o);
  if (normalize(next) <= 0.0) {
    throw Unrealizable("observation " + std::to_string(o) + " after action " + std::to_string(a) +
                       " has zero probability under the belief");
  }
  return next;
}

Belief condition_initial(const Pomdp& p, const Belief& b, int o) {
  if (!p.has_initial_observation()) throw Unrealizable("POMDP emits no initial observation");
  if (o < 0 || o >= p.n_obs) throw ContractViolation("initial observation out of range");
  Belief next(p.n_states, 0.0);
  for (int s = 0; s < p.n_states; ++s) next[s] = b[s] * p.O0(s, o);
  if (normalize(next) <= 0.0) throw Unrealizable("initial observation " + std::to_string(o) + " has zero probability");
  return next;
}

Belief belief_of_history(const Pomdp& p, const History& h) {
  Belief b = prior(p);
  if (h.initial_observation) {
    b = condition_initial(p, b, *h.initial_observation);
  } else if (p.has_initial_observation() && !h.steps.empty()) {
    throw Unrealizable("history lacks the initial observation this POMDP emits");
  }
  for (const auto& st : h.steps) b = belief_update(p, b, st.action, st.observation);
  return b;
}

double history_evidence(const Pomdp& p, const History& h) {
  Belief b = prior(p);
  double evidence = 1.0;
  if (h.initial_observation) {
    if (!p.has_initial_observation()) return 0.0;
    double z = 0.0;
    for (int s = 0; s < p.n_states; ++s) z += b[s] * p.O0(s, *h.initial_observation);
    if (z <= 0.0) return 0.0;
    evidence *= z;
    b = condition_initial(p, b, *h.initial_observation);
  }
  for (const auto& st : h.steps) {
    Belief next = propagate(p, b, st.action, st.observation);
    const double z = normalize(next);
    if (z <= 0.0) return 0.0;
    evidence *= z;
    b = std::move(next);
  }
  return evidence;
}

std::vector<std::pair<History, double>> realizable_histories(const Pomdp& p, int max_length) {
  std::vector<std::pair<History, double>> out;
  std::vector<std::pair<History, Belief>> frontier;
  std::vector<double> frontier_prob;
  if (p.has_initial_observation()) {
    for (int o = 0; o < p.n_obs; ++o) {
      double z = 0.0;
      for (int s = 0; s < p.n_states; ++s) z += p.initial[s] * p.O0(s, o);
      if (z <= 0.0) continue;
      History h;
      h.initial_observation = o;
      frontier.emplace_back(h, condition_initial(p, prior(p), o));
      frontier_prob.push_back(z);
    }
  } else {
    frontier.emplace_back(History{}, prior(p));
    frontier_prob.push_back(1.0);
  }
  for (int len = 0; len <= max_length; ++len) {
    std::vector<std::pair<History, Belief>> next;
    std::vector<double> next_prob;
    for (std::size_t i = 0; i < frontier.size(); ++i) {
      const auto& [h, b] = frontier[i];
      out.emplace_back(h, frontier_prob[i]);
      if (len == max_length) continue;
      for (int a = 0; a < p.n_actions; ++a) {
        for (int o = 0; o < p.n_obs; ++o) {
          Belief nb = propagate(p, b, a, o);
          const double z = normalize(nb);
          if (z <= 0.0) continue;
          next.emplace_back(h.extended(a, o), std::move(nb));
          next_prob.push_back(frontier_prob[i] * z);
        }
      }
    }
    frontier = std::move(next);
    frontier_prob = std::move(next_prob);
  }
  return out;
}

}  // namespace asymac::oracle
