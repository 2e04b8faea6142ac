#include <algorithm>
#include <cmath>

#include "asymac/agent.hpp"

namespace asymac::agent {

bool CalibrationReport::pass() const {
  return std::all_of(entries.begin(), entries.end(), [](const CalibrationEntry& e) { return e.pass; });
}

double CalibrationReport::worst_z() const {
  double worst = 0.0;
  for (const auto& e : entries) {
    const double diff = std::abs(e.mean - e.exact);
    if (e.standard_error > 0.0) worst = std::max(worst, diff / e.standard_error);
    else if (diff > 1e-12) worst = INFINITY;
  }
  return worst;
}

CalibrationReport calibrate_estimator(const Pomdp& p, const oracle::TabularPolicy& policy, int depth,
                                      oracle::GradientMode mode, int episodes, std::uint64_t seed, double sigmas) {
  if (depth < 1 || episodes < 2) throw ContractViolation("calibration needs depth >= 1 and at least 2 episodes");
  const auto exact = oracle::exact_policy_gradient(p, policy, oracle::Horizon{depth}, mode);
  oracle::ValueOracle values(p, policy);
  const bool asymmetric = mode == oracle::GradientMode::Asymmetric;
  const auto act = policy.as_function();
  const TerminalSpec no_terminals;

  // Per-entry running sums of the per-episode estimate and its square.
  std::map<History, std::vector<double>> sum, sum_sq;
  for (const auto& [h, row] : exact.rows) {
    sum[h].assign(p.n_actions, 0.0);
    sum_sq[h].assign(p.n_actions, 0.0);
  }
  std::map<History, std::vector<double>> episode_est;
  for (int ep = 0; ep < episodes; ++ep) {
    Rng rng = Rng::for_episode(seed, 0, static_cast<std::uint64_t>(ep));
    const Trajectory traj = sample_episode(p, no_terminals, act, depth, rng);
    const int T = static_cast<int>(traj.length());
    std::vector<double> cur(T), next(T);
    for (int t = 0; t < T; ++t) {
      const History h = traj.history(t);
      const History hn = traj.history(t + 1);
      if (asymmetric) {
        cur[t] = values.v_hs_unchecked(h, traj.states[t], depth - t);
        next[t] = values.v_hs_unchecked(hn, traj.states[t + 1], depth - t - 1);
      } else {
        cur[t] = values.v_history(h, oracle::Horizon{depth - t});
        next[t] = values.v_history(hn, oracle::Horizon{depth - t - 1});
      }
    }
    const auto delta = td_errors(traj.rewards, cur, next, !traj.truncated, p.gamma);
    episode_est.clear();
    double discount = 1.0;
    for (int t = 0; t < T; ++t) {
      const History h = traj.history(t);
      const auto pi = policy.probabilities(h);
      auto& row = episode_est[h];
      row.assign(p.n_actions, 0.0);
      for (int b = 0; b < p.n_actions; ++b)
        row[b] -= discount * delta[t] * ((b == traj.actions[t] ? 1.0 : 0.0) - pi[b]);
      discount *= p.gamma;
    }
    for (const auto& [h, row] : episode_est) {
      auto it = sum.find(h);
      if (it == sum.end()) throw ContractViolation("sampled a history the exact gradient does not cover");
      auto& sq = sum_sq[h];
      for (int b = 0; b < p.n_actions; ++b) {
        it->second[b] += row[b];
        sq[b] += row[b] * row[b];
      }
    }
  }

  CalibrationReport report;
  report.episodes = episodes;
  const double n = episodes;
  for (const auto& [h, row] : exact.rows) {
    for (int b = 0; b < p.n_actions; ++b) {
      CalibrationEntry e;
      e.history = h;
      e.action = b;
      e.exact = row[b];
      e.mean = sum[h][b] / n;
      const double var = std::max(0.0, (sum_sq[h][b] / n - e.mean * e.mean)) * n / (n - 1.0);
      e.standard_error = std::sqrt(var / n);
      const double diff = std::abs(e.mean - e.exact);
      e.pass = e.standard_error > 0.0 ? diff <= sigmas * e.standard_error : diff <= 1e-12;
      report.entries.push_back(e);
    }
  }
  return report;
}

}  // namespace asymac::agent
