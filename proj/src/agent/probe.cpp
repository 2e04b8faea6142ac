#include <deque>

#include "asymac/agent.hpp"

namespace asymac::agent {

std::vector<double> probe_critic(const AgentNets& nets, const Pomdp& pomdp, const std::vector<Probe>& probes) {
  std::vector<double> out;
  out.reserve(probes.size());
  for (const auto& probe : probes) {
    const auto b = oracle::belief_of_history(pomdp, probe.history);
    if (probe.state < 0 || probe.state >= pomdp.n_states || b[probe.state] <= 0.0)
      throw oracle::Unrealizable("probe '" + probe.id + "': state " + std::to_string(probe.state) +
                                 " is impossible after " + probe.history.to_string());
    out.push_back(nets.critic_value(probe.history, probe.state));
  }
  return out;
}

namespace {

// Shortest action sequence between two positions (BFS, actions tried in
// index order so the result is deterministic).
std::vector<int> route(const envs::HeavenHellLayout& layout, int from, int to) {
  std::vector<int> parent(layout.n_positions(), -1), via(layout.n_positions(), -1);
  std::deque<int> queue{from};
  parent[from] = from;
  while (!queue.empty()) {
    const int pos = queue.front();
    queue.pop_front();
    if (pos == to) break;
    if (layout.is_exit(pos)) continue;
    for (int a = 0; a < 4; ++a) {
      const int next = layout.move(pos, a);
      if (parent[next] != -1) continue;
      parent[next] = pos;
      via[next] = a;
      queue.push_back(next);
    }
  }
  std::vector<int> actions;
  for (int pos = to; pos != from; pos = parent[pos]) actions.insert(actions.begin(), via[pos]);
  return actions;
}

History walk(const envs::HeavenHellLayout& layout, envs::HeavenSide side, const std::vector<int>& actions) {
  int pos = layout.start();
  History h;
  h.initial_observation = layout.observation(pos, side);
  for (int a : actions) {
    pos = layout.move(pos, a);
    h = h.extended(a, layout.observation(pos, side));
  }
  return h;
}

}  // namespace

std::vector<Probe> heavenhell_fork_probes(int n) {
  envs::HeavenHellLayout layout;
  layout.n = n;
  const auto direct = route(layout, layout.start(), layout.fork());
  auto via_priest = route(layout, layout.start(), layout.priest());
  const auto back = route(layout, layout.priest(), layout.fork());
  via_priest.insert(via_priest.end(), back.begin(), back.end());

  std::vector<Probe> probes;
  for (auto side : {envs::HeavenSide::Left, envs::HeavenSide::Right}) {
    const std::string tag = side == envs::HeavenSide::Left ? "heaven-left" : "heaven-right";
    const int state = layout.state(layout.fork(), side);
    probes.push_back({tag + "/no-priest", walk(layout, side, direct), state});
    probes.push_back({tag + "/priest", walk(layout, side, via_priest), state});
  }
  return probes;
}

}  // namespace asymac::agent
