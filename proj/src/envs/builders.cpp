#include <cstdlib>
#include <string>

#include "asymac/envs.hpp"

namespace asymac::envs {

namespace {

SparseRow point(int idx) { return {{idx, 1.0}}; }

}  // namespace

Environment build_goodbad(double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("goodbad: gamma must lie in [0, 1)");
  Environment env;
  env.name = "goodbad";
  Pomdp& p = env.pomdp;
  p = Pomdp::with_dimensions(2, 2, 2, gamma);
  p.initial = {0.5, 0.5};
  const SparseRow emit_good = point(kGood);
  const SparseRow emit_bad = {{kGood, 0.5}, {kBad, 0.5}};
  for (int s : {kGood, kBad}) {
    for (int a : {kGood, kBad}) {
      p.outcomes(s, a) = {{s, 1.0, s == kGood ? emit_good : emit_bad}};
      p.R(s, a) = a == kGood ? 1.0 : 0.0;
    }
  }
  p.initial_emission = {emit_good, emit_bad};
  p.state_labels = {"G", "B"};
  p.action_labels = {"g", "b"};
  p.obs_labels = {"g", "b"};
  return env;
}

int HeavenHellLayout::move(int pos, int action) const {
  const int vertical_top = 2 * n + 1;
  const int vertical_bottom = 3 * n;
  const int bottom_first = 3 * n + 1;
  if (pos <= 2 * n) {
    switch (action) {
      case kEast: return pos < 2 * n ? pos + 1 : pos;
      case kWest: return pos > 0 ? pos - 1 : pos;
      case kSouth: return pos == fork() ? vertical_top : pos;
      default: return pos;
    }
  }
  if (pos <= vertical_bottom) {
    switch (action) {
      case kNorth: return pos == vertical_top ? fork() : pos - 1;
      case kSouth: return pos == vertical_bottom ? bottom_first : pos + 1;
      default: return pos;
    }
  }
  switch (action) {
    case kEast: return pos < priest() ? pos + 1 : pos;
    case kWest: return pos > bottom_first ? pos - 1 : pos;
    case kNorth: return pos == bottom_first ? vertical_bottom : pos;
    default: return pos;
  }
}

int HeavenHellLayout::observation(int pos, HeavenSide side) const {
  if (pos == priest()) return 4 * n + 1 + static_cast<int>(side);
  return pos;
}

Environment build_heavenhell(int n) {
  if (n != 3 && n != 4) throw UnsupportedSize("heavenhell: corridor size must be 3 or 4, got " + std::to_string(n));
  const HeavenHellLayout layout{n};
  Environment env;
  env.name = "heavenhell-" + std::to_string(n);
  const int n_pos = layout.n_positions();
  Pomdp& p = env.pomdp;
  p = Pomdp::with_dimensions(2 * n_pos, 4, 4 * n + 3, 0.99);

  for (HeavenSide side : {HeavenSide::Left, HeavenSide::Right}) {
    for (int pos = 0; pos < n_pos; ++pos) {
      const int s = layout.state(pos, side);
      for (int a = 0; a < 4; ++a) {
        if (layout.is_exit(pos)) {
          p.outcomes(s, a) = {{s, 1.0, point(layout.observation(pos, side))}};
          continue;
        }
        const int next = layout.move(pos, a);
        p.outcomes(s, a) = {{layout.state(next, side), 1.0, point(layout.observation(next, side))}};
        if (layout.is_exit(next)) p.R(s, a) = next == layout.heaven_exit(side) ? 1.0 : -1.0;
      }
      if (layout.is_exit(pos)) env.terminals.terminal_states.insert(s);
    }
  }
  p.initial[layout.state(layout.start(), HeavenSide::Left)] = 0.5;
  p.initial[layout.state(layout.start(), HeavenSide::Right)] = 0.5;
  p.initial_emission.resize(p.n_states);
  for (int s = 0; s < p.n_states; ++s)
    p.initial_emission[s] = point(layout.observation(layout.position_of(s), layout.side_of(s)));

  p.action_labels = {"NORTH", "SOUTH", "EAST", "WEST"};
  for (int s = 0; s < p.n_states; ++s) {
    p.state_labels.push_back("pos" + std::to_string(layout.position_of(s)) +
                             (layout.side_of(s) == HeavenSide::Left ? "-heaven-left" : "-heaven-right"));
  }
  for (int o = 0; o < 4 * n + 1; ++o) p.obs_labels.push_back("pos" + std::to_string(o));
  p.obs_labels.push_back("priest-heaven-left");
  p.obs_labels.push_back("priest-heaven-right");
  return env;
}

int ShoppingLayout::move(int cell, int action) const {
  const int row = cell / n;
  const int col = cell % n;
  switch (action) {
    case kLeft: return col > 0 ? cell - 1 : cell;
    case kRight: return col < n - 1 ? cell + 1 : cell;
    case kUp: return row < n - 1 ? cell + n : cell;
    case kDown: return row > 0 ? cell - n : cell;
    default: return cell;
  }
}

Environment build_shopping(int n) {
  if (n != 5 && n != 6) throw UnsupportedSize("shopping: grid side must be 5 or 6, got " + std::to_string(n));
  const ShoppingLayout layout{n};
  const int cells = layout.n_cells();
  Environment env;
  env.name = "shopping-" + std::to_string(n);
  Pomdp& p = env.pomdp;
  p = Pomdp::with_dimensions(cells * cells, 6, 2 * cells, 0.99);

  for (int agent = 0; agent < cells; ++agent) {
    for (int item = 0; item < cells; ++item) {
      const int s = layout.state(agent, item);
      for (int a = 0; a < 6; ++a) {
        if (a == kQuery) {
          p.outcomes(s, a) = {{s, 1.0, point(layout.item_observation(item))}};
          p.R(s, a) = -2.0;
        } else if (a == kBuy) {
          p.outcomes(s, a) = {{s, 1.0, point(layout.agent_observation(agent))}};
          if (agent == item) {
            p.R(s, a) = 10.0;
            env.terminals.terminal_transitions.insert({s, a});
          } else {
            p.R(s, a) = -5.0;
          }
        } else {
          const int next_agent = layout.move(agent, a);
          p.outcomes(s, a) = {{layout.state(next_agent, item), 1.0, point(layout.agent_observation(next_agent))}};
          p.R(s, a) = -1.0;
        }
      }
    }
  }
  for (int item = 0; item < cells; ++item) p.initial[layout.state(layout.start(), item)] = 1.0 / cells;
  p.initial_emission.resize(p.n_states);
  for (int s = 0; s < p.n_states; ++s) p.initial_emission[s] = point(layout.agent_observation(layout.agent_of(s)));

  p.action_labels = {"LEFT", "RIGHT", "UP", "DOWN", "QUERY", "BUY"};
  for (int c = 0; c < cells; ++c) p.obs_labels.push_back("agent@" + std::to_string(c));
  for (int c = 0; c < cells; ++c) p.obs_labels.push_back("item@" + std::to_string(c));
  return env;
}

Environment make_environment(const std::string& name) {
  if (name == "goodbad") return build_goodbad(0.9);
  if (name.rfind("goodbad-", 0) == 0) {
    const std::string tail = name.substr(8);
    char* end = nullptr;
    const double gamma = std::strtod(tail.c_str(), &end);
    if (end == tail.c_str() || *end != '\0') throw std::invalid_argument("unknown environment: " + name);
    auto env = build_goodbad(gamma);
    env.name = name;
    return env;
  }
  if (name == "heavenhell-3") return build_heavenhell(3);
  if (name == "heavenhell-4") return build_heavenhell(4);
  if (name == "shopping-5") return build_shopping(5);
  if (name == "shopping-6") return build_shopping(6);
  throw std::invalid_argument("unknown environment: " + name);
}

std::vector<std::string> environment_names() {
  return {"goodbad", "heavenhell-3", "heavenhell-4", "shopping-5", "shopping-6"};
}

}  // namespace asymac::envs
