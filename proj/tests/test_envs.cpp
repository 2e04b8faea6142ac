#include <doctest.h>

#include <cmath>
#include <queue>
#include <random>

#include "asymac/envs.hpp"
#include "asymac/oracle.hpp"
#include "support/brute.hpp"

using namespace asymac;
using namespace asymac::envs;

namespace {

bool same_tables(const Pomdp& a, const Pomdp& b) {
  if (a.n_states != b.n_states || a.n_actions != b.n_actions || a.n_obs != b.n_obs) return false;
  if (a.gamma != b.gamma || a.initial != b.initial || a.reward != b.reward) return false;
  if (a.initial_emission != b.initial_emission) return false;
  for (std::size_t i = 0; i < a.dynamics.size(); ++i) {
    if (a.dynamics[i].size() != b.dynamics[i].size()) return false;
    for (std::size_t k = 0; k < a.dynamics[i].size(); ++k) {
      const auto& x = a.dynamics[i][k];
      const auto& y = b.dynamics[i][k];
      if (x.next != y.next || x.prob != y.prob || x.observation != y.observation) return false;
    }
  }
  return true;
}

constexpr const char* kGoodBadFile = R"(# good/bad POMDP
discount: 0.9
values: reward
states: G B
actions: g b
observations: g b
start: 0.5 0.5
T: * : G : G 1.0
T: * : B : B 1.0
O: * : G : g 1.0
O: * : B : g 0.5
O: * : B : b 0.5
O0: G : g 1.0
O0: B : g 0.5
O0: B : b 0.5
R: g : * : * : * 1.0
)";

}  // namespace

TEST_SUITE("env-suite") {

TEST_CASE("good/bad construction") {
  const auto env = build_goodbad(0.9);
  const auto& p = env.pomdp;
  CHECK(p.n_states == 2);
  CHECK(p.n_actions == 2);
  CHECK(p.n_obs == 2);
  CHECK(validate(p, env.terminals).empty());
  CHECK(env.terminals.empty());
  for (int a = 0; a < 2; ++a) {
    CHECK(p.O(kBad, a, kBad, kGood) == 0.5);
    CHECK(p.O(kBad, a, kBad, kBad) == 0.5);
    CHECK(p.O(kGood, a, kGood, kGood) == 1.0);
    CHECK(p.T(kGood, a, kGood) == 1.0);
    CHECK(p.T(kBad, a, kBad) == 1.0);
  }
  CHECK(p.R(kGood, kGood) == 1.0);
  CHECK(p.R(kBad, kGood) == 1.0);
  CHECK(p.R(kGood, kBad) == 0.0);
  CHECK(p.R(kBad, kBad) == 0.0);
  CHECK(p.initial == std::vector<double>{0.5, 0.5});
  for (double g : {0.0, 0.3, 0.99}) CHECK(validate(build_goodbad(g).pomdp, {}).empty());
  CHECK_THROWS(build_goodbad(1.0));
}

TEST_CASE("Table 2 dimensions") {
  struct Row {
    const char* name;
    int s, a, o;
  };
  for (const Row& r : {Row{"heavenhell-3", 28, 4, 15}, Row{"heavenhell-4", 36, 4, 19}, Row{"shopping-5", 625, 6, 50},
                       Row{"shopping-6", 1296, 6, 72}}) {
    const auto env = make_environment(r.name);
    CHECK_MESSAGE(env.pomdp.n_states == r.s, r.name);
    CHECK_MESSAGE(env.pomdp.n_actions == r.a, r.name);
    CHECK_MESSAGE(env.pomdp.n_obs == r.o, r.name);
    CHECK_MESSAGE(env.pomdp.gamma == 0.99, r.name);
  }
  CHECK_THROWS_AS(build_heavenhell(5), UnsupportedSize);
  CHECK_THROWS_AS(build_shopping(4), UnsupportedSize);
  CHECK_THROWS(make_environment("nope"));
}

TEST_CASE("HeavenHell rewards and terminals") {
  for (int n : {3, 4}) {
    const auto env = build_heavenhell(n);
    const HeavenHellLayout L{n};
    for (HeavenSide side : {HeavenSide::Left, HeavenSide::Right}) {
      const int heaven = L.heaven_exit(side);
      const int hell = heaven == L.left_exit() ? L.right_exit() : L.left_exit();
      const int into_heaven = heaven == L.left_exit() ? kWest : kEast;
      const int into_hell = into_heaven == kWest ? kEast : kWest;
      const int s_h = L.state(heaven == 0 ? 1 : 2 * n - 1, side);
      const int s_x = L.state(hell == 0 ? 1 : 2 * n - 1, side);
      CHECK(env.pomdp.R(s_h, into_heaven) == 1.0);
      CHECK(env.pomdp.R(s_x, into_hell) == -1.0);
      CHECK(env.terminals.ends_episode(s_h, into_heaven, L.state(heaven, side)));
      CHECK(env.terminals.is_terminal_state(L.state(hell, side)));
    }
    // Only exit entries carry reward.
    int nonzero = 0;
    for (double r : env.pomdp.reward) nonzero += r != 0.0;
    CHECK(nonzero == 4);
  }
}

TEST_CASE("HeavenHell: unique shortest path to the priest") {
  for (int n : {3, 4}) {
    const HeavenHellLayout L{n};
    // Count shortest action sequences by BFS over positions.
    std::vector<int> dist(L.n_positions(), -1), ways(L.n_positions(), 0);
    std::queue<int> q;
    dist[L.start()] = 0;
    ways[L.start()] = 1;
    q.push(L.start());
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      if (L.is_exit(u)) continue;
      for (int a = 0; a < 4; ++a) {
        const int v = L.move(u, a);
        if (v == u) continue;
        if (dist[v] == -1) {
          dist[v] = dist[u] + 1;
          q.push(v);
        }
        if (dist[v] == dist[u] + 1) ways[v] += ways[u];
      }
    }
    CHECK(dist[L.priest()] == n + 1);
    CHECK(ways[L.priest()] == 1);
  }
}

TEST_CASE("HeavenHell: the priest reveals the heaven side") {
  const auto env = build_heavenhell(3);
  const HeavenHellLayout L{3};
  const auto& p = env.pomdp;
  History h;
  h.initial_observation = L.start();
  auto b = oracle::belief_of_history(p, h);
  CHECK(b[L.state(L.start(), HeavenSide::Left)] == doctest::Approx(0.5));
  h = h.extended(kSouth, L.start() + 1);
  for (int k = 2; k <= 3; ++k) h = h.extended(kEast, L.start() + k);
  h = h.extended(kEast, 4 * 3 + 1 + 1);  // priest says heaven is right
  b = oracle::belief_of_history(p, h);
  CHECK(b[L.state(L.priest(), HeavenSide::Right)] == 1.0);
  // And it stays deterministic on the way back.
  h = h.extended(kWest, L.priest() - 1);
  b = oracle::belief_of_history(p, h);
  CHECK(b[L.state(L.priest() - 1, HeavenSide::Right)] == 1.0);

  // Every realizable history that visited the priest has a deterministic side.
  for (const auto& [hist, w] : oracle::realizable_histories(p, 6)) {
    bool visited = false;
    for (const auto& st : hist.steps) visited = visited || st.observation >= 13;
    if (!visited) continue;
    const auto bb = oracle::belief_of_history(p, hist);
    double left = 0.0;
    for (int s = 0; s < L.n_positions(); ++s) left += bb[s];
    CHECK((left == 1.0 || left == 0.0));
  }
}

TEST_CASE("HeavenHell: distinct no-priest histories ending at one cell share a belief") {
  const auto env = build_heavenhell(3);
  const HeavenHellLayout L{3};
  History a, b;
  a.initial_observation = b.initial_observation = L.start();
  a = a.extended(kNorth, L.start() - 1);
  b = b.extended(kEast, L.start()).extended(kNorth, L.start() - 1);
  CHECK(a != b);
  CHECK(oracle::belief_of_history(env.pomdp, a) == oracle::belief_of_history(env.pomdp, b));
}

TEST_CASE("Shopping rewards, query and purchase") {
  const auto env = build_shopping(5);
  const ShoppingLayout L{5};
  const auto& p = env.pomdp;
  const int s = L.state(0, 7);
  for (int a : {kLeft, kRight, kUp, kDown}) CHECK(p.R(s, a) == -1.0);
  CHECK(p.R(s, kQuery) == -2.0);
  CHECK(p.R(s, kBuy) == -5.0);
  CHECK_FALSE(env.terminals.ends_episode(s, kBuy, s));
  const int on_item = L.state(7, 7);
  CHECK(p.R(on_item, kBuy) == 10.0);
  CHECK(env.terminals.ends_episode(on_item, kBuy, on_item));
  Rng rng(1);
  const auto q = step(p, s, kQuery, rng);
  CHECK(q.next_state == s);
  CHECK(q.observation == L.item_observation(7));
  CHECK(q.observation - L.n_cells() == 7);
  // Walls block.
  CHECK(L.move(0, kLeft) == 0);
  CHECK(L.move(0, kDown) == 0);
  CHECK(L.move(0, kUp) == 5);
  CHECK(L.move(24, kRight) == 24);
}

TEST_CASE("Shopping: item belief uniform until QUERY, then deterministic") {
  const auto env = build_shopping(5);
  const ShoppingLayout L{5};
  const auto& p = env.pomdp;
  History h;
  h.initial_observation = 0;
  h = h.extended(kRight, 1).extended(kUp, 6).extended(kLeft, 5);
  auto item_marginal = [&](const oracle::Belief& b) {
    std::vector<double> m(L.n_cells(), 0.0);
    for (int s = 0; s < p.n_states; ++s) m[L.item_of(s)] += b[s];
    return m;
  };
  for (double v : item_marginal(oracle::belief_of_history(p, h))) CHECK(v == doctest::Approx(1.0 / 25).epsilon(1e-12));
  h = h.extended(kQuery, L.item_observation(13));
  const auto m = item_marginal(oracle::belief_of_history(p, h));
  CHECK(m[13] == 1.0);
}

TEST_CASE("POMDP file: good/bad round trip") {
  const auto loaded = load_pomdp_text(kGoodBadFile);
  const auto built = build_goodbad(0.9);
  CHECK(same_tables(loaded.pomdp, built.pomdp));
  CHECK(validate(loaded.pomdp, loaded.terminals).empty());

  const auto again = load_pomdp_text(export_pomdp_text(loaded.pomdp));
  CHECK(same_tables(again.pomdp, loaded.pomdp));

  for (const char* name : {"heavenhell-3", "shopping-5"}) {
    const auto env = make_environment(name);
    CHECK(same_tables(load_pomdp_text(export_pomdp_text(env.pomdp)).pomdp, env.pomdp));
  }
  std::mt19937_64 gen(3);
  for (int k = 0; k < 10; ++k) {
    const auto p = brute::random_pomdp(gen, {.state_only_observations = true});
    CHECK(same_tables(load_pomdp_text(export_pomdp_text(p)).pomdp, p));
  }
}

TEST_CASE("POMDP file errors") {
  std::string text = kGoodBadFile;
  const auto swap = [&](const std::string& from, const std::string& to) {
    std::string t = text;
    t.replace(t.find(from), from.size(), to);
    return t;
  };
  CHECK_THROWS_AS(load_pomdp_text(swap("discount: 0.9", "discount: 1.0")), PomdpSemanticError);
  try {
    load_pomdp_text(swap("T: * : B : B 1.0", "T: * : B B 1.0"));
    FAIL("expected a syntax error");
  } catch (const PomdpSyntaxError& e) {
    CHECK(e.line() == 9);
  }
  try {
    load_pomdp_text(swap("T: * : B : B 1.0", "T: * : B : B 0.9"));
    FAIL("expected a semantic error");
  } catch (const PomdpSemanticError& e) {
    CHECK(e.where().find("T(s=1") == 0);
  }
  CHECK_THROWS_AS(load_pomdp_text(swap("T: * : B : B 1.0", "T: * : B : Q 1.0")), PomdpSyntaxError);
}

TEST_CASE("exporter refuses source-dependent observations") {
  std::mt19937_64 gen(3);
  const auto p = brute::random_pomdp(gen, {.state_only_observations = false, .initial_observation = false});
  CHECK_THROWS_AS(export_pomdp_text(p), std::invalid_argument);
}

}
