#include <doctest.h>

#include <cmath>
#include <random>

#include "asymac/envs.hpp"
#include "asymac/oracle.hpp"
#include "asymac/pomdp.hpp"
#include "support/brute.hpp"

using namespace asymac;

TEST_SUITE("pomdp-core") {

TEST_CASE("validate accepts good/bad and the built environments") {
  for (const auto& name : envs::environment_names()) {
    const auto env = envs::make_environment(name);
    CHECK_MESSAGE(validate(env.pomdp, env.terminals).empty(), name);
  }
}

TEST_CASE("validate names a transition row that sums to 0.9") {
  auto env = envs::build_goodbad(0.9);
  env.pomdp.outcomes(envs::kBad, envs::kGood).front().prob = 0.9;
  const auto diags = validate(env.pomdp, env.terminals);
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].where == "T(s=1, a=0)");
}

TEST_CASE("validate flags a terminal state whose self-loop is 0.5") {
  auto env = envs::build_goodbad(0.9);
  auto& row = env.pomdp.outcomes(envs::kGood, envs::kBad);
  row = {{envs::kGood, 0.5, {{envs::kGood, 1.0}}}, {envs::kBad, 0.5, {{envs::kGood, 0.5}, {envs::kBad, 0.5}}}};
  for (int a : {0, 1}) env.pomdp.R(envs::kGood, a) = 0.0;
  env.terminals.terminal_states.insert(envs::kGood);
  const auto diags = validate(env.pomdp, env.terminals);
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].where == "terminal(s=0)");
}

TEST_CASE("validate reports discount, start and observation rows") {
  auto env = envs::build_goodbad(0.9);
  env.pomdp.gamma = 1.0;
  env.pomdp.initial = {0.7, 0.7};
  env.pomdp.outcomes(0, 0).front().observation = {{0, 0.5}};
  const auto diags = validate(env.pomdp, env.terminals);
  REQUIRE(diags.size() == 3);
  CHECK(diags[0].where == "discount");
  CHECK(diags[1].where == "start");
  CHECK(diags[2].where == "O(s=0, a=0, s'=0)");
}

TEST_CASE("step on good/bad") {
  const auto env = envs::build_goodbad(0.9);
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const auto r = step(env.pomdp, envs::kGood, envs::kGood, rng);
    CHECK(r.next_state == envs::kGood);
    CHECK(r.observation == envs::kGood);
    CHECK(r.reward == 1.0);
  }
  int good_obs = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto r = step(env.pomdp, envs::kBad, envs::kBad, rng);
    CHECK(r.next_state == envs::kBad);
    CHECK(r.reward == 0.0);
    good_obs += r.observation == envs::kGood;
  }
  const double se = std::sqrt(0.25 / n);
  CHECK(std::abs(good_obs / double(n) - 0.5) < 3 * se);
}

TEST_CASE("step rejects out-of-range indices") {
  const auto env = envs::build_goodbad(0.9);
  Rng rng(1);
  CHECK_THROWS_AS(step(env.pomdp, 2, 0, rng), ContractViolation);
  CHECK_THROWS_AS(step(env.pomdp, 0, -1, rng), ContractViolation);
}

// Pearson chi-square against the stored joint (s', o) row; the critical
// value is a conservative bound for the 0.999 quantile at the given dof.
static bool chi_square_ok(const Pomdp& p, int s, int a, Rng& rng, int draws) {
  std::map<std::pair<int, int>, double> expected;
  for (const auto& out : p.outcomes(s, a))
    for (auto [o, q] : out.observation) expected[{out.next, o}] += out.prob * q;
  if (expected.size() < 2) {
    for (int i = 0; i < 1000; ++i) {
      const auto r = step(p, s, a, rng);
      if (!expected.count({r.next_state, r.observation})) return false;
    }
    return true;
  }
  std::map<std::pair<int, int>, int> counts;
  for (int i = 0; i < draws; ++i) {
    const auto r = step(p, s, a, rng);
    if (!expected.count({r.next_state, r.observation})) return false;
    ++counts[{r.next_state, r.observation}];
  }
  double chi = 0.0;
  for (auto [key, prob] : expected) {
    const double e = prob * draws;
    const double d = counts[key] - e;
    chi += d * d / e;
  }
  const double dof = static_cast<double>(expected.size() - 1);
  return chi < dof + 6.0 * std::sqrt(2.0 * dof) + 10.0;
}

TEST_CASE("Monte Carlo frequencies match stored rows (chi-square, 1e5 draws)") {
  Rng rng(2024);
  const auto gb = envs::build_goodbad(0.9);
  for (int s = 0; s < 2; ++s)
    for (int a = 0; a < 2; ++a) CHECK(chi_square_ok(gb.pomdp, s, a, rng, 100000));

  std::mt19937_64 gen(5);
  for (int k = 0; k < 5; ++k) {
    const auto p = brute::random_pomdp(gen);
    for (int s = 0; s < p.n_states; ++s)
      for (int a = 0; a < p.n_actions; ++a) CHECK(chi_square_ok(p, s, a, rng, 100000));
  }
  // Deterministic environments: every sample must be the stored outcome.
  for (const char* name : {"heavenhell-3", "heavenhell-4", "shopping-5"}) {
    const auto env = envs::make_environment(name);
    for (int s = 0; s < env.pomdp.n_states; s += 7)
      for (int a = 0; a < env.pomdp.n_actions; ++a) CHECK(chi_square_ok(env.pomdp, s, a, rng, 1000));
  }
}

TEST_CASE("sample_episode on good/bad runs to the cap") {
  const auto env = envs::build_goodbad(0.9);
  Rng rng(3);
  const auto uniform = [](const History&) { return std::vector<double>{0.5, 0.5}; };
  const auto traj = sample_episode(env.pomdp, env.terminals, uniform, 100, rng);
  CHECK(traj.length() == 100);
  CHECK(traj.truncated);
  CHECK(traj.states.size() == traj.actions.size() + 1);
  CHECK(traj.observations.size() == traj.actions.size());
  CHECK(traj.rewards.size() == traj.actions.size());

  const auto one = sample_episode(env.pomdp, env.terminals, uniform, 1, rng);
  CHECK(one.length() == 1);
  CHECK(one.truncated);
  CHECK_THROWS_AS(sample_episode(env.pomdp, env.terminals, uniform, 0, rng), ContractViolation);
}

TEST_CASE("sample_episode rejects an invalid policy distribution") {
  const auto env = envs::build_goodbad(0.9);
  Rng rng(3);
  const auto bad = [](const History&) { return std::vector<double>{0.7, 0.7}; };
  CHECK_THROWS_AS(sample_episode(env.pomdp, env.terminals, bad, 5, rng), ContractViolation);
}

TEST_CASE("HeavenHell-3: walking straight to an exit terminates") {
  const auto env = envs::build_heavenhell(3);
  const envs::HeavenHellLayout layout{3};
  // Start at the bottom of the vertical corridor: north to the fork, then west.
  std::vector<int> plan(layout.n, envs::kNorth);
  for (int i = 0; i < layout.n; ++i) plan.push_back(envs::kWest);
  const auto policy = [&plan](const History& h) {
    std::vector<double> pi(4, 0.0);
    pi[plan.at(h.steps.size())] = 1.0;
    return pi;
  };
  Rng rng(11);
  const auto traj = sample_episode(env.pomdp, env.terminals, policy, 100, rng);
  CHECK_FALSE(traj.truncated);
  CHECK(traj.length() == plan.size());
  CHECK(layout.position_of(traj.states.back()) == layout.left_exit());
  CHECK(std::abs(traj.rewards.back()) == 1.0);
}

TEST_CASE("sampled prefixes are realizable") {
  std::mt19937_64 gen(9);
  Rng rng(10);
  for (int k = 0; k < 10; ++k) {
    const auto p = brute::random_pomdp(gen);
    const auto policy = brute::random_historyful(p.n_actions, k);
    const auto traj = sample_episode(p, {}, policy.as_function(), 8, rng);
    for (std::size_t t = 0; t <= traj.length(); ++t)
      CHECK(oracle::history_evidence(p, traj.history(t)) > 0.0);
  }
}

TEST_CASE("discounted_return") {
  CHECK(discounted_return(std::vector<double>{1, 1}, 0.5) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(discounted_return(std::vector<double>{}, 0.9) == 0.0);
  CHECK(discounted_return(std::vector<double>{1, -1, 10}, 0.99) == doctest::Approx(9.811).epsilon(1e-12));

  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> r(1 + k % 9), r2(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
      r[i] = u(gen);
      r2[i] = u(gen);
    }
    const double g = 0.3 + 0.6 * (k % 5) / 5.0;
    // One-step recursion on every split.
    for (std::size_t split = 0; split < r.size(); ++split) {
      const std::vector<double> tail(r.begin() + split, r.end());
      const std::vector<double> rest(r.begin() + split + 1, r.end());
      CHECK(discounted_return(tail, g) == doctest::Approx(r[split] + g * discounted_return(rest, g)).epsilon(1e-12));
    }
    // Linearity.
    std::vector<double> comb(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) comb[i] = 2.0 * r[i] - 3.0 * r2[i];
    CHECK(discounted_return(comb, g) ==
          doctest::Approx(2.0 * discounted_return(r, g) - 3.0 * discounted_return(r2, g)).epsilon(1e-12));
  }
}

TEST_CASE("episode seeds are reproducible and distinct") {
  auto a = Rng::for_episode(1, 2, 3);
  auto b = Rng::for_episode(1, 2, 3);
  auto c = Rng::for_episode(1, 2, 4);
  auto d = Rng::for_episode(1, 3, 3);
  const auto x = a.next_u64();
  CHECK(x == b.next_u64());
  CHECK(x != c.next_u64());
  CHECK(x != d.next_u64());
}

TEST_CASE("history helpers") {
  History h;
  h.initial_observation = 1;
  h = h.extended(0, 2).extended(1, 0).extended(1, 1);
  CHECK(h.length() == 3);
  CHECK(h.last_observation() == 1);
  const auto s2 = h.suffix(2);
  CHECK_FALSE(s2.initial_observation.has_value());
  CHECK(s2.steps.size() == 2);
  CHECK(h.suffix(5) == h);
  CHECK(History{}.empty());
  CHECK(h.key() != h.suffix(3).key());
}

}
