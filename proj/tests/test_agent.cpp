#include <doctest.h>

#include <cmath>
#include <set>

#include "asymac/agent.hpp"
#include "asymac/nn/gradcheck.hpp"

using namespace asymac;
using namespace asymac::agent;

namespace {

NetConfig tiny() {
  NetConfig c;
  c.embedding = 8;
  c.hidden = 16;
  c.mlp = {32, 16};
  return c;
}

History random_history(Rng& rng, int n_actions, int n_obs, int length, bool initial) {
  History h;
  if (initial) h.initial_observation = static_cast<int>(rng.next_u64() % n_obs);
  for (int t = 0; t < length; ++t)
    h = h.extended(static_cast<int>(rng.next_u64() % n_actions), static_cast<int>(rng.next_u64() % n_obs));
  return h;
}

void zero_output_layer(nn::Mlp& mlp) {
  mlp.layers.back().weight.value.setZero();
  mlp.layers.back().bias.value.setZero();
}

oracle::TabularPolicy random_softmax(const Pomdp& p, int depth, std::uint64_t seed) {
  Rng rng(seed);
  oracle::TabularPolicy::Theta theta;
  for (const auto& [h, prob] : oracle::realizable_histories(p, depth - 1)) {
    std::vector<double> row(p.n_actions);
    for (double& v : row) v = rng.uniform(-1.5, 1.5);
    theta[h] = row;
  }
  return oracle::TabularPolicy::softmax(p.n_actions, theta);
}

std::vector<nn::Matrix> snapshot(const std::vector<nn::Parameter*>& params) {
  std::vector<nn::Matrix> out;
  for (auto* p : params) out.push_back(p->value);
  return out;
}

bool same(const std::vector<nn::Parameter*>& params, const std::vector<nn::Matrix>& snap) {
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i]->value != snap[i]) return false;
  return true;
}

}  // namespace

TEST_SUITE("agent-trainer") {
  TEST_CASE("critic kind names round trip") {
    for (auto k : all_critic_kinds()) CHECK(parse_critic_kind(short_name(k)) == k);
    CHECK_THROWS_AS(parse_critic_kind("q"), std::invalid_argument);
    CHECK(truncation_of(CriticKind::Truncated2) == 2);
    CHECK(truncation_of(CriticKind::Truncated4) == 4);
    CHECK(truncation_of(CriticKind::HistoryState) == 0);
  }

  TEST_CASE("negentropy schedule endpoints") {
    CHECK(negentropy_schedule(0, 0.3) == 0.3);
    CHECK(negentropy_schedule(2'000'000, 0.3) == doctest::Approx(0.03).epsilon(1e-15));
    CHECK(negentropy_schedule(1'000'000, 0.3) == doctest::Approx(0.55 * 0.3).epsilon(1e-15));
    CHECK(negentropy_schedule(5'000'000, 0.3) == doctest::Approx(0.03).epsilon(1e-15));
    CHECK_THROWS_AS(negentropy_schedule(-1, 0.3), ContractViolation);
  }

  TEST_CASE("td error arithmetic") {
    const std::vector<double> r{1.0}, cur{3.0}, next{2.0};
    CHECK(td_errors(r, cur, next, false, 0.99)[0] == doctest::Approx(-0.02).epsilon(1e-12));
    const std::vector<double> cur2{0.5}, next2{123.0};
    CHECK(td_errors(r, cur2, next2, true, 0.99)[0] == 0.5);
    const std::vector<double> rs{0.0, 1.0}, cs{0.2, 0.4}, ns{0.5, 7.0};
    const auto d = td_errors(rs, cs, ns, true, 0.5);
    CHECK(d[0] == doctest::Approx(0.05));
    CHECK(d[1] == doctest::Approx(0.6));
    CHECK_THROWS_AS(td_errors(rs, cur, ns, true, 0.5), ContractViolation);
  }

  TEST_CASE("train config validation") {
    TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.lr_actor = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = TrainConfig{};
    cfg.episodes_per_update = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }

  TEST_CASE("empty history encodes to zeros") {
    const auto env = envs::make_environment("heavenhell-3");
    AgentNets nets(env.pomdp, CriticKind::History, NetConfig{}, 3);
    nn::Tape tape(false);
    const auto v = nets.policy.encoder.encode(tape, History{}).value();
    CHECK(v.cols() == 128);
    CHECK(v.isZero(0.0));
  }

  TEST_CASE("incremental encoding equals a full unroll bit for bit") {
    const auto env = envs::make_environment("heavenhell-3");
    AgentNets nets(env.pomdp, CriticKind::HistoryState, NetConfig{}, 5);
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
      const int length = static_cast<int>(rng.next_u64() % 12);
      const History h = random_history(rng, env.pomdp.n_actions, env.pomdp.n_obs, length, trial % 4 != 0);
      IncrementalPolicy inc(nets);
      History prefix;
      prefix.initial_observation = h.initial_observation;
      std::vector<double> probs = inc(prefix);
      for (const auto& s : h.steps) {
        prefix = prefix.extended(s.action, s.observation);
        probs = inc(prefix);
      }
      nn::Tape tape(false);
      const nn::Matrix full = nets.policy_features(tape, h).value();
      CHECK(inc.hidden() == full);
      CHECK(probs == nets.action_probabilities(h));
    }
  }

  TEST_CASE("truncated kinds only see the last k pairs") {
    const auto env = envs::make_environment("heavenhell-3");
    for (auto kind : {CriticKind::Truncated2, CriticKind::Truncated4}) {
      const int k = truncation_of(kind);
      AgentNets nets(env.pomdp, kind, tiny(), 9);
      Rng rng(23);
      for (int trial = 0; trial < 20; ++trial) {
        const History tail = random_history(rng, 4, env.pomdp.n_obs, k, false);
        History a = random_history(rng, 4, env.pomdp.n_obs, 3 + trial % 3, true);
        History b = random_history(rng, 4, env.pomdp.n_obs, 1 + trial % 5, true);
        for (const auto& s : tail.steps) {
          a = a.extended(s.action, s.observation);
          b = b.extended(s.action, s.observation);
        }
        CHECK(nets.action_probabilities(a) == nets.action_probabilities(b));
        CHECK(nets.critic_value(a, 0) == nets.critic_value(b, 0));
        IncrementalPolicy inc(nets);
        CHECK(inc(a) == nets.action_probabilities(b));
      }
    }
  }

  TEST_CASE("critics ignore the input half their kind does not use") {
    const auto env = envs::make_environment("heavenhell-3");
    Rng rng(29);
    AgentNets s_nets(env.pomdp, CriticKind::State, tiny(), 1);
    AgentNets h_nets(env.pomdp, CriticKind::History, tiny(), 1);
    AgentNets hs_nets(env.pomdp, CriticKind::HistoryState, tiny(), 1);
    const History h1 = random_history(rng, 4, env.pomdp.n_obs, 5, true);
    const History h2 = random_history(rng, 4, env.pomdp.n_obs, 2, true);
    CHECK(s_nets.critic_value(h1, 7) == s_nets.critic_value(h2, 7));
    CHECK(h_nets.critic_value(h1, 3) == h_nets.critic_value(h1, 20));
    CHECK(hs_nets.critic_value(h1, 3) != hs_nets.critic_value(h1, 20));
    CHECK(hs_nets.critic_value(h1, 3) != hs_nets.critic_value(h2, 3));
  }

  TEST_CASE("policy, critic and target share no parameters") {
    const auto env = envs::make_environment("goodbad");
    for (auto kind : all_critic_kinds()) {
      AgentNets nets(env.pomdp, kind, tiny(), 2);
      std::set<const void*> seen;
      std::set<std::string> names;
      for (auto* p : nets.all_parameters()) {
        CHECK(seen.insert(&p->value).second);
        CHECK(names.insert(p->name).second);
      }
      auto c = nets.critic_parameters();
      auto t = nets.target_parameters();
      REQUIRE(c.size() == t.size());
      for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i]->value == t[i]->value);
    }
  }

  TEST_CASE("gradcheck: full policy and critic graphs on a length-5 history") {
    const auto env = envs::make_environment("heavenhell-3");
    AgentNets nets(env.pomdp, CriticKind::HistoryState, NetConfig{}, 31);
    Rng rng(37);
    const History h = random_history(rng, 4, env.pomdp.n_obs, 5, true);
    nn::GradcheckOptions opt;
    opt.samples_per_group = 8;
    const auto policy_report = nn::gradcheck(nets.policy_parameters(), [&](nn::Tape& t) {
      Var lp = nn::log_softmax(nets.policy.head.forward(t, nets.policy_features(t, h)));
      return nn::sum(nn::pick(lp, {2}));
    }, opt);
    for (const auto& g : policy_report.groups) {
      INFO(g.name << " " << g.max_rel_error);
      CHECK(g.pass);
    }
    const auto critic_report = nn::gradcheck(nets.critic_parameters(), [&](nn::Tape& t) {
      return nets.critic_output(t, nets.critic, h, 5);
    }, opt);
    for (const auto& g : critic_report.groups) {
      INFO(g.name << " " << g.max_rel_error);
      CHECK(g.pass);
    }
  }

  TEST_CASE("zero TD errors and zero entropy weight leave the policy unchanged") {
    auto env = envs::make_environment("goodbad");
    for (auto& r : env.pomdp.reward) r = 0.0;
    AgentNets nets(env.pomdp, CriticKind::HistoryState, tiny(), 4);
    zero_output_layer(nets.critic.head);
    nets.sync_target();
    TrainConfig cfg;
    Optimizers opt = make_optimizers(nets, cfg);
    std::vector<EpisodeData> batch{sample_training_episode(env, nets, 10, 1, 0),
                                   sample_training_episode(env, nets, 10, 1, 1)};
    const auto before = snapshot(nets.policy_parameters());
    const auto stats = update(nets, opt, batch, env.pomdp.gamma, 0.0, true);
    for (const auto& d : stats.deltas)
      for (double v : d) CHECK(v == 0.0);
    CHECK(same(nets.policy_parameters(), before));
  }

  TEST_CASE("uniform policy negentropy is -log|A| per step") {
    const auto env = envs::make_environment("heavenhell-3");
    AgentNets nets(env.pomdp, CriticKind::History, tiny(), 4);
    zero_output_layer(nets.policy.head);
    Optimizers opt = make_optimizers(nets, TrainConfig{});
    std::vector<EpisodeData> batch{sample_training_episode(env, nets, 7, 3, 0)};
    const double T = static_cast<double>(batch[0].trajectory.length());
    const auto stats = update(nets, opt, batch, env.pomdp.gamma, 1.0, true);
    CHECK(stats.negentropy_loss == doctest::Approx(-T * std::log(4.0)).epsilon(1e-12));
  }

  TEST_CASE("updates never touch the target critic") {
    const auto env = envs::make_environment("heavenhell-3");
    AgentNets nets(env.pomdp, CriticKind::HistoryState, tiny(), 8);
    Optimizers opt = make_optimizers(nets, TrainConfig{});
    const auto target_before = snapshot(nets.target_parameters());
    const auto critic_before = snapshot(nets.critic_parameters());
    std::vector<EpisodeData> batch{sample_training_episode(env, nets, 20, 5, 0),
                                   sample_training_episode(env, nets, 20, 5, 1)};
    update(nets, opt, batch, env.pomdp.gamma, 0.1, true);
    CHECK(same(nets.target_parameters(), target_before));
    CHECK_FALSE(same(nets.critic_parameters(), critic_before));
    for (auto* p : nets.target_parameters()) CHECK(p->grad.isZero(0.0));
  }

  TEST_CASE("critic loss gradient matches a hand-built TD regression") {
    // The critic gradient must equal that of sum (v - y)^2 with y held fixed.
    const auto env = envs::make_environment("goodbad");
    AgentNets nets(env.pomdp, CriticKind::History, tiny(), 12);
    Optimizers opt = make_optimizers(nets, TrainConfig{});
    std::vector<EpisodeData> batch{sample_training_episode(env, nets, 4, 9, 0)};
    const auto& traj = batch[0].trajectory;
    std::vector<double> y;
    for (std::size_t t = 0; t < traj.length(); ++t) {
      const double boot = nets.target_value(traj.history(t + 1), 0);
      y.push_back(traj.rewards[t] + env.pomdp.gamma * boot);
    }
    nn::zero_grads(nets.critic_parameters());
    {
      nn::Tape tape;
      Var loss = tape.constant(nn::Matrix::Zero(1, 1));
      for (std::size_t t = 0; t < traj.length(); ++t) {
        Var d = nn::sub(nets.critic_output(tape, nets.critic, traj.history(t), 0),
                        tape.constant(nn::Matrix::Constant(1, 1, y[t])));
        loss = nn::add(loss, nn::mul(d, d));
      }
      tape.backward(loss);
    }
    std::vector<nn::Matrix> expected;
    for (auto* p : nets.critic_parameters()) expected.push_back(p->grad);
    // Run the real update with lr tiny; grads remain in p->grad after it.
    update(nets, opt, batch, env.pomdp.gamma, 0.0, true);
    auto params = nets.critic_parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      INFO(params[i]->name);
      CHECK((params[i]->grad - expected[i]).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + expected[i].cwiseAbs().maxCoeff()));
    }
  }

  TEST_CASE("non-finite loss raises a divergence with a dump") {
    const auto env = envs::make_environment("goodbad");
    AgentNets nets(env.pomdp, CriticKind::History, tiny(), 1);
    Optimizers opt = make_optimizers(nets, TrainConfig{});
    auto ep = sample_training_episode(env, nets, 3, 1, 0);
    ep.trajectory.rewards[0] = std::nan("");
    const auto before = snapshot(nets.policy_parameters());
    try {
      update(nets, opt, {ep}, 0.9, 0.1, true);
      FAIL("expected divergence");
    } catch (const TrainingDivergence& e) {
      CHECK(e.dump.find("critic_loss") != std::string::npos);
    }
    CHECK(same(nets.policy_parameters(), before));
  }

  TEST_CASE("zero budget trains nothing") {
    const auto env = envs::make_environment("goodbad");
    TrainConfig cfg;
    cfg.net = tiny();
    AgentNets nets(env.pomdp, CriticKind::History, cfg.net, 0);
    Optimizers opt = make_optimizers(nets, cfg);
    const auto before = snapshot(nets.all_parameters());
    const auto result = train(env, CriticKind::History, cfg, nets, opt);
    CHECK(result.curve.points.empty());
    CHECK(result.updates == 0);
    CHECK(same(nets.all_parameters(), before));
  }

  TEST_CASE("training is deterministic per seed") {
    const auto env = envs::make_environment("heavenhell-3");
    TrainConfig cfg;
    cfg.net = tiny();
    cfg.max_timesteps = 3000;
    cfg.target_period = 500;
    cfg.seed = 42;
    for (auto kind : {CriticKind::HistoryState, CriticKind::HistoryStateSampled, CriticKind::Truncated2}) {
      nn::Checkpoint ck1, ck2;
      const auto a = train(env, kind, cfg, &ck1);
      const auto b = train(env, kind, cfg, &ck2);
      REQUIRE(a.curve.points.size() == b.curve.points.size());
      for (std::size_t i = 0; i < a.curve.points.size(); ++i) {
        CHECK(a.curve.points[i].timestep == b.curve.points[i].timestep);
        CHECK(a.curve.points[i].episode_return == b.curve.points[i].episode_return);
      }
      CHECK(ck1.to_string() == ck2.to_string());
      cfg.seed = 43;
      const auto c = train(env, kind, cfg);
      cfg.seed = 42;
      bool differs = c.curve.points.size() != a.curve.points.size();
      for (std::size_t i = 0; !differs && i < a.curve.points.size(); ++i)
        differs = c.curve.points[i].timestep != a.curve.points[i].timestep;
      CHECK(differs);
    }
  }

  TEST_CASE("learning curve rolling mean") {
    LearningCurve c;
    for (int i = 0; i < 150; ++i) c.add(10 * (i + 1), i < 50 ? 0.0 : 1.0);
    CHECK(c.points[0].rolling100 == 0.0);
    CHECK(c.points[99].rolling100 == doctest::Approx(0.5));
    CHECK(c.points[149].rolling100 == 1.0);
    CHECK(c.points[149].episode == 149);
    CHECK_THROWS_AS(c.add(1500, 0.0), ContractViolation);
  }

  TEST_CASE("belief-sampled states are always in the belief support") {
    const auto env = envs::make_environment("heavenhell-3");
    AgentNets nets(env.pomdp, CriticKind::HistoryStateSampled, tiny(), 3);
    for (std::uint64_t e = 0; e < 20; ++e) {
      const auto ep = sample_training_episode(env, nets, 30, 11, e);
      REQUIRE(ep.critic_states.size() == ep.trajectory.length() + 1);
      for (std::size_t t = 0; t <= ep.trajectory.length(); ++t) {
        const auto b = oracle::belief_of_history(env.pomdp, ep.trajectory.history(t));
        CHECK(b[ep.critic_states[t]] > 0.0);
      }
    }
  }

  TEST_CASE("checkpoint round trip restores networks and optimizers") {
    const auto env = envs::make_environment("heavenhell-3");
    TrainConfig cfg;
    cfg.net = tiny();
    cfg.max_timesteps = 400;
    AgentNets nets(env.pomdp, CriticKind::HistoryState, cfg.net, 6);
    Optimizers opt = make_optimizers(nets, cfg);
    train(env, CriticKind::HistoryState, cfg, nets, opt);
    const auto ck = nn::Checkpoint::parse(save_checkpoint(nets, opt, env.name, 400).to_string());
    AgentNets back = load_nets(ck, env.pomdp);
    Optimizers opt_back = make_optimizers(back, cfg);
    load_optimizers(ck, back, opt_back);
    CHECK(opt_back.actor.steps() == opt.actor.steps());
    CHECK(opt_back.critic.second_moments()[3] == opt.critic.second_moments()[3]);
    Rng rng(3);
    for (int i = 0; i < 10; ++i) {
      const History h = random_history(rng, 4, env.pomdp.n_obs, i, true);
      CHECK(back.action_probabilities(h) == nets.action_probabilities(h));
      CHECK(back.critic_value(h, i) == nets.critic_value(h, i));
      CHECK(back.target_value(h, i) == nets.target_value(h, i));
    }
    CHECK_THROWS_AS(load_nets(ck, envs::make_environment("heavenhell-4").pomdp), nn::CheckpointError);
  }

  TEST_CASE("fork probes: construction and blindness") {
    const auto env = envs::make_environment("heavenhell-4");
    const auto probes = heavenhell_fork_probes(4);
    REQUIRE(probes.size() == 4);
    envs::HeavenHellLayout layout;
    layout.n = 4;
    for (const auto& p : probes) {
      CHECK(layout.position_of(p.state) == layout.fork());
      CHECK(oracle::belief_of_history(env.pomdp, p.history)[p.state] > 0.0);
    }
    // no-priest histories coincide across sides; priest histories do not.
    CHECK(probes[0].history == probes[2].history);
    CHECK(probes[1].history != probes[3].history);

    AgentNets s(env.pomdp, CriticKind::State, tiny(), 1);
    AgentNets h(env.pomdp, CriticKind::History, tiny(), 1);
    AgentNets hs(env.pomdp, CriticKind::HistoryState, tiny(), 1);
    const auto vs = probe_critic(s, env.pomdp, probes);
    const auto vh = probe_critic(h, env.pomdp, probes);
    const auto vhs = probe_critic(hs, env.pomdp, probes);
    CHECK(vs[0] == vs[1]);
    CHECK(vs[2] == vs[3]);
    CHECK(vh[0] == vh[2]);
    CHECK(std::set<double>(vhs.begin(), vhs.end()).size() == 4);

    auto bad = probes;
    bad[1].state = layout.state(layout.fork(), envs::HeavenSide::Right);  // priest said left
    CHECK_THROWS_AS(probe_critic(s, env.pomdp, bad), oracle::Unrealizable);
  }

  TEST_CASE("oracle-pinned critic has zero-mean TD errors") {
    const auto env = envs::make_environment("goodbad");
    const int depth = 4;
    const auto policy = random_softmax(env.pomdp, depth, 5);
    oracle::ValueOracle values(env.pomdp, policy);
    const auto act = policy.as_function();
    double sum = 0.0, sum_sq = 0.0;
    int n = 0;
    for (int e = 0; e < 10000; ++e) {
      Rng rng = Rng::for_episode(77, 0, e);
      const auto traj = sample_episode(env.pomdp, {}, act, depth, rng);
      std::vector<double> cur, next;
      for (std::size_t t = 0; t < traj.length(); ++t) {
        const int d = depth - static_cast<int>(t);
        cur.push_back(values.v_history(traj.history(t), oracle::Horizon{d}));
        next.push_back(values.v_history(traj.history(t + 1), oracle::Horizon{d - 1}));
      }
      for (double d : td_errors(traj.rewards, cur, next, !traj.truncated, env.pomdp.gamma)) {
        sum += d;
        sum_sq += d * d;
        ++n;
      }
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum_sq / n - mean * mean) / n);
    CHECK(std::abs(mean) <= 3.0 * se);
  }

  TEST_CASE("sampled gradient estimators are calibrated against the exact gradient") {
    const auto env = envs::make_environment("goodbad");
    const auto policy = random_softmax(env.pomdp, 2, 13);
    for (auto mode : {oracle::GradientMode::Symmetric, oracle::GradientMode::Asymmetric}) {
      const auto report = calibrate_estimator(env.pomdp, policy, 2, mode, 10000, 2024);
      INFO("worst z " << report.worst_z());
      CHECK(report.pass());
      CHECK(report.entries.size() == 20);
    }
  }

  TEST_CASE("calibration test has power against a shifted gradient") {
    const auto env = envs::make_environment("goodbad");
    const auto policy = random_softmax(env.pomdp, 3, 13);
    const auto report = calibrate_estimator(env.pomdp, policy, 3, oracle::GradientMode::Symmetric, 10000, 1);
    CHECK(report.pass());
    double worst = 0.0;
    for (const auto& e : report.entries)
      worst = std::max(worst, std::abs(e.mean - (e.exact + 0.5)) / std::max(e.standard_error, 1e-12));
    CHECK(worst > 3.0);
  }
}
