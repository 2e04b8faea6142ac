#include <algorithm>
#include <chrono>
#include <cmath>

#include "asymac/harness.hpp"
#include "asymac/nn/gradcheck.hpp"

namespace asymac::harness {

using nlohmann::json;

nlohmann::json VerifyReport::to_json() const {
  return json{{"command", command}, {"result", pass ? "PASS" : "FAIL"}, {"details", details}};
}

std::vector<std::string> verify_commands() {
  return {"goodbad", "theorem2", "theorem3", "theorem4", "theorem5", "timed", "gradcheck", "calibration"};
}

namespace {

using oracle::Horizon;
using oracle::TabularPolicy;

VerifyReport verify_goodbad(const VerifyOptions& opt) {
  const auto c = oracle::goodbad_contradiction(opt.gamma);
  VerifyReport r{"goodbad", true, {}};
  r.details = {{"gamma", opt.gamma},           {"belief_good", c.belief_good}, {"belief_bad", c.belief_bad},
               {"prob_obs_good", c.prob_obs_good}, {"prob_obs_bad", c.prob_obs_bad}, {"v_good", c.v_good},
               {"v_bad", c.v_bad},             {"lhs", c.lhs},                 {"rhs", c.rhs},
               {"gap", c.gap}};
  auto near = [](double a, double b) { return std::abs(a - b) <= 1e-9; };
  bool ok = near(c.gap, 1.0 / 6.0) && near(c.belief_good, 2.0 / 3.0) && near(c.belief_bad, 1.0 / 3.0) &&
            near(c.prob_obs_good, 5.0 / 6.0) && near(c.prob_obs_bad, 1.0 / 6.0);
  if (opt.gamma == 0.9) ok = ok && near(c.v_good, 10.0) && near(c.v_bad, 5.0) && near(c.lhs, 25.0 / 3.0) && near(c.rhs, 8.5);
  Rng rng(opt.seed);
  const int sweeps = opt.count > 0 ? opt.count : 100;
  double worst = 0.0;
  for (int k = 0; k < sweeps; ++k) worst = std::max(worst, std::abs(oracle::goodbad_contradiction(rng.uniform(0.0, 0.999)).gap - 1.0 / 6.0));
  r.details["random_gamma_count"] = sweeps;
  r.details["random_gamma_max_gap_error"] = worst;
  r.pass = ok && worst <= 1e-12;
  return r;
}

VerifyReport verify_theorem2(const VerifyOptions& opt) {
  const auto env = envs::build_goodbad(opt.gamma);
  History h;
  h.initial_observation = envs::kGood;
  const auto b = oracle::bias_report(env.pomdp, TabularPolicy::last_observation(2), h, Horizon{60});
  VerifyReport r{"theorem2", false, {}};
  r.details = {{"gamma", opt.gamma}, {"depth", 60}, {"v_h", b.v_h}, {"e_vhs", b.e_vhs}, {"gap_hs", b.gap_hs}};
  if (b.e_vs) r.details["e_vs"] = *b.e_vs;
  if (b.gap_state) r.details["gap_state"] = *b.gap_state;
  r.pass = b.gap_state && *b.gap_state > 0.05;
  return r;
}

VerifyReport verify_theorem3(const VerifyOptions& opt) {
  Rng rng(opt.seed);
  const int problems = opt.count > 0 ? opt.count : 5;
  double worst = 0.0;
  std::size_t histories = 0;
  for (int k = 0; k < problems; ++k) {
    const int n = 2 + static_cast<int>(rng.next_u64() % 3);
    const int m = 2 + static_cast<int>(rng.next_u64() % 2);
    Pomdp p = Pomdp::with_dimensions(n, m, n, 0.9);
    std::vector<double> init(n);
    double z = 0.0;
    for (double& v : init) z += v = 0.1 + rng.uniform();
    for (double& v : init) v /= z;
    p.initial = init;
    for (int s = 0; s < n; ++s) {
      for (int a = 0; a < m; ++a) {
        std::vector<double> t(n);
        double tz = 0.0;
        for (double& v : t) tz += v = rng.uniform() < 0.3 ? 0.0 : 0.1 + rng.uniform();
        if (tz == 0.0) t[s] = tz = 1.0;
        for (int next = 0; next < n; ++next)
          if (t[next] > 0.0) p.outcomes(s, a).push_back({next, t[next] / tz, {{next, 1.0}}});
        p.R(s, a) = rng.uniform(-1.0, 1.0);
      }
    }
    p.initial_emission.resize(n);
    for (int s = 0; s < n; ++s) p.initial_emission[s] = {{s, 1.0}};
    std::vector<std::vector<double>> rows(n, std::vector<double>(m));
    for (auto& row : rows) {
      double rz = 0.0;
      for (double& v : row) rz += v = 0.1 + rng.uniform();
      for (double& v : row) v /= rz;
    }
    const auto policy = TabularPolicy::reactive(rows);
    const auto v_state = oracle::v_state_reactive(p, policy);
    oracle::ValueOracle values(p, policy);
    for (const auto& [h, prob] : oracle::realizable_histories(p, 3)) {
      const auto b = oracle::belief_of_history(p, h);
      double e = 0.0;
      for (int s = 0; s < n; ++s) e += b[s] * v_state[s];
      worst = std::max(worst, std::abs(values.v_history(h, Horizon{400}) - e));
      ++histories;
    }
  }
  VerifyReport r{"theorem3", worst <= 1e-8, {}};
  r.details = {{"problems", problems}, {"histories", histories}, {"max_gap", worst}, {"tolerance", 1e-8}};
  return r;
}

VerifyReport verify_theorem4(const VerifyOptions& opt) {
  Rng rng(opt.seed);
  const int problems = opt.count > 0 ? opt.count : 100;
  double worst = 0.0;
  std::size_t histories = 0;
  for (int k = 0; k < problems; ++k) {
    const Pomdp p = random_pomdp(rng, {});
    const auto policy = random_historyful_policy(p.n_actions, rng.next_u64());
    oracle::ValueOracle values(p, policy);
    for (const auto& [h, prob] : oracle::realizable_histories(p, 3)) {
      const auto b = oracle::belief_of_history(p, h);
      const int depth = 3;
      double e = 0.0;
      for (int s = 0; s < p.n_states; ++s)
        if (b[s] > 0.0) e += b[s] * values.v_history_state(h, s, Horizon{depth});
      worst = std::max(worst, std::abs(values.v_history(h, Horizon{depth}) - e));
      ++histories;
    }
  }
  VerifyReport r{"theorem4", worst <= 1e-8, {}};
  r.details = {{"problems", problems}, {"histories", histories}, {"max_gap", worst}, {"tolerance", 1e-8}};
  return r;
}

VerifyReport verify_theorem5(const VerifyOptions& opt) {
  Rng rng(opt.seed);
  const int problems = opt.count > 0 ? opt.count : 20;
  const int depth = 3;
  double worst = 0.0;
  json offending;
  for (int k = 0; k < problems; ++k) {
    const Pomdp p = random_pomdp(rng, {});
    const auto policy = random_softmax_policy(p, depth, rng);
    const auto sym = oracle::exact_policy_gradient(p, policy, Horizon{depth}, oracle::GradientMode::Symmetric);
    auto asym = oracle::exact_policy_gradient(p, policy, Horizon{depth}, oracle::GradientMode::Asymmetric);
    if (opt.corrupt && k == 0) asym.rows.begin()->second[0] += 1e-3;
    for (const auto& [h, row] : sym.rows) {
      const auto it = asym.rows.find(h);
      for (int a = 0; a < p.n_actions; ++a) {
        const double other = it == asym.rows.end() ? 0.0 : it->second[a];
        const double d = std::abs(row[a] - other);
        if (d > worst) {
          worst = d;
          offending = {{"problem", k}, {"history", format_history(h)}, {"action", a},
                       {"symmetric", row[a]}, {"asymmetric", other}};
        }
      }
    }
  }
  VerifyReport r{"theorem5", worst <= 1e-8, {}};
  r.details = {{"problems", problems}, {"depth", depth}, {"max_abs_difference", worst}, {"tolerance", 1e-8}};
  if (!r.pass) r.details["offending_entry"] = offending;
  return r;
}

VerifyReport verify_timed(const VerifyOptions& opt) {
  const auto env = envs::build_goodbad(opt.gamma);
  const auto policy = TabularPolicy::last_observation(2);
  const auto v = oracle::v_state_reactive(env.pomdp, policy);
  double worst = 0.0;
  json rows = json::array();
  for (int t = 0; t <= 5; ++t) {
    const auto vt = oracle::v_timed_states(env.pomdp, policy, t, Horizon{300});
    for (int s = 0; s < env.pomdp.n_states; ++s) {
      if (std::isnan(vt[s])) continue;
      worst = std::max(worst, std::abs(vt[s] - v[s]));
    }
    rows.push_back({{"t", t}, {"v_t", vt}});
  }
  VerifyReport r{"timed", worst <= 1e-8, {}};
  r.details = {{"v_state", v}, {"timed", rows}, {"max_difference", worst}, {"tolerance", 1e-8}};
  return r;
}

VerifyReport verify_gradcheck(const VerifyOptions& opt) {
  Rng rng(opt.seed);
  nn::GradcheckOptions gc;
  gc.seed = opt.seed;
  json blocks = json::object();
  bool ok = true;
  auto record = [&](const std::string& name, const nn::GradcheckReport& rep) {
    json groups = json::array();
    for (const auto& g : rep.groups)
      groups.push_back({{"group", g.name}, {"checked", g.checked}, {"max_rel_error", g.max_rel_error}, {"pass", g.pass}});
    blocks[name] = {{"pass", rep.pass()}, {"groups", groups}};
    ok = ok && rep.pass();
  };
  auto weights = [&rng](Eigen::Index r, Eigen::Index c) { return nn::uniform_matrix(r, c, 1.0, rng); };

  {
    nn::Embedding emb("embedding", 10, 64, rng);
    const auto w = weights(3, 64);
    record("embedding", nn::gradcheck({&emb.table}, [&](nn::Tape& t) {
      return nn::sum(nn::mul(emb.forward(t, {1, 7, 1}), t.constant(w)));
    }, gc));
  }
  {
    nn::Linear lin("linear", 64, 32, rng);
    nn::Parameter x("input", weights(4, 64));
    const auto w = weights(4, 32);
    record("linear", nn::gradcheck({&lin.weight, &lin.bias, &x}, [&](nn::Tape& t) {
      return nn::sum(nn::mul(lin.forward(t, t.param(x)), t.constant(w)));
    }, gc));
  }
  {
    nn::Mlp mlp("mlp", 128, {512, 256}, 4, rng);
    nn::Parameter x("input", weights(3, 128));
    auto params = mlp.parameters();
    params.push_back(&x);
    record("mlp", nn::gradcheck(params, [&](nn::Tape& t) {
      return nn::sum(nn::pick(nn::log_softmax(mlp.forward(t, t.param(x))), {0, 3, 1}));
    }, gc));
  }
  {
    nn::GruCell gru("gru", 128, 128, rng);
    bool all = true;
    json trials = json::array();
    for (int k = 0; k < 20; ++k) {
      nn::Parameter x("input", weights(1, 128));
      nn::Parameter h("hidden", nn::uniform_matrix(1, 128, 0.9, rng));
      const auto w = weights(1, 128);
      auto params = gru.parameters();
      params.push_back(&x);
      params.push_back(&h);
      nn::GradcheckOptions o = gc;
      o.seed = opt.seed + static_cast<std::uint64_t>(k);
      const auto rep = nn::gradcheck(params, [&](nn::Tape& t) {
        return nn::sum(nn::mul(gru.step(t, t.param(x), t.param(h)), t.constant(w)));
      }, o);
      all = all && rep.pass();
      trials.push_back(rep.max_rel_error());
    }
    blocks["gru"] = {{"pass", all}, {"inputs", 20}, {"max_rel_error_per_input", trials}};
    ok = ok && all;
  }
  {
    const auto env = envs::make_environment("heavenhell-3");
    agent::AgentNets nets(env.pomdp, agent::CriticKind::HistoryState, agent::NetConfig{}, opt.seed);
    History h;
    h.initial_observation = 9;
    for (int k = 0; k < 5; ++k)
      h = h.extended(static_cast<int>(rng.next_u64() % 4), static_cast<int>(rng.next_u64() % env.pomdp.n_obs));
    nn::GradcheckOptions o = gc;
    o.samples_per_group = 8;
    record("policy_network", nn::gradcheck(nets.policy_parameters(), [&](nn::Tape& t) {
      return nn::sum(nn::pick(nn::log_softmax(nets.policy.head.forward(t, nets.policy_features(t, h))), {1}));
    }, o));
    record("critic_network", nn::gradcheck(nets.critic_parameters(), [&](nn::Tape& t) {
      return nets.critic_output(t, nets.critic, h, 3);
    }, o));
  }
  VerifyReport r{"gradcheck", ok, {}};
  r.details = {{"tolerance", gc.tolerance}, {"step", gc.step}, {"blocks", blocks}};
  return r;
}

VerifyReport verify_calibration(const VerifyOptions& opt) {
  const auto env = envs::build_goodbad(opt.gamma);
  Rng rng(opt.seed);
  const int depth = 2;
  const auto policy = random_softmax_policy(env.pomdp, depth, rng);
  const int episodes = opt.count > 0 ? opt.count : 10000;
  VerifyReport r{"calibration", true, {}};
  for (auto mode : {oracle::GradientMode::Symmetric, oracle::GradientMode::Asymmetric}) {
    const auto rep = agent::calibrate_estimator(env.pomdp, policy, depth, mode, episodes, opt.seed);
    json entries = json::array();
    for (const auto& e : rep.entries)
      entries.push_back({{"history", format_history(e.history)}, {"action", e.action}, {"exact", e.exact},
                         {"mean", e.mean}, {"standard_error", e.standard_error}, {"pass", e.pass}});
    const std::string name = mode == oracle::GradientMode::Symmetric ? "symmetric" : "asymmetric";
    r.details[name] = {{"pass", rep.pass()}, {"worst_z", rep.worst_z()}, {"entries", entries}};
    r.pass = r.pass && rep.pass();
  }
  r.details["episodes"] = episodes;
  r.details["depth"] = depth;
  return r;
}

}  // namespace

VerifyReport verify(const std::string& command, const VerifyOptions& options) {
  if (!(options.gamma >= 0.0 && options.gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  const auto start = std::chrono::steady_clock::now();
  VerifyReport r;
  if (command == "goodbad") r = verify_goodbad(options);
  else if (command == "theorem2") r = verify_theorem2(options);
  else if (command == "theorem3") r = verify_theorem3(options);
  else if (command == "theorem4") r = verify_theorem4(options);
  else if (command == "theorem5") r = verify_theorem5(options);
  else if (command == "timed") r = verify_timed(options);
  else if (command == "gradcheck") r = verify_gradcheck(options);
  else if (command == "calibration") r = verify_calibration(options);
  else throw ConfigError("unknown verify command '" + command + "'");
  r.details["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace asymac::harness
