#include "asymac/asymac.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <memory>
#include <sstream>

#include "asymac/harness.hpp"

using namespace asymac;
using nlohmann::json;

struct asymac_env {
  envs::Environment env;
};

struct asymac_agent {
  envs::Environment env;
  nn::Checkpoint checkpoint;
  std::unique_ptr<agent::AgentNets> nets;
};

namespace {

thread_local std::string last_error;

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

asymac_status fail(asymac_status status, const std::string& message) {
  last_error = message;
  return status;
}

// Runs `body`, mapping exceptions to status codes.
template <class F>
asymac_status guarded(F&& body) {
  last_error.clear();
  try {
    return body();
  } catch (const harness::ConfigError& e) {
    return fail(ASYMAC_CONFIG_ERROR, e.what());
  } catch (const envs::PomdpSyntaxError& e) {
    return fail(ASYMAC_CONFIG_ERROR, e.what());
  } catch (const envs::PomdpSemanticError& e) {
    return fail(ASYMAC_CONFIG_ERROR, e.what());
  } catch (const oracle::Unrealizable& e) {
    return fail(ASYMAC_UNREALIZABLE, e.what());
  } catch (const nn::CheckpointError& e) {
    return fail(ASYMAC_IO_ERROR, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(ASYMAC_IO_ERROR, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(ASYMAC_INVALID_ARGUMENT, e.what());
  } catch (const ContractViolation& e) {
    return fail(ASYMAC_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(ASYMAC_INTERNAL_ERROR, e.what());
  } catch (...) {
    return fail(ASYMAC_INTERNAL_ERROR, "unknown exception");
  }
}

asymac_status put(char** out, const std::string& s) {
  *out = dup(s);
  return *out ? ASYMAC_OK : fail(ASYMAC_INTERNAL_ERROR, "out of memory");
}

#define REQUIRE_ARG(cond, what) \
  if (!(cond)) return fail(ASYMAC_INVALID_ARGUMENT, what)

json curve_summary(const harness::ExperimentResult& r) {
  json runs = json::array();
  for (const auto& run : r.runs)
    runs.push_back({{"seed", run.seed},
                    {"timesteps", run.result.timesteps},
                    {"episodes", run.result.curve.points.size()},
                    {"final_rolling100", run.result.curve.final_rolling100()},
                    {"diverged", run.result.diverged}});
  return {{"out", r.spec.out_dir}, {"env", r.spec.env}, {"critic", agent::short_name(r.spec.kind)},
          {"mean_final", r.mean_final}, {"sem_final", r.sem_final}, {"any_diverged", r.any_diverged},
          {"runs", runs}};
}

// Reads a curve CSV written by curve_csv.
agent::LearningCurve read_curve(const std::string& path) {
  std::istringstream in(harness::read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "timestep,episode,return,rolling100")
    throw harness::ConfigError(path + ": not a learning-curve CSV");
  agent::LearningCurve curve;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    agent::CurvePoint p;
    char c1, c2, c3;
    std::istringstream row(line);
    if (!(row >> p.timestep >> c1 >> p.episode >> c2 >> p.episode_return >> c3 >> p.rolling100))
      throw harness::ConfigError(path + ": malformed row '" + line + "'");
    curve.points.push_back(p);
  }
  return curve;
}

}  // namespace

extern "C" {

const char* asymac_version(void) {
  static const std::string v = harness::version();
  return v.c_str();
}

const char* asymac_last_error(void) { return last_error.c_str(); }

const char* asymac_status_name(asymac_status status) {
  switch (status) {
    case ASYMAC_OK: return "ok";
    case ASYMAC_VERIFY_FAILED: return "verification failed";
    case ASYMAC_CONFIG_ERROR: return "config error";
    case ASYMAC_INVALID_ARGUMENT: return "invalid argument";
    case ASYMAC_IO_ERROR: return "i/o error";
    case ASYMAC_UNREALIZABLE: return "unrealizable";
    case ASYMAC_INTERNAL_ERROR: return "internal error";
  }
  return "unknown status";
}

void asymac_string_free(char* s) { std::free(s); }

asymac_status asymac_list_environments(char** out_json) {
  REQUIRE_ARG(out_json, "out_json is null");
  return guarded([&] { return put(out_json, json(envs::environment_names()).dump()); });
}

asymac_status asymac_env_create(const char* name, asymac_env** out) {
  REQUIRE_ARG(name && out, "null argument");
  return guarded([&] {
    try {
      *out = new asymac_env{envs::make_environment(name)};
    } catch (const std::invalid_argument& e) {
      return fail(ASYMAC_CONFIG_ERROR, e.what());
    }
    return ASYMAC_OK;
  });
}

asymac_status asymac_env_load_file(const char* path, asymac_env** out) {
  REQUIRE_ARG(path && out, "null argument");
  return guarded([&] {
    if (!std::filesystem::exists(path)) return fail(ASYMAC_IO_ERROR, std::string("no such file: ") + path);
    *out = new asymac_env{envs::load_pomdp_file(path)};
    return ASYMAC_OK;
  });
}

void asymac_env_free(asymac_env* env) { delete env; }

asymac_status asymac_env_describe(const asymac_env* env, char** out_json) {
  REQUIRE_ARG(env && out_json, "null argument");
  return guarded([&] {
    const auto& p = env->env.pomdp;
    const auto diagnostics = validate(p, env->env.terminals);
    json diag = json::array();
    for (const auto& d : diagnostics) diag.push_back({{"where", d.where}, {"message", d.message}});
    const json j{{"name", env->env.name},
                 {"states", p.n_states},
                 {"actions", p.n_actions},
                 {"observations", p.n_obs},
                 {"gamma", p.gamma},
                 {"initial_observation", p.has_initial_observation()},
                 {"terminal_states", env->env.terminals.terminal_states.size()},
                 {"terminal_transitions", env->env.terminals.terminal_transitions.size()},
                 {"valid", diagnostics.empty()},
                 {"diagnostics", diag}};
    const auto st = put(out_json, j.dump(2));
    if (st != ASYMAC_OK) return st;
    return diagnostics.empty() ? ASYMAC_OK
                               : fail(ASYMAC_CONFIG_ERROR, diagnostics.front().where + ": " + diagnostics.front().message);
  });
}

asymac_status asymac_env_bias_csv(const asymac_env* env, const char* history, int depth, char** out_csv) {
  REQUIRE_ARG(env && history && out_csv, "null argument");
  REQUIRE_ARG(depth >= 0, "depth must be nonnegative");
  return guarded([&] {
    const auto& p = env->env.pomdp;
    const auto h = harness::parse_history(history);
    const auto policy = p.n_actions == p.n_obs
                            ? oracle::TabularPolicy::last_observation(p.n_actions)
                            : oracle::TabularPolicy::reactive(std::vector<std::vector<double>>(
                                  p.n_obs, std::vector<double>(p.n_actions, 1.0 / p.n_actions)));
    return put(out_csv, harness::bias_csv(oracle::bias_report(p, policy, h, oracle::Horizon{depth})));
  });
}

asymac_status asymac_config_merge(const char* base, const char* overrides, char** out_config) {
  REQUIRE_ARG(base && overrides && out_config, "null argument");
  return guarded([&] { return put(out_config, harness::merge_config_text(base, overrides)); });
}

asymac_status asymac_config_resolve(const char* config_text, char** out_config) {
  REQUIRE_ARG(config_text && out_config, "null argument");
  return guarded([&] { return put(out_config, harness::experiment_from_text(config_text).to_config()); });
}

asymac_status asymac_run_experiment(const char* config_text, char** out_json) {
  REQUIRE_ARG(config_text && out_json, "null argument");
  return guarded([&] {
    const auto result = harness::run_experiment(harness::experiment_from_text(config_text));
    const auto st = put(out_json, curve_summary(result).dump(2));
    if (st != ASYMAC_OK) return st;
    return result.any_diverged ? fail(ASYMAC_VERIFY_FAILED, "at least one seed diverged") : ASYMAC_OK;
  });
}

asymac_status asymac_grid_search(const char* config_text, char** out_json) {
  REQUIRE_ARG(config_text && out_json, "null argument");
  return guarded([&] {
    const auto cells = harness::grid_search(harness::grid_from_text(config_text));
    json j = json::array();
    for (const auto& c : cells)
      j.push_back({{"lr_actor", c.hp.lr_actor}, {"lr_critic", c.hp.lr_critic}, {"lambda0", c.hp.lambda0},
                   {"mean_final", c.mean}, {"sem_final", c.sem}, {"any_diverged", c.any_diverged}, {"dir", c.dir}});
    return put(out_json, j.dump(2));
  });
}

asymac_status asymac_aggregate_run(const char* run_dir, char** out_csv) {
  REQUIRE_ARG(run_dir && out_csv, "null argument");
  return guarded([&] {
    namespace fs = std::filesystem;
    if (!fs::is_directory(run_dir)) return fail(ASYMAC_IO_ERROR, std::string("not a directory: ") + run_dir);
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(run_dir)) {
      const auto name = e.path().filename().string();
      if (name.rfind("curve_seed", 0) == 0 && e.path().extension() == ".csv") files.push_back(e.path().string());
    }
    if (files.empty()) return fail(ASYMAC_IO_ERROR, std::string("no curve files in ") + run_dir);
    std::sort(files.begin(), files.end());
    std::vector<agent::LearningCurve> curves;
    for (const auto& f : files) curves.push_back(read_curve(f));
    return put(out_csv, harness::aggregate_csv(harness::aggregate_curves(curves)));
  });
}

asymac_status asymac_verify_commands(char** out_json) {
  REQUIRE_ARG(out_json, "out_json is null");
  return guarded([&] { return put(out_json, json(harness::verify_commands()).dump()); });
}

asymac_status asymac_verify(const char* command, double gamma, uint64_t seed, int count, char** out_json) {
  REQUIRE_ARG(command && out_json, "null argument");
  return guarded([&] {
    harness::VerifyOptions opt;
    opt.gamma = gamma;
    opt.seed = seed;
    opt.count = count > 0 ? count : 0;
    const auto report = harness::verify(command, opt);
    const auto st = put(out_json, report.to_json().dump(2));
    if (st != ASYMAC_OK) return st;
    return report.pass ? ASYMAC_OK : fail(ASYMAC_VERIFY_FAILED, std::string("verify ") + command + " failed");
  });
}

asymac_status asymac_agent_load(const char* checkpoint_path, const asymac_env* env, asymac_agent** out) {
  REQUIRE_ARG(checkpoint_path && out, "null argument");
  return guarded([&] {
    auto a = std::make_unique<asymac_agent>();
    a->checkpoint = nn::Checkpoint::load(checkpoint_path);
    if (env) {
      a->env = env->env;
    } else {
      if (!a->checkpoint.meta.count("env")) return fail(ASYMAC_CONFIG_ERROR, "checkpoint names no environment");
      try {
        a->env = envs::make_environment(a->checkpoint.get("env"));
      } catch (const std::invalid_argument& e) {
        return fail(ASYMAC_CONFIG_ERROR, std::string(e.what()) + " (pass the environment explicitly)");
      }
    }
    a->nets = std::make_unique<agent::AgentNets>(agent::load_nets(a->checkpoint, a->env.pomdp));
    *out = a.release();
    return ASYMAC_OK;
  });
}

void asymac_agent_free(asymac_agent* agent) { delete agent; }

asymac_status asymac_agent_describe(const asymac_agent* a, char** out_json) {
  REQUIRE_ARG(a && out_json, "null argument");
  return guarded([&] {
    const json j{{"env", a->env.name},
                 {"critic", agent::short_name(a->nets->kind())},
                 {"timestep", a->checkpoint.meta.count("timestep") ? std::stoll(a->checkpoint.get("timestep")) : 0}};
    return put(out_json, j.dump(2));
  });
}

asymac_status asymac_agent_action_probabilities(const asymac_agent* a, const char* history, double* out,
                                                size_t capacity) {
  REQUIRE_ARG(a && history && out, "null argument");
  return guarded([&] {
    const auto probs = a->nets->action_probabilities(harness::parse_history(history));
    if (capacity < probs.size()) return fail(ASYMAC_INVALID_ARGUMENT, "output buffer too small");
    std::copy(probs.begin(), probs.end(), out);
    return ASYMAC_OK;
  });
}

asymac_status asymac_agent_critic_value(const asymac_agent* a, const char* history, int state, double* out) {
  REQUIRE_ARG(a && history && out, "null argument");
  return guarded([&] {
    const auto values =
        agent::probe_critic(*a->nets, a->env.pomdp, {{"probe", harness::parse_history(history), state}});
    *out = values.front();
    return ASYMAC_OK;
  });
}

asymac_status asymac_agent_fork_probes_csv(const asymac_agent* a, char** out_csv) {
  REQUIRE_ARG(a && out_csv, "null argument");
  return guarded([&] {
    int n = 0;
    if (a->env.name == "heavenhell-3") n = 3;
    if (a->env.name == "heavenhell-4") n = 4;
    if (n == 0) return fail(ASYMAC_INVALID_ARGUMENT, "fork probes exist only for heavenhell-3 and heavenhell-4");
    const auto probes = agent::heavenhell_fork_probes(n);
    const auto values = agent::probe_critic(*a->nets, a->env.pomdp, probes);
    const long long t = a->checkpoint.meta.count("timestep") ? std::stoll(a->checkpoint.get("timestep")) : 0;
    std::vector<harness::ProbeRecord> records;
    for (std::size_t i = 0; i < probes.size(); ++i)
      records.push_back({t, probes[i].id, agent::short_name(a->nets->kind()), values[i]});
    return put(out_csv, harness::probe_csv(records));
  });
}

}  // extern "C"
