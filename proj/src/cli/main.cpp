#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "asymac/asymac.h"

namespace {

// Exit statuses: 0 success, 1 verification failure (or diverged run),
// 2 configuration/input error, 3 internal error.
int exit_code(asymac_status st) {
  switch (st) {
    case ASYMAC_OK: return 0;
    case ASYMAC_VERIFY_FAILED: return 1;
    case ASYMAC_INTERNAL_ERROR: return 3;
    default: return 2;
  }
}

// Owns a string returned by the library.
struct OwnedString {
  char* ptr = nullptr;
  ~OwnedString() { asymac_string_free(ptr); }
  std::string str() const { return ptr ? ptr : ""; }
};

int report_error(asymac_status st) {
  std::cerr << "asymac: " << asymac_status_name(st) << ": " << asymac_last_error() << "\n";
  return exit_code(st);
}

bool emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << "\n";
    return true;
  }
  std::ofstream out(out_path, std::ios::binary);
  out << text;
  if (!out) {
    std::cerr << "asymac: cannot write " << out_path << "\n";
    return false;
  }
  return true;
}

std::optional<std::string> read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CommonFlags {
  std::string config;
  std::string env;
  std::string pomdp_file;
  std::string critic;
  std::optional<long long> seed;
  std::string seeds;
  std::optional<long long> max_steps;
  std::string lr_actor;
  std::string lr_critic;
  std::string lambda0;
  std::string out;
  std::optional<int> workers;
};

void add_experiment_flags(CLI::App* cmd, CommonFlags& f, bool grid) {
  cmd->add_option("--config", f.config, "Config file; flags override its keys");
  cmd->add_option("--env", f.env, "Environment name");
  cmd->add_option("--pomdp-file", f.pomdp_file, "Load the environment from a POMDP file");
  cmd->add_option("--critic", f.critic, "Critic kind")->check(CLI::IsMember({"h", "s", "hs", "hs-sampled", "h2", "h4"}));
  cmd->add_option("--seed", f.seed, "Single seed");
  cmd->add_option("--seeds", f.seeds, "Comma-separated seeds");
  cmd->add_option("--max-steps", f.max_steps, "Timestep budget per seed");
  const char* rate_help = grid ? "Comma-separated values to search" : "Value";
  cmd->add_option("--lr-actor", f.lr_actor, std::string("Actor learning rate. ") + rate_help);
  cmd->add_option("--lr-critic", f.lr_critic, std::string("Critic learning rate. ") + rate_help);
  cmd->add_option("--lambda0", f.lambda0, std::string("Initial negentropy weight. ") + rate_help);
  cmd->add_option("--out", f.out, "Output directory (default: $ASYMAC_OUT/<env>-<critic>)");
  cmd->add_option("--workers", f.workers, "Seeds (or cells) trained in parallel")->check(CLI::PositiveNumber);
}

// Config text from the file plus flag overrides.
std::optional<std::string> compose_config(const CommonFlags& f, bool grid, int& status) {
  std::string base;
  if (!f.config.empty()) {
    auto text = read_text(f.config);
    if (!text) {
      std::cerr << "asymac: cannot read " << f.config << "\n";
      status = 2;
      return std::nullopt;
    }
    base = *text;
  }
  std::ostringstream o;
  o << "[experiment]\n";
  if (!f.env.empty()) o << "env = " << f.env << "\n";
  if (!f.pomdp_file.empty()) o << "pomdp_file = " << f.pomdp_file << "\n";
  if (!f.critic.empty()) o << "critic = " << f.critic << "\n";
  if (f.seed) o << "seeds = " << *f.seed << "\n";
  else if (!f.seeds.empty()) o << "seeds = " << f.seeds << "\n";
  if (!f.out.empty()) o << "out = " << f.out << "\n";
  if (f.workers) o << "workers = " << *f.workers << "\n";
  o << "[train]\n";
  if (f.max_steps) o << "max_timesteps = " << *f.max_steps << "\n";
  if (!grid) {
    if (!f.lr_actor.empty()) o << "lr_actor = " << f.lr_actor << "\n";
    if (!f.lr_critic.empty()) o << "lr_critic = " << f.lr_critic << "\n";
    if (!f.lambda0.empty()) o << "lambda0 = " << f.lambda0 << "\n";
  } else {
    o << "[grid]\n";
    if (!f.lr_actor.empty()) o << "lr_actor = " << f.lr_actor << "\n";
    if (!f.lr_critic.empty()) o << "lr_critic = " << f.lr_critic << "\n";
    if (!f.lambda0.empty()) o << "lambda0 = " << f.lambda0 << "\n";
  }
  OwnedString merged;
  const auto st = asymac_config_merge(base.c_str(), o.str().c_str(), &merged.ptr);
  if (st != ASYMAC_OK) {
    status = report_error(st);
    return std::nullopt;
  }
  return merged.str();
}

int run_train(const CommonFlags& f) {
  int status = 0;
  const auto cfg = compose_config(f, false, status);
  if (!cfg) return status;
  OwnedString summary;
  const auto st = asymac_run_experiment(cfg->c_str(), &summary.ptr);
  if (summary.ptr) std::cout << summary.str() << "\n";
  return st == ASYMAC_OK ? 0 : report_error(st);
}

int run_grid(const CommonFlags& f) {
  int status = 0;
  const auto cfg = compose_config(f, true, status);
  if (!cfg) return status;
  OwnedString ranking;
  const auto st = asymac_grid_search(cfg->c_str(), &ranking.ptr);
  if (st != ASYMAC_OK) return report_error(st);
  std::cout << ranking.str() << "\n";
  return 0;
}

int run_verify(const std::string& command, double gamma, std::uint64_t seed, int count, const std::string& out) {
  std::vector<std::string> commands;
  if (command == "all") {
    OwnedString list;
    asymac_verify_commands(&list.ptr);
    // ["a","b",...]
    std::string s = list.str();
    for (std::size_t i = 0; (i = s.find('"', i)) != std::string::npos;) {
      const auto j = s.find('"', i + 1);
      commands.push_back(s.substr(i + 1, j - i - 1));
      i = j + 1;
    }
  } else {
    commands.push_back(command);
  }
  int worst = 0;
  std::string reports = commands.size() > 1 ? "[\n" : "";
  for (std::size_t i = 0; i < commands.size(); ++i) {
    OwnedString report;
    const auto st = asymac_verify(commands[i].c_str(), gamma, seed, count, &report.ptr);
    if (st != ASYMAC_OK && st != ASYMAC_VERIFY_FAILED) return report_error(st);
    std::cerr << commands[i] << ": " << (st == ASYMAC_OK ? "PASS" : "FAIL") << "\n";
    reports += report.str() + (i + 1 < commands.size() ? ",\n" : "\n");
    worst = std::max(worst, exit_code(st));
  }
  if (commands.size() > 1) reports += "]\n";
  if (!emit(reports, out)) return 2;
  return worst;
}

struct EnvHandle {
  asymac_env* ptr = nullptr;
  ~EnvHandle() { asymac_env_free(ptr); }
};

// Opens --pomdp-file if given, else --env; status 0 with a null handle when neither is set.
asymac_status open_env(const std::string& env, const std::string& pomdp_file, EnvHandle& h) {
  if (!pomdp_file.empty()) return asymac_env_load_file(pomdp_file.c_str(), &h.ptr);
  if (!env.empty()) return asymac_env_create(env.c_str(), &h.ptr);
  return ASYMAC_OK;
}

struct AgentHandle {
  asymac_agent* ptr = nullptr;
  ~AgentHandle() { asymac_agent_free(ptr); }
};

int run_probe(const std::string& checkpoint, const std::string& env, const std::string& pomdp_file,
              const std::string& history, std::optional<int> state, const std::string& out) {
  EnvHandle e;
  if (auto st = open_env(env, pomdp_file, e); st != ASYMAC_OK) return report_error(st);
  AgentHandle a;
  if (auto st = asymac_agent_load(checkpoint.c_str(), e.ptr, &a.ptr); st != ASYMAC_OK) return report_error(st);
  if (history.empty() && !state) {
    OwnedString csv;
    if (auto st = asymac_agent_fork_probes_csv(a.ptr, &csv.ptr); st != ASYMAC_OK) return report_error(st);
    return emit(csv.str(), out) ? 0 : 2;
  }
  double value = 0.0;
  if (auto st = asymac_agent_critic_value(a.ptr, history.c_str(), state.value_or(0), &value); st != ASYMAC_OK)
    return report_error(st);
  std::ostringstream line;
  line.precision(17);
  line << value << "\n";
  return emit(line.str(), out) ? 0 : 2;
}

int run_export(const std::string& what, const std::string& run_dir, const std::string& checkpoint,
               const std::string& env, const std::string& pomdp_file, const std::string& history, int depth,
               const std::string& out) {
  OwnedString text;
  asymac_status st = ASYMAC_OK;
  if (what == "aggregate") {
    if (run_dir.empty()) {
      std::cerr << "asymac: export aggregate needs --run\n";
      return 2;
    }
    st = asymac_aggregate_run(run_dir.c_str(), &text.ptr);
  } else if (what == "bias") {
    EnvHandle e;
    if (st = open_env(env, pomdp_file, e); st != ASYMAC_OK) return report_error(st);
    if (!e.ptr) {
      std::cerr << "asymac: export bias needs --env or --pomdp-file\n";
      return 2;
    }
    st = asymac_env_bias_csv(e.ptr, history.c_str(), depth, &text.ptr);
  } else {
    EnvHandle e;
    if (st = open_env(env, pomdp_file, e); st != ASYMAC_OK) return report_error(st);
    AgentHandle a;
    if (st = asymac_agent_load(checkpoint.c_str(), e.ptr, &a.ptr); st != ASYMAC_OK) return report_error(st);
    st = asymac_agent_fork_probes_csv(a.ptr, &text.ptr);
  }
  if (st != ASYMAC_OK) return report_error(st);
  return emit(text.str(), out) ? 0 : 2;
}

int run_validate(const std::string& env, const std::string& pomdp_file, bool list) {
  if (list) {
    OwnedString names;
    asymac_list_environments(&names.ptr);
    std::cout << names.str() << "\n";
    return 0;
  }
  if (env.empty() && pomdp_file.empty()) {
    std::cerr << "asymac: validate-env needs --env or --pomdp-file\n";
    return 2;
  }
  EnvHandle e;
  if (auto st = open_env(env, pomdp_file, e); st != ASYMAC_OK) return report_error(st);
  OwnedString description;
  const auto st = asymac_env_describe(e.ptr, &description.ptr);
  if (description.ptr) std::cout << description.str() << "\n";
  return st == ASYMAC_OK ? 0 : report_error(st);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asymmetric actor-critic experiments and exact verification"};
  app.set_version_flag("--version", asymac_version());
  app.require_subcommand(1);

  CommonFlags train_flags;
  auto* train = app.add_subcommand("train", "Train one configuration over one or more seeds");
  add_experiment_flags(train, train_flags, false);

  CommonFlags grid_flags;
  auto* grid = app.add_subcommand("grid", "Grid search over learning rates and lambda0");
  add_experiment_flags(grid, grid_flags, true);

  std::string verify_command;
  double gamma = 0.9;
  std::uint64_t verify_seed = 1;
  int count = 0;
  std::string verify_out;
  auto* verify = app.add_subcommand("verify", "Check a theorem or component against exact oracles");
  verify->add_option("command", verify_command,
                     "goodbad, theorem2, theorem3, theorem4, theorem5, timed, gradcheck, calibration or all")
      ->required();
  verify->add_option("--gamma", gamma, "Discount for good/bad based checks");
  verify->add_option("--seed", verify_seed, "Seed for random problems");
  verify->add_option("--count", count, "Number of random problems or episodes (0: default)");
  verify->add_option("--out", verify_out, "Write the JSON report here instead of stdout");

  std::string checkpoint, probe_env, probe_file, probe_history, probe_out;
  std::optional<int> probe_state;
  auto* probe = app.add_subcommand("probe", "Evaluate a trained critic on fork probes or a given history");
  probe->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  probe->add_option("--env", probe_env, "Environment (default: the one named in the checkpoint)");
  probe->add_option("--pomdp-file", probe_file, "Environment file");
  probe->add_option("--history", probe_history, "History, e.g. '9;0,8;0,5'");
  probe->add_option("--state", probe_state, "State paired with the history");
  probe->add_option("--out", probe_out, "Output file (default: stdout)");

  std::string what, run_dir, export_checkpoint, export_env, export_file, export_history, export_out;
  int depth = 60;
  auto* exp = app.add_subcommand("export", "Write plot-ready CSV");
  exp->add_option("artifact", what, "aggregate, bias or probes")
      ->required()
      ->check(CLI::IsMember({"aggregate", "bias", "probes"}));
  exp->add_option("--run", run_dir, "Run directory (aggregate)");
  exp->add_option("--checkpoint", export_checkpoint, "Checkpoint (probes)");
  exp->add_option("--env", export_env, "Environment (bias, probes)");
  exp->add_option("--pomdp-file", export_file, "Environment file (bias, probes)");
  exp->add_option("--history", export_history, "History (bias)");
  exp->add_option("--depth", depth, "Truncation depth (bias)");
  exp->add_option("--out", export_out, "Output file (default: stdout)");

  std::string validate_env, validate_file;
  bool list = false;
  auto* validate = app.add_subcommand("validate-env", "Check an environment's tables and print its dimensions");
  validate->add_option("--env", validate_env, "Environment name");
  validate->add_option("--pomdp-file", validate_file, "POMDP file");
  validate->add_flag("--list", list, "List built-in environments");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (train->parsed()) return run_train(train_flags);
  if (grid->parsed()) return run_grid(grid_flags);
  if (verify->parsed()) return run_verify(verify_command, gamma, verify_seed, count, verify_out);
  if (probe->parsed()) return run_probe(checkpoint, probe_env, probe_file, probe_history, probe_state, probe_out);
  if (exp->parsed())
    return run_export(what, run_dir, export_checkpoint, export_env, export_file, export_history, depth, export_out);
  if (validate->parsed()) return run_validate(validate_env, validate_file, list);
  return 2;
}
