#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "asymac/agent.hpp"
#include "asymac/envs.hpp"
#include "asymac/oracle.hpp"

namespace asymac::harness {

/// Malformed or inconsistent configuration (CLI exit status 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string version();

// Hyperparameters ------------------------------------------------------------

struct Hyperparameters {
  double lr_actor = 1e-3;
  double lr_critic = 1e-3;
  double lambda0 = 0.1;
};

/// Grid-search winners for the four tabular environments. The belief-sampled
/// kind inherits the history-state cell. Empty for other environments.
std::optional<Hyperparameters> table3_defaults(const std::string& env, agent::CriticKind kind);

/// Default lambda0 search set per environment family.
std::vector<double> default_lambda_grid(const std::string& env);

// Experiment specs and config files -------------------------------------------

/// Config file: '#' comments, [section] headers, 'key = value' lines.
///
///   [experiment]  env, pomdp_file, critic, seeds, out, workers
///   [train]       lr_actor, lr_critic, lambda0, entropy_decay_steps,
///                 episodes_per_update, episode_cap, target_period,
///                 max_timesteps, gamma_t_weighting, stop_at_rolling100
///   [net]         embedding, hidden, mlp
///   [grid]        lr_actor, lr_critic, lambda0 (comma lists), seeds
///   [provenance]  version (written into manifests, ignored on read)
///
/// Unknown sections or keys are errors.
struct ExperimentSpec {
  std::string env = "goodbad";
  std::string pomdp_file;  // when set, the environment is loaded from here
  agent::CriticKind kind = agent::CriticKind::HistoryState;
  agent::TrainConfig train;
  std::vector<std::uint64_t> seeds{0};
  std::string out_dir;  // default: <output root>/<env>-<critic>
  int workers = 1;

  std::string to_config() const;
};

struct GridSearchSpec {
  ExperimentSpec base;
  std::vector<double> lr_actor{1e-4, 3e-4, 1e-3};
  std::vector<double> lr_critic{1e-4, 3e-4, 1e-3};
  std::vector<double> lambda0;

  std::size_t cells() const { return lr_actor.size() * lr_critic.size() * lambda0.size(); }
};

/// Parsed config before defaults are applied: every key that was present.
struct ParsedConfig {
  std::map<std::string, std::map<std::string, std::string>> sections;
};
ParsedConfig parse_config_text(const std::string& text);
/// Keys in `overrides` replace or extend those in `base`; returns config text.
std::string merge_config_text(const std::string& base, const std::string& overrides);

/// Output root for specs without an explicit `out`: $ASYMAC_OUT, else "runs".
std::string default_output_root();

/// Builds a spec: file values override Table 3 defaults, which override the
/// built-in TrainConfig defaults.
ExperimentSpec experiment_from_config(const ParsedConfig& cfg);
ExperimentSpec experiment_from_text(const std::string& text);
GridSearchSpec grid_from_text(const std::string& text);

envs::Environment resolve_environment(const ExperimentSpec& spec);

// Running --------------------------------------------------------------------

struct SeedResult {
  std::uint64_t seed = 0;
  agent::TrainResult result;
};

struct AggregatePoint {
  long long bucket_end = 0;
  int runs = 0;
  double mean = 0.0;
  double sem = 0.0;
};

/// Bucketed mean and standard error of the rolling-100 return over runs.
/// A run contributes to every bucket up to the one holding its last episode,
/// with the rolling value of its last episode at or before the bucket end.
std::vector<AggregatePoint> aggregate_curves(const std::vector<agent::LearningCurve>& curves,
                                             long long bucket = 1000);

struct ExperimentResult {
  ExperimentSpec spec;
  std::vector<SeedResult> runs;
  std::vector<AggregatePoint> aggregate;
  double mean_final = 0.0;
  double sem_final = 0.0;
  bool any_diverged = false;
};

/// Trains every seed (up to spec.workers at once) and writes under
/// spec.out_dir: manifest.cfg, curve_seed<k>.csv, checkpoint_seed<k>.txt,
/// aggregate.csv, summary.csv and divergence_seed<k>.txt for diverged runs.
ExperimentResult run_experiment(const ExperimentSpec& spec);

struct GridCell {
  Hyperparameters hp;
  std::string dir;
  double mean = 0.0;
  double sem = 0.0;
  bool any_diverged = false;
};

/// One experiment per cell in out_dir/cell_<i>; ranking.csv sorted by mean
/// final rolling-100 return, descending; ties go to the lower actor rate,
/// then the lower critic rate, then the lower lambda0.
std::vector<GridCell> grid_search(const GridSearchSpec& grid);
void rank_cells(std::vector<GridCell>& cells);

// Verification ----------------------------------------------------------------

struct VerifyOptions {
  double gamma = 0.9;
  std::uint64_t seed = 1;
  int count = 0;  // 0: command default
  /// Test hook for theorem5: perturbs one asymmetric gradient entry.
  bool corrupt = false;
};

struct VerifyReport {
  std::string command;
  bool pass = false;
  nlohmann::json details;
  nlohmann::json to_json() const;
};

/// goodbad, theorem2, theorem3, theorem4, theorem5, timed, gradcheck,
/// calibration. Throws ConfigError for unknown commands.
VerifyReport verify(const std::string& command, const VerifyOptions& options = {});
std::vector<std::string> verify_commands();

// Random problems used by the verification commands ---------------------------

struct RandomShape {
  int max_states = 4;
  int max_actions = 3;
  int max_obs = 3;
  bool state_only_observations = false;
};
Pomdp random_pomdp(Rng& rng, const RandomShape& shape);
/// Deterministic pseudo-random history-dependent policy.
oracle::TabularPolicy random_historyful_policy(int n_actions, std::uint64_t salt);
oracle::TabularPolicy random_softmax_policy(const Pomdp& pomdp, int depth, Rng& rng);

// CSV export ----------------------------------------------------------------

/// timestep,episode,return,rolling100
std::string curve_csv(const agent::LearningCurve& curve);
/// bucket_end,runs,mean,sem
std::string aggregate_csv(const std::vector<AggregatePoint>& points);
/// v_h,e_vhs,gap_hs,e_vs,gap_state (e_vs and gap_state empty when undefined)
std::string bias_csv(const oracle::BiasReport& report);

struct ProbeRecord {
  long long timestep = 0;
  std::string probe_id;
  std::string kind;
  double value = 0.0;
};
/// timestep,probe_id,kind,value
std::string probe_csv(const std::vector<ProbeRecord>& records);

std::string format_double(double v);
void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

/// History syntax: "o0" for an initial observation, then ";a,o" per step,
/// e.g. "9;0,8;0,5". A leading ";" means no initial observation.
History parse_history(const std::string& text);
std::string format_history(const History& h);

}  // namespace asymac::harness
