#ifndef ASYMAC_ASYMAC_H
#define ASYMAC_ASYMAC_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ASYMAC_API __declspec(dllexport)
#else
#define ASYMAC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Every function returns a status. On failure, asymac_last_error() holds a
 * message for the calling thread until its next call into the library. */
typedef enum asymac_status {
  ASYMAC_OK = 0,
  ASYMAC_VERIFY_FAILED = 1, /* call succeeded, the checked property did not hold */
  ASYMAC_CONFIG_ERROR = 2,  /* malformed config, environment or history */
  ASYMAC_INVALID_ARGUMENT = 3,
  ASYMAC_IO_ERROR = 4,
  ASYMAC_UNREALIZABLE = 5, /* probe state has zero belief after its history */
  ASYMAC_INTERNAL_ERROR = 6
} asymac_status;

typedef struct asymac_env asymac_env;
typedef struct asymac_agent asymac_agent;

ASYMAC_API const char* asymac_version(void);
ASYMAC_API const char* asymac_last_error(void);
ASYMAC_API const char* asymac_status_name(asymac_status status);

/* Strings returned through char** out-parameters are owned by the caller. */
ASYMAC_API void asymac_string_free(char* s);

/* JSON array of built-in environment names. */
ASYMAC_API asymac_status asymac_list_environments(char** out_json);

/* Environments ------------------------------------------------------------- */

ASYMAC_API asymac_status asymac_env_create(const char* name, asymac_env** out);
ASYMAC_API asymac_status asymac_env_load_file(const char* path, asymac_env** out);
ASYMAC_API void asymac_env_free(asymac_env* env);

/* JSON object: name, states, actions, observations, gamma, initial
 * observation flag, terminal count and validation diagnostics. Returns
 * ASYMAC_CONFIG_ERROR when diagnostics are nonempty. */
ASYMAC_API asymac_status asymac_env_describe(const asymac_env* env, char** out_json);

/* One-row bias CSV (v_h,e_vhs,gap_hs,e_vs,gap_state) for a history under
 * the last-observation policy when actions and observations coincide, the
 * uniform reactive policy otherwise. History syntax: "o0;a,o;a,o". */
ASYMAC_API asymac_status asymac_env_bias_csv(const asymac_env* env, const char* history, int depth, char** out_csv);

/* Experiments (config text uses the documented key = value format) ---------- */

/* Keys in overrides replace those in base (both in config format). */
ASYMAC_API asymac_status asymac_config_merge(const char* base, const char* overrides, char** out_config);

/* Resolves defaults and echoes the full config. */
ASYMAC_API asymac_status asymac_config_resolve(const char* config_text, char** out_config);

/* Trains every seed and writes artifacts under the configured output
 * directory. out_json summarizes per-seed finals. Returns
 * ASYMAC_VERIFY_FAILED when any seed diverged. */
ASYMAC_API asymac_status asymac_run_experiment(const char* config_text, char** out_json);

/* Runs the grid and returns the ranking as JSON (best first). */
ASYMAC_API asymac_status asymac_grid_search(const char* config_text, char** out_json);

/* Recomputes the aggregate CSV from the curve_seed*.csv files of a run
 * directory. */
ASYMAC_API asymac_status asymac_aggregate_run(const char* run_dir, char** out_csv);

/* Verification ---------------------------------------------------------------- */

/* JSON array of command names. */
ASYMAC_API asymac_status asymac_verify_commands(char** out_json);

/* count <= 0 selects the command default. Returns ASYMAC_OK on PASS and
 * ASYMAC_VERIFY_FAILED on FAIL; the report is written in both cases. */
ASYMAC_API asymac_status asymac_verify(const char* command, double gamma, uint64_t seed, int count,
                                       char** out_json);

/* Agents ---------------------------------------------------------------------- */

/* Loads a checkpoint. env may be NULL, in which case the checkpoint's
 * environment name is resolved. */
ASYMAC_API asymac_status asymac_agent_load(const char* checkpoint_path, const asymac_env* env, asymac_agent** out);
ASYMAC_API void asymac_agent_free(asymac_agent* agent);

/* JSON object: env, critic kind, timestep. */
ASYMAC_API asymac_status asymac_agent_describe(const asymac_agent* agent, char** out_json);

ASYMAC_API asymac_status asymac_agent_action_probabilities(const asymac_agent* agent, const char* history,
                                                           double* out, size_t capacity);

/* Raw critic output for (history, state); state is ignored by history-only
 * critics but must still be realizable. */
ASYMAC_API asymac_status asymac_agent_critic_value(const asymac_agent* agent, const char* history, int state,
                                                   double* out);

/* Probe CSV (timestep,probe_id,kind,value) over the four Heaven-Hell fork
 * probes. ASYMAC_INVALID_ARGUMENT for other environments. */
ASYMAC_API asymac_status asymac_agent_fork_probes_csv(const asymac_agent* agent, char** out_csv);

#ifdef __cplusplus
}
#endif

#endif
