/* Exercises the C API from C: handles, status codes, owned strings. */
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "asymac/asymac.h"

static int failures = 0;

#define EXPECT(cond)                                              \
  do {                                                            \
    if (!(cond)) {                                                \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                 \
    }                                                             \
  } while (0)

int main(void) {
  char* text = NULL;

  EXPECT(strlen(asymac_version()) > 0);

  EXPECT(asymac_list_environments(&text) == ASYMAC_OK);
  EXPECT(strstr(text, "heavenhell-4") != NULL);
  asymac_string_free(text);

  asymac_env* env = NULL;
  EXPECT(asymac_env_create("nowhere", &env) == ASYMAC_CONFIG_ERROR);
  EXPECT(env == NULL);
  EXPECT(strstr(asymac_last_error(), "nowhere") != NULL);
  EXPECT(asymac_env_create(NULL, &env) == ASYMAC_INVALID_ARGUMENT);

  EXPECT(asymac_env_create("heavenhell-3", &env) == ASYMAC_OK);
  EXPECT(asymac_env_describe(env, &text) == ASYMAC_OK);
  EXPECT(strstr(text, "\"states\": 28") != NULL);
  asymac_string_free(text);
  asymac_env_free(env);

  EXPECT(asymac_env_load_file("/nonexistent/file.pomdp", &env) == ASYMAC_IO_ERROR);

  EXPECT(asymac_env_create("goodbad", &env) == ASYMAC_OK);
  EXPECT(asymac_env_bias_csv(env, "0", 60, &text) == ASYMAC_OK);
  EXPECT(strncmp(text, "v_h,e_vhs,gap_hs,e_vs,gap_state\n", 32) == 0);
  asymac_string_free(text);
  EXPECT(asymac_env_bias_csv(env, "0;5", 60, &text) == ASYMAC_CONFIG_ERROR);
  asymac_env_free(env);

  EXPECT(asymac_verify("goodbad", 0.9, 1, 0, &text) == ASYMAC_OK);
  EXPECT(strstr(text, "\"PASS\"") != NULL);
  asymac_string_free(text);
  EXPECT(asymac_verify("nothing", 0.9, 1, 0, &text) == ASYMAC_CONFIG_ERROR);

  EXPECT(asymac_config_resolve("[train]\nbogus = 1\n", &text) == ASYMAC_CONFIG_ERROR);
  EXPECT(asymac_config_merge("[train]\nlambda0 = 0.1\n", "[train]\nlambda0 = 0.3\n", &text) == ASYMAC_OK);
  EXPECT(strstr(text, "lambda0 = 0.3") != NULL);
  asymac_string_free(text);

  /* Tiny run, then load its checkpoint and query the agent. */
  const char* out_dir = "capi_run";
  char cfg[512];
  snprintf(cfg, sizeof cfg,
           "[experiment]\nenv = goodbad\ncritic = s\nseeds = 5\nout = %s\n[train]\nmax_timesteps = 200\n"
           "[net]\nembedding = 4\nhidden = 4\nmlp = 8\n",
           out_dir);
  EXPECT(asymac_run_experiment(cfg, &text) == ASYMAC_OK);
  EXPECT(strstr(text, "\"seed\": 5") != NULL);
  asymac_string_free(text);

  EXPECT(asymac_aggregate_run(out_dir, &text) == ASYMAC_OK);
  EXPECT(strncmp(text, "bucket_end,runs,mean,sem\n", 25) == 0);
  asymac_string_free(text);

  asymac_agent* agent = NULL;
  EXPECT(asymac_agent_load("capi_run/checkpoint_seed5.txt", NULL, &agent) == ASYMAC_OK);
  double probs[2] = {0, 0};
  EXPECT(asymac_agent_action_probabilities(agent, "0;1,1", probs, 2) == ASYMAC_OK);
  EXPECT(probs[0] > 0 && probs[1] > 0 && probs[0] + probs[1] > 0.999999 && probs[0] + probs[1] < 1.000001);
  EXPECT(asymac_agent_action_probabilities(agent, "0", probs, 1) == ASYMAC_INVALID_ARGUMENT);
  double v1 = 0, v2 = 0;
  EXPECT(asymac_agent_critic_value(agent, "0;1,1", 1, &v1) == ASYMAC_OK);
  EXPECT(asymac_agent_critic_value(agent, "1;0,1", 1, &v2) == ASYMAC_OK);
  EXPECT(v1 == v2); /* state critic ignores the history */
  /* Observation b at the start rules out state G. */
  EXPECT(asymac_agent_critic_value(agent, "1", 0, &v1) == ASYMAC_UNREALIZABLE);
  EXPECT(asymac_agent_critic_value(agent, "0;9,9", 0, &v1) == ASYMAC_INVALID_ARGUMENT);
  EXPECT(asymac_agent_fork_probes_csv(agent, &text) == ASYMAC_INVALID_ARGUMENT);
  asymac_agent_free(agent);

  EXPECT(asymac_agent_load("missing_checkpoint.txt", NULL, &agent) == ASYMAC_IO_ERROR);

  if (failures) fprintf(stderr, "%d failure(s)\n", failures);
  else printf("c api: all checks passed\n");
  return failures ? 1 : 0;
}
