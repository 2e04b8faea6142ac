#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "asymac/pomdp.hpp"

namespace asymac::oracle {

/// The history (or history-state pair, or timed state) has zero probability.
class Unrealizable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A state value was requested in a regime where it is not well defined
/// (non-reactive policy, or observations that depend on more than s').
class IllDefinedValue : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Belief = std::vector<double>;

/// Belief before any evidence (the initial state distribution).
Belief prior(const Pomdp& pomdp);

/// Pr(o | b, a) = sum_s b(s) sum_s' T(s'|s,a) O(o|s,a,s').
double observation_probability(const Pomdp& pomdp, const Belief& b, int action, int observation);

/// Bayes step b'(s') proportional to sum_s b(s) T(s'|s,a) O(o|s,a,s').
Belief belief_update(const Pomdp& pomdp, const Belief& b, int action, int observation);

/// Conditions the prior on the pre-action observation.
Belief condition_initial(const Pomdp& pomdp, const Belief& b, int observation);

/// Fold of belief_update from the prior. Throws Unrealizable.
Belief belief_of_history(const Pomdp& pomdp, const History& h);

/// Pr(h) under the POMDP and policy-free observation model (actions in h are
/// taken as given).
double history_evidence(const Pomdp& pomdp, const History& h);

/// Tabular policies over histories.
///
/// Reactive policies read only the last observation; histories with no
/// observation yet use a dedicated row. Historyful policies are arbitrary
/// functions of the whole history. Softmax policies hold logits theta[h][a]
/// (missing rows are all-zero logits, i.e. uniform).
class TabularPolicy {
 public:
  enum class Kind { Reactive, Historyful, Softmax };
  using Theta = std::map<History, std::vector<double>>;

  static TabularPolicy reactive(std::vector<std::vector<double>> rows_by_observation,
                                std::vector<double> no_observation_row = {});
  static TabularPolicy historyful(int n_actions, std::function<std::vector<double>(const History&)> fn);
  static TabularPolicy softmax(int n_actions, Theta theta);

  /// pi(a; h) = 1[a = o_h] for POMDPs with matching action/observation sets.
  static TabularPolicy last_observation(int n_symbols);

  Kind kind() const { return kind_; }
  int n_actions() const { return n_actions_; }

  std::vector<double> probabilities(const History& h) const;

  /// The part of h the policy reads; two histories with the same context get
  /// the same action distribution now and after any common continuation.
  std::string context(const History& h) const;

  /// Reactive only: row for observation o (o == -1 for "no observation").
  const std::vector<double>& reactive_row(int o) const;
  const Theta& theta() const { return theta_; }

  HistoryPolicy as_function() const;

 private:
  Kind kind_ = Kind::Historyful;
  int n_actions_ = 0;
  std::vector<std::vector<double>> rows_;
  std::vector<double> no_obs_row_;
  std::function<std::vector<double>(const History&)> fn_;
  Theta theta_;
};

/// Number of reward terms kept in truncated sums; truncation error is at
/// most gamma^depth * max|R| / (1 - gamma).
struct Horizon {
  int depth = 0;
};

struct OracleOptions {
  std::size_t node_budget = 200'000'000;
};

/// Exact truncated history and history-state values for one (POMDP, policy)
/// pair, memoized across calls. Not thread-safe; use one per thread.
class ValueOracle {
 public:
  ValueOracle(const Pomdp& pomdp, TabularPolicy policy, OracleOptions options = {});

  double v_history(const History& h, Horizon hz);
  double q_history(const History& h, int action, Horizon hz);
  double v_history_state(const History& h, int state, Horizon hz);
  double q_history_state(const History& h, int state, int action, Horizon hz);

  /// Belief-free variants used when the caller already knows the pair is
  /// realizable (e.g. from a forward enumeration).
  double v_hs_unchecked(const History& h, int state, int depth);
  double q_hs_unchecked(const History& h, int state, int action, int depth);
  double q_h_with_belief(const History& h, const Belief& b, int action, int depth);

  const Pomdp& pomdp() const { return pomdp_; }
  const TabularPolicy& policy() const { return policy_; }
  std::size_t nodes_visited() const { return nodes_; }

 private:
  double v_h(const History& h, const Belief& b, int depth);
  const std::vector<double>& v_hs_all(const History& h, int depth);
  std::vector<double> q_hs_row(const History& h, int action, int depth);
  void charge();

  const Pomdp& pomdp_;
  TabularPolicy policy_;
  OracleOptions options_;
  std::size_t nodes_ = 0;
  std::unordered_map<std::string, double> memo_h_;
  std::unordered_map<std::string, std::vector<double>> memo_hs_;
};

double v_history(const Pomdp& pomdp, const TabularPolicy& policy, const History& h, Horizon hz);
double q_history(const Pomdp& pomdp, const TabularPolicy& policy, const History& h, int action, Horizon hz);
double v_history_state(const Pomdp& pomdp, const TabularPolicy& policy, const History& h, int state, Horizon hz);

/// Infinite-horizon state values of a reactive policy, solving
/// V = r_pi + gamma P_pi V. Throws IllDefinedValue unless the policy is
/// reactive and observations depend on the arrival state only.
std::vector<double> v_state_reactive(const Pomdp& pomdp, const TabularPolicy& policy);

/// Joint distribution of (S_t, policy context) after t steps, grouped by the
/// policy's context so equal-behaving histories are merged.
struct TimedLayer {
  struct Entry {
    History representative;
    std::vector<double> joint;  // Pr(S_t = s, context)
  };
  std::vector<Entry> entries;

  std::vector<double> state_marginal(int n_states) const;
  /// Pr(A_t = a | S_t = s), row-major [s][a]; rows of unreachable states are zero.
  std::vector<double> action_given_state(const TabularPolicy& policy, int n_states) const;
};

TimedLayer timed_layer_zero(const Pomdp& pomdp, const TabularPolicy& policy);
TimedLayer advance_timed_layer(const Pomdp& pomdp, const TabularPolicy& policy, const TimedLayer& layer,
                               std::size_t budget = 10'000'000);

/// Timed state value V_t(s) = E[G_t | S_t = s] = sum_a Pr(A_t = a | S_t = s)
/// Q_t(s, a), with the action distribution integrated over length-t
/// histories only. Truncated at the horizon. Throws Unrealizable when
/// Pr(S_t = s) = 0.
double v_timed_state(const Pomdp& pomdp, const TabularPolicy& policy, int t, int state, Horizon hz);

/// All timed values V_t(.) at once (entries for unreachable states are NaN).
std::vector<double> v_timed_states(const Pomdp& pomdp, const TabularPolicy& policy, int t, Horizon hz);

struct BiasReport {
  double v_h = 0.0;
  std::optional<double> e_vs;  // empty when V(s) is ill-defined
  double e_vhs = 0.0;
  std::optional<double> gap_state;
  double gap_hs = 0.0;
};

BiasReport bias_report(const Pomdp& pomdp, const TabularPolicy& policy, const History& h, Horizon hz);

/// E_{s|h}[V(s)] versus its one-step bootstrap on the good/bad POMDP at
/// h = [g] with the last-observation policy.
struct GoodBadContradiction {
  double belief_good = 0.0;
  double belief_bad = 0.0;
  double prob_obs_good = 0.0;
  double prob_obs_bad = 0.0;
  double v_good = 0.0;
  double v_bad = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double gap = 0.0;
};

GoodBadContradiction goodbad_contradiction(double gamma);

enum class GradientMode { Symmetric, Asymmetric };

/// d(loss)/d(theta[h][a]) with loss = -E[sum_{t<depth} gamma^t R_t]. Rows are
/// present for every realizable history of length < depth.
struct PolicyGradient {
  std::map<History, std::vector<double>> rows;

  double max_abs_difference(const PolicyGradient& other) const;
};

/// Exact policy gradient by summing over the full trajectory tree. The
/// symmetric route weights grad log pi by Q(h, a) over Pr(h); the asymmetric
/// route weights it by Q(h, s, a) over Pr(h, s).
PolicyGradient exact_policy_gradient(const Pomdp& pomdp, const TabularPolicy& policy, Horizon hz, GradientMode mode,
                                     std::size_t budget = 5'000'000);

/// E[sum_{t<depth} gamma^t R_t] from the start of an episode.
double expected_return(const Pomdp& pomdp, const TabularPolicy& policy, Horizon hz);

/// Every history of length <= max_length whose observations have nonzero
/// probability given its actions, paired with that evidence probability.
std::vector<std::pair<History, double>> realizable_histories(const Pomdp& pomdp, int max_length);

}  // namespace asymac::oracle
