#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace asymac {

/// Raised when a caller breaks an operation's preconditions (bad index,
/// malformed distribution handed back by a policy, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Sparse probability row: (index, probability) pairs sorted by index, no
/// zero entries.
using SparseRow = std::vector<std::pair<int, double>>;

/// One outcome of taking an action in a state: the next state, its
/// probability, and the distribution of observations emitted on arrival.
struct Outcome {
  int next = 0;
  double prob = 0.0;
  SparseRow observation;
};

/// Tabular POMDP <S, A, O, T, O, R, gamma, b0>.
///
/// Transitions are stored per (s, a) as the list of reachable next states,
/// each carrying the observation row O(. | s, a, s'). Observation rows for
/// unreachable (s, a, s') triples carry no probability mass and are not
/// stored. An optional initial emission table makes histories begin with a
/// pre-action observation drawn from O0(. | s0).
struct Pomdp {
  int n_states = 0;
  int n_actions = 0;
  int n_obs = 0;
  double gamma = 0.0;
  std::vector<double> initial;               // size n_states
  std::vector<std::vector<Outcome>> dynamics;  // size n_states * n_actions
  std::vector<double> reward;                // size n_states * n_actions
  std::vector<SparseRow> initial_emission;   // empty, or size n_states

  std::vector<std::string> state_labels;
  std::vector<std::string> action_labels;
  std::vector<std::string> obs_labels;

  const std::vector<Outcome>& outcomes(int s, int a) const {
    return dynamics[static_cast<std::size_t>(s) * n_actions + a];
  }
  std::vector<Outcome>& outcomes(int s, int a) {
    return dynamics[static_cast<std::size_t>(s) * n_actions + a];
  }
  double R(int s, int a) const { return reward[static_cast<std::size_t>(s) * n_actions + a]; }
  double& R(int s, int a) { return reward[static_cast<std::size_t>(s) * n_actions + a]; }

  /// T(s' | s, a).
  double T(int s, int a, int next) const;
  /// O(o | s, a, s'); zero when s' is unreachable from (s, a).
  double O(int s, int a, int next, int o) const;
  /// O0(o | s) for the pre-action observation; zero without initial emission.
  double O0(int s, int o) const;

  bool has_initial_observation() const { return !initial_emission.empty(); }

  /// True when O(o | s, a, s') depends on s' only (over reachable triples).
  bool observation_depends_on_next_state_only() const;

  /// Largest |R(s, a)|.
  double max_abs_reward() const;

  /// Allocates empty tables with the given dimensions.
  static Pomdp with_dimensions(int n_states, int n_actions, int n_obs, double gamma);
};

/// Episode termination: absorbing terminal states plus (state, action) pairs
/// whose transition ends the episode after the reward is paid.
struct TerminalSpec {
  std::set<int> terminal_states;
  std::set<std::pair<int, int>> terminal_transitions;

  bool empty() const { return terminal_states.empty() && terminal_transitions.empty(); }
  bool is_terminal_state(int s) const { return terminal_states.count(s) != 0; }
  bool ends_episode(int s, int a, int next) const {
    return terminal_transitions.count({s, a}) != 0 || terminal_states.count(next) != 0;
  }
};

struct Step {
  int action = 0;
  int observation = 0;
  auto operator<=>(const Step&) const = default;
};

/// Observable history: an optional pre-action observation followed by
/// (action, observation) pairs.
struct History {
  std::optional<int> initial_observation;
  std::vector<Step> steps;

  std::size_t length() const { return steps.size(); }
  bool empty() const { return !initial_observation && steps.empty(); }

  /// o_h, the most recent observation, if any.
  std::optional<int> last_observation() const {
    if (!steps.empty()) return steps.back().observation;
    return initial_observation;
  }

  /// hao.
  History extended(int action, int observation) const {
    History h = *this;
    h.steps.push_back({action, observation});
    return h;
  }

  /// The most recent k steps, keeping the initial observation only while it
  /// is still inside the window.
  History suffix(std::size_t k) const;

  /// Canonical byte encoding, usable as a hash-map key.
  std::string key() const;

  std::string to_string() const;

  auto operator<=>(const History&) const = default;
  bool operator==(const History&) const = default;
};

struct Trajectory {
  std::optional<int> initial_observation;
  std::vector<int> states;        // s_0 .. s_T
  std::vector<int> actions;       // a_0 .. a_{T-1}
  std::vector<int> observations;  // o_0 .. o_{T-1}, emitted after a_t
  std::vector<double> rewards;    // r_0 .. r_{T-1}
  bool truncated = false;

  std::size_t length() const { return actions.size(); }

  /// h_t: initial observation plus the first t (action, observation) pairs.
  History history(std::size_t t) const;
};

/// Seeded random stream. Draws are computed from raw 64-bit engine output so
/// they are bit-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Stream for one episode of one run: master seed, run index and episode
  /// index are mixed with splitmix64, in that order.
  static Rng for_episode(std::uint64_t master, std::uint64_t run, std::uint64_t episode);
  static std::uint64_t mix(std::uint64_t x);

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int categorical(std::span<const double> probs);
  int categorical(const SparseRow& row);

 private:
  std::mt19937_64 engine_;
};

/// A problem with one table row; `where` names the row, e.g. "T(s=3, a=1)".
struct Diagnostic {
  std::string where;
  std::string message;
};

constexpr double kDistributionTolerance = 1e-9;

/// Empty iff all dimension, distribution, discount and terminal invariants
/// hold.
std::vector<Diagnostic> validate(const Pomdp& pomdp, const TerminalSpec& terminals);

/// Throws ContractViolation naming the first diagnostic when validate() is
/// nonempty.
void require_valid(const Pomdp& pomdp, const TerminalSpec& terminals);

struct StepResult {
  int next_state;
  int observation;
  double reward;
};

StepResult step(const Pomdp& pomdp, int s, int a, Rng& rng);

/// Samples s0 ~ b0 and, if the POMDP has one, the pre-action observation.
std::pair<int, std::optional<int>> sample_initial(const Pomdp& pomdp, Rng& rng);

using HistoryPolicy = std::function<std::vector<double>(const History&)>;

Trajectory sample_episode(const Pomdp& pomdp, const TerminalSpec& terminals,
                          const HistoryPolicy& policy, int max_steps, Rng& rng);

double discounted_return(std::span<const double> rewards, double gamma);
inline double discounted_return(const Trajectory& traj, double gamma) {
  return discounted_return(traj.rewards, gamma);
}

/// Throws ContractViolation unless `probs` is a distribution over n entries.
void check_distribution(std::span<const double> probs, std::size_t n, const char* what);

}  // namespace asymac
