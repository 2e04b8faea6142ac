#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "asymac/pomdp.hpp"

namespace asymac::envs {

class UnsupportedSize : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parse failure in a POMDP text file; line/column are 1-based.
class PomdpSyntaxError : public std::runtime_error {
 public:
  PomdpSyntaxError(int line, int column, const std::string& message);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// The text parsed but the tables break an invariant; `where` names the row.
class PomdpSemanticError : public std::runtime_error {
 public:
  PomdpSemanticError(std::string where, const std::string& message);
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

struct Environment {
  std::string name;
  Pomdp pomdp;
  TerminalSpec terminals;
};

// Good/bad POMDP: states {G, B}, actions {g, b}, observations {g, b}.
inline constexpr int kGood = 0;
inline constexpr int kBad = 1;

Environment build_goodbad(double gamma);

// Heaven-Hell ---------------------------------------------------------------

enum HeavenHellAction : int { kNorth = 0, kSouth = 1, kEast = 2, kWest = 3 };
enum class HeavenSide : int { Left = 0, Right = 1 };

/// T-shaped corridor geometry. Positions are enumerated as: top corridor
/// west-to-east (0 .. 2n), vertical corridor north-to-south (2n+1 .. 3n),
/// bottom corridor west-to-east (3n+1 .. 4n+1); the priest is the last
/// position. Observation p names non-priest position p; the priest emits
/// 4n+1 (heaven left) or 4n+2 (heaven right).
struct HeavenHellLayout {
  int n = 3;

  int n_positions() const { return 4 * n + 2; }
  int left_exit() const { return 0; }
  int right_exit() const { return 2 * n; }
  int fork() const { return n; }
  int start() const { return 3 * n; }
  int priest() const { return 4 * n + 1; }

  int move(int position, int action) const;
  int state(int position, HeavenSide side) const { return static_cast<int>(side) * n_positions() + position; }
  int position_of(int state) const { return state % n_positions(); }
  HeavenSide side_of(int state) const { return static_cast<HeavenSide>(state / n_positions()); }
  int observation(int position, HeavenSide side) const;
  int heaven_exit(HeavenSide side) const { return side == HeavenSide::Left ? left_exit() : right_exit(); }
  bool is_exit(int position) const { return position == left_exit() || position == right_exit(); }
};

Environment build_heavenhell(int n);

// Shopping ------------------------------------------------------------------

enum ShoppingAction : int { kLeft = 0, kRight = 1, kUp = 2, kDown = 3, kQuery = 4, kBuy = 5 };

/// n x n grid; cell = row * n + col with row 0 at the bottom. State encodes
/// agent * n^2 + item. Observations 0 .. n^2-1 report the agent's cell,
/// n^2 .. 2n^2-1 report the item's cell (after QUERY).
struct ShoppingLayout {
  int n = 5;

  int n_cells() const { return n * n; }
  int start() const { return 0; }
  int move(int cell, int action) const;
  int state(int agent, int item) const { return agent * n_cells() + item; }
  int agent_of(int state) const { return state / n_cells(); }
  int item_of(int state) const { return state % n_cells(); }
  int agent_observation(int cell) const { return cell; }
  int item_observation(int cell) const { return n_cells() + cell; }
};

Environment build_shopping(int n);

// Named environments ---------------------------------------------------------

/// Resolves "goodbad", "goodbad-<gamma>", "heavenhell-3", "heavenhell-4",
/// "shopping-5", "shopping-6".
Environment make_environment(const std::string& name);
std::vector<std::string> environment_names();

// POMDP text files -----------------------------------------------------------

/// Parses the tabular subset described in the README.
Environment load_pomdp_text(std::string_view text, std::string name = "file");
Environment load_pomdp_file(const std::string& path);

/// Writes a file that load_pomdp_text() reads back to identical tables.
/// Throws std::invalid_argument when the observation function depends on
/// the source state, which the file format cannot express.
std::string export_pomdp_text(const Pomdp& pomdp);

}  // namespace asymac::envs
