#pragma once

#include <vector>

#include "asymac/nn/tape.hpp"
#include "asymac/pomdp.hpp"

namespace asymac::nn {

/// Weight initialization constants. Linear and GRU weights and biases are
/// drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)); embedding rows from
/// U(-kEmbeddingInit, kEmbeddingInit).
inline constexpr double kEmbeddingInit = 0.5;

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng);

class Embedding {
 public:
  Embedding() = default;
  Embedding(std::string name, int symbols, int width, Rng& rng);

  Var forward(Tape& tape, const std::vector<int>& symbols) const;
  int symbols() const { return static_cast<int>(table.value.rows()); }
  int width() const { return static_cast<int>(table.value.cols()); }
  std::vector<Parameter*> parameters() { return {&table}; }

  Parameter table;
};

/// y = x W + b with W stored in x out.
class Linear {
 public:
  Linear() = default;
  Linear(std::string name, int in, int out, Rng& rng);

  Var forward(Tape& tape, Var x) const;
  int in() const { return static_cast<int>(weight.value.rows()); }
  int out() const { return static_cast<int>(weight.value.cols()); }
  std::vector<Parameter*> parameters() { return {&weight, &bias}; }

  Parameter weight;
  Parameter bias;
};

/// Rectifier stack: Linear+ReLU per hidden width, then a linear output.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::string name, int in, const std::vector<int>& hidden, int out, Rng& rng);

  Var forward(Tape& tape, Var x) const;
  std::vector<Parameter*> parameters();

  std::vector<Linear> layers;
};

/// Single-layer GRU cell, gate order (reset, update, candidate).
class GruCell {
 public:
  GruCell() = default;
  GruCell(std::string name, int in, int hidden, Rng& rng);

  /// Projects inputs ahead of the recurrence: x W_ih + b_ih.
  Var project(Tape& tape, Var x) const;
  /// One step from a projected input.
  Var step_projected(Tape& tape, Var projected, Var h) const;
  Var step(Tape& tape, Var x, Var h) const { return step_projected(tape, project(tape, x), h); }

  int in() const { return static_cast<int>(w_ih.value.rows()); }
  int hidden() const { return static_cast<int>(w_hh.value.rows()); }
  std::vector<Parameter*> parameters() { return {&w_ih, &w_hh, &b_ih, &b_hh}; }

  Parameter w_ih, w_hh, b_ih, b_hh;
};

void zero_grads(const std::vector<Parameter*>& params);

}  // namespace asymac::nn
