#include "asymac/nn/layers.hpp"

#include <cmath>

namespace asymac::nn {

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  return m;
}

Embedding::Embedding(std::string name, int symbols, int width, Rng& rng)
    : table(std::move(name) + ".table", uniform_matrix(symbols, width, kEmbeddingInit, rng)) {}

Var Embedding::forward(Tape& tape, const std::vector<int>& symbols) const {
  return gather_rows(tape.param(table), symbols);
}

Linear::Linear(std::string name, int in, int out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight = Parameter(name + ".weight", uniform_matrix(in, out, bound, rng));
  bias = Parameter(name + ".bias", uniform_matrix(1, out, bound, rng));
}

Var Linear::forward(Tape& tape, Var x) const {
  return add_bias(matmul(x, tape.param(weight)), tape.param(bias));
}

Mlp::Mlp(std::string name, int in, const std::vector<int>& hidden, int out, Rng& rng) {
  int width = in;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    layers.emplace_back(name + "." + std::to_string(i), width, hidden[i], rng);
    width = hidden[i];
  }
  layers.emplace_back(name + "." + std::to_string(hidden.size()), width, out, rng);
}

Var Mlp::forward(Tape& tape, Var x) const {
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) x = relu(layers[i].forward(tape, x));
  return layers.back().forward(tape, x);
}

std::vector<Parameter*> Mlp::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : layers)
    for (auto* p : l.parameters()) out.push_back(p);
  return out;
}

GruCell::GruCell(std::string name, int in, int hidden, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  w_ih = Parameter(name + ".w_ih", uniform_matrix(in, 3 * hidden, bound, rng));
  w_hh = Parameter(name + ".w_hh", uniform_matrix(hidden, 3 * hidden, bound, rng));
  b_ih = Parameter(name + ".b_ih", uniform_matrix(1, 3 * hidden, bound, rng));
  b_hh = Parameter(name + ".b_hh", uniform_matrix(1, 3 * hidden, bound, rng));
}

Var GruCell::project(Tape& tape, Var x) const {
  return add_bias(matmul(x, tape.param(w_ih)), tape.param(b_ih));
}

Var GruCell::step_projected(Tape& tape, Var projected, Var h) const {
  return gru_cell(projected, h, tape.param(w_hh), tape.param(b_hh));
}

void zero_grads(const std::vector<Parameter*>& params) {
  for (auto* p : params) p->zero_grad();
}

}  // namespace asymac::nn
