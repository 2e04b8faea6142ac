#pragma once

#include <Eigen/Core>
#include <deque>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace asymac::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Named trainable tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Matrix value;
  mutable Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}
  void zero_grad() const { grad.setZero(); }
  Eigen::Index size() const { return value.size(); }
};

class Tape;

/// Handle to a node on a tape.
class Var {
 public:
  Var() = default;
  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  double scalar() const { return value()(0, 0); }

 private:
  friend class Tape;
  Var(Tape* t, int id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so reverse
/// creation order is a valid topological order for backward. A tape that
/// does not record keeps values only (inference mode).
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& upstream, const Matrix& output)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Matrix value);
  /// Refers to the parameter's storage; gradients accumulate into p.grad.
  Var param(const Parameter& p);

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded backward closure once.
  void backward(Var loss);

  const Matrix& value(Var v) const;
  bool needs_grad(Var v) const { return nodes_[v.id_].needs_grad; }
  /// Gradient accumulator of v (zero-initialized on first use).
  Matrix& grad(Var v);

  /// Appends a computed node. `back` is dropped unless some parent needs a
  /// gradient.
  Var push(Matrix value, std::initializer_list<Var> parents, Backward back);
  Var push(Matrix value, std::span<const Var> parents, Backward back);

 private:
  struct Node {
    Matrix value;
    const Matrix* ref = nullptr;
    Matrix grad;
    Matrix* grad_target = nullptr;
    bool needs_grad = false;
    bool has_grad = false;
    Backward back;
  };

  void check_owner(Var v) const;

  bool record_;
  std::deque<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(*this); }

// Operations. All inputs must live on the same tape.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// a + row, broadcasting a 1 x n row over every row of a.
Var add_bias(Var a, Var row);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var exp(Var a);
Var concat_cols(Var a, Var b);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
/// Row lookup: out[i] = table[indices[i]].
Var gather_rows(Var table, const std::vector<int>& indices);
/// Vertical stack of same-width blocks.
Var stack_rows(std::span<const Var> parts);
Var row(Var a, Eigen::Index i);
/// Row-wise log-softmax.
Var log_softmax(Var a);
/// out[i] = a[i, cols[i]] as a column.
Var pick(Var a, const std::vector<int>& cols);
/// Sum of all entries, 1 x 1.
Var sum(Var a);

/// GRU update with precomputed input projection x W_ih + b_ih (B x 3H),
/// hidden state h (B x H) and the recurrent weights. Gate order r, z, n:
///   r = sigmoid(xr + h Whr + bhr), z = sigmoid(xz + h Whz + bhz),
///   n = tanh(xn + r * (h Whn + bhn)), h' = (1 - z) * n + z * h.
Var gru_cell(Var input_projection, Var h, Var w_hh, Var b_hh);

}  // namespace asymac::nn
