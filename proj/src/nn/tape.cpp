#include "asymac/nn/tape.hpp"

#include <cmath>
#include <memory>

namespace asymac::nn {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

std::string dims(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

}  // namespace

void Tape::check_owner(Var v) const {
  if (v.tape_ != this || v.id_ < 0 || static_cast<std::size_t>(v.id_) >= nodes_.size())
    throw std::invalid_argument("variable does not belong to this tape");
}

const Matrix& Tape::value(Var v) const {
  const Node& n = nodes_[v.id_];
  return n.ref ? *n.ref : n.value;
}

Matrix& Tape::grad(Var v) {
  Node& n = nodes_[v.id_];
  if (n.grad_target) return *n.grad_target;
  if (!n.has_grad) {
    const Matrix& val = n.ref ? *n.ref : n.value;
    n.grad = Matrix::Zero(val.rows(), val.cols());
    n.has_grad = true;
  }
  return n.grad;
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::param(const Parameter& p) {
  Node n;
  n.ref = &p.value;
  if (record_) {
    n.grad_target = &p.grad;
    n.needs_grad = true;
  }
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::push(Matrix value, std::initializer_list<Var> parents, Backward back) {
  return push(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(back));
}

Var Tape::push(Matrix value, std::span<const Var> parents, Backward back) {
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (const Var& p : parents) {
      check_owner(p);
      n.needs_grad = n.needs_grad || nodes_[p.id_].needs_grad;
    }
    if (n.needs_grad) n.back = std::move(back);
  }
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

void Tape::backward(Var loss) {
  check_owner(loss);
  if (!record_) throw std::logic_error("backward on a tape that does not record");
  const Matrix& lv = value(loss);
  require(lv.rows() == 1 && lv.cols() == 1, "backward needs a scalar output, got " + dims(lv));
  if (!nodes_[loss.id_].needs_grad) return;
  grad(loss)(0, 0) += 1.0;
  for (int i = loss.id_; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.back && n.has_grad) n.back(*this, n.grad, n.value);
  }
}

Var matmul(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require(av.cols() == bv.rows(), "matmul: " + dims(av) + " times " + dims(bv));
  Matrix out(av.rows(), bv.cols());
  out.noalias() = av * bv;
  return a.tape()->push(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    if (t.needs_grad(a)) t.grad(a).noalias() += g * t.value(b).transpose();
    if (t.needs_grad(b)) t.grad(b).noalias() += t.value(a).transpose() * g;
  });
}

Var add(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: " + dims(a.value()) + " vs " + dims(b.value()));
  return a.tape()->push(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    if (t.needs_grad(a)) t.grad(a) += g;
    if (t.needs_grad(b)) t.grad(b) += g;
  });
}

Var sub(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: " + dims(a.value()) + " vs " + dims(b.value()));
  return a.tape()->push(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    if (t.needs_grad(a)) t.grad(a) += g;
    if (t.needs_grad(b)) t.grad(b) -= g;
  });
}

Var add_bias(Var a, Var bias) {
  require(bias.rows() == 1 && bias.cols() == a.cols(), "add_bias: " + dims(a.value()) + " with " + dims(bias.value()));
  Matrix out = a.value();
  out.rowwise() += bias.value().row(0);
  return a.tape()->push(std::move(out), {a, bias}, [a, bias](Tape& t, const Matrix& g, const Matrix&) {
    if (t.needs_grad(a)) t.grad(a) += g;
    if (t.needs_grad(bias)) t.grad(bias) += g.colwise().sum();
  });
}

Var mul(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "mul: " + dims(a.value()) + " vs " + dims(b.value()));
  return a.tape()->push(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    if (t.needs_grad(a)) t.grad(a) += g.cwiseProduct(t.value(b));
    if (t.needs_grad(b)) t.grad(b) += g.cwiseProduct(t.value(a));
  });
}

Var scale(Var a, double c) {
  return a.tape()->push(a.value() * c, {a}, [a, c](Tape& t, const Matrix& g, const Matrix&) { t.grad(a) += g * c; });
}

Var sigmoid(Var a) {
  Matrix out = a.value().unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return a.tape()->push(std::move(out), {a}, [a](Tape& t, const Matrix& g, const Matrix& y) {
    t.grad(a).array() += g.array() * y.array() * (1.0 - y.array());
  });
}

Var tanh(Var a) {
  Matrix out = a.value().array().tanh().matrix();
  return a.tape()->push(std::move(out), {a}, [a](Tape& t, const Matrix& g, const Matrix& y) {
    t.grad(a).array() += g.array() * (1.0 - y.array().square());
  });
}

Var relu(Var a) {
  Matrix out = a.value().cwiseMax(0.0);
  return a.tape()->push(std::move(out), {a}, [a](Tape& t, const Matrix& g, const Matrix& y) {
    t.grad(a).array() += (y.array() > 0.0).select(g.array(), 0.0);
  });
}

Var exp(Var a) {
  Matrix out = a.value().array().exp().matrix();
  return a.tape()->push(std::move(out), {a}, [a](Tape& t, const Matrix& g, const Matrix& y) {
    t.grad(a) += g.cwiseProduct(y);
  });
}

Var concat_cols(Var a, Var b) {
  require(a.rows() == b.rows(), "concat_cols: " + dims(a.value()) + " and " + dims(b.value()));
  const Eigen::Index ca = a.cols();
  Matrix out(a.rows(), ca + b.cols());
  out << a.value(), b.value();
  return a.tape()->push(std::move(out), {a, b}, [a, b, ca](Tape& t, const Matrix& g, const Matrix&) {
    if (t.needs_grad(a)) t.grad(a) += g.leftCols(ca);
    if (t.needs_grad(b)) t.grad(b) += g.rightCols(g.cols() - ca);
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols out of range on " + dims(a.value()));
  Matrix out = a.value().middleCols(start, count);
  return a.tape()->push(std::move(out), {a}, [a, start, count](Tape& t, const Matrix& g, const Matrix&) {
    t.grad(a).middleCols(start, count) += g;
  });
}

Var gather_rows(Var table, const std::vector<int>& indices) {
  const Matrix& tv = table.value();
  Matrix out(static_cast<Eigen::Index>(indices.size()), tv.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] >= 0 && indices[i] < tv.rows(),
            "gather_rows: index " + std::to_string(indices[i]) + " outside " + dims(tv));
    out.row(static_cast<Eigen::Index>(i)) = tv.row(indices[i]);
  }
  return table.tape()->push(std::move(out), {table}, [table, indices](Tape& t, const Matrix& g, const Matrix&) {
    Matrix& gt = t.grad(table);
    for (std::size_t i = 0; i < indices.size(); ++i) gt.row(indices[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

Var stack_rows(std::span<const Var> parts) {
  require(!parts.empty(), "stack_rows: nothing to stack");
  const Eigen::Index width = parts.front().cols();
  Eigen::Index total = 0;
  for (const Var& p : parts) {
    require(p.cols() == width, "stack_rows: mixed widths");
    total += p.rows();
  }
  Matrix out(total, width);
  std::vector<Eigen::Index> offsets;
  offsets.reserve(parts.size());
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    offsets.push_back(at);
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return parts.front().tape()->push(std::move(out), parts,
                                    [saved, offsets](Tape& t, const Matrix& g, const Matrix&) {
                                      for (std::size_t i = 0; i < saved.size(); ++i)
                                        if (t.needs_grad(saved[i]))
                                          t.grad(saved[i]) += g.middleRows(offsets[i], saved[i].rows());
                                    });
}

Var row(Var a, Eigen::Index i) {
  require(i >= 0 && i < a.rows(), "row: index out of range on " + dims(a.value()));
  Matrix out = a.value().row(i);
  return a.tape()->push(std::move(out), {a}, [a, i](Tape& t, const Matrix& g, const Matrix&) { t.grad(a).row(i) += g.row(0); });
}

Var log_softmax(Var a) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    const double lse = m + std::log((x.row(i).array() - m).exp().sum());
    out.row(i) = x.row(i).array() - lse;
  }
  return a.tape()->push(std::move(out), {a}, [a](Tape& t, const Matrix& g, const Matrix& y) {
    // d/dx_j = g_j - softmax_j * sum_k g_k
    const Matrix p = y.array().exp().matrix();
    Matrix& ga = t.grad(a);
    for (Eigen::Index i = 0; i < g.rows(); ++i) ga.row(i) += g.row(i) - p.row(i) * g.row(i).sum();
  });
}

Var pick(Var a, const std::vector<int>& cols) {
  const Matrix& x = a.value();
  require(static_cast<Eigen::Index>(cols.size()) == x.rows(), "pick: one column per row required");
  Matrix out(x.rows(), 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    require(cols[i] >= 0 && cols[i] < x.cols(), "pick: column out of range");
    out(i, 0) = x(i, cols[i]);
  }
  return a.tape()->push(std::move(out), {a}, [a, cols](Tape& t, const Matrix& g, const Matrix&) {
    Matrix& ga = t.grad(a);
    for (Eigen::Index i = 0; i < g.rows(); ++i) ga(i, cols[i]) += g(i, 0);
  });
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape()->push(std::move(out), {a}, [a](Tape& t, const Matrix& g, const Matrix&) {
    t.grad(a).array() += g(0, 0);
  });
}

Var gru_cell(Var xp, Var h, Var w_hh, Var b_hh) {
  const Matrix& xv = xp.value();
  const Matrix& hv = h.value();
  const Matrix& w = w_hh.value();
  const Eigen::Index H = hv.cols();
  const Eigen::Index B = hv.rows();
  require(w.rows() == H && w.cols() == 3 * H, "gru_cell: recurrent weights must be Hx3H");
  require(xv.rows() == B && xv.cols() == 3 * H, "gru_cell: input projection must be Bx3H");
  require(b_hh.rows() == 1 && b_hh.cols() == 3 * H, "gru_cell: recurrent bias must be 1x3H");

  // Cache: [r | z | n | h W_hn + b_hn], each B x H.
  Matrix hp(B, 3 * H);
  hp.noalias() = hv * w;
  hp.rowwise() += b_hh.value().row(0);
  Matrix cache(B, 4 * H);
  auto r = cache.middleCols(0, H);
  auto z = cache.middleCols(H, H);
  auto n = cache.middleCols(2 * H, H);
  cache.middleCols(3 * H, H) = hp.middleCols(2 * H, H);
  r = (xv.middleCols(0, H) + hp.middleCols(0, H)).unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  z = (xv.middleCols(H, H) + hp.middleCols(H, H)).unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  n = (xv.middleCols(2 * H, H).array() + r.array() * hp.middleCols(2 * H, H).array()).tanh().matrix();
  Matrix out = ((1.0 - z.array()) * n.array() + z.array() * hv.array()).matrix();

  Tape* tape = xp.tape();
  auto shared = std::make_shared<Matrix>(std::move(cache));
  return tape->push(std::move(out), {xp, h, w_hh, b_hh},
                    [xp, h, w_hh, b_hh, shared, H](Tape& t, const Matrix& g, const Matrix&) {
                      const Matrix& c = *shared;
                      const auto r = c.middleCols(0, H).array();
                      const auto z = c.middleCols(H, H).array();
                      const auto n = c.middleCols(2 * H, H).array();
                      const auto hn = c.middleCols(3 * H, H).array();
                      const auto hv = t.value(h).array();
                      const auto ga = g.array();

                      const Eigen::Index B = g.rows();
                      Matrix d_pre(B, 3 * H);  // gradients of the gate pre-activations
                      const auto dn_pre = (ga * (1.0 - z) * (1.0 - n.square())).eval();
                      d_pre.middleCols(0, H) = (dn_pre * hn * r * (1.0 - r)).matrix();
                      d_pre.middleCols(H, H) = (ga * (hv - n) * z * (1.0 - z)).matrix();
                      d_pre.middleCols(2 * H, H) = dn_pre.matrix();
                      if (t.needs_grad(xp)) t.grad(xp) += d_pre;

                      Matrix d_hp = d_pre;
                      d_hp.middleCols(2 * H, H).array() *= r;
                      if (t.needs_grad(h)) {
                        Matrix& gh = t.grad(h);
                        gh.array() += ga * z;
                        gh.noalias() += d_hp * t.value(w_hh).transpose();
                      }
                      if (t.needs_grad(w_hh)) t.grad(w_hh).noalias() += t.value(h).transpose() * d_hp;
                      if (t.needs_grad(b_hh)) t.grad(b_hh) += d_hp.colwise().sum();
                    });
}

}  // namespace asymac::nn
