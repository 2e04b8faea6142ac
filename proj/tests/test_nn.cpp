#include <doctest.h>

#include <cmath>

#include "asymac/nn/adam.hpp"
#include "asymac/nn/checkpoint.hpp"
#include "asymac/nn/gradcheck.hpp"
#include "asymac/nn/layers.hpp"

using namespace asymac;
using namespace asymac::nn;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  return uniform_matrix(r, c, scale, rng);
}

// Fixed random linear functional so gradcheck sees an O(1) scalar.
Var project_to_scalar(Tape& tape, Var x, const Matrix& weights) {
  return sum(mul(x, tape.constant(weights)));
}

}  // namespace

TEST_SUITE("autodiff-nn") {
  TEST_CASE("GRU with zero weights maps a zero state to zero") {
    Rng rng(1);
    GruCell cell("gru", 8, 128, rng);
    for (auto* p : cell.parameters()) p->value.setZero();
    Tape tape(false);
    Var x = tape.constant(random_matrix(1, 8, rng, 5.0));
    Var h = tape.constant(Matrix::Zero(1, 128));
    Var out = cell.step(tape, x, h);
    CHECK(out.cols() == 128);
    CHECK(out.value().isZero(0.0));
  }

  TEST_CASE("GRU output stays inside (-1, 1)") {
    Rng rng(2);
    GruCell cell("gru", 16, 128, rng);
    Tape tape(false);
    Var h = tape.constant(Matrix::Zero(1, 128));
    for (int t = 0; t < 50; ++t) h = cell.step(tape, tape.constant(random_matrix(1, 16, rng, 10.0)), h);
    CHECK(h.value().cwiseAbs().maxCoeff() < 1.0);
  }

  TEST_CASE("GRU matches a hand-written reference step") {
    Rng rng(3);
    GruCell cell("gru", 3, 4, rng);
    Matrix x = random_matrix(1, 3, rng);
    Matrix h0 = random_matrix(1, 4, rng);
    Tape tape(false);
    const Matrix got = cell.step(tape, tape.constant(x), tape.constant(h0)).value();

    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    const Matrix gi = x * cell.w_ih.value + cell.b_ih.value;
    const Matrix gh = h0 * cell.w_hh.value + cell.b_hh.value;
    for (int j = 0; j < 4; ++j) {
      const double r = sig(gi(0, j) + gh(0, j));
      const double z = sig(gi(0, 4 + j) + gh(0, 4 + j));
      const double n = std::tanh(gi(0, 8 + j) + r * gh(0, 8 + j));
      CHECK(got(0, j) == doctest::Approx((1 - z) * n + z * h0(0, j)).epsilon(1e-14));
    }
  }

  TEST_CASE("embedding lookup returns stored rows verbatim") {
    Rng rng(4);
    Embedding emb("emb", 10, 64, rng);
    Tape tape(false);
    Var out = emb.forward(tape, {3, 7, 3});
    CHECK(out.rows() == 3);
    CHECK(out.value().row(0) == emb.table.value.row(3));
    CHECK(out.value().row(1) == emb.table.value.row(7));
    CHECK(out.value().row(2) == emb.table.value.row(3));
    CHECK_THROWS_AS(emb.forward(tape, {10}), ShapeError);
  }

  TEST_CASE("identity linear layer is the identity") {
    Rng rng(5);
    Linear lin("lin", 6, 6, rng);
    lin.weight.value = Matrix::Identity(6, 6);
    lin.bias.value.setZero();
    Tape tape(false);
    Matrix x = random_matrix(3, 6, rng);
    CHECK(lin.forward(tape, tape.constant(x)).value() == x);
  }

  TEST_CASE("MLP head shapes") {
    Rng rng(6);
    Mlp mlp("mlp", 128, {512, 256}, 4, rng);
    Tape tape(false);
    Var out = mlp.forward(tape, tape.constant(random_matrix(7, 128, rng)));
    CHECK(out.rows() == 7);
    CHECK(out.cols() == 4);
    CHECK_THROWS_AS(mlp.forward(tape, tape.constant(Matrix::Zero(1, 127))), ShapeError);
  }

  TEST_CASE("backward of x^2 at 3 is 6") {
    Parameter x("x", Matrix::Constant(1, 1, 3.0));
    Tape tape;
    Var v = tape.param(x);
    tape.backward(mul(v, v));
    CHECK(x.grad(0, 0) == 6.0);
  }

  TEST_CASE("backward requires a scalar") {
    Parameter x("x", Matrix::Ones(2, 2));
    Tape tape;
    CHECK_THROWS_AS(tape.backward(tape.param(x)), ShapeError);
  }

  TEST_CASE("log-softmax likelihood gradient is p - onehot") {
    Rng rng(7);
    Parameter logits("logits", random_matrix(1, 5, rng, 3.0));
    Tape tape;
    Var lp = log_softmax(tape.param(logits));
    tape.backward(scale(pick(lp, {2}), -1.0));
    Matrix p = logits.value.array().exp();
    p /= p.sum();
    for (int j = 0; j < 5; ++j) CHECK(logits.grad(0, j) == doctest::Approx(p(0, j) - (j == 2 ? 1.0 : 0.0)).epsilon(1e-13));
  }

  TEST_CASE("shared subexpressions accumulate gradients") {
    Parameter a("a", Matrix::Constant(1, 1, 2.0));
    Tape tape;
    Var v = tape.param(a);
    Var y = add(mul(v, v), scale(v, 3.0));  // a^2 + 3a
    tape.backward(y);
    CHECK(a.grad(0, 0) == 7.0);
  }

  TEST_CASE("gradcheck: every op") {
    Rng rng(8);
    Parameter a("a", random_matrix(3, 4, rng));
    Parameter b("b", random_matrix(4, 2, rng));
    Parameter c("c", random_matrix(3, 2, rng));
    Parameter bias("bias", random_matrix(1, 2, rng));
    const Matrix w = random_matrix(3, 4, rng);
    auto loss = [&](Tape& t) {
      Var ab = matmul(t.param(a), t.param(b));
      Var x = add_bias(add(ab, t.param(c)), t.param(bias));
      Var y = concat_cols(sigmoid(x), tanh(sub(x, t.param(c))));
      Var z = mul(relu(y), exp(scale(y, 0.3)));
      std::vector<Var> rows{row(z, 2), row(z, 0), row(z, 1)};
      Var s = stack_rows(rows);
      Var tail = slice_cols(s, 1, 3);
      Var g = gather_rows(tail, {0, 2, 2});
      Var lp = log_softmax(g);
      return add(project_to_scalar(t, s, w), sum(pick(lp, {0, 2, 1})));
    };
    const auto report = gradcheck({&a, &b, &c, &bias}, loss);
    for (const auto& g : report.groups) {
      INFO(g.name << " rel " << g.max_rel_error);
      CHECK(g.pass);
    }
  }

  TEST_CASE("gradcheck: GRU cell on 20 random inputs") {
    Rng rng(9);
    GruCell cell("gru", 128, 128, rng);
    for (int trial = 0; trial < 20; ++trial) {
      Parameter x("input", random_matrix(1, 128, rng));
      Parameter h("hidden", random_matrix(1, 128, rng, 0.9));
      const Matrix w = random_matrix(1, 128, rng);
      auto params = cell.parameters();
      params.push_back(&x);
      params.push_back(&h);
      GradcheckOptions opt;
      opt.seed = 100 + trial;
      const auto report = gradcheck(params, [&](Tape& t) {
        return project_to_scalar(t, cell.step(t, t.param(x), t.param(h)), w);
      }, opt);
      INFO("trial " << trial << " worst " << report.max_rel_error());
      CHECK(report.pass());
    }
  }

  TEST_CASE("gradcheck: corrupted gradient fails and names its group") {
    Rng rng(10);
    GruCell cell("gru", 8, 16, rng);
    Parameter x("input", random_matrix(2, 8, rng));
    const Matrix w = random_matrix(2, 16, rng);
    auto params = cell.parameters();
    params.push_back(&x);
    GradcheckOptions opt;
    opt.corrupt_group = "gru.w_hh";
    const auto report = gradcheck(params, [&](Tape& t) {
      Var h = t.constant(Matrix::Zero(2, 16));
      h = cell.step(t, t.param(x), h);
      h = cell.step(t, t.param(x), h);
      return project_to_scalar(t, h, w);
    }, opt);
    CHECK_FALSE(report.pass());
    CHECK(report.failing_groups() == std::vector<std::string>{"gru.w_hh"});
  }

  TEST_CASE("gradcheck: MLP head and embedding") {
    Rng rng(11);
    Embedding emb("emb", 6, 64, rng);
    Mlp mlp("mlp", 64, {512, 256}, 3, rng);
    auto params = mlp.parameters();
    params.push_back(&emb.table);
    const auto report = gradcheck(params, [&](Tape& t) {
      Var logits = mlp.forward(t, emb.forward(t, {1, 4, 4, 0}));
      return sum(pick(log_softmax(logits), {0, 2, 1, 1}));
    });
    for (const auto& g : report.groups) {
      INFO(g.name << " rel " << g.max_rel_error);
      CHECK(g.pass);
    }
  }

  TEST_CASE("GRU unroll propagates gradient to the first input") {
    Rng rng(12);
    GruCell cell("gru", 16, 32, rng);
    std::vector<Parameter> xs;
    for (int t = 0; t < 20; ++t) xs.emplace_back("x" + std::to_string(t), random_matrix(1, 16, rng));
    Tape tape;
    Var h = tape.constant(Matrix::Zero(1, 32));
    for (const auto& x : xs) h = cell.step(tape, tape.param(x), h);
    tape.backward(sum(h));
    CHECK(xs.front().grad.cwiseAbs().maxCoeff() > 0.0);
  }

  TEST_CASE("forward and backward are deterministic") {
    auto run = [] {
      Rng rng(13);
      GruCell cell("gru", 8, 16, rng);
      Mlp mlp("mlp", 16, {32, 16}, 2, rng);
      Tape tape;
      Var h = tape.constant(Matrix::Zero(3, 16));
      h = cell.step(tape, tape.constant(random_matrix(3, 8, rng)), h);
      Var loss = sum(mlp.forward(tape, h));
      tape.backward(loss);
      return std::make_pair(loss.scalar(), Matrix(cell.w_hh.grad));
    };
    const auto a = run();
    const auto b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
  }

  TEST_CASE("Adam: zero gradient leaves parameters unchanged") {
    Rng rng(14);
    Parameter p("p", random_matrix(3, 3, rng));
    const Matrix before = p.value;
    Adam adam({&p}, {});
    for (int i = 0; i < 5; ++i) adam.step();
    CHECK(p.value == before);
  }

  TEST_CASE("Adam: first step is -lr g / (|g| + eps)") {
    Parameter p("p", Matrix::Zero(1, 4));
    p.grad << 0.5, -2.0, 1e-3, 0.0;
    AdamConfig cfg;
    cfg.lr = 0.01;
    Adam adam({&p}, cfg);
    adam.step();
    for (int j = 0; j < 4; ++j) {
      const double g = p.grad(0, j);
      CHECK(p.value(0, j) == doctest::Approx(-cfg.lr * g / (std::abs(g) + cfg.eps)).epsilon(1e-12));
    }
    CHECK(adam.steps() == 1);
  }

  TEST_CASE("Adam: constant gradient steps approach lr times the sign") {
    Parameter p("p", Matrix::Zero(1, 2));
    AdamConfig cfg;
    cfg.lr = 0.001;
    Adam adam({&p}, cfg);
    Matrix prev = p.value;
    for (int i = 0; i < 2000; ++i) {
      p.grad << 3.0, -0.2;
      prev = p.value;
      adam.step();
    }
    const Matrix delta = p.value - prev;
    CHECK(delta(0, 0) == doctest::Approx(-cfg.lr).epsilon(1e-6));
    CHECK(delta(0, 1) == doctest::Approx(cfg.lr).epsilon(1e-6));
  }

  TEST_CASE("Adam rejects mismatched gradients") {
    Parameter p("p", Matrix::Zero(2, 2));
    Adam adam({&p}, {});
    p.grad = Matrix::Zero(1, 2);
    CHECK_THROWS_AS(adam.step(), ShapeError);
  }

  TEST_CASE("checkpoint round trip is exact") {
    Rng rng(15);
    Checkpoint ck;
    ck.meta["kind"] = "hs";
    ck.meta["note"] = "two words";
    ck.add("a", random_matrix(3, 5, rng, 1e3));
    ck.add("b", Matrix::Constant(1, 1, 1.0 / 3.0));
    ck.add("empty", Matrix(0, 4));
    const auto back = Checkpoint::parse(ck.to_string());
    CHECK(back.meta == ck.meta);
    CHECK(back.tensor("a") == ck.tensor("a"));
    CHECK(back.tensor("b")(0, 0) == 1.0 / 3.0);
    CHECK(back.tensor("empty").cols() == 4);
    CHECK_THROWS_AS(back.tensor("missing"), CheckpointError);
    CHECK_THROWS_AS(Checkpoint::parse("garbage\n"), CheckpointError);
    CHECK_THROWS_AS(Checkpoint::parse("asymac-checkpoint v1\ntensor a 2 2\n1 2\n"), CheckpointError);
  }
}
