#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "vdlg/autodiff.hpp"
#include "vdlg/errors.hpp"
#include "vdlg/optimizer.hpp"
#include "vdlg/tensor.hpp"

using namespace vdlg;

TEST_CASE("softmax: symmetry, singleton, direct-formula oracle") {
  Tensor uniform = softmax(Tensor::row({0, 0, 0, 0}));
  for (int i = 0; i < 4; ++i) CHECK(uniform[i] == doctest::Approx(0.25).epsilon(1e-15));

  Tensor single = softmax(Tensor::row({5}));
  CHECK(single[0] == doctest::Approx(1.0).epsilon(1e-15));

  // oracle: e^{x_i} / sum_j e^{x_j} computed directly
  Tensor x = Tensor::row({1, 2, 3});
  double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  Tensor got = softmax(x);
  for (int i = 0; i < 3; ++i)
    CHECK(got[i] == doctest::Approx(std::exp(1.0 + i) / z).epsilon(1e-14));
}

TEST_CASE("softmax: shift invariance and row sums over random inputs") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    int n = 1 + static_cast<int>(rng.uniform_int(16));
    Tensor x(1, n);
    for (int i = 0; i < n; ++i) x[i] = rng.uniform(-30.0, 30.0);
    Tensor p = softmax(x);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      CHECK(p[i] >= 0.0);
      sum += p[i];
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);

    double c = rng.uniform(-50.0, 50.0);
    Tensor shifted(1, n);
    for (int i = 0; i < n; ++i) shifted[i] = x[i] + c;
    Tensor q = softmax(shifted);
    for (int i = 0; i < n; ++i) CHECK(std::abs(p[i] - q[i]) < 1e-12);
  }
}

TEST_CASE("softmax: empty input rejected") {
  CHECK_THROWS_WITH_AS(softmax(Tensor(1, 0)), "empty softmax", NumericalError);
}

TEST_CASE("kl_divergence: identity, one-hot-vs-uniform oracle, nonnegativity") {
  CHECK(kl_divergence(Tensor::row({0.5, 0.5}), Tensor::row({0.5, 0.5})) == 0.0);

  // oracle by hand: sum p log(p/q) = 1 * log(1 / 0.25) = ln 4
  double kl = kl_divergence(Tensor::row({1, 0, 0, 0}), Tensor::row({0.25, 0.25, 0.25, 0.25}));
  CHECK(kl == doctest::Approx(std::log(4.0)).epsilon(1e-14));

  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    int n = 2 + static_cast<int>(rng.uniform_int(8));
    Tensor p(1, n), q(1, n);
    double sp = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
      p[i] = rng.uniform(1e-3, 1.0);
      q[i] = rng.uniform(1e-3, 1.0);
      sp += p[i];
      sq += q[i];
    }
    for (int i = 0; i < n; ++i) {
      p[i] /= sp;
      q[i] /= sq;
    }
    CHECK(kl_divergence(p, q) >= 0.0);
    CHECK(kl_divergence(p, p) == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("kl_divergence: support violation rejected") {
  CHECK_THROWS_WITH_AS(kl_divergence(Tensor::row({0.5, 0.5}), Tensor::row({1.0, 0.0})),
                       "KL support", NumericalError);
  CHECK_THROWS_AS(kl_divergence(Tensor::row({0.7, 0.7}), Tensor::row({0.5, 0.5})),
                  NumericalError);
}

TEST_CASE("cross_entropy: uniform, extreme logits, single class") {
  Tensor uniform(1, 300);
  CHECK(cross_entropy(uniform, 17) == doctest::Approx(std::log(300.0)).epsilon(1e-14));

  // oracle: -log(e^10 / (e^10 + e^-10)) = log1p(e^-20)
  CHECK(cross_entropy(Tensor::row({10, -10}), 0) ==
        doctest::Approx(std::log1p(std::exp(-20.0))).epsilon(1e-9));
  CHECK(cross_entropy(Tensor::row({10, -10}), 0) == doctest::Approx(2.061e-9).epsilon(1e-3));

  CHECK(cross_entropy(Tensor::row({0}), 0) == 0.0);
  CHECK_THROWS_AS(cross_entropy(Tensor::row({1, 2}), 2), NumericalError);
  CHECK_THROWS_AS(cross_entropy(Tensor::row({1, 2}), -1), NumericalError);
}

TEST_CASE("tape: analytic gradient of sum of squares") {
  ParamStore store;
  Parameter& x = store.create("x", Tensor::row({1, 2}));
  Tape tape;
  Var vx = tape.param(x);
  Var sq = tape.matmul_nt(vx, vx);  // [1x2][2x1] = sum x_i^2
  tape.backward(sq);
  CHECK(x.grad[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(x.grad[1] == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("tape: gradient of constant function is exactly zero") {
  ParamStore store;
  Parameter& x = store.create("x", Tensor::row({1, 2, 3}));
  store.zero_grad();
  Tape tape;
  tape.param(x);  // touched but unused by the loss
  Var c = tape.input(Tensor::scalar(5.0));
  tape.backward(c);
  for (int i = 0; i < 3; ++i) CHECK(x.grad[i] == 0.0);
}

TEST_CASE("grad_check: simple quadratic within 1e-7") {
  ParamStore store;
  Parameter& x = store.create("x", Tensor::row({1, 2}));
  Parameter* params[] = {&x};
  double err = grad_check(
      [&](Tape& t) {
        Var vx = t.param(x);
        return t.matmul_nt(vx, vx);
      },
      params, 1e-5);
  CHECK(err < 1e-7);
}

TEST_CASE("grad_check: epsilon bounds enforced") {
  ParamStore store;
  Parameter& x = store.create("x", Tensor::row({1}));
  Parameter* params[] = {&x};
  auto f = [&](Tape& t) { return t.param(x); };
  CHECK_THROWS_AS(grad_check(f, params, 1e-8), NumericalError);
  CHECK_THROWS_AS(grad_check(f, params, 1e-2), NumericalError);
}

TEST_CASE("per-op grad_check on random small tensors") {
  Rng rng(23);
  auto randmat = [&](int r, int c) {
    Tensor t(r, c);
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
    return t;
  };

  ParamStore store;
  Parameter& a = store.create("a", randmat(3, 4));
  Parameter& b = store.create("b", randmat(4, 3));
  Parameter& c = store.create("c", randmat(3, 4));
  Parameter& bias = store.create("bias", randmat(1, 4));
  Parameter& gamma = store.create("gamma", randmat(1, 4));
  Parameter& beta = store.create("beta", randmat(1, 4));
  std::vector<Parameter*> params = {&a, &b, &c, &bias, &gamma, &beta};

  // scalar reduction: ones^T M ones
  auto reduce = [](Tape& t, Var m) {
    const Tensor& v = t.value(m);
    Var col = t.matmul(m, t.input(Tensor(v.cols(), 1, 1.0)));
    Var ones = t.input(Tensor(1, v.rows(), 1.0));
    return t.matmul(ones, col);
  };

  SUBCASE("matmul + add + bias broadcast") {
    Tensor shift = randmat(3, 3);  // fixed: the builder must be deterministic
    double err = grad_check(
        [&](Tape& t) {
          Var m = t.add(t.matmul(t.param(a), t.param(b)), t.input(shift));
          Var n = t.add(t.param(c), t.param(bias));
          return reduce(t, t.matmul(m, n));
        },
        params, 1e-5);
    CHECK(err < 1e-6);
  }
  SUBCASE("gelu + layer_norm + softmax rows") {
    double err = grad_check(
        [&](Tape& t) {
          Var x = t.layer_norm(t.gelu(t.param(a)), t.param(gamma), t.param(beta));
          Var p = t.masked_softmax_rows(x);
          return reduce(t, t.matmul(p, t.param(b)));
        },
        params, 1e-5);
    CHECK(err < 1e-6);
  }
  SUBCASE("select/concat/slice") {
    double err = grad_check(
        [&](Tape& t) {
          Var sel = t.select_rows(t.param(a), {2, 0, 0});
          Var cat = t.concat_rows(sel, t.param(c));
          Var left = t.slice_cols(cat, 0, 2);
          Var right = t.slice_cols(cat, 2, 4);
          return reduce(t, t.concat_cols({left, right}));
        },
        params, 1e-5);
    CHECK(err < 1e-6);
  }
  SUBCASE("losses: xent, kl, bce") {
    double err = grad_check(
        [&](Tape& t) {
          Var logits = t.matmul(t.param(a), t.param(b));  // 3x3
          Var xe = t.softmax_xent_mean(logits, {0, 2, 1});
          Tensor p(3, 3);
          p.at(0, 1) = 1.0;
          p.at(1, 0) = 0.5;
          p.at(1, 2) = 0.5;
          p.at(2, 2) = 1.0;
          Var kl = t.kl_vs_softmax_sum(p, logits);
          Var one = t.select_rows(t.slice_cols(logits, 0, 1), {1});
          Var bce = t.bce_with_logit(one, 1.0);
          return t.add(t.add(xe, kl), bce);
        },
        params, 1e-5);
    CHECK(err < 1e-6);
  }
}

TEST_CASE("tape: unused parameters keep exactly zero gradients") {
  Rng rng(5);
  ParamStore store;
  Parameter& used = store.create("used", Tensor::randn(2, 2, rng));
  Parameter& unused = store.create("unused", Tensor::randn(2, 2, rng));
  store.zero_grad();
  Tape tape;
  Var loss = tape.softmax_xent_mean(tape.param(used), {0, 1});
  tape.backward(loss);
  for (int i = 0; i < 4; ++i) CHECK(unused.grad[i] == 0.0);
  bool any = false;
  for (int i = 0; i < 4; ++i) any = any || used.grad[i] != 0.0;
  CHECK(any);
}

TEST_CASE("seeded rng reproduces bit-identical losses") {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    ParamStore store;
    Parameter& w = store.create("w", Tensor::randn(4, 4, rng, 0.5));
    Tape tape;
    Var logits = tape.matmul(tape.param(w), tape.param(w));
    Var loss = tape.softmax_xent_mean(logits, {1, 2, 3, 0});
    return tape.value(loss).item();
  };
  CHECK(run(42) == run(42));
  CHECK(run(42) != run(43));
}

TEST_CASE("adam: converges on a quadratic and rejects non-finite") {
  ParamStore store;
  Parameter& x = store.create("x", Tensor::row({5.0, -3.0}));
  Adam adam;
  for (int i = 0; i < 500; ++i) {
    store.zero_grad();
    Tape tape;
    Var loss = tape.matmul_nt(tape.param(x), tape.param(x));
    tape.backward(loss);
    adam.step(store, 0.05);
  }
  CHECK(std::abs(x.value[0]) < 1e-2);
  CHECK(std::abs(x.value[1]) < 1e-2);
}

TEST_CASE("dropout: rate 0 is the identity node, masks scale correctly") {
  Rng rng(3);
  ParamStore store;
  Parameter& a = store.create("a", Tensor(8, 8, 1.0));
  Tape tape;
  Var v = tape.param(a);
  Var same = tape.dropout(v, 0.0, rng);
  CHECK(same.id == v.id);

  // inverted dropout: kept entries scale by 1/(1-rate)
  Var dropped = tape.dropout(v, 0.25, rng);
  const Tensor& d = tape.value(dropped);
  for (std::int64_t i = 0; i < d.size(); ++i)
    CHECK((d[i] == 0.0 || d[i] == doctest::Approx(1.0 / 0.75)));
}
