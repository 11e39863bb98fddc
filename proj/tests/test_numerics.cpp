#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "mxfr/errors.hpp"
#include "mxfr/optim.hpp"
#include "mxfr/rng.hpp"
#include "mxfr/tape.hpp"
#include "mxfr/tensor.hpp"

using namespace mxfr;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
  return t;
}

// Finite-difference check of an arbitrary tape-built scalar function.
double check_function(
    ParamStore& store,
    const std::function<NodeId(Tape&, ParamStore&)>& build) {
  auto f = [&](ParamStore& s, bool want_grads) {
    Tape tape;
    NodeId loss = build(tape, s);
    if (want_grads) {
      tape.backward(loss);
      tape.accumulate_grads(s);
    }
    return tape.value(loss).data[0];
  };
  return grad_check(store, f).max_rel_err;
}

}  // namespace

TEST_CASE("rng bounded draws stay in range and rejection is unbiased-ish") {
  Rng rng(1);
  std::vector<size_t> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.below(7)];
  for (size_t c : counts) {
    CHECK(c > 9000);
    CHECK(c < 11000);
  }
  Rng one(2);
  for (int i = 0; i < 100; ++i) CHECK(one.below(1) == 0);
}

TEST_CASE("rng uniform stays in the interval") {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    double v = rng.uniform(-0.08, 0.08);
    CHECK(v >= -0.08);
    CHECK(v < 0.08);
  }
}

TEST_CASE("rng shuffle and sampling are reproducible") {
  std::vector<int> a{1, 2, 3, 4, 5, 6, 7, 8}, b = a;
  Rng r1(42), r2(42);
  r1.shuffle(a);
  r2.shuffle(b);
  CHECK(a == b);

  Rng r3(42), r4(43);
  std::vector<size_t> s1 = r3.sample_indices(100, 10);
  std::vector<size_t> s2 = r4.sample_indices(100, 10);
  CHECK(std::set<size_t>(s1.begin(), s1.end()).size() == 10);
  CHECK(s1 != s2);
}

TEST_CASE("derived seeds differ per stream") {
  std::set<uint64_t> seen;
  for (uint64_t stream = 0; stream < 200; ++stream)
    CHECK(seen.insert(derive_seed(123, stream)).second);
  CHECK(derive_seed(123, 5) == derive_seed(123, 5));
  CHECK(derive_seed(123, 5) != derive_seed(124, 5));
}

TEST_CASE("identity initialization") {
  Tensor sq = identity_init(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(sq.at(i, j) == (i == j ? 1.0 : 0.0));
  Tensor wide = identity_init(2, 4);
  CHECK(wide.at(0, 0) == 1.0);
  CHECK(wide.at(1, 1) == 1.0);
  CHECK(wide.at(0, 2) == 0.0);
  Tensor tall = identity_init(4, 2);
  CHECK(tall.at(3, 1) == 0.0);
  CHECK(tall.at(1, 1) == 1.0);
}

TEST_CASE("fnv1a64 known values") {
  CHECK(fnv1a64("", 0) == 0xCBF29CE484222325ULL);
  CHECK(fnv1a64("a", 1) == 0xAF63DC4C8601EC8CULL);
}

TEST_CASE("masked softmax") {
  ParamStore store;
  Tensor v({4});
  v.data = {1.0, 2.0, 3.0, 4.0};
  Tape tape;
  NodeId x = tape.constant(v);

  NodeId full = tape.masked_softmax(x, {true, true, true, true});
  const Tensor& p = tape.value(full);
  double sum = 0.0;
  for (double d : p.data) sum += d;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p.data[3] > p.data[2]);

  NodeId part = tape.masked_softmax(x, {true, false, true, false});
  const Tensor& q = tape.value(part);
  CHECK(q.data[1] == 0.0);
  CHECK(q.data[3] == 0.0);
  CHECK(q.data[0] + q.data[2] == doctest::Approx(1.0).epsilon(1e-12));
  double expect0 = 1.0 / (1.0 + std::exp(2.0));
  CHECK(q.data[0] == doctest::Approx(expect0).epsilon(1e-12));

  CHECK_THROWS_AS(tape.masked_softmax(x, {false, false, false, false}),
                  NumericalError);
}

TEST_CASE("masked softmax is shift-invariant and overflow-safe") {
  Tensor v({3});
  v.data = {1000.0, 1001.0, 999.0};
  Tape tape;
  const Tensor& p = tape.value(tape.masked_softmax(tape.constant(v),
                                                   {true, true, true}));
  CHECK(std::isfinite(p.data[0]));
  Tensor w({3});
  w.data = {0.0, 1.0, -1.0};
  Tape tape2;
  const Tensor& q = tape2.value(tape2.masked_softmax(tape2.constant(w),
                                                     {true, true, true}));
  for (int i = 0; i < 3; ++i)
    CHECK(p.data[i] == doctest::Approx(q.data[i]).epsilon(1e-12));
}

TEST_CASE("log softmax over a support set") {
  Tensor v({5});
  v.data = {0.5, -0.2, 1.5, 0.0, 2.0};
  Tape tape;
  NodeId lp = tape.log_softmax_support(tape.constant(v),
                                       {true, false, true, false, true});
  const Tensor& out = tape.value(lp);
  double sum = 0.0;
  for (int i : {0, 2, 4}) sum += std::exp(out.data[i]);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::isinf(out.data[1]));
  CHECK(out.data[1] < 0);
}

TEST_CASE("per-primitive gradients match finite differences") {
  Rng rng(11);
  SUBCASE("matvec + add + tanh") {
    ParamStore store;
    store.add("W", random_tensor({3, 4}, rng));
    store.add("x", random_tensor({4}, rng));
    store.add("b", random_tensor({3}, rng));
    double err = check_function(store, [](Tape& t, ParamStore& s) {
      NodeId y = t.tanh_(t.add(t.matvec(t.param(s, "W"), t.param(s, "x")),
                               t.param(s, "b")));
      return t.dot(y, y);
    });
    CHECK(err < 1e-6);
  }
  SUBCASE("sigmoid, mul, sub") {
    ParamStore store;
    store.add("a", random_tensor({5}, rng));
    store.add("b", random_tensor({5}, rng));
    double err = check_function(store, [](Tape& t, ParamStore& s) {
      NodeId y = t.mul(t.sigmoid_(t.param(s, "a")),
                       t.sub(t.param(s, "a"), t.param(s, "b")));
      return t.dot(y, y);
    });
    CHECK(err < 1e-6);
  }
  SUBCASE("concat and pick") {
    ParamStore store;
    store.add("a", random_tensor({3}, rng));
    store.add("b", random_tensor({2}, rng));
    double err = check_function(store, [](Tape& t, ParamStore& s) {
      NodeId c = t.concat({t.param(s, "a"), t.param(s, "b")});
      NodeId sm = t.masked_softmax(c, {true, true, true, true, true});
      NodeId picked =
          t.pick(t.log_softmax_support(c, {true, true, true, true, true}), 2);
      return t.add(picked, t.dot(sm, c));
    });
    CHECK(err < 1e-6);
  }
  SUBCASE("attention-shaped composition") {
    ParamStore store;
    store.add("h1", random_tensor({4}, rng));
    store.add("h2", random_tensor({4}, rng));
    store.add("h3", random_tensor({4}, rng));
    store.add("v", random_tensor({4}, rng));
    double err = check_function(store, [](Tape& t, ParamStore& s) {
      std::vector<NodeId> rows = {t.param(s, "h1"), t.param(s, "h2"),
                                  t.param(s, "h3")};
      std::vector<NodeId> scores;
      for (NodeId r : rows) scores.push_back(t.dot(t.param(s, "v"), t.tanh_(r)));
      NodeId alpha = t.masked_softmax(t.stack(scores), {true, true, false});
      NodeId ctx = t.weighted_sum(alpha, rows);
      return t.dot(ctx, ctx);
    });
    CHECK(err < 1e-6);
  }
  SUBCASE("log softmax pick (cross-entropy shape)") {
    ParamStore store;
    store.add("z", random_tensor({6}, rng));
    double err = check_function(store, [](Tape& t, ParamStore& s) {
      NodeId lp = t.log_softmax_support(
          t.param(s, "z"), {false, true, true, true, true, true});
      return t.sub(t.constant(Tensor({1})), t.pick(lp, 3));
    });
    CHECK(err < 1e-6);
  }
}

TEST_CASE("shape mismatches raise numerical errors naming the op") {
  Tape tape;
  Tensor a({3}), b({4});
  NodeId na = tape.constant(a), nb = tape.constant(b);
  CHECK_THROWS_AS(tape.add(na, nb), NumericalError);
  CHECK_THROWS_AS(tape.dot(na, nb), NumericalError);
  try {
    tape.add(na, nb);
  } catch (const NumericalError& e) {
    std::string msg = e.what();
    CHECK(msg.find("add") != std::string::npos);
  }
}

TEST_CASE("adadelta first step from zero state") {
  ParamStore store;
  Tensor p({1});
  p.data = {1.0};
  store.add("w", p);
  store.zero_grads();
  store.grads.at("w").data[0] = 1.0;
  AdaDeltaState state = AdaDeltaState::init(store);
  adadelta_step(store, state);
  // E[g^2] = 0.05; dx = -sqrt(1e-6)/sqrt(0.05 + 1e-6)
  double expected = -std::sqrt(1e-6) / std::sqrt(0.05 + 1e-6);
  CHECK(store.params.at("w").data[0] ==
        doctest::Approx(1.0 + expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(-4.4721e-3).epsilon(1e-4));
}

TEST_CASE("adadelta with zero gradient leaves parameters unchanged") {
  ParamStore store;
  Tensor p({3});
  p.data = {0.5, -0.25, 2.0};
  store.add("w", p);
  store.zero_grads();
  AdaDeltaState state = AdaDeltaState::init(store);
  adadelta_step(store, state);
  CHECK(store.params.at("w").data == std::vector<double>{0.5, -0.25, 2.0});
}

TEST_CASE("repeated parameter binds share one leaf") {
  ParamStore store;
  Tensor p({2});
  p.data = {1.0, 2.0};
  store.add("w", p);
  Tape tape;
  NodeId a = tape.param(store, "w");
  NodeId b = tape.param(store, "w");
  CHECK(a == b);
  NodeId loss = tape.dot(a, b);  // w . w
  tape.backward(loss);
  store.zero_grads();
  tape.accumulate_grads(store);
  CHECK(store.grads.at("w").data[0] == doctest::Approx(2.0));
  CHECK(store.grads.at("w").data[1] == doctest::Approx(4.0));
}
