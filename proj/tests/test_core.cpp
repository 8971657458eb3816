#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "arithlm/errors.hpp"
#include "arithlm/ops.hpp"
#include "arithlm/rng.hpp"
#include "arithlm/tape.hpp"
#include "arithlm/tensor.hpp"

using namespace arithlm;

TEST_CASE("tensor construction and invariants") {
  Tensor t({2, 3}, 1.5f);
  CHECK(t.size() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK_FALSE(t.has_grad());
  t.set_requires_grad(true);
  CHECK(t.grad().size() == t.size());
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<real>{1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(t.item(), ContractError);
  CHECK(Tensor::scalar(4.0f).item() == 4.0f);
  Tensor c = t.clone();
  c.data()[0] = 9.0f;
  CHECK(t.data()[0] == 1.5f);
  CHECK_FALSE(c.same_storage(t));
}

TEST_CASE("rng determinism and statistics") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
  Rng u(7);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double v = u.uniform();
    REQUIRE(v >= 0.0);
    REQUIRE(v < 1.0);
    sum += v;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.01);
  double m = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = u.normal();
    m += v;
    sq += v * v;
  }
  CHECK(std::abs(m / n) < 0.02);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
  CHECK(Rng(3).permutation(1) == std::vector<std::size_t>{0});
  auto p = Rng(3).permutation(50);
  CHECK(p == Rng(3).permutation(50));
  std::set<std::size_t> uniq(p.begin(), p.end());
  CHECK(uniq.size() == 50);
  CHECK(*uniq.rbegin() == 49);
  CHECK(Rng(3).split(1).next_u64() != Rng(3).split(2).next_u64());
  CHECK(std::string(Rng::kAlgorithm) == "xoshiro256**/splitmix64");
  for (int i = 0; i < 1000; ++i) REQUIRE(u.below(7) < 7);
}

TEST_CASE("matmul examples") {
  Tape tape(false);
  Tensor i2({2, 2}, std::vector<real>{1, 0, 0, 1});
  CHECK(ops::matmul(tape, i2, i2).data()[3] == 1.0f);
  Tensor a({2, 2}, std::vector<real>{1, 2, 3, 4});
  Tensor ones({2, 1}, std::vector<real>{1, 1});
  const auto r = ops::matmul(tape, a, ones);
  CHECK(r.shape() == Shape{2, 1});
  CHECK(r.data()[0] == 3.0f);
  CHECK(r.data()[1] == 7.0f);
  const auto z = ops::matmul(tape, a, Tensor({2, 3}, 0.0f));
  for (real v : z.data()) CHECK(v == 0.0f);
  CHECK_THROWS_AS(ops::matmul(tape, a, Tensor({3, 1}, 0.0f)), DimensionError);
}

TEST_CASE("softmax examples") {
  Tape tape(false);
  auto s = ops::softmax_rows(tape, Tensor({1, 2}, std::vector<real>{0, 0}));
  CHECK(s.data()[0] == doctest::Approx(0.5));
  s = ops::softmax_rows(tape, Tensor({1, 2}, std::vector<real>{1000, 0}));
  CHECK(s.data()[0] == doctest::Approx(1.0));
  CHECK(s.data()[1] == doctest::Approx(0.0));
  s = ops::softmax_rows(tape, Tensor({1, 3}, std::vector<real>{0, std::log(2.0f), std::log(3.0f)}));
  CHECK(s.data()[0] == doctest::Approx(1.0 / 6));
  CHECK(s.data()[1] == doctest::Approx(2.0 / 6));
  CHECK(s.data()[2] == doctest::Approx(3.0 / 6));
  Rng rng(1);
  Tensor x({10, 7}, 0.0f);
  for (auto& v : x.data()) v = 5.0f * rng.normal();
  s = ops::softmax_rows(tape, x);
  for (std::size_t r = 0; r < 10; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < 7; ++c) sum += s.data()[r * 7 + c];
    CHECK(std::abs(sum - 1.0) <= 1e-6);
  }
  CHECK_THROWS_AS(ops::softmax_rows(tape, Tensor({1, 2}, std::vector<real>{NAN, 0})), NumericError);
}

TEST_CASE("cross entropy examples") {
  Tape tape(false);
  const std::vector<int> t0{0, 3};
  auto l = ops::cross_entropy(tape, Tensor({2, 5}, 0.0f), t0);
  CHECK(l.item() == doctest::Approx(std::log(5.0)));
  Tensor big({1, 5}, std::vector<real>{60, 0, 0, 0, 0});
  CHECK(ops::cross_entropy(tape, big, std::vector<int>{0}).item() == doctest::Approx(0.0));
  Tensor logits({2, 5}, std::vector<real>{0, 0, 0, 0, 0, 1, 0, 0, 0, 0});
  const double expected = (std::log(5.0) + (-1.0 + std::log(std::exp(1.0) + 4.0))) / 2.0;
  CHECK(ops::cross_entropy(tape, logits, std::vector<int>{0, 0}).item() ==
        doctest::Approx(expected));
  CHECK(ops::cross_entropy(tape, logits, std::vector<int>{0, -1}).item() ==
        doctest::Approx(std::log(5.0)));
  CHECK_THROWS_AS(ops::cross_entropy(tape, logits, std::vector<int>{0, 5}), IndexError);
  CHECK_THROWS_AS(ops::cross_entropy(tape, logits, std::vector<int>{0}), DimensionError);
}

TEST_CASE("backward rules") {
  Tensor x({3}, std::vector<real>{1, -2, 3});
  x.set_requires_grad(true);
  {
    Tape tape;
    Tensor l = ops::sum(tape, x);
    tape.backward(l);
    for (real g : x.grad()) CHECK(g == 1.0f);
  }
  x.zero_grad();
  {
    Tape tape;
    Tensor l = ops::sum(tape, ops::mul(tape, x, x));
    tape.backward(l);
    for (std::size_t i = 0; i < 3; ++i) CHECK(x.grad()[i] == 2.0f * x.data()[i]);
  }
  x.zero_grad();
  {
    Tape tape;
    Tensor l = ops::sum(tape, ops::add(tape, x, x));
    tape.backward(l);
    for (real g : x.grad()) CHECK(g == 2.0f);
    tape.backward(l);
    for (real g : x.grad()) CHECK(g == 4.0f);
  }
  {
    Tape tape;
    Tensor y = ops::scale(tape, x, 2.0f);
    CHECK_THROWS_AS(tape.backward(y), ContractError);
  }
}

TEST_CASE("embedding, dropout and layer norm") {
  Tape tape(false);
  Tensor table({5, 2}, std::vector<real>{0, 0, 1, 1, 2, 2, 3, 3, 4, 4});
  const auto e = ops::embedding(tape, table, std::vector<int>{4, 0, 2});
  CHECK(e.data()[0] == 4.0f);
  CHECK(e.data()[4] == 2.0f);
  CHECK_THROWS_AS(ops::embedding(tape, table, std::vector<int>{5}), IndexError);

  Tensor x({4, 8}, 1.0f);
  CHECK(ops::dropout(tape, x, 0.5f, nullptr).same_storage(x));
  Rng rng(2);
  const auto d = ops::dropout(tape, x, 0.5f, &rng);
  for (real v : d.data()) CHECK((v == 0.0f || v == 2.0f));

  Rng r(4);
  for (auto& v : x.data()) v = r.normal() * 3.0f + 1.0f;
  Tensor g({8}, 1.0f), b({8}, 0.0f);
  const auto n = ops::layer_norm(tape, x, g, &b);
  for (std::size_t row = 0; row < 4; ++row) {
    double mean = 0.0, var = 0.0;
    for (std::size_t c = 0; c < 8; ++c) mean += n.data()[row * 8 + c];
    mean /= 8;
    for (std::size_t c = 0; c < 8; ++c) var += std::pow(n.data()[row * 8 + c] - mean, 2);
    CHECK(std::abs(mean) < 1e-5);
    CHECK(var / 8 == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("causal attention ignores later keys") {
  Tape tape(false);
  Rng rng(9);
  auto rnd = [&](Shape s) {
    Tensor t(s, 0.0f);
    for (auto& v : t.data()) v = rng.normal();
    return t;
  };
  Tensor q = rnd({4, 8}), k = rnd({4, 8}), v = rnd({4, 8});
  ops::AttentionSpec spec{.batch = 1, .q_len = 4, .kv_len = 4, .heads = 2, .causal = true};
  const auto base = ops::attention(tape, q, k, v, spec);
  Tensor k2 = k.clone(), v2 = v.clone();
  for (std::size_t c = 0; c < 8; ++c) {
    k2.data()[3 * 8 + c] += 1.0f;
    v2.data()[3 * 8 + c] -= 2.0f;
  }
  const auto changed = ops::attention(tape, q, k2, v2, spec);
  for (std::size_t i = 0; i < 3 * 8; ++i) CHECK(base.data()[i] == changed.data()[i]);
  CHECK(base.data()[3 * 8] != changed.data()[3 * 8]);
  spec.heads = 3;
  CHECK_THROWS_AS(ops::attention(tape, q, k, v, spec), DimensionError);
}

TEST_CASE("block transform rewrites a copy") {
  Tensor x({6, 2}, 1.0f);
  const auto y = ops::transform_blocks(x, 3, [](std::span<real> block, std::size_t rows) {
    CHECK(rows == 3);
    CHECK(block.size() == 6);
    block[0] = 0.0f;
  });
  CHECK(x.data()[0] == 1.0f);
  CHECK(y.data()[0] == 0.0f);
  CHECK(y.data()[6] == 0.0f);
  CHECK(y.data()[1] == 1.0f);
}
