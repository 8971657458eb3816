#include <doctest.h>

#include <algorithm>
#include <set>

#include "arithlm/errors.hpp"
#include "arithlm/tasks.hpp"
#include "arithlm/vocab.hpp"

using namespace arithlm;

namespace {

std::string bits(std::uint64_t v, std::size_t n, DigitOrder order = DigitOrder::Reverse) {
  const auto t = encode_operand(v, n, order);
  return tokens_to_string(t, Operation::Add);
}

}  // namespace

TEST_CASE("full adder truth table") {
  const int table[8][5] = {{0, 0, 0, 0, 0}, {0, 0, 1, 1, 0}, {0, 1, 0, 1, 0}, {0, 1, 1, 0, 1},
                           {1, 0, 0, 1, 0}, {1, 0, 1, 0, 1}, {1, 1, 0, 0, 1}, {1, 1, 1, 1, 1}};
  for (const auto& row : table) {
    const auto [s, c] = full_adder(row[0], row[1], row[2]);
    CHECK(s == row[3]);
    CHECK(c == row[4]);
  }
}

TEST_CASE("oracles agree with native arithmetic on every pair") {
  for (std::uint32_t a = 0; a < 128; ++a) {
    for (std::uint32_t b = 0; b < 128; ++b) {
      const auto s = oracle_add(a, b);
      const auto p = oracle_mul(a, b);
      REQUIRE(s.value == a + b);
      REQUIRE(p.value == a * b);
      REQUIRE(s.bits.size() == 8);
      REQUIRE(p.bits.size() == 14);
      std::uint64_t sv = 0, pv = 0;
      for (std::size_t i = 0; i < s.bits.size(); ++i) sv |= std::uint64_t(s.bits[i]) << i;
      for (std::size_t i = 0; i < p.bits.size(); ++i) pv |= std::uint64_t(p.bits[i]) << i;
      REQUIRE(sv == a + b);
      REQUIRE(pv == a * b);
    }
  }
}

TEST_CASE("oracle worked examples and domain errors") {
  const auto r = oracle_add(1, 126);
  CHECK(r.value == 127);
  CHECK(tokens_to_string(make_sample(1, 126, TaskSpec::addition()).completion, Operation::Add) ==
        "11111110");
  CHECK(oracle_add(0, 0).value == 0);
  for (std::uint32_t x : {0u, 1u, 77u, 127u}) {
    CHECK(oracle_mul(0, x).value == 0);
    CHECK(oracle_mul(1, x).value == x);
  }
  CHECK_THROWS_AS(oracle_add(128, 0), DomainError);
  CHECK_THROWS_AS(oracle_mul(0, 200), DomainError);
  CHECK_THROWS_AS(full_adder(2, 0, 0), DomainError);
}

TEST_CASE("operand encoding") {
  CHECK(bits(1, 7) == "1000000");
  CHECK(bits(0, 7) == "0000000");
  CHECK(bits(85, 7) == "1010101");
  CHECK(bits(1, 7, DigitOrder::Plain) == "0000001");
  CHECK_THROWS_AS(encode_operand(128, 7, DigitOrder::Reverse), DomainError);
  for (std::uint64_t x = 0; x < 128; ++x) {
    for (auto order : {DigitOrder::Reverse, DigitOrder::Plain}) {
      REQUIRE(decode_operand(encode_operand(x, 7, order), order) == x);
    }
  }
  const std::vector<int> bad{vocab::kOne, vocab::kOp, vocab::kZero};
  CHECK_THROWS_AS(decode_operand(bad, DigitOrder::Reverse), DomainError);
  std::size_t malformed = 0;
  CHECK(decode_lenient(bad, DigitOrder::Reverse, &malformed) == 1);
  CHECK(malformed == 1);
}

TEST_CASE("sample layout") {
  const auto add = TaskSpec::addition();
  const auto mul = TaskSpec::multiplication();
  CHECK(add.output_length() == 8);
  CHECK(mul.output_length() == 14);
  const auto s = make_sample(1, 126, add);
  REQUIRE(s.prompt.size() == 15);
  CHECK(s.prompt[7] == vocab::kOp);
  CHECK(tokens_to_string(s.prompt, Operation::Add) == "1000000+0111111");
  CHECK(tokens_to_string(make_sample(1, 126, mul).prompt, Operation::Mul) == "1000000*0111111");
  const auto m = make_sample(5, 3, mul);
  CHECK(m.completion.size() == 14);
  CHECK(decode_operand(m.completion, DigitOrder::Reverse) == 15);
}

TEST_CASE("generate_all enumerates every pair in order") {
  for (const auto& task : {TaskSpec::addition(), TaskSpec::multiplication()}) {
    const auto all = generate_all(task);
    REQUIRE(all.size() == 16384);
    for (std::size_t id = 0; id < all.size(); ++id) {
      const auto& s = all[id];
      REQUIRE(s.a * 128 + s.b == id);
      REQUIRE(s.prompt.size() == 15);
      REQUIRE(s.completion.size() == task.output_length());
      REQUIRE(decode_operand(std::span(s.prompt).first(7), DigitOrder::Reverse) == s.a);
      REQUIRE(decode_operand(std::span(s.prompt).subspan(8), DigitOrder::Reverse) == s.b);
      REQUIRE(decode_operand(s.completion, task.output_order) == s.result);
    }
  }
}

TEST_CASE("addition discontinuity witness") {
  const auto task = TaskSpec::addition();
  const auto x = make_sample(1, 126, task);
  const auto y = make_sample(1, 127, task);
  CHECK(hamming(x.prompt, y.prompt) == 1);
  CHECK(hamming(x.completion, y.completion) == 8);
}

TEST_CASE("hamming") {
  const auto a = encode_operand(85, 7, DigitOrder::Reverse);
  const auto b = encode_operand(42, 7, DigitOrder::Reverse);
  CHECK(hamming(a, a) == 0);
  CHECK(hamming(a, b) == 7);
  const auto task = TaskSpec::addition();
  CHECK(hamming(make_prompt(85, 42, task), make_prompt(84, 42, task)) == 1);
  CHECK_THROWS_AS(hamming(a, std::span(b).first(3)), ContractError);
}

TEST_CASE("random split") {
  const auto s = random_split(16384, 9);
  CHECK(s.train_ids.size() == 12288);
  CHECK(s.validation_ids.size() == 4096);
  std::set<std::size_t> all(s.train_ids.begin(), s.train_ids.end());
  for (auto id : s.validation_ids) CHECK_FALSE(all.count(id));
  all.insert(s.validation_ids.begin(), s.validation_ids.end());
  CHECK(all.size() == 16384);
  CHECK(random_split(16384, 9).validation_ids == s.validation_ids);
  CHECK(random_split(16384, 10).validation_ids != s.validation_ids);
}

TEST_CASE("token-space split around the alternating centroid") {
  const auto task = TaskSpec::addition();
  const auto samples = generate_all(task);
  const auto split = split_vs_t(samples, task);
  REQUIRE(split.validation_ids.size() == 4096);
  CHECK(split.train_ids.size() == 12288);
  REQUIRE(split.centroid.has_value());
  CHECK(split.centroid->first == 85);
  CHECK(split.centroid->second == 42);
  const auto centroid = vs_t_centroid_prompt(task);
  CHECK(tokens_to_string(centroid, Operation::Add) == "1010101+0101010");

  std::vector<std::size_t> count(16, 0);
  std::set<std::size_t> val(split.validation_ids.begin(), split.validation_ids.end());
  CHECK(val.count(85 * 128 + 42));
  for (auto id : split.validation_ids) ++count[hamming(samples[id].prompt, centroid)];
  CHECK(count[0] == 1);
  CHECK(count[1] == 14);
  CHECK(count[5] == 2002);
  CHECK(count[6] == 623);
  for (std::size_t d = 7; d < count.size(); ++d) CHECK(count[d] == 0);
  for (std::size_t id = 0; id < samples.size(); ++id) {
    if (hamming(samples[id].prompt, centroid) <= 5) REQUIRE(val.count(id));
  }
  // Boundary ties go to the lexicographically smallest (A, B).
  std::size_t last_included = 0, first_excluded = samples.size();
  for (std::size_t id = 0; id < samples.size(); ++id) {
    if (hamming(samples[id].prompt, centroid) != 6) continue;
    if (val.count(id)) last_included = id;
    else first_excluded = std::min(first_excluded, id);
  }
  CHECK(last_included < first_excluded);
}

TEST_CASE("value-space split is the centred square") {
  const auto task = TaskSpec::addition();
  const auto samples = generate_all(task);
  const auto split = split_vs_v(samples, task);
  CHECK(split.validation_ids.size() == 4096);
  std::set<std::size_t> val(split.validation_ids.begin(), split.validation_ids.end());
  CHECK(val.count(64 * 128 + 64));
  CHECK_FALSE(val.count(0));
  for (auto [a, b] : {std::pair{32, 32}, {32, 95}, {95, 32}, {95, 95}}) {
    CHECK(val.count(std::size_t(a) * 128 + std::size_t(b)));
  }
  CHECK_FALSE(val.count(96 * 128 + 64));
  CHECK_FALSE(val.count(31 * 128 + 64));
  CHECK(split.train_ids.size() == 12288);
  for (auto id : split.train_ids) CHECK_FALSE(val.count(id));
}

TEST_CASE("random-output dataset") {
  const auto d = random_output_dataset(3);
  REQUIRE(d.size() == 16384);
  std::size_t ones = 0;
  for (const auto& s : d) {
    REQUIRE(s.completion.size() == 8);
    REQUIRE(s.synthetic);
    ones += static_cast<std::size_t>(std::count(s.completion.begin(), s.completion.end(), vocab::kOne));
  }
  const double frac = double(ones) / (16384.0 * 8.0);
  CHECK(frac >= 0.48);
  CHECK(frac <= 0.52);
  const auto again = random_output_dataset(3);
  for (std::size_t i = 0; i < d.size(); i += 97) REQUIRE(again[i].completion == d[i].completion);
  CHECK(d[5].prompt == make_prompt(0, 5, TaskSpec::addition()));
}

TEST_CASE("discontinuity matrix") {
  const auto m = discontinuity_matrix();
  REQUIRE(m.cells.size() == 15);
  REQUIRE(m.cells[0].size() == 9);
  CHECK(m.cells[0][0] == 1.0);
  for (const auto& row : m.cells) {
    double sum = 0.0;
    for (double v : row) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK(m.cells[2][3] == doctest::Approx(0.279).epsilon(0.005 / 0.279));
  for (const auto& method : m.methods) CHECK(method == "exact");
  const auto sampled = discontinuity_matrix(7, 1000, 100000, 4);
  CHECK(sampled.methods[7].rfind("sampled", 0) == 0);
  CHECK(sampled.cells[2][3] == doctest::Approx(m.cells[2][3]));
  CHECK(sampled.cells[7][4] == doctest::Approx(m.cells[7][4]).epsilon(0.05));
}

TEST_CASE("dataset export") {
  const auto task = TaskSpec::addition();
  std::vector<Sample> s{make_sample(1, 126, task)};
  CHECK(export_dataset(s, task) == "1 126 + 1000000+0111111 11111110\n");
}
