#include "arithlm/tasks.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <sstream>

#include "arithlm/errors.hpp"
#include "arithlm/rng.hpp"
#include "arithlm/vocab.hpp"

namespace arithlm {

std::string to_string(Operation op) { return op == Operation::Add ? "add" : "mul"; }
std::string to_string(DigitOrder order) {
  return order == DigitOrder::Reverse ? "reverse" : "plain";
}

Operation operation_from_string(const std::string& s) {
  if (s == "add" || s == "+") return Operation::Add;
  if (s == "mul" || s == "*" || s == "x") return Operation::Mul;
  throw ConfigError("unknown operation '" + s + "'");
}

DigitOrder order_from_string(const std::string& s) {
  if (s == "reverse") return DigitOrder::Reverse;
  if (s == "plain") return DigitOrder::Plain;
  throw ConfigError("unknown digit order '" + s + "'");
}

std::size_t TaskSpec::output_length() const {
  return op == Operation::Add ? operand_bits + 1 : 2 * operand_bits;
}

void TaskSpec::validate() const {
  if (operand_bits == 0 || operand_bits > 15) {
    throw ConfigError("operand_bits must lie in 1..15, got " + std::to_string(operand_bits));
  }
}

namespace {

void check_operand(std::uint64_t x, std::size_t bits) {
  if (x >= (std::uint64_t{1} << bits)) {
    throw DomainError("operand " + std::to_string(x) + " does not fit in " +
                      std::to_string(bits) + " bits");
  }
}

std::vector<int> to_bits(std::uint64_t x, std::size_t width) {
  std::vector<int> bits(width);
  for (std::size_t i = 0; i < width; ++i) bits[i] = static_cast<int>((x >> i) & 1U);
  return bits;
}

std::uint64_t from_bits(std::span<const int> bits) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    v |= static_cast<std::uint64_t>(bits[i] & 1) << i;
  }
  return v;
}

// Adds two equally wide LSB-first bit vectors; the result is one bit wider.
std::vector<int> ripple_add(std::span<const int> a, std::span<const int> b) {
  std::vector<int> out(a.size() + 1);
  int carry = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto [s, c] = full_adder(a[i], b[i], carry);
    out[i] = s;
    carry = c;
  }
  out[a.size()] = carry;
  return out;
}

}  // namespace

std::pair<int, int> full_adder(int a, int b, int carry_in) {
  if ((a | b | carry_in) & ~1) throw DomainError("full_adder inputs must be bits");
  // Rows indexed by (a, b, carry_in) as a 3-bit number.
  static constexpr std::array<std::pair<int, int>, 8> kTable{{
      {0, 0}, {1, 0}, {1, 0}, {0, 1}, {1, 0}, {0, 1}, {0, 1}, {1, 1},
  }};
  return kTable[static_cast<std::size_t>((a << 2) | (b << 1) | carry_in)];
}

OracleResult oracle_add(std::uint32_t a, std::uint32_t b, std::size_t operand_bits) {
  check_operand(a, operand_bits);
  check_operand(b, operand_bits);
  auto bits = ripple_add(to_bits(a, operand_bits), to_bits(b, operand_bits));
  const std::uint64_t value = from_bits(bits);
  return {std::move(bits), value};
}

OracleResult oracle_mul(std::uint32_t a, std::uint32_t b, std::size_t operand_bits) {
  check_operand(a, operand_bits);
  check_operand(b, operand_bits);
  const std::size_t width = 2 * operand_bits;
  const auto a_bits = to_bits(a, operand_bits);
  const auto b_bits = to_bits(b, operand_bits);
  std::vector<int> acc(width, 0);
  for (std::size_t i = 0; i < operand_bits; ++i) {
    if (!b_bits[i]) continue;
    std::vector<int> partial(width, 0);
    for (std::size_t j = 0; j < operand_bits && i + j < width; ++j) partial[i + j] = a_bits[j];
    auto sum = ripple_add(acc, partial);
    // The product fits in 2*bits, so the final carry is always zero.
    std::copy_n(sum.begin(), width, acc.begin());
  }
  const std::uint64_t value = from_bits(acc);
  return {std::move(acc), value};
}

std::vector<int> encode_operand(std::uint64_t value, std::size_t bits, DigitOrder order) {
  check_operand(value, bits);
  std::vector<int> tokens(bits);
  for (std::size_t i = 0; i < bits; ++i) {
    tokens[i] = vocab::bit_token(static_cast<int>((value >> i) & 1U));
  }
  if (order == DigitOrder::Plain) std::reverse(tokens.begin(), tokens.end());
  return tokens;
}

std::uint64_t decode_lenient(std::span<const int> tokens, DigitOrder order,
                             std::size_t* malformed) {
  std::uint64_t v = 0;
  const std::size_t n = tokens.size();
  for (std::size_t i = 0; i < n; ++i) {
    const int t = order == DigitOrder::Reverse ? tokens[i] : tokens[n - 1 - i];
    if (!vocab::is_bit(t)) {
      if (malformed) ++*malformed;
      continue;
    }
    if (t == vocab::kOne) v |= std::uint64_t{1} << i;
  }
  return v;
}

std::uint64_t decode_operand(std::span<const int> tokens, DigitOrder order) {
  std::size_t bad = 0;
  const auto v = decode_lenient(tokens, order, &bad);
  if (bad) throw DomainError("token sequence contains non-bit tokens");
  return v;
}

std::vector<int> make_prompt(std::uint32_t a, std::uint32_t b, const TaskSpec& task) {
  auto prompt = encode_operand(a, task.operand_bits, task.input_order);
  prompt.push_back(vocab::kOp);
  const auto rhs = encode_operand(b, task.operand_bits, task.input_order);
  prompt.insert(prompt.end(), rhs.begin(), rhs.end());
  return prompt;
}

Sample make_sample(std::uint32_t a, std::uint32_t b, const TaskSpec& task) {
  Sample s;
  s.a = a;
  s.b = b;
  s.prompt = make_prompt(a, b, task);
  const auto r = task.op == Operation::Add ? oracle_add(a, b, task.operand_bits)
                                           : oracle_mul(a, b, task.operand_bits);
  s.result = r.value;
  s.completion = encode_operand(r.value, task.output_length(), task.output_order);
  return s;
}

std::vector<Sample> generate_all(const TaskSpec& task) {
  task.validate();
  const auto n = static_cast<std::uint32_t>(task.operand_count());
  std::vector<Sample> samples;
  samples.reserve(task.pair_count());
  for (std::uint32_t a = 0; a < n; ++a) {
    for (std::uint32_t b = 0; b < n; ++b) samples.push_back(make_sample(a, b, task));
  }
  return samples;
}

std::size_t hamming(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) {
    throw ContractError("hamming: lengths " + std::to_string(a.size()) + " and " +
                        std::to_string(b.size()) + " differ");
  }
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

SplitSpec random_split(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  auto perm = rng.permutation(n);
  const std::size_t n_train = n * 3 / 4;
  SplitSpec split;
  split.name = "random";
  split.seed = seed;
  split.train_ids.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.validation_ids.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  return split;
}

std::vector<int> vs_t_centroid_prompt(const TaskSpec& task) {
  // "1010101 op 0101010" as written, read token by token.
  std::vector<int> prompt;
  for (std::size_t i = 0; i < task.operand_bits; ++i) prompt.push_back(vocab::bit_token(i % 2 == 0));
  prompt.push_back(vocab::kOp);
  for (std::size_t i = 0; i < task.operand_bits; ++i) prompt.push_back(vocab::bit_token(i % 2 == 1));
  return prompt;
}

SplitSpec split_vs_t(const std::vector<Sample>& samples, const TaskSpec& task) {
  const auto centroid = vs_t_centroid_prompt(task);
  std::vector<std::pair<std::size_t, std::size_t>> ranked;  // (distance, id)
  ranked.reserve(samples.size());
  for (std::size_t id = 0; id < samples.size(); ++id) {
    ranked.emplace_back(hamming(samples[id].prompt, centroid), id);
  }
  // Ids follow lexicographic (A, B) order, so sorting pairs breaks ties by (A, B).
  std::sort(ranked.begin(), ranked.end());
  const std::size_t n_val = samples.size() / 4;
  SplitSpec split;
  split.name = "vs_t";
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    (i < n_val ? split.validation_ids : split.train_ids).push_back(ranked[i].second);
  }
  std::sort(split.validation_ids.begin(), split.validation_ids.end());
  std::sort(split.train_ids.begin(), split.train_ids.end());
  const std::span<const int> lhs(centroid.data(), task.operand_bits);
  const std::span<const int> rhs(centroid.data() + task.operand_bits + 1, task.operand_bits);
  split.centroid = std::make_pair(static_cast<std::uint32_t>(decode_operand(lhs, task.input_order)),
                                  static_cast<std::uint32_t>(decode_operand(rhs, task.input_order)));
  return split;
}

SplitSpec split_vs_v(const std::vector<Sample>& samples, const TaskSpec& task) {
  const std::uint32_t n = static_cast<std::uint32_t>(task.operand_count());
  const std::uint32_t lo = n / 4, hi = 3 * n / 4;
  SplitSpec split;
  split.name = "vs_v";
  for (std::size_t id = 0; id < samples.size(); ++id) {
    const auto& s = samples[id];
    const bool inside = s.a >= lo && s.a < hi && s.b >= lo && s.b < hi;
    (inside ? split.validation_ids : split.train_ids).push_back(id);
  }
  split.centroid = std::make_pair(n / 2, n / 2);
  return split;
}

std::vector<Sample> random_output_dataset(std::uint64_t seed, std::size_t operand_bits) {
  TaskSpec task;
  task.operand_bits = operand_bits;
  auto samples = generate_all(task);
  Rng rng(seed);
  for (auto& s : samples) {
    for (int& t : s.completion) t = vocab::bit_token(static_cast<int>(rng.below(2)));
    s.result = decode_operand(s.completion, task.output_order);
    s.synthetic = true;
  }
  return samples;
}

namespace {

std::uint64_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  std::uint64_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Gosper's hack: next integer with the same popcount.
std::uint32_t next_combination(std::uint32_t x) {
  const std::uint32_t c = x & (0U - x);
  const std::uint32_t r = x + c;
  return (((r ^ x) >> 2) / c) | r;
}

}  // namespace

DiscontinuityMatrix discontinuity_matrix(std::size_t operand_bits, std::size_t exact_limit,
                                         std::size_t samples_per_row, std::uint64_t seed) {
  const std::size_t in_bits = 2 * operand_bits;
  const std::size_t out_bits = operand_bits + 1;
  const std::uint32_t pairs = 1U << in_bits;
  const std::uint32_t operand_mask = (1U << operand_bits) - 1;
  auto sum_of = [&](std::uint32_t word) {
    return (word >> operand_bits) + (word & operand_mask);
  };

  DiscontinuityMatrix m;
  m.input_bits = in_bits;
  m.output_bits = out_bits;
  m.cells.assign(in_bits + 1, std::vector<double>(out_bits + 1, 0.0));
  m.methods.resize(in_bits + 1);
  Rng rng(seed);

  for (std::size_t k = 0; k <= in_bits; ++k) {
    std::vector<std::uint64_t> counts(out_bits + 1, 0);
    const std::uint64_t masks = binomial(in_bits, k);
    double total = 0.0;
    if (masks <= exact_limit) {
      std::uint32_t mask = k == 0 ? 0U : (1U << k) - 1;
      for (std::uint64_t mi = 0; mi < masks; ++mi) {
        for (std::uint32_t word = 0; word < pairs; ++word) {
          const auto changed = std::popcount(sum_of(word) ^ sum_of(word ^ mask));
          ++counts[static_cast<std::size_t>(changed)];
        }
        if (k > 0) mask = next_combination(mask);
      }
      total = static_cast<double>(masks) * pairs;
      m.methods[k] = "exact";
    } else {
      for (std::size_t draw = 0; draw < samples_per_row; ++draw) {
        // Partial Fisher-Yates picks k distinct bit positions.
        std::vector<std::uint32_t> pos(in_bits);
        std::iota(pos.begin(), pos.end(), 0U);
        std::uint32_t mask = 0;
        for (std::size_t i = 0; i < k; ++i) {
          const auto j = i + static_cast<std::size_t>(rng.below(in_bits - i));
          std::swap(pos[i], pos[j]);
          mask |= 1U << pos[i];
        }
        const auto word = static_cast<std::uint32_t>(rng.below(pairs));
        ++counts[static_cast<std::size_t>(std::popcount(sum_of(word) ^ sum_of(word ^ mask)))];
      }
      total = static_cast<double>(samples_per_row);
      m.methods[k] = "sampled:" + std::to_string(samples_per_row);
    }
    for (std::size_t j = 0; j <= out_bits; ++j) {
      m.cells[k][j] = static_cast<double>(counts[j]) / total;
    }
  }
  return m;
}

std::string tokens_to_string(std::span<const int> tokens, Operation op) {
  std::string out;
  for (int t : tokens) {
    switch (t) {
      case vocab::kZero: out += '0'; break;
      case vocab::kOne: out += '1'; break;
      case vocab::kOp: out += op == Operation::Add ? '+' : '*'; break;
      case vocab::kStart: out += 'S'; break;
      default: out += '?'; break;
    }
  }
  return out;
}

std::string export_dataset(const std::vector<Sample>& samples, const TaskSpec& task) {
  std::ostringstream os;
  const char op = task.op == Operation::Add ? '+' : '*';
  for (const auto& s : samples) {
    os << s.a << ' ' << s.b << ' ' << op << ' ' << tokens_to_string(s.prompt, task.op) << ' '
       << tokens_to_string(s.completion, task.op) << '\n';
  }
  return os.str();
}

}  // namespace arithlm
