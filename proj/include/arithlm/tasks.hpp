#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace arithlm {

enum class Operation { Add, Mul };
enum class DigitOrder { Reverse, Plain };

std::string to_string(Operation op);
std::string to_string(DigitOrder order);
Operation operation_from_string(const std::string& s);
DigitOrder order_from_string(const std::string& s);

struct TaskSpec {
  Operation op = Operation::Add;
  std::size_t operand_bits = 7;
  DigitOrder input_order = DigitOrder::Reverse;
  DigitOrder output_order = DigitOrder::Reverse;

  static TaskSpec addition() { return TaskSpec{}; }
  static TaskSpec multiplication() { return TaskSpec{Operation::Mul}; }

  /// bits+1 for addition, 2*bits for multiplication.
  std::size_t output_length() const;
  std::size_t prompt_length() const { return 2 * operand_bits + 1; }
  std::size_t operand_count() const { return std::size_t{1} << operand_bits; }
  std::size_t pair_count() const { return operand_count() * operand_count(); }
  void validate() const;
  bool operator==(const TaskSpec&) const = default;
};

struct Sample {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  std::vector<int> prompt;
  std::vector<int> completion;
  std::uint64_t result = 0;
  /// Completion was drawn at random and does not encode a op b.
  bool synthetic = false;
};

/// Bits are least-significant first.
struct OracleResult {
  std::vector<int> bits;
  std::uint64_t value = 0;
};

/// Ripple-carry addition driven by the full-adder truth table.
OracleResult oracle_add(std::uint32_t a, std::uint32_t b, std::size_t operand_bits = 7);
/// Shift-and-add multiplication built on the ripple adder.
OracleResult oracle_mul(std::uint32_t a, std::uint32_t b, std::size_t operand_bits = 7);

/// (sum, carry) for one full-adder step.
std::pair<int, int> full_adder(int a, int b, int carry_in);

std::vector<int> encode_operand(std::uint64_t value, std::size_t bits, DigitOrder order);
std::uint64_t decode_operand(std::span<const int> tokens, DigitOrder order);
/// Like decode_operand but counts non-bit tokens (decoded as 0) in `malformed`.
std::uint64_t decode_lenient(std::span<const int> tokens, DigitOrder order,
                             std::size_t* malformed);

std::vector<int> make_prompt(std::uint32_t a, std::uint32_t b, const TaskSpec& task);
Sample make_sample(std::uint32_t a, std::uint32_t b, const TaskSpec& task);

/// Every (A, B) pair in lexicographic order; sample id = A * 2^bits + B.
std::vector<Sample> generate_all(const TaskSpec& task);

std::size_t hamming(std::span<const int> a, std::span<const int> b);

struct SplitSpec {
  std::string name;
  std::uint64_t seed = 0;
  std::vector<std::size_t> train_ids;
  std::vector<std::size_t> validation_ids;
  /// Decoded centroid operands for token-space splits.
  std::optional<std::pair<std::uint32_t, std::uint32_t>> centroid;
};

SplitSpec random_split(std::size_t n, std::uint64_t seed);
/// Validation = the quarter of prompts nearest (Hamming) to the alternating
/// centroid "1010101 op 0101010"; boundary ties go to lower (A, B).
SplitSpec split_vs_t(const std::vector<Sample>& samples, const TaskSpec& task);
/// Validation = the centred value square, 32 <= A, B < 96 for 7-bit operands.
SplitSpec split_vs_v(const std::vector<Sample>& samples, const TaskSpec& task);

/// Centroid prompt tokens used by split_vs_t.
std::vector<int> vs_t_centroid_prompt(const TaskSpec& task);

/// Addition prompts with uniformly random completion bits.
std::vector<Sample> random_output_dataset(std::uint64_t seed, std::size_t operand_bits = 7);

struct DiscontinuityMatrix {
  std::size_t input_bits = 0;   // rows 0..input_bits
  std::size_t output_bits = 0;  // cols 0..output_bits
  std::vector<std::vector<double>> cells;
  /// "exact" or "sampled:<draws>" per row.
  std::vector<std::string> methods;
};

/// Cell (k, j): probability that flipping k of the operand bits changes
/// exactly j bits of the sum. Rows with more than `exact_limit` masks are
/// estimated from `samples_per_row` seeded random masks.
DiscontinuityMatrix discontinuity_matrix(std::size_t operand_bits = 7,
                                         std::size_t exact_limit = 20000,
                                         std::size_t samples_per_row = 100000,
                                         std::uint64_t seed = 0);

std::string tokens_to_string(std::span<const int> tokens, Operation op);

/// One "A B op prompt completion" line per sample.
std::string export_dataset(const std::vector<Sample>& samples, const TaskSpec& task);

}  // namespace arithlm
