#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace arithlm {

/// xoshiro256** generator seeded through SplitMix64.
///
/// The stream is a pure function of the 64-bit seed, so runs are reproducible
/// across platforms. `split(stream)` derives an independent child generator,
/// which is how a single run seed fans out into init/shuffle/dropout streams.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "xoshiro256**/splitmix64";

  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }
  const std::array<std::uint64_t, 4>& state() const { return s_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 24 bits of resolution.
  float uniform();
  float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform_double();
  /// Standard normal via Box-Muller.
  float normal();
  /// Unbiased integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  /// Seeded Fisher-Yates shuffle of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

  Rng split(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  float spare_ = 0.0f;
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace arithlm
