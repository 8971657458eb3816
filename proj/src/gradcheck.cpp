#include "arithlm/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "arithlm/errors.hpp"
#include "arithlm/rng.hpp"

namespace arithlm {

GradCheckResult gradient_check(const LossFn& loss,
                               const std::vector<std::pair<std::string, Tensor>>& leaves,
                               const GradCheckOptions& opts) {
  for (const auto& [name, t] : leaves) {
    if (!t.requires_grad()) throw ContractError("gradient_check: leaf " + name + " has no grad");
  }
  {
    Tape tape;
    Tensor l = loss(tape);
    for (const auto& [name, t] : leaves) Tensor(t).zero_grad();
    tape.backward(l);
  }
  std::vector<std::vector<real>> analytic;
  for (const auto& [name, t] : leaves) {
    analytic.emplace_back(t.grad().begin(), t.grad().end());
  }

  auto eval = [&] {
    Tape tape(false);
    return static_cast<double>(loss(tape).item());
  };

  GradCheckResult result;
  Rng rng(opts.seed);
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    const auto& [name, t] = leaves[li];
    Tensor leaf = t;
    const std::size_t n = leaf.size();
    std::vector<std::size_t> coords;
    if (n <= opts.samples_per_tensor) {
      for (std::size_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (std::size_t i = 0; i < opts.samples_per_tensor; ++i) coords.push_back(rng.below(n));
    }
    for (std::size_t i : coords) {
      real& x = leaf.data()[i];
      const real orig = x;
      x = static_cast<real>(orig + opts.eps);
      const double up = eval();
      x = static_cast<real>(orig - opts.eps);
      const double down = eval();
      x = orig;
      const double numeric = (up - down) / (2.0 * opts.eps);
      const double a = analytic[li][i];
      const double scale = std::max(std::abs(a), std::abs(numeric));
      const double err = scale < opts.atol ? std::abs(a - numeric) / opts.atol
                                           : std::abs(a - numeric) / scale;
      ++result.checked;
      if (err > opts.rtol) ++result.failures;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

}  // namespace arithlm
