#include "arithlm/tape.hpp"

#include "arithlm/errors.hpp"

namespace arithlm {

bool Tape::wants(std::initializer_list<const Tensor*> inputs) const {
  if (!recording_) {
    return false;
  }
  for (const Tensor* t : inputs) {
    if (t && t->requires_grad()) {
      return true;
    }
  }
  return false;
}

void Tape::record(Tensor output, BackwardFn fn) {
  output.set_requires_grad(true);
  nodes_.push_back(Node{std::move(output), std::move(fn)});
}

void Tape::backward(Tensor& loss) {
  if (loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_str(loss.shape()));
  }
  for (auto& node : nodes_) {
    node.output.zero_grad();
  }
  loss.ensure_grad();
  loss.grad()[0] = 1.0f;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    it->fn();
  }
}

}  // namespace arithlm
