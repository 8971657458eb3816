#pragma once

#include <functional>
#include <vector>

#include "arithlm/tensor.hpp"

namespace arithlm {

/// Reverse-mode tape. Operations append (output, backward rule) records in
/// creation order, so walking the records backwards visits every node after
/// all of its consumers.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  void set_recording(bool on) { recording_ = on; }

  /// True when an op over `inputs` must be recorded.
  bool wants(std::initializer_list<const Tensor*> inputs) const;

  void record(Tensor output, BackwardFn fn);

  /// Seeds d(loss)/d(loss) = 1 and propagates. Intermediate gradients are
  /// reset first, so leaf gradients accumulate across repeated calls.
  void backward(Tensor& loss);

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor output;
    BackwardFn fn;
  };
  std::vector<Node> nodes_;
  bool recording_;
};

}  // namespace arithlm
