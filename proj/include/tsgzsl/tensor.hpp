#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tsgzsl/rng.hpp"

namespace tsgzsl::core {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

/// Dense n-dimensional array of doubles, row-major flat storage.
/// `grad` is allocated (zero-filled) whenever `requires_grad` is set;
/// `has_grad` flips to true once a reverse sweep has populated it.
class Tensor {
public:
  Shape shape;
  std::vector<double> values;
  bool requires_grad = false;
  std::vector<double> grad;
  bool has_grad = false;
  std::string name;  // diagnostics and serialization

  static TensorPtr create(Shape shape, std::vector<double> values, bool requires_grad = false);
  static TensorPtr zeros(Shape shape, bool requires_grad = false);
  static TensorPtr full(Shape shape, double v, bool requires_grad = false);
  static TensorPtr scalar(double v, bool requires_grad = false);
  /// i.i.d. uniform values in [lo, hi).
  static TensorPtr uniform(Shape shape, double lo, double hi, Rng& rng, bool requires_grad = false);

  std::size_t numel() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  /// Value of a single-element tensor; throws otherwise.
  double item() const;
  void zero_grad();
};

/// Ordered record of the primitive operations applied to tensors.
/// Nodes are appended in execution order, which is a topological order by
/// construction, so one reverse sweep computes all gradients.
class Tape {
public:
  struct Node {
    std::string op;
    std::vector<TensorPtr> inputs;
    TensorPtr output;
    std::function<void()> backward;  // saved forward context lives in the closure
  };

  /// While disabled, no ops are recorded and outputs do not require grad.
  bool enabled() const { return enabled_; }
  void set_enabled(bool e) { enabled_ = e; }

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_[i]; }
  void clear() { nodes_.clear(); }

  void record(std::string op, std::vector<TensorPtr> inputs, TensorPtr output,
              std::function<void()> backward_fn);

  /// Reverse sweep from a scalar loss: zeroes the grads of every tensor the
  /// tape touches, seeds d(loss)/d(loss)=1 and runs node backwards in reverse
  /// recording order. Deterministic: identical tape -> identical grads.
  void backward(const TensorPtr& loss);

private:
  std::vector<Node> nodes_;
  bool enabled_ = true;
};

/// RAII guard that disables recording for an inference-only region.
class NoGradGuard {
public:
  explicit NoGradGuard(Tape& tape) : tape_(tape), prev_(tape.enabled()) { tape_.set_enabled(false); }
  ~NoGradGuard() { tape_.set_enabled(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
  Tape& tape_;
  bool prev_;
};

// ---- primitives ----
// Elementwise ops broadcast numpy-style (shapes aligned right, each dim equal
// or 1). Shape mismatches throw with both shapes in the message.

TensorPtr add(Tape& tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(Tape& tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(Tape& tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr div(Tape& tape, const TensorPtr& a, const TensorPtr& b);
/// Elementwise multiply by a (typically constant, non-grad) mask.
TensorPtr mask_mul(Tape& tape, const TensorPtr& x, const TensorPtr& mask);

TensorPtr scale(Tape& tape, const TensorPtr& a, double c);
TensorPtr add_scalar(Tape& tape, const TensorPtr& a, double c);

TensorPtr relu(Tape& tape, const TensorPtr& a);
TensorPtr exp(Tape& tape, const TensorPtr& a);
TensorPtr log(Tape& tape, const TensorPtr& a);

/// (m,k) x (k,n) -> (m,n)
TensorPtr matmul(Tape& tape, const TensorPtr& a, const TensorPtr& b);
/// 2-D transpose.
TensorPtr transpose(Tape& tape, const TensorPtr& a);
/// 1-D dot product -> scalar.
TensorPtr dot(Tape& tape, const TensorPtr& a, const TensorPtr& b);

/// x: (B,T,Cin), w: (Cout,Cin,K), bias: (Cout) or null. Stride 1.
/// same_padding: zero-pads by dilation*(K-1) split left/right so T is kept;
/// otherwise output length is T - dilation*(K-1) (must stay positive).
TensorPtr conv1d(Tape& tape, const TensorPtr& x, const TensorPtr& w, const TensorPtr& bias,
                 std::size_t dilation, bool same_padding);

/// Max-pool over the time axis (axis 0 for rank-1, axis 1 for rank-3).
TensorPtr maxpool_time(Tape& tape, const TensorPtr& x, std::size_t window, std::size_t stride);

TensorPtr reduce_sum(Tape& tape, const TensorPtr& x, std::size_t axis, bool keepdim);
TensorPtr reduce_mean(Tape& tape, const TensorPtr& x, std::size_t axis, bool keepdim);
TensorPtr reduce_max(Tape& tape, const TensorPtr& x, std::size_t axis, bool keepdim);
TensorPtr reduce_sum_all(Tape& tape, const TensorPtr& x);
TensorPtr reduce_mean_all(Tape& tape, const TensorPtr& x);

TensorPtr concat(Tape& tape, const std::vector<TensorPtr>& parts, std::size_t axis);
/// Half-open [start, end) along `axis`.
TensorPtr slice(Tape& tape, const TensorPtr& x, std::size_t axis, std::size_t start, std::size_t end);
TensorPtr reshape(Tape& tape, const TensorPtr& x, Shape new_shape);

/// Numerically stable row-wise log(sum(exp(.))) for a rank-2 input: (n,m) -> (n,1).
/// Composite of primitives, so it is differentiable like everything else.
TensorPtr logsumexp_rows(Tape& tape, const TensorPtr& x);

}  // namespace tsgzsl::core
