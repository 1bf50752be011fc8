#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "vdnet/errors.hpp"

namespace vdnet {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {
struct TensorImpl;
struct TensorAccess;
}  // namespace detail

/// Dense row-major array of doubles with an optional link to the operation
/// that produced it. Tensors are immutable values; copies share storage.
class Tensor {
 public:
  /// An undefined tensor. Only useful as a placeholder.
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor ones(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;
  std::span<const double> data() const;
  std::vector<double> to_vector() const;
  double operator[](std::size_t flat_index) const { return data()[flat_index]; }
  /// Value of a single-element tensor.
  double item() const;

  bool requires_grad() const;
  /// True when the tensor was not produced by a recorded operation.
  bool is_leaf() const;
  /// Process-unique identity, used to key gradients.
  std::uint64_t id() const;

  /// Same values, no gradient tracking.
  Tensor detach() const;
  /// Same values as a fresh leaf that requires gradients.
  Tensor as_variable() const;

 private:
  explicit Tensor(std::shared_ptr<const detail::TensorImpl> impl) : impl_(std::move(impl)) {}
  const detail::TensorImpl& impl() const;

  std::shared_ptr<const detail::TensorImpl> impl_;

  friend struct detail::TensorAccess;
};

/// Backward rule of a recorded operation. Receives the gradient of the
/// output and one accumulation buffer per input (null when that input does not
/// require gradients); rules must add into the buffers, never assign.
using BackwardRule = std::function<void(std::span<const double> grad_output,
                                        std::span<double* const> grad_inputs)>;

/// Wraps freshly computed values as an operation output. A graph node is
/// attached only when gradients are enabled and some input requires them.
Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                   const char* kind, BackwardRule rule);

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

struct TapeEntry {
  std::string kind;
  std::vector<std::uint64_t> inputs;
  std::uint64_t output = 0;
};

/// Topologically ordered record of the operations reachable from a loss.
struct Tape {
  std::vector<TapeEntry> nodes;
};

Tape record_tape(const Tensor& loss);

/// Gradients of leaf tensors, keyed by tensor identity.
class GradientMap {
 public:
  bool contains(const Tensor& t) const { return grads_.count(t.id()) != 0; }
  /// Gradient of `t`; throws GraphError when `t` did not receive one.
  const Tensor& at(const Tensor& t) const;
  /// Gradient of `t`, or zeros of its shape if it is unreachable from the loss.
  Tensor get_or_zeros(const Tensor& t) const;
  std::size_t size() const { return grads_.size(); }

 private:
  std::unordered_map<std::uint64_t, Tensor> grads_;
  friend GradientMap backward(const Tensor& loss);
};

/// Reverse-mode differentiation of a scalar loss with respect to every leaf
/// that requires gradients and is reachable from it.
GradientMap backward(const Tensor& loss);

// ---------------------------------------------------------------------------
// Operations. Binary elementwise operations broadcast when one shape is a
// trailing suffix of the other; any other mismatch throws ShapeError.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

/// Cross-correlation of x[c_in,h,w] with kernel[c_out,c_in,kh,kw]; optional
/// bias[c_out]. Output extent is (h + 2*padding - kh) / stride + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride = 1,
              std::size_t padding = 0);
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding);

Tensor relu(const Tensor& x);

/// Max over window x window blocks of x[c,h,w]. Ties route the gradient to
/// the lowest flat index in the window.
Tensor maxpool2d(const Tensor& x, std::size_t window, std::size_t stride);

/// weights[m,n] * x[n] + bias[m].
Tensor dense(const Tensor& x, const Tensor& weights, const Tensor& bias);

/// -log softmax(logits)[label] for logits[k].
Tensor softmax_cross_entropy(const Tensor& logits, std::size_t label);

/// Sum over rows of -log softmax(logits[r])[labels[r]] for logits[n,k].
Tensor softmax_cross_entropy_rows(const Tensor& logits, std::span<const std::size_t> labels);

Tensor sum_all(const Tensor& x);

/// Per-channel spatial sum of x[c,h,w] -> [c].
Tensor channel_sum(const Tensor& x);

Tensor reshape(const Tensor& x, const Shape& shape);

/// out.flat[i] = x.flat[indices[i]].
Tensor gather(const Tensor& x, std::span<const std::size_t> indices, const Shape& shape);

/// Elementwise smooth-L1 with unit transition: 0.5 v^2 if |v| < 1 else |v| - 0.5.
Tensor smooth_l1(const Tensor& x);

/// Softmax of a rank-1 tensor; values only, no graph.
std::vector<double> softmax(std::span<const double> logits);

}  // namespace vdnet
