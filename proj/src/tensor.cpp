#include "vdnet/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

namespace vdnet {

namespace detail {

struct Node {
  const char* kind;
  std::vector<Tensor> inputs;
  BackwardRule rule;
};

struct TensorImpl {
  std::uint64_t id;
  Shape shape;
  std::vector<double> data;
  bool requires_grad;
  std::shared_ptr<Node> grad_fn;
};

struct TensorAccess {
  static const TensorImpl* raw(const Tensor& t) { return t.impl_.get(); }
  static Tensor wrap(std::shared_ptr<const TensorImpl> impl) { return Tensor(std::move(impl)); }
};

namespace {

std::uint64_t next_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

thread_local bool g_grad_enabled = true;

}  // namespace
}  // namespace detail

using detail::TensorAccess;
using detail::TensorImpl;

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void validate_shape(const Shape& shape, std::size_t data_size) {
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be >= 1, got " + shape_to_string(shape));
  }
  if (shape_numel(shape) != data_size) {
    throw ShapeError("shape " + shape_to_string(shape) + " holds " +
                     std::to_string(shape_numel(shape)) + " elements but data has " +
                     std::to_string(data_size));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
  validate_shape(shape, data.size());
  impl_ = std::make_shared<const TensorImpl>(
      TensorImpl{detail::next_id(), std::move(shape), std::move(data), requires_grad, nullptr});
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  return full(shape, 0.0, requires_grad);
}

Tensor Tensor::ones(const Shape& shape, bool requires_grad) {
  return full(shape, 1.0, requires_grad);
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
  return Tensor(shape, std::vector<double>(shape_numel(shape), value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

const TensorImpl& Tensor::impl() const {
  if (!impl_) throw GraphError("use of an undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return impl().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_to_string(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return impl().data.size(); }

std::span<const double> Tensor::data() const { return impl().data; }

std::vector<double> Tensor::to_vector() const { return impl().data; }

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item() needs a single-element tensor, got " + shape_to_string(shape()));
  }
  return impl().data[0];
}

bool Tensor::requires_grad() const { return impl().requires_grad; }

bool Tensor::is_leaf() const { return impl().grad_fn == nullptr; }

std::uint64_t Tensor::id() const { return impl().id; }

Tensor Tensor::detach() const { return Tensor(shape(), to_vector(), false); }

Tensor Tensor::as_variable() const { return Tensor(shape(), to_vector(), true); }

Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                   const char* kind, BackwardRule rule) {
  validate_shape(shape, data.size());
  bool needs_grad = false;
  if (detail::g_grad_enabled) {
    for (const Tensor& in : inputs) needs_grad = needs_grad || in.requires_grad();
  }
  std::shared_ptr<detail::Node> node;
  if (needs_grad) {
    node = std::make_shared<detail::Node>(detail::Node{kind, std::move(inputs), std::move(rule)});
  }
  return TensorAccess::wrap(std::make_shared<const TensorImpl>(TensorImpl{
      detail::next_id(), std::move(shape), std::move(data), needs_grad, std::move(node)}));
}

NoGradGuard::NoGradGuard() : previous_(detail::g_grad_enabled) { detail::g_grad_enabled = false; }

NoGradGuard::~NoGradGuard() { detail::g_grad_enabled = previous_; }

bool grad_enabled() { return detail::g_grad_enabled; }

namespace {

// Post-order over the recorded graph: every node appears after its inputs.
std::vector<const TensorImpl*> topological_order(const TensorImpl* root) {
  std::vector<const TensorImpl*> order;
  std::unordered_set<const TensorImpl*> visited;
  std::vector<std::pair<const TensorImpl*, std::size_t>> stack;
  if (!root->grad_fn) return order;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [impl, next_input] = stack.back();
    const auto& inputs = impl->grad_fn->inputs;
    if (next_input < inputs.size()) {
      const TensorImpl* child = TensorAccess::raw(inputs[next_input++]);
      if (child->grad_fn && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(impl);
      stack.pop_back();
    }
  }
  return order;
}

void check_loss(const Tensor& loss) {
  if (!loss.defined()) throw GraphError("backward() on an undefined tensor");
  if (loss.numel() != 1) {
    throw GraphError("backward() needs a scalar loss, got shape " + shape_to_string(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw GraphError("backward() on a loss detached from any tensor that requires gradients");
  }
}

}  // namespace

Tape record_tape(const Tensor& loss) {
  check_loss(loss);
  Tape tape;
  for (const TensorImpl* impl : topological_order(TensorAccess::raw(loss))) {
    TapeEntry entry;
    entry.kind = impl->grad_fn->kind;
    entry.output = impl->id;
    for (const Tensor& in : impl->grad_fn->inputs) entry.inputs.push_back(in.id());
    tape.nodes.push_back(std::move(entry));
  }
  return tape;
}

const Tensor& GradientMap::at(const Tensor& t) const {
  auto it = grads_.find(t.id());
  if (it == grads_.end()) throw GraphError("no gradient recorded for tensor " + std::to_string(t.id()));
  return it->second;
}

Tensor GradientMap::get_or_zeros(const Tensor& t) const {
  auto it = grads_.find(t.id());
  return it == grads_.end() ? Tensor::zeros(t.shape()) : it->second;
}

GradientMap backward(const Tensor& loss) {
  check_loss(loss);
  const TensorImpl* root = TensorAccess::raw(loss);
  std::unordered_map<const TensorImpl*, std::vector<double>> buffers;
  std::unordered_map<const TensorImpl*, Tensor> leaves;
  buffers[root] = {1.0};
  if (!root->grad_fn) leaves.emplace(root, loss);

  std::vector<const TensorImpl*> order = topological_order(root);
  std::vector<double*> grad_inputs;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const TensorImpl* impl = *it;
    auto found = buffers.find(impl);
    if (found == buffers.end()) continue;
    std::vector<double> grad_out = std::move(found->second);
    buffers.erase(found);

    const auto& inputs = impl->grad_fn->inputs;
    grad_inputs.assign(inputs.size(), nullptr);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const TensorImpl* in = TensorAccess::raw(inputs[i]);
      if (!in->requires_grad) continue;
      auto& buf = buffers[in];
      if (buf.empty()) buf.assign(in->data.size(), 0.0);
      grad_inputs[i] = buf.data();
      if (!in->grad_fn) leaves.emplace(in, inputs[i]);
    }
    impl->grad_fn->rule(grad_out, grad_inputs);
  }

  GradientMap result;
  for (auto& [impl, tensor] : leaves) {
    result.grads_.emplace(impl->id, Tensor(impl->shape, std::move(buffers[impl])));
  }
  return result;
}

}  // namespace vdnet
