#include "vpt/tensor.hpp"

#include <cmath>
#include <cstring>
#include <unordered_map>
#include <unordered_set>

namespace vpt {

std::size_t shape_numel(const Shape& dims) {
  std::size_t n = 1;
  for (auto d : dims) {
    if (d == 0) throw ShapeError("tensor extent must be positive, got shape " + shape_str(dims));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

Tensor::Tensor() : impl_(std::make_shared<TensorImpl>()) {
  impl_->dims = {1};
  impl_->data.assign(1, 0.0f);
}

Tensor::Tensor(Shape dims, float fill) : impl_(std::make_shared<TensorImpl>()) {
  const auto n = shape_numel(dims);
  impl_->dims = std::move(dims);
  impl_->data.assign(n, fill);
}

Tensor::Tensor(Shape dims, std::vector<float> values) : impl_(std::make_shared<TensorImpl>()) {
  const auto n = shape_numel(dims);
  if (n != values.size()) {
    throw ShapeError("shape " + shape_str(dims) + " holds " + std::to_string(n) + " values, got " +
                     std::to_string(values.size()));
  }
  impl_->dims = std::move(dims);
  impl_->data = std::move(values);
}

Tensor Tensor::scalar(float value) { return Tensor(Shape{1}, std::vector<float>{value}); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= impl_->dims.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(impl_->dims));
  }
  return impl_->dims[axis];
}

float Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() needs a single-element tensor, got " + shape_str(dims()));
  return impl_->data[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
  if (impl_->grad_fn) throw Error("requires_grad can only be set on leaf tensors");
  impl_->requires_grad = on;
  return *this;
}

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0f);
}

Tensor Tensor::clone() const { return Tensor(impl_->dims, impl_->data); }

Tensor Tensor::make_result(
    Shape dims, std::vector<float> values, const std::vector<Tensor>& inputs,
    std::function<void(std::span<const float>, std::vector<std::vector<float>*>&)> backward) {
  Tensor out(std::move(dims), std::move(values));
  bool any = false;
  for (const auto& in : inputs) any = any || in.needs_grad();
  if (any) {
    auto node = std::make_shared<Node>();
    node->inputs.reserve(inputs.size());
    for (const auto& in : inputs) node->inputs.push_back(in.impl_);
    node->backward = std::move(backward);
    out.impl_->grad_fn = std::move(node);
  }
  return out;
}

namespace {

bool impl_needs_grad(const TensorImpl& t) { return t.requires_grad || t.grad_fn != nullptr; }

// Post-order DFS: every node appears after all of its inputs.
std::vector<TensorImpl*> topo_order(TensorImpl* root) {
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> seen;
  std::vector<std::pair<TensorImpl*, std::size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [t, next] = stack.back();
    if (t->grad_fn && next < t->grad_fn->inputs.size()) {
      TensorImpl* child = t->grad_fn->inputs[next++].get();
      if (impl_needs_grad(*child) && seen.insert(child).second) stack.push_back({child, 0});
      continue;
    }
    order.push_back(t);
    stack.pop_back();
  }
  return order;
}

}  // namespace

void backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " + shape_str(loss.dims()));
  }
  TensorImpl* root = loss.impl().get();
  if (!impl_needs_grad(*root)) return;

  const auto order = topo_order(root);
  std::unordered_map<TensorImpl*, std::vector<float>> interior;
  interior[root] = {1.0f};
  if (!root->grad_fn) {
    // Loss is itself a leaf.
    if (root->grad.empty()) root->grad.assign(1, 0.0f);
    root->grad[0] += 1.0f;
    return;
  }

  std::vector<std::vector<float>*> buffers;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* t = *it;
    if (!t->grad_fn) continue;
    auto found = interior.find(t);
    if (found == interior.end()) continue;
    std::vector<float> out_grad = std::move(found->second);
    interior.erase(found);

    auto& node = *t->grad_fn;
    buffers.assign(node.inputs.size(), nullptr);
    for (std::size_t i = 0; i < node.inputs.size(); ++i) {
      TensorImpl* in = node.inputs[i].get();
      if (!impl_needs_grad(*in)) continue;
      if (in->grad_fn) {
        auto& buf = interior[in];
        if (buf.empty()) buf.assign(in->data.size(), 0.0f);
        buffers[i] = &buf;
      } else {
        if (in->grad.empty()) in->grad.assign(in->data.size(), 0.0f);
        buffers[i] = &in->grad;
      }
    }
    node.backward(out_grad, buffers);
  }
}

void zero_grads(std::span<Tensor> tensors) {
  for (auto& t : tensors) t.zero_grad();
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  if (a.dims() != b.dims()) return false;
  return std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(float)) == 0;
}

void require_finite(const Tensor& t, const std::string& what) {
  for (float v : t.data()) {
    if (!std::isfinite(v)) throw NumericError(what + " contains a non-finite value");
  }
}

}  // namespace vpt
