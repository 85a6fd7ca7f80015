#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vpt/errors.hpp"

namespace vpt {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& dims);
std::string shape_str(const Shape& dims);

struct TensorImpl;

// One recorded operation. `backward` receives the gradient of the node's
// output and one accumulation buffer per input (nullptr when that input
// does not need a gradient).
struct Node {
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::function<void(std::span<const float> out_grad, std::vector<std::vector<float>*>& input_grads)>
      backward;
};

struct TensorImpl {
  Shape dims;
  std::vector<float> data;
  std::vector<float> grad;  // empty until a backward pass writes to it
  bool requires_grad = false;
  std::shared_ptr<Node> grad_fn;
};

// Dense row-major f32 tensor. Copies share storage (handle semantics, like
// most autograd engines); use clone() for an independent deep copy.
//
// Outputs of differentiable ops keep a reference to the node that produced
// them, so the compute graph lives exactly as long as the tensors that
// reference it. A graph must only be used from one thread.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape dims, float fill = 0.0f);
  Tensor(Shape dims, std::vector<float> values);

  static Tensor scalar(float value);

  const Shape& dims() const { return impl_->dims; }
  std::size_t rank() const { return impl_->dims.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const float> data() const { return impl_->data; }
  // Writable view for leaves (parameters, inputs). Writing into a tensor that
  // participates in a live graph invalidates that graph.
  std::span<float> mutable_data() { return impl_->data; }
  float item() const;
  float at(std::size_t flat_index) const { return impl_->data.at(flat_index); }

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool on);
  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const float> grad() const { return impl_->grad; }
  void zero_grad();

  // True when gradients flow through this tensor (leaf with requires_grad or
  // output of a recorded op).
  bool needs_grad() const { return impl_->requires_grad || impl_->grad_fn != nullptr; }

  Tensor clone() const;  // deep copy of data; no grad, no graph

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

  // Creates an output tensor, recording `backward` when any input needs a
  // gradient. Used by op implementations.
  static Tensor make_result(Shape dims, std::vector<float> values, const std::vector<Tensor>& inputs,
                            std::function<void(std::span<const float>, std::vector<std::vector<float>*>&)>
                                backward);

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Reverse-mode pass from a single-element tensor. Gradients accumulate into
// every reachable leaf with requires_grad; leaves off the path are untouched.
void backward(const Tensor& loss);

// Clears gradient buffers of the given leaves.
void zero_grads(std::span<Tensor> tensors);

// Bitwise equality of extents and payload.
bool bit_equal(const Tensor& a, const Tensor& b);

// Throws NumericError when any value is NaN or infinite.
void require_finite(const Tensor& t, const std::string& what);

}  // namespace vpt
