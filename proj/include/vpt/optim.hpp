#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vpt/tensor.hpp"

namespace vpt {

// lr0 * 0.5 * (1 + cos(pi * step / total)); lr0 when total == 0.
double cosine_lr(double lr0, std::size_t step, std::size_t total);

// Plain (optionally momentum) SGD on a cosine-decayed learning rate. One
// instance owns the update of one fixed parameter list.
class CosineSgd {
 public:
  CosineSgd(double lr0, std::size_t total_steps, double momentum = 0.0);

  double lr0() const { return lr0_; }
  double current_lr() const { return cosine_lr(lr0_, step_, total_); }
  std::size_t step_index() const { return step_; }
  std::size_t total_steps() const { return total_; }

  // p -= lr(t) * v with v = momentum * v + grad, then clears the grads and
  // advances t. Params without a grad buffer are skipped.
  void step(std::span<Tensor> params);

 private:
  double lr0_;
  std::size_t total_;
  double momentum_;
  std::size_t step_ = 0;
  std::vector<std::vector<float>> velocity_;
};

}  // namespace vpt
