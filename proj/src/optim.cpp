#include "vpt/optim.hpp"

#include <cmath>
#include <numbers>

namespace vpt {

double cosine_lr(double lr0, std::size_t step, std::size_t total) {
  if (total == 0) return lr0;
  const double progress = static_cast<double>(step) / static_cast<double>(total);
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

CosineSgd::CosineSgd(double lr0, std::size_t total_steps, double momentum)
    : lr0_(lr0), total_(total_steps), momentum_(momentum) {
  if (!std::isfinite(lr0) || lr0 < 0.0) throw ConfigError("learning rate must be finite and non-negative");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must lie in [0,1)");
}

void CosineSgd::step(std::span<Tensor> params) {
  const double lr = current_lr();
  if (velocity_.size() != params.size()) velocity_.assign(params.size(), {});
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    if (!p.has_grad()) continue;
    const auto g = p.grad();
    auto w = p.mutable_data();
    if (momentum_ > 0.0) {
      auto& v = velocity_[i];
      if (v.empty()) v.assign(g.size(), 0.0f);
      for (std::size_t j = 0; j < g.size(); ++j) {
        v[j] = static_cast<float>(momentum_ * v[j] + g[j]);
        w[j] = static_cast<float>(w[j] - lr * v[j]);
      }
    } else {
      for (std::size_t j = 0; j < g.size(); ++j) w[j] = static_cast<float>(w[j] - lr * g[j]);
    }
    p.zero_grad();
  }
  ++step_;
}

}  // namespace vpt
