#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "vpt/tensor.hpp"

// Differentiable primitives. Every op leaves its inputs untouched and records
// a backward closure only when some input needs a gradient. Reductions
// accumulate in double and round once on store.
namespace vpt::ops {

// input [N,C,H,W], weight [K,C,kh,kw], bias [K] -> [N,K,H',W'].
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t pad);

// input [N,D], weight [M,D], bias [M] -> [N,M].
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);

Tensor relu(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
// Elementwise product of two same-shape tensors.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, float factor);
// Sum of all elements -> [1].
Tensor sum(const Tensor& x);

// 2x2 window, stride 2. H and W must be even.
Tensor max_pool2x2(const Tensor& x);

Tensor reshape(const Tensor& x, Shape dims);
// [N, ...] -> [N, prod(...)].
Tensor flatten(const Tensor& x);

// Mean over the batch of -log softmax(logits)[label] -> [1].
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> labels);

// a·b / (|a| |b|) for two vectors with the same element count -> [1].
Tensor cosine_similarity(const Tensor& a, const Tensor& b);

// out[n,k] = temperature * cos(features[n], table[k]); features [N,D], table [K,D].
Tensor cosine_logits(const Tensor& features, const Tensor& table, float temperature);

// out[n,j] = x[n, columns[j]]; x [N,K].
Tensor gather_columns(const Tensor& x, std::span<const std::size_t> columns);

// out = images + scatter(values). Image n receives values[j] at flat offset
// positions[n * stride + j] inside its own C*H*W block, where stride is
// values.numel() when positions covers every image and 0 when one shared
// position list applies to the whole batch.
Tensor scatter_add(const Tensor& images, const Tensor& values, std::span<const std::uint32_t> positions);

// Non-differentiable helpers.
std::vector<std::size_t> argmax_rows(const Tensor& x);
Tensor softmax_rows(const Tensor& x);

}  // namespace vpt::ops
