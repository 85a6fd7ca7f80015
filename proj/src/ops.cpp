#include "vpt/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "kernels.hpp"

namespace vpt::ops {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* name) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + name + " must have rank " + std::to_string(rank) + ", got " +
                     shape_str(t.dims()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.dims() != b.dims()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.dims()) + " vs " + shape_str(b.dims()));
  }
}

std::string dim_mismatch(const char* op, const char* what, std::size_t got, std::size_t want) {
  return std::string(op) + ": " + what + " is " + std::to_string(got) + ", expected " + std::to_string(want);
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t pad) {
  require_rank(input, 4, "conv2d", "input");
  require_rank(weight, 4, "conv2d", "weight");
  require_rank(bias, 1, "conv2d", "bias");
  if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  const std::size_t n_img = input.dim(0), chans = input.dim(1), height = input.dim(2), width = input.dim(3);
  const std::size_t out_ch = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  if (weight.dim(1) != chans) throw ShapeError(dim_mismatch("conv2d", "weight channel dim (1)", weight.dim(1), chans));
  if (bias.dim(0) != out_ch) throw ShapeError(dim_mismatch("conv2d", "bias length (0)", bias.dim(0), out_ch));
  if (kh > height + 2 * pad) throw ShapeError(dim_mismatch("conv2d", "kernel height (2)", kh, height + 2 * pad));
  if (kw > width + 2 * pad) throw ShapeError(dim_mismatch("conv2d", "kernel width (3)", kw, width + 2 * pad));
  if ((height + 2 * pad - kh) % stride != 0 || (width + 2 * pad - kw) % stride != 0) {
    throw ShapeError("conv2d: output extent is not exact for input " + shape_str(input.dims()) + ", kernel " +
                     std::to_string(kh) + "x" + std::to_string(kw) + ", stride " + std::to_string(stride) +
                     ", pad " + std::to_string(pad));
  }
  const std::size_t out_h = (height + 2 * pad - kh) / stride + 1;
  const std::size_t out_w = (width + 2 * pad - kw) / stride + 1;
  const std::size_t patch = chans * kh * kw;
  const std::size_t plane = out_h * out_w;
  const kernels::ConvGeometry geo{chans, height, width, kh, kw, stride, pad, out_h, out_w};

  auto cols = std::make_shared<std::vector<float>>(n_img * patch * plane);
  std::vector<float> out(n_img * out_ch * plane);
  const float* x = input.data().data();
  const float* w = weight.data().data();
  const float* b = bias.data().data();
  for (std::size_t n = 0; n < n_img; ++n) {
    float* col = cols->data() + n * patch * plane;
    kernels::im2col(geo, x + n * chans * height * width, col);
    kernels::gemm_f64acc(out_ch, plane, patch, w, patch, 1, col, plane, out.data() + n * out_ch * plane, plane, false,
                         b);
  }

  auto w_impl = weight.impl();
  return Tensor::make_result(
      {n_img, out_ch, out_h, out_w}, std::move(out), {input, weight, bias},
      [=](std::span<const float> g, std::vector<std::vector<float>*>& grads) {
        std::vector<float>* dx = grads[0];
        std::vector<float>* dw = grads[1];
        std::vector<float>* db = grads[2];
        const float* wd = w_impl->data.data();
        if (db) {
          for (std::size_t k = 0; k < out_ch; ++k) {
            double s = 0.0;
            for (std::size_t n = 0; n < n_img; ++n) s += kernels::sum_f64(g.data() + (n * out_ch + k) * plane, plane);
            (*db)[k] += static_cast<float>(s);
          }
        }
        if (dw) {
          std::vector<double> dw_acc(out_ch * patch, 0.0);
          std::vector<float> col_t(plane * patch);
          for (std::size_t n = 0; n < n_img; ++n) {
            kernels::transpose(cols->data() + n * patch * plane, patch, plane, col_t.data());
            kernels::gemm_f64acc(out_ch, patch, plane, g.data() + n * out_ch * plane, plane, 1, col_t.data(), patch,
                                 dw_acc.data(), patch, true);
          }
          for (std::size_t i = 0; i < dw_acc.size(); ++i) (*dw)[i] += static_cast<float>(dw_acc[i]);
        }
        if (dx) {
          std::vector<float> dcol(patch * plane);
          for (std::size_t n = 0; n < n_img; ++n) {
            kernels::gemm_f64acc(patch, plane, out_ch, wd, 1, patch, g.data() + n * out_ch * plane, plane, dcol.data(),
                                 plane, false);
            kernels::col2im_add(geo, dcol.data(), dx->data() + n * chans * height * width);
          }
        }
      });
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank(input, 2, "linear", "input");
  require_rank(weight, 2, "linear", "weight");
  require_rank(bias, 1, "linear", "bias");
  const std::size_t rows = input.dim(0), in_dim = input.dim(1), out_dim = weight.dim(0);
  if (weight.dim(1) != in_dim) throw ShapeError(dim_mismatch("linear", "weight inner dim (1)", weight.dim(1), in_dim));
  if (bias.dim(0) != out_dim) throw ShapeError(dim_mismatch("linear", "bias length (0)", bias.dim(0), out_dim));

  const float* x = input.data().data();
  const float* w = weight.data().data();
  const float* b = bias.data().data();
  std::vector<float> out(rows * out_dim);
  for (std::size_t n = 0; n < rows; ++n) {
    for (std::size_t m = 0; m < out_dim; ++m) {
      out[n * out_dim + m] =
          static_cast<float>(static_cast<double>(b[m]) + kernels::dot_f64(x + n * in_dim, w + m * in_dim, in_dim));
    }
  }
  auto x_impl = input.impl();
  auto w_impl = weight.impl();
  return Tensor::make_result(
      {rows, out_dim}, std::move(out), {input, weight, bias},
      [=](std::span<const float> g, std::vector<std::vector<float>*>& grads) {
        const float* xd = x_impl->data.data();
        const float* wd = w_impl->data.data();
        if (auto* dx = grads[0]) {
          std::vector<double> acc(in_dim);
          for (std::size_t n = 0; n < rows; ++n) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t m = 0; m < out_dim; ++m) kernels::axpy_f64(g[n * out_dim + m], wd + m * in_dim, acc.data(), in_dim);
            for (std::size_t d = 0; d < in_dim; ++d) (*dx)[n * in_dim + d] += static_cast<float>(acc[d]);
          }
        }
        if (auto* dw = grads[1]) {
          std::vector<double> acc(in_dim);
          for (std::size_t m = 0; m < out_dim; ++m) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t n = 0; n < rows; ++n) kernels::axpy_f64(g[n * out_dim + m], xd + n * in_dim, acc.data(), in_dim);
            for (std::size_t d = 0; d < in_dim; ++d) (*dw)[m * in_dim + d] += static_cast<float>(acc[d]);
          }
        }
        if (auto* db = grads[2]) {
          for (std::size_t m = 0; m < out_dim; ++m) {
            double s = 0.0;
            for (std::size_t n = 0; n < rows; ++n) s += g[n * out_dim + m];
            (*db)[m] += static_cast<float>(s);
          }
        }
      });
}

Tensor relu(const Tensor& x) {
  const auto in = x.data();
  std::vector<float> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0f ? in[i] : 0.0f;
  auto x_impl = x.impl();
  return Tensor::make_result(x.dims(), std::move(out), {x},
                             [x_impl](std::span<const float> g, std::vector<std::vector<float>*>& grads) {
                               auto& dx = *grads[0];
                               const auto& xd = x_impl->data;
                               for (std::size_t i = 0; i < g.size(); ++i) {
                                 if (xd[i] > 0.0f) dx[i] += g[i];
                               }
                             });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<float> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return Tensor::make_result(a.dims(), std::move(out), {a, b},
                             [](std::span<const float> g, std::vector<std::vector<float>*>& grads) {
                               for (auto* d : grads) {
                                 if (!d) continue;
                                 for (std::size_t i = 0; i < g.size(); ++i) (*d)[i] += g[i];
                               }
                             });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<float> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  auto a_impl = a.impl();
  auto b_impl = b.impl();
  return Tensor::make_result(a.dims(), std::move(out), {a, b},
                             [a_impl, b_impl](std::span<const float> g, std::vector<std::vector<float>*>& grads) {
                               if (auto* da = grads[0]) {
                                 for (std::size_t i = 0; i < g.size(); ++i) (*da)[i] += g[i] * b_impl->data[i];
                               }
                               if (auto* db = grads[1]) {
                                 for (std::size_t i = 0; i < g.size(); ++i) (*db)[i] += g[i] * a_impl->data[i];
                               }
                             });
}

Tensor scale(const Tensor& x, float factor) {
  std::vector<float> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * factor;
  return Tensor::make_result(x.dims(), std::move(out), {x},
                             [factor](std::span<const float> g, std::vector<std::vector<float>*>& grads) {
                               auto& dx = *grads[0];
                               for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * factor;
                             });
}

Tensor sum(const Tensor& x) {
  const double s = kernels::sum_f64(x.data().data(), x.numel());
  return Tensor::make_result({1}, {static_cast<float>(s)}, {x},
                             [](std::span<const float> g, std::vector<std::vector<float>*>& grads) {
                               auto& dx = *grads[0];
                               for (auto& v : dx) v += g[0];
                             });
}

Tensor max_pool2x2(const Tensor& x) {
  require_rank(x, 4, "max_pool2x2", "input");
  const std::size_t n_img = x.dim(0), chans = x.dim(1), height = x.dim(2), width = x.dim(3);
  if (height % 2 != 0 || width % 2 != 0) {
    throw ShapeError("max_pool2x2: spatial extents must be even, got " + shape_str(x.dims()));
  }
  const std::size_t oh = height / 2, ow = width / 2;
  const std::size_t planes = n_img * chans;
  std::vector<float> out(planes * oh * ow);
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(out.size());
  const float* xd = x.data().data();
  for (std::size_t pl = 0; pl < planes; ++pl) {
    const float* src = xd + pl * height * width;
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        std::size_t best = (2 * i) * width + 2 * j;
        for (std::size_t di = 0; di < 2; ++di) {
          for (std::size_t dj = 0; dj < 2; ++dj) {
            const std::size_t idx = (2 * i + di) * width + 2 * j + dj;
            if (src[idx] > src[best]) best = idx;
          }
        }
        const std::size_t o = (pl * oh + i) * ow + j;
        out[o] = src[best];
        (*argmax)[o] = static_cast<std::uint32_t>(pl * height * width + best);
      }
    }
  }
  return Tensor::make_result({n_img, chans, oh, ow}, std::move(out), {x},
                             [argmax](std::span<const float> g, std::vector<std::vector<float>*>& grads) {
                               auto& dx = *grads[0];
                               for (std::size_t o = 0; o < g.size(); ++o) dx[(*argmax)[o]] += g[o];
                             });
}

Tensor reshape(const Tensor& x, Shape dims) {
  if (shape_numel(dims) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.dims()) + " as " + shape_str(dims));
  }
  std::vector<float> out(x.data().begin(), x.data().end());
  return Tensor::make_result(std::move(dims), std::move(out), {x},
                             [](std::span<const float> g, std::vector<std::vector<float>*>& grads) {
                               auto& dx = *grads[0];
                               for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
                             });
}

Tensor flatten(const Tensor& x) {
  if (x.rank() < 2) throw ShapeError("flatten: needs rank >= 2, got " + shape_str(x.dims()));
  return reshape(x, {x.dim(0), x.numel() / x.dim(0)});
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> labels) {
  require_rank(logits, 2, "softmax_cross_entropy", "logits");
  const std::size_t rows = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != rows) {
    throw ShapeError(dim_mismatch("softmax_cross_entropy", "label count", labels.size(), rows));
  }
  for (auto y : labels) {
    if (y >= classes) {
      throw DataError("softmax_cross_entropy: label " + std::to_string(y) + " out of range [0," +
                      std::to_string(classes) + ")");
    }
  }
  const float* z = logits.data().data();
  auto probs = std::make_shared<std::vector<float>>(rows * classes);
  double total = 0.0;
  for (std::size_t n = 0; n < rows; ++n) {
    const float* row = z + n * classes;
    const double top = *std::max_element(row, row + classes);
    double denom = 0.0;
    for (std::size_t k = 0; k < classes; ++k) denom += std::exp(static_cast<double>(row[k]) - top);
    const double log_denom = std::log(denom);
    for (std::size_t k = 0; k < classes; ++k) {
      (*probs)[n * classes + k] = static_cast<float>(std::exp(static_cast<double>(row[k]) - top - log_denom));
    }
    total += top + log_denom - static_cast<double>(row[labels[n]]);
  }
  std::vector<std::size_t> ys(labels.begin(), labels.end());
  return Tensor::make_result(
      {1}, {static_cast<float>(total / static_cast<double>(rows))}, {logits},
      [probs, ys = std::move(ys), rows, classes](std::span<const float> g, std::vector<std::vector<float>*>& grads) {
        auto& dz = *grads[0];
        const double scale = static_cast<double>(g[0]) / static_cast<double>(rows);
        for (std::size_t n = 0; n < rows; ++n) {
          for (std::size_t k = 0; k < classes; ++k) {
            const double onehot = (k == ys[n]) ? 1.0 : 0.0;
            dz[n * classes + k] += static_cast<float>(scale * ((*probs)[n * classes + k] - onehot));
          }
        }
      });
}

Tensor cosine_similarity(const Tensor& a, const Tensor& b) {
  if (a.numel() != b.numel()) {
    throw ShapeError(dim_mismatch("cosine_similarity", "second vector length", b.numel(), a.numel()));
  }
  const std::size_t len = a.numel();
  const double dot = kernels::dot_f64(a.data().data(), b.data().data(), len);
  const double na = std::sqrt(kernels::dot_f64(a.data().data(), a.data().data(), len));
  const double nb = std::sqrt(kernels::dot_f64(b.data().data(), b.data().data(), len));
  if (na == 0.0 || nb == 0.0) throw NumericError("cosine_similarity: zero-norm vector");
  const double cos = dot / (na * nb);
  auto a_impl = a.impl();
  auto b_impl = b.impl();
  return Tensor::make_result(
      {1}, {static_cast<float>(cos)}, {a, b},
      [=](std::span<const float> g, std::vector<std::vector<float>*>& grads) {
        const double gs = g[0];
        if (auto* da = grads[0]) {
          for (std::size_t i = 0; i < len; ++i) {
            (*da)[i] += static_cast<float>(gs * (b_impl->data[i] / (na * nb) - cos * a_impl->data[i] / (na * na)));
          }
        }
        if (auto* db = grads[1]) {
          for (std::size_t i = 0; i < len; ++i) {
            (*db)[i] += static_cast<float>(gs * (a_impl->data[i] / (na * nb) - cos * b_impl->data[i] / (nb * nb)));
          }
        }
      });
}

Tensor cosine_logits(const Tensor& features, const Tensor& table, float temperature) {
  require_rank(features, 2, "cosine_logits", "features");
  require_rank(table, 2, "cosine_logits", "table");
  const std::size_t rows = features.dim(0), dim = features.dim(1), classes = table.dim(0);
  if (table.dim(1) != dim) throw ShapeError(dim_mismatch("cosine_logits", "table width (1)", table.dim(1), dim));
  const float* f = features.data().data();
  const float* t = table.data().data();
  auto fnorm = std::make_shared<std::vector<double>>(rows);
  auto tnorm = std::make_shared<std::vector<double>>(classes);
  for (std::size_t n = 0; n < rows; ++n) {
    (*fnorm)[n] = std::sqrt(kernels::dot_f64(f + n * dim, f + n * dim, dim));
    if ((*fnorm)[n] == 0.0) throw NumericError("cosine_logits: zero-norm feature row " + std::to_string(n));
  }
  for (std::size_t k = 0; k < classes; ++k) {
    (*tnorm)[k] = std::sqrt(kernels::dot_f64(t + k * dim, t + k * dim, dim));
    if ((*tnorm)[k] == 0.0) throw NumericError("cosine_logits: zero-norm table row " + std::to_string(k));
  }
  auto cos = std::make_shared<std::vector<double>>(rows * classes);
  std::vector<float> out(rows * classes);
  for (std::size_t n = 0; n < rows; ++n) {
    for (std::size_t k = 0; k < classes; ++k) {
      const double c = kernels::dot_f64(f + n * dim, t + k * dim, dim) / ((*fnorm)[n] * (*tnorm)[k]);
      (*cos)[n * classes + k] = c;
      out[n * classes + k] = static_cast<float>(temperature * c);
    }
  }
  auto f_impl = features.impl();
  auto t_impl = table.impl();
  return Tensor::make_result(
      {rows, classes}, std::move(out), {features, table},
      [=](std::span<const float> g, std::vector<std::vector<float>*>& grads) {
        const float* fd = f_impl->data.data();
        const float* td = t_impl->data.data();
        std::vector<double> acc(dim);
        if (auto* df = grads[0]) {
          for (std::size_t n = 0; n < rows; ++n) {
            std::fill(acc.begin(), acc.end(), 0.0);
            const double fn = (*fnorm)[n];
            for (std::size_t k = 0; k < classes; ++k) {
              const double gk = temperature * static_cast<double>(g[n * classes + k]);
              const double c = (*cos)[n * classes + k];
              const double tk = (*tnorm)[k];
              for (std::size_t d = 0; d < dim; ++d) {
                acc[d] += gk * (td[k * dim + d] / (fn * tk) - c * fd[n * dim + d] / (fn * fn));
              }
            }
            for (std::size_t d = 0; d < dim; ++d) (*df)[n * dim + d] += static_cast<float>(acc[d]);
          }
        }
        if (auto* dt = grads[1]) {
          for (std::size_t k = 0; k < classes; ++k) {
            std::fill(acc.begin(), acc.end(), 0.0);
            const double tk = (*tnorm)[k];
            for (std::size_t n = 0; n < rows; ++n) {
              const double gk = temperature * static_cast<double>(g[n * classes + k]);
              const double c = (*cos)[n * classes + k];
              const double fn = (*fnorm)[n];
              for (std::size_t d = 0; d < dim; ++d) {
                acc[d] += gk * (fd[n * dim + d] / (fn * tk) - c * td[k * dim + d] / (tk * tk));
              }
            }
            for (std::size_t d = 0; d < dim; ++d) (*dt)[k * dim + d] += static_cast<float>(acc[d]);
          }
        }
      });
}

Tensor gather_columns(const Tensor& x, std::span<const std::size_t> columns) {
  require_rank(x, 2, "gather_columns", "input");
  const std::size_t rows = x.dim(0), width = x.dim(1), picked = columns.size();
  if (picked == 0) throw ShapeError("gather_columns: empty column list");
  for (auto c : columns) {
    if (c >= width) {
      throw ShapeError("gather_columns: column " + std::to_string(c) + " out of range [0," + std::to_string(width) + ")");
    }
  }
  std::vector<float> out(rows * picked);
  for (std::size_t n = 0; n < rows; ++n) {
    for (std::size_t j = 0; j < picked; ++j) out[n * picked + j] = x.data()[n * width + columns[j]];
  }
  std::vector<std::size_t> cols(columns.begin(), columns.end());
  return Tensor::make_result({rows, picked}, std::move(out), {x},
                             [cols = std::move(cols), rows, width](std::span<const float> g,
                                                                   std::vector<std::vector<float>*>& grads) {
                               auto& dx = *grads[0];
                               const std::size_t picked = cols.size();
                               for (std::size_t n = 0; n < rows; ++n) {
                                 for (std::size_t j = 0; j < picked; ++j) dx[n * width + cols[j]] += g[n * picked + j];
                               }
                             });
}

Tensor scatter_add(const Tensor& images, const Tensor& values, std::span<const std::uint32_t> positions) {
  if (images.rank() < 2) throw ShapeError("scatter_add: images need a leading batch axis");
  const std::size_t n_img = images.dim(0);
  const std::size_t block = images.numel() / n_img;
  const std::size_t count = values.numel();
  std::size_t stride = 0;
  if (positions.size() == count * n_img && n_img > 1) {
    stride = count;
  } else if (positions.size() != count) {
    throw ShapeError("scatter_add: " + std::to_string(positions.size()) + " positions for " + std::to_string(count) +
                     " values and " + std::to_string(n_img) + " images");
  }
  for (auto p : positions) {
    if (p >= block) throw ShapeError("scatter_add: position " + std::to_string(p) + " outside image block");
  }
  std::vector<float> out(images.data().begin(), images.data().end());
  const float* v = values.data().data();
  for (std::size_t n = 0; n < n_img; ++n) {
    const std::uint32_t* pos = positions.data() + n * stride;
    float* img = out.data() + n * block;
    for (std::size_t j = 0; j < count; ++j) img[pos[j]] += v[j];
  }
  std::vector<std::uint32_t> pos_copy(positions.begin(), positions.end());
  return Tensor::make_result(images.dims(), std::move(out), {images, values},
                             [pos_copy = std::move(pos_copy), n_img, block, count, stride](
                                 std::span<const float> g, std::vector<std::vector<float>*>& grads) {
                               if (auto* di = grads[0]) {
                                 for (std::size_t i = 0; i < g.size(); ++i) (*di)[i] += g[i];
                               }
                               if (auto* dv = grads[1]) {
                                 std::vector<double> acc(count, 0.0);
                                 for (std::size_t n = 0; n < n_img; ++n) {
                                   const std::uint32_t* pos = pos_copy.data() + n * stride;
                                   const float* gi = g.data() + n * block;
                                   for (std::size_t j = 0; j < count; ++j) acc[j] += gi[pos[j]];
                                 }
                                 for (std::size_t j = 0; j < count; ++j) (*dv)[j] += static_cast<float>(acc[j]);
                               }
                             });
}

std::vector<std::size_t> argmax_rows(const Tensor& x) {
  require_rank(x, 2, "argmax_rows", "input");
  const std::size_t rows = x.dim(0), width = x.dim(1);
  std::vector<std::size_t> out(rows);
  for (std::size_t n = 0; n < rows; ++n) {
    const float* row = x.data().data() + n * width;
    out[n] = static_cast<std::size_t>(std::max_element(row, row + width) - row);
  }
  return out;
}

Tensor softmax_rows(const Tensor& x) {
  require_rank(x, 2, "softmax_rows", "input");
  const std::size_t rows = x.dim(0), width = x.dim(1);
  std::vector<float> out(x.numel());
  for (std::size_t n = 0; n < rows; ++n) {
    const float* row = x.data().data() + n * width;
    const double top = *std::max_element(row, row + width);
    double denom = 0.0;
    for (std::size_t k = 0; k < width; ++k) denom += std::exp(static_cast<double>(row[k]) - top);
    for (std::size_t k = 0; k < width; ++k) {
      out[n * width + k] = static_cast<float>(std::exp(static_cast<double>(row[k]) - top) / denom);
    }
  }
  return Tensor(x.dims(), std::move(out));
}

}  // namespace vpt::ops
