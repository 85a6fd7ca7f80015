#pragma once

#include <cstddef>

// Inner loops shared by the conv/linear ops. Fixed evaluation order, so the
// results are bit-reproducible run to run.
namespace vpt::kernels {

inline double dot_f64(const float* a, const float* b, std::size_t n) {
  double lane[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t l = 0; l < 8; ++l) lane[l] += static_cast<double>(a[i + l]) * static_cast<double>(b[i + l]);
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return ((lane[0] + lane[1]) + (lane[2] + lane[3])) + ((lane[4] + lane[5]) + (lane[6] + lane[7])) + tail;
}

inline double sum_f64(const float* a, std::size_t n) {
  double lane[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t l = 0; l < 8; ++l) lane[l] += static_cast<double>(a[i + l]);
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += static_cast<double>(a[i]);
  return ((lane[0] + lane[1]) + (lane[2] + lane[3])) + ((lane[4] + lane[5]) + (lane[6] + lane[7])) + tail;
}

// acc[i] += alpha * x[i]
inline void axpy_f64(float alpha, const float* x, double* acc, std::size_t n) {
  const double a = alpha;
  for (std::size_t i = 0; i < n; ++i) acc[i] += a * static_cast<double>(x[i]);
}

// C[m,n] (+)= sum_k A(m,k) * B[k*ldb + n], with A(m,k) = a[m*a_row + k*a_col].
// Accumulates each output in double; blocks of 4 rows x 16 columns stay in
// registers across the whole k loop. When `beta_one` is false C is
// overwritten, otherwise added to. `init` (length m_total, may be null) seeds
// each row.
template <typename Out>
inline void gemm_f64acc(std::size_t m_total, std::size_t n_total, std::size_t k_total, const float* __restrict a,
                        std::size_t a_row, std::size_t a_col, const float* __restrict b, std::size_t ldb,
                        Out* __restrict c,
                        std::size_t ldc, bool beta_one, const float* init = nullptr) {
  constexpr std::size_t MB = 4;
  constexpr std::size_t NB = 16;
  std::size_t m0 = 0;
  for (; m0 + MB <= m_total; m0 += MB) {
    std::size_t n0 = 0;
    for (; n0 + NB <= n_total; n0 += NB) {
      double acc[MB][NB];
      for (std::size_t i = 0; i < MB; ++i) {
        const double seed = init ? static_cast<double>(init[m0 + i]) : 0.0;
        for (std::size_t j = 0; j < NB; ++j) acc[i][j] = seed;
      }
      for (std::size_t k = 0; k < k_total; ++k) {
        const float* brow = b + k * ldb + n0;
        double bv[NB];
        for (std::size_t j = 0; j < NB; ++j) bv[j] = static_cast<double>(brow[j]);
        for (std::size_t i = 0; i < MB; ++i) {
          const double av = a[(m0 + i) * a_row + k * a_col];
          for (std::size_t j = 0; j < NB; ++j) acc[i][j] += av * bv[j];
        }
      }
      for (std::size_t i = 0; i < MB; ++i) {
        Out* crow = c + (m0 + i) * ldc + n0;
        for (std::size_t j = 0; j < NB; ++j) {
          crow[j] = beta_one ? static_cast<Out>(crow[j] + acc[i][j]) : static_cast<Out>(acc[i][j]);
        }
      }
    }
    for (; n0 < n_total; ++n0) {
      for (std::size_t i = 0; i < MB; ++i) {
        double s = init ? static_cast<double>(init[m0 + i]) : 0.0;
        for (std::size_t k = 0; k < k_total; ++k) {
          s += static_cast<double>(a[(m0 + i) * a_row + k * a_col]) * static_cast<double>(b[k * ldb + n0]);
        }
        Out& dst = c[(m0 + i) * ldc + n0];
        dst = beta_one ? static_cast<Out>(dst + s) : static_cast<Out>(s);
      }
    }
  }
  for (; m0 < m_total; ++m0) {
    for (std::size_t n = 0; n < n_total; ++n) {
      double s = init ? static_cast<double>(init[m0]) : 0.0;
      for (std::size_t k = 0; k < k_total; ++k) {
        s += static_cast<double>(a[m0 * a_row + k * a_col]) * static_cast<double>(b[k * ldb + n]);
      }
      Out& dst = c[m0 * ldc + n];
      dst = beta_one ? static_cast<Out>(dst + s) : static_cast<Out>(s);
    }
  }
}

inline void transpose(const float* src, std::size_t rows, std::size_t cols, float* dst) {
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) dst[j * rows + i] = src[i * cols + j];
  }
}

struct ConvGeometry {
  std::size_t chans, height, width, kh, kw, stride, pad, out_h, out_w;
};

// Unfolds one image [C,H,W] into columns [C*kh*kw, out_h*out_w].
inline void im2col(const ConvGeometry& g, const float* img, float* cols) {
  const std::size_t plane = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.chans; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        float* dst = cols + ((c * g.kh + ki) * g.kw + kj) * plane;
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const long ih = static_cast<long>(oh * g.stride + ki) - static_cast<long>(g.pad);
          float* row = dst + oh * g.out_w;
          if (ih < 0 || ih >= static_cast<long>(g.height)) {
            for (std::size_t ow = 0; ow < g.out_w; ++ow) row[ow] = 0.0f;
            continue;
          }
          const float* src = img + (c * g.height + static_cast<std::size_t>(ih)) * g.width;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const long iw = static_cast<long>(ow * g.stride + kj) - static_cast<long>(g.pad);
            row[ow] = (iw < 0 || iw >= static_cast<long>(g.width)) ? 0.0f : src[iw];
          }
        }
      }
    }
  }
}

// Folds column gradients back onto one image gradient [C,H,W] (accumulating).
inline void col2im_add(const ConvGeometry& g, const float* cols, float* img_grad) {
  const std::size_t plane = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.chans; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const float* src = cols + ((c * g.kh + ki) * g.kw + kj) * plane;
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const long ih = static_cast<long>(oh * g.stride + ki) - static_cast<long>(g.pad);
          if (ih < 0 || ih >= static_cast<long>(g.height)) continue;
          float* dst = img_grad + (c * g.height + static_cast<std::size_t>(ih)) * g.width;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const long iw = static_cast<long>(ow * g.stride + kj) - static_cast<long>(g.pad);
            if (iw >= 0 && iw < static_cast<long>(g.width)) dst[iw] += src[oh * g.out_w + ow];
          }
        }
      }
    }
  }
}

}  // namespace vpt::kernels
