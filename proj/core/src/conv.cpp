#include <algorithm>
#include <cstring>

#include "op_common.hpp"
#include "vnca/tensor.hpp"

// Fortran BLAS entry point; present in every BLAS implementation, so we do
// not depend on a cblas header being installed.
extern "C" void sgemm_(const char* transa, const char* transb, const int* m,
                       const int* n, const int* k, const float* alpha,
                       const float* a, const int* lda, const float* b,
                       const int* ldb, const float* beta, float* c,
                       const int* ldc);

namespace vnca {

using detail::make_op;
using detail::Node;

namespace detail {
void blas_single_thread();
}

namespace {

// Row-major GEMM on top of the column-major Fortran interface: swapping the
// operands makes the column-major result land transposed, i.e. row-major.
// lda/ldb/ldc are the row-major leading dimensions.
void gemm_rm(char trans_a, char trans_b, int M, int N, int K, float alpha,
             const float* A, int lda, const float* B, int ldb, float beta,
             float* C, int ldc) {
  static const bool once = [] {
    detail::blas_single_thread();
    return true;
  }();
  (void)once;
  sgemm_(&trans_b, &trans_a, &N, &M, &K, &alpha, B, &ldb, A, &lda, &beta, C,
         &ldc);
}

// Patch matrix layout: row (c*kh + ki)*kw + kj, column oy*Wo + ox.
void im2col(const float* src, int C, int H, int W, int kh, int kw, int stride,
            int pad, int Ho, int Wo, float* cols) {
  for (int c = 0; c < C; ++c) {
    const float* plane = src + std::int64_t(c) * H * W;
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        float* row = cols + (std::int64_t(c) * kh * kw + ki * kw + kj) *
                                (std::int64_t(Ho) * Wo);
        for (int oy = 0; oy < Ho; ++oy) {
          int sy = oy * stride - pad + ki;
          float* out = row + std::int64_t(oy) * Wo;
          if (sy < 0 || sy >= H) {
            std::memset(out, 0, size_t(Wo) * sizeof(float));
            continue;
          }
          const float* srow = plane + std::int64_t(sy) * W;
          if (stride == 1) {
            int sx0 = kj - pad;  // sx = ox + sx0
            int lo = std::clamp(-sx0, 0, Wo);
            int hi = std::clamp(W - sx0, lo, Wo);
            for (int ox = 0; ox < lo; ++ox) out[ox] = 0.0f;
            if (hi > lo)
              std::memcpy(out + lo, srow + sx0 + lo,
                          size_t(hi - lo) * sizeof(float));
            for (int ox = hi; ox < Wo; ++ox) out[ox] = 0.0f;
          } else {
            for (int ox = 0; ox < Wo; ++ox) {
              int sx = ox * stride - pad + kj;
              out[ox] = (sx >= 0 && sx < W) ? srow[sx] : 0.0f;
            }
          }
        }
      }
    }
  }
}

void col2im_add(const float* cols, int C, int H, int W, int kh, int kw,
                int stride, int pad, int Ho, int Wo, float* dst) {
  for (int c = 0; c < C; ++c) {
    float* plane = dst + std::int64_t(c) * H * W;
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        const float* row = cols + (std::int64_t(c) * kh * kw + ki * kw + kj) *
                                      (std::int64_t(Ho) * Wo);
        for (int oy = 0; oy < Ho; ++oy) {
          int sy = oy * stride - pad + ki;
          if (sy < 0 || sy >= H) continue;
          float* drow = plane + std::int64_t(sy) * W;
          const float* srow = row + std::int64_t(oy) * Wo;
          if (stride == 1) {
            // Contiguous span, mirrors the im2col fast path but accumulates.
            int sx0 = kj - pad;
            int lo = std::clamp(-sx0, 0, Wo);
            int hi = std::clamp(W - sx0, lo, Wo);
            float* d = drow + sx0;
            for (int ox = lo; ox < hi; ++ox) d[ox] += srow[ox];
          } else {
            for (int ox = 0; ox < Wo; ++ox) {
              int sx = ox * stride - pad + kj;
              if (sx >= 0 && sx < W) drow[sx] += srow[ox];
            }
          }
        }
      }
    }
  }
}

// Scratch reused across calls; the engine is single-threaded per instance and
// these are thread_local, so reuse is safe.
thread_local std::vector<float> g_cols;
thread_local std::vector<float> g_dcols;

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int padding) {
  auto xn = x.node();
  auto wn = w.node();
  std::shared_ptr<Node> bn = b.defined() ? b.node() : nullptr;
  if (xn->shape.size() != 4)
    throw DimensionError("conv2d: input must be [B,C,H,W], got " +
                         shape_str(xn->shape));
  if (wn->shape.size() != 4)
    throw DimensionError("conv2d: weight must be [Cout,Cin,kh,kw], got " +
                         shape_str(wn->shape));
  int B = xn->shape[0], Cin = xn->shape[1], H = xn->shape[2], W = xn->shape[3];
  int Cout = wn->shape[0], kh = wn->shape[2], kw = wn->shape[3];
  if (wn->shape[1] != Cin)
    throw DimensionError("conv2d: weight expects " +
                         std::to_string(wn->shape[1]) +
                         " input channels, got " + std::to_string(Cin));
  if (kh != kw || (kh != 1 && kh != 3 && kh != 5))
    throw ContractError("conv2d: kernel must be square 1/3/5, got " +
                        std::to_string(kh) + "x" + std::to_string(kw));
  if (stride != 1 && stride != 2)
    throw ContractError("conv2d: stride must be 1 or 2");
  if (padding < 0) throw ContractError("conv2d: negative padding");
  if (bn && (bn->shape.size() != 1 || bn->shape[0] != Cout))
    throw DimensionError("conv2d: bias must be [" + std::to_string(Cout) +
                         "], got " + shape_str(bn->shape));
  int Ho = (H + 2 * padding - kh) / stride + 1;
  int Wo = (W + 2 * padding - kw) / stride + 1;
  if (Ho < 1 || Wo < 1)
    throw DimensionError("conv2d: empty output for input " +
                         shape_str(xn->shape));

  std::int64_t K = std::int64_t(Cin) * kh * kw;
  std::int64_t N = std::int64_t(Ho) * Wo;
  // 1x1 stride-1 convolutions (the residual blocks) skip im2col entirely:
  // the input plane already is the patch matrix.
  bool pointwise = (kh == 1 && stride == 1 && padding == 0);

  std::vector<float> out(size_t(std::int64_t(B) * Cout * N));
  if (!pointwise) g_cols.resize(size_t(K * N));
  for (int bi = 0; bi < B; ++bi) {
    const float* xb = xn->value.data() + std::int64_t(bi) * Cin * H * W;
    const float* cols = xb;
    if (!pointwise) {
      im2col(xb, Cin, H, W, kh, kw, stride, padding, Ho, Wo, g_cols.data());
      cols = g_cols.data();
    }
    float* ob = out.data() + std::int64_t(bi) * Cout * N;
    gemm_rm('N', 'N', Cout, int(N), int(K), 1.0f, wn->value.data(), int(K),
            cols, int(N), 0.0f, ob, int(N));
    if (bn) {
      for (int co = 0; co < Cout; ++co) {
        float bias = bn->value[size_t(co)];
        float* row = ob + std::int64_t(co) * N;
        for (std::int64_t i = 0; i < N; ++i) row[i] += bias;
      }
    }
  }

  std::vector<std::shared_ptr<Node>> parents{xn, wn};
  if (bn) parents.push_back(bn);
  auto bwd = [xn, wn, bn, B, Cin, H, W, Cout, kh, kw, stride, padding, Ho, Wo,
              K, N, pointwise](Node& o) {
    if (bn && bn->requires_grad) {
      bn->ensure_grad();
      for (int bi = 0; bi < B; ++bi) {
        const float* dyb = o.grad.data() + std::int64_t(bi) * Cout * N;
        for (int co = 0; co < Cout; ++co) {
          const float* row = dyb + std::int64_t(co) * N;
          double acc = 0.0;
          for (std::int64_t i = 0; i < N; ++i) acc += row[i];
          bn->grad[size_t(co)] += float(acc);
        }
      }
    }
    if (!wn->requires_grad && !xn->requires_grad) return;
    if (wn->requires_grad) wn->ensure_grad();
    if (xn->requires_grad) xn->ensure_grad();
    if (!pointwise) {
      g_cols.resize(size_t(K * N));
      g_dcols.resize(size_t(K * N));
    }
    for (int bi = 0; bi < B; ++bi) {
      const float* xb = xn->value.data() + std::int64_t(bi) * Cin * H * W;
      const float* dyb = o.grad.data() + std::int64_t(bi) * Cout * N;
      const float* cols = xb;
      if (!pointwise && wn->requires_grad) {
        im2col(xb, Cin, H, W, kh, kw, stride, padding, Ho, Wo, g_cols.data());
        cols = g_cols.data();
      }
      if (wn->requires_grad) {
        // dW += dY * cols^T, accumulated across the batch in index order
        gemm_rm('N', 'T', Cout, int(K), int(N), 1.0f, dyb, int(N), cols,
                int(N), 1.0f, wn->grad.data(), int(K));
      }
      if (xn->requires_grad) {
        float* dxb = xn->grad.data() + std::int64_t(bi) * Cin * H * W;
        if (pointwise) {
          // dX += W^T * dY directly into the input plane
          gemm_rm('T', 'N', int(K), int(N), Cout, 1.0f, wn->value.data(),
                  int(K), dyb, int(N), 1.0f, dxb, int(N));
        } else {
          gemm_rm('T', 'N', int(K), int(N), Cout, 1.0f, wn->value.data(),
                  int(K), dyb, int(N), 0.0f, g_dcols.data(), int(N));
          col2im_add(g_dcols.data(), Cin, H, W, kh, kw, stride, padding, Ho,
                     Wo, dxb);
        }
      }
    }
  };
  return make_op({B, Cout, Ho, Wo}, std::move(out), std::move(parents),
                 std::move(bwd));
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  auto xn = x.node();
  auto wn = w.node();
  std::shared_ptr<Node> bn = b.defined() ? b.node() : nullptr;
  if (xn->shape.size() != 2)
    throw DimensionError("linear: input must be [B,n], got " +
                         shape_str(xn->shape));
  if (wn->shape.size() != 2)
    throw DimensionError("linear: weight must be [m,n], got " +
                         shape_str(wn->shape));
  int B = xn->shape[0], n = xn->shape[1];
  int m = wn->shape[0];
  if (wn->shape[1] != n)
    throw DimensionError("linear: weight expects " +
                         std::to_string(wn->shape[1]) + " features, got " +
                         std::to_string(n));
  if (bn && (bn->shape.size() != 1 || bn->shape[0] != m))
    throw DimensionError("linear: bias must be [" + std::to_string(m) +
                         "], got " + shape_str(bn->shape));

  std::vector<float> out(size_t(std::int64_t(B) * m));
  // Y = X * W^T
  gemm_rm('N', 'T', B, m, n, 1.0f, xn->value.data(), n, wn->value.data(), n,
          0.0f, out.data(), m);
  if (bn) {
    for (int bi = 0; bi < B; ++bi) {
      float* row = out.data() + std::int64_t(bi) * m;
      for (int j = 0; j < m; ++j) row[j] += bn->value[size_t(j)];
    }
  }

  std::vector<std::shared_ptr<Node>> parents{xn, wn};
  if (bn) parents.push_back(bn);
  auto bwd = [xn, wn, bn, B, n, m](Node& o) {
    if (bn && bn->requires_grad) {
      bn->ensure_grad();
      for (int j = 0; j < m; ++j) {
        double acc = 0.0;
        for (int bi = 0; bi < B; ++bi)
          acc += o.grad[size_t(std::int64_t(bi) * m + j)];
        bn->grad[size_t(j)] += float(acc);
      }
    }
    if (xn->requires_grad) {
      xn->ensure_grad();
      // dX += dY * W
      gemm_rm('N', 'N', B, n, m, 1.0f, o.grad.data(), m, wn->value.data(), n,
              1.0f, xn->grad.data(), n);
    }
    if (wn->requires_grad) {
      wn->ensure_grad();
      // dW += dY^T * X
      gemm_rm('T', 'N', m, n, B, 1.0f, o.grad.data(), m, xn->value.data(), n,
              1.0f, wn->grad.data(), n);
    }
  };
  return make_op({B, m}, std::move(out), std::move(parents), std::move(bwd));
}

}  // namespace vnca
