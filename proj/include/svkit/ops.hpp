// svkit/ops.hpp
//
// Copyright 2026 svkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef SVKIT_OPS_HPP_
#define SVKIT_OPS_HPP_

#include <cmath>
#include <cstring>
#include <numeric>
#include <string>
#include <vector>

#include "svkit/gemm.hpp"
#include "svkit/rng.hpp"
#include "svkit/tensor.hpp"

namespace sv {

// ---------------------------------------------------------------------------
// Dense linear algebra
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(Tensor<T> a, Tensor<T> b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw DimensionError("matmul expects rank-2 tensors");
  int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2)
    throw DimensionError("matmul inner dimensions disagree: " +
                         std::to_string(k) + " vs " + std::to_string(k2));
  std::vector<T> out(static_cast<size_t>(m) * n);
  gemm(false, false, m, n, k, T(1), a.data().data(), k, b.data().data(), n,
       T(0), out.data(), n);
  auto an = a.node();
  auto bn = b.node();
  return detail::make_op<T>(
      {m, n}, std::move(out), {a, b},
      [an, bn, m, n, k](TensorNode<T>& self) {
        const T* g = self.grad.data();
        if (an->needs_grad) {
          // dA += G * B^T
          gemm(false, true, m, k, n, T(1), g, n, bn->value.data(), n, T(1),
               an->acc_grad().data(), k);
        }
        if (bn->needs_grad) {
          // dB += A^T * G
          gemm(true, false, k, n, m, T(1), an->value.data(), k, g, n, T(1),
               bn->acc_grad().data(), n);
        }
      },
      "matmul");
}

// y[i, :] = x[i, :] + b
template <typename T>
Tensor<T> add_rowvec(Tensor<T> x, Tensor<T> b) {
  if (x.rank() != 2 || b.rank() != 1 || b.dim(0) != x.dim(1))
    throw DimensionError("add_rowvec shape mismatch");
  int m = x.dim(0), n = x.dim(1);
  std::vector<T> out(x.data());
  const T* bv = b.data().data();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out[static_cast<size_t>(i) * n + j] += bv[j];
  auto xn = x.node();
  auto bn = b.node();
  return detail::make_op<T>(
      {m, n}, std::move(out), {x, b},
      [xn, bn, m, n](TensorNode<T>& self) {
        const T* g = self.grad.data();
        if (xn->needs_grad) {
          T* gx = xn->acc_grad().data();
          for (std::int64_t i = 0; i < static_cast<std::int64_t>(m) * n; ++i)
            gx[i] += g[i];
        }
        if (bn->needs_grad) {
          T* gb = bn->acc_grad().data();
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) gb[j] += g[static_cast<size_t>(i) * n + j];
        }
      },
      "add_rowvec");
}

template <typename T>
Tensor<T> affine(Tensor<T> x, Tensor<T> w, Tensor<T> b) {
  return add_rowvec(matmul(x, w), b);
}

// ---------------------------------------------------------------------------
// Convolution (im2col + gemm)
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void im2col(const T* x, int ci, int h, int w, int kh, int kw, int stride,
            int pad, int ho, int wo, T* cols) {
  // cols is [ci*kh*kw, ho*wo] row-major.
  const int m = ho * wo;
  for (int c = 0; c < ci; ++c) {
    const T* xc = x + static_cast<std::int64_t>(c) * h * w;
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        T* row = cols + static_cast<std::int64_t>((c * kh + ki) * kw + kj) * m;
        for (int oh = 0; oh < ho; ++oh) {
          int ih = oh * stride - pad + ki;
          T* dst = row + static_cast<std::int64_t>(oh) * wo;
          if (ih < 0 || ih >= h) {
            std::fill(dst, dst + wo, T(0));
            continue;
          }
          const T* src = xc + static_cast<std::int64_t>(ih) * w;
          for (int ow = 0; ow < wo; ++ow) {
            int iw = ow * stride - pad + kj;
            dst[ow] = (iw >= 0 && iw < w) ? src[iw] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_acc(const T* cols, int ci, int h, int w, int kh, int kw,
                int stride, int pad, int ho, int wo, T* gx) {
  const int m = ho * wo;
  for (int c = 0; c < ci; ++c) {
    T* gc = gx + static_cast<std::int64_t>(c) * h * w;
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        const T* row =
            cols + static_cast<std::int64_t>((c * kh + ki) * kw + kj) * m;
        for (int oh = 0; oh < ho; ++oh) {
          int ih = oh * stride - pad + ki;
          if (ih < 0 || ih >= h) continue;
          T* dst = gc + static_cast<std::int64_t>(ih) * w;
          const T* src = row + static_cast<std::int64_t>(oh) * wo;
          for (int ow = 0; ow < wo; ++ow) {
            int iw = ow * stride - pad + kj;
            if (iw >= 0 && iw < w) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

}  // namespace detail

// x: [B, Cin, H, W], kernels: [Cout, Cin, kh, kw].  Output spatial size is
// floor((H + 2*pad - kh) / stride) + 1; a trailing partial window is
// dropped, matching the usual convolutional network convention (ladders
// like 64 -> 32 under stride 2 require the floor).
template <typename T>
Tensor<T> conv2d(Tensor<T> x, Tensor<T> kernels, int stride, int pad) {
  if (x.rank() != 4 || kernels.rank() != 4)
    throw DimensionError("conv2d expects [B,C,H,W] input and [Co,Ci,kh,kw] kernels");
  int b = x.dim(0), ci = x.dim(1), h = x.dim(2), w = x.dim(3);
  int co = kernels.dim(0), kh = kernels.dim(2), kw = kernels.dim(3);
  if (kernels.dim(1) != ci) throw DimensionError("conv2d channel mismatch");
  if (kh % 2 == 0 || kw % 2 == 0)
    throw DimensionError("conv2d kernel sizes must be odd");
  if (stride != 1 && stride != 2)
    throw DimensionError("conv2d stride must be 1 or 2");
  int ho = (h + 2 * pad - kh) / stride + 1;
  int wo = (w + 2 * pad - kw) / stride + 1;
  if (h + 2 * pad < kh || w + 2 * pad < kw || ho <= 0 || wo <= 0)
    throw DimensionError("conv2d output size is empty");

  const int kdim = ci * kh * kw;
  const int m = ho * wo;
  std::vector<T> out(static_cast<std::int64_t>(b) * co * m);
  std::vector<T> cols(static_cast<std::int64_t>(kdim) * m);
  const T* xv = x.data().data();
  const T* kv = kernels.data().data();
  for (int s = 0; s < b; ++s) {
    detail::im2col(xv + static_cast<std::int64_t>(s) * ci * h * w, ci, h, w,
                   kh, kw, stride, pad, ho, wo, cols.data());
    gemm(false, false, co, m, kdim, T(1), kv, kdim, cols.data(), m, T(0),
         out.data() + static_cast<std::int64_t>(s) * co * m, m);
  }

  auto xn = x.node();
  auto kn = kernels.node();
  return detail::make_op<T>(
      {b, co, ho, wo}, std::move(out), {x, kernels},
      [xn, kn, b, ci, h, w, co, kh, kw, stride, pad, ho, wo,
       kdim, m](TensorNode<T>& self) {
        std::vector<T> cols(static_cast<std::int64_t>(kdim) * m);
        const T* g = self.grad.data();
        T* gk = kn->needs_grad ? kn->acc_grad().data() : nullptr;
        T* gx = xn->needs_grad ? xn->acc_grad().data() : nullptr;
        for (int s = 0; s < b; ++s) {
          const T* gs = g + static_cast<std::int64_t>(s) * co * m;
          if (gk) {
            detail::im2col(
                xn->value.data() + static_cast<std::int64_t>(s) * ci * h * w,
                ci, h, w, kh, kw, stride, pad, ho, wo, cols.data());
            // dK += G_s * cols^T
            gemm(false, true, co, kdim, m, T(1), gs, m, cols.data(), m, T(1),
                 gk, kdim);
          }
          if (gx) {
            // dcols = K^T * G_s, then scatter back.
            gemm(true, false, kdim, m, co, T(1), kn->value.data(), kdim, gs,
                 m, T(0), cols.data(), m);
            detail::col2im_acc(cols.data(), ci, h, w, kh, kw, stride, pad, ho,
                               wo,
                               gx + static_cast<std::int64_t>(s) * ci * h * w);
          }
        }
      },
      "conv2d");
}

// ---------------------------------------------------------------------------
// Elementwise activations.  Backward rules read only the op's own output,
// so the input buffer may be stolen (see take_value) inside long chains.
// ---------------------------------------------------------------------------

namespace detail {

template <typename T, typename Fwd, typename Bwd>
Tensor<T> unary_from_output(Tensor<T> x, bool steal, Fwd fwd, Bwd dfdy,
                            const char* name) {
  std::vector<T> out = steal ? take_value(x) : std::vector<T>(x.data());
  for (T& v : out) v = fwd(v);
  auto xn = x.node();
  auto result = make_op<T>(
      std::vector<int>(x.shape()), std::move(out), {x},
      [xn, dfdy](TensorNode<T>& self) {
        if (!xn->needs_grad) return;
        T* gx = xn->acc_grad().data();
        const T* g = self.grad.data();
        const T* y = self.value.data();
        const std::int64_t n = self.size();
        for (std::int64_t i = 0; i < n; ++i) gx[i] += g[i] * dfdy(y[i]);
      },
      name);
  return result;
}

}  // namespace detail

template <typename T>
Tensor<T> relu(Tensor<T> x, bool steal = false) {
  return detail::unary_from_output(
      x, steal, [](T v) { return v > T(0) ? v : T(0); },
      [](T y) { return y > T(0) ? T(1) : T(0); }, "relu");
}

// Output sign equals input sign for slope > 0, so the derivative can be
// recovered from the output alone.
template <typename T>
Tensor<T> leaky_relu(Tensor<T> x, T slope, bool steal = false) {
  return detail::unary_from_output(
      x, steal, [slope](T v) { return v > T(0) ? v : slope * v; },
      [slope](T y) { return y > T(0) ? T(1) : slope; }, "leaky_relu");
}

template <typename T>
Tensor<T> tanh_act(Tensor<T> x, bool steal = false) {
  return detail::unary_from_output(
      x, steal, [](T v) { return std::tanh(v); },
      [](T y) { return T(1) - y * y; }, "tanh");
}

template <typename T>
Tensor<T> sigmoid_act(Tensor<T> x, bool steal = false) {
  return detail::unary_from_output(
      x, steal,
      [](T v) {
        return v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                         : std::exp(v) / (T(1) + std::exp(v));
      },
      [](T y) { return y * (T(1) - y); }, "sigmoid");
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(Tensor<T> a, Tensor<T> b, bool steal_a = false) {
  if (a.shape() != b.shape()) throw DimensionError("add shape mismatch");
  const std::vector<T>& bv = b.data();
  std::vector<T> out = steal_a ? detail::take_value(a) : std::vector<T>(a.data());
  for (size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  auto an = a.node();
  auto bn = b.node();
  return detail::make_op<T>(
      std::vector<int>(a.shape()), std::move(out), {a, b},
      [an, bn](TensorNode<T>& self) {
        const T* g = self.grad.data();
        const std::int64_t n = self.size();
        if (an->needs_grad) {
          T* ga = an->acc_grad().data();
          for (std::int64_t i = 0; i < n; ++i) ga[i] += g[i];
        }
        if (bn->needs_grad) {
          T* gb = bn->acc_grad().data();
          for (std::int64_t i = 0; i < n; ++i) gb[i] += g[i];
        }
      },
      "add");
}

template <typename T>
Tensor<T> mul(Tensor<T> a, Tensor<T> b) {
  if (a.shape() != b.shape()) throw DimensionError("mul shape mismatch");
  std::vector<T> out(a.data());
  const std::vector<T>& bv = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  auto an = a.node();
  auto bn = b.node();
  return detail::make_op<T>(
      std::vector<int>(a.shape()), std::move(out), {a, b},
      [an, bn](TensorNode<T>& self) {
        const T* g = self.grad.data();
        const std::int64_t n = self.size();
        if (an->needs_grad) {
          T* ga = an->acc_grad().data();
          const T* bv = bn->value.data();
          for (std::int64_t i = 0; i < n; ++i) ga[i] += g[i] * bv[i];
        }
        if (bn->needs_grad) {
          T* gb = bn->acc_grad().data();
          const T* av = an->value.data();
          for (std::int64_t i = 0; i < n; ++i) gb[i] += g[i] * av[i];
        }
      },
      "mul");
}

template <typename T>
Tensor<T> scale(Tensor<T> x, T c) {
  std::vector<T> out(x.data());
  for (T& v : out) v *= c;
  auto xn = x.node();
  return detail::make_op<T>(
      std::vector<int>(x.shape()), std::move(out), {x},
      [xn, c](TensorNode<T>& self) {
        if (!xn->needs_grad) return;
        T* gx = xn->acc_grad().data();
        const T* g = self.grad.data();
        const std::int64_t n = self.size();
        for (std::int64_t i = 0; i < n; ++i) gx[i] += g[i] * c;
      },
      "scale");
}

// ---------------------------------------------------------------------------
// Softmax over the last axis (numerically stable, max-subtracted)
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> softmax_lastdim(Tensor<T> x) {
  if (x.rank() < 1) throw DimensionError("softmax needs rank >= 1");
  const int n = x.dim(x.rank() - 1);
  const std::int64_t rows = x.size() / n;
  std::vector<T> out(x.data());
  for (std::int64_t r = 0; r < rows; ++r) {
    T* row = out.data() + r * n;
    T mx = row[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    T sum = T(0);
    for (int j = 0; j < n; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (int j = 0; j < n; ++j) row[j] /= sum;
  }
  auto xn = x.node();
  return detail::make_op<T>(
      std::vector<int>(x.shape()), std::move(out), {x},
      [xn, rows, n](TensorNode<T>& self) {
        if (!xn->needs_grad) return;
        T* gx = xn->acc_grad().data();
        const T* g = self.grad.data();
        const T* y = self.value.data();
        for (std::int64_t r = 0; r < rows; ++r) {
          const T* yr = y + r * n;
          const T* gr = g + r * n;
          T dot = T(0);
          for (int j = 0; j < n; ++j) dot += gr[j] * yr[j];
          T* gxr = gx + r * n;
          for (int j = 0; j < n; ++j) gxr[j] += yr[j] * (gr[j] - dot);
        }
      },
      "softmax");
}

// ---------------------------------------------------------------------------
// Batch normalization over the channel axis (axis 1)
// ---------------------------------------------------------------------------

// x: [B, C] or [B, C, H, W].  gamma/beta are trainable [C]; running_mean /
// running_var are non-trainable [C] tensors updated in train mode:
// running = (1 - momentum) * running + momentum * batch (biased variance).
template <typename T>
Tensor<T> batch_norm(Tensor<T> x, Tensor<T> gamma, Tensor<T> beta,
                     Tensor<T> running_mean, Tensor<T> running_var,
                     T momentum, T eps, bool train) {
  if (x.rank() < 2) throw DimensionError("batch_norm needs rank >= 2");
  const int b = x.dim(0), c = x.dim(1);
  if (gamma.size() != c || beta.size() != c || running_mean.size() != c ||
      running_var.size() != c)
    throw DimensionError("batch_norm per-channel parameter size mismatch");
  std::int64_t inner = 1;
  for (int i = 2; i < x.rank(); ++i) inner *= x.dim(i);
  const std::int64_t count = static_cast<std::int64_t>(b) * inner;

  std::vector<T> mean(c), invstd(c);
  if (train) {
    for (int ch = 0; ch < c; ++ch) {
      T m = T(0), v = T(0);
      for (int s = 0; s < b; ++s) {
        const T* base = x.data().data() + (static_cast<std::int64_t>(s) * c + ch) * inner;
        for (std::int64_t i = 0; i < inner; ++i) m += base[i];
      }
      m /= static_cast<T>(count);
      for (int s = 0; s < b; ++s) {
        const T* base = x.data().data() + (static_cast<std::int64_t>(s) * c + ch) * inner;
        for (std::int64_t i = 0; i < inner; ++i) {
          T d = base[i] - m;
          v += d * d;
        }
      }
      v /= static_cast<T>(count);
      mean[ch] = m;
      invstd[ch] = T(1) / std::sqrt(v + eps);
      running_mean.data()[ch] = (T(1) - momentum) * running_mean.data()[ch] + momentum * m;
      running_var.data()[ch] = (T(1) - momentum) * running_var.data()[ch] + momentum * v;
    }
  } else {
    for (int ch = 0; ch < c; ++ch) {
      mean[ch] = running_mean.data()[ch];
      invstd[ch] = T(1) / std::sqrt(running_var.data()[ch] + eps);
    }
  }

  std::vector<T> out(static_cast<size_t>(x.size()));
  {
    const T* xv = x.data().data();
    const T* gv = gamma.data().data();
    const T* bv = beta.data().data();
    for (int s = 0; s < b; ++s)
      for (int ch = 0; ch < c; ++ch) {
        const std::int64_t off = (static_cast<std::int64_t>(s) * c + ch) * inner;
        for (std::int64_t i = 0; i < inner; ++i)
          out[off + i] = gv[ch] * (xv[off + i] - mean[ch]) * invstd[ch] + bv[ch];
      }
  }

  auto xn = x.node();
  auto gn = gamma.node();
  auto bn = beta.node();
  return detail::make_op<T>(
      std::vector<int>(x.shape()), std::move(out), {x, gamma, beta},
      [xn, gn, bn, b, c, inner, count, mean = std::move(mean),
       invstd = std::move(invstd), train](TensorNode<T>& self) {
        const T* g = self.grad.data();
        const T* xv = xn->value.data();
        // Per-channel sums of dy and dy * xhat.
        std::vector<T> sum_g(c, T(0)), sum_gx(c, T(0));
        for (int s = 0; s < b; ++s)
          for (int ch = 0; ch < c; ++ch) {
            const std::int64_t off = (static_cast<std::int64_t>(s) * c + ch) * inner;
            for (std::int64_t i = 0; i < inner; ++i) {
              T xhat = (xv[off + i] - mean[ch]) * invstd[ch];
              sum_g[ch] += g[off + i];
              sum_gx[ch] += g[off + i] * xhat;
            }
          }
        if (gn->needs_grad) {
          T* gg = gn->acc_grad().data();
          for (int ch = 0; ch < c; ++ch) gg[ch] += sum_gx[ch];
        }
        if (bn->needs_grad) {
          T* gb = bn->acc_grad().data();
          for (int ch = 0; ch < c; ++ch) gb[ch] += sum_g[ch];
        }
        if (xn->needs_grad) {
          T* gx = xn->acc_grad().data();
          const T* gamma_v = gn->value.data();
          for (int s = 0; s < b; ++s)
            for (int ch = 0; ch < c; ++ch) {
              const std::int64_t off = (static_cast<std::int64_t>(s) * c + ch) * inner;
              const T k = gamma_v[ch] * invstd[ch];
              if (train) {
                const T mg = sum_g[ch] / static_cast<T>(count);
                const T mgx = sum_gx[ch] / static_cast<T>(count);
                for (std::int64_t i = 0; i < inner; ++i) {
                  T xhat = (xv[off + i] - mean[ch]) * invstd[ch];
                  gx[off + i] += k * (g[off + i] - mg - xhat * mgx);
                }
              } else {
                for (std::int64_t i = 0; i < inner; ++i)
                  gx[off + i] += k * g[off + i];
              }
            }
        }
      },
      "batch_norm");
}

// ---------------------------------------------------------------------------
// Dropout (inverted: survivors scaled by 1/(1-rate), eval is identity)
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> dropout(Tensor<T> x, T rate, bool train, Rng* rng) {
  if (rate < T(0) || rate >= T(1))
    throw ConfigError("dropout rate must be in [0, 1)");
  if (!train || rate == T(0)) return scale(x, T(1));
  std::vector<T> mask(static_cast<size_t>(x.size()));
  const T keep_scale = T(1) / (T(1) - rate);
  for (T& m : mask)
    m = (rng->uniform() < static_cast<double>(rate)) ? T(0) : keep_scale;
  std::vector<T> out(x.data());
  for (size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  auto xn = x.node();
  return detail::make_op<T>(
      std::vector<int>(x.shape()), std::move(out), {x},
      [xn, mask = std::move(mask)](TensorNode<T>& self) {
        if (!xn->needs_grad) return;
        T* gx = xn->acc_grad().data();
        const T* g = self.grad.data();
        for (size_t i = 0; i < mask.size(); ++i) gx[i] += g[i] * mask[i];
      },
      "dropout");
}

// ---------------------------------------------------------------------------
// Reductions, concatenation, reshaping
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
Tensor<T> reduce_axis(Tensor<T> x, int axis, bool take_mean) {
  if (axis < 0 || axis >= x.rank()) throw DimensionError("axis out of range");
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const int len = x.dim(axis);
  const T w = take_mean ? T(1) / static_cast<T>(len) : T(1);
  std::vector<int> oshape;
  for (int i = 0; i < x.rank(); ++i)
    if (i != axis) oshape.push_back(x.dim(i));
  if (oshape.empty()) oshape.push_back(1);
  std::vector<T> out(static_cast<size_t>(outer * inner), T(0));
  const T* xv = x.data().data();
  for (std::int64_t o = 0; o < outer; ++o)
    for (int l = 0; l < len; ++l) {
      const T* src = xv + (o * len + l) * inner;
      T* dst = out.data() + o * inner;
      for (std::int64_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  if (take_mean)
    for (T& v : out) v *= w;
  auto xn = x.node();
  return make_op<T>(
      std::move(oshape), std::move(out), {x},
      [xn, outer, inner, len, w](TensorNode<T>& self) {
        if (!xn->needs_grad) return;
        T* gx = xn->acc_grad().data();
        const T* g = self.grad.data();
        for (std::int64_t o = 0; o < outer; ++o)
          for (int l = 0; l < len; ++l) {
            T* dst = gx + (o * len + l) * inner;
            const T* src = g + o * inner;
            for (std::int64_t i = 0; i < inner; ++i) dst[i] += src[i] * w;
          }
      },
      "reduce_axis");
}

}  // namespace detail

template <typename T>
Tensor<T> sum_axis(Tensor<T> x, int axis) {
  return detail::reduce_axis(x, axis, false);
}

template <typename T>
Tensor<T> mean_axis(Tensor<T> x, int axis) {
  return detail::reduce_axis(x, axis, true);
}

template <typename T>
Tensor<T> mean_all(Tensor<T> x) {
  const std::int64_t n = x.size();
  T sum = std::accumulate(x.data().begin(), x.data().end(), T(0));
  auto xn = x.node();
  return detail::make_op<T>(
      {1}, {sum / static_cast<T>(n)}, {x},
      [xn, n](TensorNode<T>& self) {
        if (!xn->needs_grad) return;
        T* gx = xn->acc_grad().data();
        const T g = self.grad[0] / static_cast<T>(n);
        for (std::int64_t i = 0; i < n; ++i) gx[i] += g;
      },
      "mean_all");
}

template <typename T>
Tensor<T> concat(std::vector<Tensor<T>> parts, int axis) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  const int rank = parts[0].rank();
  if (axis < 0 || axis >= rank) throw DimensionError("axis out of range");
  std::vector<int> oshape(parts[0].shape());
  int total = 0;
  for (auto& p : parts) {
    if (p.rank() != rank) throw DimensionError("concat rank mismatch");
    for (int i = 0; i < rank; ++i)
      if (i != axis && p.dim(i) != oshape[static_cast<size_t>(i)])
        throw DimensionError("concat shape mismatch off the concat axis");
    total += p.dim(axis);
  }
  oshape[static_cast<size_t>(axis)] = total;
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= oshape[static_cast<size_t>(i)];
  for (int i = axis + 1; i < rank; ++i) inner *= oshape[static_cast<size_t>(i)];

  std::vector<T> out(static_cast<size_t>(outer) * total * inner);
  std::vector<int> lens;
  std::int64_t off = 0;
  for (auto& p : parts) {
    const int len = p.dim(axis);
    lens.push_back(len);
    const T* src = p.data().data();
    for (std::int64_t o = 0; o < outer; ++o)
      std::memcpy(out.data() + (o * total + off) * inner,
                  src + o * len * inner, sizeof(T) * len * inner);
    off += len;
  }

  std::vector<std::shared_ptr<TensorNode<T>>> pnodes;
  for (auto& p : parts) pnodes.push_back(p.node());
  return detail::make_op<T>(
      std::move(oshape), std::move(out), parts,
      [pnodes, lens, outer, inner, total](TensorNode<T>& self) {
        const T* g = self.grad.data();
        std::int64_t off = 0;
        for (size_t pi = 0; pi < pnodes.size(); ++pi) {
          const int len = lens[pi];
          if (pnodes[pi]->needs_grad) {
            T* gp = pnodes[pi]->acc_grad().data();
            for (std::int64_t o = 0; o < outer; ++o) {
              const T* src = g + (o * total + off) * inner;
              T* dst = gp + o * len * inner;
              for (std::int64_t i = 0; i < len * inner; ++i) dst[i] += src[i];
            }
          }
          off += len;
        }
      },
      "concat");
}

template <typename T>
Tensor<T> slice_axis(Tensor<T> x, int axis, int start, int len) {
  if (axis < 0 || axis >= x.rank()) throw DimensionError("axis out of range");
  if (start < 0 || len <= 0 || start + len > x.dim(axis))
    throw DimensionError("slice range out of bounds");
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const int total = x.dim(axis);
  std::vector<int> oshape(x.shape());
  oshape[static_cast<size_t>(axis)] = len;
  std::vector<T> out(static_cast<size_t>(outer) * len * inner);
  const T* xv = x.data().data();
  for (std::int64_t o = 0; o < outer; ++o)
    std::memcpy(out.data() + o * len * inner,
                xv + (o * total + start) * inner, sizeof(T) * len * inner);
  auto xn = x.node();
  return detail::make_op<T>(
      std::move(oshape), std::move(out), {x},
      [xn, outer, inner, total, start, len](TensorNode<T>& self) {
        if (!xn->needs_grad) return;
        T* gx = xn->acc_grad().data();
        const T* g = self.grad.data();
        for (std::int64_t o = 0; o < outer; ++o) {
          T* dst = gx + (o * total + start) * inner;
          const T* src = g + o * len * inner;
          for (std::int64_t i = 0; i < len * inner; ++i) dst[i] += src[i];
        }
      },
      "slice_axis");
}

template <typename T>
Tensor<T> reshape(Tensor<T> x, std::vector<int> shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  if (n != x.size()) throw DimensionError("reshape element count mismatch");
  std::vector<T> out(x.data());
  auto xn = x.node();
  return detail::make_op<T>(
      std::move(shape), std::move(out), {x},
      [xn](TensorNode<T>& self) {
        if (!xn->needs_grad) return;
        T* gx = xn->acc_grad().data();
        const T* g = self.grad.data();
        const std::int64_t n = self.size();
        for (std::int64_t i = 0; i < n; ++i) gx[i] += g[i];
      },
      "reshape");
}

// [..., A, B] -> [..., B, A]
template <typename T>
Tensor<T> swap_last2(Tensor<T> x) {
  if (x.rank() < 2) throw DimensionError("swap_last2 needs rank >= 2");
  const int a = x.dim(x.rank() - 2), b = x.dim(x.rank() - 1);
  std::int64_t batch = x.size() / (static_cast<std::int64_t>(a) * b);
  std::vector<int> oshape(x.shape());
  std::swap(oshape[oshape.size() - 2], oshape[oshape.size() - 1]);
  std::vector<T> out(static_cast<size_t>(x.size()));
  const T* xv = x.data().data();
  for (std::int64_t s = 0; s < batch; ++s) {
    const T* src = xv + s * a * b;
    T* dst = out.data() + s * a * b;
    for (int i = 0; i < a; ++i)
      for (int j = 0; j < b; ++j) dst[static_cast<std::int64_t>(j) * a + i] = src[static_cast<std::int64_t>(i) * b + j];
  }
  auto xn = x.node();
  return detail::make_op<T>(
      std::move(oshape), std::move(out), {x},
      [xn, a, b, batch](TensorNode<T>& self) {
        if (!xn->needs_grad) return;
        T* gx = xn->acc_grad().data();
        const T* g = self.grad.data();
        for (std::int64_t s = 0; s < batch; ++s) {
          const T* src = g + s * a * b;
          T* dst = gx + s * a * b;
          for (int j = 0; j < b; ++j)
            for (int i = 0; i < a; ++i)
              dst[static_cast<std::int64_t>(i) * b + j] += src[static_cast<std::int64_t>(j) * a + i];
        }
      },
      "swap_last2");
}

// ---------------------------------------------------------------------------
// Norms and pooling
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> l2_norm(Tensor<T> x) {
  T ss = T(0);
  for (T v : x.data()) ss += v * v;
  const T norm = std::sqrt(ss);
  auto xn = x.node();
  return detail::make_op<T>(
      {1}, {norm}, {x},
      [xn, norm](TensorNode<T>& self) {
        if (!xn->needs_grad) return;
        const T denom = std::max(norm, T(1e-12));
        T* gx = xn->acc_grad().data();
        const T g = self.grad[0];
        const T* xv = xn->value.data();
        const std::int64_t n = static_cast<std::int64_t>(xn->value.size());
        for (std::int64_t i = 0; i < n; ++i) gx[i] += g * xv[i] / denom;
      },
      "l2_norm");
}

// Row-wise L2 constraint: out[r, :] = alpha * x[r, :] / ||x[r, :]||.
template <typename T>
Tensor<T> length_normalize(Tensor<T> x, T alpha) {
  if (x.rank() != 2) throw DimensionError("length_normalize expects [B, C]");
  const int b = x.dim(0), c = x.dim(1);
  std::vector<T> norms(static_cast<size_t>(b));
  std::vector<T> out(x.data());
  for (int r = 0; r < b; ++r) {
    T ss = T(0);
    const T* row = out.data() + static_cast<std::int64_t>(r) * c;
    for (int j = 0; j < c; ++j) ss += row[j] * row[j];
    T n = std::sqrt(ss);
    if (n < T(1e-12))
      throw NumericError("length_normalize: zero-norm feature vector");
    norms[static_cast<size_t>(r)] = n;
    T* wrow = out.data() + static_cast<std::int64_t>(r) * c;
    for (int j = 0; j < c; ++j) wrow[j] *= alpha / n;
  }
  auto xn = x.node();
  return detail::make_op<T>(
      {b, c}, std::move(out), {x},
      [xn, b, c, alpha, norms = std::move(norms)](TensorNode<T>& self) {
        if (!xn->needs_grad) return;
        T* gx = xn->acc_grad().data();
        const T* g = self.grad.data();
        const T* xv = xn->value.data();
        for (int r = 0; r < b; ++r) {
          const std::int64_t off = static_cast<std::int64_t>(r) * c;
          const T n = norms[static_cast<size_t>(r)];
          T dot = T(0);
          for (int j = 0; j < c; ++j) dot += g[off + j] * xv[off + j];
          for (int j = 0; j < c; ++j)
            gx[off + j] +=
                alpha / n * (g[off + j] - xv[off + j] * dot / (n * n));
        }
      },
      "length_normalize");
}

// e[b, :] = sum_n w[b, n] * h[b, n, :]
template <typename T>
Tensor<T> attend_pool(Tensor<T> h, Tensor<T> w) {
  if (h.rank() != 3 || w.rank() != 2 || h.dim(0) != w.dim(0) ||
      h.dim(1) != w.dim(1))
    throw DimensionError("attend_pool expects h [B,N,C] and w [B,N]");
  const int b = h.dim(0), n = h.dim(1), c = h.dim(2);
  std::vector<T> out(static_cast<size_t>(b) * c, T(0));
  const T* hv = h.data().data();
  const T* wv = w.data().data();
  for (int s = 0; s < b; ++s)
    for (int i = 0; i < n; ++i) {
      const T wgt = wv[static_cast<std::int64_t>(s) * n + i];
      const T* src = hv + (static_cast<std::int64_t>(s) * n + i) * c;
      T* dst = out.data() + static_cast<std::int64_t>(s) * c;
      for (int j = 0; j < c; ++j) dst[j] += wgt * src[j];
    }
  auto hn = h.node();
  auto wn = w.node();
  return detail::make_op<T>(
      {b, c}, std::move(out), {h, w},
      [hn, wn, b, n, c](TensorNode<T>& self) {
        const T* g = self.grad.data();
        const T* hv = hn->value.data();
        const T* wv = wn->value.data();
        T* gh = hn->needs_grad ? hn->acc_grad().data() : nullptr;
        T* gw = wn->needs_grad ? wn->acc_grad().data() : nullptr;
        for (int s = 0; s < b; ++s) {
          const T* gs = g + static_cast<std::int64_t>(s) * c;
          for (int i = 0; i < n; ++i) {
            const std::int64_t hoff = (static_cast<std::int64_t>(s) * n + i) * c;
            if (gh) {
              const T wgt = wv[static_cast<std::int64_t>(s) * n + i];
              for (int j = 0; j < c; ++j) gh[hoff + j] += wgt * gs[j];
            }
            if (gw) {
              T dot = T(0);
              for (int j = 0; j < c; ++j) dot += hv[hoff + j] * gs[j];
              gw[static_cast<std::int64_t>(s) * n + i] += dot;
            }
          }
        }
      },
      "attend_pool");
}

// ---------------------------------------------------------------------------
// Softmax cross-entropy over class logits, mean over the batch
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> cross_entropy_softmax(Tensor<T> logits, const std::vector<int>& labels) {
  if (logits.rank() != 2) throw DimensionError("cross_entropy expects [B, K]");
  const int b = logits.dim(0), k = logits.dim(1);
  if (static_cast<int>(labels.size()) != b)
    throw ConfigError("label count does not match batch size");
  for (int lab : labels)
    if (lab < 0 || lab >= k)
      throw ConfigError("label out of range: " + std::to_string(lab));
  const T* lv = logits.data().data();
  T loss = T(0);
  for (int r = 0; r < b; ++r) {
    const T* row = lv + static_cast<std::int64_t>(r) * k;
    T mx = row[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    T sum = T(0);
    for (int j = 0; j < k; ++j) sum += std::exp(row[j] - mx);
    loss += mx + std::log(sum) - row[labels[static_cast<size_t>(r)]];
  }
  loss /= static_cast<T>(b);
  auto ln = logits.node();
  return detail::make_op<T>(
      {1}, {loss}, {logits},
      [ln, b, k, labels](TensorNode<T>& self) {
        if (!ln->needs_grad) return;
        T* gx = ln->acc_grad().data();
        const T g = self.grad[0] / static_cast<T>(b);
        const T* lv = ln->value.data();
        for (int r = 0; r < b; ++r) {
          const T* row = lv + static_cast<std::int64_t>(r) * k;
          T mx = row[0];
          for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
          T sum = T(0);
          for (int j = 0; j < k; ++j) sum += std::exp(row[j] - mx);
          T* gr = gx + static_cast<std::int64_t>(r) * k;
          for (int j = 0; j < k; ++j) {
            T p = std::exp(row[j] - mx) / sum;
            gr[j] += g * (p - (j == labels[static_cast<size_t>(r)] ? T(1) : T(0)));
          }
        }
      },
      "cross_entropy_softmax");
}

}  // namespace sv

#endif  // SVKIT_OPS_HPP_
