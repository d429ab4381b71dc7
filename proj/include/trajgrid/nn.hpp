#pragma once

#include <cblas.h>

#include <cmath>
#include <vector>

#include "trajgrid/autodiff.hpp"
#include "trajgrid/common.hpp"

extern "C" void openblas_set_num_threads(int);

namespace trajgrid {

// Reductions stay deterministic with a single BLAS thread.
inline void blas_init() {
  static const bool once = [] {
    openblas_set_num_threads(1);
    return true;
  }();
  (void)once;
}

template <typename T>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, T alpha, const T* a, int lda,
          const T* b, int ldb, T beta, T* c, int ldc);

template <>
inline void gemm<float>(bool ta, bool tb, int m, int n, int k, float alpha, const float* a,
                        int lda, const float* b, int ldb, float beta, float* c, int ldc) {
  blas_init();
  cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m, n,
              k, alpha, a, lda, b, ldb, beta, c, ldc);
}

template <>
inline void gemm<double>(bool ta, bool tb, int m, int n, int k, double alpha, const double* a,
                         int lda, const double* b, int ldb, double beta, double* c, int ldc) {
  blas_init();
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m, n,
              k, alpha, a, lda, b, ldb, beta, c, ldc);
}

struct ConvSpec {
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 3;
  int stride = 1;
  int dilation = 1;
  int padding = 0;

  int out_extent(int in) const {
    return (in + 2 * padding - dilation * (kernel - 1) - 1) / stride + 1;
  }
  int transpose_out_extent(int in) const {
    return (in - 1) * stride - 2 * padding + dilation * (kernel - 1) + 1;
  }
  void validate(bool transpose) const {
    if (in_channels < 1 || out_channels < 1) throw DimensionError("ConvSpec: bad channel count");
    if (kernel < 1 || stride < 1 || dilation < 1 || padding < 0)
      throw DimensionError("ConvSpec: bad geometry");
    if (!transpose && kernel % 2 == 0) throw DimensionError("conv2d: kernel must be odd");
  }
};

namespace detail {

struct ConvGeom {
  int channels, h, w, kernel, stride, dilation, padding, oh, ow;
};

// Gathers [C*k*k, OH*OW] patches; out-of-bounds reads are zeros (zero padding).
template <typename T>
void im2col(const T* src, const ConvGeom& g, T* col) {
  const int khw = g.kernel * g.kernel;
  const size_t ohw = static_cast<size_t>(g.oh) * g.ow;
  for (int c = 0; c < g.channels; ++c) {
    for (int kr = 0; kr < g.kernel; ++kr) {
      for (int kc = 0; kc < g.kernel; ++kc) {
        T* row = col + (static_cast<size_t>(c) * khw + kr * g.kernel + kc) * ohw;
        const T* plane = src + static_cast<size_t>(c) * g.h * g.w;
        for (int oh = 0; oh < g.oh; ++oh) {
          const int hr = oh * g.stride - g.padding + kr * g.dilation;
          if (hr < 0 || hr >= g.h) {
            std::fill(row + static_cast<size_t>(oh) * g.ow, row + static_cast<size_t>(oh + 1) * g.ow, T(0));
            continue;
          }
          const T* src_row = plane + static_cast<size_t>(hr) * g.w;
          T* dst = row + static_cast<size_t>(oh) * g.ow;
          for (int ow = 0; ow < g.ow; ++ow) {
            const int wc = ow * g.stride - g.padding + kc * g.dilation;
            dst[ow] = (wc >= 0 && wc < g.w) ? src_row[wc] : T(0);
          }
        }
      }
    }
  }
}

// Adjoint scatter-add of im2col.
template <typename T>
void col2im_add(const T* col, const ConvGeom& g, T* dst) {
  const int khw = g.kernel * g.kernel;
  const size_t ohw = static_cast<size_t>(g.oh) * g.ow;
  for (int c = 0; c < g.channels; ++c) {
    for (int kr = 0; kr < g.kernel; ++kr) {
      for (int kc = 0; kc < g.kernel; ++kc) {
        const T* row = col + (static_cast<size_t>(c) * khw + kr * g.kernel + kc) * ohw;
        T* plane = dst + static_cast<size_t>(c) * g.h * g.w;
        for (int oh = 0; oh < g.oh; ++oh) {
          const int hr = oh * g.stride - g.padding + kr * g.dilation;
          if (hr < 0 || hr >= g.h) continue;
          T* dst_row = plane + static_cast<size_t>(hr) * g.w;
          const T* src = row + static_cast<size_t>(oh) * g.ow;
          for (int ow = 0; ow < g.ow; ++ow) {
            const int wc = ow * g.stride - g.padding + kc * g.dilation;
            if (wc >= 0 && wc < g.w) dst_row[wc] += src[ow];
          }
        }
      }
    }
  }
}

inline std::pair<int, size_t> batch_of(const std::vector<int>& shape) {
  if (shape.size() == 3) return {1, numel(shape)};
  if (shape.size() == 4) return {shape[0], numel(shape) / shape[0]};
  throw DimensionError("conv: input must be rank 3 or 4");
}

}  // namespace detail

namespace ad {

// weights [outC, inC, k, k], bias [outC]; input [C,H,W] or [B,C,H,W].
template <typename T>
Ref<T> conv2d(Tape<T>& tape, const Ref<T>& x, const ConvSpec& spec, const Ref<T>& weights,
              const Ref<T>& bias) {
  spec.validate(false);
  const auto [batch, sample_sz] = detail::batch_of(x->shape);
  const int c_in = x->shape[x->shape.size() - 3];
  const int h = x->shape[x->shape.size() - 2];
  const int w = x->shape.back();
  if (c_in != spec.in_channels) throw DimensionError("conv2d: channel mismatch");
  const std::vector<int> wshape{spec.out_channels, spec.in_channels, spec.kernel, spec.kernel};
  if (weights->shape != wshape) throw DimensionError("conv2d: weight shape mismatch");
  if (bias->size() != static_cast<size_t>(spec.out_channels))
    throw DimensionError("conv2d: bias shape mismatch");

  const int oh = spec.out_extent(h);
  const int ow = spec.out_extent(w);
  if (oh < 1 || ow < 1) throw DimensionError("conv2d: effective kernel exceeds padded input");
  const detail::ConvGeom geom{c_in, h, w, spec.kernel, spec.stride, spec.dilation, spec.padding,
                              oh, ow};
  const int ckk = c_in * spec.kernel * spec.kernel;
  const size_t ohw = static_cast<size_t>(oh) * ow;

  std::vector<int> out_shape = x->shape.size() == 4
                                   ? std::vector<int>{batch, spec.out_channels, oh, ow}
                                   : std::vector<int>{spec.out_channels, oh, ow};
  auto out = tape.tensor(out_shape);
  const size_t out_sample = static_cast<size_t>(spec.out_channels) * ohw;

  std::vector<T> col(static_cast<size_t>(ckk) * ohw);
  for (int b = 0; b < batch; ++b) {
    detail::im2col(x->value.data() + b * sample_sz, geom, col.data());
    gemm<T>(false, false, spec.out_channels, static_cast<int>(ohw), ckk, T(1),
            weights->value.data(), ckk, col.data(), static_cast<int>(ohw), T(0),
            out->value.data() + b * out_sample, static_cast<int>(ohw));
    for (int oc = 0; oc < spec.out_channels; ++oc) {
      T* plane = out->value.data() + b * out_sample + static_cast<size_t>(oc) * ohw;
      const T bv = bias->value[oc];
      for (size_t i = 0; i < ohw; ++i) plane[i] += bv;
    }
  }

  tape.record([x, weights, bias, out, geom, spec, batch, sample_sz, ckk, ohw, out_sample] {
    std::vector<T> col(static_cast<size_t>(ckk) * ohw);
    std::vector<T> dcol(static_cast<size_t>(ckk) * ohw);
    for (int b = 0; b < batch; ++b) {
      const T* dout = out->grad.data() + b * out_sample;
      detail::im2col(x->value.data() + b * sample_sz, geom, col.data());
      gemm<T>(false, true, spec.out_channels, ckk, static_cast<int>(ohw), T(1), dout,
              static_cast<int>(ohw), col.data(), static_cast<int>(ohw), T(1),
              weights->grad.data(), ckk);
      gemm<T>(true, false, ckk, static_cast<int>(ohw), spec.out_channels, T(1),
              weights->value.data(), ckk, dout, static_cast<int>(ohw), T(0), dcol.data(),
              static_cast<int>(ohw));
      detail::col2im_add(dcol.data(), geom, x->grad.data() + b * sample_sz);
      for (int oc = 0; oc < spec.out_channels; ++oc) {
        const T* plane = dout + static_cast<size_t>(oc) * ohw;
        T acc = T(0);
        for (size_t i = 0; i < ohw; ++i) acc += plane[i];
        bias->grad[oc] += acc;
      }
    }
  });
  return out;
}

// Exact adjoint of conv2d with the same spec and weight layout: maps
// out_channels-many planes back to in_channels-many. bias has in_channels
// entries, added on the transpose output.
template <typename T>
Ref<T> conv2d_transpose(Tape<T>& tape, const Ref<T>& x, const ConvSpec& spec,
                        const Ref<T>& weights, const Ref<T>& bias) {
  spec.validate(true);
  const auto [batch, sample_sz] = detail::batch_of(x->shape);
  const int c_in = x->shape[x->shape.size() - 3];
  const int h = x->shape[x->shape.size() - 2];
  const int w = x->shape.back();
  if (c_in != spec.out_channels) throw DimensionError("conv2d_transpose: channel mismatch");
  const std::vector<int> wshape{spec.out_channels, spec.in_channels, spec.kernel, spec.kernel};
  if (weights->shape != wshape) throw DimensionError("conv2d_transpose: weight shape mismatch");
  if (bias->size() != static_cast<size_t>(spec.in_channels))
    throw DimensionError("conv2d_transpose: bias shape mismatch");

  const int oh = spec.transpose_out_extent(h);
  const int ow = spec.transpose_out_extent(w);
  if (oh < 1 || ow < 1) throw DimensionError("conv2d_transpose: degenerate output");
  // Geometry of the forward conv this op is the adjoint of.
  const detail::ConvGeom geom{spec.in_channels, oh, ow, spec.kernel, spec.stride, spec.dilation,
                              spec.padding, h, w};
  const int ckk = spec.in_channels * spec.kernel * spec.kernel;
  const size_t hw = static_cast<size_t>(h) * w;
  const size_t out_sample = static_cast<size_t>(spec.in_channels) * oh * ow;

  std::vector<int> out_shape = x->shape.size() == 4
                                   ? std::vector<int>{batch, spec.in_channels, oh, ow}
                                   : std::vector<int>{spec.in_channels, oh, ow};
  auto out = tape.tensor(out_shape);

  std::vector<T> col(static_cast<size_t>(ckk) * hw);
  for (int b = 0; b < batch; ++b) {
    gemm<T>(true, false, ckk, static_cast<int>(hw), spec.out_channels, T(1),
            weights->value.data(), ckk, x->value.data() + b * sample_sz, static_cast<int>(hw),
            T(0), col.data(), static_cast<int>(hw));
    T* dst = out->value.data() + b * out_sample;
    detail::col2im_add(col.data(), geom, dst);
    for (int ci = 0; ci < spec.in_channels; ++ci) {
      T* plane = dst + static_cast<size_t>(ci) * oh * ow;
      const T bv = bias->value[ci];
      for (size_t i = 0; i < static_cast<size_t>(oh) * ow; ++i) plane[i] += bv;
    }
  }

  tape.record([x, weights, bias, out, geom, spec, batch, sample_sz, ckk, hw, out_sample, oh, ow] {
    std::vector<T> col(static_cast<size_t>(ckk) * hw);
    for (int b = 0; b < batch; ++b) {
      const T* dout = out->grad.data() + b * out_sample;
      detail::im2col(dout, geom, col.data());
      gemm<T>(false, false, spec.out_channels, static_cast<int>(hw), ckk, T(1),
              weights->value.data(), ckk, col.data(), static_cast<int>(hw), T(1),
              x->grad.data() + b * sample_sz, static_cast<int>(hw));
      gemm<T>(false, true, spec.out_channels, ckk, static_cast<int>(hw), T(1),
              x->value.data() + b * sample_sz, static_cast<int>(hw), col.data(),
              static_cast<int>(hw), T(1), weights->grad.data(), ckk);
      for (int ci = 0; ci < spec.in_channels; ++ci) {
        const T* plane = dout + static_cast<size_t>(ci) * oh * ow;
        T acc = T(0);
        for (size_t i = 0; i < static_cast<size_t>(oh) * ow; ++i) acc += plane[i];
        bias->grad[ci] += acc;
      }
    }
  });
  return out;
}

// y = x W^T (+ bias); x is [B,in] or [in], weights [out,in].
template <typename T>
Ref<T> linear(Tape<T>& tape, const Ref<T>& x, const Ref<T>& weights, const Ref<T>& bias) {
  const bool vec = x->shape.size() == 1;
  const int b = vec ? 1 : x->shape[0];
  const int in = vec ? x->shape[0] : x->shape[1];
  if (x->shape.size() > 2) throw DimensionError("linear: input must be rank 1 or 2");
  if (weights->shape.size() != 2 || weights->shape[1] != in)
    throw DimensionError("linear: weight shape mismatch");
  const int out_dim = weights->shape[0];
  if (bias && bias->size() != static_cast<size_t>(out_dim))
    throw DimensionError("linear: bias shape mismatch");

  auto out = tape.tensor(vec ? std::vector<int>{out_dim} : std::vector<int>{b, out_dim});
  gemm<T>(false, true, b, out_dim, in, T(1), x->value.data(), in, weights->value.data(), in, T(0),
          out->value.data(), out_dim);
  if (bias)
    for (int r = 0; r < b; ++r)
      for (int c = 0; c < out_dim; ++c) out->value[static_cast<size_t>(r) * out_dim + c] += bias->value[c];

  tape.record([x, weights, bias, out, b, in, out_dim] {
    gemm<T>(false, false, b, in, out_dim, T(1), out->grad.data(), out_dim, weights->value.data(),
            in, T(1), x->grad.data(), in);
    gemm<T>(true, false, out_dim, in, b, T(1), out->grad.data(), out_dim, x->value.data(), in,
            T(1), weights->grad.data(), in);
    if (bias)
      for (int r = 0; r < b; ++r)
        for (int c = 0; c < out_dim; ++c) bias->grad[c] += out->grad[static_cast<size_t>(r) * out_dim + c];
  });
  return out;
}

}  // namespace ad

template <typename T>
struct LstmParams {
  int input_size = 0;
  int hidden_size = 0;
  Ref<T> w_i, u_i, b_i;
  Ref<T> w_f, u_f, b_f;
  Ref<T> w_g, u_g, b_g;
  Ref<T> w_o, u_o, b_o;

  static LstmParams create(ParamSet<T>& params, const std::string& prefix, int input_size,
                           int hidden_size, Rng& rng) {
    LstmParams p;
    p.input_size = input_size;
    p.hidden_size = hidden_size;
    auto mat = [&](const std::string& name, int rows, int cols) {
      auto t = params.add(prefix + "." + name, {rows, cols});
      xavier_init(t, cols, rows, rng);
      return t;
    };
    auto vec = [&](const std::string& name, T fill) {
      auto t = params.add(prefix + "." + name, {hidden_size});
      std::fill(t->value.begin(), t->value.end(), fill);
      return t;
    };
    p.w_i = mat("w_i", hidden_size, input_size);
    p.u_i = mat("u_i", hidden_size, hidden_size);
    p.b_i = vec("b_i", T(0));
    p.w_f = mat("w_f", hidden_size, input_size);
    p.u_f = mat("u_f", hidden_size, hidden_size);
    p.b_f = vec("b_f", T(1));  // forget gate starts open
    p.w_g = mat("w_g", hidden_size, input_size);
    p.u_g = mat("u_g", hidden_size, hidden_size);
    p.b_g = vec("b_g", T(0));
    p.w_o = mat("w_o", hidden_size, input_size);
    p.u_o = mat("u_o", hidden_size, hidden_size);
    p.b_o = vec("b_o", T(0));
    return p;
  }
};

namespace ad {

// Standard LSTM cell over a batch: x [B,in], h/c [B,hidden].
template <typename T>
std::pair<Ref<T>, Ref<T>> lstm_cell(Tape<T>& tape, const Ref<T>& x, const Ref<T>& h_prev,
                                    const Ref<T>& c_prev, const LstmParams<T>& p) {
  const int in = x->shape.size() == 1 ? x->shape[0] : x->shape[1];
  const int hid = h_prev->shape.size() == 1 ? h_prev->shape[0] : h_prev->shape[1];
  if (in != p.input_size || hid != p.hidden_size)
    throw DimensionError("lstm_cell: size mismatch");
  check_same_numel(h_prev, c_prev, "lstm_cell state");

  auto gate = [&](const Ref<T>& w, const Ref<T>& u, const Ref<T>& b) {
    return add(tape, linear(tape, x, w, b), linear<T>(tape, h_prev, u, nullptr));
  };
  auto i = sigmoid(tape, gate(p.w_i, p.u_i, p.b_i));
  auto f = sigmoid(tape, gate(p.w_f, p.u_f, p.b_f));
  auto g = tanh_op(tape, gate(p.w_g, p.u_g, p.b_g));
  auto o = sigmoid(tape, gate(p.w_o, p.u_o, p.b_o));
  auto c = add(tape, mul(tape, f, c_prev), mul(tape, i, g));
  auto h = mul(tape, o, tanh_op(tape, c));
  return {h, c};
}

// Per-pixel softmax over consecutive channel pairs: [2k,H,W] -> same shape,
// each pair summing to one. Numerically stable via max subtraction.
template <typename T>
Ref<T> softmax2(Tape<T>& tape, const Ref<T>& logits) {
  if (logits->shape.size() < 2 || logits->shape[0] % 2 != 0)
    throw DimensionError("softmax2: leading dimension must be even");
  const int pairs = logits->shape[0] / 2;
  const size_t inner = logits->size() / logits->shape[0];

  auto out = tape.tensor(logits->shape);
  for (int p = 0; p < pairs; ++p) {
    const T* l0 = logits->value.data() + (2 * p) * inner;
    const T* l1 = logits->value.data() + (2 * p + 1) * inner;
    T* s0 = out->value.data() + (2 * p) * inner;
    T* s1 = out->value.data() + (2 * p + 1) * inner;
    for (size_t i = 0; i < inner; ++i) {
      const T m = std::max(l0[i], l1[i]);
      const T e0 = std::exp(l0[i] - m);
      const T e1 = std::exp(l1[i] - m);
      const T z = e0 + e1;
      s0[i] = e0 / z;
      s1[i] = e1 / z;
    }
  }
  tape.record([logits, out, pairs, inner] {
    for (int p = 0; p < pairs; ++p) {
      T* g0 = logits->grad.data() + (2 * p) * inner;
      T* g1 = logits->grad.data() + (2 * p + 1) * inner;
      const T* s0 = out->value.data() + (2 * p) * inner;
      const T* s1 = out->value.data() + (2 * p + 1) * inner;
      const T* d0 = out->grad.data() + (2 * p) * inner;
      const T* d1 = out->grad.data() + (2 * p + 1) * inner;
      for (size_t i = 0; i < inner; ++i) {
        const T j = s0[i] * s1[i] * (d0[i] - d1[i]);
        g0[i] += j;
        g1[i] -= j;
      }
    }
  });
  return out;
}

inline constexpr double kLogClamp = 1e-7;

// Mean over pixels of -alpha*P0*log(R0) - (1-alpha)*P1*log(R1) with
// probabilities clamped to [1e-7, 1-1e-7] before the log.
template <typename T>
T weighted_ce_value(const T* r0, const T* r1, const T* p0, size_t hw, T alpha) {
  const T lo = T(kLogClamp), hi = T(1) - T(kLogClamp);
  auto clamp = [lo, hi](T v) { return v < lo ? lo : (v > hi ? hi : v); };
  T acc = T(0);
  for (size_t i = 0; i < hw; ++i) {
    acc -= alpha * p0[i] * std::log(clamp(r0[i]));
    acc -= (T(1) - alpha) * (T(1) - p0[i]) * std::log(clamp(r1[i]));
  }
  return acc / static_cast<T>(hw);
}

// Sum over occupied cells of -log(R1), clamped, times inv_norm.
template <typename T>
T obstacle_nll_value(const T* r1, const Mask& occupied, T inv_norm) {
  const T lo = T(kLogClamp), hi = T(1) - T(kLogClamp);
  T acc = T(0);
  for (size_t i = 0; i < occupied.size(); ++i) {
    if (!occupied[i]) continue;
    T v = r1[i] < lo ? lo : (r1[i] > hi ? hi : r1[i]);
    acc -= std::log(v);
  }
  return acc * inv_norm;
}

// Graph version of weighted_ce_value; probs is [2,H,W], p0 the traversable
// target mask (P1 = 1 - P0).
template <typename T>
Ref<T> weighted_ce(Tape<T>& tape, const Ref<T>& probs, const std::vector<T>& p0, T alpha) {
  if (probs->shape.size() != 3 || probs->shape[0] != 2)
    throw DimensionError("weighted_ce: probs must be [2,H,W]");
  const size_t hw = probs->size() / 2;
  if (p0.size() != hw) throw DimensionError("weighted_ce: target size mismatch");

  const T lo = T(kLogClamp), hi = T(1) - T(kLogClamp);
  auto out = tape.tensor({1});
  out->value[0] = weighted_ce_value(probs->value.data(), probs->value.data() + hw, p0.data(), hw, alpha);

  tape.record([probs, out, p0, alpha, hw, lo, hi] {
    const T g = out->grad[0] / static_cast<T>(hw);
    const T* r0 = probs->value.data();
    const T* r1 = probs->value.data() + hw;
    T* g0 = probs->grad.data();
    T* g1 = probs->grad.data() + hw;
    for (size_t i = 0; i < hw; ++i) {
      if (r0[i] > lo && r0[i] < hi) g0[i] -= g * alpha * p0[i] / r0[i];
      if (r1[i] > lo && r1[i] < hi) g1[i] -= g * (T(1) - alpha) * (T(1) - p0[i]) / r1[i];
    }
  });
  return out;
}

// Negative log likelihood of the non-traversable channel at occupied cells,
// scaled by inv_norm (caller supplies 1/(heads * occupied_count)).
template <typename T>
Ref<T> obstacle_nll(Tape<T>& tape, const Ref<T>& probs, const Mask& occupied, T inv_norm) {
  if (probs->shape.size() != 3 || probs->shape[0] != 2)
    throw DimensionError("obstacle_nll: probs must be [2,H,W]");
  const size_t hw = probs->size() / 2;
  if (occupied.size() != hw) throw DimensionError("obstacle_nll: mask size mismatch");

  const T lo = T(kLogClamp), hi = T(1) - T(kLogClamp);
  auto out = tape.tensor({1});
  out->value[0] = obstacle_nll_value(probs->value.data() + hw, occupied, inv_norm);

  tape.record([probs, out, occupied, inv_norm, hw, lo, hi] {
    const T g = out->grad[0] * inv_norm;
    const T* r1 = probs->value.data() + hw;
    T* g1 = probs->grad.data() + hw;
    for (size_t i = 0; i < hw; ++i) {
      if (!occupied[i]) continue;
      if (r1[i] > lo && r1[i] < hi) g1[i] -= g / r1[i];
    }
  });
  return out;
}

// Row-wise Euclidean distance between pred [B,2] and a constant target.
// The value is exact; the backward pass guards the norm derivative at zero.
template <typename T>
Ref<T> rowwise_distance(Tape<T>& tape, const Ref<T>& pred, std::vector<T> target) {
  if (pred->shape.size() != 2 || pred->shape[1] != 2)
    throw DimensionError("rowwise_distance: pred must be [B,2]");
  if (target.size() != pred->size()) throw DimensionError("rowwise_distance: target mismatch");
  const int b = pred->shape[0];
  auto out = tape.tensor({b});
  for (int r = 0; r < b; ++r) {
    const T dx = pred->value[2 * r] - target[2 * r];
    const T dy = pred->value[2 * r + 1] - target[2 * r + 1];
    out->value[r] = std::sqrt(dx * dx + dy * dy);
  }
  tape.record([pred, out, target = std::move(target), b] {
    for (int r = 0; r < b; ++r) {
      const T dx = pred->value[2 * r] - target[2 * r];
      const T dy = pred->value[2 * r + 1] - target[2 * r + 1];
      const T denom = std::max(out->value[r], T(1e-12));
      pred->grad[2 * r] += out->grad[r] * dx / denom;
      pred->grad[2 * r + 1] += out->grad[r] * dy / denom;
    }
  });
  return out;
}

}  // namespace ad
}  // namespace trajgrid
