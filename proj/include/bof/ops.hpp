#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "bof/error.hpp"
#include "bof/gemm.hpp"
#include "bof/tape.hpp"
#include "bof/tensor.hpp"

// Differentiable operation set: dense, normalization, attention, RoPE,
// random Fourier features, spatial and spectral convolution, plus the small
// glue ops the models need. Every op validates shapes, computes the forward
// value, and (when recording) registers an exact reverse-mode closure.
namespace bof::ops {

template <class S>
using Var = Node<S>*;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// ---------------------------------------------------------------------------
// y = x W + b over the last axis of x.
template <class S>
Var<S> linear(Tape<S>& t, Var<S> x, Param<S>& W, Param<S>& b) {
  if (W.value.rank() != 2)
    throw std::invalid_argument("linear: weight must be rank 2, got " + shape_str(W.value.shape));
  const std::size_t d_in = W.value.dim(0), d_out = W.value.dim(1);
  if (x->value.rank() < 1 || x->value.shape.back() != d_in)
    throw std::invalid_argument("linear: input trailing extent " + shape_str(x->value.shape) +
                                " does not match weight " + shape_str(W.value.shape));
  check_shape(b.value, {d_out}, "linear bias");
  const std::size_t rows = x->value.size() / d_in;

  Shape out_shape = x->value.shape;
  out_shape.back() = d_out;
  Tensor<S> y(out_shape);
  gemm_nn(rows, d_out, d_in, x->value.ptr(), W.value.ptr(), y.ptr());
  for (std::size_t r = 0; r < rows; ++r) {
    S* yr = y.ptr() + r * d_out;
    for (std::size_t j = 0; j < d_out; ++j) yr[j] += b.value[j];
  }

  Var<S> wn = t.leaf(W), bn = t.leaf(b);
  Var<S> out = t.make(std::move(y), x->needs_grad || wn->needs_grad || bn->needs_grad);
  if (out->needs_grad) {
    out->backward = [x, wn, bn, out, rows, d_in, d_out]() {
      const S* g = out->grad.ptr();
      if (x->needs_grad)
        gemm_nt(rows, d_in, d_out, g, wn->value.ptr(), x->ensure_grad().ptr(), true);
      if (wn->needs_grad)
        gemm_tn(d_in, d_out, rows, x->value.ptr(), g, wn->ensure_grad().ptr(), true);
      if (bn->needs_grad) {
        S* gb = bn->ensure_grad().ptr();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < d_out; ++j) gb[j] += g[r * d_out + j];
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
template <class S>
Var<S> relu(Tape<S>& t, Var<S> x) {
  Tensor<S> y = x->value;
  for (S& v : y.data)
    if (v < S(0)) v = S(0);
  Var<S> out = t.make(std::move(y), x->needs_grad);
  if (out->needs_grad) {
    out->backward = [x, out]() {
      S* gx = x->ensure_grad().ptr();
      const S* g = out->grad.ptr();
      const S* v = x->value.ptr();
      for (std::size_t i = 0; i < out->grad.size(); ++i)
        if (v[i] > S(0)) gx[i] += g[i];
    };
  }
  return out;
}

template <class S>
Var<S> add(Tape<S>& t, Var<S> a, Var<S> b) {
  if (!a->value.same_shape(b->value))
    throw std::invalid_argument("add: shape mismatch " + shape_str(a->value.shape) + " vs " +
                                shape_str(b->value.shape));
  Tensor<S> y = a->value;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b->value[i];
  Var<S> out = t.make(std::move(y), a->needs_grad || b->needs_grad);
  if (out->needs_grad) {
    out->backward = [a, b, out]() {
      const S* g = out->grad.ptr();
      if (a->needs_grad) {
        S* ga = a->ensure_grad().ptr();
        for (std::size_t i = 0; i < out->grad.size(); ++i) ga[i] += g[i];
      }
      if (b->needs_grad) {
        S* gb = b->ensure_grad().ptr();
        for (std::size_t i = 0; i < out->grad.size(); ++i) gb[i] += g[i];
      }
    };
  }
  return out;
}

template <class S>
Var<S> reshape(Tape<S>& t, Var<S> x, Shape sh) {
  if (numel(sh) != x->value.size())
    throw std::invalid_argument("reshape: cannot view " + shape_str(x->value.shape) + " as " +
                                shape_str(sh));
  Tensor<S> y(std::move(sh), x->value.data);
  Var<S> out = t.make(std::move(y), x->needs_grad);
  if (out->needs_grad) {
    out->backward = [x, out]() {
      S* gx = x->ensure_grad().ptr();
      const S* g = out->grad.ptr();
      for (std::size_t i = 0; i < out->grad.size(); ++i) gx[i] += g[i];
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Per-token normalization over the last axis, then affine gamma/beta.
template <class S>
Var<S> layer_norm(Tape<S>& t, Var<S> x, Param<S>& gamma, Param<S>& beta, double eps = 1e-5) {
  const std::size_t d = x->value.shape.back();
  if (d < 1) throw std::invalid_argument("layer_norm: empty token axis");
  check_shape(gamma.value, {d}, "layer_norm gamma");
  check_shape(beta.value, {d}, "layer_norm beta");
  const std::size_t rows = x->value.size() / d;

  Tensor<S> y(x->value.shape);
  Tensor<S> xhat(x->value.shape);
  std::vector<S> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const S* xr = x->value.ptr() + r * d;
    double mu = 0;
    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= double(d);
    double var = 0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = double(xr[j]) - mu;
      var += c * c;
    }
    var /= double(d);
    const S istd = S(1.0 / std::sqrt(var + eps));
    inv_std[r] = istd;
    S* hr = xhat.ptr() + r * d;
    S* yr = y.ptr() + r * d;
    for (std::size_t j = 0; j < d; ++j) {
      hr[j] = (xr[j] - S(mu)) * istd;
      yr[j] = hr[j] * gamma.value[j] + beta.value[j];
    }
  }

  Var<S> gn = t.leaf(gamma), bn = t.leaf(beta);
  Var<S> out = t.make(std::move(y), x->needs_grad || gn->needs_grad || bn->needs_grad);
  if (out->needs_grad) {
    out->backward = [x, gn, bn, out, rows, d, xhat = std::move(xhat),
                     inv_std = std::move(inv_std)]() {
      const S* g = out->grad.ptr();
      if (gn->needs_grad || bn->needs_grad) {
        S* gg = gn->needs_grad ? gn->ensure_grad().ptr() : nullptr;
        S* gb = bn->needs_grad ? bn->ensure_grad().ptr() : nullptr;
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < d; ++j) {
            if (gg) gg[j] += g[r * d + j] * xhat[r * d + j];
            if (gb) gb[j] += g[r * d + j];
          }
      }
      if (x->needs_grad) {
        S* gx = x->ensure_grad().ptr();
        for (std::size_t r = 0; r < rows; ++r) {
          const S* gr = g + r * d;
          const S* hr = xhat.ptr() + r * d;
          double sum_gy = 0, sum_gyh = 0;
          for (std::size_t j = 0; j < d; ++j) {
            const double gy = double(gr[j]) * double(gn->value[j]);
            sum_gy += gy;
            sum_gyh += gy * double(hr[j]);
          }
          const double mg = sum_gy / double(d), mgh = sum_gyh / double(d);
          for (std::size_t j = 0; j < d; ++j) {
            const double gy = double(gr[j]) * double(gn->value[j]);
            gx[r * d + j] += S(double(inv_std[r]) * (gy - mg - double(hr[j]) * mgh));
          }
        }
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scaled dot-product attention, softmax over keys, per head.
// Q: [n_q, h, d_h], K/V: [n_k, h, d_h] -> [n_q, h, d_h].
template <class S>
Var<S> softmax_attention(Tape<S>& t, Var<S> q, Var<S> k, Var<S> v) {
  if (q->value.rank() != 3 || k->value.rank() != 3 || v->value.rank() != 3)
    throw std::invalid_argument("attention: Q/K/V must be rank 3 [n, heads, d_head]");
  const std::size_t nq = q->value.dim(0), h = q->value.dim(1), dh = q->value.dim(2);
  const std::size_t nk = k->value.dim(0);
  if (k->value.dim(1) != h || k->value.dim(2) != dh || !k->value.same_shape(v->value))
    throw std::invalid_argument("attention: head count / head dim mismatch");

  const S scale = S(1.0 / std::sqrt(double(dh)));
  Tensor<S> y({nq, h, dh});
  Tensor<S> probs({h, nq, nk});
  std::vector<S> qh(nq * dh), kh(nk * dh), vh(nk * dh), sc(nq * nk), oh(nq * dh);

  for (std::size_t hh = 0; hh < h; ++hh) {
    for (std::size_t i = 0; i < nq; ++i)
      for (std::size_t d = 0; d < dh; ++d) qh[i * dh + d] = q->value.at3(i, hh, d);
    for (std::size_t i = 0; i < nk; ++i)
      for (std::size_t d = 0; d < dh; ++d) {
        kh[i * dh + d] = k->value.at3(i, hh, d);
        vh[i * dh + d] = v->value.at3(i, hh, d);
      }
    gemm_nt(nq, nk, dh, qh.data(), kh.data(), sc.data());
    S* p = probs.ptr() + hh * nq * nk;
    for (std::size_t i = 0; i < nq; ++i) {
      S* row = sc.data() + i * nk;
      S mx = row[0] * scale;
      for (std::size_t j = 0; j < nk; ++j) {
        row[j] *= scale;
        if (!std::isfinite(double(row[j]))) throw NumericError("attention: non-finite logit");
        if (row[j] > mx) mx = row[j];
      }
      // exp in working precision: float uses expf, the double test path keeps
      // full precision against the loop oracles
      double denom = 0;
      for (std::size_t j = 0; j < nk; ++j) {
        row[j] = std::exp(row[j] - mx);
        denom += row[j];
      }
      const S inv = S(1.0 / denom);
      for (std::size_t j = 0; j < nk; ++j) p[i * nk + j] = row[j] * inv;
    }
    gemm_nn(nq, dh, nk, p, vh.data(), oh.data());
    for (std::size_t i = 0; i < nq; ++i)
      for (std::size_t d = 0; d < dh; ++d) y.at3(i, hh, d) = oh[i * dh + d];
  }

  Var<S> out = t.make(std::move(y), q->needs_grad || k->needs_grad || v->needs_grad);
  if (out->needs_grad) {
    out->backward = [q, k, v, out, nq, nk, h, dh, scale, probs = std::move(probs)]() {
      std::vector<S> gh(nq * dh), qh(nq * dh), kh(nk * dh), vh(nk * dh);
      std::vector<S> gp(nq * nk), gs(nq * nk), gq(nq * dh), gk(nk * dh), gv(nk * dh);
      Tensor<S>* gq_t = q->needs_grad ? &q->ensure_grad() : nullptr;
      Tensor<S>* gk_t = k->needs_grad ? &k->ensure_grad() : nullptr;
      Tensor<S>* gv_t = v->needs_grad ? &v->ensure_grad() : nullptr;
      for (std::size_t hh = 0; hh < h; ++hh) {
        for (std::size_t i = 0; i < nq; ++i)
          for (std::size_t d = 0; d < dh; ++d) {
            gh[i * dh + d] = out->grad.at3(i, hh, d);
            qh[i * dh + d] = q->value.at3(i, hh, d);
          }
        for (std::size_t i = 0; i < nk; ++i)
          for (std::size_t d = 0; d < dh; ++d) {
            kh[i * dh + d] = k->value.at3(i, hh, d);
            vh[i * dh + d] = v->value.at3(i, hh, d);
          }
        const S* p = probs.ptr() + hh * nq * nk;
        // dV = P^T dO ; dP = dO V^T ; dS = P o (dP - rowsum(dP o P)) * scale
        gemm_tn(nk, dh, nq, p, gh.data(), gv.data());
        gemm_nt(nq, nk, dh, gh.data(), vh.data(), gp.data());
        for (std::size_t i = 0; i < nq; ++i) {
          double dot = 0;
          for (std::size_t j = 0; j < nk; ++j) dot += double(gp[i * nk + j]) * double(p[i * nk + j]);
          for (std::size_t j = 0; j < nk; ++j)
            gs[i * nk + j] = S(double(p[i * nk + j]) * (double(gp[i * nk + j]) - dot)) * scale;
        }
        gemm_nn(nq, dh, nk, gs.data(), kh.data(), gq.data());
        gemm_tn(nk, dh, nq, gs.data(), qh.data(), gk.data());
        for (std::size_t i = 0; i < nq && gq_t; ++i)
          for (std::size_t d = 0; d < dh; ++d) gq_t->at3(i, hh, d) += gq[i * dh + d];
        for (std::size_t i = 0; i < nk; ++i)
          for (std::size_t d = 0; d < dh; ++d) {
            if (gk_t) gk_t->at3(i, hh, d) += gk[i * dh + d];
            if (gv_t) gv_t->at3(i, hh, d) += gv[i * dh + d];
          }
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rotary embedding for 2D continuous positions: one half of each head vector
// per coordinate axis; pair k rotates by angle theta_k * s_pos * coordinate,
// theta_k = 10000^(-2k / (d_h/2)). Positions are data, not differentiated.
template <class S>
Var<S> rope_apply(Tape<S>& t, Var<S> x, const Tensor<S>& pos, double pos_scale = 1.0) {
  if (x->value.rank() != 3)
    throw std::invalid_argument("rope: input must be [n, heads, d_head]");
  const std::size_t n = x->value.dim(0), h = x->value.dim(1), dh = x->value.dim(2);
  if (dh % 4 != 0)
    throw std::invalid_argument("rope: head dim must be divisible by 4, got " + std::to_string(dh));
  check_shape(pos, {n, 2}, "rope positions");

  const std::size_t half = dh / 2, pairs = dh / 4;
  std::vector<double> theta(pairs);
  for (std::size_t kk = 0; kk < pairs; ++kk)
    theta[kk] = std::pow(10000.0, -2.0 * double(kk) / double(half));

  auto rotate = [n, h, half, pairs, pos_scale](const std::vector<double>& theta,
                                               const Tensor<S>& pos, const Tensor<S>& src,
                                               Tensor<S>& dst, double dir) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t axis = 0; axis < 2; ++axis) {
        const double p = double(pos.at2(i, axis)) * pos_scale;
        for (std::size_t kk = 0; kk < pairs; ++kk) {
          const double a = dir * theta[kk] * p;
          const S c = S(std::cos(a)), s = S(std::sin(a));
          const std::size_t j = axis * half + 2 * kk;
          for (std::size_t hh = 0; hh < h; ++hh) {
            const S v0 = src.at3(i, hh, j), v1 = src.at3(i, hh, j + 1);
            dst.at3(i, hh, j) = c * v0 - s * v1;
            dst.at3(i, hh, j + 1) = s * v0 + c * v1;
          }
        }
      }
  };

  Tensor<S> y({n, h, dh});
  rotate(theta, pos, x->value, y, +1.0);
  Var<S> out = t.make(std::move(y), x->needs_grad);
  if (out->needs_grad) {
    out->backward = [x, out, rotate, theta = std::move(theta), pos]() {
      Tensor<S> gx(out->grad.shape);
      rotate(theta, pos, out->grad, gx, -1.0);  // adjoint of a rotation is its inverse
      S* dst = x->ensure_grad().ptr();
      for (std::size_t i = 0; i < gx.size(); ++i) dst[i] += gx[i];
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// gamma(Y) = [cos(2 pi Y B), sin(2 pi Y B)]; B is frozen, inputs are data.
template <class S>
Tensor<S> rff_features(const Tensor<S>& y, const Tensor<S>& b) {
  if (y.rank() != 2 || y.dim(1) != 2)
    throw std::invalid_argument("rff: coordinates must be [n, 2]");
  if (b.rank() != 2 || b.dim(0) != 2)
    throw std::invalid_argument("rff: projection must be [2, d2]");
  const std::size_t n = y.dim(0), d2 = b.dim(1);
  Tensor<S> out({n, 2 * d2});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d2; ++j) {
      const double arg =
          kTwoPi * (double(y.at2(i, 0)) * double(b.at2(0, j)) + double(y.at2(i, 1)) * double(b.at2(1, j)));
      out.at2(i, j) = S(std::cos(arg));
      out.at2(i, d2 + j) = S(std::sin(arg));
    }
  return out;
}

// ---------------------------------------------------------------------------
// 3x3 cross-correlation with zero padding 1; spatial size preserved.
// x: [c_in, H, W], kernels: [c_out, c_in, 3, 3], bias: [c_out].
template <class S>
inline void im2col3x3(const Tensor<S>& x, std::vector<S>& cols) {
  const std::size_t c = x.dim(0), hgt = x.dim(1), wid = x.dim(2);
  cols.assign(c * 9 * hgt * wid, S(0));
  for (std::size_t ci = 0; ci < c; ++ci)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        S* dst = cols.data() + ((ci * 3 + (dy + 1)) * 3 + (dx + 1)) * hgt * wid;
        for (std::size_t yy = 0; yy < hgt; ++yy) {
          const long sy = long(yy) + dy;
          if (sy < 0 || sy >= long(hgt)) continue;
          const S* src = x.ptr() + (ci * hgt + std::size_t(sy)) * wid;
          for (std::size_t xx = 0; xx < wid; ++xx) {
            const long sx = long(xx) + dx;
            if (sx >= 0 && sx < long(wid)) dst[yy * wid + xx] = src[sx];
          }
        }
      }
}

template <class S>
Var<S> conv2d(Tape<S>& t, Var<S> x, Param<S>& kernels, Param<S>& bias) {
  if (x->value.rank() != 3)
    throw std::invalid_argument("conv2d: input must be [c, H, W]");
  if (kernels.value.rank() != 4 || kernels.value.dim(2) != 3 || kernels.value.dim(3) != 3)
    throw std::invalid_argument("conv2d: kernels must be [c_out, c_in, 3, 3]");
  const std::size_t cin = x->value.dim(0), hgt = x->value.dim(1), wid = x->value.dim(2);
  const std::size_t cout = kernels.value.dim(0);
  if (kernels.value.dim(1) != cin)
    throw std::invalid_argument("conv2d: kernel c_in " + std::to_string(kernels.value.dim(1)) +
                                " != input channels " + std::to_string(cin));
  check_shape(bias.value, {cout}, "conv2d bias");

  const std::size_t hw = hgt * wid;
  std::vector<S> cols;
  im2col3x3(x->value, cols);
  Tensor<S> y({cout, hgt, wid});
  gemm_nn(cout, hw, cin * 9, kernels.value.ptr(), cols.data(), y.ptr());
  for (std::size_t co = 0; co < cout; ++co) {
    S* yp = y.ptr() + co * hw;
    for (std::size_t i = 0; i < hw; ++i) yp[i] += bias.value[co];
  }

  Var<S> kn = t.leaf(kernels), bn = t.leaf(bias);
  Var<S> out = t.make(std::move(y), x->needs_grad || kn->needs_grad || bn->needs_grad);
  if (out->needs_grad) {
    out->backward = [x, kn, bn, out, cin, cout, hgt, wid, hw]() {
      const S* g = out->grad.ptr();
      std::vector<S> cols;
      if (kn->needs_grad) {
        im2col3x3(x->value, cols);  // recomputed; cheaper than caching per layer
        gemm_nt(cout, cin * 9, hw, g, cols.data(), kn->ensure_grad().ptr(), true);
      }
      if (bn->needs_grad) {
        S* gb = bn->ensure_grad().ptr();
        for (std::size_t co = 0; co < cout; ++co)
          for (std::size_t i = 0; i < hw; ++i) gb[co] += g[co * hw + i];
      }
      if (x->needs_grad) {
        std::vector<S> gcols(cin * 9 * hw);
        gemm_tn(cin * 9, hw, cout, kn->value.ptr(), g, gcols.data());
        Tensor<S>& gx = x->ensure_grad();
        for (std::size_t ci = 0; ci < cin; ++ci)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const S* src = gcols.data() + ((ci * 3 + (dy + 1)) * 3 + (dx + 1)) * hw;
              for (std::size_t yy = 0; yy < hgt; ++yy) {
                const long sy = long(yy) + dy;
                if (sy < 0 || sy >= long(hgt)) continue;
                for (std::size_t xx = 0; xx < wid; ++xx) {
                  const long sx = long(xx) + dx;
                  if (sx >= 0 && sx < long(wid))
                    gx.data[(ci * hgt + std::size_t(sy)) * wid + std::size_t(sx)] +=
                        src[yy * wid + xx];
                }
              }
            }
      }
    };
  }
  return out;
}

// Pointwise channel mixing: y[co,h,w] = sum_ci W[co,ci] x[ci,h,w] + b[co].
template <class S>
Var<S> conv1x1(Tape<S>& t, Var<S> x, Param<S>& W, Param<S>& b) {
  if (x->value.rank() != 3)
    throw std::invalid_argument("conv1x1: input must be [c, H, W]");
  const std::size_t cin = x->value.dim(0), hw = x->value.dim(1) * x->value.dim(2);
  if (W.value.rank() != 2 || W.value.dim(1) != cin)
    throw std::invalid_argument("conv1x1: weight must be [c_out, c_in]");
  const std::size_t cout = W.value.dim(0);
  check_shape(b.value, {cout}, "conv1x1 bias");

  Tensor<S> y({cout, x->value.dim(1), x->value.dim(2)});
  gemm_nn(cout, hw, cin, W.value.ptr(), x->value.ptr(), y.ptr());
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t i = 0; i < hw; ++i) y.data[co * hw + i] += b.value[co];

  Var<S> wn = t.leaf(W), bn = t.leaf(b);
  Var<S> out = t.make(std::move(y), x->needs_grad || wn->needs_grad || bn->needs_grad);
  if (out->needs_grad) {
    out->backward = [x, wn, bn, out, cin, cout, hw]() {
      const S* g = out->grad.ptr();
      if (wn->needs_grad) gemm_nt(cout, cin, hw, g, x->value.ptr(), wn->ensure_grad().ptr(), true);
      if (x->needs_grad) gemm_tn(cin, hw, cout, wn->value.ptr(), g, x->ensure_grad().ptr(), true);
      if (bn->needs_grad) {
        S* gb = bn->ensure_grad().ptr();
        for (std::size_t co = 0; co < cout; ++co)
          for (std::size_t i = 0; i < hw; ++i) gb[co] += g[co * hw + i];
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spectral convolution: real 2D DFT, retain the lowest m1 x m2 modes of the
// half spectrum (the conjugate-symmetric rows along the first axis are
// implied), mix channels with complex weights, zero the rest, inverse DFT.
// Implemented as separable partial transforms; only retained modes are ever
// computed. weights: [c_out, c_in, m1, m2, 2] with re/im last.
template <class S>
struct DftTables {
  // e^(-2*pi*i*k*j/n) for the retained k.
  std::vector<double> cos_w, sin_w;  // [modes][n]
  DftTables(std::size_t n, std::size_t modes) : cos_w(modes * n), sin_w(modes * n) {
    for (std::size_t k = 0; k < modes; ++k)
      for (std::size_t j = 0; j < n; ++j) {
        const double a = kTwoPi * double(k) * double(j) / double(n);
        cos_w[k * n + j] = std::cos(a);
        sin_w[k * n + j] = std::sin(a);
      }
  }
};

// Partial forward DFT of one channel: X[k1,k2] for k1<m1, k2<m2.
template <class S>
void partial_dft2(const S* x, std::size_t hgt, std::size_t wid, std::size_t m1, std::size_t m2,
                  const DftTables<S>& th, const DftTables<S>& tw, double* xr, double* xi) {
  std::vector<double> pr(hgt * m2), pi(hgt * m2);
  for (std::size_t h = 0; h < hgt; ++h)
    for (std::size_t k2 = 0; k2 < m2; ++k2) {
      double ar = 0, ai = 0;
      const double* cw = tw.cos_w.data() + k2 * wid;
      const double* sw = tw.sin_w.data() + k2 * wid;
      const S* row = x + h * wid;
      for (std::size_t w = 0; w < wid; ++w) {
        ar += double(row[w]) * cw[w];
        ai -= double(row[w]) * sw[w];
      }
      pr[h * m2 + k2] = ar;
      pi[h * m2 + k2] = ai;
    }
  for (std::size_t k1 = 0; k1 < m1; ++k1)
    for (std::size_t k2 = 0; k2 < m2; ++k2) {
      double ar = 0, ai = 0;
      const double* ch = th.cos_w.data() + k1 * hgt;
      const double* sh = th.sin_w.data() + k1 * hgt;
      for (std::size_t h = 0; h < hgt; ++h) {
        const double vr = pr[h * m2 + k2], vi = pi[h * m2 + k2];
        ar += vr * ch[h] + vi * sh[h];
        ai += vi * ch[h] - vr * sh[h];
      }
      xr[k1 * m2 + k2] = ar;
      xi[k1 * m2 + k2] = ai;
    }
}

// Packed inverse of a retained block: y[h,w] = sum c(k2) Re(V e^{i phi}),
// where c(k2) doubles the interior columns of the half spectrum.
template <class S>
void packed_inverse(const double* vr, const double* vi, std::size_t hgt, std::size_t wid,
                    std::size_t m1, std::size_t m2, const DftTables<S>& th, const DftTables<S>& tw,
                    S* y, bool accumulate) {
  const double inv = 1.0 / double(hgt * wid);
  std::vector<double> br(hgt * m2), bi(hgt * m2);
  for (std::size_t h = 0; h < hgt; ++h)
    for (std::size_t k2 = 0; k2 < m2; ++k2) {
      double ar = 0, ai = 0;
      const double* ch = th.cos_w.data();
      const double* sh = th.sin_w.data();
      for (std::size_t k1 = 0; k1 < m1; ++k1) {
        const double c = ch[k1 * hgt + h], s = sh[k1 * hgt + h];
        const double wr2 = vr[k1 * m2 + k2], wi2 = vi[k1 * m2 + k2];
        ar += wr2 * c - wi2 * s;  // e^{+i angle}
        ai += wr2 * s + wi2 * c;
      }
      const double cfac = (k2 == 0 || (wid % 2 == 0 && 2 * k2 == wid)) ? inv : 2.0 * inv;
      br[h * m2 + k2] = ar * cfac;
      bi[h * m2 + k2] = ai * cfac;
    }
  for (std::size_t h = 0; h < hgt; ++h)
    for (std::size_t w = 0; w < wid; ++w) {
      double acc = 0;
      for (std::size_t k2 = 0; k2 < m2; ++k2) {
        const double c = tw.cos_w[k2 * wid + w], s = tw.sin_w[k2 * wid + w];
        acc += br[h * m2 + k2] * c - bi[h * m2 + k2] * s;
      }
      if (accumulate)
        y[h * wid + w] += S(acc);
      else
        y[h * wid + w] = S(acc);
    }
}

template <class S>
Var<S> spectral_conv2d(Tape<S>& t, Var<S> x, Param<S>& weights) {
  if (x->value.rank() != 3)
    throw std::invalid_argument("spectral_conv2d: input must be [c, H, W]");
  if (weights.value.rank() != 5 || weights.value.dim(4) != 2)
    throw std::invalid_argument("spectral_conv2d: weights must be [c_out, c_in, m1, m2, 2]");
  const std::size_t cin = x->value.dim(0), hgt = x->value.dim(1), wid = x->value.dim(2);
  const std::size_t cout = weights.value.dim(0);
  const std::size_t m1 = weights.value.dim(2), m2 = weights.value.dim(3);
  if (weights.value.dim(1) != cin)
    throw std::invalid_argument("spectral_conv2d: weight c_in mismatch");
  if (m1 > hgt || m2 > wid / 2 + 1)
    throw std::invalid_argument("spectral_conv2d: mode counts exceed transform size (" +
                                std::to_string(m1) + "x" + std::to_string(m2) + " vs " +
                                std::to_string(hgt) + "x" + std::to_string(wid / 2 + 1) + ")");

  DftTables<S> th(hgt, m1), tw(wid, m2);
  const std::size_t mm = m1 * m2;
  std::vector<double> xr(cin * mm), xi(cin * mm), vr(cout * mm), vi(cout * mm);
  for (std::size_t ci = 0; ci < cin; ++ci)
    partial_dft2(x->value.ptr() + ci * hgt * wid, hgt, wid, m1, m2, th, tw, xr.data() + ci * mm,
                 xi.data() + ci * mm);

  const S* wp = weights.value.ptr();
  auto wre = [&](std::size_t co, std::size_t ci, std::size_t m) {
    return double(wp[((co * cin + ci) * mm + m) * 2]);
  };
  auto wim = [&](std::size_t co, std::size_t ci, std::size_t m) {
    return double(wp[((co * cin + ci) * mm + m) * 2 + 1]);
  };
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t ci = 0; ci < cin; ++ci)
      for (std::size_t m = 0; m < mm; ++m) {
        const double wr2 = wre(co, ci, m), wi2 = wim(co, ci, m);
        vr[co * mm + m] += wr2 * xr[ci * mm + m] - wi2 * xi[ci * mm + m];
        vi[co * mm + m] += wr2 * xi[ci * mm + m] + wi2 * xr[ci * mm + m];
      }

  Tensor<S> y({cout, hgt, wid});
  for (std::size_t co = 0; co < cout; ++co)
    packed_inverse(vr.data() + co * mm, vi.data() + co * mm, hgt, wid, m1, m2, th, tw,
                   y.ptr() + co * hgt * wid, false);

  Var<S> wn = t.leaf(weights);
  Var<S> out = t.make(std::move(y), x->needs_grad || wn->needs_grad);
  if (out->needs_grad) {
    out->backward = [x, wn, out, cin, cout, hgt, wid, m1, m2, mm, xr = std::move(xr),
                     xi = std::move(xi)]() {
      DftTables<S> th(hgt, m1), tw(wid, m2);
      const double inv = 1.0 / double(hgt * wid);
      // gV = packed-adjoint of the inverse: partial DFT of dy scaled by c(k2).
      std::vector<double> gvr(cout * mm), gvi(cout * mm);
      for (std::size_t co = 0; co < cout; ++co) {
        partial_dft2(out->grad.ptr() + co * hgt * wid, hgt, wid, m1, m2, th, tw,
                     gvr.data() + co * mm, gvi.data() + co * mm);
        for (std::size_t k1 = 0; k1 < m1; ++k1)
          for (std::size_t k2 = 0; k2 < m2; ++k2) {
            const double cfac = (k2 == 0 || (wid % 2 == 0 && 2 * k2 == wid)) ? inv : 2.0 * inv;
            gvr[co * mm + k1 * m2 + k2] *= cfac;
            gvi[co * mm + k1 * m2 + k2] *= cfac;
          }
      }
      if (wn->needs_grad) {
        S* gw = wn->ensure_grad().ptr();
        for (std::size_t co = 0; co < cout; ++co)
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t m = 0; m < mm; ++m) {
              gw[((co * cin + ci) * mm + m) * 2] +=
                  S(gvr[co * mm + m] * xr[ci * mm + m] + gvi[co * mm + m] * xi[ci * mm + m]);
              gw[((co * cin + ci) * mm + m) * 2 + 1] +=
                  S(-gvr[co * mm + m] * xi[ci * mm + m] + gvi[co * mm + m] * xr[ci * mm + m]);
            }
      }
      if (x->needs_grad) {
        // gX = conj(W) gV summed over c_out; then adjoint of the partial
        // forward DFT (an unscaled synthesis over retained modes).
        const S* wp = wn->value.ptr();
        std::vector<double> gxr(cin * mm), gxi(cin * mm);
        for (std::size_t co = 0; co < cout; ++co)
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t m = 0; m < mm; ++m) {
              const double wr2 = double(wp[((co * cin + ci) * mm + m) * 2]);
              const double wi2 = double(wp[((co * cin + ci) * mm + m) * 2 + 1]);
              gxr[ci * mm + m] += wr2 * gvr[co * mm + m] + wi2 * gvi[co * mm + m];
              gxi[ci * mm + m] += wr2 * gvi[co * mm + m] - wi2 * gvr[co * mm + m];
            }
        Tensor<S>& gx = x->ensure_grad();
        std::vector<double> br(hgt * m2), bi(hgt * m2);
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const double* vr = gxr.data() + ci * mm;
          const double* vi = gxi.data() + ci * mm;
          for (std::size_t h = 0; h < hgt; ++h)
            for (std::size_t k2 = 0; k2 < m2; ++k2) {
              double ar = 0, ai = 0;
              for (std::size_t k1 = 0; k1 < m1; ++k1) {
                const double c = th.cos_w[k1 * hgt + h], s = th.sin_w[k1 * hgt + h];
                ar += vr[k1 * m2 + k2] * c - vi[k1 * m2 + k2] * s;
                ai += vr[k1 * m2 + k2] * s + vi[k1 * m2 + k2] * c;
              }
              br[h * m2 + k2] = ar;
              bi[h * m2 + k2] = ai;
            }
          for (std::size_t h = 0; h < hgt; ++h)
            for (std::size_t w = 0; w < wid; ++w) {
              double acc = 0;
              for (std::size_t k2 = 0; k2 < m2; ++k2)
                acc += br[h * m2 + k2] * tw.cos_w[k2 * wid + w] -
                       bi[h * m2 + k2] * tw.sin_w[k2 * wid + w];
              gx.data[(ci * hgt + h) * wid + w] += S(acc);
            }
        }
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Non-overlapping p x p patches of an [H, W, C] grid flattened row-major to
// [n_tok, p*p*C]; token order is row-major over patches.
template <class S>
Var<S> gather_patches(Tape<S>& t, Var<S> x, std::size_t p) {
  if (x->value.rank() != 3)
    throw std::invalid_argument("gather_patches: input must be [H, W, C]");
  const std::size_t hgt = x->value.dim(0), wid = x->value.dim(1), c = x->value.dim(2);
  if (p == 0 || hgt % p != 0 || wid % p != 0)
    throw std::invalid_argument("gather_patches: patch size " + std::to_string(p) +
                                " does not divide grid " + shape_str(x->value.shape));
  const std::size_t by = hgt / p, bx = wid / p, tok = p * p * c;
  Tensor<S> y({by * bx, tok});
  for (std::size_t ty = 0; ty < by; ++ty)
    for (std::size_t tx = 0; tx < bx; ++tx) {
      S* dst = y.ptr() + (ty * bx + tx) * tok;
      for (std::size_t r = 0; r < p; ++r)
        for (std::size_t cc = 0; cc < p; ++cc)
          for (std::size_t ch = 0; ch < c; ++ch)
            *dst++ = x->value.at3(ty * p + r, tx * p + cc, ch);
    }
  Var<S> out = t.make(std::move(y), x->needs_grad);
  if (out->needs_grad) {
    out->backward = [x, out, p, by, bx, c, tok]() {
      Tensor<S>& gx = x->ensure_grad();
      for (std::size_t ty = 0; ty < by; ++ty)
        for (std::size_t tx = 0; tx < bx; ++tx) {
          const S* src = out->grad.ptr() + (ty * bx + tx) * tok;
          for (std::size_t r = 0; r < p; ++r)
            for (std::size_t cc = 0; cc < p; ++cc)
              for (std::size_t ch = 0; ch < c; ++ch)
                gx.at3(ty * p + r, tx * p + cc, ch) += *src++;
        }
    };
  }
  return out;
}

// Inverse layout of gather_patches for single-channel tokens [n_tok, p*p].
template <class S>
Var<S> scatter_patches(Tape<S>& t, Var<S> u, std::size_t p, std::size_t hgt, std::size_t wid) {
  if (u->value.rank() != 2 || u->value.dim(1) != p * p)
    throw std::invalid_argument("scatter_patches: tokens must be [n_tok, p*p]");
  const std::size_t by = hgt / p, bx = wid / p;
  if (p == 0 || hgt % p != 0 || wid % p != 0 || u->value.dim(0) != by * bx)
    throw std::invalid_argument("scatter_patches: token count " + std::to_string(u->value.dim(0)) +
                                " does not tile " + std::to_string(hgt) + "x" + std::to_string(wid));
  Tensor<S> y({hgt, wid});
  for (std::size_t ty = 0; ty < by; ++ty)
    for (std::size_t tx = 0; tx < bx; ++tx) {
      const S* src = u->value.ptr() + (ty * bx + tx) * p * p;
      for (std::size_t r = 0; r < p; ++r)
        for (std::size_t cc = 0; cc < p; ++cc) y.at2(ty * p + r, tx * p + cc) = *src++;
    }
  Var<S> out = t.make(std::move(y), u->needs_grad);
  if (out->needs_grad) {
    out->backward = [u, out, p, by, bx]() {
      Tensor<S>& gu = u->ensure_grad();
      for (std::size_t ty = 0; ty < by; ++ty)
        for (std::size_t tx = 0; tx < bx; ++tx) {
          S* dst = gu.ptr() + (ty * bx + tx) * p * p;
          for (std::size_t r = 0; r < p; ++r)
            for (std::size_t cc = 0; cc < p; ++cc) *dst++ += out->grad.at2(ty * p + r, tx * p + cc);
        }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
template <class S>
Var<S> loss_l1(Tape<S>& t, Var<S> pred, const Tensor<S>& target) {
  if (pred->value.shape != target.shape)
    throw std::invalid_argument("loss_l1: shape mismatch");
  const std::size_t n = target.size();
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += std::abs(double(pred->value[i]) - double(target[i]));
  Var<S> out = t.make(Tensor<S>::scalar(S(acc / double(n))), pred->needs_grad);
  if (out->needs_grad) {
    out->backward = [pred, out, target, n]() {
      const S g = out->grad[0] / S(double(n));
      S* gp = pred->ensure_grad().ptr();
      for (std::size_t i = 0; i < n; ++i) {
        const double d = double(pred->value[i]) - double(target[i]);
        gp[i] += d > 0 ? g : (d < 0 ? -g : S(0));
      }
    };
  }
  return out;
}

template <class S>
Var<S> loss_mse(Tape<S>& t, Var<S> pred, const Tensor<S>& target) {
  if (pred->value.shape != target.shape)
    throw std::invalid_argument("loss_mse: shape mismatch");
  const std::size_t n = target.size();
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = double(pred->value[i]) - double(target[i]);
    acc += d * d;
  }
  Var<S> out = t.make(Tensor<S>::scalar(S(acc / double(n))), pred->needs_grad);
  if (out->needs_grad) {
    out->backward = [pred, out, target, n]() {
      const S g = out->grad[0];
      S* gp = pred->ensure_grad().ptr();
      for (std::size_t i = 0; i < n; ++i)
        gp[i] += g * S(2.0 / double(n)) * (pred->value[i] - target[i]);
    };
  }
  return out;
}

// Scalar probe sum(x o w) for reducing any op output in gradient checks.
template <class S>
Var<S> dot_const(Tape<S>& t, Var<S> x, const Tensor<S>& w) {
  if (x->value.shape != w.shape) throw std::invalid_argument("dot_const: shape mismatch");
  double acc = 0;
  for (std::size_t i = 0; i < w.size(); ++i) acc += double(x->value[i]) * double(w[i]);
  Var<S> out = t.make(Tensor<S>::scalar(S(acc)), x->needs_grad);
  if (out->needs_grad) {
    out->backward = [x, out, w]() {
      const S g = out->grad[0];
      S* gx = x->ensure_grad().ptr();
      for (std::size_t i = 0; i < w.size(); ++i) gx[i] += g * w[i];
    };
  }
  return out;
}

}  // namespace bof::ops
