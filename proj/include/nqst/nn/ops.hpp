// Copyright 2026 The nqst Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "nqst/error.hpp"
#include "nqst/nn/graph.hpp"
#include "nqst/nn/tensor.hpp"

namespace nqst::nn {

/// Boundary handling of a convolution. Output site i reads inputs i - left + t, t = 0..K-1.
///   circular, open_same: left = (K-1)/2 (wrapped or zero padded)
///   causal:              left = K-1, inputs i-K+1..i
///   causal_shifted:      left = K,   inputs i-K..i-1 (site i never sees itself)
enum class Padding { circular, open_same, causal, causal_shifted };

inline int padding_left(Padding p, int kernel) {
  switch (p) {
    case Padding::circular:
    case Padding::open_same:
      return (kernel - 1) / 2;
    case Padding::causal:
      return kernel - 1;
    case Padding::causal_shifted:
      return kernel;
  }
  return 0;
}

inline const char* padding_name(Padding p) {
  switch (p) {
    case Padding::circular:
      return "circular";
    case Padding::open_same:
      return "open_same";
    case Padding::causal:
      return "causal";
    case Padding::causal_shifted:
      return "causal_shifted";
  }
  return "?";
}

namespace detail {

// Calls f(begin, end, offset) for each contiguous output range whose input index is i + offset.
template <class F>
void for_each_shift_range(std::size_t width, long shift, bool circular, F&& f) {
  const long W = static_cast<long>(width);
  if (circular) {
    const long sh = ((shift % W) + W) % W;
    if (W - sh > 0) f(0L, W - sh, sh);
    if (sh > 0) f(W - sh, W, sh - W);
  } else {
    const long b = std::max(0L, -shift), e = std::min(W, W - shift);
    if (e > b) f(b, e, shift);
  }
}

inline void check(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace detail

/// 1D convolution: x[B, C_in, W], kernel[C_out, C_in, K], bias[C_out] -> [B, C_out, W].
inline Var conv1d(Graph& g, Var x, Var kernel, Var bias, Padding pad) {
  const Tensor& X = g.value(x);
  const Tensor& Kt = g.value(kernel);
  const Tensor& Bt = g.value(bias);
  detail::check(X.rank() == 3 && Kt.rank() == 3 && Bt.rank() == 1, "conv1d expects x[B,C,W], kernel[O,C,K], bias[O]");
  const std::size_t B = X.dim(0), Ci = X.dim(1), W = X.dim(2), Co = Kt.dim(0), K = Kt.dim(2);
  detail::check(Kt.dim(1) == Ci && Bt.dim(0) == Co,
                "conv1d shape mismatch: x " + shape_string(X.shape()) + ", kernel " + shape_string(Kt.shape()) +
                    ", bias " + shape_string(Bt.shape()));
  const bool circ = pad == Padding::circular;
  detail::check(!circ || K <= W, "circular conv1d needs kernel <= width");
  const long left = padding_left(pad, static_cast<int>(K));

  Tensor Y({B, Co, W});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < Co; ++o) {
      double* y = Y.data() + (b * Co + o) * W;
      std::fill(y, y + W, Bt[o]);
      for (std::size_t c = 0; c < Ci; ++c) {
        const double* xr = X.data() + (b * Ci + c) * W;
        for (std::size_t t = 0; t < K; ++t) {
          const double w = Kt[(o * Ci + c) * K + t];
          detail::for_each_shift_range(W, static_cast<long>(t) - left, circ, [&](long i0, long i1, long off) {
            for (long i = i0; i < i1; ++i) y[i] += w * xr[i + off];
          });
        }
      }
    }

  return g.record(std::move(Y), {x, kernel, bias},
                  [=](Graph& g, Var, const Tensor& dY) {
                    const Tensor& X = g.value(x);
                    const Tensor& Kt = g.value(kernel);
                    Tensor* dX = g.requires_grad(x) ? &g.grad_slot(x) : nullptr;
                    Tensor* dK = g.requires_grad(kernel) ? &g.grad_slot(kernel) : nullptr;
                    Tensor* dB = g.requires_grad(bias) ? &g.grad_slot(bias) : nullptr;
                    for (std::size_t b = 0; b < B; ++b)
                      for (std::size_t o = 0; o < Co; ++o) {
                        const double* dy = dY.data() + (b * Co + o) * W;
                        if (dB)
                          for (std::size_t i = 0; i < W; ++i) (*dB)[o] += dy[i];
                        for (std::size_t c = 0; c < Ci; ++c) {
                          const double* xr = X.data() + (b * Ci + c) * W;
                          double* dxr = dX ? dX->data() + (b * Ci + c) * W : nullptr;
                          for (std::size_t t = 0; t < K; ++t) {
                            const std::size_t kidx = (o * Ci + c) * K + t;
                            const double w = Kt[kidx];
                            double acc = 0.0;
                            detail::for_each_shift_range(
                                W, static_cast<long>(t) - left, circ, [&](long i0, long i1, long off) {
                                  for (long i = i0; i < i1; ++i) {
                                    acc += dy[i] * xr[i + off];
                                    if (dxr) dxr[i + off] += w * dy[i];
                                  }
                                });
                            if (dK) (*dK)[kidx] += acc;
                          }
                        }
                      }
                  },
                  "conv1d");
}

/// 2D convolution: x[B, C_in, H, W], kernel[C_out, C_in, K, K], bias[C_out] -> [B, C_out, H, W].
inline Var conv2d(Graph& g, Var x, Var kernel, Var bias, Padding pad) {
  const Tensor& X = g.value(x);
  const Tensor& Kt = g.value(kernel);
  const Tensor& Bt = g.value(bias);
  detail::check(X.rank() == 4 && Kt.rank() == 4 && Bt.rank() == 1,
                "conv2d expects x[B,C,H,W], kernel[O,C,K,K], bias[O]");
  detail::check(pad == Padding::circular || pad == Padding::open_same, "conv2d supports circular and open_same only");
  const std::size_t B = X.dim(0), Ci = X.dim(1), H = X.dim(2), W = X.dim(3), Co = Kt.dim(0), K = Kt.dim(2);
  detail::check(Kt.dim(1) == Ci && Kt.dim(3) == K && Bt.dim(0) == Co,
                "conv2d shape mismatch: x " + shape_string(X.shape()) + ", kernel " + shape_string(Kt.shape()));
  const bool circ = pad == Padding::circular;
  detail::check(!circ || (K <= H && K <= W), "circular conv2d needs kernel <= side length");
  const long left = padding_left(pad, static_cast<int>(K));
  const std::size_t HW = H * W;

  // Visits every (output row, input row) pair for kernel row ty, then every column range for tx.
  auto sweep = [=](std::size_t ty, std::size_t tx, auto&& body) {
    detail::for_each_shift_range(H, static_cast<long>(ty) - left, circ, [&](long r0, long r1, long roff) {
      for (long r = r0; r < r1; ++r)
        detail::for_each_shift_range(W, static_cast<long>(tx) - left, circ, [&](long c0, long c1, long coff) {
          body(static_cast<std::size_t>(r) * W, static_cast<std::size_t>(r + roff) * W, c0, c1, coff);
        });
    });
  };

  Tensor Y({B, Co, H, W});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < Co; ++o) {
      double* y = Y.data() + (b * Co + o) * HW;
      std::fill(y, y + HW, Bt[o]);
      for (std::size_t c = 0; c < Ci; ++c) {
        const double* xp = X.data() + (b * Ci + c) * HW;
        for (std::size_t ty = 0; ty < K; ++ty)
          for (std::size_t tx = 0; tx < K; ++tx) {
            const double w = Kt[((o * Ci + c) * K + ty) * K + tx];
            sweep(ty, tx, [&](std::size_t yrow, std::size_t xrow, long c0, long c1, long coff) {
              for (long j = c0; j < c1; ++j) y[yrow + j] += w * xp[xrow + j + coff];
            });
          }
      }
    }

  return g.record(std::move(Y), {x, kernel, bias},
                  [=](Graph& g, Var, const Tensor& dY) {
                    const Tensor& X = g.value(x);
                    const Tensor& Kt = g.value(kernel);
                    Tensor* dX = g.requires_grad(x) ? &g.grad_slot(x) : nullptr;
                    Tensor* dK = g.requires_grad(kernel) ? &g.grad_slot(kernel) : nullptr;
                    Tensor* dB = g.requires_grad(bias) ? &g.grad_slot(bias) : nullptr;
                    for (std::size_t b = 0; b < B; ++b)
                      for (std::size_t o = 0; o < Co; ++o) {
                        const double* dy = dY.data() + (b * Co + o) * HW;
                        if (dB)
                          for (std::size_t i = 0; i < HW; ++i) (*dB)[o] += dy[i];
                        for (std::size_t c = 0; c < Ci; ++c) {
                          const double* xp = X.data() + (b * Ci + c) * HW;
                          double* dxp = dX ? dX->data() + (b * Ci + c) * HW : nullptr;
                          for (std::size_t ty = 0; ty < K; ++ty)
                            for (std::size_t tx = 0; tx < K; ++tx) {
                              const std::size_t kidx = ((o * Ci + c) * K + ty) * K + tx;
                              const double w = Kt[kidx];
                              double acc = 0.0;
                              sweep(ty, tx, [&](std::size_t yrow, std::size_t xrow, long c0, long c1, long coff) {
                                for (long j = c0; j < c1; ++j) {
                                  acc += dy[yrow + j] * xp[xrow + j + coff];
                                  if (dxp) dxp[xrow + j + coff] += w * dy[yrow + j];
                                }
                              });
                              if (dK) (*dK)[kidx] += acc;
                            }
                        }
                      }
                  },
                  "conv2d");
}

/// Dense map: x[B, D], weight[O, D], bias[O] -> [B, O].
inline Var linear(Graph& g, Var x, Var weight, Var bias) {
  const Tensor& X = g.value(x);
  const Tensor& Wt = g.value(weight);
  const Tensor& Bt = g.value(bias);
  detail::check(X.rank() == 2 && Wt.rank() == 2 && Bt.rank() == 1 && Wt.dim(1) == X.dim(1) && Bt.dim(0) == Wt.dim(0),
                "linear shape mismatch: x " + shape_string(X.shape()) + ", weight " + shape_string(Wt.shape()));
  const std::size_t B = X.dim(0), D = X.dim(1), O = Wt.dim(0);
  Tensor Y({B, O});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < O; ++o) {
      double acc = Bt[o];
      for (std::size_t d = 0; d < D; ++d) acc += Wt[o * D + d] * X[b * D + d];
      Y[b * O + o] = acc;
    }
  return g.record(std::move(Y), {x, weight, bias},
                  [=](Graph& g, Var, const Tensor& dY) {
                    const Tensor& X = g.value(x);
                    const Tensor& Wt = g.value(weight);
                    Tensor* dX = g.requires_grad(x) ? &g.grad_slot(x) : nullptr;
                    Tensor* dW = g.requires_grad(weight) ? &g.grad_slot(weight) : nullptr;
                    Tensor* dB = g.requires_grad(bias) ? &g.grad_slot(bias) : nullptr;
                    for (std::size_t b = 0; b < B; ++b)
                      for (std::size_t o = 0; o < O; ++o) {
                        const double d = dY[b * O + o];
                        if (dB) (*dB)[o] += d;
                        for (std::size_t k = 0; k < D; ++k) {
                          if (dW) (*dW)[o * D + k] += d * X[b * D + k];
                          if (dX) (*dX)[b * D + k] += d * Wt[o * D + k];
                        }
                      }
                  },
                  "linear");
}

namespace detail {

template <class Fwd, class Deriv>
Var unary(Graph& g, Var x, Fwd f, Deriv df, const char* name) {
  const Tensor& X = g.value(x);
  Tensor Y(X.shape());
  for (std::size_t i = 0; i < X.size(); ++i) Y[i] = f(X[i]);
  return g.record(std::move(Y), {x},
                  [=](Graph& g, Var self, const Tensor& dY) {
                    const Tensor& X = g.value(x);
                    const Tensor& Y = g.value(self);
                    Tensor& dX = g.grad_slot(x);
                    for (std::size_t i = 0; i < X.size(); ++i) dX[i] += dY[i] * df(X[i], Y[i]);
                  },
                  name);
}

}  // namespace detail

inline Var tanh(Graph& g, Var x) {
  return detail::unary(
      g, x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; }, "tanh");
}

inline Var exp(Graph& g, Var x) {
  return detail::unary(
      g, x, [](double v) { return std::exp(v); }, [](double, double y) { return y; }, "exp");
}

inline Var log(Graph& g, Var x) {
  return detail::unary(
      g, x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; }, "log");
}

inline Var scale(Graph& g, Var x, double c) {
  return detail::unary(
      g, x, [c](double v) { return c * v; }, [c](double, double) { return c; }, "scale");
}

inline Var add_scalar(Graph& g, Var x, double c) {
  return detail::unary(
      g, x, [c](double v) { return v + c; }, [](double, double) { return 1.0; }, "add_scalar");
}

inline Var add(Graph& g, Var a, Var b) {
  const Tensor& A = g.value(a);
  const Tensor& Bv = g.value(b);
  A.check_same(Bv, "add");
  Tensor Y = A;
  Y += Bv;
  return g.record(std::move(Y), {a, b},
                  [=](Graph& g, Var, const Tensor& dY) {
                    if (g.requires_grad(a)) g.grad_slot(a) += dY;
                    if (g.requires_grad(b)) g.grad_slot(b) += dY;
                  },
                  "add");
}

inline Var mul(Graph& g, Var a, Var b) {
  const Tensor& A = g.value(a);
  const Tensor& Bv = g.value(b);
  A.check_same(Bv, "mul");
  Tensor Y(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) Y[i] = A[i] * Bv[i];
  return g.record(std::move(Y), {a, b},
                  [=](Graph& g, Var, const Tensor& dY) {
                    const Tensor& A = g.value(a);
                    const Tensor& Bv = g.value(b);
                    if (g.requires_grad(a)) {
                      Tensor& d = g.grad_slot(a);
                      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dY[i] * Bv[i];
                    }
                    if (g.requires_grad(b)) {
                      Tensor& d = g.grad_slot(b);
                      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dY[i] * A[i];
                    }
                  },
                  "mul");
}

inline Var sum(Graph& g, Var x) {
  const Tensor& X = g.value(x);
  double acc = 0.0;
  for (double v : X.values()) acc += v;
  return g.record(Tensor::scalar(acc), {x},
                  [=](Graph& g, Var, const Tensor& dY) {
                    Tensor& d = g.grad_slot(x);
                    for (std::size_t i = 0; i < d.size(); ++i) d[i] += dY[0];
                  },
                  "sum");
}

inline Var mean(Graph& g, Var x) {
  const std::size_t n = g.value(x).size();
  detail::check(n > 0, "mean of an empty tensor");
  return scale(g, sum(g, x), 1.0 / static_cast<double>(n));
}

/// Sums every axis but the first: [B, ...] -> [B].
inline Var sum_per_sample(Graph& g, Var x) {
  const Tensor& X = g.value(x);
  detail::check(X.rank() >= 1, "sum_per_sample needs a batch axis");
  const std::size_t B = X.dim(0), inner = B == 0 ? 0 : X.size() / B;
  Tensor Y({B});
  for (std::size_t b = 0; b < B; ++b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < inner; ++i) acc += X[b * inner + i];
    Y[b] = acc;
  }
  return g.record(std::move(Y), {x},
                  [=](Graph& g, Var, const Tensor& dY) {
                    Tensor& d = g.grad_slot(x);
                    for (std::size_t b = 0; b < B; ++b)
                      for (std::size_t i = 0; i < inner; ++i) d[b * inner + i] += dY[b];
                  },
                  "sum_per_sample");
}

/// log(sum(exp(x))) over all elements, evaluated stably.
inline Var logsumexp(Graph& g, Var x) {
  const Tensor& X = g.value(x);
  detail::check(X.size() > 0, "logsumexp of an empty tensor");
  const double m = *std::max_element(X.values().begin(), X.values().end());
  double acc = 0.0;
  for (double v : X.values()) acc += std::exp(v - m);
  return g.record(Tensor::scalar(m + std::log(acc)), {x},
                  [=](Graph& g, Var self, const Tensor& dY) {
                    const Tensor& X = g.value(x);
                    const double lse = g.value(self)[0];
                    Tensor& d = g.grad_slot(x);
                    for (std::size_t i = 0; i < d.size(); ++i) d[i] += dY[0] * std::exp(X[i] - lse);
                  },
                  "logsumexp");
}

namespace detail {
// For x[B, C, S...] returns (B, C, S) with S the product of the trailing axes.
inline std::array<std::size_t, 3> channel_layout(const Tensor& X, const char* op) {
  check(X.rank() >= 2, std::string(op) + " needs [B, C, ...]");
  const std::size_t B = X.dim(0), C = X.dim(1);
  return {B, C, (B * C == 0) ? 0 : X.size() / (B * C)};
}
}  // namespace detail

/// Softmax over the channel axis of x[B, C, S...].
inline Var log_softmax_channels(Graph& g, Var x) {
  const Tensor& X = g.value(x);
  const auto [B, C, S] = detail::channel_layout(X, "log_softmax_channels");
  Tensor Y(X.shape());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t s = 0; s < S; ++s) {
      const std::size_t base = b * C * S + s;
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < C; ++c) m = std::max(m, X[base + c * S]);
      double acc = 0.0;
      for (std::size_t c = 0; c < C; ++c) acc += std::exp(X[base + c * S] - m);
      const double lse = m + std::log(acc);
      for (std::size_t c = 0; c < C; ++c) Y[base + c * S] = X[base + c * S] - lse;
    }
  return g.record(std::move(Y), {x},
                  [=](Graph& g, Var self, const Tensor& dY) {
                    const Tensor& Y = g.value(self);
                    Tensor& d = g.grad_slot(x);
                    for (std::size_t b = 0; b < B; ++b)
                      for (std::size_t s = 0; s < S; ++s) {
                        const std::size_t base = b * C * S + s;
                        double tot = 0.0;
                        for (std::size_t c = 0; c < C; ++c) tot += dY[base + c * S];
                        for (std::size_t c = 0; c < C; ++c)
                          d[base + c * S] += dY[base + c * S] - std::exp(Y[base + c * S]) * tot;
                      }
                  },
                  "log_softmax_channels");
}

inline Var softmax_channels(Graph& g, Var x) { return exp(g, log_softmax_channels(g, x)); }

/// Selects one channel per (sample, site): x[B, C, S...] with index[b*S + s] -> [B, S...].
inline Var gather_channels(Graph& g, Var x, std::span<const std::uint8_t> index) {
  const Tensor& X = g.value(x);
  const auto [B, C, S] = detail::channel_layout(X, "gather_channels");
  detail::check(index.size() == B * S, "gather_channels index has wrong length");
  Shape out_shape = X.shape();
  out_shape.erase(out_shape.begin() + 1);
  Tensor Y(out_shape);
  std::vector<std::uint8_t> idx(index.begin(), index.end());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t s = 0; s < S; ++s) {
      const std::size_t c = idx[b * S + s];
      detail::check(c < C, "gather_channels index out of range");
      Y[b * S + s] = X[(b * C + c) * S + s];
    }
  return g.record(std::move(Y), {x},
                  [=, idx = std::move(idx)](Graph& g, Var, const Tensor& dY) {
                    Tensor& d = g.grad_slot(x);
                    for (std::size_t b = 0; b < B; ++b)
                      for (std::size_t s = 0; s < S; ++s) d[(b * C + idx[b * S + s]) * S + s] += dY[b * S + s];
                  },
                  "gather_channels");
}

inline Var reshape(Graph& g, Var x, Shape shape) {
  Tensor Y = g.value(x).reshaped(std::move(shape));
  return g.record(std::move(Y), {x},
                  [=](Graph& g, Var, const Tensor& dY) {
                    Tensor& d = g.grad_slot(x);
                    for (std::size_t i = 0; i < d.size(); ++i) d[i] += dY[i];
                  },
                  "reshape");
}

/// Records a value computed outside the graph from `inputs`. It has no derivative, so a
/// backward pass that needs to cross it fails.
inline Var opaque(Graph& g, Tensor value, std::initializer_list<Var> inputs, std::string_view name) {
  return g.record(std::move(value), inputs, nullptr, name);
}

/// One-hot encoding of outcome strings to x[B, n_outcomes, spatial...].
inline Tensor one_hot(std::span<const std::uint8_t> outcomes, std::size_t n_sites, const Shape& spatial,
                      std::size_t n_outcomes = 4) {
  detail::check(shape_size(spatial) == n_sites, "one_hot spatial shape does not match site count");
  detail::check(n_sites > 0 && outcomes.size() % n_sites == 0, "one_hot: ragged outcome batch");
  const std::size_t B = outcomes.size() / n_sites;
  Shape shape{B, n_outcomes};
  shape.insert(shape.end(), spatial.begin(), spatial.end());
  Tensor X(shape);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t s = 0; s < n_sites; ++s) {
      const std::size_t a = outcomes[b * n_sites + s];
      detail::check(a < n_outcomes, "one_hot: outcome label out of range");
      X[(b * n_outcomes + a) * n_sites + s] = 1.0;
    }
  return X;
}

inline std::vector<std::uint8_t> decode_one_hot(const Tensor& X) {
  const std::size_t B = X.dim(0), C = X.dim(1), S = X.size() / (B * C);
  std::vector<std::uint8_t> out(B * S);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t c = 0; c < C; ++c)
        if (X[(b * C + c) * S + s] == 1.0) out[b * S + s] = static_cast<std::uint8_t>(c);
  return out;
}

}  // namespace nqst::nn
