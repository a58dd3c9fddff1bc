#ifndef GLOM_OPS_HPP
#define GLOM_OPS_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "glom/error.hpp"
#include "glom/random.hpp"
#include "glom/tensor.hpp"

// Layer primitives as pure functions: forward plus an explicit backward for
// each differentiable op. The tape in autodiff.hpp wraps these; they are also
// usable (and tested) standalone. Convolution and dense go through Eigen GEMM
// (im2col route); everything else is plain loops. All floating-point
// reductions run in a fixed order so results do not depend on thread count.

namespace glom::ops {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

enum class Mode { train, eval };

inline int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

namespace detail {

// Gathers one sample's input windows into a (C*kh*kw) x (Ho*Wo) matrix.
inline void im2col(const double* x, int C, int H, int W, int kh, int kw,
                   int stride, int pad, int Ho, int Wo, double* cols) {
  const int L = Ho * Wo;
  for (int c = 0; c < C; ++c) {
    const double* xc = x + static_cast<std::size_t>(c) * H * W;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        double* row = cols + static_cast<std::size_t>((c * kh + ky) * kw + kx) * L;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          double* out = row + oy * Wo;
          if (iy < 0 || iy >= H) {
            std::fill(out, out + Wo, 0.0);
            continue;
          }
          const double* xrow = xc + static_cast<std::size_t>(iy) * W;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            out[ox] = (ix >= 0 && ix < W) ? xrow[ix] : 0.0;
          }
        }
      }
    }
  }
}

// Scatter-add of a cols-shaped gradient back onto the input image.
inline void col2im(const double* cols, int C, int H, int W, int kh, int kw,
                   int stride, int pad, int Ho, int Wo, double* dx) {
  const int L = Ho * Wo;
  for (int c = 0; c < C; ++c) {
    double* xc = dx + static_cast<std::size_t>(c) * H * W;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const double* row =
            cols + static_cast<std::size_t>((c * kh + ky) * kw + kx) * L;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) continue;
          double* xrow = xc + static_cast<std::size_t>(iy) * W;
          const double* in = row + oy * Wo;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < W) xrow[ix] += in[ox];
          }
        }
      }
    }
  }
}

inline void check_conv_args(const Tensor& x, const Tensor& w, int stride,
                            int pad) {
  if (x.rank() != 4)
    throw DimensionError("conv2d: input must be [N,C,H,W], got " + x.shape_str());
  if (w.rank() != 4)
    throw DimensionError("conv2d: kernels must be [F,C,kh,kw], got " + w.shape_str());
  if (x.dim(1) != w.dim(1))
    throw DimensionError("conv2d: channel axes disagree, input C=" +
                         std::to_string(x.dim(1)) + " vs kernel C=" +
                         std::to_string(w.dim(1)));
  if (stride < 1) throw ParameterError("conv2d: stride must be positive");
  if (pad < 0) throw ParameterError("conv2d: padding must be non-negative");
  if (w.dim(2) > x.dim(2) + 2 * pad || w.dim(3) > x.dim(3) + 2 * pad)
    throw DimensionError("conv2d: kernel " + std::to_string(w.dim(2)) + "x" +
                         std::to_string(w.dim(3)) + " exceeds padded input " +
                         std::to_string(x.dim(2) + 2 * pad) + "x" +
                         std::to_string(x.dim(3) + 2 * pad));
}

}  // namespace detail

// x: [N,C,H,W], w: [F,C,kh,kw]. Cross-correlation, zero padding.
inline Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int pad) {
  detail::check_conv_args(x, w, stride, pad);
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int F = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int Ho = conv_out_dim(H, kh, stride, pad);
  const int Wo = conv_out_dim(W, kw, stride, pad);
  const int K = C * kh * kw, L = Ho * Wo;

  Tensor y({N, F, Ho, Wo});
  CMapRM wmat(w.data(), F, K);
#pragma omp parallel
  {
    std::vector<double> cols(static_cast<std::size_t>(K) * L);
#pragma omp for schedule(static)
    for (int n = 0; n < N; ++n) {
      detail::im2col(x.data() + static_cast<std::size_t>(n) * C * H * W, C, H,
                     W, kh, kw, stride, pad, Ho, Wo, cols.data());
      MapRM yn(y.data() + static_cast<std::size_t>(n) * F * L, F, L);
      yn.noalias() = wmat * CMapRM(cols.data(), K, L);
    }
  }
  return y;
}

struct Conv2dGrads {
  Tensor dx, dw;
};

inline Conv2dGrads conv2d_backward(const Tensor& x, const Tensor& w,
                                   int stride, int pad, const Tensor& dy) {
  detail::check_conv_args(x, w, stride, pad);
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int F = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int Ho = conv_out_dim(H, kh, stride, pad);
  const int Wo = conv_out_dim(W, kw, stride, pad);
  const int K = C * kh * kw, L = Ho * Wo;
  if (dy.shape() != std::vector<int>{N, F, Ho, Wo})
    throw DimensionError("conv2d_backward: dy shape " + dy.shape_str() +
                         " does not match output");

  Conv2dGrads g{Tensor({N, C, H, W}), Tensor({F, C, kh, kw})};
  CMapRM wmat(w.data(), F, K);

  // dx: each sample independent, safe to parallelize.
#pragma omp parallel
  {
    std::vector<double> dcols(static_cast<std::size_t>(K) * L);
#pragma omp for schedule(static)
    for (int n = 0; n < N; ++n) {
      CMapRM dyn(dy.data() + static_cast<std::size_t>(n) * F * L, F, L);
      MapRM(dcols.data(), K, L).noalias() = wmat.transpose() * dyn;
      detail::col2im(dcols.data(), C, H, W, kh, kw, stride, pad, Ho, Wo,
                     g.dx.data() + static_cast<std::size_t>(n) * C * H * W);
    }
  }

  // dw: accumulated in sample order so the sum is thread-count independent.
  {
    std::vector<double> cols(static_cast<std::size_t>(K) * L);
    MapRM dwmat(g.dw.data(), F, K);
    for (int n = 0; n < N; ++n) {
      detail::im2col(x.data() + static_cast<std::size_t>(n) * C * H * W, C, H,
                     W, kh, kw, stride, pad, Ho, Wo, cols.data());
      CMapRM dyn(dy.data() + static_cast<std::size_t>(n) * F * L, F, L);
      dwmat.noalias() += dyn * CMapRM(cols.data(), K, L).transpose();
    }
  }
  return g;
}

struct MaxPoolResult {
  Tensor y;
  // Flat index into the input, one per output cell; first occurrence wins ties.
  std::vector<std::int32_t> argmax;
};

inline MaxPoolResult maxpool2d(const Tensor& x, int window, int stride) {
  if (x.rank() != 4)
    throw DimensionError("maxpool2d: input must be [N,C,H,W], got " + x.shape_str());
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (window > H || window > W)
    throw DimensionError("maxpool2d: window " + std::to_string(window) +
                         " exceeds spatial dims " + std::to_string(H) + "x" +
                         std::to_string(W));
  if (window < 1 || stride < 1)
    throw ParameterError("maxpool2d: window and stride must be positive");
  const int Ho = (H - window) / stride + 1;
  const int Wo = (W - window) / stride + 1;

  MaxPoolResult r{Tensor({N, C, Ho, Wo}),
                  std::vector<std::int32_t>(
                      static_cast<std::size_t>(N) * C * Ho * Wo)};
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const std::size_t plane = (static_cast<std::size_t>(n) * C + c) * H * W;
      for (int oy = 0; oy < Ho; ++oy) {
        for (int ox = 0; ox < Wo; ++ox) {
          double best = -std::numeric_limits<double>::infinity();
          std::int32_t best_at = 0;
          for (int ky = 0; ky < window; ++ky) {
            const int iy = oy * stride + ky;
            for (int kx = 0; kx < window; ++kx) {
              const int ix = ox * stride + kx;
              const std::size_t at = plane + static_cast<std::size_t>(iy) * W + ix;
              if (x[at] > best) {
                best = x[at];
                best_at = static_cast<std::int32_t>(at);
              }
            }
          }
          const std::size_t o =
              ((static_cast<std::size_t>(n) * C + c) * Ho + oy) * Wo + ox;
          r.y[o] = best;
          r.argmax[o] = best_at;
        }
      }
    }
  }
  return r;
}

inline Tensor maxpool2d_backward(const std::vector<int>& input_shape,
                                 const std::vector<std::int32_t>& argmax,
                                 const Tensor& dy) {
  Tensor dx(input_shape);
  for (std::size_t o = 0; o < dy.size(); ++o)
    dx[static_cast<std::size_t>(argmax[o])] += dy[o];
  return dx;
}

// Per-channel running statistics, updated in train mode.
struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;

  static BatchNormState identity(int channels) {
    BatchNormState s{Tensor({channels}), Tensor::full({channels}, 1.0)};
    return s;
  }
};

struct BatchNormResult {
  Tensor y;
  // Saved batch statistics (train) or running statistics (eval), [C] each.
  Tensor mean;
  Tensor invstd;
};

// x: [N,C,...]; normalizes over all axes but the channel axis.
inline BatchNormResult batchnorm(const Tensor& x, const Tensor& scale,
                                 const Tensor& shift, BatchNormState& state,
                                 Mode mode, double momentum = 0.99,
                                 double eps = 1e-5) {
  if (x.rank() < 2)
    throw DimensionError("batchnorm: input must be [N,C,...], got " + x.shape_str());
  const int N = x.dim(0), C = x.dim(1);
  if (scale.shape() != std::vector<int>{C} || shift.shape() != std::vector<int>{C})
    throw DimensionError("batchnorm: scale/shift must be [C]=[" +
                         std::to_string(C) + "]");
  if (mode == Mode::train && N < 2)
    throw DataError("batchnorm: degenerate batch, train mode needs N >= 2");

  std::size_t spatial = 1;
  for (int a = 2; a < x.rank(); ++a) spatial *= static_cast<std::size_t>(x.dim(a));
  const double m = static_cast<double>(N) * static_cast<double>(spatial);

  BatchNormResult r{Tensor(x.shape()), Tensor({C}), Tensor({C})};
  if (mode == Mode::train) {
    for (int c = 0; c < C; ++c) {
      double sum = 0.0, sq = 0.0;
      for (int n = 0; n < N; ++n) {
        const double* p = x.data() + (static_cast<std::size_t>(n) * C + c) * spatial;
        for (std::size_t s = 0; s < spatial; ++s) {
          sum += p[s];
          sq += p[s] * p[s];
        }
      }
      const double mean = sum / m;
      const double var = std::max(sq / m - mean * mean, 0.0);  // biased
      r.mean[c] = mean;
      r.invstd[c] = 1.0 / std::sqrt(var + eps);
      state.running_mean[c] = momentum * state.running_mean[c] + (1.0 - momentum) * mean;
      state.running_var[c] = momentum * state.running_var[c] + (1.0 - momentum) * var;
    }
  } else {
    for (int c = 0; c < C; ++c) {
      r.mean[c] = state.running_mean[c];
      r.invstd[c] = 1.0 / std::sqrt(state.running_var[c] + eps);
    }
  }
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const double* p = x.data() + (static_cast<std::size_t>(n) * C + c) * spatial;
      double* q = r.y.data() + (static_cast<std::size_t>(n) * C + c) * spatial;
      const double mu = r.mean[c], is = r.invstd[c];
      const double g = scale[static_cast<std::size_t>(c)];
      const double b = shift[static_cast<std::size_t>(c)];
      for (std::size_t s = 0; s < spatial; ++s) q[s] = (p[s] - mu) * is * g + b;
    }
  }
  return r;
}

struct BatchNormGrads {
  Tensor dx, dscale, dshift;
};

// Train-mode backward: the batch statistics depend on x, and that dependence
// is part of the gradient.
inline BatchNormGrads batchnorm_backward(const Tensor& x, const Tensor& scale,
                                         const Tensor& mean,
                                         const Tensor& invstd,
                                         const Tensor& dy) {
  const int N = x.dim(0), C = x.dim(1);
  std::size_t spatial = 1;
  for (int a = 2; a < x.rank(); ++a) spatial *= static_cast<std::size_t>(x.dim(a));
  const double m = static_cast<double>(N) * static_cast<double>(spatial);

  BatchNormGrads g{Tensor(x.shape()), Tensor({C}), Tensor({C})};
  for (int c = 0; c < C; ++c) {
    const double mu = mean[static_cast<std::size_t>(c)];
    const double is = invstd[static_cast<std::size_t>(c)];
    const double gamma = scale[static_cast<std::size_t>(c)];
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int n = 0; n < N; ++n) {
      const std::size_t base = (static_cast<std::size_t>(n) * C + c) * spatial;
      for (std::size_t s = 0; s < spatial; ++s) {
        const double xhat = (x[base + s] - mu) * is;
        sum_dy += dy[base + s];
        sum_dy_xhat += dy[base + s] * xhat;
      }
    }
    g.dshift[c] = sum_dy;
    g.dscale[c] = sum_dy_xhat;
    for (int n = 0; n < N; ++n) {
      const std::size_t base = (static_cast<std::size_t>(n) * C + c) * spatial;
      for (std::size_t s = 0; s < spatial; ++s) {
        const double xhat = (x[base + s] - mu) * is;
        g.dx[base + s] =
            gamma * is * (dy[base + s] - sum_dy / m - xhat * sum_dy_xhat / m);
      }
    }
  }
  return g;
}

// Eval-mode backward: running statistics are constants.
inline BatchNormGrads batchnorm_backward_eval(const Tensor& x,
                                              const Tensor& scale,
                                              const Tensor& mean,
                                              const Tensor& invstd,
                                              const Tensor& dy) {
  const int N = x.dim(0), C = x.dim(1);
  std::size_t spatial = 1;
  for (int a = 2; a < x.rank(); ++a) spatial *= static_cast<std::size_t>(x.dim(a));
  BatchNormGrads g{Tensor(x.shape()), Tensor({C}), Tensor({C})};
  for (int c = 0; c < C; ++c) {
    const double mu = mean[static_cast<std::size_t>(c)];
    const double is = invstd[static_cast<std::size_t>(c)];
    const double gamma = scale[static_cast<std::size_t>(c)];
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int n = 0; n < N; ++n) {
      const std::size_t base = (static_cast<std::size_t>(n) * C + c) * spatial;
      for (std::size_t s = 0; s < spatial; ++s) {
        const double xhat = (x[base + s] - mu) * is;
        sum_dy += dy[base + s];
        sum_dy_xhat += dy[base + s] * xhat;
        g.dx[base + s] = dy[base + s] * gamma * is;
      }
    }
    g.dshift[c] = sum_dy;
    g.dscale[c] = sum_dy_xhat;
  }
  return g;
}

inline Tensor relu(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

inline Tensor relu_backward(const Tensor& x, const Tensor& dy) {
  Tensor dx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
  return dx;
}

inline Tensor sigmoid(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
  return y;
}

// Takes the forward output, not the input: s' = s(1-s).
inline Tensor sigmoid_backward(const Tensor& y, const Tensor& dy) {
  Tensor dx(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] = dy[i] * y[i] * (1.0 - y[i]);
  return dx;
}

// x: [N,D], w: [K,D], b: [K] -> y[N,K] = x w^T + b.
inline Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() != 2 || w.rank() != 2)
    throw DimensionError("dense: need x=[N,D], w=[K,D]; got " + x.shape_str() +
                         " and " + w.shape_str());
  if (x.dim(1) != w.dim(1))
    throw DimensionError("dense: inner dimensions disagree, x D=" +
                         std::to_string(x.dim(1)) + " vs w D=" +
                         std::to_string(w.dim(1)));
  if (b.shape() != std::vector<int>{w.dim(0)})
    throw DimensionError("dense: bias must be [K]=[" + std::to_string(w.dim(0)) + "]");
  const int N = x.dim(0), D = x.dim(1), K = w.dim(0);
  Tensor y({N, K});
  MapRM ym(y.data(), N, K);
  ym.noalias() = CMapRM(x.data(), N, D) * CMapRM(w.data(), K, D).transpose();
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k) y.at(n, k) += b[static_cast<std::size_t>(k)];
  return y;
}

struct DenseGrads {
  Tensor dx, dw, db;
};

inline DenseGrads dense_backward(const Tensor& x, const Tensor& w,
                                 const Tensor& dy) {
  const int N = x.dim(0), D = x.dim(1), K = w.dim(0);
  DenseGrads g{Tensor({N, D}), Tensor({K, D}), Tensor({K})};
  MapRM(g.dx.data(), N, D).noalias() =
      CMapRM(dy.data(), N, K) * CMapRM(w.data(), K, D);
  MapRM(g.dw.data(), K, D).noalias() =
      CMapRM(dy.data(), N, K).transpose() * CMapRM(x.data(), N, D);
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k) g.db[static_cast<std::size_t>(k)] += dy.at(n, k);
  return g;
}

struct DropoutResult {
  Tensor y;
  std::vector<std::uint8_t> keep;  // empty in eval mode / p == 0
};

// Inverted scaling: survivors are multiplied by 1/(1-p), eval is identity.
inline DropoutResult dropout(const Tensor& x, double p, Mode mode,
                             std::uint64_t seed) {
  if (p < 0.0 || p >= 1.0)
    throw ParameterError("dropout: rate must be in [0,1), got " + std::to_string(p));
  if (mode == Mode::eval || p == 0.0) return {x, {}};
  DropoutResult r{Tensor(x.shape()), std::vector<std::uint8_t>(x.size())};
  Rng rng(seed);
  const double inv_keep = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool keep = rng.uniform() >= p;
    r.keep[i] = keep ? 1 : 0;
    r.y[i] = keep ? x[i] * inv_keep : 0.0;
  }
  return r;
}

inline Tensor dropout_backward(const std::vector<int>& shape,
                               const std::vector<std::uint8_t>& keep, double p,
                               const Tensor& dy) {
  if (keep.empty()) return dy;  // identity path
  Tensor dx(shape);
  const double inv_keep = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < dy.size(); ++i)
    dx[i] = keep[i] ? dy[i] * inv_keep : 0.0;
  return dx;
}

// Row-wise softmax with max subtraction. x: [N,K].
inline Tensor softmax(const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) < 2)
    throw DimensionError("softmax: input must be [N,K] with K >= 2, got " +
                         x.shape_str());
  const int N = x.dim(0), K = x.dim(1);
  Tensor y({N, K});
  for (int n = 0; n < N; ++n) {
    double mx = x.at(n, 0);
    for (int k = 1; k < K; ++k) mx = std::max(mx, x.at(n, k));
    double sum = 0.0;
    for (int k = 0; k < K; ++k) {
      const double e = std::exp(x.at(n, k) - mx);
      y.at(n, k) = e;
      sum += e;
    }
    for (int k = 0; k < K; ++k) y.at(n, k) /= sum;
  }
  return y;
}

inline Tensor softmax_backward(const Tensor& y, const Tensor& dy) {
  const int N = y.dim(0), K = y.dim(1);
  Tensor dx({N, K});
  for (int n = 0; n < N; ++n) {
    double dot = 0.0;
    for (int k = 0; k < K; ++k) dot += dy.at(n, k) * y.at(n, k);
    for (int k = 0; k < K; ++k) dx.at(n, k) = y.at(n, k) * (dy.at(n, k) - dot);
  }
  return dx;
}

inline constexpr double kProbFloor = 1e-12;

// Mean negative log-likelihood. probs rows must sum to 1 (checked loosely);
// zero probability at the true label is clamped to kProbFloor. clamp_events,
// when given, counts how often the floor fired.
inline double cross_entropy(const Tensor& probs, const std::vector<int>& labels,
                            long* clamp_events = nullptr) {
  if (probs.rank() != 2)
    throw DimensionError("cross_entropy: probs must be [N,K], got " + probs.shape_str());
  const int N = probs.dim(0), K = probs.dim(1);
  if (static_cast<int>(labels.size()) != N)
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(N) + " rows");
  double loss = 0.0;
  for (int n = 0; n < N; ++n) {
    double row = 0.0;
    for (int k = 0; k < K; ++k) row += probs.at(n, k);
    if (std::abs(row - 1.0) > 1e-6)
      throw ParameterError("cross_entropy: row " + std::to_string(n) +
                           " sums to " + std::to_string(row));
    const int l = labels[static_cast<std::size_t>(n)];
    if (l < 0 || l >= K)
      throw DataError("cross_entropy: label " + std::to_string(l) +
                      " outside [0," + std::to_string(K) + ")");
    double p = probs.at(n, l);
    if (p < kProbFloor) {
      p = kProbFloor;
      if (clamp_events) ++*clamp_events;
    }
    loss -= std::log(p);
  }
  return loss / static_cast<double>(N);
}

inline Tensor cross_entropy_backward(const Tensor& probs,
                                     const std::vector<int>& labels) {
  const int N = probs.dim(0);
  Tensor dp(probs.shape());
  for (int n = 0; n < N; ++n) {
    const int l = labels[static_cast<std::size_t>(n)];
    const double p = std::max(probs.at(n, l), kProbFloor);
    dp.at(n, l) = -1.0 / (p * static_cast<double>(N));
  }
  return dp;
}

// [N,C,H,W] -> [N,C] per-channel spatial mean.
inline Tensor global_avg_pool(const Tensor& x) {
  if (x.rank() != 4)
    throw DimensionError("global_avg_pool: input must be [N,C,H,W], got " +
                         x.shape_str());
  const int N = x.dim(0), C = x.dim(1);
  const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor y({N, C});
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const double* p = x.data() + (static_cast<std::size_t>(n) * C + c) * hw;
      double sum = 0.0;
      for (std::size_t s = 0; s < hw; ++s) sum += p[s];
      y.at(n, c) = sum / static_cast<double>(hw);
    }
  }
  return y;
}

inline Tensor global_avg_pool_backward(const std::vector<int>& input_shape,
                                       const Tensor& dy) {
  Tensor dx(input_shape);
  const int N = input_shape[0], C = input_shape[1];
  const std::size_t hw =
      static_cast<std::size_t>(input_shape[2]) * input_shape[3];
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      double* p = dx.data() + (static_cast<std::size_t>(n) * C + c) * hw;
      const double g = dy.at(n, c) / static_cast<double>(hw);
      for (std::size_t s = 0; s < hw; ++s) p[s] = g;
    }
  }
  return dx;
}

// [N,1] sigmoid output s -> [N,2] probability rows (1-s, s). Lets the
// single-logit sigmoid head share the softmax heads' probability contract.
inline Tensor two_class_probs(const Tensor& s) {
  if (s.rank() != 2 || s.dim(1) != 1)
    throw DimensionError("two_class_probs: input must be [N,1], got " + s.shape_str());
  const int N = s.dim(0);
  Tensor y({N, 2});
  for (int n = 0; n < N; ++n) {
    y.at(n, 0) = 1.0 - s.at(n, 0);
    y.at(n, 1) = s.at(n, 0);
  }
  return y;
}

inline Tensor two_class_probs_backward(const Tensor& dy) {
  const int N = dy.dim(0);
  Tensor ds({N, 1});
  for (int n = 0; n < N; ++n) ds.at(n, 0) = dy.at(n, 1) - dy.at(n, 0);
  return ds;
}

}  // namespace glom::ops

#endif  // GLOM_OPS_HPP
