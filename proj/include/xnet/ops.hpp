#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include "tensor.hpp"

namespace xnet {

// Matrix product, row-major, accumulation strictly in increasing-k order for
// every output element so two evaluations are bit-identical.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul: operands must be rank 2");
    if (a.extent(1) != b.extent(0))
        throw ShapeError("matmul: inner extents differ " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
    Tensor<T> c({m, n}, T(0));
    const T* ap = a.data();
    const T* bp = b.data();
    T* cp = c.data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const T av = ap[i * k + p];
            const T* brow = bp + p * n;
            T* crow = cp + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

template <typename T>
Tensor<T> transpose2(const Tensor<T>& a) {
    if (a.rank() != 2) throw ShapeError("transpose2: rank 2 expected");
    const std::size_t m = a.extent(0), n = a.extent(1);
    Tensor<T> t({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) t[j * m + i] = a[i * n + j];
    return t;
}

struct ConvGeometry {
    std::size_t in_ch, out_ch, kh, kw, stride, pad, groups;
    std::size_t out_extent(std::size_t in) const {
        std::size_t padded = in + 2 * pad;
        if (padded < kh) throw ShapeError("conv2d: kernel larger than padded input");
        return (padded - kh) / stride + 1;
    }
};

namespace detail {

// im2col over one sample and one channel group: output is
// (cg*kh*kw) x (oh*ow), matching the weight slice laid out as
// out_g x (cg*kh*kw).
template <typename T>
void im2col(const Tensor<T>& x, std::size_t n, std::size_t c0, std::size_t cg,
            std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad,
            std::size_t oh, std::size_t ow, T* col) {
    const std::size_t h = x.extent(2), w = x.extent(3);
    const std::size_t cols = oh * ow;
    for (std::size_t c = 0; c < cg; ++c) {
        for (std::size_t ki = 0; ki < kh; ++ki) {
            for (std::size_t kj = 0; kj < kw; ++kj) {
                T* dst = col + ((c * kh + ki) * kw + kj) * cols;
                for (std::size_t oi = 0; oi < oh; ++oi) {
                    const std::ptrdiff_t si = static_cast<std::ptrdiff_t>(oi * stride + ki) -
                                              static_cast<std::ptrdiff_t>(pad);
                    for (std::size_t oj = 0; oj < ow; ++oj) {
                        const std::ptrdiff_t sj = static_cast<std::ptrdiff_t>(oj * stride + kj) -
                                                  static_cast<std::ptrdiff_t>(pad);
                        T v = T(0);
                        if (si >= 0 && si < static_cast<std::ptrdiff_t>(h) && sj >= 0 &&
                            sj < static_cast<std::ptrdiff_t>(w))
                            v = x.at4(n, c0 + c, static_cast<std::size_t>(si), static_cast<std::size_t>(sj));
                        dst[oi * ow + oj] = v;
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* col, std::size_t n, std::size_t c0, std::size_t cg,
                std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad,
                std::size_t oh, std::size_t ow, Tensor<T>& dx) {
    const std::size_t h = dx.extent(2), w = dx.extent(3);
    const std::size_t cols = oh * ow;
    for (std::size_t c = 0; c < cg; ++c) {
        for (std::size_t ki = 0; ki < kh; ++ki) {
            for (std::size_t kj = 0; kj < kw; ++kj) {
                const T* src = col + ((c * kh + ki) * kw + kj) * cols;
                for (std::size_t oi = 0; oi < oh; ++oi) {
                    const std::ptrdiff_t si = static_cast<std::ptrdiff_t>(oi * stride + ki) -
                                              static_cast<std::ptrdiff_t>(pad);
                    if (si < 0 || si >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t oj = 0; oj < ow; ++oj) {
                        const std::ptrdiff_t sj = static_cast<std::ptrdiff_t>(oj * stride + kj) -
                                                  static_cast<std::ptrdiff_t>(pad);
                        if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(w)) continue;
                        dx.at4(n, c0 + c, static_cast<std::size_t>(si), static_cast<std::size_t>(sj)) +=
                            src[oi * ow + oj];
                    }
                }
            }
        }
    }
}

}  // namespace detail

// Grouped 2-D convolution, cross-correlation convention (no kernel flip),
// symmetric zero padding. weight: out_ch x (in_ch/groups) x kh x kw.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>* bias,
                         std::size_t stride, std::size_t pad, std::size_t groups) {
    if (x.rank() != 4 || weight.rank() != 4) throw ShapeError("conv2d: rank-4 tensors expected");
    const std::size_t in_ch = x.extent(1);
    const std::size_t out_ch = weight.extent(0);
    const std::size_t kh = weight.extent(2), kw = weight.extent(3);
    if (in_ch % groups != 0 || out_ch % groups != 0)
        throw ShapeError("conv2d: channels not divisible by groups");
    if (weight.extent(1) != in_ch / groups)
        throw ShapeError("conv2d: weight in-channel extent mismatch");
    ConvGeometry geo{in_ch, out_ch, kh, kw, stride, pad, groups};
    const std::size_t oh = geo.out_extent(x.extent(2));
    ConvGeometry geow{in_ch, out_ch, kw, kw, stride, pad, groups};
    const std::size_t ow = geow.out_extent(x.extent(3));
    if (oh == 0 || ow == 0) throw ShapeError("conv2d: non-positive output extent");

    const std::size_t batch = x.extent(0);
    const std::size_t cg = in_ch / groups, og = out_ch / groups;
    Tensor<T> y({batch, out_ch, oh, ow});
    const std::size_t cols = oh * ow;
    std::vector<T> col(cg * kh * kw * cols);
    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t g = 0; g < groups; ++g) {
            detail::im2col(x, n, g * cg, cg, kh, kw, stride, pad, oh, ow, col.data());
            // y[og x cols] = W[og x (cg*kh*kw)] * col
            const T* wp = weight.data() + g * og * cg * kh * kw;
            const std::size_t kk = cg * kh * kw;
            for (std::size_t o = 0; o < og; ++o) {
                T* yrow = &y.at4(n, g * og + o, 0, 0);
                const T b = bias ? (*bias)[g * og + o] : T(0);
                for (std::size_t j = 0; j < cols; ++j) yrow[j] = b;
                for (std::size_t p = 0; p < kk; ++p) {
                    const T wv = wp[o * kk + p];
                    const T* crow = col.data() + p * cols;
                    for (std::size_t j = 0; j < cols; ++j) yrow[j] += wv * crow[j];
                }
            }
        }
    }
    return y;
}

template <typename T>
struct ConvGrads {
    Tensor<T> dx, dweight;
    std::optional<Tensor<T>> dbias;
};

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight, bool has_bias,
                             std::size_t stride, std::size_t pad, std::size_t groups,
                             const Tensor<T>& dy) {
    const std::size_t batch = x.extent(0);
    const std::size_t in_ch = x.extent(1), out_ch = weight.extent(0);
    const std::size_t kh = weight.extent(2), kw = weight.extent(3);
    const std::size_t oh = dy.extent(2), ow = dy.extent(3);
    const std::size_t cg = in_ch / groups, og = out_ch / groups;
    const std::size_t kk = cg * kh * kw;
    const std::size_t cols = oh * ow;

    ConvGrads<T> g;
    g.dx = Tensor<T>(x.shape(), T(0));
    g.dweight = Tensor<T>(weight.shape(), T(0));
    if (has_bias) g.dbias = Tensor<T>({out_ch}, T(0));

    std::vector<T> col(kk * cols);
    std::vector<T> dcol(kk * cols);
    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t gr = 0; gr < groups; ++gr) {
            detail::im2col(x, n, gr * cg, cg, kh, kw, stride, pad, oh, ow, col.data());
            const T* wp = weight.data() + gr * og * kk;
            T* dwp = g.dweight.data() + gr * og * kk;
            std::fill(dcol.begin(), dcol.end(), T(0));
            for (std::size_t o = 0; o < og; ++o) {
                const T* dyrow = &dy.at4(n, gr * og + o, 0, 0);
                if (has_bias) {
                    T s = T(0);
                    for (std::size_t j = 0; j < cols; ++j) s += dyrow[j];
                    (*g.dbias)[gr * og + o] += s;
                }
                for (std::size_t p = 0; p < kk; ++p) {
                    const T* crow = col.data() + p * cols;
                    T* dcrow = dcol.data() + p * cols;
                    const T wv = wp[o * kk + p];
                    T dw = T(0);
                    for (std::size_t j = 0; j < cols; ++j) {
                        dw += dyrow[j] * crow[j];
                        dcrow[j] += wv * dyrow[j];
                    }
                    dwp[o * kk + p] += dw;
                }
            }
            detail::col2im_add(dcol.data(), n, gr * cg, cg, kh, kw, stride, pad, oh, ow, g.dx);
        }
    }
    return g;
}

// ---- activations ----

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
    return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& dy) {
    Tensor<T> dx(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) dx[i] = x[i] > T(0) ? dy[i] : T(0);
    return dx;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) y[i] = T(1) / (T(1) + std::exp(-x[i]));
    return y;
}

// dy * s * (1 - s), s = forward output
template <typename T>
Tensor<T> sigmoid_backward_from_y(const Tensor<T>& y, const Tensor<T>& dy) {
    Tensor<T> dx(y.shape());
    for (std::size_t i = 0; i < y.numel(); ++i) dx[i] = dy[i] * y[i] * (T(1) - y[i]);
    return dx;
}

template <typename T>
Tensor<T> tanh_act(const Tensor<T>& x) {
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) y[i] = std::tanh(x[i]);
    return y;
}

template <typename T>
Tensor<T> tanh_backward_from_y(const Tensor<T>& y, const Tensor<T>& dy) {
    Tensor<T> dx(y.shape());
    for (std::size_t i = 0; i < y.numel(); ++i) dx[i] = dy[i] * (T(1) - y[i] * y[i]);
    return dx;
}

// ---- pooling ----

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
    if (x.rank() != 4) throw ShapeError("global_avg_pool: rank-4 input expected");
    const std::size_t n = x.extent(0), c = x.extent(1), hw = x.extent(2) * x.extent(3);
    Tensor<T> y({n, c});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j) {
            const T* p = &x.at4(i, j, 0, 0);
            T s = T(0);
            for (std::size_t k = 0; k < hw; ++k) s += p[k];
            y.at2(i, j) = s / static_cast<T>(hw);
        }
    return y;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const Shape& in_shape, const Tensor<T>& dy) {
    Tensor<T> dx(in_shape);
    const std::size_t hw = in_shape[2] * in_shape[3];
    const T scale = T(1) / static_cast<T>(hw);
    for (std::size_t i = 0; i < in_shape[0]; ++i)
        for (std::size_t j = 0; j < in_shape[1]; ++j) {
            T* p = &dx.at4(i, j, 0, 0);
            const T g = dy.at2(i, j) * scale;
            for (std::size_t k = 0; k < hw; ++k) p[k] = g;
        }
    return dx;
}

// ---- fully connected ----

// y = x * W^T + b, W: out x in
template <typename T>
Tensor<T> fc_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    if (x.rank() != 2 || w.rank() != 2) throw ShapeError("fc: rank-2 tensors expected");
    if (x.extent(1) != w.extent(1))
        throw ShapeError("fc: input width " + std::to_string(x.extent(1)) + " != weight in " +
                         std::to_string(w.extent(1)));
    Tensor<T> y = matmul(x, transpose2(w));
    const std::size_t n = y.extent(0), out = y.extent(1);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < out; ++j) y.at2(i, j) += b[j];
    return y;
}

template <typename T>
struct FcGrads {
    Tensor<T> dx, dw, db;
};

template <typename T>
FcGrads<T> fc_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy) {
    FcGrads<T> g;
    g.dx = matmul(dy, w);
    g.dw = matmul(transpose2(dy), x);
    g.db = Tensor<T>({w.extent(0)}, T(0));
    for (std::size_t i = 0; i < dy.extent(0); ++i)
        for (std::size_t j = 0; j < dy.extent(1); ++j) g.db[j] += dy.at2(i, j);
    return g;
}

// ---- batch normalization ----

template <typename T>
struct BatchNormCache {
    Tensor<T> xhat;
    std::vector<T> mean, inv_std;
    bool training = false;
};

// Per-channel normalization over (n, h, w). Training mode uses batch
// statistics and updates running stats in place with the given momentum.
template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                            Tensor<T>& running_mean, Tensor<T>& running_var, T momentum, T eps,
                            bool training, BatchNormCache<T>* cache = nullptr) {
    if (x.rank() != 4) throw ShapeError("batchnorm: rank-4 input expected");
    const std::size_t n = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
    const std::size_t m = n * h * w;
    Tensor<T> y(x.shape());
    std::vector<T> mean(c), var(c);
    if (training) {
        for (std::size_t j = 0; j < c; ++j) {
            T s = T(0);
            for (std::size_t i = 0; i < n; ++i) {
                const T* p = &x.at4(i, j, 0, 0);
                for (std::size_t k = 0; k < h * w; ++k) s += p[k];
            }
            mean[j] = s / static_cast<T>(m);
            T v = T(0);
            for (std::size_t i = 0; i < n; ++i) {
                const T* p = &x.at4(i, j, 0, 0);
                for (std::size_t k = 0; k < h * w; ++k) {
                    T d = p[k] - mean[j];
                    v += d * d;
                }
            }
            var[j] = v / static_cast<T>(m);
            running_mean[j] = momentum * running_mean[j] + (T(1) - momentum) * mean[j];
            running_var[j] = momentum * running_var[j] + (T(1) - momentum) * var[j];
        }
    } else {
        for (std::size_t j = 0; j < c; ++j) {
            mean[j] = running_mean[j];
            var[j] = running_var[j];
        }
    }
    std::vector<T> inv_std(c);
    for (std::size_t j = 0; j < c; ++j) inv_std[j] = T(1) / std::sqrt(var[j] + eps);
    if (cache) {
        cache->xhat = Tensor<T>(x.shape());
        cache->mean = mean;
        cache->inv_std = inv_std;
        cache->training = training;
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j) {
            const T* p = &x.at4(i, j, 0, 0);
            T* q = &y.at4(i, j, 0, 0);
            T* xh = cache ? &cache->xhat.at4(i, j, 0, 0) : nullptr;
            for (std::size_t k = 0; k < h * w; ++k) {
                T nv = (p[k] - mean[j]) * inv_std[j];
                if (xh) xh[k] = nv;
                q[k] = gamma[j] * nv + beta[j];
            }
        }
    return y;
}

template <typename T>
struct BatchNormGrads {
    Tensor<T> dx, dgamma, dbeta;
};

template <typename T>
BatchNormGrads<T> batchnorm_backward(const Tensor<T>& gamma, const BatchNormCache<T>& cache,
                                     const Tensor<T>& dy) {
    const Shape& s = dy.shape();
    const std::size_t n = s[0], c = s[1], hw = s[2] * s[3];
    const std::size_t m = n * hw;
    BatchNormGrads<T> g;
    g.dx = Tensor<T>(s);
    g.dgamma = Tensor<T>({c}, T(0));
    g.dbeta = Tensor<T>({c}, T(0));
    for (std::size_t j = 0; j < c; ++j) {
        T sum_dy = T(0), sum_dy_xhat = T(0);
        for (std::size_t i = 0; i < n; ++i) {
            const T* dp = &dy.at4(i, j, 0, 0);
            const T* xh = &cache.xhat.at4(i, j, 0, 0);
            for (std::size_t k = 0; k < hw; ++k) {
                sum_dy += dp[k];
                sum_dy_xhat += dp[k] * xh[k];
            }
        }
        g.dgamma[j] = sum_dy_xhat;
        g.dbeta[j] = sum_dy;
        for (std::size_t i = 0; i < n; ++i) {
            const T* dp = &dy.at4(i, j, 0, 0);
            const T* xh = &cache.xhat.at4(i, j, 0, 0);
            T* dxp = &g.dx.at4(i, j, 0, 0);
            for (std::size_t k = 0; k < hw; ++k) {
                if (cache.training) {
                    dxp[k] = gamma[j] * cache.inv_std[j] *
                             (dp[k] - sum_dy / static_cast<T>(m) -
                              xh[k] * sum_dy_xhat / static_cast<T>(m));
                } else {
                    dxp[k] = gamma[j] * cache.inv_std[j] * dp[k];
                }
            }
        }
    }
    return g;
}

// ---- softmax cross-entropy ----

template <typename T>
struct SoftmaxXentResult {
    T loss;
    Tensor<T> probs;
};

// Numerically stabilized softmax plus mean categorical cross-entropy against
// one-hot labels.
template <typename T>
SoftmaxXentResult<T> softmax_xent(const Tensor<T>& logits, const Tensor<T>& labels) {
    if (logits.rank() != 2 || labels.rank() != 2) throw ShapeError("softmax_xent: rank-2 expected");
    check_same_shape(logits, labels, "softmax_xent");
    const std::size_t n = logits.extent(0), k = logits.extent(1);
    if (k < 2) throw std::invalid_argument("softmax_xent: need k >= 2 classes");
    SoftmaxXentResult<T> r;
    r.probs = Tensor<T>(logits.shape());
    T loss = T(0);
    for (std::size_t i = 0; i < n; ++i) {
        // labels must be one-hot rows
        std::size_t ones = 0, true_cls = 0;
        for (std::size_t j = 0; j < k; ++j) {
            T v = labels.at2(i, j);
            if (v == T(1)) {
                ++ones;
                true_cls = j;
            } else if (v != T(0)) {
                throw std::invalid_argument("softmax_xent: label row is not one-hot");
            }
        }
        if (ones != 1) throw std::invalid_argument("softmax_xent: label row is not one-hot");
        T mx = logits.at2(i, 0);
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, logits.at2(i, j));
        T denom = T(0);
        for (std::size_t j = 0; j < k; ++j) denom += std::exp(logits.at2(i, j) - mx);
        for (std::size_t j = 0; j < k; ++j) r.probs.at2(i, j) = std::exp(logits.at2(i, j) - mx) / denom;
        loss += -(logits.at2(i, true_cls) - mx - std::log(denom));
    }
    r.loss = loss / static_cast<T>(n);
    return r;
}

template <typename T>
Tensor<T> softmax_xent_backward(const Tensor<T>& probs, const Tensor<T>& labels) {
    Tensor<T> d(probs.shape());
    const T inv_n = T(1) / static_cast<T>(probs.extent(0));
    for (std::size_t i = 0; i < probs.numel(); ++i) d[i] = (probs[i] - labels[i]) * inv_n;
    return d;
}

// Row-wise softmax (inference-time probabilities).
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
    const std::size_t n = logits.extent(0), k = logits.extent(1);
    Tensor<T> p(logits.shape());
    for (std::size_t i = 0; i < n; ++i) {
        T mx = logits.at2(i, 0);
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, logits.at2(i, j));
        T denom = T(0);
        for (std::size_t j = 0; j < k; ++j) denom += std::exp(logits.at2(i, j) - mx);
        for (std::size_t j = 0; j < k; ++j) p.at2(i, j) = std::exp(logits.at2(i, j) - mx) / denom;
    }
    return p;
}

}  // namespace xnet
