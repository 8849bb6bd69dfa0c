#pragma once

#include <cstring>

#include <catch2/catch_amalgamated.hpp>

#include "xnet/xnet.hpp"

namespace testutil {

template <typename T>
xnet::Tensor<T> rand_tensor(xnet::Rng& rng, const xnet::Shape& shape, double lo = -1.0, double hi = 1.0) {
    return xnet::rng_uniform<T>(rng, shape, lo, hi);
}

// Random values bounded away from zero, for kink-free relu finite differences.
template <typename T>
xnet::Tensor<T> rand_tensor_nonzero(xnet::Rng& rng, const xnet::Shape& shape, double margin = 1e-2) {
    xnet::Tensor<T> t = rand_tensor<T>(rng, shape);
    for (std::size_t i = 0; i < t.numel(); ++i) {
        if (std::abs(static_cast<double>(t[i])) < margin)
            t[i] = t[i] >= T(0) ? static_cast<T>(margin) : static_cast<T>(-margin);
    }
    return t;
}

template <typename T>
double max_abs_diff(const xnet::Tensor<T>& a, const xnet::Tensor<T>& b) {
    REQUIRE(a.shape() == b.shape());
    double worst = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i)
        worst = std::max(worst, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    return worst;
}

template <typename T>
double max_rel_diff(const xnet::Tensor<T>& a, const xnet::Tensor<T>& b) {
    REQUIRE(a.shape() == b.shape());
    double worst = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        double x = static_cast<double>(a[i]), y = static_cast<double>(b[i]);
        worst = std::max(worst, std::abs(x - y) / std::max(1.0, std::max(std::abs(x), std::abs(y))));
    }
    return worst;
}

// Independent direct convolution: seven nested loops, nothing shared with the
// im2col path under test.
template <typename T>
xnet::Tensor<T> conv2d_oracle(const xnet::Tensor<T>& x, const xnet::Tensor<T>& w, const xnet::Tensor<T>* bias,
                              std::size_t stride, std::size_t pad, std::size_t groups) {
    const std::size_t n = x.extent(0), in_ch = x.extent(1), h = x.extent(2), ww = x.extent(3);
    const std::size_t out_ch = w.extent(0), kh = w.extent(2), kw = w.extent(3);
    const std::size_t cg = in_ch / groups, og = out_ch / groups;
    const std::size_t oh = (h + 2 * pad - kh) / stride + 1;
    const std::size_t ow = (ww + 2 * pad - kw) / stride + 1;
    xnet::Tensor<T> y({n, out_ch, oh, ow});
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t o = 0; o < out_ch; ++o)
            for (std::size_t oi = 0; oi < oh; ++oi)
                for (std::size_t oj = 0; oj < ow; ++oj) {
                    const std::size_t g = o / og;
                    double acc = bias ? static_cast<double>((*bias)[o]) : 0.0;
                    for (std::size_t c = 0; c < cg; ++c)
                        for (std::size_t ki = 0; ki < kh; ++ki)
                            for (std::size_t kj = 0; kj < kw; ++kj) {
                                std::ptrdiff_t si = static_cast<std::ptrdiff_t>(oi * stride + ki) -
                                                    static_cast<std::ptrdiff_t>(pad);
                                std::ptrdiff_t sj = static_cast<std::ptrdiff_t>(oj * stride + kj) -
                                                    static_cast<std::ptrdiff_t>(pad);
                                if (si < 0 || si >= static_cast<std::ptrdiff_t>(h) || sj < 0 ||
                                    sj >= static_cast<std::ptrdiff_t>(ww))
                                    continue;
                                acc += static_cast<double>(x.at4(b, g * cg + c, si, sj)) *
                                       static_cast<double>(
                                           w[((o * cg + c) * kh + ki) * kw + kj]);
                            }
                    y.at4(b, o, oi, oj) = static_cast<T>(acc);
                }
    return y;
}

}  // namespace testutil
