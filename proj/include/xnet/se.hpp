#pragma once

#include <memory>

#include "layers.hpp"
#include "ops.hpp"

namespace xnet {

// Squeeze-and-excitation: global average pool to one scalar per channel,
// a bottlenecked two-layer transform (ch -> ch/r -> ch) with relu then
// sigmoid, and a per-channel rescale of the input.
template <typename T>
class SEBlock : public Layer<T> {
public:
    SEBlock(std::string name, std::size_t ch, std::size_t ratio)
        : Layer<T>(std::move(name)), ch_(ch), ratio_(ratio) {
        if (ratio == 0 || ch % ratio != 0)
            throw std::invalid_argument("SEBlock " + this->name() + ": channels " + std::to_string(ch) +
                                        " not divisible by ratio " + std::to_string(ratio));
        fc_reduce_ = std::make_unique<Fc<T>>(this->name() + ".fc_reduce", ch, ch / ratio);
        fc_expand_ = std::make_unique<Fc<T>>(this->name() + ".fc_expand", ch / ratio, ch);
    }

    std::string kind() const override { return "se"; }

    void init(Rng& rng) override {
        fc_reduce_->init(rng);
        fc_expand_->init(rng);
    }

    Tensor<T> forward(const Tensor<T>& x, bool training) override {
        x_ = x;
        Tensor<T> z = global_avg_pool(x);
        Tensor<T> u = fc_reduce_->forward(z, training);
        pre_relu_ = u;
        Tensor<T> v = fc_expand_->forward(relu(u), training);
        scale_ = sigmoid(v);
        const std::size_t n = x.extent(0), c = x.extent(1), hw = x.extent(2) * x.extent(3);
        Tensor<T> y(x.shape());
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < c; ++j) {
                const T a = scale_.at2(i, j);
                const T* p = &x.at4(i, j, 0, 0);
                T* q = &y.at4(i, j, 0, 0);
                for (std::size_t k = 0; k < hw; ++k) q[k] = a * p[k];
            }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        const std::size_t n = x_.extent(0), c = x_.extent(1), hw = x_.extent(2) * x_.extent(3);
        Tensor<T> dx(x_.shape());
        Tensor<T> da({n, c}, T(0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < c; ++j) {
                const T a = scale_.at2(i, j);
                const T* xp = &x_.at4(i, j, 0, 0);
                const T* dp = &dy.at4(i, j, 0, 0);
                T* dxp = &dx.at4(i, j, 0, 0);
                T s = T(0);
                for (std::size_t k = 0; k < hw; ++k) {
                    s += dp[k] * xp[k];
                    dxp[k] = a * dp[k];
                }
                da.at2(i, j) = s;
            }
        Tensor<T> dv = sigmoid_backward_from_y(scale_, da);
        Tensor<T> dr = fc_expand_->backward(dv);
        Tensor<T> du = relu_backward(pre_relu_, dr);
        Tensor<T> dz = fc_reduce_->backward(du);
        Tensor<T> dpool = global_avg_pool_backward(x_.shape(), dz);
        for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += dpool[i];
        return dx;
    }

    void collect_params(std::vector<ParamRef<T>>& out) override {
        fc_reduce_->collect_params(out);
        fc_expand_->collect_params(out);
    }

    Shape output_shape(const Shape& in) const override { return in; }

    std::int64_t param_count() const override {
        return fc_reduce_->param_count() + fc_expand_->param_count();
    }

    std::int64_t flop_count(const Shape& in) const override {
        std::int64_t elems = static_cast<std::int64_t>(shape_numel(in) / in[0]);
        std::int64_t c = static_cast<std::int64_t>(ch_), cr = static_cast<std::int64_t>(ch_ / ratio_);
        // pool, two fc layers, relu + sigmoid, channel rescale
        return elems + 2 * cr * c + cr + 2 * c * cr + c + elems;
    }

    Fc<T>& fc_reduce() { return *fc_reduce_; }
    Fc<T>& fc_expand() { return *fc_expand_; }

private:
    std::size_t ch_, ratio_;
    std::unique_ptr<Fc<T>> fc_reduce_, fc_expand_;
    Tensor<T> x_, pre_relu_, scale_;
};

}  // namespace xnet
