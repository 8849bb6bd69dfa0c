#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ops.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace xnet {

template <typename T>
struct ParamRef {
    std::string name;
    Tensor<T>* value = nullptr;
    Tensor<T>* grad = nullptr;  // null for non-trainable state (running stats)
    bool trainable = true;
};

struct ComplexityRow {
    std::string name, kind;
    Shape out_shape;
    std::int64_t params = 0;
    std::int64_t flops = 0;  // per single sample, 1 MAC = 2 FLOPs
};

// Stateful layer: forward caches whatever backward needs, so the sequence
// forward -> backward must not interleave across calls on the same layer.
template <typename T>
class Layer {
public:
    explicit Layer(std::string name) : name_(std::move(name)) {}
    virtual ~Layer() = default;

    const std::string& name() const { return name_; }
    virtual std::string kind() const = 0;
    virtual Tensor<T> forward(const Tensor<T>& x, bool training) = 0;
    virtual Tensor<T> backward(const Tensor<T>& dy) = 0;
    virtual void collect_params(std::vector<ParamRef<T>>& out) {}
    virtual void init(Rng& rng) {}
    virtual Shape output_shape(const Shape& in) const = 0;
    virtual std::int64_t param_count() const { return 0; }
    virtual std::int64_t flop_count(const Shape& in) const = 0;

    virtual void complexity_rows(const Shape& in, std::vector<ComplexityRow>& rows) const {
        rows.push_back({name_, kind(), output_shape(in), param_count(), flop_count(in)});
    }

private:
    std::string name_;
};

template <typename T>
class Conv2d : public Layer<T> {
public:
    Conv2d(std::string name, std::size_t in_ch, std::size_t out_ch, std::size_t k,
           std::size_t stride, std::size_t pad, std::size_t groups, bool bias)
        : Layer<T>(std::move(name)),
          in_ch_(in_ch), out_ch_(out_ch), k_(k), stride_(stride), pad_(pad),
          groups_(groups), has_bias_(bias),
          weight_({out_ch, in_ch / groups, k, k}),
          dweight_(weight_.shape()) {
        if (in_ch % groups != 0 || out_ch % groups != 0)
            throw ShapeError("Conv2d " + this->name() + ": channels not divisible by groups");
        if (has_bias_) {
            bias_ = Tensor<T>({out_ch});
            dbias_ = Tensor<T>({out_ch});
        }
    }

    std::string kind() const override { return "conv2d"; }

    void init(Rng& rng) override {
        std::size_t fan_in = (in_ch_ / groups_) * k_ * k_;
        weight_ = he_normal_init<T>(rng, weight_.shape(), fan_in);
        if (has_bias_) bias_.fill(T(0));
    }

    Tensor<T> forward(const Tensor<T>& x, bool) override {
        if (x.extent(1) != in_ch_)
            throw ShapeError("Conv2d " + this->name() + ": expected " + std::to_string(in_ch_) +
                             " input channels, got " + std::to_string(x.extent(1)));
        x_ = x;
        return conv2d_forward(x, weight_, has_bias_ ? &bias_ : nullptr, stride_, pad_, groups_);
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        auto g = conv2d_backward(x_, weight_, has_bias_, stride_, pad_, groups_, dy);
        for (std::size_t i = 0; i < dweight_.numel(); ++i) dweight_[i] += g.dweight[i];
        if (has_bias_)
            for (std::size_t i = 0; i < dbias_.numel(); ++i) dbias_[i] += (*g.dbias)[i];
        return std::move(g.dx);
    }

    void collect_params(std::vector<ParamRef<T>>& out) override {
        out.push_back({this->name() + ".weight", &weight_, &dweight_, true});
        if (has_bias_) out.push_back({this->name() + ".bias", &bias_, &dbias_, true});
    }

    Shape output_shape(const Shape& in) const override {
        ConvGeometry geo{in_ch_, out_ch_, k_, k_, stride_, pad_, groups_};
        return {in[0], out_ch_, geo.out_extent(in[2]), geo.out_extent(in[3])};
    }

    std::int64_t param_count() const override {
        return static_cast<std::int64_t>(weight_.numel()) + (has_bias_ ? out_ch_ : 0);
    }

    std::int64_t flop_count(const Shape& in) const override {
        Shape out = output_shape(in);
        std::int64_t positions = static_cast<std::int64_t>(out[2] * out[3]);
        return 2 * positions * static_cast<std::int64_t>(out_ch_ * (in_ch_ / groups_) * k_ * k_);
    }

    Tensor<T>& weight() { return weight_; }
    Tensor<T>& bias() { return bias_; }

private:
    std::size_t in_ch_, out_ch_, k_, stride_, pad_, groups_;
    bool has_bias_;
    Tensor<T> weight_, dweight_, bias_, dbias_;
    Tensor<T> x_;
};

template <typename T>
class BatchNorm : public Layer<T> {
public:
    BatchNorm(std::string name, std::size_t ch, T momentum = T(0.9), T eps = T(1e-5))
        : Layer<T>(std::move(name)), ch_(ch), momentum_(momentum), eps_(eps),
          gamma_({ch}, T(1)), beta_({ch}, T(0)),
          running_mean_({ch}, T(0)), running_var_({ch}, T(1)),
          dgamma_({ch}, T(0)), dbeta_({ch}, T(0)) {}

    std::string kind() const override { return "batchnorm"; }

    Tensor<T> forward(const Tensor<T>& x, bool training) override {
        return batchnorm_forward(x, gamma_, beta_, running_mean_, running_var_, momentum_, eps_,
                                 training, &cache_);
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        auto g = batchnorm_backward(gamma_, cache_, dy);
        for (std::size_t i = 0; i < ch_; ++i) {
            dgamma_[i] += g.dgamma[i];
            dbeta_[i] += g.dbeta[i];
        }
        return std::move(g.dx);
    }

    void collect_params(std::vector<ParamRef<T>>& out) override {
        out.push_back({this->name() + ".gamma", &gamma_, &dgamma_, true});
        out.push_back({this->name() + ".beta", &beta_, &dbeta_, true});
        out.push_back({this->name() + ".running_mean", &running_mean_, nullptr, false});
        out.push_back({this->name() + ".running_var", &running_var_, nullptr, false});
    }

    Shape output_shape(const Shape& in) const override { return in; }
    // 2 trainable + 2 running-stat entries per channel
    std::int64_t param_count() const override { return 4 * static_cast<std::int64_t>(ch_); }
    std::int64_t flop_count(const Shape& in) const override {
        return 2 * static_cast<std::int64_t>(shape_numel(in) / in[0]);
    }

    Tensor<T>& gamma() { return gamma_; }
    Tensor<T>& beta() { return beta_; }
    Tensor<T>& running_mean() { return running_mean_; }
    Tensor<T>& running_var() { return running_var_; }

private:
    std::size_t ch_;
    T momentum_, eps_;
    Tensor<T> gamma_, beta_, running_mean_, running_var_, dgamma_, dbeta_;
    BatchNormCache<T> cache_;
};

template <typename T>
class ReLU : public Layer<T> {
public:
    using Layer<T>::Layer;
    std::string kind() const override { return "relu"; }
    Tensor<T> forward(const Tensor<T>& x, bool) override {
        x_ = x;
        return relu(x);
    }
    Tensor<T> backward(const Tensor<T>& dy) override { return relu_backward(x_, dy); }
    Shape output_shape(const Shape& in) const override { return in; }
    std::int64_t flop_count(const Shape& in) const override {
        return static_cast<std::int64_t>(shape_numel(in) / in[0]);
    }

private:
    Tensor<T> x_;
};

template <typename T>
class GlobalAvgPool : public Layer<T> {
public:
    using Layer<T>::Layer;
    std::string kind() const override { return "global_avg_pool"; }
    Tensor<T> forward(const Tensor<T>& x, bool) override {
        in_shape_ = x.shape();
        return global_avg_pool(x);
    }
    Tensor<T> backward(const Tensor<T>& dy) override {
        return global_avg_pool_backward(in_shape_, dy);
    }
    Shape output_shape(const Shape& in) const override { return {in[0], in[1]}; }
    std::int64_t flop_count(const Shape& in) const override {
        return static_cast<std::int64_t>(shape_numel(in) / in[0]);
    }

private:
    Shape in_shape_;
};

template <typename T>
class Flatten : public Layer<T> {
public:
    using Layer<T>::Layer;
    std::string kind() const override { return "flatten"; }
    Tensor<T> forward(const Tensor<T>& x, bool) override {
        in_shape_ = x.shape();
        return x.reshaped({x.extent(0), x.numel() / x.extent(0)});
    }
    Tensor<T> backward(const Tensor<T>& dy) override { return dy.reshaped(in_shape_); }
    Shape output_shape(const Shape& in) const override { return {in[0], shape_numel(in) / in[0]}; }
    std::int64_t flop_count(const Shape&) const override { return 0; }

private:
    Shape in_shape_;
};

template <typename T>
class Fc : public Layer<T> {
public:
    Fc(std::string name, std::size_t in, std::size_t out)
        : Layer<T>(std::move(name)), in_(in), out_(out),
          w_({out, in}), b_({out}, T(0)), dw_(w_.shape()), db_(b_.shape()) {
        if (in == 0 || out == 0) throw std::invalid_argument("Fc: extents must be >= 1");
    }

    std::string kind() const override { return "fc"; }

    void init(Rng& rng) override {
        w_ = he_normal_init<T>(rng, w_.shape(), in_);
        b_.fill(T(0));
    }

    Tensor<T> forward(const Tensor<T>& x, bool) override {
        x_ = x;
        return fc_forward(x, w_, b_);
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        auto g = fc_backward(x_, w_, dy);
        for (std::size_t i = 0; i < dw_.numel(); ++i) dw_[i] += g.dw[i];
        for (std::size_t i = 0; i < db_.numel(); ++i) db_[i] += g.db[i];
        return std::move(g.dx);
    }

    void collect_params(std::vector<ParamRef<T>>& out) override {
        out.push_back({this->name() + ".weight", &w_, &dw_, true});
        out.push_back({this->name() + ".bias", &b_, &db_, true});
    }

    Shape output_shape(const Shape& in) const override { return {in[0], out_}; }
    std::int64_t param_count() const override { return static_cast<std::int64_t>(out_ * in_ + out_); }
    std::int64_t flop_count(const Shape&) const override {
        return 2 * static_cast<std::int64_t>(out_) * static_cast<std::int64_t>(in_);
    }

    Tensor<T>& weight() { return w_; }
    Tensor<T>& bias() { return b_; }

private:
    std::size_t in_, out_;
    Tensor<T> w_, b_, dw_, db_;
    Tensor<T> x_;
};

}  // namespace xnet
