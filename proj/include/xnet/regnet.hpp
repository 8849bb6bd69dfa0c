#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "layers.hpp"

namespace xnet {

// The six design-space parameters that fully determine a RegNet backbone.
struct RegNetSpec {
    std::size_t d;      // total block count
    double w0;          // initial width
    double wa;          // width slope
    double wm;          // width multiplication factor
    std::size_t b;      // bottleneck ratio
    std::size_t g;      // group width
    std::size_t stem_width;

    // Reference X-002 instantiation.
    static RegNetSpec x002() { return {13, 24.0, 36.44, 2.49, 1, 8, 32}; }
};

struct StagePlan {
    std::size_t width;
    std::size_t depth;
    std::size_t stride;  // stride of the stage's first block
};

struct WidthPlan {
    std::vector<double> u;       // linear widths, u_j = w0 + wa*j
    std::vector<double> s;       // exponents, u_j = w0 * wm^s_j
    std::vector<std::size_t> w;  // quantized widths, multiples of g
    std::vector<StagePlan> stages;
};

// Linear-then-quantized width schedule: u_j = w0 + wa*j, s_j solved from
// u_j = w0*wm^s_j, then w_j = w0*wm^round(s_j) snapped to the nearest
// multiple of g. s rounds ties-to-even; the multiple-of-g snap rounds
// half away from zero. Equal consecutive widths merge into one stage.
inline WidthPlan generate_widths(const RegNetSpec& spec) {
    if (spec.d < 1) throw std::invalid_argument("generate_widths: d must be >= 1");
    if (!(spec.wm > 1.0)) throw std::invalid_argument("generate_widths: wm must be > 1");
    if (spec.wa < 0.0) throw std::invalid_argument("generate_widths: wa must be >= 0");
    if (spec.g < 1) throw std::invalid_argument("generate_widths: g must be >= 1");
    if (spec.w0 < static_cast<double>(spec.g))
        throw std::invalid_argument("generate_widths: w0 must be >= g");
    long long w0g = std::llround(spec.w0);
    if (static_cast<double>(w0g) != spec.w0 || w0g % static_cast<long long>(spec.g) != 0)
        throw std::invalid_argument("generate_widths: w0 must be an integer multiple of g");

    WidthPlan plan;
    for (std::size_t j = 0; j < spec.d; ++j) {
        double uj = spec.w0 + spec.wa * static_cast<double>(j);
        double sj = std::log(uj / spec.w0) / std::log(spec.wm);
        double sr = std::nearbyint(sj);  // ties to even
        double wq = spec.w0 * std::pow(spec.wm, sr);
        long long wj = std::llround(wq / static_cast<double>(spec.g)) *
                       static_cast<long long>(spec.g);
        plan.u.push_back(uj);
        plan.s.push_back(sj);
        plan.w.push_back(static_cast<std::size_t>(wj));
    }
    for (std::size_t j = 0; j < spec.d; ++j) {
        if (!plan.stages.empty() && plan.stages.back().width == plan.w[j])
            plan.stages.back().depth += 1;
        else
            plan.stages.push_back({plan.w[j], 1, 2});
    }
    return plan;
}

// Residual bottleneck block with grouped 3x3 convolution:
// 1x1 reduce -> bn -> relu -> 3x3 grouped (stride) -> bn -> relu ->
// 1x1 expand -> bn, added to the (possibly projected) skip, then relu.
// With bottleneck ratio 1 the reduce stage preserves width.
template <typename T>
class BottleneckBlock : public Layer<T> {
public:
    BottleneckBlock(std::string name, std::size_t in_ch, std::size_t width,
                    std::size_t bottleneck_ratio, std::size_t group_width, std::size_t stride)
        : Layer<T>(std::move(name)), in_ch_(in_ch), width_(width), stride_(stride) {
        std::size_t inner = width / bottleneck_ratio;
        if (inner == 0 || inner % group_width != 0)
            throw ShapeError("BottleneckBlock " + this->name() + ": inner width " +
                             std::to_string(inner) + " not divisible by group width " +
                             std::to_string(group_width));
        std::size_t groups = inner / group_width;
        const std::string& n = this->name();
        conv_reduce_ = std::make_unique<Conv2d<T>>(n + ".conv_reduce", in_ch, inner, 1, 1, 0, 1, false);
        bn_reduce_ = std::make_unique<BatchNorm<T>>(n + ".bn_reduce", inner);
        conv_group_ = std::make_unique<Conv2d<T>>(n + ".conv_group", inner, inner, 3, stride, 1, groups, false);
        bn_group_ = std::make_unique<BatchNorm<T>>(n + ".bn_group", inner);
        conv_expand_ = std::make_unique<Conv2d<T>>(n + ".conv_expand", inner, width, 1, 1, 0, 1, false);
        bn_expand_ = std::make_unique<BatchNorm<T>>(n + ".bn_expand", width);
        if (in_ch != width || stride != 1) {
            proj_ = std::make_unique<Conv2d<T>>(n + ".conv_proj", in_ch, width, 1, stride, 0, 1, false);
            bn_proj_ = std::make_unique<BatchNorm<T>>(n + ".bn_proj", width);
        }
    }

    std::string kind() const override { return "bottleneck"; }
    bool has_projection() const { return proj_ != nullptr; }

    Tensor<T> forward(const Tensor<T>& x, bool training) override {
        Tensor<T> m = conv_reduce_->forward(x, training);
        m = bn_reduce_->forward(m, training);
        pre1_ = m;
        m = relu(m);
        m = conv_group_->forward(m, training);
        m = bn_group_->forward(m, training);
        pre2_ = m;
        m = relu(m);
        m = conv_expand_->forward(m, training);
        m = bn_expand_->forward(m, training);
        Tensor<T> skip = proj_ ? bn_proj_->forward(proj_->forward(x, training), training) : x;
        check_same_shape(m, skip, "BottleneckBlock");
        pre_out_ = Tensor<T>(m.shape());
        for (std::size_t i = 0; i < m.numel(); ++i) pre_out_[i] = m[i] + skip[i];
        return relu(pre_out_);
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> ds = relu_backward(pre_out_, dy);
        // main path
        Tensor<T> d = bn_expand_->backward(ds);
        d = conv_expand_->backward(d);
        d = relu_backward(pre2_, d);
        d = bn_group_->backward(d);
        d = conv_group_->backward(d);
        d = relu_backward(pre1_, d);
        d = bn_reduce_->backward(d);
        Tensor<T> dx = conv_reduce_->backward(d);
        // skip path
        if (proj_) {
            Tensor<T> dskip = bn_proj_->backward(ds);
            dskip = proj_->backward(dskip);
            for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += dskip[i];
        } else {
            for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += ds[i];
        }
        return dx;
    }

    void collect_params(std::vector<ParamRef<T>>& out) override {
        for (Layer<T>* l : sublayers()) l->collect_params(out);
    }

    void init(Rng& rng) override {
        for (Layer<T>* l : sublayers()) l->init(rng);
    }

    Shape output_shape(const Shape& in) const override {
        Shape s = conv_reduce_->output_shape(in);
        s = conv_group_->output_shape(s);
        return conv_expand_->output_shape(s);
    }

    std::int64_t param_count() const override {
        std::int64_t n = 0;
        for (const Layer<T>* l : const_cast<BottleneckBlock*>(this)->sublayers()) n += l->param_count();
        return n;
    }

    std::int64_t flop_count(const Shape& in) const override {
        std::int64_t total = 0;
        Shape s = in;
        total += conv_reduce_->flop_count(s);
        s = conv_reduce_->output_shape(s);
        total += bn_reduce_->flop_count(s) + static_cast<std::int64_t>(shape_numel(s) / s[0]);
        total += conv_group_->flop_count(s);
        s = conv_group_->output_shape(s);
        total += bn_group_->flop_count(s) + static_cast<std::int64_t>(shape_numel(s) / s[0]);
        total += conv_expand_->flop_count(s);
        s = conv_expand_->output_shape(s);
        total += bn_expand_->flop_count(s);
        if (proj_) {
            total += proj_->flop_count(in);
            total += bn_proj_->flop_count(s);
        }
        // skip add + final relu
        total += 2 * static_cast<std::int64_t>(shape_numel(s) / s[0]);
        return total;
    }

private:
    std::vector<Layer<T>*> sublayers() {
        std::vector<Layer<T>*> v{conv_reduce_.get(), bn_reduce_.get(), conv_group_.get(),
                                 bn_group_.get(), conv_expand_.get(), bn_expand_.get()};
        if (proj_) {
            v.push_back(proj_.get());
            v.push_back(bn_proj_.get());
        }
        return v;
    }

    std::size_t in_ch_, width_, stride_;
    std::unique_ptr<Conv2d<T>> conv_reduce_, conv_group_, conv_expand_, proj_;
    std::unique_ptr<BatchNorm<T>> bn_reduce_, bn_group_, bn_expand_, bn_proj_;
    Tensor<T> pre1_, pre2_, pre_out_;
};

// Builds the stem + body as a flat layer sequence: 3x3 stride-2 stem conv to
// stem_width with bn + relu, then one stage per distinct width, stride 2 on
// each stage's first block.
template <typename T>
std::vector<std::unique_ptr<Layer<T>>> build_backbone(const RegNetSpec& spec,
                                                      std::size_t in_channels) {
    WidthPlan plan = generate_widths(spec);
    std::vector<std::unique_ptr<Layer<T>>> layers;
    layers.push_back(std::make_unique<Conv2d<T>>("stem.conv", in_channels, spec.stem_width, 3, 2, 1, 1, false));
    layers.push_back(std::make_unique<BatchNorm<T>>("stem.bn", spec.stem_width));
    layers.push_back(std::make_unique<ReLU<T>>("stem.relu"));
    std::size_t ch = spec.stem_width;
    for (std::size_t si = 0; si < plan.stages.size(); ++si) {
        const StagePlan& st = plan.stages[si];
        for (std::size_t bi = 0; bi < st.depth; ++bi) {
            std::size_t stride = bi == 0 ? st.stride : 1;
            std::string name = "stage" + std::to_string(si + 1) + ".block" + std::to_string(bi + 1);
            layers.push_back(std::make_unique<BottleneckBlock<T>>(name, ch, st.width, spec.b, spec.g, stride));
            ch = st.width;
        }
    }
    return layers;
}

inline std::size_t backbone_out_channels(const RegNetSpec& spec) {
    WidthPlan plan = generate_widths(spec);
    return plan.stages.back().width;
}

}  // namespace xnet
