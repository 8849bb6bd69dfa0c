#pragma once

#include <array>
#include <memory>

#include "layers.hpp"
#include "ops.hpp"

namespace xnet {

// Gate index order: input, forget, cell candidate, output.
enum ConvLSTMGate { kGateI = 0, kGateF = 1, kGateC = 2, kGateO = 3 };

// Per-gate kernels: Wx (in -> hidden), Wh (hidden -> hidden), one bias per
// gate. Kernels are square, odd-sized, applied with same-padding so the
// spatial extent is preserved. No peephole terms.
template <typename T>
struct ConvLSTMParams {
    std::array<Tensor<T>, 4> wx, wh, b;
    std::size_t in_ch = 0, hidden = 0, ksize = 1;

    ConvLSTMParams() = default;
    ConvLSTMParams(std::size_t in, std::size_t hid, std::size_t k) : in_ch(in), hidden(hid), ksize(k) {
        if (k % 2 == 0) throw std::invalid_argument("ConvLSTMParams: kernel size must be odd");
        for (int q = 0; q < 4; ++q) {
            wx[q] = Tensor<T>({hid, in, k, k});
            wh[q] = Tensor<T>({hid, hid, k, k});
            b[q] = Tensor<T>({hid});
        }
    }
};

template <typename T>
struct ConvLSTMState {
    Tensor<T> h, c;

    static ConvLSTMState zeros(std::size_t n, std::size_t hidden, std::size_t height, std::size_t width) {
        return {Tensor<T>({n, hidden, height, width}, T(0)), Tensor<T>({n, hidden, height, width}, T(0))};
    }
};

template <typename T>
struct ConvLSTMStepCache {
    Tensor<T> x, h_prev, c_prev;
    std::array<Tensor<T>, 4> gate;  // post-activation i, f, g, o
    Tensor<T> c_next, tanh_c_next;
};

// One recurrence step:
//   i = sigm(Wx_i*x + Wh_i*h + b_i)     f = sigm(Wx_f*x + Wh_f*h + b_f)
//   g = tanh(Wx_c*x + Wh_c*h + b_c)     o = sigm(Wx_o*x + Wh_o*h + b_o)
//   c' = f.c + i.g                      h' = o.tanh(c')
template <typename T>
ConvLSTMState<T> convlstm_step(const Tensor<T>& x, const ConvLSTMState<T>& st,
                               const ConvLSTMParams<T>& p, ConvLSTMStepCache<T>* cache = nullptr) {
    if (x.rank() != 4 || x.extent(1) != p.in_ch)
        throw ShapeError("convlstm_step: input channel mismatch");
    check_same_shape(st.h, st.c, "convlstm_step state");
    const std::size_t pad = (p.ksize - 1) / 2;
    std::array<Tensor<T>, 4> z;
    for (int q = 0; q < 4; ++q) {
        z[q] = conv2d_forward(x, p.wx[q], &p.b[q], 1, pad, 1);
        Tensor<T> zh = conv2d_forward(st.h, p.wh[q], static_cast<const Tensor<T>*>(nullptr), 1, pad, 1);
        check_same_shape(z[q], zh, "convlstm_step gates");
        for (std::size_t i = 0; i < z[q].numel(); ++i) z[q][i] += zh[i];
    }
    Tensor<T> gi = sigmoid(z[kGateI]);
    Tensor<T> gf = sigmoid(z[kGateF]);
    Tensor<T> gg = tanh_act(z[kGateC]);
    Tensor<T> go = sigmoid(z[kGateO]);

    ConvLSTMState<T> out;
    out.c = Tensor<T>(st.c.shape());
    for (std::size_t i = 0; i < out.c.numel(); ++i) out.c[i] = gf[i] * st.c[i] + gi[i] * gg[i];
    Tensor<T> tc = tanh_act(out.c);
    out.h = Tensor<T>(st.h.shape());
    for (std::size_t i = 0; i < out.h.numel(); ++i) out.h[i] = go[i] * tc[i];

    if (cache) {
        cache->x = x;
        cache->h_prev = st.h;
        cache->c_prev = st.c;
        cache->gate = {std::move(gi), std::move(gf), std::move(gg), std::move(go)};
        cache->c_next = out.c;
        cache->tanh_c_next = std::move(tc);
    }
    return out;
}

template <typename T>
struct ConvLSTMGrads {
    Tensor<T> dx, dh_prev, dc_prev;
};

// Backward through one step. Parameter gradients accumulate into dp.
template <typename T>
ConvLSTMGrads<T> convlstm_step_backward(const ConvLSTMStepCache<T>& cache, const ConvLSTMParams<T>& p,
                                        const Tensor<T>& dh_next, const Tensor<T>& dc_next,
                                        ConvLSTMParams<T>& dp) {
    const std::size_t n = dh_next.numel();
    const auto& gi = cache.gate[kGateI];
    const auto& gf = cache.gate[kGateF];
    const auto& gg = cache.gate[kGateC];
    const auto& go = cache.gate[kGateO];

    Tensor<T> dc(dc_next.shape());
    std::array<Tensor<T>, 4> dz;
    for (int q = 0; q < 4; ++q) dz[q] = Tensor<T>(dh_next.shape());

    for (std::size_t i = 0; i < n; ++i) {
        T tc = cache.tanh_c_next[i];
        T dci = dc_next[i] + dh_next[i] * go[i] * (T(1) - tc * tc);
        dc[i] = dci;
        dz[kGateO][i] = dh_next[i] * tc * go[i] * (T(1) - go[i]);
        dz[kGateI][i] = dci * gg[i] * gi[i] * (T(1) - gi[i]);
        dz[kGateF][i] = dci * cache.c_prev[i] * gf[i] * (T(1) - gf[i]);
        dz[kGateC][i] = dci * gi[i] * (T(1) - gg[i] * gg[i]);
    }

    ConvLSTMGrads<T> out;
    out.dx = Tensor<T>(cache.x.shape(), T(0));
    out.dh_prev = Tensor<T>(cache.h_prev.shape(), T(0));
    out.dc_prev = Tensor<T>(dc.shape());
    for (std::size_t i = 0; i < n; ++i) out.dc_prev[i] = dc[i] * gf[i];

    const std::size_t pad = (p.ksize - 1) / 2;
    for (int q = 0; q < 4; ++q) {
        auto gx = conv2d_backward(cache.x, p.wx[q], true, 1, pad, 1, dz[q]);
        for (std::size_t i = 0; i < out.dx.numel(); ++i) out.dx[i] += gx.dx[i];
        for (std::size_t i = 0; i < dp.wx[q].numel(); ++i) dp.wx[q][i] += gx.dweight[i];
        for (std::size_t i = 0; i < dp.b[q].numel(); ++i) dp.b[q][i] += (*gx.dbias)[i];
        auto gh = conv2d_backward(cache.h_prev, p.wh[q], false, 1, pad, 1, dz[q]);
        for (std::size_t i = 0; i < out.dh_prev.numel(); ++i) out.dh_prev[i] += gh.dx[i];
        for (std::size_t i = 0; i < dp.wh[q].numel(); ++i) dp.wh[q][i] += gh.dweight[i];
    }
    return out;
}

// Fold over a sequence from a zero state, returning the final hidden map.
template <typename T>
Tensor<T> convlstm_forward(const std::vector<Tensor<T>>& seq, const ConvLSTMParams<T>& p) {
    if (seq.empty()) throw std::invalid_argument("convlstm_forward: empty sequence");
    const Tensor<T>& first = seq.front();
    ConvLSTMState<T> st = ConvLSTMState<T>::zeros(first.extent(0), p.hidden, first.extent(2), first.extent(3));
    for (const Tensor<T>& x : seq) st = convlstm_step(x, st, p);
    return st.h;
}

// Model layer: the input feature map is a single timestep (T = 1), stepped
// once from a zero state.
template <typename T>
class ConvLSTMLayer : public Layer<T> {
public:
    ConvLSTMLayer(std::string name, std::size_t in_ch, std::size_t hidden, std::size_t ksize)
        : Layer<T>(std::move(name)), params_(in_ch, hidden, ksize), grads_(in_ch, hidden, ksize) {}

    std::string kind() const override { return "convlstm"; }

    void init(Rng& rng) override {
        for (int q = 0; q < 4; ++q) {
            params_.wx[q] = he_normal_init<T>(rng, params_.wx[q].shape(),
                                              params_.in_ch * params_.ksize * params_.ksize);
            params_.wh[q] = he_normal_init<T>(rng, params_.wh[q].shape(),
                                              params_.hidden * params_.ksize * params_.ksize);
            // forget-gate bias starts at +1
            params_.b[q].fill(q == kGateF ? T(1) : T(0));
        }
    }

    Tensor<T> forward(const Tensor<T>& x, bool) override {
        ConvLSTMState<T> st = ConvLSTMState<T>::zeros(x.extent(0), params_.hidden, x.extent(2), x.extent(3));
        ConvLSTMState<T> out = convlstm_step(x, st, params_, &cache_);
        return out.h;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> dc(dy.shape(), T(0));
        auto g = convlstm_step_backward(cache_, params_, dy, dc, grads_);
        return std::move(g.dx);
    }

    void collect_params(std::vector<ParamRef<T>>& out) override {
        static const char* gate_names[4] = {"i", "f", "c", "o"};
        for (int q = 0; q < 4; ++q) {
            out.push_back({this->name() + ".wx_" + gate_names[q], &params_.wx[q], &grads_.wx[q], true});
            out.push_back({this->name() + ".wh_" + gate_names[q], &params_.wh[q], &grads_.wh[q], true});
            out.push_back({this->name() + ".b_" + gate_names[q], &params_.b[q], &grads_.b[q], true});
        }
    }

    Shape output_shape(const Shape& in) const override { return {in[0], params_.hidden, in[2], in[3]}; }

    std::int64_t param_count() const override {
        std::int64_t k2 = static_cast<std::int64_t>(params_.ksize * params_.ksize);
        return 4 * ((static_cast<std::int64_t>(params_.in_ch) + params_.hidden) * k2 * params_.hidden +
                    static_cast<std::int64_t>(params_.hidden));
    }

    std::int64_t flop_count(const Shape& in) const override {
        std::int64_t positions = static_cast<std::int64_t>(in[2] * in[3]);
        std::int64_t k2 = static_cast<std::int64_t>(params_.ksize * params_.ksize);
        std::int64_t conv = 2 * positions * static_cast<std::int64_t>(params_.hidden) * k2 *
                            (static_cast<std::int64_t>(params_.in_ch) + params_.hidden);
        // gate nonlinearities (4) + cell update (3) + output (2), per hidden element
        std::int64_t elem = 9 * positions * static_cast<std::int64_t>(params_.hidden);
        return 4 * conv + elem;
    }

    ConvLSTMParams<T>& params() { return params_; }

private:
    ConvLSTMParams<T> params_, grads_;
    ConvLSTMStepCache<T> cache_;
};

}  // namespace xnet
