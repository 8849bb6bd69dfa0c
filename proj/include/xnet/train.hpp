#pragma once

#include <cmath>
#include <map>
#include <sstream>

#include "model.hpp"
#include "ops.hpp"
#include "rng.hpp"

namespace xnet {

struct TrainConfig {
    double learning_rate = 4e-4;
    std::size_t epochs = 10;
    std::size_t batch_size = 16;
    std::uint64_t seed = 3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
    Tensor<T> m, v;
    std::size_t t = 0;

    explicit AdamState(const Shape& shape) : m(shape, T(0)), v(shape, T(0)) {}
};

template <typename T>
void adam_step(Tensor<T>& param, const Tensor<T>& grad, AdamState<T>& st, const TrainConfig& cfg,
               const std::string& param_name = "") {
    check_same_shape(param, grad, "adam_step");
    for (std::size_t i = 0; i < grad.numel(); ++i)
        if (!std::isfinite(static_cast<double>(grad[i])))
            throw NumericError("adam_step: non-finite gradient in " + param_name);
    st.t += 1;
    const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
    const T corr1 = T(1) - static_cast<T>(std::pow(cfg.beta1, static_cast<double>(st.t)));
    const T corr2 = T(1) - static_cast<T>(std::pow(cfg.beta2, static_cast<double>(st.t)));
    const T lr = static_cast<T>(cfg.learning_rate);
    const T eps = static_cast<T>(cfg.epsilon);
    for (std::size_t i = 0; i < param.numel(); ++i) {
        st.m[i] = b1 * st.m[i] + (T(1) - b1) * grad[i];
        st.v[i] = b2 * st.v[i] + (T(1) - b2) * grad[i] * grad[i];
        T mhat = st.m[i] / corr1;
        T vhat = st.v[i] / corr2;
        param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

// Shuffle 0..n-1 with the seeded generator, then cut train/val/test as
// floor(n*train), floor(n*val) and the remainder.
struct DatasetSplit {
    std::vector<std::size_t> train, val, test;
};

inline DatasetSplit split_dataset(std::size_t n, double train_frac, double val_frac, double test_frac,
                                  std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("split_dataset: n must be > 0");
    if (train_frac < 0 || val_frac < 0 || test_frac < 0 ||
        train_frac + val_frac + test_frac > 1.0 + 1e-9)
        throw std::invalid_argument("split_dataset: invalid fractions");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(seed);
    rng.shuffle(idx);
    std::size_t n_train = static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(n) + 1e-9));
    std::size_t n_val = static_cast<std::size_t>(std::floor(val_frac * static_cast<double>(n) + 1e-9));
    if (n_train + n_val > n) throw std::invalid_argument("split_dataset: fractions exceed n");
    DatasetSplit s;
    s.train.assign(idx.begin(), idx.begin() + n_train);
    s.val.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
    s.test.assign(idx.begin() + n_train + n_val, idx.end());
    return s;
}

struct EpochLog {
    std::size_t epoch;
    double loss;
    double train_accuracy;
};

inline std::string training_log_csv(const std::vector<EpochLog>& log) {
    std::ostringstream os;
    os << "epoch,loss,train_accuracy\n";
    os.precision(17);
    for (const EpochLog& e : log) os << e.epoch << "," << e.loss << "," << e.train_accuracy << "\n";
    return os.str();
}

namespace detail {

template <typename T>
Tensor<T> gather_rows4(const Tensor<T>& x, const std::vector<std::size_t>& rows) {
    Shape s = x.shape();
    s[0] = rows.size();
    Tensor<T> out(s);
    const std::size_t stride = x.numel() / x.extent(0);
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(x.data() + rows[i] * stride, x.data() + (rows[i] + 1) * stride,
                  out.data() + i * stride);
    return out;
}

}  // namespace detail

// Single-threaded minibatch loop: per-epoch shuffle from the seeded stream,
// softmax cross-entropy loss, Adam on every trainable parameter. Identical
// config and data give bit-identical logs and weights.
template <typename T>
std::vector<EpochLog> fit(ModelGraph<T>& g, const Tensor<T>& inputs, const Tensor<T>& labels,
                          const TrainConfig& cfg) {
    const std::size_t n = inputs.extent(0);
    if (labels.extent(0) != n) throw ShapeError("fit: input/label row count mismatch");
    if (cfg.batch_size < 1) throw std::invalid_argument("fit: batch_size must be >= 1");

    auto params = g.params();
    std::vector<AdamState<T>> states;
    states.reserve(params.size());
    for (const ParamRef<T>& p : params)
        states.emplace_back(p.trainable ? p.value->shape() : Shape{1});

    Rng shuffle_rng(cfg.seed);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    std::vector<EpochLog> log;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t correct = 0, seen = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            std::size_t end = std::min(start + cfg.batch_size, n);
            std::vector<std::size_t> batch(order.begin() + start, order.begin() + end);
            Tensor<T> bx = detail::gather_rows4(inputs, batch);
            Tensor<T> by = detail::gather_rows4(labels, batch);
            Tensor<T> logits = g.forward(bx, true);
            auto r = softmax_xent(logits, by);
            loss_sum += static_cast<double>(r.loss) * static_cast<double>(batch.size());
            for (std::size_t i = 0; i < batch.size(); ++i) {
                std::size_t pred = 0, truth = 0;
                for (std::size_t j = 1; j < g.classes(); ++j) {
                    if (r.probs.at2(i, j) > r.probs.at2(i, pred)) pred = j;
                    if (by.at2(i, j) > by.at2(i, truth)) truth = j;
                }
                if (pred == truth) ++correct;
            }
            seen += batch.size();
            g.zero_grads();
            g.backward(softmax_xent_backward(r.probs, by));
            for (std::size_t pi = 0; pi < params.size(); ++pi)
                if (params[pi].trainable)
                    adam_step(*params[pi].value, *params[pi].grad, states[pi], cfg, params[pi].name);
        }
        log.push_back({epoch, loss_sum / static_cast<double>(seen),
                       static_cast<double>(correct) / static_cast<double>(seen)});
    }
    return log;
}

}  // namespace xnet
