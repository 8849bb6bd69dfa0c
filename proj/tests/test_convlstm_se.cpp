#include "test_util.hpp"

using namespace xnet;
using testutil::max_abs_diff;
using testutil::rand_tensor;

namespace {

ConvLSTMParams<double> random_params(Rng& rng, std::size_t in, std::size_t hidden, std::size_t k) {
    ConvLSTMParams<double> p(in, hidden, k);
    for (int q = 0; q < 4; ++q) {
        p.wx[q] = rand_tensor<double>(rng, p.wx[q].shape());
        p.wh[q] = rand_tensor<double>(rng, p.wh[q].shape());
        p.b[q] = rand_tensor<double>(rng, p.b[q].shape());
    }
    return p;
}

}  // namespace

TEST_CASE("convlstm step with zero parameters") {
    ConvLSTMParams<double> p(2, 3, 1);
    Tensor<double> x({1, 2, 2, 2}, 0.7);
    auto st = ConvLSTMState<double>::zeros(1, 3, 2, 2);
    ConvLSTMStepCache<double> cache;
    auto out = convlstm_step(x, st, p, &cache);
    for (std::size_t i = 0; i < out.h.numel(); ++i) {
        REQUIRE(cache.gate[kGateI][i] == 0.5);
        REQUIRE(cache.gate[kGateF][i] == 0.5);
        REQUIRE(cache.gate[kGateO][i] == 0.5);
        REQUIRE(cache.gate[kGateC][i] == 0.0);
        REQUIRE(out.c[i] == 0.0);
        REQUIRE(out.h[i] == 0.0);
    }
}

TEST_CASE("convlstm saturated input gate still yields zero hidden state") {
    ConvLSTMParams<double> p(2, 3, 1);
    p.b[kGateI].fill(20.0);
    Tensor<double> x({1, 2, 2, 2}, 0.3);
    auto st = ConvLSTMState<double>::zeros(1, 3, 2, 2);
    ConvLSTMStepCache<double> cache;
    auto out = convlstm_step(x, st, p, &cache);
    for (std::size_t i = 0; i < out.h.numel(); ++i) {
        REQUIRE(cache.gate[kGateI][i] > 0.999);
        REQUIRE(out.c[i] == 0.0);  // candidate gate is tanh(0) = 0
        REQUIRE(out.h[i] == 0.0);
    }
}

TEST_CASE("convlstm step vs scalar hand computation") {
    Rng rng(53);
    ConvLSTMParams<double> p = random_params(rng, 2, 2, 1);
    Tensor<double> x = rand_tensor<double>(rng, {1, 2, 2, 2});
    ConvLSTMState<double> st{rand_tensor<double>(rng, {1, 2, 2, 2}),
                             rand_tensor<double>(rng, {1, 2, 2, 2})};
    auto out = convlstm_step(x, st, p);

    auto sigm = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t h = 0; h < 2; ++h)
            for (std::size_t w = 0; w < 2; ++w) {
                double z[4];
                for (int q = 0; q < 4; ++q) {
                    double acc = p.b[q][c];
                    for (std::size_t ic = 0; ic < 2; ++ic) {
                        acc += p.wx[q][(c * 2 + ic)] * x.at4(0, ic, h, w);
                        acc += p.wh[q][(c * 2 + ic)] * st.h.at4(0, ic, h, w);
                    }
                    z[q] = acc;
                }
                double gi = sigm(z[kGateI]), gf = sigm(z[kGateF]);
                double gg = std::tanh(z[kGateC]), go = sigm(z[kGateO]);
                double cn = gf * st.c.at4(0, c, h, w) + gi * gg;
                double hn = go * std::tanh(cn);
                REQUIRE(std::abs(out.c.at4(0, c, h, w) - cn) < 1e-6);
                REQUIRE(std::abs(out.h.at4(0, c, h, w) - hn) < 1e-6);
            }
}

TEST_CASE("convlstm forward folds the step") {
    Rng rng(59);
    ConvLSTMParams<double> p = random_params(rng, 2, 3, 1);
    std::vector<Tensor<double>> seq;
    for (int t = 0; t < 3; ++t) seq.push_back(rand_tensor<double>(rng, {1, 2, 3, 3}));

    // length-1 sequence equals a single step from the zero state
    auto st0 = ConvLSTMState<double>::zeros(1, 3, 3, 3);
    auto one = convlstm_step(seq[0], st0, p);
    Tensor<double> folded1 = convlstm_forward(std::vector<Tensor<double>>{seq[0]}, p);
    REQUIRE(max_abs_diff(one.h, folded1) == 0.0);

    // explicit iteration oracle for length 3
    auto st = ConvLSTMState<double>::zeros(1, 3, 3, 3);
    for (const auto& xt : seq) st = convlstm_step(xt, st, p);
    Tensor<double> folded = convlstm_forward(seq, p);
    REQUIRE(max_abs_diff(st.h, folded) == 0.0);

    REQUIRE_THROWS_AS(convlstm_forward(std::vector<Tensor<double>>{}, p), std::invalid_argument);
}

TEST_CASE("convlstm zero-weight constant sequence gives zero") {
    ConvLSTMParams<double> p(2, 3, 1);
    std::vector<Tensor<double>> seq(2, Tensor<double>({1, 2, 2, 2}, 1.0));
    Tensor<double> h = convlstm_forward(seq, p);
    for (std::size_t i = 0; i < h.numel(); ++i) REQUIRE(h[i] == 0.0);
}

TEST_CASE("hidden state stays inside (-1, 1)") {
    Rng rng(61);
    for (int trial = 0; trial < 20; ++trial) {
        ConvLSTMParams<double> p = random_params(rng, 2, 3, 1);
        for (int q = 0; q < 4; ++q)
            for (std::size_t i = 0; i < p.b[q].numel(); ++i) p.b[q][i] *= 10.0;
        Tensor<double> x = rand_tensor<double>(rng, {1, 2, 2, 2}, -5.0, 5.0);
        ConvLSTMState<double> st{rand_tensor<double>(rng, {1, 3, 2, 2}, -0.99, 0.99),
                                 rand_tensor<double>(rng, {1, 3, 2, 2}, -3.0, 3.0)};
        auto out = convlstm_step(x, st, p);
        for (std::size_t i = 0; i < out.h.numel(); ++i) {
            REQUIRE(out.h[i] > -1.0);
            REQUIRE(out.h[i] < 1.0);
        }
    }
}

TEST_CASE("se with zero weights halves the input") {
    SEBlock<double> se("se", 4, 2);  // weights default to zero
    Rng rng(3);
    Tensor<double> x = rand_tensor<double>(rng, {2, 4, 3, 3});
    Tensor<double> y = se.forward(x, false);
    for (std::size_t i = 0; i < y.numel(); ++i) REQUIRE(std::abs(y[i] - 0.5 * x[i]) < 1e-12);
}

TEST_CASE("se squeeze of a constant channel is exact") {
    Tensor<double> x({1, 2, 4, 4});
    for (std::size_t h = 0; h < 4; ++h)
        for (std::size_t w = 0; w < 4; ++w) {
            x.at4(0, 0, h, w) = 1.25;
            x.at4(0, 1, h, w) = -0.5;
        }
    Tensor<double> z = global_avg_pool(x);
    REQUIRE(z.at2(0, 0) == 1.25);
    REQUIRE(z.at2(0, 1) == -0.5);
}

TEST_CASE("se vs composition oracle") {
    Rng rng(67);
    SEBlock<double> se("se", 8, 2);
    se.init(rng);
    Tensor<double> x = rand_tensor<double>(rng, {2, 8, 3, 3});
    Tensor<double> got = se.forward(x, false);

    Tensor<double> z = global_avg_pool(x);
    Tensor<double> u = fc_forward(z, se.fc_reduce().weight(), se.fc_reduce().bias());
    Tensor<double> v = fc_forward(relu(u), se.fc_expand().weight(), se.fc_expand().bias());
    Tensor<double> a = sigmoid(v);
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t c = 0; c < 8; ++c)
            for (std::size_t h = 0; h < 3; ++h)
                for (std::size_t w = 0; w < 3; ++w)
                    REQUIRE(std::abs(got.at4(n, c, h, w) - a.at2(n, c) * x.at4(n, c, h, w)) < 1e-6);
}

TEST_CASE("se scale factors lie in (0,1) and never amplify") {
    Rng rng(71);
    SEBlock<double> se("se", 8, 4);
    se.init(rng);
    Tensor<double> x = rand_tensor<double>(rng, {1, 8, 4, 4}, -2.0, 2.0);
    Tensor<double> y = se.forward(x, false);
    for (std::size_t i = 0; i < y.numel(); ++i) REQUIRE(std::abs(y[i]) <= std::abs(x[i]));
}

TEST_CASE("squeeze is homogeneous in per-channel rescaling") {
    Rng rng(73);
    Tensor<double> x = rand_tensor<double>(rng, {1, 4, 3, 3}, 0.1, 1.0);
    const double lambda = 2.75;
    Tensor<double> scaled = x;
    for (std::size_t h = 0; h < 3; ++h)
        for (std::size_t w = 0; w < 3; ++w) scaled.at4(0, 2, h, w) *= lambda;
    Tensor<double> z1 = global_avg_pool(x);
    Tensor<double> z2 = global_avg_pool(scaled);
    REQUIRE(std::abs(z2.at2(0, 2) - lambda * z1.at2(0, 2)) < 1e-12);
}

TEST_CASE("se rejects non-divisible ratio") {
    REQUIRE_THROWS_AS(SEBlock<double>("se", 6, 4), std::invalid_argument);
}
