#include <algorithm>
#include <set>

#include "test_util.hpp"

using namespace xnet;
using testutil::rand_tensor;

namespace {

// O(n^2) ranking oracle: positives ranked above negatives, ties count half.
double auc_pair_oracle(const std::vector<double>& scores, const std::vector<bool>& positive) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!positive[i]) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (positive[j]) continue;
            ++pairs;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

// tiny dataset: three well-separated 2-D blobs lifted into a 4-D image shape
void make_blobs(Rng& rng, std::size_t per_class, Tensor<float>& x, Tensor<float>& y) {
    const std::size_t n = 3 * per_class;
    x = Tensor<float>({n, 1, 2, 1});
    y = Tensor<float>({n, 3}, 0.0f);
    const double centers[3][2] = {{2.0, 0.0}, {-1.0, 2.0}, {-1.0, -2.0}};
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t c = i / per_class;
        x.at4(i, 0, 0, 0) = static_cast<float>(centers[c][0] + rng.uniform(-0.3, 0.3));
        x.at4(i, 0, 1, 0) = static_cast<float>(centers[c][1] + rng.uniform(-0.3, 0.3));
        y.at2(i, c) = 1.0f;
    }
}

ModelGraph<float> make_toy_graph() {
    ModelGraph<float> g({1, 1, 2, 1}, 3);
    g.add(std::make_unique<Flatten<float>>("flatten"));
    g.add(std::make_unique<Fc<float>>("fc1", 2, 16));
    g.add(std::make_unique<ReLU<float>>("fc1.relu"));
    g.add(std::make_unique<Fc<float>>("fc2", 16, 3));
    return g;
}

}  // namespace

TEST_CASE("split_dataset reproduces the published split sizes") {
    DatasetSplit a = split_dataset(4575, 0.68, 0.16, 0.16, 3);
    REQUIRE(a.train.size() == 3111);
    REQUIRE(a.val.size() == 732);
    REQUIRE(a.test.size() == 732);

    DatasetSplit b = split_dataset(6140, 0.72, 0.08, 0.20, 3);
    REQUIRE(b.train.size() == 4420);
    REQUIRE(b.val.size() == 491);
    REQUIRE(b.test.size() == 1229);

    DatasetSplit c = split_dataset(10, 1.0, 0.0, 0.0, 3);
    REQUIRE(c.train.size() == 10);
    REQUIRE(c.val.empty());
    REQUIRE(c.test.empty());

    REQUIRE_THROWS_AS(split_dataset(0, 0.5, 0.25, 0.25, 3), std::invalid_argument);
}

TEST_CASE("split_dataset partitions the index range") {
    Rng rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        std::size_t n = 1 + rng.index(500);
        double train = rng.uniform(0.0, 1.0);
        double val = rng.uniform(0.0, 1.0 - train);
        DatasetSplit s = split_dataset(n, train, val, 1.0 - train - val, 7);
        std::set<std::size_t> all;
        for (auto* part : {&s.train, &s.val, &s.test})
            for (std::size_t i : *part) REQUIRE(all.insert(i).second);
        REQUIRE(all.size() == n);
        REQUIRE(*all.rbegin() == n - 1);
    }
}

TEST_CASE("adam with zero gradient is the identity") {
    Tensor<double> p({4}, 1.5);
    Tensor<double> g({4}, 0.0);
    AdamState<double> st(p.shape());
    TrainConfig cfg;
    adam_step(p, g, st, cfg);
    for (std::size_t i = 0; i < 4; ++i) REQUIRE(p[i] == 1.5);
}

TEST_CASE("adam first step magnitude equals the learning rate") {
    Tensor<double> p({1}, 1.0);
    Tensor<double> g({1}, 0.37);
    AdamState<double> st(p.shape());
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.epsilon = 0.0;  // mhat = g, vhat = g^2, update = lr * sign(g)
    adam_step(p, g, st, cfg);
    REQUIRE(std::abs((1.0 - p[0]) - cfg.learning_rate) < 1e-12);
}

TEST_CASE("adam three steps vs hand iteration on x^2") {
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    Tensor<double> p({1}, 1.0);
    AdamState<double> st(p.shape());
    // 64-bit hand iteration of the update equations
    double x = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 3; ++t) {
        Tensor<double> g({1}, 2.0 * p[0]);
        adam_step(p, g, st, cfg);

        double grad = 2.0 * x;
        m = 0.9 * m + 0.1 * grad;
        v = 0.999 * v + 0.001 * grad * grad;
        double mhat = m / (1.0 - std::pow(0.9, t));
        double vhat = v / (1.0 - std::pow(0.999, t));
        x -= 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
        REQUIRE(std::abs(p[0] - x) < 1e-10);
    }
}

TEST_CASE("adam rejects non-finite gradients") {
    Tensor<double> p({1}, 1.0);
    Tensor<double> g({1}, std::numeric_limits<double>::quiet_NaN());
    AdamState<double> st(p.shape());
    TrainConfig cfg;
    REQUIRE_THROWS_AS(adam_step(p, g, st, cfg, "w"), NumericError);
}

TEST_CASE("fit decreases loss on separable blobs") {
    Rng rng(3);
    Tensor<float> x, y;
    make_blobs(rng, 10, x, y);
    ModelGraph<float> g = make_toy_graph();
    Rng init(3);
    g.init(init);
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.epochs = 10;
    cfg.batch_size = 10;
    auto log = fit(g, x, y, cfg);
    REQUIRE(log.size() == 10);
    for (std::size_t e = 1; e < log.size(); ++e) REQUIRE(log[e].loss < log[e - 1].loss);
}

TEST_CASE("fit is bit-deterministic under a fixed seed") {
    Rng rng(3);
    Tensor<float> x, y;
    make_blobs(rng, 10, x, y);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 8;
    std::vector<EpochLog> logs[2];
    for (int run = 0; run < 2; ++run) {
        ModelGraph<float> g = make_toy_graph();
        Rng init(3);
        g.init(init);
        logs[run] = fit(g, x, y, cfg);
    }
    REQUIRE(training_log_csv(logs[0]) == training_log_csv(logs[1]));
    for (std::size_t e = 0; e < logs[0].size(); ++e)
        REQUIRE(std::memcmp(&logs[0][e].loss, &logs[1][e].loss, sizeof(double)) == 0);
}

TEST_CASE("fit with zero learning rate repeats the loss") {
    Rng rng(3);
    Tensor<float> x, y;
    make_blobs(rng, 5, x, y);
    ModelGraph<float> g = make_toy_graph();
    Rng init(3);
    g.init(init);
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.epochs = 3;
    cfg.batch_size = 15;  // one batch per epoch, so shuffling cannot change the mean loss
    auto log = fit(g, x, y, cfg);
    for (std::size_t e = 1; e < log.size(); ++e)
        REQUIRE(std::abs(log[e].loss - log[0].loss) < 1e-6);
}

TEST_CASE("evaluate on perfect predictions") {
    Tensor<double> probs({6, 3}, 0.0);
    Tensor<double> labels({6, 3}, 0.0);
    for (std::size_t i = 0; i < 6; ++i) {
        probs.at2(i, i % 3) = 1.0;
        labels.at2(i, i % 3) = 1.0;
    }
    EvalReport r = evaluate_predictions(probs, labels);
    REQUIRE(r.accuracy == 1.0);
    REQUIRE(r.macro_f1 == 1.0);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t o = 0; o < 3; ++o)
            REQUIRE(r.confusion[c][o] == (c == o ? 2u : 0u));
}

TEST_CASE("evaluate hand confusion arithmetic") {
    // realize confusion [[8,2],[3,7]]
    Tensor<double> probs({20, 2}, 0.0);
    Tensor<double> labels({20, 2}, 0.0);
    std::size_t row = 0;
    auto emit = [&](std::size_t truth, std::size_t pred, std::size_t count) {
        for (std::size_t k = 0; k < count; ++k, ++row) {
            labels.at2(row, truth) = 1.0;
            probs.at2(row, pred) = 0.9;
            probs.at2(row, 1 - pred) = 0.1;
        }
    };
    emit(0, 0, 8);
    emit(0, 1, 2);
    emit(1, 0, 3);
    emit(1, 1, 7);
    EvalReport r = evaluate_predictions(probs, labels);
    REQUIRE(r.confusion[0][0] == 8);
    REQUIRE(r.confusion[0][1] == 2);
    REQUIRE(r.confusion[1][0] == 3);
    REQUIRE(r.confusion[1][1] == 7);
    REQUIRE(std::abs(r.per_class[0].precision - 8.0 / 11.0) < 1e-12);
    REQUIRE(std::abs(r.per_class[0].recall - 8.0 / 10.0) < 1e-12);
    REQUIRE(std::abs(r.per_class[0].f1 - 16.0 / 21.0) < 1e-12);
    // accuracy = trace / total; micro recall equals accuracy for single-label data
    REQUIRE(std::abs(r.accuracy - 15.0 / 20.0) < 1e-12);
}

TEST_CASE("732-sample accuracy granularity") {
    // 13 errors on 732 samples lands exactly on the published granularity
    double acc = 719.0 / 732.0;
    REQUIRE(std::abs(acc - 0.9822404371584699) < 1e-12);
    REQUIRE(std::abs(acc - 0.9822) < 5e-5);
}

TEST_CASE("roc fixed points") {
    std::vector<double> sep{0.9, 0.8, 0.2, 0.1};
    std::vector<bool> pos{true, true, false, false};
    RocCurve c = roc_curve_binary(sep, pos);
    REQUIRE(c.defined);
    REQUIRE(c.auc == 1.0);

    std::vector<double> flat{0.5, 0.5, 0.5, 0.5};
    RocCurve f = roc_curve_binary(flat, pos);
    REQUIRE(f.auc == 0.5);

    std::vector<bool> allpos{true, true, true, true};
    RocCurve u = roc_curve_binary(sep, allpos);
    REQUIRE_FALSE(u.defined);
}

TEST_CASE("roc auc vs pairwise-count oracle") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t n = 5 + rng.index(196);
        std::vector<double> scores(n);
        std::vector<bool> pos(n);
        bool any_pos = false, any_neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            // quantized scores so ties actually occur
            scores[i] = static_cast<double>(rng.index(12)) / 11.0;
            pos[i] = rng.index(2) == 1;
            (pos[i] ? any_pos : any_neg) = true;
        }
        if (!any_pos || !any_neg) continue;
        RocCurve c = roc_curve_binary(scores, pos);
        REQUIRE(std::abs(c.auc - auc_pair_oracle(scores, pos)) <= 1e-12);
        for (std::size_t i = 1; i < c.points.size(); ++i)
            REQUIRE(c.points[i].fpr >= c.points[i - 1].fpr);
    }
}

TEST_CASE("metrics handle zero-denominator classes") {
    // class 2 never predicted and never true
    Tensor<double> probs({4, 3}, 0.0);
    Tensor<double> labels({4, 3}, 0.0);
    for (std::size_t i = 0; i < 4; ++i) {
        probs.at2(i, i % 2) = 1.0;
        labels.at2(i, i % 2) = 1.0;
    }
    EvalReport r = evaluate_predictions(probs, labels);
    REQUIRE(r.per_class[2].degenerate);
    REQUIRE(r.per_class[2].precision == 0.0);
    REQUIRE(r.per_class[2].recall == 0.0);
    REQUIRE_FALSE(r.roc[2].defined);
    std::string csv = metrics_csv(r, {"a", "b", "c"});
    REQUIRE(csv.find("zero-denominator") != std::string::npos);
}
