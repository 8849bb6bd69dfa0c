#pragma once

#include <algorithm>
#include <limits>
#include <sstream>
#include <vector>

#include "tensor.hpp"

namespace xnet {

struct RocPoint {
    double threshold, fpr, tpr;
};

struct RocCurve {
    std::vector<RocPoint> points;
    double auc = 0.0;
    bool defined = true;  // false when the class has no positives or no negatives
};

struct ClassMetrics {
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    bool degenerate = false;  // a zero-denominator rate was forced to 0
};

struct EvalReport {
    std::vector<std::vector<std::size_t>> confusion;  // [true][pred]
    double accuracy = 0.0;
    std::vector<ClassMetrics> per_class;
    double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
    std::vector<RocCurve> roc;
};

// One-vs-rest ROC for one class. Thresholds sweep the distinct score values
// from high to low; AUC by trapezoidal integration, which equals the
// pair-ranking formulation with ties counted one half.
inline RocCurve roc_curve_binary(const std::vector<double>& scores, const std::vector<bool>& positive) {
    RocCurve out;
    std::size_t pos = 0, neg = 0;
    for (bool p : positive) (p ? pos : neg)++;
    if (pos == 0 || neg == 0) {
        out.defined = false;
        return out;
    }
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    out.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    double auc = 0.0, prev_fpr = 0.0, prev_tpr = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        double thr = scores[order[i]];
        // consume the whole tie group at this threshold
        while (i < order.size() && scores[order[i]] == thr) {
            if (positive[order[i]]) ++tp;
            else ++fp;
            ++i;
        }
        double fpr = static_cast<double>(fp) / static_cast<double>(neg);
        double tpr = static_cast<double>(tp) / static_cast<double>(pos);
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        out.points.push_back({thr, fpr, tpr});
        prev_fpr = fpr;
        prev_tpr = tpr;
    }
    out.auc = auc;
    return out;
}

// probs: n x k probability rows; labels: n x k one-hot.
template <typename T>
EvalReport evaluate_predictions(const Tensor<T>& probs, const Tensor<T>& labels) {
    check_same_shape(probs, labels, "evaluate_predictions");
    const std::size_t n = probs.extent(0), k = probs.extent(1);
    EvalReport r;
    r.confusion.assign(k, std::vector<std::size_t>(k, 0));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t pred = 0, truth = 0;
        for (std::size_t j = 1; j < k; ++j) {
            if (probs.at2(i, j) > probs.at2(i, pred)) pred = j;
            if (labels.at2(i, j) > labels.at2(i, truth)) truth = j;
        }
        r.confusion[truth][pred] += 1;
        if (pred == truth) ++correct;
    }
    r.accuracy = static_cast<double>(correct) / static_cast<double>(n);

    r.per_class.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t tp = r.confusion[c][c], fp = 0, fn = 0;
        for (std::size_t o = 0; o < k; ++o) {
            if (o == c) continue;
            fp += r.confusion[o][c];
            fn += r.confusion[c][o];
        }
        ClassMetrics& m = r.per_class[c];
        if (tp + fp == 0) {
            m.precision = 0.0;
            m.degenerate = true;
        } else {
            m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        }
        if (tp + fn == 0) {
            m.recall = 0.0;
            m.degenerate = true;
        } else {
            m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
        }
        m.f1 = (m.precision + m.recall) > 0.0
                   ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                   : 0.0;
        r.macro_precision += m.precision;
        r.macro_recall += m.recall;
        r.macro_f1 += m.f1;
    }
    r.macro_precision /= static_cast<double>(k);
    r.macro_recall /= static_cast<double>(k);
    r.macro_f1 /= static_cast<double>(k);

    for (std::size_t c = 0; c < k; ++c) {
        std::vector<double> scores(n);
        std::vector<bool> pos(n);
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = static_cast<double>(probs.at2(i, c));
            pos[i] = labels.at2(i, c) == T(1);
        }
        r.roc.push_back(roc_curve_binary(scores, pos));
    }
    return r;
}

inline std::string confusion_csv(const EvalReport& r) {
    std::ostringstream os;
    for (const auto& row : r.confusion) {
        for (std::size_t j = 0; j < row.size(); ++j) os << (j ? "," : "") << row[j];
        os << "\n";
    }
    return os.str();
}

inline std::string metrics_csv(const EvalReport& r, const std::vector<std::string>& class_names) {
    std::ostringstream os;
    os.precision(10);
    os << "class,precision,recall,f1\n";
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
        const ClassMetrics& m = r.per_class[c];
        os << (c < class_names.size() ? class_names[c] : "class" + std::to_string(c)) << ","
           << m.precision << "," << m.recall << "," << m.f1;
        if (m.degenerate) os << ",zero-denominator";
        os << "\n";
    }
    os << "macro," << r.macro_precision << "," << r.macro_recall << "," << r.macro_f1 << "\n";
    os << "accuracy," << r.accuracy << ",,\n";
    return os.str();
}

inline std::string roc_csv(const RocCurve& c) {
    std::ostringstream os;
    os.precision(10);
    if (!c.defined) {
        os << "# auc undefined (single-class labels)\n";
        return os.str();
    }
    os << "# auc " << c.auc << "\n";
    os << "threshold,fpr,tpr\n";
    for (const RocPoint& p : c.points) os << p.threshold << "," << p.fpr << "," << p.tpr << "\n";
    return os.str();
}

}  // namespace xnet
