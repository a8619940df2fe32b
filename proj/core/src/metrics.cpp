#include "amdmil/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "amdmil/error.hpp"

namespace amdmil {

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* op) {
    if (a == 0) throw ConfigError(std::string(op) + ": empty input");
    if (a != b) throw ConfigError(std::string(op) + ": length mismatch");
}

}  // namespace

double metric_acc(const std::vector<std::size_t>& y_true, const std::vector<std::size_t>& y_pred) {
    check_lengths(y_true.size(), y_pred.size(), "metric_acc");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) hits += y_true[i] == y_pred[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(y_true.size());
}

double metric_macro_f1(const std::vector<std::size_t>& y_true, const std::vector<std::size_t>& y_pred,
                       std::size_t classes) {
    check_lengths(y_true.size(), y_pred.size(), "metric_macro_f1");
    if (classes == 0) throw ConfigError("metric_macro_f1: classes must be >= 1");
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < y_true.size(); ++i) {
            const bool t = y_true[i] == c;
            const bool p = y_pred[i] == c;
            tp += (t && p) ? 1 : 0;
            fp += (!t && p) ? 1 : 0;
            fn += (t && !p) ? 1 : 0;
        }
        const std::size_t denom = 2 * tp + fp + fn;
        if (denom > 0) total += 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
    }
    return total / static_cast<double>(classes);
}

double metric_auc(const std::vector<bool>& positive, const std::vector<double>& scores) {
    check_lengths(positive.size(), scores.size(), "metric_auc");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double pos_rank_sum = 0.0;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        // ranks i+1 .. j+1 share their mean
        const double midrank = 0.5 * static_cast<double>(i + 1 + j + 1);
        for (std::size_t t = i; t <= j; ++t) {
            if (positive[order[t]]) {
                pos_rank_sum += midrank;
                ++pos;
            }
        }
        i = j + 1;
    }
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) throw ConfigError("metric_auc: AUC is undefined when only one class is present");
    const double p = static_cast<double>(pos);
    const double wins = pos_rank_sum - p * (p + 1.0) / 2.0;
    return wins / (p * static_cast<double>(neg));
}

double metric_auc_ovr(const std::vector<std::size_t>& y_true, const std::vector<std::vector<double>>& scores) {
    check_lengths(y_true.size(), scores.size(), "metric_auc_ovr");
    const std::size_t classes = scores.front().size();
    if (classes < 2) throw ConfigError("metric_auc_ovr: need scores for at least two classes");
    std::vector<std::size_t> present;
    for (std::size_t c = 0; c < classes; ++c)
        if (std::find(y_true.begin(), y_true.end(), c) != y_true.end()) present.push_back(c);
    if (present.size() < 2) throw ConfigError("metric_auc_ovr: AUC is undefined when y_true has a single class");

    auto class_auc = [&](std::size_t c) {
        std::vector<bool> pos(y_true.size());
        std::vector<double> s(y_true.size());
        for (std::size_t i = 0; i < y_true.size(); ++i) {
            pos[i] = y_true[i] == c;
            s[i] = scores[i].at(c);
        }
        return metric_auc(pos, s);
    };
    if (classes == 2) return class_auc(1);
    double total = 0.0;
    for (std::size_t c : present) total += class_auc(c);
    return total / static_cast<double>(present.size());
}

double metric_auc_ovr(const std::vector<std::size_t>& y_true, const std::vector<double>& positive_scores) {
    check_lengths(y_true.size(), positive_scores.size(), "metric_auc_ovr");
    std::vector<bool> pos(y_true.size());
    for (std::size_t i = 0; i < y_true.size(); ++i) pos[i] = y_true[i] == 1;
    return metric_auc(pos, positive_scores);
}

MeanStd mean_std(const std::vector<double>& values) {
    if (values.empty()) return {};
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double sq = 0.0;
    for (double v : values) sq += (v - mean) * (v - mean);
    return {mean, std::sqrt(sq / n)};
}

}  // namespace amdmil
