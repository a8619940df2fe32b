#pragma once

#include <cstddef>
#include <vector>

namespace amdmil {

/// Fraction of exact matches.
double metric_acc(const std::vector<std::size_t>& y_true, const std::vector<std::size_t>& y_pred);

/// Unweighted mean of per-class F1 over classes 0..classes-1. A class with
/// no true and no predicted members contributes 0.
double metric_macro_f1(const std::vector<std::size_t>& y_true, const std::vector<std::size_t>& y_pred,
                       std::size_t classes);

/// Binary ROC AUC by the rank statistic with midranks for ties.
/// Throws ConfigError if only one class is present.
double metric_auc(const std::vector<bool>& positive, const std::vector<double>& scores);

/// One-vs-rest AUC averaged over classes. `scores[i][c]` is the score of
/// sample i for class c. Binary problems reduce to the class-1 AUC.
double metric_auc_ovr(const std::vector<std::size_t>& y_true, const std::vector<std::vector<double>>& scores);

/// Binary convenience overload: scores are for the positive class.
double metric_auc_ovr(const std::vector<std::size_t>& y_true, const std::vector<double>& positive_scores);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
};
MeanStd mean_std(const std::vector<double>& values);

}  // namespace amdmil
