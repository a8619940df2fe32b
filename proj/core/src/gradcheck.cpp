#include "amdmil/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "amdmil/error.hpp"

namespace amdmil {

Matrix finite_diff_grad(const std::function<double(const Matrix&)>& loss_fn, const ParamTensor& p, double h) {
    if (!(h > 0.0)) throw ConfigError("finite_diff_grad: step h must be positive");
    Matrix grad(p.rows(), p.cols());
    Matrix probe = p.value;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double orig = probe.data()[i];
        probe.data()[i] = orig + h;
        const double plus = loss_fn(probe);
        probe.data()[i] = orig - h;
        const double minus = loss_fn(probe);
        probe.data()[i] = orig;
        if (!std::isfinite(plus) || !std::isfinite(minus)) {
            throw NumericError("finite_diff_grad: non-finite loss at entry (" + std::to_string(i / p.cols()) +
                               "," + std::to_string(i % p.cols()) + ")");
        }
        grad.data()[i] = (plus - minus) / (2.0 * h);
    }
    return grad;
}

double max_relative_error(const Matrix& analytic, const Matrix& numeric, double floor) {
    if (!analytic.same_shape(numeric)) {
        throw ShapeError("max_relative_error: " + analytic.shape_string() + " vs " + numeric.shape_string());
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double a = analytic.data()[i];
        const double n = numeric.data()[i];
        const double denom = std::max({std::abs(a), std::abs(n), floor});
        worst = std::max(worst, std::abs(a - n) / denom);
    }
    return worst;
}

}  // namespace amdmil
