#pragma once

#include <functional>

#include "amdmil/param.hpp"

namespace amdmil {

/// Central-difference gradient of `loss_fn` with respect to every entry of
/// `p.value`: (f(x+h) - f(x-h)) / 2h, evaluated one entry at a time.
///
/// `loss_fn` receives a perturbed copy of the value matrix and must be
/// deterministic. Throws NumericError naming the entry if a loss is not
/// finite.
Matrix finite_diff_grad(const std::function<double(const Matrix&)>& loss_fn, const ParamTensor& p,
                        double h = 1e-5);

/// max_ij |a - b| / max(|a|, |b|, floor). The floor keeps entries whose
/// true gradient is zero from dividing finite-difference noise by ~0.
double max_relative_error(const Matrix& analytic, const Matrix& numeric, double floor = 1e-6);

}  // namespace amdmil
