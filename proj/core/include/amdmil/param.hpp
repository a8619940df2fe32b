#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "amdmil/matrix.hpp"

namespace amdmil {

/// A trainable matrix with its gradient accumulator and Adam moments.
///
/// Weights are stored out x in, so a linear layer computes x * value^T.
struct ParamTensor {
    Matrix value;
    Matrix grad;
    Matrix m;
    Matrix v;
    std::uint64_t step_count = 0;

    ParamTensor() = default;
    explicit ParamTensor(Matrix init);

    static ParamTensor zeros(std::size_t rows, std::size_t cols);
    /// Gaussian init with the given standard deviation.
    static ParamTensor normal(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng);

    std::size_t rows() const { return value.rows(); }
    std::size_t cols() const { return value.cols(); }

    void zero_grad() { grad.fill(0.0); }
    /// grad += g
    void accumulate(const Matrix& g);
};

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-5;
};

/// y = x * w^T (+ bias broadcast over rows).
Matrix linear_forward(const Matrix& x, const ParamTensor& w, const ParamTensor* bias = nullptr);
Matrix linear_forward(const Matrix& x, const ParamTensor& w, const std::optional<ParamTensor>& bias);

/// Accumulates dL/dw (and dL/dbias) into the tensors' grads and returns dL/dx.
Matrix linear_backward(const Matrix& x, ParamTensor& w, ParamTensor* bias, const Matrix& dy);

/// One Adam update. Weight decay is classic L2 folded into the gradient
/// before the moment update. The gradient is zeroed afterwards.
void adam_step(ParamTensor& p, const AdamConfig& cfg);

}  // namespace amdmil
