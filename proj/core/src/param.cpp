#include "amdmil/param.hpp"

#include <cmath>

#include "amdmil/error.hpp"

namespace amdmil {

ParamTensor::ParamTensor(Matrix init)
    : value(std::move(init)),
      grad(value.rows(), value.cols()),
      m(value.rows(), value.cols()),
      v(value.rows(), value.cols()) {}

ParamTensor ParamTensor::zeros(std::size_t rows, std::size_t cols) { return ParamTensor(Matrix(rows, cols)); }

ParamTensor ParamTensor::normal(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    Matrix init(rows, cols);
    for (double& x : init.data()) x = dist(rng);
    return ParamTensor(std::move(init));
}

void ParamTensor::accumulate(const Matrix& g) { grad += g; }

Matrix linear_forward(const Matrix& x, const ParamTensor& w, const ParamTensor* bias) {
    if (x.cols() != w.cols()) {
        throw ShapeError("linear_forward: input " + x.shape_string() + " does not match weight " +
                         w.value.shape_string() + " (weights are out x in)");
    }
    Matrix y = matmul_nt(x, w.value);
    if (bias != nullptr) {
        if (bias->rows() != 1 || bias->cols() != y.cols()) {
            throw ShapeError("linear_forward: bias " + bias->value.shape_string() + " does not match output " +
                             y.shape_string());
        }
        for (std::size_t r = 0; r < y.rows(); ++r) {
            auto row = y.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias->value(0, c);
        }
    }
    return y;
}

Matrix linear_forward(const Matrix& x, const ParamTensor& w, const std::optional<ParamTensor>& bias) {
    return linear_forward(x, w, bias ? &*bias : nullptr);
}

Matrix linear_backward(const Matrix& x, ParamTensor& w, ParamTensor* bias, const Matrix& dy) {
    w.accumulate(matmul_tn(dy, x));
    if (bias != nullptr) {
        Matrix db(1, dy.cols());
        for (std::size_t r = 0; r < dy.rows(); ++r)
            for (std::size_t c = 0; c < dy.cols(); ++c) db(0, c) += dy(r, c);
        bias->accumulate(db);
    }
    return matmul(dy, w.value);
}

void adam_step(ParamTensor& p, const AdamConfig& cfg) {
    if (!(cfg.lr > 0.0)) throw ConfigError("adam_step: learning rate must be positive");
    if (!p.grad.same_shape(p.value) || !p.m.same_shape(p.value) || !p.v.same_shape(p.value)) {
        throw ShapeError("adam_step: value/grad/moment shapes disagree");
    }
    p.step_count += 1;
    const double t = static_cast<double>(p.step_count);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    auto& val = p.value.data();
    auto& g = p.grad.data();
    auto& m = p.m.data();
    auto& v = p.v.data();
    for (std::size_t i = 0; i < val.size(); ++i) {
        const double gi = g[i] + cfg.weight_decay * val[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        val[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        g[i] = 0.0;
    }
}

}  // namespace amdmil
