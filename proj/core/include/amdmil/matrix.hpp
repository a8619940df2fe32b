#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace amdmil {

/// Dense row-major matrix of doubles.
///
/// Every numeric quantity in the library (features, projections, score
/// matrices, weights) is carried in this type. Storage is row-major:
/// element (r, c) lives at data()[r * cols() + c].
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    std::string shape_string() const;
    bool same_shape(const Matrix& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }
    bool all_finite() const;

    void fill(double value);

    friend bool operator==(const Matrix& a, const Matrix& b) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Products. The _nt / _tn forms multiply by a transposed operand without
// materialising the transpose.

/// a * b
Matrix matmul(const Matrix& a, const Matrix& b);
/// a * b^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// a^T * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);
Matrix& operator+=(Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);

/// Row-wise softmax with per-row max subtraction.
Matrix softmax_rows(const Matrix& x);

/// Gradient of a row-wise softmax. `y` is the softmax output, `dy` the
/// upstream gradient; returns dL/dx.
Matrix softmax_rows_backward(const Matrix& y, const Matrix& dy);

/// Sub-matrix of rows [begin, end).
Matrix slice_rows(const Matrix& a, std::size_t begin, std::size_t end);

/// Stacks `top` above `bottom`; column counts must agree.
Matrix vstack(const Matrix& top, const Matrix& bottom);

double max_abs(const Matrix& a);
double sum(const Matrix& a);

}  // namespace amdmil
