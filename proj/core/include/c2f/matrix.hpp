#pragma once

#include <cstddef>
#include <vector>

namespace c2f {

/// Dense row-major matrix of doubles. All numeric state in this project
/// (spectrograms, token sequences, weights) lives in these.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0)
        : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {}

    double& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
    double at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

    double* row(int i) { return data.data() + static_cast<std::size_t>(i) * cols; }
    const double* row(int i) const { return data.data() + static_cast<std::size_t>(i) * cols; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

/// a (m x k) * b (k x n) -> (m x n)
Matrix matmul(const Matrix& a, const Matrix& b);

/// a (m x k) * b^T where b is (n x k) -> (m x n)
Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// a^T where a is (m x k), times b (m x n) -> (k x n)
Matrix matmul_tn(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

bool all_finite(const Matrix& a);

}  // namespace c2f
