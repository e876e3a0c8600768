#include "c2f/matrix.hpp"

#include <cmath>
#include <stdexcept>

namespace c2f {

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul: inner dimensions differ");
    Matrix out(a.rows, b.cols);
    // i-k-j order keeps the inner loop contiguous in both b and out.
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* orow = out.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b.row(k);
            for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols) throw std::invalid_argument("matmul_nt: inner dimensions differ");
    Matrix out(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* orow = out.row(i);
        for (int j = 0; j < b.rows; ++j) {
            const double* brow = b.row(j);
            double s = 0.0;
            for (int k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
            orow[j] = s;
        }
    }
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows) throw std::invalid_argument("matmul_tn: inner dimensions differ");
    Matrix out(a.cols, b.cols);
    for (int m = 0; m < a.rows; ++m) {
        const double* arow = a.row(m);
        const double* brow = b.row(m);
        for (int i = 0; i < a.cols; ++i) {
            const double ami = arow[i];
            if (ami == 0.0) continue;
            double* orow = out.row(i);
            for (int j = 0; j < b.cols; ++j) orow[j] += ami * brow[j];
        }
    }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
    return out;
}

bool all_finite(const Matrix& a) {
    for (double v : a.data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace c2f
