#include "ndarray.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cbp {

namespace {

[[noreturn]] void shape_error(const std::string& op, const Matrix& a, const Matrix& b) {
    throw std::invalid_argument(op + ": incompatible shapes " + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " and " + std::to_string(b.rows()) +
                                "x" + std::to_string(b.cols()));
}

} // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
        throw std::invalid_argument("Matrix: data length does not match rows*cols");
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        shape_error("matmul", a, b);
    Matrix out(a.rows(), b.cols());
    // i-k-j order keeps the inner loop contiguous in both b and out.
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0)
                continue;
            for (std::size_t j = 0; j < b.cols(); ++j)
                out(i, j) += aik * b(k, j);
        }
    }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            out(j, i) = a(i, j);
    return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b))
        shape_error("add", a, b);
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] += b.data()[i];
    return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b))
        shape_error("sub", a, b);
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] -= b.data()[i];
    return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b))
        shape_error("hadamard", a, b);
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] *= b.data()[i];
    return out;
}

Matrix scale(const Matrix& a, double factor) {
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] *= factor;
    return out;
}

Matrix add_row(const Matrix& a, const std::vector<double>& row) {
    if (row.size() != a.cols())
        throw std::invalid_argument("add_row: row length " + std::to_string(row.size()) +
                                    " does not match cols " + std::to_string(a.cols()));
    Matrix out = a;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            out(i, j) += row[j];
    return out;
}

void axpy(Matrix& a, double factor, const Matrix& b) {
    if (!a.same_shape(b))
        shape_error("axpy", a, b);
    for (std::size_t i = 0; i < a.size(); ++i)
        a.data()[i] += factor * b.data()[i];
}

double l1_norm(const Matrix& a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        acc += std::abs(a.data()[i]);
    return acc;
}

double sum(const Matrix& a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        acc += a.data()[i];
    return acc;
}

std::vector<double> col_sums(const Matrix& a) {
    std::vector<double> out(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            out[j] += a(i, j);
    return out;
}

bool all_finite(const Matrix& a) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!std::isfinite(a.data()[i]))
            return false;
    return true;
}

} // namespace cbp
