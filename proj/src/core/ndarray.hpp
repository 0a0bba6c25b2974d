#pragma once

#include <cstddef>
#include <vector>

namespace cbp {

/// Dense row-major matrix of doubles. The only array type used by the
/// library; vectors are 1xN or Nx1 matrices or plain std::vector<double>.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& storage() { return data_; }
    const std::vector<double>& storage() const { return data_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double factor);

// y = a + row broadcast over every row of a (bias addition).
Matrix add_row(const Matrix& a, const std::vector<double>& row);

// In-place: a += factor * b.
void axpy(Matrix& a, double factor, const Matrix& b);

double l1_norm(const Matrix& a);
double sum(const Matrix& a);
std::vector<double> col_sums(const Matrix& a);

bool all_finite(const Matrix& a);

} // namespace cbp
