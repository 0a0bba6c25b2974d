#include <doctest.h>

#include "ndarray.hpp"
#include "rng.hpp"

#include <cmath>
#include <stdexcept>

using namespace cbp;

namespace {

// Independent naive oracle for the matrix product.
Matrix matmul_oracle(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k)
                acc += a(i, k) * b(k, j);
            out(i, j) = acc;
        }
    return out;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i)
        m.data()[i] = rng.uniform(-2.0, 2.0);
    return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    REQUIRE(a.same_shape(b));
    double mx = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        mx = std::max(mx, std::abs(a.data()[i] - b.data()[i]));
    return mx;
}

} // namespace

TEST_CASE("matmul identity") {
    const Matrix eye(2, 2, {1, 0, 0, 1});
    const Matrix b(2, 2, {3, 4, 5, 6});
    const Matrix out = matmul(eye, b);
    CHECK(out(0, 0) == 3);
    CHECK(out(0, 1) == 4);
    CHECK(out(1, 0) == 5);
    CHECK(out(1, 1) == 6);
}

TEST_CASE("matmul 1x1 result") {
    const Matrix a(1, 2, {1, 2});
    const Matrix b(2, 1, {3, 4});
    const Matrix out = matmul(a, b);
    CHECK(out.rows() == 1);
    CHECK(out.cols() == 1);
    CHECK(out(0, 0) == 11);
}

TEST_CASE("matmul matches triple-loop oracle") {
    Rng rng(42);
    const Matrix a = random_matrix(5, 7, rng);
    const Matrix b = random_matrix(7, 3, rng);
    CHECK(max_abs_diff(matmul(a, b), matmul_oracle(a, b)) < 1e-12);
}

TEST_CASE("matmul shape mismatch throws") {
    const Matrix a(2, 3);
    const Matrix b(2, 3);
    CHECK_THROWS_AS(matmul(a, b), std::invalid_argument);
}

TEST_CASE("matmul associativity on random triples") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix a = random_matrix(4, 6, rng);
        const Matrix b = random_matrix(6, 5, rng);
        const Matrix c = random_matrix(5, 3, rng);
        const Matrix left = matmul(matmul(a, b), c);
        const Matrix right = matmul(a, matmul(b, c));
        double scale_ref = 0.0;
        for (std::size_t i = 0; i < left.size(); ++i)
            scale_ref = std::max(scale_ref, std::abs(left.data()[i]));
        CHECK(max_abs_diff(left, right) <= 1e-9 * std::max(1.0, scale_ref));
    }
}

TEST_CASE("l1_norm examples") {
    CHECK(l1_norm(Matrix(2, 2, {1, -2, 3, -4})) == 10.0);
    CHECK(l1_norm(Matrix(3, 3)) == 0.0);
    CHECK(l1_norm(Matrix(1, 1, {-0.5})) == 0.5);
}

TEST_CASE("l1_norm nonnegative, zero iff zero matrix") {
    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        Matrix m = random_matrix(3, 4, rng);
        CHECK(l1_norm(m) >= 0.0);
        bool any_nonzero = false;
        for (std::size_t i = 0; i < m.size(); ++i)
            any_nonzero |= m.data()[i] != 0.0;
        if (any_nonzero)
            CHECK(l1_norm(m) > 0.0);
    }
}

TEST_CASE("transpose and add_row") {
    const Matrix a(2, 3, {1, 2, 3, 4, 5, 6});
    const Matrix at = transpose(a);
    CHECK(at.rows() == 3);
    CHECK(at(2, 1) == 6);

    const Matrix biased = add_row(a, {10, 20, 30});
    CHECK(biased(0, 0) == 11);
    CHECK(biased(1, 2) == 36);
    CHECK_THROWS_AS(add_row(a, {1, 2}), std::invalid_argument);
}

TEST_CASE("col_sums and axpy") {
    const Matrix a(2, 2, {1, 2, 3, 4});
    const auto sums = col_sums(a);
    CHECK(sums[0] == 4);
    CHECK(sums[1] == 6);

    Matrix b(2, 2, {1, 1, 1, 1});
    axpy(b, 2.0, a);
    CHECK(b(1, 1) == 9);
}

TEST_CASE("all_finite flags bad entries") {
    Matrix m(1, 2, {1.0, 2.0});
    CHECK(all_finite(m));
    m(0, 1) = std::nan("");
    CHECK(!all_finite(m));
}
