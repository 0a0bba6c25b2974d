#include "quantize.hpp"

#include <algorithm>
#include <stdexcept>

namespace cbp {

double scale_factor(const Matrix& w) {
    if (w.size() == 0)
        throw std::domain_error("scale_factor: empty matrix");
    const double norm = l1_norm(w);
    if (norm == 0.0)
        throw std::domain_error("scale_factor: all-zero matrix");
    return norm / static_cast<double>(w.size());
}

double ste_quantize(double w, const QuantGrid& grid) {
    // Cascade of sign comparisons, sign(0) = +1: each midpoint w has reached
    // contributes its full gap. The gap sum telescopes to q[count], which is
    // returned directly so the result is a grid level bit for bit.
    std::size_t count = 0;
    for (double mid : grid.m)
        if (w >= mid)
            ++count;
    return grid.q[count];
}

Matrix ste_quantize(const Matrix& w, const QuantGrid& grid) {
    Matrix out = w;
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] = ste_quantize(out.data()[i], grid);
    return out;
}

void clip_weights(Matrix& w, const QuantGrid& grid) {
    const double lo = grid.lo();
    const double hi = grid.hi();
    for (std::size_t i = 0; i < w.size(); ++i)
        w.data()[i] = std::clamp(w.data()[i], lo, hi);
}

} // namespace cbp
