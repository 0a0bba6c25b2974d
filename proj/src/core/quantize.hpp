#pragma once

#include "grid.hpp"
#include "ndarray.hpp"

namespace cbp {

/// Per-layer quantization policy. Exempt layers carry no grid, no
/// multipliers, and pass through every quantization op unchanged.
struct LayerQuantConfig {
    bool exempt = false;
    ConstraintKind kind = ConstraintKind::ternary;
};

enum class ScalePolicy {
    frozen_at_start,    // a computed once from the pre-trained weights
    recompute_each_epoch,
};

/// Layer-wise scale factor a = ||W||_1 / #elements. Throws std::domain_error
/// for an empty or all-zero matrix (the grid would collapse to a point).
double scale_factor(const Matrix& w);

/// Forward quantization map: cascade of sign comparisons against the grid
/// midpoints, sign(0) = +1. Equivalent to nearest-level rounding with ties
/// resolved upward.
double ste_quantize(double w, const QuantGrid& grid);
Matrix ste_quantize(const Matrix& w, const QuantGrid& grid);

/// Straight-through backward map: the gradient w.r.t. the quantized weight
/// passes to the real-valued weight unchanged.
inline double ste_backward(double upstream_grad) { return upstream_grad; }

/// Clamp every entry to [q_front, q_back].
void clip_weights(Matrix& w, const QuantGrid& grid);

} // namespace cbp
