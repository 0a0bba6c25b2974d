#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace cbp {

/// Family of admissible quantized-value sets.
enum class ConstraintKind {
    binary,        // {-a, a}
    ternary,       // {0, +-a}
    one_bit_shift, // {0, +-a, +-a/2}
    two_bit_shift, // {0, +-a, +-a/2, +-a/4}
    custom,        // caller-supplied sorted levels
};

const char* constraint_kind_name(ConstraintKind kind);
ConstraintKind constraint_kind_from_name(const std::string& name);

/// Quantization grid: strictly increasing level set q, midpoints m of
/// neighbouring levels, and the window variable g (>= 1). The window around
/// each midpoint m[i] has half-width (q[i+1]-q[i]) / (2g) and is half-open,
/// [m - h, m + h), so membership is an exact comparison and the window
/// indicator has zero derivative everywhere.
struct QuantGrid {
    std::vector<double> q;
    std::vector<double> m;
    double g = 1.0;

    std::size_t levels() const { return q.size(); }
    double lo() const { return q.front(); }
    double hi() const { return q.back(); }
    double span() const { return q.back() - q.front(); }
    double max_gap() const;
};

/// Build a grid for `kind` scaled by `scale` (> 0). Window variable starts
/// at 1. Throws std::domain_error for a nonpositive scale.
QuantGrid make_grid(ConstraintKind kind, double scale);

/// Grid from an explicit level list (custom constraints). Levels are sorted;
/// duplicates rejected.
QuantGrid make_custom_grid(std::vector<double> levels);

/// Sawtooth distance-to-grid Y(w): piecewise linear with slope +-2, zero
/// exactly on the grid, positive elsewhere, linear continuation of slope 2
/// outside [q_front, q_back].
double partial_sum_Y(double w, const QuantGrid& grid);

/// Window indicator: 0 when w falls inside some unconstrained-weight window,
/// 1 otherwise. At g = 1 the windows tile [q_front, q_back) completely.
double window_ucs(double w, const QuantGrid& grid);

/// Gated constraint cs(w) = ucs(w) * Y(w).
double constraint_cs(double w, const QuantGrid& grid);

/// Subgradient of cs: +-2 scaled by the window indicator. Tie-breaking at
/// kinks: 0 exactly on a grid level, -2 exactly on a midpoint (the half-open
/// interval convention keeps the w >= m branch active there).
double constraint_grad(double w, const QuantGrid& grid);

/// Mean ungated sawtooth over all constrained weights (one grid per weight
/// group). Throws std::domain_error when the weight set is empty.
double cfs(const std::vector<const std::vector<double>*>& weight_groups,
           const std::vector<const QuantGrid*>& grids);

/// Convenience overload for a single group.
double cfs(const std::vector<double>& weights, const QuantGrid& grid);

// Slope-s generalization used by the kinetics simulator; the training-side
// functions above are the s = 2 case.
double sawtooth_Y(double w, const QuantGrid& grid, double slope);
double sawtooth_grad(double w, const QuantGrid& grid, double slope);

} // namespace cbp
