#include "grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cbp {

const char* constraint_kind_name(ConstraintKind kind) {
    switch (kind) {
    case ConstraintKind::binary: return "binary";
    case ConstraintKind::ternary: return "ternary";
    case ConstraintKind::one_bit_shift: return "one-bit-shift";
    case ConstraintKind::two_bit_shift: return "two-bit-shift";
    case ConstraintKind::custom: return "custom";
    }
    return "?";
}

ConstraintKind constraint_kind_from_name(const std::string& name) {
    if (name == "binary") return ConstraintKind::binary;
    if (name == "ternary") return ConstraintKind::ternary;
    if (name == "one-bit-shift") return ConstraintKind::one_bit_shift;
    if (name == "two-bit-shift") return ConstraintKind::two_bit_shift;
    if (name == "custom" || name.rfind("custom:", 0) == 0) return ConstraintKind::custom;
    throw std::invalid_argument("unknown constraint kind: " + name);
}

double QuantGrid::max_gap() const {
    double gap = 0.0;
    for (std::size_t i = 0; i + 1 < q.size(); ++i)
        gap = std::max(gap, q[i + 1] - q[i]);
    return gap;
}

namespace {

void fill_medians(QuantGrid& grid) {
    grid.m.resize(grid.q.size() - 1);
    for (std::size_t i = 0; i + 1 < grid.q.size(); ++i)
        grid.m[i] = (grid.q[i] + grid.q[i + 1]) / 2.0;
}

} // namespace

QuantGrid make_grid(ConstraintKind kind, double scale) {
    if (!(scale > 0.0))
        throw std::domain_error("make_grid: scale must be positive");
    QuantGrid grid;
    switch (kind) {
    case ConstraintKind::binary:
        grid.q = {-scale, scale};
        break;
    case ConstraintKind::ternary:
    case ConstraintKind::one_bit_shift:
    case ConstraintKind::two_bit_shift: {
        const int depth = kind == ConstraintKind::ternary      ? 0
                          : kind == ConstraintKind::one_bit_shift ? 1
                                                                  : 2;
        grid.q.push_back(0.0);
        for (int d = 0; d <= depth; ++d) {
            const double v = std::ldexp(scale, -d);
            grid.q.push_back(v);
            grid.q.push_back(-v);
        }
        std::sort(grid.q.begin(), grid.q.end());
        break;
    }
    case ConstraintKind::custom:
        throw std::invalid_argument("make_grid: custom kind requires explicit levels");
    }
    fill_medians(grid);
    grid.g = 1.0;
    return grid;
}

QuantGrid make_custom_grid(std::vector<double> levels) {
    if (levels.size() < 2)
        throw std::domain_error("make_custom_grid: need at least two levels");
    std::sort(levels.begin(), levels.end());
    for (std::size_t i = 0; i + 1 < levels.size(); ++i)
        if (!(levels[i] < levels[i + 1]))
            throw std::domain_error("make_custom_grid: levels must be strictly increasing");
    QuantGrid grid;
    grid.q = std::move(levels);
    fill_medians(grid);
    grid.g = 1.0;
    return grid;
}

double sawtooth_Y(double w, const QuantGrid& grid, double slope) {
    const auto& q = grid.q;
    if (w < q.front())
        return slope * (q.front() - w);
    if (w >= q.back())
        return slope * (w - q.back());
    // Locate i with q[i] <= w < q[i+1]. The distance-to-nearer-endpoint form
    // equals -slope*|w - m| + slope*gap/2 but is exactly zero on the levels
    // and never dips negative from rounding.
    const std::size_t i =
        static_cast<std::size_t>(std::upper_bound(q.begin(), q.end(), w) - q.begin()) - 1;
    return slope * std::min(w - q[i], q[i + 1] - w);
}

double partial_sum_Y(double w, const QuantGrid& grid) { return sawtooth_Y(w, grid, 2.0); }

double window_ucs(double w, const QuantGrid& grid) {
    if (w < grid.q.front() || w >= grid.q.back())
        return 1.0;
    const auto& q = grid.q;
    const std::size_t i =
        static_cast<std::size_t>(std::upper_bound(q.begin(), q.end(), w) - q.begin()) - 1;
    const double half = (q[i + 1] - q[i]) / (2.0 * grid.g);
    const double mid = grid.m[i];
    // Half-open window [mid - half, mid + half).
    if (w >= mid - half && w < mid + half)
        return 0.0;
    return 1.0;
}

double constraint_cs(double w, const QuantGrid& grid) {
    return window_ucs(w, grid) * partial_sum_Y(w, grid);
}

double sawtooth_grad(double w, const QuantGrid& grid, double slope) {
    const auto& q = grid.q;
    // Exact grid levels are the sawtooth minima; take subgradient 0 there.
    if (std::binary_search(q.begin(), q.end(), w))
        return 0.0;
    if (w < q.front())
        return -slope;
    if (w > q.back())
        return slope;
    const std::size_t i =
        static_cast<std::size_t>(std::upper_bound(q.begin(), q.end(), w) - q.begin()) - 1;
    // Rising toward the midpoint, falling past it; w == m[i] takes the
    // falling branch per the half-open convention.
    return w < grid.m[i] ? slope : -slope;
}

double constraint_grad(double w, const QuantGrid& grid) {
    const double gate = window_ucs(w, grid);
    if (gate == 0.0)
        return 0.0;
    return sawtooth_grad(w, grid, 2.0);
}

double cfs(const std::vector<const std::vector<double>*>& weight_groups,
           const std::vector<const QuantGrid*>& grids) {
    if (weight_groups.size() != grids.size())
        throw std::invalid_argument("cfs: one grid per weight group required");
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t gi = 0; gi < weight_groups.size(); ++gi) {
        for (double w : *weight_groups[gi])
            total += partial_sum_Y(w, *grids[gi]);
        count += weight_groups[gi]->size();
    }
    if (count == 0)
        throw std::domain_error("cfs: empty weight set");
    return total / static_cast<double>(count);
}

double cfs(const std::vector<double>& weights, const QuantGrid& grid) {
    return cfs(std::vector<const std::vector<double>*>{&weights},
               std::vector<const QuantGrid*>{&grid});
}

} // namespace cbp
