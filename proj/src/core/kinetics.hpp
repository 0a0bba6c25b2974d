#pragma once

#include "grid.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace cbp {

enum class KineticsLoss { quadratic, logistic };
enum class WindowMode { none, vanishing };
enum class IntegrationMethod { euler, rk4 };

/// Continuous-time counterpart of the training loop: weights relax along
/// -grad(L)/tau_w while multipliers rise along cs/tau_lambda. With the
/// vanishing window the shared g grows at g0/tau_lambda, g0 stepping from
/// 1 to 10 once g passes 10.
struct KineticsSystem {
    KineticsLoss loss = KineticsLoss::quadratic;
    std::vector<double> target;    // quadratic: minimum location per dim
    std::vector<double> curvature; // quadratic: diagonal curvature per dim
    QuantGrid grid;
    double tau_w = 1.0;
    double tau_lambda = 20.0;
    double slope = 2.0; // sawtooth slope s
    WindowMode window_mode = WindowMode::none;

    std::size_t dim() const { return target.size(); }
    double loss_value(const std::vector<double>& w) const;
    std::vector<double> loss_grad(const std::vector<double>& w) const;

    /// cs_i(w) at window variable g under this system's window mode.
    double cs(double w, double g) const;
    double cs_grad(double w, double g) const;
    double ucs(double w, double g) const;
};

struct TrajectorySample {
    double t = 0.0;
    std::vector<double> w;
    std::vector<double> lambda;
    double g = 1.0;
    double lagrangian = 0.0;
    double dldt = 0.0;
    double descent_term = 0.0;
    double ascent_term = 0.0;
    std::vector<double> cs;
};

struct Trajectory {
    std::vector<TrajectorySample> samples;
    bool aborted = false;       // integration hit a non-finite state
    bool stop_reached = false;  // |dw/dt| fell below the requested floor
    double final_time = 0.0;
};

struct IntegrateOptions {
    double t_end = 100.0;
    double dt = 1e-3;
    IntegrationMethod method = IntegrationMethod::euler;
    std::size_t record_every = 1;
    // Stop once both |dw/dt| and |dlambda/dt| fall below this (0 disables).
    // Both rates must be quiet: a start on the loss minimum has dw/dt = 0
    // while the multipliers are still charging.
    double stop_dwdt_below = 0.0;
};

/// Integrate the BDMM flow from (w0, lambda0, g = 1). Records every n-th
/// step plus the final state. On a non-finite state the partial trajectory
/// is returned with `aborted` set.
Trajectory integrate(const KineticsSystem& system, std::vector<double> w0,
                     std::vector<double> lambda0, const IntegrateOptions& options);

struct LyapunovTerms {
    double total = 0.0;
    double descent = 0.0; // -(1/tau_w) sum (dC/dw_i + lambda_i ucs_i dY_i/dw_i)^2
    double ascent = 0.0;  // +(1/tau_lambda) sum (ucs_i Y_i)^2
};

LyapunovTerms lyapunov_decomposition(const KineticsSystem& system, const std::vector<double>& w,
                                     const std::vector<double>& lambda, double g);

struct PopulationPoint {
    double t = 0.0;
    std::vector<double> per_level; // fraction within delta of each grid level
    double total = 0.0;
};

/// Fraction of weights within `delta` of each grid level, per snapshot.
/// `times` may be empty (indices are used instead).
std::vector<PopulationPoint> population_track(const std::vector<std::vector<double>>& snapshots,
                                              const std::vector<double>& times,
                                              const QuantGrid& grid, double delta);

/// Post-training cost model: 2 * forward_flops + 2 * (p + 3) * n_w, with p
/// the fraction of epochs that update the multipliers.
double flop_estimate(double n_w, double forward_flops, double p);

/// Trajectory CSV: t, w_0..w_{n-1}, lambda_0..lambda_{n-1}, g, L,
/// descent_term, ascent_term.
void write_trajectory_csv(const Trajectory& trajectory, const std::string& path);

} // namespace cbp
