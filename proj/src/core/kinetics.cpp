#include "kinetics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace cbp {

namespace {

// Fixed design points for the logistic built-in; component j of point i is
// kLogisticX[(i + j) % 8], labels alternate. Small and deterministic.
constexpr double kLogisticX[8] = {0.9, -1.3, 0.4, 1.7, -0.6, 1.1, -1.9, 0.2};
constexpr int kLogisticN = 8;

double logistic_margin(const std::vector<double>& w, int i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j)
        dot += kLogisticX[(i + j) % 8] * w[j];
    const double y = (i % 2 == 0) ? 1.0 : -1.0;
    return y * dot;
}

double g0_increment(double g) { return g < 10.0 ? 1.0 : 10.0; }

} // namespace

double KineticsSystem::loss_value(const std::vector<double>& w) const {
    if (loss == KineticsLoss::quadratic) {
        double acc = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double d = w[i] - target[i];
            acc += 0.5 * curvature[i] * d * d;
        }
        return acc;
    }
    double acc = 0.0;
    for (int i = 0; i < kLogisticN; ++i) {
        const double m = logistic_margin(w, i);
        // log(1 + exp(-m)) computed stably.
        acc += m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
    }
    return acc / kLogisticN;
}

std::vector<double> KineticsSystem::loss_grad(const std::vector<double>& w) const {
    std::vector<double> grad(w.size(), 0.0);
    if (loss == KineticsLoss::quadratic) {
        for (std::size_t i = 0; i < w.size(); ++i)
            grad[i] = curvature[i] * (w[i] - target[i]);
        return grad;
    }
    for (int i = 0; i < kLogisticN; ++i) {
        const double m = logistic_margin(w, i);
        const double sig = 1.0 / (1.0 + std::exp(m)); // d/dm log(1+e^-m) = -sigma(-m)
        const double y = (i % 2 == 0) ? 1.0 : -1.0;
        for (std::size_t j = 0; j < w.size(); ++j)
            grad[j] -= sig * y * kLogisticX[(i + j) % 8] / kLogisticN;
    }
    return grad;
}

double KineticsSystem::ucs(double w, double g) const {
    if (window_mode == WindowMode::none)
        return 1.0;
    QuantGrid local = grid;
    local.g = g;
    return window_ucs(w, local);
}

double KineticsSystem::cs(double w, double g) const {
    return ucs(w, g) * sawtooth_Y(w, grid, slope);
}

double KineticsSystem::cs_grad(double w, double g) const {
    const double gate = ucs(w, g);
    return gate == 0.0 ? 0.0 : gate * sawtooth_grad(w, grid, slope);
}

namespace {

struct Derivatives {
    std::vector<double> dw;
    std::vector<double> dlambda;
    double dg = 0.0;
};

Derivatives derivatives(const KineticsSystem& sys, const std::vector<double>& w,
                        const std::vector<double>& lambda, double g) {
    Derivatives d;
    d.dw = sys.loss_grad(w);
    d.dlambda.resize(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        d.dw[i] = -(d.dw[i] + lambda[i] * sys.cs_grad(w[i], g)) / sys.tau_w;
        d.dlambda[i] = sys.cs(w[i], g) / sys.tau_lambda;
    }
    d.dg = sys.window_mode == WindowMode::vanishing ? g0_increment(g) / sys.tau_lambda : 0.0;
    return d;
}

double lagrangian_value(const KineticsSystem& sys, const std::vector<double>& w,
                        const std::vector<double>& lambda, double g) {
    double acc = sys.loss_value(w);
    for (std::size_t i = 0; i < w.size(); ++i)
        acc += lambda[i] * sys.cs(w[i], g);
    return acc;
}

bool finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x))
            return false;
    return true;
}

double max_abs(const std::vector<double>& v) {
    double mx = 0.0;
    for (double x : v)
        mx = std::max(mx, std::abs(x));
    return mx;
}

} // namespace

LyapunovTerms lyapunov_decomposition(const KineticsSystem& system, const std::vector<double>& w,
                                     const std::vector<double>& lambda, double g) {
    LyapunovTerms terms;
    const std::vector<double> loss_grad = system.loss_grad(w);
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double drive = loss_grad[i] + lambda[i] * system.cs_grad(w[i], g);
        terms.descent -= drive * drive / system.tau_w;
        const double cs = system.cs(w[i], g);
        terms.ascent += cs * cs / system.tau_lambda;
    }
    terms.total = terms.descent + terms.ascent;
    return terms;
}

Trajectory integrate(const KineticsSystem& system, std::vector<double> w,
                     std::vector<double> lambda, const IntegrateOptions& options) {
    if (w.size() != system.dim() || lambda.size() != system.dim())
        throw std::invalid_argument("integrate: w0/lambda0 dimension mismatch");
    if (!(options.dt > 0.0) || !(options.t_end > 0.0))
        throw std::invalid_argument("integrate: dt and t_end must be positive");

    Trajectory out;
    double g = 1.0;
    double t = 0.0;
    const std::size_t steps = static_cast<std::size_t>(std::ceil(options.t_end / options.dt));
    const std::size_t stride = options.record_every == 0 ? 1 : options.record_every;

    auto record = [&]() {
        TrajectorySample s;
        s.t = t;
        s.w = w;
        s.lambda = lambda;
        s.g = g;
        s.lagrangian = lagrangian_value(system, w, lambda, g);
        const LyapunovTerms terms = lyapunov_decomposition(system, w, lambda, g);
        s.dldt = terms.total;
        s.descent_term = terms.descent;
        s.ascent_term = terms.ascent;
        s.cs.resize(w.size());
        for (std::size_t i = 0; i < w.size(); ++i)
            s.cs[i] = system.cs(w[i], g);
        out.samples.push_back(std::move(s));
    };

    record();
    for (std::size_t k = 0; k < steps; ++k) {
        if (options.method == IntegrationMethod::euler) {
            const Derivatives d = derivatives(system, w, lambda, g);
            if (options.stop_dwdt_below > 0.0 && max_abs(d.dw) < options.stop_dwdt_below &&
                max_abs(d.dlambda) < options.stop_dwdt_below) {
                out.stop_reached = true;
                break;
            }
            for (std::size_t i = 0; i < w.size(); ++i) {
                w[i] += options.dt * d.dw[i];
                lambda[i] += options.dt * d.dlambda[i];
            }
            g += options.dt * d.dg;
        } else {
            const Derivatives k1 = derivatives(system, w, lambda, g);
            if (options.stop_dwdt_below > 0.0 && max_abs(k1.dw) < options.stop_dwdt_below &&
                max_abs(k1.dlambda) < options.stop_dwdt_below) {
                out.stop_reached = true;
                break;
            }
            auto advance = [&](const Derivatives& d, double h) {
                std::vector<double> w2 = w, l2 = lambda;
                for (std::size_t i = 0; i < w.size(); ++i) {
                    w2[i] += h * d.dw[i];
                    l2[i] += h * d.dlambda[i];
                }
                return std::make_pair(std::move(w2), std::move(l2));
            };
            const double h = options.dt;
            auto [w2, l2] = advance(k1, h / 2.0);
            const Derivatives k2 = derivatives(system, w2, l2, g + h / 2.0 * k1.dg);
            auto [w3, l3] = advance(k2, h / 2.0);
            const Derivatives k3 = derivatives(system, w3, l3, g + h / 2.0 * k2.dg);
            auto [w4, l4] = advance(k3, h);
            const Derivatives k4 = derivatives(system, w4, l4, g + h * k3.dg);
            for (std::size_t i = 0; i < w.size(); ++i) {
                w[i] += h / 6.0 * (k1.dw[i] + 2.0 * k2.dw[i] + 2.0 * k3.dw[i] + k4.dw[i]);
                lambda[i] +=
                    h / 6.0 * (k1.dlambda[i] + 2.0 * k2.dlambda[i] + 2.0 * k3.dlambda[i] +
                               k4.dlambda[i]);
            }
            g += h / 6.0 * (k1.dg + 2.0 * k2.dg + 2.0 * k3.dg + k4.dg);
        }
        t += options.dt;
        if (!finite(w) || !finite(lambda) || !std::isfinite(g)) {
            out.aborted = true;
            break;
        }
        if ((k + 1) % stride == 0)
            record();
    }
    if (!out.aborted && (out.samples.empty() || out.samples.back().t != t))
        record();
    out.final_time = t;
    return out;
}

std::vector<PopulationPoint> population_track(const std::vector<std::vector<double>>& snapshots,
                                              const std::vector<double>& times,
                                              const QuantGrid& grid, double delta) {
    double min_gap = grid.span();
    for (std::size_t i = 0; i + 1 < grid.q.size(); ++i)
        min_gap = std::min(min_gap, grid.q[i + 1] - grid.q[i]);
    if (!(delta > 0.0) || delta >= min_gap / 2.0)
        throw std::invalid_argument("population_track: delta must lie in (0, min_gap/2)");

    std::vector<PopulationPoint> out;
    out.reserve(snapshots.size());
    for (std::size_t s = 0; s < snapshots.size(); ++s) {
        PopulationPoint point;
        point.t = times.empty() ? static_cast<double>(s) : times[s];
        point.per_level.assign(grid.levels(), 0.0);
        const auto& weights = snapshots[s];
        for (double w : weights)
            for (std::size_t qi = 0; qi < grid.q.size(); ++qi)
                if (std::abs(w - grid.q[qi]) <= delta)
                    point.per_level[qi] += 1.0;
        if (!weights.empty()) {
            for (double& f : point.per_level) {
                f /= static_cast<double>(weights.size());
                point.total += f;
            }
        }
        out.push_back(std::move(point));
    }
    return out;
}

double flop_estimate(double n_w, double forward_flops, double p) {
    if (n_w < 0.0 || forward_flops < 0.0 || p < 0.0)
        throw std::invalid_argument("flop_estimate: inputs must be nonnegative");
    return 2.0 * forward_flops + 2.0 * (p + 3.0) * n_w;
}

void write_trajectory_csv(const Trajectory& trajectory, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open " + path + " for writing");
    const std::size_t dim =
        trajectory.samples.empty() ? 0 : trajectory.samples.front().w.size();
    out << "t";
    for (std::size_t i = 0; i < dim; ++i)
        out << ",w_" << i;
    for (std::size_t i = 0; i < dim; ++i)
        out << ",lambda_" << i;
    out << ",g,L,descent_term,ascent_term\n";
    char buf[32];
    auto emit = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf;
    };
    for (const auto& s : trajectory.samples) {
        emit(s.t);
        for (double v : s.w) {
            out << ',';
            emit(v);
        }
        for (double v : s.lambda) {
            out << ',';
            emit(v);
        }
        out << ',';
        emit(s.g);
        out << ',';
        emit(s.lagrangian);
        out << ',';
        emit(s.descent_term);
        out << ',';
        emit(s.ascent_term);
        out << '\n';
    }
}

} // namespace cbp
