// Acceptance suite. Each criterion prints exactly one PASS/FAIL line; the
// exit code is the number of failed criteria.

#include "checkpoint.hpp"
#include "experiment.hpp"
#include "kinetics.hpp"
#include "optimizer.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace cbp;

namespace {

int g_failures = 0;

void run_criterion(int number, const std::string& name, double time_budget_sec,
                   const std::function<void()>& body) {
    const auto start = std::chrono::steady_clock::now();
    std::string failure;
    try {
        body();
    } catch (const std::exception& e) {
        failure = e.what();
    } catch (...) {
        failure = "unknown exception";
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (failure.empty() && time_budget_sec > 0.0 && secs > time_budget_sec)
        failure = "exceeded the " + std::to_string(time_budget_sec) + "s budget";
    if (failure.empty()) {
        std::printf("PASS  %d. %s (%.1fs)\n", number, name.c_str(), secs);
    } else {
        std::printf("FAIL  %d. %s (%.1fs): %s\n", number, name.c_str(), secs, failure.c_str());
        ++g_failures;
    }
    std::fflush(stdout);
}

[[noreturn]] void fail(const std::string& message) { throw std::runtime_error(message); }

void expect(bool ok, const std::string& message) {
    if (!ok)
        fail(message);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// ---------------------------------------------------------------------
// 1. Constraint-math oracle equivalence on 1e5 random samples.

void criterion_oracle_equivalence() {
    Rng rng(20240801);
    const ConstraintKind kinds[] = {ConstraintKind::binary, ConstraintKind::ternary,
                                    ConstraintKind::one_bit_shift, ConstraintKind::two_bit_shift};
    for (int i = 0; i < 100000; ++i) {
        QuantGrid grid = make_grid(kinds[i % 4], rng.uniform(0.05, 2.0));
        grid.g = rng.uniform(1.0, 128.0);
        const double w = rng.uniform(-3.0, 3.0);

        const double y_err = std::abs(partial_sum_Y(w, grid) - oracle::partial_sum_Y(w, grid));
        expect(y_err < 1e-12, "Y mismatch " + fmt(y_err) + " at w=" + fmt(w));
        expect(window_ucs(w, grid) == oracle::window_ucs(w, grid),
               "ucs mismatch at w=" + fmt(w) + " g=" + fmt(grid.g));
        const double cs_err = std::abs(constraint_cs(w, grid) - oracle::constraint_cs(w, grid));
        expect(cs_err < 1e-12, "cs mismatch " + fmt(cs_err));
        expect(ste_quantize(w, grid) == oracle::nearest_level(w, grid),
               "ste_quantize mismatch at w=" + fmt(w));
    }
    // cfs against the per-weight loop on batches of random weights.
    for (int rep = 0; rep < 200; ++rep) {
        QuantGrid grid = make_grid(kinds[rep % 4], rng.uniform(0.05, 2.0));
        std::vector<double> weights(500);
        for (double& w : weights)
            w = rng.uniform(-2.5, 2.5);
        const double err = std::abs(cfs(weights, grid) - oracle::cfs(weights, grid));
        expect(err < 1e-12, "cfs mismatch " + fmt(err));
    }
}

// ---------------------------------------------------------------------
// 2. Gradient fidelity of the Lagrangian.

void nudge_from_kinks(TrainState& state, double margin) {
    for (std::size_t l = 0; l < state.net.layers().size(); ++l) {
        Layer& layer = state.net.layers()[l];
        if (layer.quant.exempt)
            continue;
        const QuantGrid& grid = state.grids[l];
        for (std::size_t i = 0; i < layer.weights.size(); ++i) {
            double& w = layer.weights.data()[i];
            for (int pass = 0; pass < 4; ++pass) {
                bool moved = false;
                for (double level : grid.q)
                    if (std::abs(w - level) < margin) {
                        w = level + (w >= level ? margin * 2 : -margin * 2);
                        moved = true;
                    }
                for (std::size_t k = 0; k + 1 < grid.q.size(); ++k) {
                    const double mid = grid.m[k];
                    if (std::abs(w - mid) < margin) {
                        w = mid + (w >= mid ? margin * 2 : -margin * 2);
                        moved = true;
                    }
                    const double half = (grid.q[k + 1] - grid.q[k]) / (2.0 * grid.g);
                    for (double edge : {mid - half, mid + half})
                        if (std::abs(w - edge) < margin) {
                            w = edge + (w >= edge ? margin * 2 : -margin * 2);
                            moved = true;
                        }
                }
                if (!moved)
                    break;
            }
        }
    }
}

void criterion_gradient_fidelity() {
    const double h = 1e-6;
    const double tol = 1e-5;
    for (std::uint64_t seed : {101u, 202u, 303u}) {
        Rng rng(seed);
        Network net = Network::dense({4, 10, 8, 3}, rng);
        TrainState state =
            make_train_state(std::move(net), ConstraintKind::ternary, AblationMode::cbp, seed);
        set_window_variable(state, 3.0);
        state.opt.weight_decay = 0.0;
        for (double& lam : state.multipliers.lambda)
            lam = rng.uniform(0.0, 0.5);
        nudge_from_kinks(state, 1e-4);

        Matrix batch(16, 4);
        for (std::size_t i = 0; i < batch.size(); ++i)
            batch.data()[i] = rng.uniform(-1.5, 1.5);
        std::vector<int> labels(16);
        for (auto& y : labels)
            y = static_cast<int>(rng.below(3));

        // The loss side runs in full-precision mode: the constraint term is
        // piecewise linear and the loss is smooth, so central differences of
        // the total are well defined away from the kinks.
        const Gradients grads =
            lagrangian_weight_grads(state, batch, labels, ForwardMode::full_precision);
        auto value = [&]() {
            return lagrangian(state, batch, labels, ForwardMode::full_precision).total;
        };
        for (std::size_t l = 0; l < state.net.layers().size(); ++l) {
            Matrix& w = state.net.layers()[l].weights;
            for (std::size_t i = 0; i < w.size(); ++i) {
                const double keep = w.data()[i];
                w.data()[i] = keep + h;
                const double up = value();
                w.data()[i] = keep - h;
                const double down = value();
                w.data()[i] = keep;
                const double fd = (up - down) / (2.0 * h);
                const double analytic = grads.weights[l].data()[i];
                const double err = std::abs(analytic - fd);
                expect(err <= tol * std::max({std::abs(analytic), std::abs(fd), 1.0}),
                       "layer " + std::to_string(l) + " weight " + std::to_string(i) +
                           ": analytic " + fmt(analytic) + " vs fd " + fmt(fd));
            }
        }
    }
}

// ---------------------------------------------------------------------
// 3. Equilibrium identity of the 1-D quadratic relaxation.

void criterion_equilibrium_identity() {
    KineticsSystem sys;
    sys.loss = KineticsLoss::quadratic;
    sys.target = {0.3};
    sys.curvature = {1.0};
    sys.grid = make_grid(ConstraintKind::ternary, 1.0);
    sys.tau_w = 1.0;
    sys.tau_lambda = 20.0;
    sys.slope = 2.0;
    sys.window_mode = WindowMode::none;

    IntegrateOptions options;
    options.t_end = 500.0;
    options.dt = 1e-3;
    options.method = IntegrationMethod::rk4;
    options.record_every = 1;
    options.stop_dwdt_below = 1e-8;
    const Trajectory tr = integrate(sys, {0.3}, {0.0}, options);
    expect(tr.stop_reached, "weight velocity never fell below 1e-8");

    const TrajectorySample& end = tr.samples.back();
    const double lambda_star = end.lambda[0];
    const double loss_grad = std::abs(end.w[0] - 0.3);

    expect(std::abs(lambda_star - 0.15) <= 1e-3 * 0.15,
           "lambda* = " + fmt(lambda_star) + ", expected 0.15");
    expect(std::abs(loss_grad - 2.0 * lambda_star) <= 1e-3 * loss_grad,
           "|dC/dw| = " + fmt(loss_grad) + " vs 2 lambda* = " + fmt(2.0 * lambda_star));

    double delta_cs = 0.0;
    for (std::size_t k = 0; k + 1 < tr.samples.size(); ++k)
        delta_cs += tr.samples[k].cs[0] * (tr.samples[k + 1].t - tr.samples[k].t);
    const double from_quadrature = delta_cs / sys.tau_lambda;
    expect(std::abs(lambda_star - from_quadrature) <= 1e-3 * lambda_star,
           "lambda* = " + fmt(lambda_star) + " vs quadrature " + fmt(from_quadrature));
}

// ---------------------------------------------------------------------
// 4. Lyapunov decomposition against finite differences of L(t).

void check_trajectory_dldt(const KineticsSystem& sys, const Trajectory& tr, double floor) {
    std::size_t checked = 0;
    for (std::size_t k = 1; k + 1 < tr.samples.size(); ++k) {
        const auto& prev = tr.samples[k - 1];
        const auto& here = tr.samples[k];
        const auto& next = tr.samples[k + 1];
        if (std::abs(here.dldt) < floor)
            continue;
        // Skip samples where any weight crossed a window edge between the
        // differencing neighbours (the g growth moves the edges).
        bool crossing = false;
        for (std::size_t i = 0; i < here.w.size(); ++i) {
            const double a = sys.ucs(prev.w[i], prev.g);
            const double b = sys.ucs(here.w[i], here.g);
            const double c = sys.ucs(next.w[i], next.g);
            crossing |= a != b || b != c;
        }
        if (crossing)
            continue;
        const double fd = (next.lagrangian - prev.lagrangian) / (next.t - prev.t);
        expect(std::abs(fd - here.dldt) <= 1e-4 * std::abs(here.dldt),
               "t=" + fmt(here.t) + ": dL/dt " + fmt(here.dldt) + " vs fd " + fmt(fd));
        ++checked;
    }
    expect(checked > 100, "too few checkable samples (" + std::to_string(checked) + ")");
}

void criterion_lyapunov_consistency() {
    KineticsSystem sys;
    sys.loss = KineticsLoss::quadratic;
    sys.target = {0.42, -0.28};
    sys.curvature = {1.0, 1.4};
    sys.grid = make_grid(ConstraintKind::ternary, 1.0);
    sys.tau_w = 1.0;
    sys.tau_lambda = 12.0;
    sys.window_mode = WindowMode::none;

    IntegrateOptions options;
    options.t_end = 4.0;
    options.dt = 1e-4;
    options.method = IntegrationMethod::rk4;
    options.record_every = 1;
    check_trajectory_dldt(sys, integrate(sys, {0.9, -0.8}, {0.05, 0.1}, options), 1e-3);

    sys.window_mode = WindowMode::vanishing;
    check_trajectory_dldt(sys, integrate(sys, {0.9, -0.8}, {0.05, 0.1}, options), 1e-3);
}

// ---------------------------------------------------------------------
// 5 + 7. The toy-scale CBP run and its population step response.

struct ToyRun {
    double pretrained_acc = 0.0;
    std::vector<MetricsRow> rows;
    std::vector<double> near_fraction; // per epoch, within 0.02*span of a level
    double final_cfs = 1.0;
    double final_quant_acc = 0.0;
};

double near_grid_fraction(const TrainState& state, double rel_delta) {
    std::size_t hits = 0, total = 0;
    for (std::size_t l = 0; l < state.net.layers().size(); ++l) {
        const Layer& layer = state.net.layers()[l];
        if (layer.quant.exempt)
            continue;
        const QuantGrid& grid = state.grids[l];
        const double delta = rel_delta * grid.span();
        for (std::size_t i = 0; i < layer.weights.size(); ++i) {
            const double w = layer.weights.data()[i];
            for (double level : grid.q)
                if (std::abs(w - level) <= delta) {
                    ++hits;
                    break;
                }
            ++total;
        }
    }
    return total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
}

ToyRun toy_cbp_run(std::uint64_t seed, AblationMode mode, std::uint64_t epochs) {
    Config config; // defaults: two-moons 2000/500, 2-16-16-2, ternary
    config.set("seed", std::to_string(seed));
    auto [train, eval_set] = load_dataset(config);

    ToyRun out;
    TrainState pre = pretrain_network(config, train, eval_set);
    out.pretrained_acc = evaluate(pre.net, {}, eval_set, ForwardMode::full_precision);

    TrainState state = make_train_state(std::move(pre.net), ConstraintKind::ternary, mode,
                                        config.get_uint("seed") + 2);
    state.opt.eta_w = config.get_double("eta_w");
    state.opt.momentum = config.get_double("momentum");
    state.opt.weight_decay = config.get_double("weight_decay");
    state.opt.lr_decay_trigger_g = config.get_double("lr_decay_g");
    state.multipliers.eta_lambda = config.get_double("eta_lambda");
    state.multipliers.p_max = config.get_int("p_max");

    RunOptions options;
    options.epochs = epochs;
    options.batch_size = static_cast<std::size_t>(config.get_int("batch_size"));
    run_cbp(state, train, eval_set, options, [&](const MetricsRow& row, const TrainState& s) {
        out.rows.push_back(row);
        out.near_fraction.push_back(near_grid_fraction(s, 0.02));
    });
    out.final_cfs = out.rows.back().cfs;
    out.final_quant_acc = out.rows.back().eval_top1;
    return out;
}

const ToyRun& shared_toy_run() {
    static const ToyRun run = toy_cbp_run(1, AblationMode::cbp, 200);
    return run;
}

void criterion_toy_convergence() {
    const ToyRun& run = shared_toy_run();
    expect(run.final_cfs < 1e-3,
           "final CFS " + fmt(run.final_cfs) + " not below 1e-3");
    expect(run.final_quant_acc >= run.pretrained_acc - 0.02,
           "quantized accuracy " + fmt(run.final_quant_acc) + " more than 2pp below pretrained " +
               fmt(run.pretrained_acc));
}

void criterion_population_step_response() {
    const ToyRun& run = shared_toy_run();
    bool any_update = false;
    // An update event fires at the end of epoch e; its response is the
    // population change over the following epoch, the first one trained
    // under the new (g, lambda).
    for (std::size_t e = 0; e + 1 < run.rows.size(); ++e) {
        if (!run.rows[e].multiplier_updated)
            continue;
        any_update = true;
        expect(run.near_fraction[e + 1] >= run.near_fraction[e] - 0.01,
               "event at epoch " + std::to_string(run.rows[e].epoch) + ": fraction fell from " +
                   fmt(run.near_fraction[e]) + " to " + fmt(run.near_fraction[e + 1]));
    }
    expect(any_update, "the run never updated the multipliers");
    expect(run.near_fraction.back() > 0.99,
           "converged run tracks only " + fmt(run.near_fraction.back()) + " of the weights");
}

// ---------------------------------------------------------------------
// 6. Ablation ordering over three seeds.

void criterion_ablation_ordering() {
    double acc[3] = {0, 0, 0}, score[3] = {0, 0, 0};
    const AblationMode modes[3] = {AblationMode::cbp, AblationMode::ste_only,
                                   AblationMode::cbp_no_window};
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        for (int m = 0; m < 3; ++m) {
            const ToyRun run = (seed == 1 && modes[m] == AblationMode::cbp)
                                   ? shared_toy_run()
                                   : toy_cbp_run(seed, modes[m], 200);
            acc[m] += run.final_quant_acc / 3.0;
            score[m] += run.final_cfs / 3.0;
        }
    }
    expect(acc[0] >= acc[1],
           "acc(cbp) " + fmt(acc[0]) + " < acc(ste-only) " + fmt(acc[1]));
    expect(acc[1] >= acc[2],
           "acc(ste-only) " + fmt(acc[1]) + " < acc(cbp-no-window) " + fmt(acc[2]));
    expect(score[2] <= score[0],
           "cfs(cbp-no-window) " + fmt(score[2]) + " > cfs(cbp) " + fmt(score[0]));
    expect(score[0] < score[1],
           "cfs(cbp) " + fmt(score[0]) + " >= cfs(ste-only) " + fmt(score[1]));
}

// ---------------------------------------------------------------------
// 8. FLOP model at the published AlexNet scale.

void criterion_flop_model() {
    // Backprop at this scale costs about 1.45 GFLOPs per step (twice the
    // forward pass) over 61.1 M parameters.
    const double backprop_flops = 1.45e9;
    const double forward_flops = backprop_flops / 2.0;
    const double n_w = 61100840.0;
    const double ratio = flop_estimate(n_w, forward_flops, 0.2) / backprop_flops;
    expect(std::abs(ratio - 1.25) <= 0.02 * 1.25,
           "overhead ratio " + fmt(ratio) + " not within 2% of 1.25");
}

// ---------------------------------------------------------------------
// 9. Determinism and persistence across a mid-run checkpoint.

void criterion_checkpoint_determinism() {
    Config config;
    config.set("data_n_train", "600");
    config.set("data_n_eval", "200");
    config.set("pretrain_epochs", "30");
    config.set("p_max", "4");
    auto [train, eval_set] = load_dataset(config);
    TrainState pre = pretrain_network(config, train, eval_set);

    auto fresh_state = [&]() {
        TrainState state = make_train_state(Network(pre.net), ConstraintKind::ternary,
                                            AblationMode::cbp, config.get_uint("seed") + 2);
        state.multipliers.p_max = 4;
        return state;
    };

    RunOptions half;
    half.epochs = 15;
    half.batch_size = 32;

    std::vector<std::string> uninterrupted;
    {
        TrainState state = fresh_state();
        RunOptions full;
        full.epochs = 30;
        full.batch_size = 32;
        run_cbp(state, train, eval_set, full, [&](const MetricsRow& row, const TrainState&) {
            uninterrupted.push_back(metrics_csv_row(row));
        });
    }

    const std::string path =
        (std::filesystem::temp_directory_path() / "cbp_acceptance_mid.ckpt").string();
    {
        TrainState state = fresh_state();
        run_cbp(state, train, eval_set, half, nullptr);
        write_checkpoint(state, config.serialize(), path);
    }

    std::vector<std::string> resumed;
    {
        TrainState state = read_checkpoint(path).state;
        run_cbp(state, train, eval_set, half, [&](const MetricsRow& row, const TrainState&) {
            resumed.push_back(metrics_csv_row(row));
        });
    }

    expect(uninterrupted.size() == 30, "expected 30 uninterrupted rows");
    expect(resumed.size() == 15, "expected 15 resumed rows");
    for (std::size_t i = 0; i < resumed.size(); ++i)
        expect(resumed[i] == uninterrupted[15 + i],
               "metrics diverge at epoch " + std::to_string(16 + i) + ":\n  resumed   " +
                   resumed[i] + "\n  reference " + uninterrupted[15 + i]);
}

} // namespace

int main() {
    run_criterion(1, "constraint-math oracle equivalence", 10, criterion_oracle_equivalence);
    run_criterion(2, "gradient fidelity of the Lagrangian", 30, criterion_gradient_fidelity);
    run_criterion(3, "equilibrium identity (1-D quadratic)", 5, criterion_equilibrium_identity);
    run_criterion(4, "Lyapunov decomposition consistency", 10, criterion_lyapunov_consistency);
    run_criterion(5, "toy-scale CBP convergence", 180, criterion_toy_convergence);
    run_criterion(6, "ablation ordering over three seeds", 600, criterion_ablation_ordering);
    run_criterion(7, "population step response at g updates", 0,
                  criterion_population_step_response);
    run_criterion(8, "FLOP overhead model", 0, criterion_flop_model);
    run_criterion(9, "determinism across a mid-run checkpoint", 0,
                  criterion_checkpoint_determinism);
    if (g_failures)
        std::printf("%d criterion(s) failed\n", g_failures);
    else
        std::printf("all criteria passed\n");
    return g_failures;
}
