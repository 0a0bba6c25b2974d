#pragma once

#include "dataset.hpp"
#include "grid.hpp"
#include "net.hpp"
#include "rng.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace cbp {

enum class AblationMode { cbp, cbp_no_window, ste_only, full_precision };
enum class AscentRule { adam, raw };
enum class GSchedule { three_tier, two_tier };

AblationMode ablation_from_name(const std::string& name);
const char* ablation_name(AblationMode mode);

/// Window growth per update event. Three-tier is the discrete-training
/// schedule (+1 below 10, +10 below 100, +100 beyond); two-tier caps the
/// increment at +10.
double g_increment(double g, GSchedule schedule);

/// Lagrange-multiplier side of the saddle-point iteration: one multiplier
/// per constrained weight, updated by gradient ascent on the Lagrangian.
struct MultiplierState {
    std::vector<double> lambda;
    std::vector<double> moment1; // adam buffers
    std::vector<double> moment2;
    std::uint64_t step = 0;
    double eta_lambda = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    AscentRule rule = AscentRule::adam;
    std::int64_t p = 0;       // epochs since the last update
    std::int64_t p_max = 20;  // patience bound
    double l_sum_prev = std::numeric_limits<double>::infinity();

    double l1() const;
};

struct WeightOptimizerState {
    std::vector<Matrix> w_velocity;
    std::vector<std::vector<double>> b_velocity;
    double eta_w = 0.01;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    double lr_decay_trigger_g = 20.0;
    double lr_decay_factor = 0.1;
    bool lr_decay_applied = false;
};

/// Everything needed to continue training: the checkpointable unit.
struct TrainState {
    Network net;
    std::vector<QuantGrid> grids; // one slot per layer; exempt slots unused
    MultiplierState multipliers;
    WeightOptimizerState opt;
    double g = 1.0;
    std::uint64_t epoch = 0;
    Rng rng;
    AblationMode mode = AblationMode::cbp;
    GSchedule g_schedule = GSchedule::three_tier;
    ScalePolicy scale_policy = ScalePolicy::frozen_at_start;
    bool mid_epoch = false;

    bool uses_constraint() const {
        return mode == AblationMode::cbp || mode == AblationMode::cbp_no_window;
    }
    bool uses_quantized_forward() const { return mode != AblationMode::full_precision; }
    bool uses_window() const { return mode == AblationMode::cbp; }
};

/// Build a fresh CBP state around a (pre-trained) network: grids from the
/// current layer-wise scale factors, multipliers zeroed, g = 1.
TrainState make_train_state(Network net, ConstraintKind kind, AblationMode mode,
                            std::uint64_t shuffle_seed);

/// Set the shared window variable and propagate it to every layer grid.
void set_window_variable(TrainState& state, double g);

/// Gated constraint value of one weight under the state's window mode.
double state_cs(const TrainState& state, double w, const QuantGrid& grid);
double state_cs_grad(const TrainState& state, double w, const QuantGrid& grid);

/// cs(w) for every constrained weight, flattened layer-major.
std::vector<double> constrained_cs_values(const TrainState& state);

/// Constrained weights flattened layer-major (for CFS, population tracking).
std::vector<double> constrained_weights(const Network& net);

/// CFS over the state's constrained weights (ungated sawtooth mean).
double state_cfs(const TrainState& state);

struct LagrangianParts {
    double total = 0.0;
    double loss = 0.0;
    double constraint = 0.0; // lambda . cs(W)
};

/// L = C + lambda^T cs(W). The loss runs through the requested forward mode
/// (training uses the quantized pass); the constraint term always uses the
/// real-valued weights.
LagrangianParts lagrangian(const TrainState& state, const Matrix& batch,
                           const std::vector<int>& labels,
                           ForwardMode loss_mode = ForwardMode::quantized);

/// Analytic d(L)/d(W) per layer: straight-through loss gradient plus
/// weight decay plus lambda-weighted constraint subgradients. Exposed for
/// gradient-fidelity checks; weight_step applies the same quantities.
Gradients lagrangian_weight_grads(const TrainState& state, const Matrix& batch,
                                  const std::vector<int>& labels,
                                  ForwardMode loss_mode = ForwardMode::quantized,
                                  LagrangianParts* parts = nullptr);

/// One minibatch descent step on W (momentum SGD on the Lagrangian, then
/// clip to the grid range). Returns the batch Lagrangian decomposition.
/// Throws std::runtime_error naming the layer on non-finite gradients.
LagrangianParts weight_step(TrainState& state, const Matrix& batch,
                            const std::vector<int>& labels);

/// Gradient-ascent update of the multipliers from per-weight cs values.
/// Only legal at an epoch boundary.
void multiplier_step(TrainState& state, const std::vector<double>& epoch_cs_values);

/// End-of-epoch bookkeeping: patience, conditional g growth + multiplier
/// update, learning-rate decay trigger. Returns true when the multipliers
/// were updated.
bool epoch_scheduler(TrainState& state, double l_sum);

struct MetricsRow {
    std::uint64_t epoch = 0;
    double train_loss = 0.0;
    double lagrangian_sum = 0.0;
    double cfs = 0.0;
    double eval_top1 = 0.0;
    double g = 1.0;
    double lambda_l1 = 0.0;
    bool multiplier_updated = false;
};

using MetricsSink = std::function<void(const MetricsRow&, const TrainState&)>;

struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunOptions {
    std::uint64_t epochs = 0;
    std::size_t batch_size = 32;
};

/// The full training loop: initial multiplier update (fresh states only),
/// per-batch weight steps, per-epoch scheduler, one metrics row per epoch.
/// Throws DivergenceError when the Lagrangian stops being finite; the state
/// then still holds the last finite weights.
void run_cbp(TrainState& state, const Dataset& train, const Dataset& eval_set,
             const RunOptions& options, const MetricsSink& sink);

/// Top-1 accuracy of `net` on `ds` under the given forward mode.
double evaluate(const Network& net, const std::vector<QuantGrid>& grids, const Dataset& ds,
                ForwardMode mode);

} // namespace cbp
