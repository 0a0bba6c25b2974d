#include "optimizer.hpp"

#include "quantize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cbp {

AblationMode ablation_from_name(const std::string& name) {
    if (name == "cbp") return AblationMode::cbp;
    if (name == "cbp-no-window") return AblationMode::cbp_no_window;
    if (name == "ste-only") return AblationMode::ste_only;
    if (name == "full-precision") return AblationMode::full_precision;
    throw std::invalid_argument("unknown ablation mode: " + name);
}

const char* ablation_name(AblationMode mode) {
    switch (mode) {
    case AblationMode::cbp: return "cbp";
    case AblationMode::cbp_no_window: return "cbp-no-window";
    case AblationMode::ste_only: return "ste-only";
    case AblationMode::full_precision: return "full-precision";
    }
    return "?";
}

double g_increment(double g, GSchedule schedule) {
    if (g < 10.0)
        return 1.0;
    if (schedule == GSchedule::two_tier)
        return 10.0;
    return g < 100.0 ? 10.0 : 100.0;
}

double MultiplierState::l1() const {
    double acc = 0.0;
    for (double x : lambda)
        acc += std::abs(x);
    return acc;
}

TrainState make_train_state(Network net, ConstraintKind kind, AblationMode mode,
                            std::uint64_t shuffle_seed) {
    TrainState state;
    state.net = std::move(net);
    state.mode = mode;
    state.rng.reseed(shuffle_seed);
    state.grids.resize(state.net.layers().size());
    if (mode != AblationMode::full_precision) {
        for (std::size_t l = 0; l < state.net.layers().size(); ++l) {
            auto& layer = state.net.layers()[l];
            layer.quant.kind = kind;
            // Custom level sets have no scale factor; the caller installs
            // those grids explicitly.
            if (!layer.quant.exempt && kind != ConstraintKind::custom)
                state.grids[l] = make_grid(kind, scale_factor(layer.weights));
        }
    }
    if (state.uses_constraint()) {
        const std::size_t n = state.net.constrained_weight_count();
        state.multipliers.lambda.assign(n, 0.0);
        state.multipliers.moment1.assign(n, 0.0);
        state.multipliers.moment2.assign(n, 0.0);
    }
    return state;
}

void set_window_variable(TrainState& state, double g) {
    state.g = g;
    for (std::size_t l = 0; l < state.grids.size(); ++l)
        if (!state.net.layers()[l].quant.exempt && state.grids[l].levels() >= 2)
            state.grids[l].g = g;
}

double state_cs(const TrainState& state, double w, const QuantGrid& grid) {
    return state.uses_window() ? constraint_cs(w, grid) : partial_sum_Y(w, grid);
}

double state_cs_grad(const TrainState& state, double w, const QuantGrid& grid) {
    return state.uses_window() ? constraint_grad(w, grid) : sawtooth_grad(w, grid, 2.0);
}

std::vector<double> constrained_cs_values(const TrainState& state) {
    std::vector<double> out;
    out.reserve(state.multipliers.lambda.size());
    for (std::size_t l = 0; l < state.net.layers().size(); ++l) {
        const Layer& layer = state.net.layers()[l];
        if (layer.quant.exempt)
            continue;
        for (std::size_t i = 0; i < layer.weights.size(); ++i)
            out.push_back(state_cs(state, layer.weights.data()[i], state.grids[l]));
    }
    return out;
}

std::vector<double> constrained_weights(const Network& net) {
    std::vector<double> out;
    for (const Layer& layer : net.layers()) {
        if (layer.quant.exempt)
            continue;
        out.insert(out.end(), layer.weights.data(), layer.weights.data() + layer.weights.size());
    }
    return out;
}

double state_cfs(const TrainState& state) {
    std::vector<const std::vector<double>*> groups;
    std::vector<const QuantGrid*> grids;
    std::vector<std::vector<double>> storage;
    storage.reserve(state.net.layers().size());
    for (std::size_t l = 0; l < state.net.layers().size(); ++l) {
        const Layer& layer = state.net.layers()[l];
        if (layer.quant.exempt || state.grids[l].levels() < 2)
            continue;
        storage.emplace_back(layer.weights.storage());
        grids.push_back(&state.grids[l]);
    }
    for (const auto& s : storage)
        groups.push_back(&s);
    return cfs(groups, grids);
}

LagrangianParts lagrangian(const TrainState& state, const Matrix& batch,
                           const std::vector<int>& labels, ForwardMode loss_mode) {
    LagrangianParts parts;
    const ForwardMode mode =
        state.uses_quantized_forward() ? loss_mode : ForwardMode::full_precision;
    const ForwardTrace trace = state.net.forward(batch, mode, &state.grids);
    parts.loss = softmax_cross_entropy(trace.logits, labels);
    if (state.uses_constraint()) {
        const std::vector<double> cs_values = constrained_cs_values(state);
        if (cs_values.size() != state.multipliers.lambda.size())
            throw std::logic_error("lagrangian: multiplier count does not match constrained weights");
        for (std::size_t i = 0; i < cs_values.size(); ++i)
            parts.constraint += state.multipliers.lambda[i] * cs_values[i];
    }
    parts.total = parts.loss + parts.constraint;
    return parts;
}

Gradients lagrangian_weight_grads(const TrainState& state, const Matrix& batch,
                                  const std::vector<int>& labels, ForwardMode loss_mode,
                                  LagrangianParts* parts_out) {
    const ForwardMode mode =
        state.uses_quantized_forward() ? loss_mode : ForwardMode::full_precision;
    const ForwardTrace trace = state.net.forward(batch, mode, &state.grids);
    Gradients grads = state.net.backward(trace, labels);

    LagrangianParts parts;
    parts.loss = softmax_cross_entropy(trace.logits, labels);

    const double wd = state.opt.weight_decay;
    std::size_t mult_offset = 0;
    for (std::size_t l = 0; l < state.net.layers().size(); ++l) {
        const Layer& layer = state.net.layers()[l];
        if (wd != 0.0)
            axpy(grads.weights[l], wd, layer.weights);
        if (state.uses_constraint() && !layer.quant.exempt) {
            for (std::size_t i = 0; i < layer.weights.size(); ++i) {
                const double w = layer.weights.data()[i];
                const double lam = state.multipliers.lambda[mult_offset + i];
                grads.weights[l].data()[i] += lam * state_cs_grad(state, w, state.grids[l]);
                parts.constraint += lam * state_cs(state, w, state.grids[l]);
            }
            mult_offset += layer.weights.size();
        }
    }
    parts.total = parts.loss + parts.constraint;
    if (parts_out)
        *parts_out = parts;
    return grads;
}

LagrangianParts weight_step(TrainState& state, const Matrix& batch,
                            const std::vector<int>& labels) {
    LagrangianParts parts;
    Gradients grads =
        lagrangian_weight_grads(state, batch, labels, ForwardMode::quantized, &parts);

    for (std::size_t l = 0; l < state.net.layers().size(); ++l) {
        if (!all_finite(grads.weights[l]))
            throw std::runtime_error("weight_step: non-finite gradient in layer " +
                                     std::to_string(l));
        for (double gb : grads.biases[l])
            if (!std::isfinite(gb))
                throw std::runtime_error("weight_step: non-finite bias gradient in layer " +
                                         std::to_string(l));
    }

    auto& opt = state.opt;
    if (opt.w_velocity.size() != state.net.layers().size()) {
        opt.w_velocity.clear();
        opt.b_velocity.clear();
        for (const Layer& layer : state.net.layers()) {
            opt.w_velocity.emplace_back(layer.weights.rows(), layer.weights.cols());
            opt.b_velocity.emplace_back(layer.bias.size(), 0.0);
        }
    }

    for (std::size_t l = 0; l < state.net.layers().size(); ++l) {
        Layer& layer = state.net.layers()[l];
        Matrix& vw = opt.w_velocity[l];
        for (std::size_t i = 0; i < vw.size(); ++i) {
            vw.data()[i] = opt.momentum * vw.data()[i] + grads.weights[l].data()[i];
            layer.weights.data()[i] -= opt.eta_w * vw.data()[i];
        }
        if (state.uses_quantized_forward() && !layer.quant.exempt)
            clip_weights(layer.weights, state.grids[l]);
        auto& vb = opt.b_velocity[l];
        for (std::size_t i = 0; i < vb.size(); ++i) {
            vb[i] = opt.momentum * vb[i] + grads.biases[l][i];
            layer.bias[i] -= opt.eta_w * vb[i];
        }
    }
    state.mid_epoch = true;
    return parts;
}

void multiplier_step(TrainState& state, const std::vector<double>& epoch_cs_values) {
    if (state.mid_epoch)
        throw std::logic_error("multiplier_step: called mid-epoch");
    if (!state.uses_constraint())
        return;
    auto& ms = state.multipliers;
    if (epoch_cs_values.size() != ms.lambda.size())
        throw std::logic_error("multiplier_step: cs count does not match multiplier count");

    if (ms.rule == AscentRule::raw) {
        for (std::size_t i = 0; i < ms.lambda.size(); ++i)
            ms.lambda[i] += ms.eta_lambda * epoch_cs_values[i];
        ++ms.step;
        return;
    }

    ++ms.step;
    const double bc1 = 1.0 - std::pow(ms.beta1, static_cast<double>(ms.step));
    const double bc2 = 1.0 - std::pow(ms.beta2, static_cast<double>(ms.step));
    for (std::size_t i = 0; i < ms.lambda.size(); ++i) {
        const double cs = epoch_cs_values[i];
        ms.moment1[i] = ms.beta1 * ms.moment1[i] + (1.0 - ms.beta1) * cs;
        ms.moment2[i] = ms.beta2 * ms.moment2[i] + (1.0 - ms.beta2) * cs * cs;
        const double m_hat = ms.moment1[i] / bc1;
        const double v_hat = ms.moment2[i] / bc2;
        ms.lambda[i] += ms.eta_lambda * m_hat / (std::sqrt(v_hat) + ms.epsilon);
    }
}

bool epoch_scheduler(TrainState& state, double l_sum) {
    state.mid_epoch = false;
    auto& ms = state.multipliers;
    ms.p += 1;
    bool updated = false;
    if (l_sum >= ms.l_sum_prev || ms.p >= ms.p_max) {
        if (state.mode != AblationMode::full_precision) {
            set_window_variable(state, state.g + g_increment(state.g, state.g_schedule));
            if (state.uses_constraint())
                multiplier_step(state, constrained_cs_values(state));
            updated = true;
        }
        ms.p = 0;
    }
    ms.l_sum_prev = l_sum;

    auto& opt = state.opt;
    if (!opt.lr_decay_applied && state.g >= opt.lr_decay_trigger_g &&
        state.mode != AblationMode::full_precision) {
        opt.eta_w *= opt.lr_decay_factor;
        opt.lr_decay_applied = true;
    }
    return updated;
}

double evaluate(const Network& net, const std::vector<QuantGrid>& grids, const Dataset& ds,
                ForwardMode mode) {
    const ForwardTrace trace = net.forward(ds.features, mode, &grids);
    return top1_accuracy(trace.logits, ds.labels);
}

namespace {

void refresh_scales(TrainState& state) {
    for (std::size_t l = 0; l < state.net.layers().size(); ++l) {
        Layer& layer = state.net.layers()[l];
        if (layer.quant.exempt)
            continue;
        QuantGrid fresh = layer.quant.kind == ConstraintKind::custom
                              ? state.grids[l]
                              : make_grid(layer.quant.kind, scale_factor(layer.weights));
        fresh.g = state.g;
        state.grids[l] = std::move(fresh);
    }
}

} // namespace

void run_cbp(TrainState& state, const Dataset& train, const Dataset& eval_set,
             const RunOptions& options, const MetricsSink& sink) {
    if (train.size() == 0)
        throw std::invalid_argument("run_cbp: empty training set");
    if (eval_set.size() == 0)
        throw std::invalid_argument("run_cbp: empty eval set");
    if (options.batch_size == 0)
        throw std::invalid_argument("run_cbp: batch_size must be >= 1");
    validate_labels(train, state.net.output_dim());
    validate_labels(eval_set, state.net.output_dim());

    if (state.epoch == 0 && state.uses_constraint())
        multiplier_step(state, constrained_cs_values(state));

    std::vector<std::size_t> order(train.size());
    const std::uint64_t last_epoch = state.epoch + options.epochs;
    while (state.epoch < last_epoch) {
        if (state.scale_policy == ScalePolicy::recompute_each_epoch &&
            state.mode != AblationMode::full_precision)
            refresh_scales(state);

        for (std::size_t i = 0; i < order.size(); ++i)
            order[i] = i;
        state.rng.shuffle(order);

        double l_sum = 0.0;
        double loss_weighted = 0.0;
        for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
            const std::size_t count = std::min(options.batch_size, order.size() - start);
            Matrix batch(count, train.dim());
            std::vector<int> labels(count);
            for (std::size_t r = 0; r < count; ++r) {
                const std::size_t src = order[start + r];
                for (std::size_t c = 0; c < train.dim(); ++c)
                    batch(r, c) = train.features(src, c);
                labels[r] = train.labels[src];
            }
            const LagrangianParts parts = weight_step(state, batch, labels);
            if (!std::isfinite(parts.total))
                throw DivergenceError("run_cbp: non-finite Lagrangian at epoch " +
                                      std::to_string(state.epoch + 1));
            l_sum += parts.total;
            loss_weighted += parts.loss * static_cast<double>(count);
        }

        state.epoch += 1;
        state.mid_epoch = false;
        const bool updated = epoch_scheduler(state, l_sum);

        MetricsRow row;
        row.epoch = state.epoch;
        row.train_loss = loss_weighted / static_cast<double>(train.size());
        row.lagrangian_sum = l_sum;
        row.cfs = state.mode == AblationMode::full_precision ? 0.0 : state_cfs(state);
        row.eval_top1 = evaluate(state.net, state.grids, eval_set,
                                 state.uses_quantized_forward() ? ForwardMode::quantized
                                                                : ForwardMode::full_precision);
        row.g = state.g;
        row.lambda_l1 = state.multipliers.l1();
        row.multiplier_updated = updated;
        if (sink)
            sink(row, state);
    }
}

} // namespace cbp
