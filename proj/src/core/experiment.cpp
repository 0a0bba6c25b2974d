#include "experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cbp {

namespace fs = std::filesystem;

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string metrics_csv_header() {
    return "epoch,train_loss,lagrangian_sum,cfs,eval_top1,g,lambda_l1,multiplier_updated";
}

std::string metrics_csv_row(const MetricsRow& row) {
    std::ostringstream os;
    os << row.epoch << ',' << format_double(row.train_loss) << ','
       << format_double(row.lagrangian_sum) << ',' << format_double(row.cfs) << ','
       << format_double(row.eval_top1) << ',' << format_double(row.g) << ','
       << format_double(row.lambda_l1) << ',' << (row.multiplier_updated ? 1 : 0);
    return os.str();
}

std::pair<Dataset, Dataset> load_dataset(const Config& config) {
    const std::string& kind = config.get("dataset");
    if (kind == "two-moons" || kind == "blobs") {
        const std::size_t n_train = config.get_uint("data_n_train");
        const std::size_t n_eval = config.get_uint("data_n_eval");
        // One stream generates train then eval so the split is a function of
        // (sizes, seed) alone.
        Dataset all =
            kind == "two-moons"
                ? make_two_moons(n_train + n_eval, config.get_double("data_noise"),
                                 config.get_uint("data_seed"))
                : make_blobs(n_train + n_eval, config.get_uint("data_blobs_k"),
                             config.get_double("data_blobs_std"), config.get_uint("data_seed"));
        // Interleave the split so both halves cover both classes.
        Dataset train, eval_set;
        train.features = Matrix(n_train, all.dim());
        eval_set.features = Matrix(n_eval, all.dim());
        train.n_classes = eval_set.n_classes = all.n_classes;
        const std::size_t total = all.size();
        const std::size_t stride =
            n_eval > 0 ? std::max<std::size_t>(1, total / n_eval) : total + 1;
        std::size_t ti = 0, ei = 0;
        for (std::size_t i = 0; i < total; ++i) {
            const bool eval_turn = ei < n_eval && (i % stride == 0 || total - i <= n_eval - ei);
            Dataset& dst = eval_turn ? eval_set : train;
            std::size_t& idx = eval_turn ? ei : ti;
            for (std::size_t c = 0; c < all.dim(); ++c)
                dst.features(idx, c) = all.features(i, c);
            dst.labels.push_back(all.labels[i]);
            ++idx;
        }
        return {std::move(train), std::move(eval_set)};
    }
    if (kind == "csv") {
        Dataset train = load_csv(config.get("data_train"));
        Dataset eval_set = load_csv(config.get("data_eval"));
        eval_set.n_classes = train.n_classes = std::max(train.n_classes, eval_set.n_classes);
        return {std::move(train), std::move(eval_set)};
    }
    if (kind == "idx") {
        Dataset train = load_idx(config.get("data_train_images"), config.get("data_train_labels"));
        Dataset eval_set = load_idx(config.get("data_eval_images"), config.get("data_eval_labels"));
        eval_set.n_classes = train.n_classes = std::max(train.n_classes, eval_set.n_classes);
        return {std::move(train), std::move(eval_set)};
    }
    throw std::invalid_argument("load_dataset: unknown dataset kind '" + kind + "'");
}

Network build_network(const Config& config) {
    Rng rng(config.get_uint("seed"));
    const std::string& constraint = config.get("constraint");
    const ConstraintKind kind = constraint_kind_from_name(constraint);
    return Network::dense(config.get_size_list("layers"), rng, kind);
}

namespace {

void apply_optimizer_config(TrainState& state, const Config& config, bool pretrain) {
    state.opt.eta_w = config.get_double(pretrain ? "pretrain_eta_w" : "eta_w");
    state.opt.momentum = config.get_double("momentum");
    state.opt.weight_decay = config.get_double("weight_decay");
    state.opt.lr_decay_trigger_g = config.get_double("lr_decay_g");
    state.multipliers.eta_lambda = config.get_double("eta_lambda");
    state.multipliers.p_max = config.get_int("p_max");
    state.multipliers.rule =
        config.get("ascent") == "raw" ? AscentRule::raw : AscentRule::adam;
    state.g_schedule =
        config.get("g_schedule") == "two-tier" ? GSchedule::two_tier : GSchedule::three_tier;
    state.scale_policy = config.get("scale_policy") == "per-epoch"
                             ? ScalePolicy::recompute_each_epoch
                             : ScalePolicy::frozen_at_start;
}

std::vector<QuantGrid> custom_grids_from_config(const Config& config, const Network& net) {
    // constraint=custom:v1,v2,... shares one explicit level set across all
    // constrained layers (no layer-wise scale for user grids).
    const std::string& value = config.get("constraint");
    const std::string prefix = "custom:";
    if (value.rfind(prefix, 0) != 0)
        throw std::invalid_argument(
            "constraint=custom needs explicit levels, e.g. custom:-1,0,1");
    std::vector<double> levels;
    std::stringstream ss(value.substr(prefix.size()));
    std::string cell;
    while (std::getline(ss, cell, ','))
        levels.push_back(std::stod(cell));
    QuantGrid grid = make_custom_grid(levels);
    std::vector<QuantGrid> grids(net.layers().size());
    for (std::size_t l = 0; l < net.layers().size(); ++l)
        if (!net.layers()[l].quant.exempt)
            grids[l] = grid;
    return grids;
}

std::string pretrain_path(const Config& config) {
    if (config.has("pretrain_checkpoint"))
        return config.get("pretrain_checkpoint");
    return (fs::path(config.get("out_dir")) / "pretrain.ckpt").string();
}

class MetricsWriter {
public:
    MetricsWriter(const std::string& path) : path_(path), out_(path) {
        if (!out_)
            throw std::runtime_error("cannot open " + path + " for writing");
        out_ << metrics_csv_header() << '\n';
        out_.flush();
    }

    void write(const MetricsRow& row) {
        out_ << metrics_csv_row(row) << '\n';
        out_.flush();
        if (!out_)
            throw std::runtime_error("metrics write failed for " + path_);
    }

private:
    std::string path_;
    std::ofstream out_;
};

constexpr std::size_t kHistogramBins = 201;

void write_histogram_row(std::ofstream& out, std::uint64_t epoch, const TrainState& state) {
    for (std::size_t l = 0; l < state.net.layers().size(); ++l) {
        const Layer& layer = state.net.layers()[l];
        if (layer.quant.exempt)
            continue;
        const QuantGrid& grid = state.grids[l];
        const double span = grid.span();
        const double lo = grid.lo() - 0.1 * span;
        const double hi = grid.hi() + 0.1 * span;
        std::vector<std::uint64_t> bins(kHistogramBins, 0);
        for (std::size_t i = 0; i < layer.weights.size(); ++i) {
            const double w = layer.weights.data()[i];
            auto b = static_cast<std::ptrdiff_t>((w - lo) / (hi - lo) * kHistogramBins);
            b = std::clamp<std::ptrdiff_t>(b, 0, kHistogramBins - 1);
            ++bins[static_cast<std::size_t>(b)];
        }
        out << epoch << ',' << l;
        for (std::uint64_t b : bins)
            out << ',' << b;
        out << '\n';
    }
    out.flush();
}

} // namespace

TrainState pretrain_network(const Config& config, const Dataset& train, const Dataset& eval_set) {
    Network net = build_network(config);
    TrainState state =
        make_train_state(std::move(net), constraint_kind_from_name(config.get("constraint")),
                         AblationMode::full_precision, config.get_uint("seed") + 1);
    apply_optimizer_config(state, config, true);
    RunOptions options;
    options.epochs = config.get_uint("pretrain_epochs");
    options.batch_size = static_cast<std::size_t>(config.get_int("batch_size"));
    run_cbp(state, train, eval_set, options, nullptr);
    return state;
}

double run_pretrain(const Config& config) {
    config.validate();
    const fs::path out_dir(config.get("out_dir"));
    fs::create_directories(out_dir);
    auto [train, eval_set] = load_dataset(config);

    Network net = build_network(config);
    TrainState state =
        make_train_state(std::move(net), constraint_kind_from_name(config.get("constraint")),
                         AblationMode::full_precision, config.get_uint("seed") + 1);
    apply_optimizer_config(state, config, true);

    MetricsWriter metrics((out_dir / "pretrain_metrics.csv").string());
    double last_acc = 0.0;
    RunOptions options;
    options.epochs = config.get_uint("pretrain_epochs");
    options.batch_size = static_cast<std::size_t>(config.get_int("batch_size"));
    run_cbp(state, train, eval_set, options,
            [&](const MetricsRow& row, const TrainState&) {
                metrics.write(row);
                last_acc = row.eval_top1;
            });
    write_checkpoint(state, config.serialize(), pretrain_path(config));
    return last_acc;
}

ExperimentResult run_experiment(const Config& config) {
    config.validate();
    const fs::path out_dir(config.get("out_dir"));
    fs::create_directories(out_dir);
    auto [train, eval_set] = load_dataset(config);

    const AblationMode mode = ablation_from_name(config.get("ablation"));
    const ConstraintKind kind = constraint_kind_from_name(config.get("constraint"));

    TrainState state;
    double pretrained_full_acc = 0.0;
    if (config.has("resume")) {
        state = read_checkpoint(config.get("resume")).state;
        if (state.mode != mode)
            throw std::invalid_argument("resume: checkpoint ablation mode '" +
                                        std::string(ablation_name(state.mode)) +
                                        "' does not match config '" + ablation_name(mode) + "'");
    } else {
        Network net;
        const std::string source = pretrain_path(config);
        if (fs::exists(source)) {
            TrainState pre = read_checkpoint(source).state;
            net = std::move(pre.net);
            pretrained_full_acc = evaluate(net, {}, eval_set, ForwardMode::full_precision);
        } else if (config.get_bool("allow_untrained")) {
            // Post-training from scratch rarely reaches pre-trained accuracy;
            // allowed only behind the explicit flag.
            net = build_network(config);
        } else {
            throw std::runtime_error("run_experiment: no pre-trained checkpoint at '" + source +
                                     "'; run pretrain first or set allow_untrained=true");
        }
        for (auto& layer : net.layers())
            layer.quant.kind = kind;
        state = make_train_state(std::move(net), kind, mode, config.get_uint("seed") + 2);
        if (mode != AblationMode::full_precision && kind == ConstraintKind::custom)
            state.grids = custom_grids_from_config(config, state.net);
        apply_optimizer_config(state, config, false);
    }

    MetricsWriter metrics((out_dir / "metrics.csv").string());
    std::ofstream hist((out_dir / "histograms.csv").string());
    if (!hist)
        throw std::runtime_error("cannot open histograms.csv under " + out_dir.string());
    hist << "epoch,layer";
    for (std::size_t b = 0; b < kHistogramBins; ++b)
        hist << ",b" << b;
    hist << '\n';

    const std::uint64_t checkpoint_every = config.get_uint("checkpoint_every");
    const auto t_start = std::chrono::steady_clock::now();

    ExperimentResult result;
    RunOptions options;
    options.epochs = config.get_uint("epochs");
    options.batch_size = static_cast<std::size_t>(config.get_int("batch_size"));
    try {
        run_cbp(state, train, eval_set, options,
                [&](const MetricsRow& row, const TrainState& s) {
                    metrics.write(row);
                    if (mode != AblationMode::full_precision)
                        write_histogram_row(hist, row.epoch, s);
                    if (checkpoint_every > 0 && row.epoch % checkpoint_every == 0)
                        write_checkpoint(
                            s, config.serialize(),
                            (out_dir / ("epoch_" + std::to_string(row.epoch) + ".ckpt")).string());
                    result.final_cfs = row.cfs;
                    result.final_eval_quant = row.eval_top1;
                    result.final_g = row.g;
                    result.epochs = row.epoch;
                });
    } catch (const DivergenceError&) {
        const std::string abort_path = (out_dir / "abort.ckpt").string();
        write_checkpoint(state, config.serialize(), abort_path);
        throw std::runtime_error("run_experiment: training diverged; last finite state written to " +
                                 abort_path);
    }

    result.final_eval_full = evaluate(state.net, state.grids, eval_set, ForwardMode::full_precision);
    if (options.epochs == 0)
        result.final_eval_quant =
            evaluate(state.net, state.grids, eval_set,
                     state.uses_quantized_forward() ? ForwardMode::quantized
                                                    : ForwardMode::full_precision);

    result.checkpoint_path = (out_dir / "ckpt.bin").string();
    result.metrics_path = (out_dir / "metrics.csv").string();
    write_checkpoint(state, config.serialize(), result.checkpoint_path);

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    std::ofstream summary((out_dir / "summary.json").string());
    summary << "{\n"
            << "  \"ablation\": \"" << ablation_name(mode) << "\",\n"
            << "  \"epochs\": " << result.epochs << ",\n"
            << "  \"final_eval_top1_quantized\": " << format_double(result.final_eval_quant) << ",\n"
            << "  \"final_eval_top1_full_precision\": " << format_double(result.final_eval_full) << ",\n"
            << "  \"pretrained_eval_top1\": " << format_double(pretrained_full_acc) << ",\n"
            << "  \"final_cfs\": " << format_double(result.final_cfs) << ",\n"
            << "  \"final_g\": " << format_double(result.final_g) << ",\n"
            << "  \"wall_time_sec\": " << format_double(wall) << "\n"
            << "}\n";
    return result;
}

EvalResult run_eval(const Config& config, const std::string& checkpoint_path) {
    const Checkpoint ck = read_checkpoint(checkpoint_path);
    auto [train, eval_set] = load_dataset(config);
    (void)train;
    EvalResult result;
    result.full_precision_top1 =
        evaluate(ck.state.net, ck.state.grids, eval_set, ForwardMode::full_precision);
    result.quantized_top1 =
        ck.state.uses_quantized_forward()
            ? evaluate(ck.state.net, ck.state.grids, eval_set, ForwardMode::quantized)
            : result.full_precision_top1;
    return result;
}

std::string inspect_checkpoint(const std::string& path) {
    return inspect_text(read_checkpoint(path), path);
}

std::string inspect_text(const Checkpoint& ck, const std::string& label) {
    const TrainState& state = ck.state;
    auto brief = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.5g", v);
        return std::string(buf);
    };
    std::ostringstream os;
    os << "checkpoint: " << label << "\n"
       << "format version: " << ck.version << "\n"
       << "ablation: " << ablation_name(state.mode) << "\n"
       << "epoch: " << state.epoch << "\n"
       << "g: " << brief(state.g) << "\n"
       << "patience p: " << state.multipliers.p << " (p_max " << state.multipliers.p_max << ")\n";

    const auto& lam = state.multipliers.lambda;
    double lam_max = 0.0;
    for (double x : lam)
        lam_max = std::max(lam_max, std::abs(x));
    os << "lambda: count=" << lam.size() << " l1=" << brief(state.multipliers.l1())
       << " max=" << brief(lam_max) << "\n";

    for (std::size_t l = 0; l < state.net.layers().size(); ++l) {
        const Layer& layer = state.net.layers()[l];
        os << "layer " << l << ": " << layer.weights.rows() << "x" << layer.weights.cols();
        if (layer.quant.exempt) {
            os << " exempt\n";
            continue;
        }
        if (state.grids[l].levels() < 2) {
            os << " unconstrained\n";
            continue;
        }
        const QuantGrid& grid = state.grids[l];
        std::vector<double> weights(layer.weights.storage());
        os << " " << constraint_kind_name(layer.quant.kind) << " levels=" << grid.levels()
           << " range=[" << brief(grid.lo()) << ", " << brief(grid.hi())
           << "] cfs=" << brief(cfs(weights, grid)) << "\n";

        const auto pops = population_track({weights}, {}, grid, 0.02 * grid.span());
        os << "  near-level fractions:";
        for (std::size_t qi = 0; qi < grid.levels(); ++qi)
            os << " " << brief(grid.q[qi]) << ":" << brief(pops.front().per_level[qi]);
        os << "\n";

        // 41-bucket ASCII histogram over the grid range +-10%.
        constexpr std::size_t kBuckets = 41;
        std::vector<std::size_t> buckets(kBuckets, 0);
        const double lo = grid.lo() - 0.1 * grid.span();
        const double hi = grid.hi() + 0.1 * grid.span();
        std::size_t peak = 1;
        for (double w : weights) {
            auto b = static_cast<std::ptrdiff_t>((w - lo) / (hi - lo) * kBuckets);
            b = std::clamp<std::ptrdiff_t>(b, 0, kBuckets - 1);
            peak = std::max(peak, ++buckets[static_cast<std::size_t>(b)]);
        }
        const char* shades = " .:-=+*#%@";
        os << "  histogram [";
        for (std::size_t b = 0; b < kBuckets; ++b)
            os << shades[buckets[b] == 0 ? 0 : 1 + (9 * (buckets[b] - 1)) / peak];
        os << "]\n";
    }
    return os.str();
}

std::string run_kinetics(const Config& config) {
    const fs::path out_dir(config.get("out_dir"));
    fs::create_directories(out_dir);

    KineticsSystem system;
    system.loss = config.get("kin_loss") == "logistic" ? KineticsLoss::logistic
                                                       : KineticsLoss::quadratic;
    system.target = config.get_double_list("kin_target");
    system.curvature = config.get_double_list("kin_curvature");
    if (system.curvature.size() == 1 && system.target.size() > 1)
        system.curvature.assign(system.target.size(), system.curvature.front());
    if (system.curvature.size() != system.target.size())
        throw std::invalid_argument("kinetics: kin_curvature size must match kin_target");
    system.grid = make_grid(constraint_kind_from_name(config.get("kin_constraint")),
                            config.get_double("kin_scale"));
    system.tau_w = config.get_double("kin_tau_w");
    system.tau_lambda = config.get_double("kin_tau_lambda");
    system.slope = config.get_double("kin_slope");
    system.window_mode =
        config.get("kin_window") == "vanishing" ? WindowMode::vanishing : WindowMode::none;
    if (!(system.tau_w > 0.0) || !(system.tau_lambda > 0.0) || !(system.slope > 0.0))
        throw std::invalid_argument("kinetics: time constants and slope must be positive");

    std::vector<double> w0 = config.get_double_list("kin_w0");
    if (w0.size() != system.dim())
        throw std::invalid_argument("kinetics: kin_w0 size must match kin_target");
    std::vector<double> lambda0 = config.get_double_list("kin_lambda0");
    if (lambda0.size() == 1 && system.dim() > 1)
        lambda0.assign(system.dim(), lambda0.front());
    if (lambda0.size() != system.dim())
        throw std::invalid_argument("kinetics: kin_lambda0 size must match kin_target");

    IntegrateOptions options;
    options.t_end = config.get_double("kin_t_end");
    options.dt = config.get_double("kin_dt");
    options.method =
        config.get("kin_method") == "rk4" ? IntegrationMethod::rk4 : IntegrationMethod::euler;
    options.record_every = config.get_uint("kin_record_every");

    const Trajectory trajectory = integrate(system, std::move(w0), std::move(lambda0), options);
    const std::string out_path = config.has("kin_out")
                                     ? config.get("kin_out")
                                     : (out_dir / "trajectory.csv").string();
    write_trajectory_csv(trajectory, out_path);
    if (trajectory.aborted)
        throw std::runtime_error("kinetics: state became non-finite at t=" +
                                 format_double(trajectory.final_time) +
                                 "; partial trajectory written to " + out_path);
    return out_path;
}

} // namespace cbp
