#pragma once

#include "checkpoint.hpp"
#include "config.hpp"
#include "dataset.hpp"
#include "kinetics.hpp"
#include "optimizer.hpp"

#include <string>
#include <utility>

namespace cbp {

/// Train/eval pair from the config's dataset keys.
std::pair<Dataset, Dataset> load_dataset(const Config& config);

/// Fresh network per the config's layers/constraint/seed.
Network build_network(const Config& config);

/// Full-precision momentum-SGD pre-training. Writes
/// <out_dir>/pretrain_metrics.csv and <out_dir>/pretrain.ckpt.
/// Returns the final eval accuracy.
double run_pretrain(const Config& config);

/// Pre-train in memory, no artifacts (used by tests and the C API).
TrainState pretrain_network(const Config& config, const Dataset& train, const Dataset& eval_set);

struct ExperimentResult {
    double final_eval_quant = 0.0;
    double final_eval_full = 0.0;
    double final_cfs = 0.0;
    double final_g = 1.0;
    std::uint64_t epochs = 0;
    std::string checkpoint_path;
    std::string metrics_path;
};

/// CBP post-training per the config's ablation mode. Writes metrics.csv,
/// histograms.csv, ckpt.bin and summary.json under out_dir; periodic
/// checkpoints per checkpoint_every; abort.ckpt on divergence.
ExperimentResult run_experiment(const Config& config);

struct EvalResult {
    double quantized_top1 = 0.0;
    double full_precision_top1 = 0.0;
};

/// Evaluate a checkpoint on the config's eval split. Full-precision
/// checkpoints report the same number twice.
EvalResult run_eval(const Config& config, const std::string& checkpoint_path);

/// Human-readable checkpoint summary: per-layer constraint info and CFS,
/// grid-level populations, an ASCII weight histogram, g and lambda stats.
std::string inspect_checkpoint(const std::string& path);
std::string inspect_text(const Checkpoint& ck, const std::string& label);

/// Run one kinetics scenario from the kin_* keys and write the trajectory
/// CSV. Returns the output path.
std::string run_kinetics(const Config& config);

/// Shared CSV helpers (17 significant digits so round-trips are exact).
std::string format_double(double v);

/// One metrics CSV row; schema:
/// epoch,train_loss,lagrangian_sum,cfs,eval_top1,g,lambda_l1,multiplier_updated
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRow& row);

} // namespace cbp
