/*
 * Constrained-backpropagation training library: C interface.
 *
 * The library trains dense feedforward networks under weight-precision
 * constraints (binary / ternary / bit-shift grids) by descending a
 * Lagrangian (task loss plus multiplier-weighted sawtooth constraint
 * terms) while the multipliers ascend, and ships a continuous-time
 * simulator of the same dynamics.
 *
 * All runs are configured through an opaque cbp_config (flat key=value
 * store; see cbp_config_keys()), produce their artifacts on disk, and are
 * deterministic given the same config. Every entry point returns a
 * cbp_status; on failure cbp_last_error() describes what went wrong.
 */

#ifndef CBP_H
#define CBP_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define CBP_API __declspec(dllexport)
#else
#define CBP_API __attribute__((visibility("default")))
#endif

typedef enum cbp_status {
    CBP_OK = 0,
    CBP_ERROR_INVALID_ARGUMENT = 1, /* bad key, value, or parameter */
    CBP_ERROR_IO = 2,               /* missing or unreadable file */
    CBP_ERROR_RUNTIME = 3,          /* training/integration failure */
} cbp_status;

CBP_API const char* cbp_status_name(cbp_status status);

/* Message for the most recent failure on this thread. Never NULL. */
CBP_API const char* cbp_last_error(void);

/* ------------------------------------------------------------------ */
/* Configuration                                                       */

typedef struct cbp_config cbp_config;

CBP_API cbp_config* cbp_config_create(void); /* all defaults */
CBP_API void cbp_config_destroy(cbp_config* config);

/* Flat key=value file; '#' starts a comment. */
CBP_API cbp_status cbp_config_load_file(cbp_config* config, const char* path);

CBP_API cbp_status cbp_config_set(cbp_config* config, const char* key, const char* value);

/* Writes the value into buf (NUL-terminated, truncating). */
CBP_API cbp_status cbp_config_get(const cbp_config* config, const char* key, char* buf,
                                  size_t buf_size);

/* Static newline-separated "key  (default) doc" listing of every key. */
CBP_API const char* cbp_config_keys(void);

/* ------------------------------------------------------------------ */
/* Runs (all artifacts land under the config's out_dir)                */

/* Full-precision pre-training; writes pretrain_metrics.csv and
 * pretrain.ckpt. On success *eval_top1_out (optional) receives the final
 * eval accuracy. */
CBP_API cbp_status cbp_run_pretrain(const cbp_config* config, double* eval_top1_out);

typedef struct cbp_train_result {
    double final_eval_top1_quantized;
    double final_eval_top1_full_precision;
    double final_cfs;
    double final_g;
    uint64_t epochs;
} cbp_train_result;

/* Constraint post-training per the config's ablation mode; writes
 * metrics.csv, histograms.csv, ckpt.bin and summary.json. */
CBP_API cbp_status cbp_run_train(const cbp_config* config, cbp_train_result* result_out);

/* Evaluate a checkpoint on the config's eval split, reporting both the
 * quantized-forward and full-precision-forward accuracy. */
CBP_API cbp_status cbp_run_eval(const cbp_config* config, const char* checkpoint_path,
                                double* quantized_top1_out, double* full_precision_top1_out);

/* Integrate the kinetics scenario in the kin_* keys and write the
 * trajectory CSV. out_path_buf (optional) receives the CSV path. */
CBP_API cbp_status cbp_run_kinetics(const cbp_config* config, char* out_path_buf,
                                    size_t out_path_size);

/* ------------------------------------------------------------------ */
/* Checkpoint inspection                                               */

typedef struct cbp_checkpoint cbp_checkpoint;

CBP_API cbp_checkpoint* cbp_checkpoint_open(const char* path);
CBP_API void cbp_checkpoint_destroy(cbp_checkpoint* checkpoint);

CBP_API uint32_t cbp_checkpoint_version(const cbp_checkpoint* checkpoint);
CBP_API uint64_t cbp_checkpoint_epoch(const cbp_checkpoint* checkpoint);
CBP_API double cbp_checkpoint_g(const cbp_checkpoint* checkpoint);
CBP_API double cbp_checkpoint_lambda_l1(const cbp_checkpoint* checkpoint);
CBP_API size_t cbp_checkpoint_layer_count(const cbp_checkpoint* checkpoint);

/* Number of grid levels of one layer; 0 for exempt/unconstrained layers.
 * Out-of-range layer indices also return 0. */
CBP_API size_t cbp_checkpoint_layer_levels(const cbp_checkpoint* checkpoint, size_t layer);

/* Mean sawtooth constraint value over all constrained weights. Fails with
 * CBP_ERROR_INVALID_ARGUMENT when the checkpoint has no constrained
 * weights (e.g. a pre-training checkpoint). */
CBP_API cbp_status cbp_checkpoint_cfs(const cbp_checkpoint* checkpoint, double* cfs_out);

/* Formatted multi-line summary (per-layer constraint info, populations,
 * histogram, lambda stats). Free with cbp_string_destroy(). */
CBP_API char* cbp_checkpoint_summary(const cbp_checkpoint* checkpoint);

CBP_API void cbp_string_destroy(char* text);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CBP_H */
