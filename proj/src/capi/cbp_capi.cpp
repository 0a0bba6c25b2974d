#include "cbp/cbp.h"

#include "../core/checkpoint.hpp"
#include "../core/config.hpp"
#include "../core/experiment.hpp"

#include <cstring>
#include <new>
#include <string>

namespace {

thread_local std::string g_last_error = "no error";

void copy_out(const std::string& src, char* buf, size_t buf_size) {
    if (!buf || buf_size == 0)
        return;
    const size_t n = std::min(src.size(), buf_size - 1);
    std::memcpy(buf, src.data(), n);
    buf[n] = '\0';
}

// Runs fn, translating exceptions into status codes + the thread-local
// error message. The wrapped call must not leak C++ exceptions across the
// C boundary.
template <typename Fn>
cbp_status guarded(Fn&& fn) {
    try {
        fn();
        return CBP_OK;
    } catch (const std::invalid_argument& e) {
        g_last_error = e.what();
        return CBP_ERROR_INVALID_ARGUMENT;
    } catch (const std::domain_error& e) {
        g_last_error = e.what();
        return CBP_ERROR_INVALID_ARGUMENT;
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return CBP_ERROR_RUNTIME;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        // I/O failures surface as runtime_errors mentioning a path; keep a
        // coarse split so callers can distinguish missing files.
        return std::string(e.what()).find("cannot open") != std::string::npos ? CBP_ERROR_IO
                                                                              : CBP_ERROR_RUNTIME;
    } catch (...) {
        g_last_error = "unknown error";
        return CBP_ERROR_RUNTIME;
    }
}

} // namespace

struct cbp_config {
    cbp::Config impl;
};

struct cbp_checkpoint {
    cbp::Checkpoint impl;
    std::string path;
};

extern "C" {

const char* cbp_status_name(cbp_status status) {
    switch (status) {
    case CBP_OK: return "ok";
    case CBP_ERROR_INVALID_ARGUMENT: return "invalid argument";
    case CBP_ERROR_IO: return "i/o error";
    case CBP_ERROR_RUNTIME: return "runtime error";
    }
    return "unknown status";
}

const char* cbp_last_error(void) { return g_last_error.c_str(); }

cbp_config* cbp_config_create(void) {
    try {
        return new cbp_config{};
    } catch (...) {
        g_last_error = "out of memory";
        return nullptr;
    }
}

void cbp_config_destroy(cbp_config* config) { delete config; }

cbp_status cbp_config_load_file(cbp_config* config, const char* path) {
    if (!config || !path) {
        g_last_error = "null argument";
        return CBP_ERROR_INVALID_ARGUMENT;
    }
    return guarded([&] { config->impl.load_file(path); });
}

cbp_status cbp_config_set(cbp_config* config, const char* key, const char* value) {
    if (!config || !key || !value) {
        g_last_error = "null argument";
        return CBP_ERROR_INVALID_ARGUMENT;
    }
    return guarded([&] { config->impl.set(key, value); });
}

cbp_status cbp_config_get(const cbp_config* config, const char* key, char* buf, size_t buf_size) {
    if (!config || !key || !buf || buf_size == 0) {
        g_last_error = "null argument";
        return CBP_ERROR_INVALID_ARGUMENT;
    }
    return guarded([&] { copy_out(config->impl.get(key), buf, buf_size); });
}

const char* cbp_config_keys(void) {
    static const std::string keys = cbp::Config::describe_keys();
    return keys.c_str();
}

cbp_status cbp_run_pretrain(const cbp_config* config, double* eval_top1_out) {
    if (!config) {
        g_last_error = "null config";
        return CBP_ERROR_INVALID_ARGUMENT;
    }
    return guarded([&] {
        const double acc = cbp::run_pretrain(config->impl);
        if (eval_top1_out)
            *eval_top1_out = acc;
    });
}

cbp_status cbp_run_train(const cbp_config* config, cbp_train_result* result_out) {
    if (!config) {
        g_last_error = "null config";
        return CBP_ERROR_INVALID_ARGUMENT;
    }
    return guarded([&] {
        const cbp::ExperimentResult r = cbp::run_experiment(config->impl);
        if (result_out) {
            result_out->final_eval_top1_quantized = r.final_eval_quant;
            result_out->final_eval_top1_full_precision = r.final_eval_full;
            result_out->final_cfs = r.final_cfs;
            result_out->final_g = r.final_g;
            result_out->epochs = r.epochs;
        }
    });
}

cbp_status cbp_run_eval(const cbp_config* config, const char* checkpoint_path,
                        double* quantized_top1_out, double* full_precision_top1_out) {
    if (!config || !checkpoint_path) {
        g_last_error = "null argument";
        return CBP_ERROR_INVALID_ARGUMENT;
    }
    return guarded([&] {
        const cbp::EvalResult r = cbp::run_eval(config->impl, checkpoint_path);
        if (quantized_top1_out)
            *quantized_top1_out = r.quantized_top1;
        if (full_precision_top1_out)
            *full_precision_top1_out = r.full_precision_top1;
    });
}

cbp_status cbp_run_kinetics(const cbp_config* config, char* out_path_buf, size_t out_path_size) {
    if (!config) {
        g_last_error = "null config";
        return CBP_ERROR_INVALID_ARGUMENT;
    }
    return guarded([&] {
        const std::string path = cbp::run_kinetics(config->impl);
        copy_out(path, out_path_buf, out_path_size);
    });
}

cbp_checkpoint* cbp_checkpoint_open(const char* path) {
    if (!path) {
        g_last_error = "null path";
        return nullptr;
    }
    cbp_checkpoint* handle = nullptr;
    const cbp_status status = guarded([&] {
        handle = new cbp_checkpoint{cbp::read_checkpoint(path), path};
    });
    return status == CBP_OK ? handle : nullptr;
}

void cbp_checkpoint_destroy(cbp_checkpoint* checkpoint) { delete checkpoint; }

uint32_t cbp_checkpoint_version(const cbp_checkpoint* checkpoint) {
    return checkpoint ? checkpoint->impl.version : 0;
}

uint64_t cbp_checkpoint_epoch(const cbp_checkpoint* checkpoint) {
    return checkpoint ? checkpoint->impl.state.epoch : 0;
}

double cbp_checkpoint_g(const cbp_checkpoint* checkpoint) {
    return checkpoint ? checkpoint->impl.state.g : 0.0;
}

double cbp_checkpoint_lambda_l1(const cbp_checkpoint* checkpoint) {
    return checkpoint ? checkpoint->impl.state.multipliers.l1() : 0.0;
}

size_t cbp_checkpoint_layer_count(const cbp_checkpoint* checkpoint) {
    return checkpoint ? checkpoint->impl.state.net.layers().size() : 0;
}

size_t cbp_checkpoint_layer_levels(const cbp_checkpoint* checkpoint, size_t layer) {
    if (!checkpoint || layer >= checkpoint->impl.state.grids.size())
        return 0;
    if (checkpoint->impl.state.net.layers()[layer].quant.exempt)
        return 0;
    return checkpoint->impl.state.grids[layer].levels();
}

cbp_status cbp_checkpoint_cfs(const cbp_checkpoint* checkpoint, double* cfs_out) {
    if (!checkpoint || !cfs_out) {
        g_last_error = "null argument";
        return CBP_ERROR_INVALID_ARGUMENT;
    }
    return guarded([&] { *cfs_out = cbp::state_cfs(checkpoint->impl.state); });
}

char* cbp_checkpoint_summary(const cbp_checkpoint* checkpoint) {
    if (!checkpoint) {
        g_last_error = "null checkpoint";
        return nullptr;
    }
    char* out = nullptr;
    guarded([&] {
        const std::string text = cbp::inspect_text(checkpoint->impl, checkpoint->path);
        out = new char[text.size() + 1];
        std::memcpy(out, text.c_str(), text.size() + 1);
    });
    return out;
}

void cbp_string_destroy(char* text) { delete[] text; }

} // extern "C"
