// Command-line front end for the constrained-backpropagation library.
// Links the C API only.

#include <cbp/cbp.h>

#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

void print_usage(std::FILE* to) {
    std::fputs(
        "usage: cbp <command> [options]\n"
        "\n"
        "commands:\n"
        "  pretrain   full-precision pre-training; writes pretrain.ckpt\n"
        "  train      constraint post-training per the ablation key\n"
        "  eval       report quantized and full-precision accuracy of a checkpoint\n"
        "  kinetics   integrate a continuous-time scenario, write trajectory csv\n"
        "  inspect    print a checkpoint summary\n"
        "\n"
        "options:\n"
        "  --config <path>     flat key=value config file ('#' comments)\n"
        "  --set key=value     override one key (repeatable)\n"
        "  --help-config       list every config key with its default\n"
        "\n"
        "eval reads the checkpoint from its positional argument or the\n"
        "eval_checkpoint key; inspect requires a positional checkpoint path.\n",
        to);
}

struct ConfigHandle {
    cbp_config* ptr = cbp_config_create();
    ~ConfigHandle() { cbp_config_destroy(ptr); }
    ConfigHandle(const ConfigHandle&) = delete;
    ConfigHandle& operator=(const ConfigHandle&) = delete;
    ConfigHandle() = default;
};

int fail_usage(const char* what) {
    std::fprintf(stderr, "cbp: %s\n", what);
    print_usage(stderr);
    return kExitUsage;
}

int fail_status(cbp_status status) {
    std::fprintf(stderr, "cbp: %s: %s\n", cbp_status_name(status), cbp_last_error());
    return status == CBP_ERROR_INVALID_ARGUMENT ? kExitUsage : kExitRuntime;
}

int cmd_inspect(const std::string& path) {
    cbp_checkpoint* ck = cbp_checkpoint_open(path.c_str());
    if (!ck) {
        std::fprintf(stderr, "cbp: %s\n", cbp_last_error());
        return kExitRuntime;
    }
    char* summary = cbp_checkpoint_summary(ck);
    if (summary) {
        std::fputs(summary, stdout);
        cbp_string_destroy(summary);
    }
    cbp_checkpoint_destroy(ck);
    return summary ? kExitOk : kExitRuntime;
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        print_usage(stderr);
        return kExitUsage;
    }
    const std::string command = argv[1];
    if (command == "--help" || command == "-h" || command == "help") {
        print_usage(stdout);
        return kExitOk;
    }

    ConfigHandle config;
    if (!config.ptr) {
        std::fprintf(stderr, "cbp: %s\n", cbp_last_error());
        return kExitRuntime;
    }

    std::vector<std::string> positional;
    for (int i = 2; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--help-config") {
            std::fputs(cbp_config_keys(), stdout);
            return kExitOk;
        }
        if (arg == "--config" || arg == "--set") {
            if (i + 1 >= argc)
                return fail_usage(("missing value after " + arg).c_str());
            const char* value = argv[++i];
            cbp_status status;
            if (arg == "--config") {
                status = cbp_config_load_file(config.ptr, value);
            } else {
                const char* eq = std::strchr(value, '=');
                if (!eq || eq == value)
                    return fail_usage("--set expects key=value");
                const std::string key(value, eq);
                status = cbp_config_set(config.ptr, key.c_str(), eq + 1);
            }
            if (status != CBP_OK)
                return fail_status(status);
            continue;
        }
        if (arg.rfind("--", 0) == 0)
            return fail_usage(("unknown option " + arg).c_str());
        positional.push_back(arg);
    }

    if (command == "pretrain") {
        if (!positional.empty())
            return fail_usage("pretrain takes no positional arguments");
        double acc = 0.0;
        const cbp_status status = cbp_run_pretrain(config.ptr, &acc);
        if (status != CBP_OK)
            return fail_status(status);
        std::printf("pretrain done, final eval top-1 %.4f\n", acc);
        return kExitOk;
    }

    if (command == "train") {
        if (!positional.empty())
            return fail_usage("train takes no positional arguments");
        cbp_train_result result;
        const cbp_status status = cbp_run_train(config.ptr, &result);
        if (status != CBP_OK)
            return fail_status(status);
        std::printf("train done after %llu epochs: top-1 quantized %.4f, full-precision %.4f, "
                    "cfs %.3g, g %.0f\n",
                    static_cast<unsigned long long>(result.epochs),
                    result.final_eval_top1_quantized, result.final_eval_top1_full_precision,
                    result.final_cfs, result.final_g);
        return kExitOk;
    }

    if (command == "eval") {
        std::string path;
        if (!positional.empty()) {
            path = positional.front();
        } else {
            char buf[1024];
            if (cbp_config_get(config.ptr, "eval_checkpoint", buf, sizeof buf) != CBP_OK ||
                buf[0] == '\0')
                return fail_usage("eval needs a checkpoint path (positional or eval_checkpoint=)");
            path = buf;
        }
        double quant = 0.0, full = 0.0;
        const cbp_status status = cbp_run_eval(config.ptr, path.c_str(), &quant, &full);
        if (status != CBP_OK)
            return fail_status(status);
        std::printf("top-1 quantized-forward      %.4f\n", quant);
        std::printf("top-1 full-precision-forward %.4f\n", full);
        return kExitOk;
    }

    if (command == "kinetics") {
        char out_path[1024] = {0};
        const cbp_status status = cbp_run_kinetics(config.ptr, out_path, sizeof out_path);
        if (status != CBP_OK)
            return fail_status(status);
        std::printf("trajectory written to %s\n", out_path);
        return kExitOk;
    }

    if (command == "inspect") {
        if (positional.size() != 1)
            return fail_usage("inspect needs exactly one checkpoint path");
        return cmd_inspect(positional.front());
    }

    return fail_usage(("unknown command '" + command + "'").c_str());
}
