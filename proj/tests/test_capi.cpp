#include <doctest.h>

#include <cbp/cbp.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "cbp_capi_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

struct ConfigGuard {
    cbp_config* ptr = cbp_config_create();
    ~ConfigGuard() { cbp_config_destroy(ptr); }
};

void set_tiny_run(cbp_config* config, const fs::path& dir) {
    REQUIRE(cbp_config_set(config, "out_dir", dir.string().c_str()) == CBP_OK);
    REQUIRE(cbp_config_set(config, "dataset", "blobs") == CBP_OK);
    REQUIRE(cbp_config_set(config, "data_n_train", "120") == CBP_OK);
    REQUIRE(cbp_config_set(config, "data_n_eval", "40") == CBP_OK);
    REQUIRE(cbp_config_set(config, "data_blobs_k", "2") == CBP_OK);
    REQUIRE(cbp_config_set(config, "layers", "2-6-6-2") == CBP_OK);
    REQUIRE(cbp_config_set(config, "batch_size", "20") == CBP_OK);
    REQUIRE(cbp_config_set(config, "pretrain_epochs", "15") == CBP_OK);
    REQUIRE(cbp_config_set(config, "pretrain_eta_w", "0.1") == CBP_OK);
    REQUIRE(cbp_config_set(config, "epochs", "6") == CBP_OK);
    REQUIRE(cbp_config_set(config, "p_max", "3") == CBP_OK);
}

} // namespace

TEST_CASE("config set/get round-trips and rejects unknown keys") {
    ConfigGuard config;
    REQUIRE(config.ptr != nullptr);

    char buf[64];
    CHECK(cbp_config_get(config.ptr, "constraint", buf, sizeof buf) == CBP_OK);
    CHECK(std::string(buf) == "ternary");

    CHECK(cbp_config_set(config.ptr, "constraint", "binary") == CBP_OK);
    CHECK(cbp_config_get(config.ptr, "constraint", buf, sizeof buf) == CBP_OK);
    CHECK(std::string(buf) == "binary");

    CHECK(cbp_config_set(config.ptr, "not_a_key", "1") == CBP_ERROR_INVALID_ARGUMENT);
    CHECK(std::string(cbp_last_error()).find("valid keys") != std::string::npos);

    CHECK(cbp_config_set(nullptr, "constraint", "binary") == CBP_ERROR_INVALID_ARGUMENT);
}

TEST_CASE("config key listing documents the surface") {
    const std::string keys = cbp_config_keys();
    for (const char* expected : {"eta_w", "eta_lambda", "constraint", "ablation", "kin_tau_w"})
        CHECK(keys.find(expected) != std::string::npos);
}

TEST_CASE("config file loading reports parse failures") {
    const auto dir = temp_dir("config");
    {
        std::ofstream out(dir / "ok.cfg");
        out << "epochs=3\n# comment\n";
    }
    ConfigGuard config;
    CHECK(cbp_config_load_file(config.ptr, (dir / "ok.cfg").string().c_str()) == CBP_OK);
    char buf[16];
    CHECK(cbp_config_get(config.ptr, "epochs", buf, sizeof buf) == CBP_OK);
    CHECK(std::string(buf) == "3");

    CHECK(cbp_config_load_file(config.ptr, (dir / "missing.cfg").string().c_str()) ==
          CBP_ERROR_IO);
}

TEST_CASE("pretrain, train, eval and inspect through the C surface") {
    const auto dir = temp_dir("run");
    ConfigGuard config;
    set_tiny_run(config.ptr, dir);

    double pre_acc = -1.0;
    REQUIRE(cbp_run_pretrain(config.ptr, &pre_acc) == CBP_OK);
    CHECK(pre_acc >= 0.0);

    cbp_train_result result{};
    REQUIRE(cbp_run_train(config.ptr, &result) == CBP_OK);
    CHECK(result.epochs == 6);
    CHECK(result.final_cfs >= 0.0);
    CHECK(result.final_g >= 1.0);

    double quant = 0.0, full = 0.0;
    const std::string ckpt = (dir / "ckpt.bin").string();
    REQUIRE(cbp_run_eval(config.ptr, ckpt.c_str(), &quant, &full) == CBP_OK);
    CHECK(quant >= 0.0);
    CHECK(quant <= 1.0);
    CHECK(full >= 0.0);

    cbp_checkpoint* handle = cbp_checkpoint_open(ckpt.c_str());
    REQUIRE(handle != nullptr);
    CHECK(cbp_checkpoint_version(handle) == 1);
    CHECK(cbp_checkpoint_epoch(handle) == 6);
    CHECK(cbp_checkpoint_g(handle) >= 1.0);
    CHECK(cbp_checkpoint_layer_count(handle) == 3);
    CHECK(cbp_checkpoint_layer_levels(handle, 0) == 0); // exempt
    CHECK(cbp_checkpoint_layer_levels(handle, 1) == 3); // ternary
    CHECK(cbp_checkpoint_lambda_l1(handle) >= 0.0);

    double cfs = -1.0;
    CHECK(cbp_checkpoint_cfs(handle, &cfs) == CBP_OK);
    CHECK(cfs >= 0.0);

    char* summary = cbp_checkpoint_summary(handle);
    REQUIRE(summary != nullptr);
    CHECK(std::strstr(summary, "layer 1") != nullptr);
    CHECK(std::strstr(summary, "exempt") != nullptr);
    cbp_string_destroy(summary);
    cbp_checkpoint_destroy(handle);
}

TEST_CASE("pretrain checkpoint has unit g, zero lambda, and no cfs") {
    const auto dir = temp_dir("pretrain_inspect");
    ConfigGuard config;
    set_tiny_run(config.ptr, dir);
    REQUIRE(cbp_run_pretrain(config.ptr, nullptr) == CBP_OK);

    cbp_checkpoint* handle = cbp_checkpoint_open((dir / "pretrain.ckpt").string().c_str());
    REQUIRE(handle != nullptr);
    CHECK(cbp_checkpoint_g(handle) == 1.0);
    CHECK(cbp_checkpoint_lambda_l1(handle) == 0.0);
    double cfs = 0.0;
    CHECK(cbp_checkpoint_cfs(handle, &cfs) == CBP_ERROR_INVALID_ARGUMENT);
    cbp_checkpoint_destroy(handle);
}

TEST_CASE("missing files surface as errors, not crashes") {
    CHECK(cbp_checkpoint_open("/no/such/file.ckpt") == nullptr);
    CHECK(std::string(cbp_last_error()).find("cannot open") != std::string::npos);

    ConfigGuard config;
    double quant, full;
    CHECK(cbp_run_eval(config.ptr, "/no/such/file.ckpt", &quant, &full) == CBP_ERROR_IO);

    // Training without a pretrained checkpoint is a runtime error that
    // names the missing piece.
    const auto dir = temp_dir("missing");
    set_tiny_run(config.ptr, dir);
    cbp_train_result result{};
    CHECK(cbp_run_train(config.ptr, &result) == CBP_ERROR_RUNTIME);
    CHECK(std::string(cbp_last_error()).find("pretrain") != std::string::npos);
}

TEST_CASE("kinetics scenario through the C surface") {
    const auto dir = temp_dir("kinetics");
    ConfigGuard config;
    REQUIRE(cbp_config_set(config.ptr, "out_dir", dir.string().c_str()) == CBP_OK);
    REQUIRE(cbp_config_set(config.ptr, "kin_t_end", "1") == CBP_OK);
    char out_path[512] = {0};
    REQUIRE(cbp_run_kinetics(config.ptr, out_path, sizeof out_path) == CBP_OK);
    CHECK(fs::exists(out_path));
}

TEST_CASE("status names are stable strings") {
    CHECK(std::string(cbp_status_name(CBP_OK)) == "ok");
    CHECK(std::string(cbp_status_name(CBP_ERROR_INVALID_ARGUMENT)) == "invalid argument");
    CHECK(std::string(cbp_status_name(CBP_ERROR_IO)) == "i/o error");
    CHECK(std::string(cbp_status_name(CBP_ERROR_RUNTIME)) == "runtime error");
}
