#include "checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace cbp {

namespace {

constexpr char kMagic[8] = {'C', 'B', 'P', 'C', 'K', 'P', 'T', '\n'};

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_)
            throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    }

    void bytes(const void* p, std::size_t n) {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u32(std::uint32_t v) { bytes(&v, 4); }
    void u64(std::uint64_t v) { bytes(&v, 8); }
    void i64(std::int64_t v) { bytes(&v, 8); }
    void f64(double v) { bytes(&v, 8); }
    void f64s(const double* p, std::size_t n) { bytes(p, n * 8); }
    void str(const std::string& s) {
        u64(s.size());
        bytes(s.data(), s.size());
    }

    void finish(const std::string& path) {
        out_.flush();
        if (!out_)
            throw std::runtime_error("checkpoint: write failed for " + path);
    }

private:
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_)
            throw std::runtime_error("checkpoint: cannot open " + path);
    }

    void bytes(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!in_)
            throw std::runtime_error("checkpoint: truncated file " + path_);
    }
    std::uint8_t u8() {
        std::uint8_t v;
        bytes(&v, 1);
        return v;
    }
    std::uint32_t u32() {
        std::uint32_t v;
        bytes(&v, 4);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        bytes(&v, 8);
        return v;
    }
    std::int64_t i64() {
        std::int64_t v;
        bytes(&v, 8);
        return v;
    }
    double f64() {
        double v;
        bytes(&v, 8);
        return v;
    }
    std::vector<double> f64s(std::size_t n) {
        std::vector<double> v(n);
        if (n)
            bytes(v.data(), n * 8);
        return v;
    }
    std::string str() {
        const std::uint64_t n = u64();
        if (n > (1ull << 30))
            throw std::runtime_error("checkpoint: implausible string length in " + path_);
        std::string s(n, '\0');
        if (n)
            bytes(s.data(), n);
        return s;
    }

private:
    std::string path_;
    std::ifstream in_;
};

} // namespace

void write_checkpoint(const TrainState& state, const std::string& config_echo,
                      const std::string& path) {
    Writer w(path);
    w.bytes(kMagic, sizeof kMagic);
    w.u32(kCheckpointVersion);
    w.str(config_echo);

    w.u8(static_cast<std::uint8_t>(state.mode));
    w.u8(static_cast<std::uint8_t>(state.g_schedule));
    w.u8(static_cast<std::uint8_t>(state.scale_policy));
    w.f64(state.g);
    w.u64(state.epoch);
    w.bytes(state.rng.state(), 4 * 8);

    const auto& layers = state.net.layers();
    w.u32(static_cast<std::uint32_t>(layers.size()));
    for (const Layer& layer : layers) {
        w.u32(static_cast<std::uint32_t>(layer.weights.rows()));
        w.u32(static_cast<std::uint32_t>(layer.weights.cols()));
        w.u8(layer.activation == Activation::relu ? 1 : 0);
        w.u8(layer.quant.exempt ? 1 : 0);
        w.u8(static_cast<std::uint8_t>(layer.quant.kind));
        w.f64s(layer.weights.data(), layer.weights.size());
        w.f64s(layer.bias.data(), layer.bias.size());
    }

    for (std::size_t l = 0; l < layers.size(); ++l) {
        const QuantGrid& grid = l < state.grids.size() ? state.grids[l] : QuantGrid{};
        w.u32(static_cast<std::uint32_t>(grid.q.size()));
        w.f64s(grid.q.data(), grid.q.size());
    }

    const auto& ms = state.multipliers;
    w.u64(ms.lambda.size());
    w.f64s(ms.lambda.data(), ms.lambda.size());
    w.f64s(ms.moment1.data(), ms.moment1.size());
    w.f64s(ms.moment2.data(), ms.moment2.size());
    w.u64(ms.step);
    w.f64(ms.eta_lambda);
    w.f64(ms.beta1);
    w.f64(ms.beta2);
    w.f64(ms.epsilon);
    w.u8(ms.rule == AscentRule::adam ? 0 : 1);
    w.i64(ms.p);
    w.i64(ms.p_max);
    w.f64(ms.l_sum_prev);

    const auto& opt = state.opt;
    w.f64(opt.eta_w);
    w.f64(opt.momentum);
    w.f64(opt.weight_decay);
    w.f64(opt.lr_decay_trigger_g);
    w.f64(opt.lr_decay_factor);
    w.u8(opt.lr_decay_applied ? 1 : 0);
    w.u8(opt.w_velocity.empty() ? 0 : 1);
    if (!opt.w_velocity.empty()) {
        for (std::size_t l = 0; l < layers.size(); ++l) {
            w.f64s(opt.w_velocity[l].data(), opt.w_velocity[l].size());
            w.f64s(opt.b_velocity[l].data(), opt.b_velocity[l].size());
        }
    }
    w.finish(path);
}

Checkpoint read_checkpoint(const std::string& path) {
    Reader r(path);
    char magic[8];
    r.bytes(magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);

    Checkpoint ck;
    ck.version = r.u32();
    if (ck.version > kCheckpointVersion)
        throw std::runtime_error("checkpoint: " + path + " has format version " +
                                 std::to_string(ck.version) + "; this build reads up to " +
                                 std::to_string(kCheckpointVersion));
    ck.config_echo = r.str();

    TrainState& state = ck.state;
    state.mode = static_cast<AblationMode>(r.u8());
    state.g_schedule = static_cast<GSchedule>(r.u8());
    state.scale_policy = static_cast<ScalePolicy>(r.u8());
    state.g = r.f64();
    state.epoch = r.u64();
    std::uint64_t rng_state[4];
    r.bytes(rng_state, sizeof rng_state);
    state.rng.set_state(rng_state);

    const std::uint32_t n_layers = r.u32();
    for (std::uint32_t l = 0; l < n_layers; ++l) {
        Layer layer;
        const std::uint32_t rows = r.u32();
        const std::uint32_t cols = r.u32();
        layer.activation = r.u8() ? Activation::relu : Activation::none;
        layer.quant.exempt = r.u8() != 0;
        layer.quant.kind = static_cast<ConstraintKind>(r.u8());
        layer.weights = Matrix(rows, cols, r.f64s(std::size_t(rows) * cols));
        layer.bias = r.f64s(rows);
        state.net.layers().push_back(std::move(layer));
    }

    state.grids.resize(n_layers);
    for (std::uint32_t l = 0; l < n_layers; ++l) {
        const std::uint32_t n_q = r.u32();
        if (n_q > 0) {
            QuantGrid grid = make_custom_grid(r.f64s(n_q));
            grid.g = state.g;
            state.grids[l] = std::move(grid);
        }
    }

    auto& ms = state.multipliers;
    const std::uint64_t n_mult = r.u64();
    ms.lambda = r.f64s(n_mult);
    ms.moment1 = r.f64s(n_mult);
    ms.moment2 = r.f64s(n_mult);
    ms.step = r.u64();
    ms.eta_lambda = r.f64();
    ms.beta1 = r.f64();
    ms.beta2 = r.f64();
    ms.epsilon = r.f64();
    ms.rule = r.u8() == 0 ? AscentRule::adam : AscentRule::raw;
    ms.p = r.i64();
    ms.p_max = r.i64();
    ms.l_sum_prev = r.f64();

    auto& opt = state.opt;
    opt.eta_w = r.f64();
    opt.momentum = r.f64();
    opt.weight_decay = r.f64();
    opt.lr_decay_trigger_g = r.f64();
    opt.lr_decay_factor = r.f64();
    opt.lr_decay_applied = r.u8() != 0;
    if (r.u8() != 0) {
        for (const Layer& layer : state.net.layers()) {
            opt.w_velocity.emplace_back(layer.weights.rows(), layer.weights.cols(),
                                        r.f64s(layer.weights.size()));
            opt.b_velocity.push_back(r.f64s(layer.bias.size()));
        }
    }
    return ck;
}

} // namespace cbp
