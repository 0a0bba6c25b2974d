#include "config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cbp {

namespace {

struct KeySpec {
    const char* name;
    const char* def;
    const char* doc;
};

// Registry order is the order keys are documented and serialized in.
const KeySpec kKeys[] = {
    {"seed", "1", "master seed for weight init and batch shuffling"},
    {"out_dir", "out", "directory for metrics, checkpoints and summaries"},
    {"dataset", "two-moons", "two-moons | blobs | csv | idx"},
    {"data_seed", "7", "seed for the synthetic data generators"},
    {"data_n_train", "2000", "synthetic: number of training samples"},
    {"data_n_eval", "500", "synthetic: number of eval samples"},
    {"data_noise", "0.25", "two-moons: Gaussian noise sigma"},
    {"data_blobs_k", "3", "blobs: number of clusters"},
    {"data_blobs_std", "0.5", "blobs: per-cluster sigma"},
    {"data_train", "", "csv: training file path"},
    {"data_eval", "", "csv: eval file path"},
    {"data_train_images", "", "idx: training images path"},
    {"data_train_labels", "", "idx: training labels path"},
    {"data_eval_images", "", "idx: eval images path"},
    {"data_eval_labels", "", "idx: eval labels path"},
    {"layers", "2-16-16-2", "dense layer sizes, dash separated"},
    {"constraint", "ternary",
     "binary | ternary | one-bit-shift | two-bit-shift | custom:v1,v2,..."},
    {"scale_policy", "frozen", "frozen | per-epoch: when layer scale factors are computed"},
    {"ablation", "cbp", "cbp | cbp-no-window | ste-only | full-precision"},
    {"eta_w", "0.01", "weight learning rate"},
    {"eta_lambda", "1e-4", "multiplier learning rate"},
    {"momentum", "0.9", "weight momentum coefficient"},
    {"weight_decay", "1e-4", "L2 penalty on the loss term"},
    {"batch_size", "32", "minibatch size"},
    {"epochs", "200", "training epochs"},
    {"p_max", "20", "multiplier update patience, in epochs"},
    {"lr_decay_g", "20", "divide eta_w by 10 the first time g reaches this"},
    {"g_schedule", "three-tier", "three-tier (1/10/100) | two-tier (1/10) window growth"},
    {"ascent", "adam", "multiplier ascent rule: adam | raw"},
    {"pretrain_epochs", "100", "full-precision pre-training epochs"},
    {"pretrain_eta_w", "0.1", "pre-training learning rate"},
    {"pretrain_checkpoint", "", "path of the pre-trained checkpoint (default <out_dir>/pretrain.ckpt)"},
    {"allow_untrained", "false",
     "permit CBP on a freshly initialized net (accuracy will suffer; pre-training is the intended flow)"},
    {"checkpoint_every", "0", "write <out_dir>/epoch_<n>.ckpt every n epochs (0 = off)"},
    {"resume", "", "resume CBP training from this checkpoint"},
    {"eval_checkpoint", "", "checkpoint evaluated by the eval command"},
    {"kin_loss", "quadratic", "kinetics: quadratic | logistic"},
    {"kin_target", "0.3", "kinetics: quadratic minimum w*, comma separated"},
    {"kin_curvature", "1", "kinetics: quadratic diagonal curvature, comma separated or scalar"},
    {"kin_w0", "0.3", "kinetics: initial weights, comma separated"},
    {"kin_lambda0", "0", "kinetics: initial multipliers, comma separated or scalar"},
    {"kin_constraint", "ternary", "kinetics: grid kind"},
    {"kin_scale", "1", "kinetics: grid scale"},
    {"kin_tau_w", "1", "kinetics: weight time constant"},
    {"kin_tau_lambda", "20", "kinetics: multiplier time constant"},
    {"kin_slope", "2", "kinetics: sawtooth slope s"},
    {"kin_window", "none", "kinetics: none | vanishing"},
    {"kin_dt", "1e-3", "kinetics: integrator step"},
    {"kin_t_end", "200", "kinetics: integration horizon"},
    {"kin_method", "euler", "kinetics: euler | rk4"},
    {"kin_record_every", "10", "kinetics: record every n-th step"},
    {"kin_out", "", "kinetics: trajectory csv path (default <out_dir>/trajectory.csv)"},
};

[[noreturn]] void unknown_key(const std::string& key) {
    std::ostringstream os;
    os << "unknown config key '" << key << "'; valid keys:";
    for (const auto& spec : kKeys)
        os << ' ' << spec.name;
    throw std::invalid_argument(os.str());
}

} // namespace

Config::Config() {
    for (const auto& spec : kKeys)
        values_[spec.name] = spec.def;
}

void Config::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("config: cannot open " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line = line.substr(0, hash);
        // Trim.
        const auto beg = line.find_first_not_of(" \t\r");
        if (beg == std::string::npos)
            continue;
        const auto end = line.find_last_not_of(" \t\r");
        line = line.substr(beg, end - beg + 1);
        try {
            set_pair(line);
        } catch (const std::exception& e) {
            throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

void Config::set_pair(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw std::invalid_argument("expected key=value, got '" + assignment + "'");
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        if (b == std::string::npos)
            return std::string();
        const auto e = s.find_last_not_of(" \t");
        return s.substr(b, e - b + 1);
    };
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Config::set(const std::string& key, const std::string& value) {
    const auto it = values_.find(key);
    if (it == values_.end())
        unknown_key(key);
    it->second = value;
}

const std::string& Config::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end())
        unknown_key(key);
    return it->second;
}

bool Config::has(const std::string& key) const { return !get(key).empty(); }

double Config::get_double(const std::string& key) const {
    try {
        std::size_t pos = 0;
        const double v = std::stod(get(key), &pos);
        if (pos != get(key).size())
            throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + key + "' is not a number: '" + get(key) +
                                    "'");
    }
}

std::int64_t Config::get_int(const std::string& key) const {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(get(key), &pos);
        if (pos != get(key).size())
            throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + key + "' is not an integer: '" + get(key) +
                                    "'");
    }
}

std::uint64_t Config::get_uint(const std::string& key) const {
    const std::int64_t v = get_int(key);
    if (v < 0)
        throw std::invalid_argument("config: key '" + key + "' must be nonnegative");
    return static_cast<std::uint64_t>(v);
}

bool Config::get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1" || v == "yes")
        return true;
    if (v == "false" || v == "0" || v == "no")
        return false;
    throw std::invalid_argument("config: key '" + key + "' is not a boolean: '" + v + "'");
}

std::vector<double> Config::get_double_list(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(get(key));
    std::string cell;
    while (std::getline(ss, cell, ','))
        out.push_back(std::stod(cell));
    if (out.empty())
        throw std::invalid_argument("config: key '" + key + "' is empty");
    return out;
}

std::vector<std::size_t> Config::get_size_list(const std::string& key) const {
    std::vector<std::size_t> out;
    std::stringstream ss(get(key));
    std::string cell;
    while (std::getline(ss, cell, '-'))
        out.push_back(static_cast<std::size_t>(std::stoull(cell)));
    if (out.empty())
        throw std::invalid_argument("config: key '" + key + "' is empty");
    return out;
}

std::string Config::describe_keys() {
    std::ostringstream os;
    for (const auto& spec : kKeys) {
        os << spec.name;
        for (std::size_t pad = std::string(spec.name).size(); pad < 22; ++pad)
            os << ' ';
        os << "(default: " << (spec.def[0] ? spec.def : "<empty>") << ") " << spec.doc << "\n";
    }
    return os.str();
}

std::vector<std::string> Config::key_names() {
    std::vector<std::string> out;
    for (const auto& spec : kKeys)
        out.emplace_back(spec.name);
    return out;
}

std::string Config::serialize() const {
    std::ostringstream os;
    for (const auto& spec : kKeys)
        os << spec.name << "=" << values_.at(spec.name) << "\n";
    return os.str();
}

void Config::validate() const {
    for (const char* key : {"eta_w", "eta_lambda", "pretrain_eta_w"})
        if (!(get_double(key) > 0.0))
            throw std::invalid_argument(std::string("config: ") + key + " must be positive");
    if (get_int("batch_size") < 1)
        throw std::invalid_argument("config: batch_size must be >= 1");
    if (get_int("epochs") < 0 || get_int("pretrain_epochs") < 0)
        throw std::invalid_argument("config: epoch counts must be nonnegative");
    if (get_int("p_max") < 1)
        throw std::invalid_argument("config: p_max must be >= 1");
    const double mom = get_double("momentum");
    if (mom < 0.0 || mom >= 1.0)
        throw std::invalid_argument("config: momentum must lie in [0, 1)");
    if (get_double("weight_decay") < 0.0)
        throw std::invalid_argument("config: weight_decay must be nonnegative");
    for (const char* key : {"dataset", "constraint", "scale_policy", "ablation", "g_schedule",
                            "ascent", "kin_loss", "kin_window", "kin_method"})
        (void)get(key);
    const std::string& ab = get("ablation");
    if (ab != "cbp" && ab != "cbp-no-window" && ab != "ste-only" && ab != "full-precision")
        throw std::invalid_argument("config: bad ablation '" + ab + "'");
    const std::string& sp = get("scale_policy");
    if (sp != "frozen" && sp != "per-epoch")
        throw std::invalid_argument("config: bad scale_policy '" + sp + "'");
    const std::string& gs = get("g_schedule");
    if (gs != "three-tier" && gs != "two-tier")
        throw std::invalid_argument("config: bad g_schedule '" + gs + "'");
    const std::string& asc = get("ascent");
    if (asc != "adam" && asc != "raw")
        throw std::invalid_argument("config: bad ascent '" + asc + "'");
    if (get_size_list("layers").size() < 2)
        throw std::invalid_argument("config: layers needs at least input and output sizes");
    const std::string& constraint = get("constraint");
    if (constraint == "custom" ||
        (constraint.rfind("custom:", 0) == 0 && constraint.size() <= 7))
        throw std::invalid_argument(
            "config: constraint=custom needs explicit levels, e.g. custom:-1,0,1");
}

} // namespace cbp
