#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cbp {

/// Flat key=value experiment configuration. Every key has a registered
/// default and a doc string; setting an unregistered key is an error that
/// lists the valid keys. Values stay strings until read through the typed
/// getters, so a config echoes back exactly what was written.
class Config {
public:
    Config();

    /// Parse a config file: one key=value per line, '#' comments, blank
    /// lines ignored.
    void load_file(const std::string& path);

    /// Parse a single "key=value" assignment.
    void set_pair(const std::string& assignment);

    void set(const std::string& key, const std::string& value);
    const std::string& get(const std::string& key) const;
    bool has(const std::string& key) const;

    double get_double(const std::string& key) const;
    std::int64_t get_int(const std::string& key) const;
    std::uint64_t get_uint(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<double> get_double_list(const std::string& key) const;
    std::vector<std::size_t> get_size_list(const std::string& key) const; // dash-separated

    /// Keys in registry order with docs, for --help-config and error texts.
    static std::string describe_keys();
    static std::vector<std::string> key_names();

    /// Render as a config file body (registry order), used for the config
    /// echo embedded in checkpoints.
    std::string serialize() const;

    /// Basic cross-field validation (positive rates, batch size >= 1, ...).
    void validate() const;

private:
    std::map<std::string, std::string> values_;
};

} // namespace cbp
