#pragma once

#include "optimizer.hpp"

#include <string>

namespace cbp {

/// Single-file binary checkpoint of a TrainState plus the config it ran
/// under. All arrays are stored as 64-bit floats so a resumed run replays
/// the interrupted one exactly. Multi-byte fields are host-endian
/// (little-endian on every supported target); the magic makes a foreign
/// file fail loudly rather than misload.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    TrainState state;
    std::string config_echo;
    std::uint32_t version = kCheckpointVersion;
};

void write_checkpoint(const TrainState& state, const std::string& config_echo,
                      const std::string& path);

/// Throws std::runtime_error on bad magic, a version newer than this
/// build understands, or a truncated file.
Checkpoint read_checkpoint(const std::string& path);

} // namespace cbp
