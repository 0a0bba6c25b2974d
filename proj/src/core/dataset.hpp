#pragma once

#include "ndarray.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cbp {

struct Dataset {
    Matrix features;          // n x d
    std::vector<int> labels;  // n, values in [0, n_classes)
    std::size_t n_classes = 0;

    std::size_t size() const { return features.rows(); }
    std::size_t dim() const { return features.cols(); }
};

/// Interleaved two-moons generator. Point i of the upper moon is
/// (cos t, sin t) and of the lower moon (1 - cos t, 0.5 - sin t), with t
/// sweeping [0, pi) uniformly over each moon's sample count, plus isotropic
/// Gaussian noise of the given sigma. Labels: upper = 0, lower = 1.
Dataset make_two_moons(std::size_t n, double noise, std::uint64_t seed);

/// k isotropic Gaussian blobs, centers equally spaced on a circle of radius
/// 3, sigma `stddev`; label = blob index.
Dataset make_blobs(std::size_t n, std::size_t k, double stddev, std::uint64_t seed);

/// IDX image/label file pair (big-endian magic 0x00000803 / 0x00000801).
/// Pixels are flattened row-major and scaled to [0, 1]. Parse failures
/// report the byte offset of the offending field.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// CSV with header "label,f0,f1,...". Throws std::runtime_error with the
/// line number on malformed rows.
Dataset load_csv(const std::string& path);

/// Check labels lie in [0, n_classes); throws std::domain_error otherwise.
void validate_labels(const Dataset& ds, std::size_t n_classes);

} // namespace cbp
