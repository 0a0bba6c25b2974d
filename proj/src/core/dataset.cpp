#include "dataset.hpp"

#include "rng.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cbp {

namespace {

constexpr double kPi = 3.14159265358979323846;

void finalize_classes(Dataset& ds) {
    int mx = -1;
    for (int y : ds.labels) {
        if (y < 0)
            throw std::domain_error("dataset: negative label");
        mx = std::max(mx, y);
    }
    ds.n_classes = static_cast<std::size_t>(mx + 1);
}

} // namespace

Dataset make_two_moons(std::size_t n, double noise, std::uint64_t seed) {
    Rng rng(seed);
    Dataset ds;
    ds.features = Matrix(n, 2);
    ds.labels.resize(n);
    const std::size_t n_upper = n / 2;
    for (std::size_t i = 0; i < n; ++i) {
        const bool upper = i < n_upper;
        const std::size_t size = upper ? n_upper : n - n_upper;
        const std::size_t idx = upper ? i : i - n_upper;
        const double t = kPi * static_cast<double>(idx) / static_cast<double>(size);
        double x = upper ? std::cos(t) : 1.0 - std::cos(t);
        double y = upper ? std::sin(t) : 0.5 - std::sin(t);
        x += noise * rng.normal();
        y += noise * rng.normal();
        ds.features(i, 0) = x;
        ds.features(i, 1) = y;
        ds.labels[i] = upper ? 0 : 1;
    }
    ds.n_classes = 2;
    return ds;
}

Dataset make_blobs(std::size_t n, std::size_t k, double stddev, std::uint64_t seed) {
    if (k == 0)
        throw std::invalid_argument("make_blobs: need at least one cluster");
    Rng rng(seed);
    Dataset ds;
    ds.features = Matrix(n, 2);
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i % k;
        const double angle = 2.0 * kPi * static_cast<double>(c) / static_cast<double>(k);
        ds.features(i, 0) = 3.0 * std::cos(angle) + stddev * rng.normal();
        ds.features(i, 1) = 3.0 * std::sin(angle) + stddev * rng.normal();
        ds.labels[i] = static_cast<int>(c);
    }
    ds.n_classes = k;
    return ds;
}

namespace {

class IdxReader {
public:
    explicit IdxReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_)
            throw std::runtime_error("idx: cannot open " + path);
    }

    std::uint32_t read_u32() {
        unsigned char b[4];
        in_.read(reinterpret_cast<char*>(b), 4);
        if (!in_)
            fail("truncated u32");
        offset_ += 4;
        return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
               (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
    }

    void read_bytes(unsigned char* dst, std::size_t count) {
        in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(count));
        if (!in_)
            fail("truncated payload");
        offset_ += count;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw std::runtime_error("idx: " + what + " in " + path_ + " at byte offset " +
                                 std::to_string(offset_));
    }

    std::size_t offset() const { return offset_; }

private:
    std::string path_;
    std::ifstream in_;
    std::size_t offset_ = 0;
};

} // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    IdxReader images(images_path);
    const std::uint32_t image_magic = images.read_u32();
    if (image_magic != 0x00000803u)
        images.fail("bad magic (expected 0x00000803)");
    const std::uint32_t n = images.read_u32();
    const std::uint32_t rows = images.read_u32();
    const std::uint32_t cols = images.read_u32();
    if (rows == 0 || cols == 0)
        images.fail("zero image dimensions");

    IdxReader labels(labels_path);
    const std::uint32_t label_magic = labels.read_u32();
    if (label_magic != 0x00000801u)
        labels.fail("bad magic (expected 0x00000801)");
    const std::uint32_t n_labels = labels.read_u32();
    if (n_labels != n)
        labels.fail("label count " + std::to_string(n_labels) + " does not match image count " +
                    std::to_string(n));

    Dataset ds;
    ds.features = Matrix(n, static_cast<std::size_t>(rows) * cols);
    ds.labels.resize(n);

    std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols);
    for (std::uint32_t i = 0; i < n; ++i) {
        images.read_bytes(buf.data(), buf.size());
        for (std::size_t j = 0; j < buf.size(); ++j)
            ds.features(i, j) = static_cast<double>(buf[j]) / 255.0;
    }
    for (std::uint32_t i = 0; i < n; ++i) {
        unsigned char y;
        labels.read_bytes(&y, 1);
        ds.labels[i] = static_cast<int>(y);
    }
    finalize_classes(ds);
    return ds;
}

Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("csv: cannot open " + path);

    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("csv: empty file " + path);
    if (line.rfind("label", 0) != 0)
        throw std::runtime_error("csv: header must start with 'label' in " + path);
    std::size_t dim = 0;
    for (char c : line)
        if (c == ',')
            ++dim;

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t col = 0;
        while (std::getline(ss, cell, ',')) {
            try {
                if (col == 0)
                    labels.push_back(std::stoi(cell));
                else
                    values.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw std::runtime_error("csv: bad value '" + cell + "' at line " +
                                         std::to_string(line_no) + " of " + path);
            }
            ++col;
        }
        if (col != dim + 1)
            throw std::runtime_error("csv: expected " + std::to_string(dim + 1) +
                                     " columns, got " + std::to_string(col) + " at line " +
                                     std::to_string(line_no) + " of " + path);
    }
    Dataset ds;
    ds.features = Matrix(labels.size(), dim, std::move(values));
    ds.labels = std::move(labels);
    finalize_classes(ds);
    return ds;
}

void validate_labels(const Dataset& ds, std::size_t n_classes) {
    for (int y : ds.labels)
        if (y < 0 || static_cast<std::size_t>(y) >= n_classes)
            throw std::domain_error("dataset: label " + std::to_string(y) +
                                    " outside [0, " + std::to_string(n_classes) + ")");
}

} // namespace cbp
