#pragma once

#include "ndarray.hpp"
#include "quantize.hpp"
#include "rng.hpp"

#include <cstdint>
#include <vector>

namespace cbp {

enum class Activation { relu, none };

struct Layer {
    Matrix weights;            // out x in
    std::vector<double> bias;  // out
    Activation activation = Activation::none;
    LayerQuantConfig quant;

    std::size_t fan_in() const { return weights.cols(); }
    std::size_t fan_out() const { return weights.rows(); }
};

enum class ForwardMode { quantized, full_precision };

/// Cached per-layer tensors from one forward pass, consumed by backward().
struct ForwardTrace {
    std::vector<Matrix> inputs;          // input to each layer, batch x in
    std::vector<Matrix> pre_activations; // batch x out
    std::vector<Matrix> quantized_weights; // weights used in the pass (empty slot if layer used W directly)
    Matrix logits;
    ForwardMode mode = ForwardMode::full_precision;
    std::uint64_t pass_id = 0;
};

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
};

class Network {
public:
    Network() = default;

    /// Dense net from layer sizes, e.g. {2, 16, 16, 2}: hidden layers get
    /// ReLU, the output layer is linear. First and last layers start exempt
    /// from quantization. Weights uniform in +-1/sqrt(fan_in), biases zero.
    static Network dense(const std::vector<std::size_t>& sizes, Rng& rng,
                         ConstraintKind kind = ConstraintKind::ternary);

    std::vector<Layer>& layers() { return layers_; }
    const std::vector<Layer>& layers() const { return layers_; }
    std::size_t input_dim() const { return layers_.front().fan_in(); }
    std::size_t output_dim() const { return layers_.back().fan_out(); }

    /// Number of weights in non-exempt layers.
    std::size_t constrained_weight_count() const;

    /// Forward pass over a batch (rows are samples). In quantized mode the
    /// non-exempt layers use ste_quantize(W) elementwise; grids must then be
    /// supplied, one per layer (slots for exempt layers are ignored).
    ForwardTrace forward(const Matrix& batch, ForwardMode mode,
                         const std::vector<QuantGrid>* grids = nullptr) const;

    /// Backprop of mean softmax cross-entropy through `trace`. Gradients for
    /// quantized layers are w.r.t. the quantized weights and assigned
    /// straight through to the real-valued weights.
    Gradients backward(const ForwardTrace& trace, const std::vector<int>& labels) const;

private:
    std::vector<Layer> layers_;
    mutable std::uint64_t pass_counter_ = 0;
};

/// Mean softmax cross-entropy. Throws std::domain_error on out-of-range
/// labels.
double softmax_cross_entropy(const Matrix& logits, const std::vector<int>& labels);

/// Row-wise softmax probabilities (numerically stabilized).
Matrix softmax_rows(const Matrix& logits);

/// Fraction of rows whose argmax equals the label (ties -> lowest index).
double top1_accuracy(const Matrix& logits, const std::vector<int>& labels);

} // namespace cbp
