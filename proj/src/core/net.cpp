#include "net.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cbp {

Network Network::dense(const std::vector<std::size_t>& sizes, Rng& rng, ConstraintKind kind) {
    if (sizes.size() < 2)
        throw std::invalid_argument("Network::dense: need at least input and output sizes");
    Network net;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        Layer layer;
        layer.weights = Matrix(sizes[l + 1], sizes[l]);
        const double bound = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
        for (std::size_t i = 0; i < layer.weights.size(); ++i)
            layer.weights.data()[i] = rng.uniform(-bound, bound);
        layer.bias.assign(sizes[l + 1], 0.0);
        layer.activation = (l + 2 < sizes.size()) ? Activation::relu : Activation::none;
        layer.quant.kind = kind;
        layer.quant.exempt = (l == 0) || (l + 2 == sizes.size());
        net.layers_.push_back(std::move(layer));
    }
    return net;
}

std::size_t Network::constrained_weight_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_)
        if (!layer.quant.exempt)
            n += layer.weights.size();
    return n;
}

ForwardTrace Network::forward(const Matrix& batch, ForwardMode mode,
                              const std::vector<QuantGrid>* grids) const {
    if (batch.cols() != input_dim())
        throw std::invalid_argument("forward: batch has " + std::to_string(batch.cols()) +
                                    " features, network expects " + std::to_string(input_dim()));
    if (mode == ForwardMode::quantized && (!grids || grids->size() != layers_.size()))
        throw std::invalid_argument("forward: quantized mode requires one grid per layer");

    ForwardTrace trace;
    trace.mode = mode;
    trace.pass_id = ++pass_counter_;
    trace.inputs.reserve(layers_.size());
    trace.pre_activations.reserve(layers_.size());
    trace.quantized_weights.resize(layers_.size());

    Matrix x = batch;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        trace.inputs.push_back(x);

        const Matrix* w = &layer.weights;
        if (mode == ForwardMode::quantized && !layer.quant.exempt) {
            trace.quantized_weights[l] = ste_quantize(layer.weights, (*grids)[l]);
            w = &trace.quantized_weights[l];
        }

        Matrix z = add_row(matmul(x, transpose(*w)), layer.bias);
        trace.pre_activations.push_back(z);

        if (layer.activation == Activation::relu) {
            for (std::size_t i = 0; i < z.size(); ++i)
                if (z.data()[i] < 0.0)
                    z.data()[i] = 0.0;
        }
        x = std::move(z);
    }
    trace.logits = std::move(x);
    return trace;
}

Gradients Network::backward(const ForwardTrace& trace, const std::vector<int>& labels) const {
    if (trace.inputs.size() != layers_.size() || trace.pass_id == 0 ||
        trace.pass_id > pass_counter_)
        throw std::logic_error("backward: trace does not match a forward pass of this network");
    if (labels.size() != trace.logits.rows())
        throw std::invalid_argument("backward: one label per batch row required");

    const std::size_t batch = trace.logits.rows();
    Gradients grads;
    grads.weights.resize(layers_.size());
    grads.biases.resize(layers_.size());

    // d(mean CE)/d(logits) = (softmax - onehot) / batch.
    Matrix delta = softmax_rows(trace.logits);
    for (std::size_t r = 0; r < batch; ++r) {
        const int y = labels[r];
        if (y < 0 || static_cast<std::size_t>(y) >= delta.cols())
            throw std::domain_error("backward: label out of range");
        delta(r, static_cast<std::size_t>(y)) -= 1.0;
    }
    delta = scale(delta, 1.0 / static_cast<double>(batch));

    for (std::size_t l = layers_.size(); l-- > 0;) {
        const Layer& layer = layers_[l];
        if (layer.activation == Activation::relu) {
            const Matrix& z = trace.pre_activations[l];
            for (std::size_t i = 0; i < delta.size(); ++i)
                if (z.data()[i] <= 0.0)
                    delta.data()[i] = 0.0;
        }
        grads.weights[l] = matmul(transpose(delta), trace.inputs[l]);
        grads.biases[l] = col_sums(delta);
        if (l > 0) {
            // Propagate through the weights the forward pass actually used.
            const Matrix& w = (trace.mode == ForwardMode::quantized && !layer.quant.exempt)
                                  ? trace.quantized_weights[l]
                                  : layer.weights;
            delta = matmul(delta, w);
        }
    }
    return grads;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix probs = logits;
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        double mx = probs(r, 0);
        for (std::size_t c = 1; c < probs.cols(); ++c)
            mx = std::max(mx, probs(r, c));
        double denom = 0.0;
        for (std::size_t c = 0; c < probs.cols(); ++c) {
            probs(r, c) = std::exp(probs(r, c) - mx);
            denom += probs(r, c);
        }
        for (std::size_t c = 0; c < probs.cols(); ++c)
            probs(r, c) /= denom;
    }
    return probs;
}

double softmax_cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
    if (labels.size() != logits.rows())
        throw std::invalid_argument("softmax_cross_entropy: one label per batch row required");
    double total = 0.0;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const int y = labels[r];
        if (y < 0 || static_cast<std::size_t>(y) >= logits.cols())
            throw std::domain_error("softmax_cross_entropy: label " + std::to_string(y) +
                                    " out of range for " + std::to_string(logits.cols()) +
                                    " classes");
        double mx = logits(r, 0);
        for (std::size_t c = 1; c < logits.cols(); ++c)
            mx = std::max(mx, logits(r, c));
        double lse = 0.0;
        for (std::size_t c = 0; c < logits.cols(); ++c)
            lse += std::exp(logits(r, c) - mx);
        total += std::log(lse) + mx - logits(r, static_cast<std::size_t>(y));
    }
    return total / static_cast<double>(logits.rows());
}

double top1_accuracy(const Matrix& logits, const std::vector<int>& labels) {
    if (labels.size() != logits.rows())
        throw std::invalid_argument("top1_accuracy: one label per batch row required");
    std::size_t hits = 0;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < logits.cols(); ++c)
            if (logits(r, c) > logits(r, best))
                best = c;
        if (static_cast<int>(best) == labels[r])
            ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(logits.rows());
}

} // namespace cbp
