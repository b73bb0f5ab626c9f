#include "wcgnn/nn/mlp.hpp"

#include <cmath>
#include <string>

namespace wcgnn::nn {

std::size_t MlpParams::num_parameters() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

void MlpParams::validate() const {
    if (widths.size() < 2) throw ShapeError("MLP needs at least an input and an output width");
    if (weights.size() != widths.size() - 1 || biases.size() != weights.size()) {
        throw ShapeError("MLP layer count does not match its widths");
    }
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (weights[l].rows() != widths[l] || weights[l].cols() != widths[l + 1]) {
            throw ShapeError("MLP weight " + std::to_string(l) + " has the wrong shape");
        }
        if (biases[l].rows() != 1 || biases[l].cols() != widths[l + 1]) {
            throw ShapeError("MLP bias " + std::to_string(l) + " has the wrong shape");
        }
    }
}

MlpParams zero_mlp(const std::vector<std::size_t>& widths) {
    if (widths.size() < 2) throw ShapeError("MLP needs at least an input and an output width");
    MlpParams p;
    p.widths = widths;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        p.weights.emplace_back(widths[l], widths[l + 1]);
        p.biases.emplace_back(1, widths[l + 1]);
    }
    return p;
}

MlpParams init_glorot(const std::vector<std::size_t>& widths, Rng& rng) {
    MlpParams p = zero_mlp(widths);
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        const double limit = std::sqrt(6.0 / static_cast<double>(widths[l] + widths[l + 1]));
        for (double& w : p.weights[l].buffer()) w = rng.uniform(-limit, limit);
    }
    return p;
}

MlpVars bind(Tape& tape, const MlpParams& p) {
    p.validate();
    MlpVars v;
    for (std::size_t l = 0; l < p.num_layers(); ++l) {
        v.weights.push_back(tape.parameter(p.weights[l]));
        v.biases.push_back(tape.parameter(p.biases[l]));
    }
    return v;
}

Var mlp_forward(Tape& tape, const MlpVars& p, Var x) {
    const std::size_t layers = p.weights.size();
    if (tape.value(x).cols() != tape.value(p.weights.front()).rows()) {
        throw ShapeError("mlp_forward: input width " + std::to_string(tape.value(x).cols()) +
                         " does not match the first layer (" +
                         std::to_string(tape.value(p.weights.front()).rows()) + ")");
    }
    Var h = x;
    for (std::size_t l = 0; l < layers; ++l) {
        h = tape.add_row(tape.matmul(h, p.weights[l]), p.biases[l]);
        if (l + 1 < layers) h = tape.relu(h);
    }
    return h;
}

Tensor mlp_forward(const MlpParams& p, const Tensor& x) {
    Tape tape;
    MlpVars v;
    p.validate();
    for (std::size_t l = 0; l < p.num_layers(); ++l) {
        v.weights.push_back(tape.constant(p.weights[l]));
        v.biases.push_back(tape.constant(p.biases[l]));
    }
    return tape.value(mlp_forward(tape, v, tape.constant(x)));
}

}  // namespace wcgnn::nn
