#pragma once

#include <cstddef>
#include <vector>

#include "wcgnn/nn/tape.hpp"
#include "wcgnn/nn/tensor.hpp"
#include "wcgnn/rng.hpp"

namespace wcgnn::nn {

/// Fully connected network. Layer l maps widths[l] -> widths[l+1] with
/// weights[l] (widths[l] x widths[l+1]) and biases[l] (1 x widths[l+1]).
/// Hidden layers use ReLU; the last layer is affine.
struct MlpParams {
    std::vector<std::size_t> widths;
    std::vector<Tensor> weights;
    std::vector<Tensor> biases;

    std::size_t num_layers() const { return weights.size(); }
    std::size_t input_width() const { return widths.front(); }
    std::size_t output_width() const { return widths.back(); }
    std::size_t num_parameters() const;

    void validate() const;
    bool operator==(const MlpParams&) const = default;
};

// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero. Draws are
// taken layer by layer in row-major order.
MlpParams init_glorot(const std::vector<std::size_t>& widths, Rng& rng);

MlpParams zero_mlp(const std::vector<std::size_t>& widths);

// Parameter nodes of one MlpParams bound to a tape.
struct MlpVars {
    std::vector<Var> weights;
    std::vector<Var> biases;
};

MlpVars bind(Tape& tape, const MlpParams& p);

Var mlp_forward(Tape& tape, const MlpVars& p, Var x);

// Convenience evaluation on a throwaway tape.
Tensor mlp_forward(const MlpParams& p, const Tensor& x);

}  // namespace wcgnn::nn
