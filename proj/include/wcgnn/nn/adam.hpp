#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wcgnn/nn/tensor.hpp"

namespace wcgnn::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected adam over a fixed list of parameter tensors.
class AdamState {
public:
    AdamState(AdamConfig cfg, std::span<Tensor* const> params);

    void step(std::span<Tensor* const> params, std::span<const Tensor> grads);

    const AdamConfig& config() const { return cfg_; }
    void set_learning_rate(double lr) { cfg_.lr = lr; }
    std::size_t steps() const { return t_; }
    const std::vector<Tensor>& first_moment() const { return m_; }
    const std::vector<Tensor>& second_moment() const { return v_; }

private:
    AdamConfig cfg_;
    std::size_t t_ = 0;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
};

}  // namespace wcgnn::nn
