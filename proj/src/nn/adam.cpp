#include "wcgnn/nn/adam.hpp"

#include <cmath>
#include <string>

namespace wcgnn::nn {

AdamState::AdamState(AdamConfig cfg, std::span<Tensor* const> params) : cfg_(cfg) {
    for (const Tensor* p : params) {
        m_.emplace_back(p->rows(), p->cols());
        v_.emplace_back(p->rows(), p->cols());
    }
}

void AdamState::step(std::span<Tensor* const> params, std::span<const Tensor> grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        throw ShapeError("adam_step: parameter/gradient count differs from the optimizer state");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i]->same_shape(m_[i]) || !grads[i].same_shape(m_[i])) {
            throw ShapeError("adam_step: tensor " + std::to_string(i) + " changed shape");
        }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = grads[i];
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[k];
            v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
            const double mhat = m[k] / c1;
            const double vhat = v[k] / c2;
            p[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

}  // namespace wcgnn::nn
