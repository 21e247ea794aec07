// SPDX-License-Identifier: Apache-2.0

#include "rsit/optim.hpp"

#include <cmath>

namespace rsit::kernels {

void AdamW::step(ParameterStore& store, const GradMap& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));

    for (const auto& [name, grad] : grads) {
        Parameter& param = store.get(name);
        if (!param.trainable)
            throw KernelError("adamw_step: gradient supplied for frozen parameter " + name);
        if (!grad.same_shape(param.tensor))
            throw KernelError("adamw_step: gradient shape mismatch for " + name);

        auto m_it = m_.find(name);
        if (m_it == m_.end()) {
            m_it = m_.emplace(name, Tensor::zeros_like(param.tensor)).first;
            v_.emplace(name, Tensor::zeros_like(param.tensor));
        }
        Tensor& m = m_it->second;
        Tensor& v = v_.at(name);

        for (std::size_t i = 0; i < param.tensor.numel(); ++i) {
            const double g = grad[i];
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            param.tensor[i] -= config_.learning_rate *
                               (m_hat / (std::sqrt(v_hat) + config_.epsilon) +
                                config_.weight_decay * param.tensor[i]);
        }
    }
}

}  // namespace rsit::kernels
