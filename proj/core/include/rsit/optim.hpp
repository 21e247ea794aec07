// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "rsit/model.hpp"
#include "rsit/params.hpp"

namespace rsit::kernels {

struct AdamWConfig {
    double learning_rate = 2e-5;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double epsilon = 1e-8;
    double weight_decay = 0.0;
};

// Decoupled-weight-decay Adam over a ParameterStore. Updates touch only
// trainable parameters; passing a gradient for a frozen parameter is an
// error so freeze masks cannot be bypassed silently.
class AdamW {
public:
    explicit AdamW(AdamWConfig config = {}) : config_(config) {}

    const AdamWConfig& config() const { return config_; }

    void step(ParameterStore& store, const GradMap& grads);

private:
    AdamWConfig config_;
    long long t_ = 0;
    std::map<std::string, Tensor> m_;
    std::map<std::string, Tensor> v_;
};

}  // namespace rsit::kernels
