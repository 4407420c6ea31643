#pragma once

#include "wss/model/net.hpp"

namespace wss {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
};

struct AdamState {
    int64_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    static AdamState zeros_like(const Parameters& params);
};

// Decoupled weight decay followed by the bias-corrected Adam update.
void adam_step(AdamState& state, Parameters& params, const Parameters& grads,
               const AdamConfig& config);

} // namespace wss
