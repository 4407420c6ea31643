#include "wss/model/adam.hpp"

#include "wss/util/error.hpp"

#include <cmath>

namespace wss {

AdamState AdamState::zeros_like(const Parameters& params) {
    AdamState s;
    for (const Tensor& t : params) {
        s.m.emplace_back(t.data.size(), 0.0);
        s.v.emplace_back(t.data.size(), 0.0);
    }
    return s;
}

void adam_step(AdamState& state, Parameters& params, const Parameters& grads,
               const AdamConfig& config) {
    require(params.size() == grads.size() && params.size() == state.m.size(),
            "adam shapes do not match");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
    for (size_t t = 0; t < params.size(); ++t) {
        auto& p = params[t].data;
        const auto& g = grads[t].data;
        auto& m = state.m[t];
        auto& v = state.v[t];
        require(p.size() == g.size(), "adam tensor size mismatch");
#pragma omp parallel for schedule(static) if (p.size() > 16384)
        for (int64_t i = 0; i < static_cast<int64_t>(p.size()); ++i) {
            p[i] -= config.lr * config.weight_decay * p[i];
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= config.lr * mhat / (std::sqrt(vhat) + config.eps);
        }
    }
}

} // namespace wss
