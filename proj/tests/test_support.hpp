#pragma once

#include "wss/losses/losses.hpp"
#include "wss/model/net.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace wss::testing {

// Loss of a score field produced by the network for a fixed input.
using ScoreLoss = std::function<LossResult(const GridSpec&, const std::vector<double>&)>;

inline double net_loss_value(const Network& net, const Parameters& params, const Act& input,
                             const GridSpec& grid, const ScoreLoss& loss) {
    const Act scores = net.forward(params, input, false, nullptr, nullptr);
    return loss(grid, scores.v).value;
}

// Max relative error between the analytic parameter gradient and central
// finite differences; small components fall back to an absolute 1e-4 floor.
inline double fd_net_max_rel_error(const Network& net, Parameters params, const Act& input,
                                   const GridSpec& grid, const ScoreLoss& loss,
                                   double h = 1e-5) {
    Network::Cache cache;
    const Act scores = net.forward(params, input, false, nullptr, &cache);
    const LossResult lr = loss(grid, scores.v);
    Act grad_scores(scores.c, scores.z, scores.y, scores.x);
    grad_scores.v = lr.grad_scores;
    const Parameters analytic = net.backward(params, cache, grad_scores);

    double worst = 0.0;
    for (size_t t = 0; t < params.size(); ++t) {
        for (size_t i = 0; i < params[t].data.size(); ++i) {
            const double saved = params[t].data[i];
            params[t].data[i] = saved + h;
            const double fp = net_loss_value(net, params, input, grid, loss);
            params[t].data[i] = saved - h;
            const double fm = net_loss_value(net, params, input, grid, loss);
            params[t].data[i] = saved;
            const double fd = (fp - fm) / (2.0 * h);
            const double an = analytic[t].data[i];
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-4});
            worst = std::max(worst, std::abs(fd - an) / denom);
        }
    }
    return worst;
}

} // namespace wss::testing
