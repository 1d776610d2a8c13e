#pragma once

#include <cmath>

#include "v2v3d/nn/graph.hpp"

namespace v2v3d::nn {

// Bias-corrected adaptive-moment update. Gradients are read from each
// param's attached leaf; moment math runs in double regardless of T.
template <typename T>
void adam_step(const std::vector<Param<T>*>& params, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8) {
    for (Param<T>* p : params) {
        if (!p->node) throw Error("adam_step: param '" + p->name + "' has no attached graph leaf");
        const std::vector<T>& g = p->node->grad;
        p->step += 1;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(p->step));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(p->step));
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double gi = static_cast<double>(g[i]);
            const double mi = beta1 * static_cast<double>(p->m[i]) + (1.0 - beta1) * gi;
            const double vi = beta2 * static_cast<double>(p->v[i]) + (1.0 - beta2) * gi * gi;
            p->m[i] = static_cast<T>(mi);
            p->v[i] = static_cast<T>(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            p->value[i] = static_cast<T>(static_cast<double>(p->value[i]) - lr * mhat / (std::sqrt(vhat) + eps));
        }
    }
}

} // namespace v2v3d::nn
