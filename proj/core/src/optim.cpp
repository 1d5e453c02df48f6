#include "stpn/optim.hpp"

#include <cmath>
#include <string>

#include "stpn/error.hpp"

namespace stpn {

void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state, const AdamConfig& cfg) {
    if (params.size() != grads.size()) {
        throw DimensionError("adam_step: " + std::to_string(params.size()) + " params vs " +
                             std::to_string(grads.size()) + " grads");
    }
    if (state.m.empty()) {
        state.m.reserve(params.size());
        state.v.reserve(params.size());
        for (const Tensor* p : params) {
            state.m.emplace_back(p->shape());
            state.v.emplace_back(p->shape());
        }
    }
    if (state.m.size() != params.size()) {
        throw DimensionError("adam_step: state tracks " + std::to_string(state.m.size()) +
                             " tensors, got " + std::to_string(params.size()));
    }

    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);

    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& gt = *grads[i];
        if (!p.same_shape(gt) || !p.same_shape(state.m[i])) {
            throw DimensionError("adam_step: shape mismatch at tensor " + std::to_string(i) +
                                 ": param " + Tensor::shape_str(p.shape()) + ", grad " +
                                 Tensor::shape_str(gt.shape()));
        }
        double* m = state.m[i].data();
        double* v = state.v[i].data();
        const double* grad = gt.data();
        double* w = p.data();
        for (std::size_t j = 0; j < p.numel(); ++j) {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * grad[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * grad[j] * grad[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            w[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

}  // namespace stpn
