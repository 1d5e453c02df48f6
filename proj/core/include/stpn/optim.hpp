#pragma once

#include <cstdint>
#include <vector>

#include "stpn/tensor.hpp"

namespace stpn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// First/second moments aligned with the caller's fixed parameter order.
struct AdamState {
    std::uint64_t step = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;
};

/// One bias-corrected Adam update over aligned parameter/gradient vectors.
/// Moment tensors are allocated on first use; shape mismatches throw.
void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state, const AdamConfig& cfg);

}  // namespace stpn
