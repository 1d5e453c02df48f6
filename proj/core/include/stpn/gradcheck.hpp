#pragma once

#include <functional>
#include <vector>

#include "stpn/tensor.hpp"

namespace stpn {

/// Pure deterministic map from a parameter point to a scalar.
using ScalarFn = std::function<double(const std::vector<Tensor>&)>;

/// Central-difference verification of reverse-mode gradients. For every
/// coordinate of every parameter, compares the supplied autodiff gradient g
/// against (f(x+eps e) - f(x-eps e)) / 2 eps and returns
/// max |g - fd| / max(1, |g|, |fd|). Throws NumericError if f evaluates to a
/// non-finite value.
double finite_diff_check(const ScalarFn& f, const std::vector<Tensor>& at,
                         const std::vector<Tensor>& autodiff_grads, double eps);

}  // namespace stpn
