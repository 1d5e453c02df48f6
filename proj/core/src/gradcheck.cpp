#include "stpn/gradcheck.hpp"

#include <cmath>
#include <string>

#include "stpn/error.hpp"

namespace stpn {

double finite_diff_check(const ScalarFn& f, const std::vector<Tensor>& at,
                         const std::vector<Tensor>& autodiff_grads, double eps) {
    if (eps <= 0.0) throw NumericError("finite_diff_check: eps must be positive");
    if (at.size() != autodiff_grads.size()) {
        throw DimensionError("finite_diff_check: " + std::to_string(at.size()) +
                             " params vs " + std::to_string(autodiff_grads.size()) + " grads");
    }
    std::vector<Tensor> point = at;
    double worst = 0.0;
    for (std::size_t p = 0; p < point.size(); ++p) {
        if (!point[p].same_shape(autodiff_grads[p])) {
            throw DimensionError("finite_diff_check: grad shape mismatch at tensor " +
                                 std::to_string(p));
        }
        for (std::size_t j = 0; j < point[p].numel(); ++j) {
            const double saved = point[p].data()[j];
            point[p].data()[j] = saved + eps;
            const double fp = f(point);
            point[p].data()[j] = saved - eps;
            const double fm = f(point);
            point[p].data()[j] = saved;
            if (!std::isfinite(fp) || !std::isfinite(fm)) {
                throw NumericError("finite_diff_check: non-finite function value");
            }
            const double fd = (fp - fm) / (2.0 * eps);
            const double g = autodiff_grads[p].data()[j];
            const double rel = std::abs(g - fd) /
                               std::max({1.0, std::abs(g), std::abs(fd)});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace stpn
