#include "stpn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "stpn/error.hpp"

namespace stpn {

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != data_.size()) {
        throw DimensionError("tensor: shape " + shape_str(shape_) + " holds " +
                             std::to_string(shape_numel(shape_)) + " values, got " +
                             std::to_string(data_.size()));
    }
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::size_t Tensor::shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

std::string Tensor::shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

double stable_mean(const double* vals, std::size_t n, std::size_t stride) {
    // mean = m + sum(x_i - m)/n with m = min(x). Differences from the minimum
    // are summed in sorted order, so the result does not depend on input
    // order, and n equal values return that value exactly (all diffs are 0).
    double m = vals[0];
    for (std::size_t i = 1; i < n; ++i) m = std::min(m, vals[i * stride]);
    std::vector<double> diffs(n);
    for (std::size_t i = 0; i < n; ++i) diffs[i] = vals[i * stride] - m;
    std::sort(diffs.begin(), diffs.end());
    double s = 0.0;
    for (double d : diffs) s += d;
    return m + s / static_cast<double>(n);
}

Tensor mean_over_axis(const Tensor& x, std::size_t axis) {
    const auto& shape = x.shape();
    if (axis >= shape.size()) {
        throw DimensionError("mean_over_axis: axis " + std::to_string(axis) +
                             " out of range for " + Tensor::shape_str(shape));
    }
    const std::size_t extent = shape[axis];
    if (extent == 0) throw DimensionError("mean_over_axis: empty axis");

    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];

    std::vector<std::size_t> out_shape;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i != axis) out_shape.push_back(shape[i]);
    }
    Tensor out(std::move(out_shape));
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
            const double* base = x.data() + o * extent * inner + i;
            out.data()[o * inner + i] = stable_mean(base, extent, inner);
        }
    }
    return out;
}

}  // namespace stpn
