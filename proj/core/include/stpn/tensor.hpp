#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace stpn {

/// Dense row-major array of f64 values. The one value type of the numeric
/// core; rank 0 (scalar) and zero extents are both legal.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);  // zero-filled
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor scalar(double v);
    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::size_t> shape, double v);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    // 2-d accessors; rank is checked by callers that require it.
    std::size_t rows() const { return shape_[0]; }
    std::size_t cols() const { return shape_[1]; }
    double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;

    static std::size_t shape_numel(const std::vector<std::size_t>& shape);
    static std::string shape_str(const std::vector<std::size_t>& shape);

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

/// Arithmetic mean along `axis`; the axis is dropped from the shape.
/// Accumulation is order-independent (min-shifted, sorted), so pooling a
/// permuted stack is bit-identical and a stack of equal slices returns the
/// slice exactly.
Tensor mean_over_axis(const Tensor& x, std::size_t axis);

/// Order-independent mean of n values (helper shared with the graph ops).
double stable_mean(const double* vals, std::size_t n, std::size_t stride);

}  // namespace stpn
