#include "psf4d/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "psf4d/error.hpp"

namespace psf4d {

std::size_t element_count(const Shape& shape) {
    if (shape.empty()) {
        throw ShapeError("shape must have at least one axis");
    }
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) {
            throw ShapeError("zero-length axis in shape " + shape_string(shape));
        }
        n *= d;
    }
    return n;
}

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != element_count(shape_)) {
        throw ShapeError("data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string(shape_));
    }
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw IndexError("axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(shape_.size()));
    }
    return shape_[axis];
}

std::size_t Tensor::stride(std::size_t axis) const {
    dim(axis);
    std::size_t s = 1;
    for (std::size_t a = axis + 1; a < shape_.size(); ++a) s *= shape_[a];
    return s;
}

std::size_t Tensor::offset(std::span<const std::size_t> index) const {
    if (index.size() != shape_.size()) {
        throw IndexError("index rank " + std::to_string(index.size()) +
                         " does not match tensor rank " + std::to_string(shape_.size()));
    }
    std::size_t off = 0;
    for (std::size_t a = 0; a < shape_.size(); ++a) {
        if (index[a] >= shape_[a]) {
            throw IndexError("index " + std::to_string(index[a]) + " out of range on axis " +
                             std::to_string(a) + " of " + shape_string(shape_));
        }
        off = off * shape_[a] + index[a];
    }
    return off;
}

double& Tensor::at(std::initializer_list<std::size_t> index) {
    return data_[offset(std::span(index.begin(), index.size()))];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
    return data_[offset(std::span(index.begin(), index.size()))];
}

std::size_t Tensor::prefix_offset(std::initializer_list<std::size_t> prefix,
                                  std::size_t& block_size) const {
    if (prefix.size() > shape_.size()) {
        throw IndexError("block prefix longer than tensor rank");
    }
    std::size_t off = 0;
    std::size_t a = 0;
    for (std::size_t i : prefix) {
        if (i >= shape_[a]) {
            throw IndexError("block index " + std::to_string(i) + " out of range on axis " +
                             std::to_string(a) + " of " + shape_string(shape_));
        }
        off = off * shape_[a] + i;
        ++a;
    }
    block_size = 1;
    for (; a < shape_.size(); ++a) block_size *= shape_[a];
    return off * block_size;
}

std::span<double> Tensor::block(std::initializer_list<std::size_t> prefix) {
    std::size_t n = 0;
    std::size_t off = prefix_offset(prefix, n);
    return std::span<double>(data_).subspan(off, n);
}

std::span<const double> Tensor::block(std::initializer_list<std::size_t> prefix) const {
    std::size_t n = 0;
    std::size_t off = prefix_offset(prefix, n);
    return std::span<const double>(data_).subspan(off, n);
}

Tensor Tensor::reshaped(Shape shape) const {
    if (element_count(shape) != data_.size()) {
        throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* context) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(context) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
    }
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() &&
           (a.size() == 0 ||
            std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(double)) == 0);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace psf4d
