#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace psf4d {

using Shape = std::vector<std::size_t>;

/// Number of elements described by `shape`. Throws ShapeError on an empty
/// shape or a zero-length axis.
std::size_t element_count(const Shape& shape);

std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles.
///
/// The element count always equals the product of the shape. The tensor owns
/// its storage; copies are deep.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t dim(std::size_t axis) const;

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    /// Bounds-checked multi-index access.
    double& at(std::initializer_list<std::size_t> index);
    double at(std::initializer_list<std::size_t> index) const;

    /// Row-major offset of a multi-index (bounds-checked).
    std::size_t offset(std::span<const std::size_t> index) const;

    /// Number of elements spanned by one step along `axis`.
    std::size_t stride(std::size_t axis) const;

    /// Contiguous block selected by fixing the leading `prefix.size()` axes.
    std::span<double> block(std::initializer_list<std::size_t> prefix);
    std::span<const double> block(std::initializer_list<std::size_t> prefix) const;

    /// Same data, new shape of equal element count.
    Tensor reshaped(Shape shape) const;

    bool all_finite() const noexcept;

    friend bool operator==(const Tensor& a, const Tensor& b) = default;

  private:
    std::size_t prefix_offset(std::initializer_list<std::size_t> prefix,
                              std::size_t& block_size) const;

    Shape shape_;
    std::vector<double> data_;
};

/// Throws ShapeError unless both tensors have identical shapes.
void require_same_shape(const Tensor& a, const Tensor& b, const char* context);

/// Bitwise comparison, so that NaN payloads and signed zeros count.
bool bitwise_equal(const Tensor& a, const Tensor& b);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace psf4d
