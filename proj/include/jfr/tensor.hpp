#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace jfr {

/// Dense n-dimensional array of 64-bit floats, row-major.
///
/// The one value type everything else is built on: images, feature maps,
/// weights and gradients are all Tensors. Flat index of coordinates
/// (i0,...,ik) is sum(i_j * stride_j) with strides derived from the shape,
/// innermost axis contiguous.
class Tensor {
public:
    Tensor() = default;

    /// Zero-filled tensor of the given shape. Every dimension must be >= 1.
    explicit Tensor(std::vector<std::size_t> shape);

    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::size_t> shape, double value);
    /// Rank-1 tensor from a braced list, e.g. Tensor::of({1.0, 2.0}).
    static Tensor of(std::initializer_list<double> values);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t axis) const;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> span() { return data_; }
    std::span<const double> span() const { return data_; }

    double& operator[](std::size_t flat) { return data_[flat]; }
    double operator[](std::size_t flat) const { return data_[flat]; }

    /// Unchecked multi-index access; the number of indices must equal rank().
    template <class... Ix>
    double& operator()(Ix... ix) {
        return data_[offset({static_cast<std::size_t>(ix)...})];
    }
    template <class... Ix>
    double operator()(Ix... ix) const {
        return data_[offset({static_cast<std::size_t>(ix)...})];
    }

    /// Bounds-checked flat index of a coordinate tuple.
    std::size_t flat_index(std::span<const std::size_t> coords) const;
    /// Inverse of flat_index.
    std::vector<std::size_t> coords_of(std::size_t flat) const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    /// Reinterpret the buffer under a new shape of equal element count.
    Tensor reshaped(std::vector<std::size_t> shape) const;

    bool all_finite() const;
    void fill(double value);

private:
    std::size_t offset(std::initializer_list<std::size_t> ix) const;

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

/// "[2,3,4]" -- used in error messages throughout.
std::string shape_str(std::span<const std::size_t> shape);
std::string shape_str(const Tensor& t);

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, double b);
Tensor sub(const Tensor& a, double b);
Tensor mul(const Tensor& a, double b);
Tensor scale(const Tensor& a, double s);

void add_inplace(Tensor& a, const Tensor& b);
void scale_inplace(Tensor& a, double s);
/// y += a * x
void axpy(Tensor& y, double a, const Tensor& x);

// ---- matmul ----------------------------------------------------------------

/// Standard matrix product of two rank-2 tensors, [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// Rank-2 transpose.
Tensor transpose(const Tensor& a);

// ---- reductions ------------------------------------------------------------

double sum(const Tensor& t);
double mean(const Tensor& t);
/// Flat index of the largest element; ties break toward the lowest index.
std::size_t argmax(const Tensor& t);

Tensor sum(const Tensor& t, std::size_t axis);
Tensor mean(const Tensor& t, std::size_t axis);
/// Index of the per-slice maximum along `axis`, lowest index on ties.
Tensor argmax(const Tensor& t, std::size_t axis);

}  // namespace jfr
