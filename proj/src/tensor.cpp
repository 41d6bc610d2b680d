#include "jfr/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace jfr {

namespace {

std::size_t checked_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) {
            throw std::invalid_argument("tensor shape has a zero dimension: " +
                                        shape_str(shape));
        }
        n *= d;
    }
    return n;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    shape_str(a) + " vs " + shape_str(b));
    }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(checked_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_product(shape_) != data_.size()) {
        throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_str(shape_));
    }
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

Tensor Tensor::of(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw std::invalid_argument("axis " + std::to_string(axis) +
                                    " out of range for shape " + shape_str(shape_));
    }
    return shape_[axis];
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> ix) const {
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (std::size_t i : ix) {
        flat = flat * shape_[axis] + i;
        ++axis;
    }
    return flat;
}

std::size_t Tensor::flat_index(std::span<const std::size_t> coords) const {
    if (coords.size() != shape_.size()) {
        throw std::invalid_argument("coordinate rank " + std::to_string(coords.size()) +
                                    " does not match tensor shape " + shape_str(shape_));
    }
    std::size_t flat = 0;
    for (std::size_t axis = 0; axis < coords.size(); ++axis) {
        if (coords[axis] >= shape_[axis]) {
            throw std::invalid_argument("coordinate out of range on axis " +
                                        std::to_string(axis) + " for shape " +
                                        shape_str(shape_));
        }
        flat = flat * shape_[axis] + coords[axis];
    }
    return flat;
}

std::vector<std::size_t> Tensor::coords_of(std::size_t flat) const {
    if (flat >= size()) {
        throw std::invalid_argument("flat index out of range");
    }
    std::vector<std::size_t> coords(shape_.size(), 0);
    for (std::size_t axis = shape_.size(); axis-- > 0;) {
        coords[axis] = flat % shape_[axis];
        flat /= shape_[axis];
    }
    return coords;
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
    Tensor t(std::move(shape), data_);
    return t;
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Tensor::fill(double value) {
    std::fill(data_.begin(), data_.end(), value);
}

std::string shape_str(std::span<const std::size_t> shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::string shape_str(const Tensor& t) { return shape_str(t.shape()); }

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

Tensor add(const Tensor& a, double b) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b;
    return out;
}

Tensor sub(const Tensor& a, double b) { return add(a, -b); }

Tensor mul(const Tensor& a, double b) { return scale(a, b); }

Tensor scale(const Tensor& a, double s) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
    return out;
}

void add_inplace(Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add_inplace");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

void scale_inplace(Tensor& a, double s) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] *= s;
}

void axpy(Tensor& y, double a, const Tensor& x) {
    require_same_shape(y, x, "axpy");
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

// ---- matmul ----------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw std::invalid_argument("matmul: expected rank-2 operands, got " +
                                    shape_str(a) + " and " + shape_str(b));
    }
    const std::size_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2) {
        throw std::invalid_argument("matmul: inner dimensions differ, " + shape_str(a) +
                                    " vs " + shape_str(b));
    }
    Tensor out({m, n});
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = pa[i * k + kk];
            const double* brow = pb + kk * n;
            double* orow = po + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) {
        throw std::invalid_argument("transpose: expected rank-2, got " + shape_str(a));
    }
    const std::size_t m = a.dim(0), n = a.dim(1);
    Tensor out({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out(j, i) = a(i, j);
    return out;
}

// ---- reductions ------------------------------------------------------------

double sum(const Tensor& t) {
    double acc = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) acc += t[i];
    return acc;
}

double mean(const Tensor& t) {
    if (t.size() == 0) throw std::invalid_argument("mean of empty tensor");
    return sum(t) / static_cast<double>(t.size());
}

std::size_t argmax(const Tensor& t) {
    if (t.size() == 0) throw std::invalid_argument("argmax of empty tensor");
    std::size_t best = 0;
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (t[i] > t[best]) best = i;
    }
    return best;
}

namespace {

// Shared walk for axis reductions: outer x axis x inner layout.
template <class Fn>
Tensor reduce_axis(const Tensor& t, std::size_t axis, Fn fn) {
    if (axis >= t.rank()) {
        throw std::invalid_argument("reduction axis " + std::to_string(axis) +
                                    " out of range for shape " + shape_str(t));
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= t.shape()[i];
    for (std::size_t i = axis + 1; i < t.rank(); ++i) inner *= t.shape()[i];
    const std::size_t n = t.shape()[axis];

    std::vector<std::size_t> out_shape;
    for (std::size_t i = 0; i < t.rank(); ++i)
        if (i != axis) out_shape.push_back(t.shape()[i]);
    if (out_shape.empty()) out_shape.push_back(1);

    Tensor out(out_shape);
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const double* base = t.data() + o * n * inner + in;
            out[o * inner + in] = fn(base, n, inner);
        }
    }
    return out;
}

}  // namespace

Tensor sum(const Tensor& t, std::size_t axis) {
    return reduce_axis(t, axis, [](const double* base, std::size_t n, std::size_t stride) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += base[i * stride];
        return acc;
    });
}

Tensor mean(const Tensor& t, std::size_t axis) {
    Tensor s = sum(t, axis);
    scale_inplace(s, 1.0 / static_cast<double>(t.shape()[axis]));
    return s;
}

Tensor argmax(const Tensor& t, std::size_t axis) {
    return reduce_axis(t, axis, [](const double* base, std::size_t n, std::size_t stride) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < n; ++i) {
            if (base[i * stride] > base[best * stride]) best = i;
        }
        return static_cast<double>(best);
    });
}

}  // namespace jfr
