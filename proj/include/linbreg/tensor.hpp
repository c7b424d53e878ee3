#pragma once

#include <linbreg/error.hpp>

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace linbreg {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ')';
    return os.str();
}

namespace detail {
template <class T>
bool is_finite(const T& v) {
    if constexpr (std::is_floating_point_v<T>) {
        return std::isfinite(v);
    } else {
        return std::isfinite(v.real()) && std::isfinite(v.imag());
    }
}
} // namespace detail

/// Dense row-major array. size() == product(shape) always holds.
template <class T>
class BasicTensor {
public:
    using value_type = T;

    BasicTensor() = default;

    explicit BasicTensor(Shape shape, T fill = T{}) : shape_(std::move(shape)) {
        check_shape(shape_);
        data_.assign(shape_size(shape_), fill);
    }

    /// User-data constructor: validates length and finiteness.
    BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        check_shape(shape_);
        if (data_.size() != shape_size(shape_)) {
            throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_str(shape_));
        }
        for (std::size_t i = 0; i < data_.size(); ++i) {
            if (!detail::is_finite(data_[i])) {
                throw ArgumentError("non-finite tensor entry at flat index " + std::to_string(i));
            }
        }
    }

    BasicTensor(Shape shape, std::initializer_list<T> data)
        : BasicTensor(std::move(shape), std::vector<T>(data)) {}

    static BasicTensor vector(std::vector<T> data) {
        Shape s{data.size()};
        return BasicTensor(std::move(s), std::move(data));
    }

    static BasicTensor zeros_like(const BasicTensor& other) { return BasicTensor(other.shape_); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t ndim() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    bool empty() const noexcept { return data_.empty(); }

    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }
    std::vector<T>& values() noexcept { return data_; }
    const std::vector<T>& values() const noexcept { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    const T& operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
    T& operator()(std::size_t c, std::size_t i, std::size_t j) {
        return data_[(c * shape_[1] + i) * shape_[2] + j];
    }
    const T& operator()(std::size_t c, std::size_t i, std::size_t j) const {
        return data_[(c * shape_[1] + i) * shape_[2] + j];
    }

    auto begin() noexcept { return data_.begin(); }
    auto end() noexcept { return data_.end(); }
    auto begin() const noexcept { return data_.begin(); }
    auto end() const noexcept { return data_.end(); }

    /// Same buffer viewed with another shape of equal size.
    BasicTensor reshaped(Shape shape) const {
        if (shape_size(shape) != data_.size()) {
            throw DimensionError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
        }
        BasicTensor out;
        out.shape_ = std::move(shape);
        out.data_ = data_;
        return out;
    }

    bool all_finite() const {
        for (const auto& v : data_) {
            if (!detail::is_finite(v)) return false;
        }
        return true;
    }

    BasicTensor& operator+=(const BasicTensor& o) {
        require_same(o, "+=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    BasicTensor& operator-=(const BasicTensor& o) {
        require_same(o, "-=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    BasicTensor& operator*=(T s) {
        for (auto& v : data_) v *= s;
        return *this;
    }
    /// this += a * x
    BasicTensor& axpy(T a, const BasicTensor& x) {
        require_same(x, "axpy");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += a * x.data_[i];
        return *this;
    }

    friend BasicTensor operator+(BasicTensor a, const BasicTensor& b) { return a += b; }
    friend BasicTensor operator-(BasicTensor a, const BasicTensor& b) { return a -= b; }
    friend BasicTensor operator*(T s, BasicTensor a) { return a *= s; }
    friend BasicTensor operator*(BasicTensor a, T s) { return a *= s; }
    friend BasicTensor operator-(BasicTensor a) { return a *= T(-1); }

    void require_same(const BasicTensor& o, const char* op) const {
        if (shape_ != o.shape_) {
            throw DimensionError(std::string("shape mismatch in ") + op + ": " + shape_str(shape_) +
                                 " vs " + shape_str(o.shape_));
        }
    }

private:
    static void check_shape(const Shape& shape) {
        for (std::size_t e : shape) {
            if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
        }
    }

    Shape shape_;
    std::vector<T> data_;
};

using Tensor = BasicTensor<double>;
using ComplexTensor = BasicTensor<std::complex<double>>;

inline double dot(const Tensor& a, const Tensor& b) {
    a.require_same(b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double squared_norm(const Tensor& a) { return dot(a, a); }
inline double norm(const Tensor& a) { return std::sqrt(squared_norm(a)); }

inline double squared_norm(const ComplexTensor& a) {
    double s = 0.0;
    for (const auto& v : a) s += std::norm(v);
    return s;
}
inline double norm(const ComplexTensor& a) { return std::sqrt(squared_norm(a)); }

inline double sum(const Tensor& a) { return std::accumulate(a.begin(), a.end(), 0.0); }

inline double max_abs(const Tensor& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

inline ComplexTensor to_complex(const Tensor& a) {
    ComplexTensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i];
    return out;
}

inline Tensor real_part(const ComplexTensor& a) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i].real();
    return out;
}

/// Packs complex values as [re, im] pairs along a new trailing axis of extent 2.
inline Tensor pack_complex(const ComplexTensor& a) {
    Shape s = a.shape();
    s.push_back(2);
    Tensor out(s);
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[2 * i] = a[i].real();
        out[2 * i + 1] = a[i].imag();
    }
    return out;
}

inline ComplexTensor unpack_complex(const Tensor& a) {
    if (a.ndim() < 2 || a.shape().back() != 2) {
        throw DimensionError("paired-real tensor needs trailing extent 2, got " + shape_str(a.shape()));
    }
    Shape s(a.shape().begin(), a.shape().end() - 1);
    ComplexTensor out(s);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = {a[2 * i], a[2 * i + 1]};
    return out;
}

/// A contiguous block [offset, offset + size(shape)) of a stacked flat variable.
struct BlockRange {
    std::size_t offset = 0;
    Shape shape;

    std::size_t size() const { return shape_size(shape); }
    std::size_t end() const { return offset + size(); }
};

inline Tensor extract_block(const Tensor& x, const BlockRange& b) {
    if (b.end() > x.size()) {
        throw DimensionError("block [" + std::to_string(b.offset) + ", " + std::to_string(b.end()) +
                             ") exceeds variable of size " + std::to_string(x.size()));
    }
    Tensor out(b.shape);
    std::copy(x.begin() + static_cast<std::ptrdiff_t>(b.offset),
              x.begin() + static_cast<std::ptrdiff_t>(b.end()), out.begin());
    return out;
}

inline void insert_block(Tensor& x, const BlockRange& b, const Tensor& block) {
    if (block.size() != b.size() || b.end() > x.size()) {
        throw DimensionError("block of size " + std::to_string(block.size()) +
                             " does not fit range of size " + std::to_string(b.size()));
    }
    std::copy(block.begin(), block.end(), x.begin() + static_cast<std::ptrdiff_t>(b.offset));
}

/// Concatenates blocks into one flat vector; returns the layout alongside.
inline std::pair<Tensor, std::vector<BlockRange>> stack_blocks(const std::vector<Tensor>& blocks) {
    std::vector<BlockRange> ranges;
    std::size_t off = 0;
    for (const auto& b : blocks) {
        ranges.push_back({off, b.shape()});
        off += b.size();
    }
    Tensor x(Shape{off});
    for (std::size_t i = 0; i < blocks.size(); ++i) insert_block(x, ranges[i], blocks[i]);
    return {std::move(x), std::move(ranges)};
}

} // namespace linbreg
