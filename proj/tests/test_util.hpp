#pragma once

#include <linbreg/tensor.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace linbreg::testing {

inline Tensor random_tensor(const Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(lo, hi);
    Tensor t(shape);
    for (auto& v : t) v = unif(rng);
    return t;
}

inline ComplexTensor random_complex(const Shape& shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    ComplexTensor t(shape);
    for (auto& v : t) v = {unif(rng), unif(rng)};
    return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double max_abs_diff(const ComplexTensor& a, const ComplexTensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// Orthonormal DCT-II by the defining double sum.
inline Tensor naive_dct(const Tensor& x) {
    const std::size_t H = x.dim(0), W = x.dim(1);
    auto alpha = [](std::size_t k, std::size_t n) { return std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n)); };
    Tensor out(x.shape());
    for (std::size_t k = 0; k < H; ++k) {
        for (std::size_t l = 0; l < W; ++l) {
            double s = 0.0;
            for (std::size_t m = 0; m < H; ++m) {
                for (std::size_t n = 0; n < W; ++n) {
                    s += x(m, n) * std::cos(std::numbers::pi * (2.0 * m + 1.0) * k / (2.0 * H)) *
                         std::cos(std::numbers::pi * (2.0 * n + 1.0) * l / (2.0 * W));
                }
            }
            out(k, l) = alpha(k, H) * alpha(l, W) * s;
        }
    }
    return out;
}

} // namespace linbreg::testing
