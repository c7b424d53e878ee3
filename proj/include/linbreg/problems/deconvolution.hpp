#pragma once

#include <linbreg/error.hpp>
#include <linbreg/objective.hpp>
#include <linbreg/operators.hpp>
#include <linbreg/regularizers.hpp>
#include <linbreg/tensor.hpp>

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>

namespace linbreg {

/// Gradients of 0.5 ||u * h - f||^2 in both arguments.
inline std::pair<Tensor, Tensor> blind_deconv_grad(const Tensor& u, const Tensor& h, const Tensor& f) {
    u.require_same(f, "blind_deconv_grad");
    const Tensor r = conv2d_periodic(u, h) - f;
    return {conv2d_periodic_adjoint(r, h), kernel_gradient(u, r, h.shape())};
}

inline double blind_deconv_data_fit(const Tensor& u, const Tensor& h, const Tensor& f) {
    return 0.5 * squared_norm(conv2d_periodic(u, h) - f);
}

/// E(u, h) = 0.5 ||u * h - f||^2 + (eps/2)(||u||^2 + ||h||^2) over the flat
/// variable [u (H*W) | h (kh*kw)]. The simplex constraint on h belongs to R.
class BlindDeconvObjective final : public SmoothObjective {
public:
    BlindDeconvObjective(Tensor f, Shape kernel_shape, double eps = 0.0)
        : f_(std::move(f)), kernel_shape_(std::move(kernel_shape)), eps_(eps) {
        detail::require_image(f_, "BlindDeconvObjective");
        detail::require_kernel_fits(f_.shape(), kernel_shape_);
        if (!(eps_ >= 0.0)) throw ArgumentError("level-set weight must be >= 0");
    }

    std::string name() const override { return "blind_deconvolution"; }
    const Tensor& data() const { return f_; }
    const Shape& kernel_shape() const { return kernel_shape_; }
    BlockRange image_block() const { return {0, f_.shape()}; }
    BlockRange kernel_block() const { return {f_.size(), kernel_shape_}; }
    std::size_t dimension() const { return f_.size() + shape_size(kernel_shape_); }

    Tensor pack(const Tensor& u, const Tensor& h) const { return stack_blocks({u, h}).first; }
    Tensor image(const Tensor& x) const { return extract_block(x, image_block()); }
    Tensor kernel(const Tensor& x) const { return extract_block(x, kernel_block()); }

    double data_fit(const Tensor& x) const { return blind_deconv_data_fit(image(x), kernel(x), f_); }

    double value(const Tensor& x) const override {
        check(x);
        return data_fit(x) + 0.5 * eps_ * squared_norm(x);
    }

    double value_and_gradient(const Tensor& x, Tensor& grad) const override {
        check(x);
        const Tensor u = image(x), h = kernel(x);
        const Tensor r = conv2d_periodic(u, h) - f_;
        grad = Tensor(x.shape());
        insert_block(grad, image_block(), conv2d_periodic_adjoint(r, h));
        insert_block(grad, kernel_block(), kernel_gradient(u, r, kernel_shape_));
        if (eps_ > 0.0) grad.axpy(eps_, x);
        return 0.5 * squared_norm(r) + 0.5 * eps_ * squared_norm(x);
    }

private:
    void check(const Tensor& x) const {
        if (x.size() != dimension()) {
            throw DimensionError("deconvolution variable has size " + std::to_string(x.size()) + ", expected " +
                                 std::to_string(dimension()));
        }
    }

    Tensor f_;
    Shape kernel_shape_;
    double eps_;
};

/// R(u, h) = alpha TV(u) + chi_simplex(h); alpha = 0 drops the TV part.
inline BregmanPtr make_deconv_regularizer(const BlindDeconvObjective& E, double alpha, const PdhgConfig& cfg = {},
                                          bool accept_inexact = false) {
    BregmanPtr image_part = alpha > 0.0 ? BregmanPtr(std::make_shared<TotalVariation>(alpha, cfg, accept_inexact))
                                        : BregmanPtr(std::make_shared<ZeroFunction>());
    return compose_separable({{image_part, E.image_block()}, {std::make_shared<SimplexIndicator>(), E.kernel_block()}});
}

/// Discrepancy threshold 1.2 sigma^2 / (2 sqrt(H W)).
inline double deconv_discrepancy_eta(double sigma, std::size_t H, std::size_t W) {
    return 1.2 * sigma * sigma / (2.0 * std::sqrt(static_cast<double>(H) * static_cast<double>(W)));
}

/// 3x5 motion kernel: a staircase line from the top-left to the bottom-right.
inline Tensor motion_kernel_3x5() {
    Tensor h(Shape{3, 5}, {1, 1, 0, 0, 0, 0, 1, 1, 1, 0, 0, 0, 0, 1, 1});
    h *= 1.0 / 7.0;
    return h;
}

/// Subtracts the mean and scales to unit Euclidean norm (no-op on constants).
inline void normalise_image(Tensor& u) {
    const double mean = sum(u) / static_cast<double>(u.size());
    for (auto& v : u) v -= mean;
    const double n = norm(u);
    if (n > 0.0) u *= 1.0 / n;
}

/// Piecewise-constant test scene: three rectangles and a disk, mean zero,
/// unit Euclidean norm.
inline Tensor piecewise_constant_scene(std::size_t H, std::size_t W) {
    Tensor u(Shape{H, W});
    auto fill_rect = [&](double r0, double r1, double c0, double c1, double v) {
        for (std::size_t i = 0; i < H; ++i) {
            for (std::size_t j = 0; j < W; ++j) {
                const double y = static_cast<double>(i) / static_cast<double>(H);
                const double x = static_cast<double>(j) / static_cast<double>(W);
                if (y >= r0 && y < r1 && x >= c0 && x < c1) u(i, j) = v;
            }
        }
    };
    fill_rect(0.125, 0.4375, 0.15625, 0.625, 1.0);
    fill_rect(0.5625, 0.875, 0.3125, 0.8125, -0.7);
    fill_rect(0.1875, 0.375, 0.6875, 0.90625, 0.3);
    for (std::size_t i = 0; i < H; ++i) {
        for (std::size_t j = 0; j < W; ++j) {
            const double dy = static_cast<double>(i) - 0.625 * static_cast<double>(H);
            const double dx = static_cast<double>(j) - 0.25 * static_cast<double>(W);
            const double rad = 0.17 * static_cast<double>(std::min(H, W));
            if (dy * dy + dx * dx < rad * rad) u(i, j) = 0.5;
        }
    }
    normalise_image(u);
    return u;
}

struct SyntheticDeconv {
    Tensor f;
    Tensor u_true;
    Tensor h_true;
    double sigma = 0.0;
};

/// f = u_true * h_true + sigma * N(0, 1), deterministic per seed.
inline SyntheticDeconv make_synthetic_deconv(std::uint64_t seed, std::size_t H, std::size_t W, const Tensor& kernel,
                                             double sigma, const Tensor* scene = nullptr) {
    if (!(sigma >= 0.0)) throw ArgumentError("noise level must be >= 0");
    const double ksum = sum(kernel);
    for (double v : kernel) {
        if (v < 0.0) throw ArgumentError("synthetic kernel must be nonnegative");
    }
    if (std::abs(ksum - 1.0) > 1e-12) throw ArgumentError("synthetic kernel must sum to 1");
    SyntheticDeconv out;
    out.u_true = scene ? *scene : piecewise_constant_scene(H, W);
    if (out.u_true.shape() != Shape{H, W}) throw DimensionError("scene does not match requested size");
    out.h_true = kernel;
    out.sigma = sigma;
    out.f = conv2d_periodic(out.u_true, kernel);
    if (sigma > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> noise(0.0, sigma);
        for (auto& v : out.f) v += noise(rng);
    }
    return out;
}

/// Embeds a kernel centred into a larger support (same anchor convention).
inline Tensor embed_kernel(const Tensor& h, const Shape& support) {
    detail::require_kernel_fits(support, h.shape());
    Tensor out(support);
    const std::size_t oi = support[0] / 2 - h.dim(0) / 2, oj = support[1] / 2 - h.dim(1) / 2;
    for (std::size_t a = 0; a < h.dim(0); ++a) {
        for (std::size_t b = 0; b < h.dim(1); ++b) out(oi + a, oj + b) = h(a, b);
    }
    return out;
}

/// Uniform kernel on the given support.
inline Tensor uniform_kernel(const Shape& support) {
    Tensor h(support, 1.0 / static_cast<double>(shape_size(support)));
    return h;
}

} // namespace linbreg
