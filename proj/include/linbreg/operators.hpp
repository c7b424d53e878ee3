#pragma once

#include <linbreg/error.hpp>
#include <linbreg/tensor.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace linbreg {

namespace detail {

inline void require_image(const Tensor& u, const char* what) {
    if (u.ndim() != 2) {
        throw DimensionError(std::string(what) + " expects a 2-D image, got " + shape_str(u.shape()));
    }
}

inline void require_kernel_fits(const Shape& image, const Shape& kernel) {
    if (kernel.size() != 2) throw DimensionError("kernel must be 2-D, got " + shape_str(kernel));
    if (kernel[0] > image[0] || kernel[1] > image[1]) {
        throw DimensionError("kernel " + shape_str(kernel) + " larger than image " + shape_str(image));
    }
}

inline std::size_t wrap(std::ptrdiff_t i, std::size_t n) {
    const auto m = static_cast<std::ptrdiff_t>(n);
    return static_cast<std::size_t>(((i % m) + m) % m);
}

} // namespace detail

/// Circular convolution; kernel entry (a, b) sits at offset (a - kh/2, b - kw/2).
inline Tensor conv2d_periodic(const Tensor& u, const Tensor& h) {
    detail::require_image(u, "conv2d_periodic");
    detail::require_kernel_fits(u.shape(), h.shape());
    const std::size_t H = u.dim(0), W = u.dim(1), kh = h.dim(0), kw = h.dim(1);
    const auto ch = static_cast<std::ptrdiff_t>(kh / 2), cw = static_cast<std::ptrdiff_t>(kw / 2);
    Tensor out(u.shape());
    for (std::size_t a = 0; a < kh; ++a) {
        for (std::size_t b = 0; b < kw; ++b) {
            const double hab = h(a, b);
            if (hab == 0.0) continue;
            const auto da = static_cast<std::ptrdiff_t>(a) - ch;
            const auto db = static_cast<std::ptrdiff_t>(b) - cw;
            for (std::size_t i = 0; i < H; ++i) {
                const std::size_t si = detail::wrap(static_cast<std::ptrdiff_t>(i) - da, H);
                for (std::size_t j = 0; j < W; ++j) {
                    out(i, j) += hab * u(si, detail::wrap(static_cast<std::ptrdiff_t>(j) - db, W));
                }
            }
        }
    }
    return out;
}

/// Adjoint of v -> conv2d_periodic(v, h): circular correlation with h.
inline Tensor conv2d_periodic_adjoint(const Tensor& v, const Tensor& h) {
    detail::require_image(v, "conv2d_periodic_adjoint");
    detail::require_kernel_fits(v.shape(), h.shape());
    const std::size_t H = v.dim(0), W = v.dim(1), kh = h.dim(0), kw = h.dim(1);
    const auto ch = static_cast<std::ptrdiff_t>(kh / 2), cw = static_cast<std::ptrdiff_t>(kw / 2);
    Tensor out(v.shape());
    for (std::size_t a = 0; a < kh; ++a) {
        for (std::size_t b = 0; b < kw; ++b) {
            const double hab = h(a, b);
            if (hab == 0.0) continue;
            const auto da = static_cast<std::ptrdiff_t>(a) - ch;
            const auto db = static_cast<std::ptrdiff_t>(b) - cw;
            for (std::size_t i = 0; i < H; ++i) {
                const std::size_t si = detail::wrap(static_cast<std::ptrdiff_t>(i) + da, H);
                for (std::size_t j = 0; j < W; ++j) {
                    out(i, j) += hab * v(si, detail::wrap(static_cast<std::ptrdiff_t>(j) + db, W));
                }
            }
        }
    }
    return out;
}

/// Gradient of h -> 0.5*||u * h - f||^2 given the residual r = u * h - f.
inline Tensor kernel_gradient(const Tensor& u, const Tensor& r, const Shape& kernel_shape) {
    detail::require_image(u, "kernel_gradient");
    u.require_same(r, "kernel_gradient");
    detail::require_kernel_fits(u.shape(), kernel_shape);
    const std::size_t H = u.dim(0), W = u.dim(1), kh = kernel_shape[0], kw = kernel_shape[1];
    const auto ch = static_cast<std::ptrdiff_t>(kh / 2), cw = static_cast<std::ptrdiff_t>(kw / 2);
    Tensor g(kernel_shape);
    for (std::size_t a = 0; a < kh; ++a) {
        for (std::size_t b = 0; b < kw; ++b) {
            const auto da = static_cast<std::ptrdiff_t>(a) - ch;
            const auto db = static_cast<std::ptrdiff_t>(b) - cw;
            double s = 0.0;
            for (std::size_t i = 0; i < H; ++i) {
                const std::size_t si = detail::wrap(static_cast<std::ptrdiff_t>(i) - da, H);
                for (std::size_t j = 0; j < W; ++j) {
                    s += r(i, j) * u(si, detail::wrap(static_cast<std::ptrdiff_t>(j) - db, W));
                }
            }
            g(a, b) = s;
        }
    }
    return g;
}

/// Forward differences with Neumann boundary. Channel 0 differences along
/// columns (x), channel 1 along rows (y); the last column/row difference is 0.
/// A unit extent (1xN signals) yields an all-zero channel.
inline Tensor grad2d_forward(const Tensor& u) {
    detail::require_image(u, "grad2d_forward");
    const std::size_t H = u.dim(0), W = u.dim(1);
    if (H * W < 2) {
        throw DimensionError("grad2d_forward needs at least two pixels, got " + shape_str(u.shape()));
    }
    Tensor g(Shape{2, H, W});
    for (std::size_t i = 0; i < H; ++i) {
        for (std::size_t j = 0; j < W; ++j) {
            if (j + 1 < W) g(0, i, j) = u(i, j + 1) - u(i, j);
            if (i + 1 < H) g(1, i, j) = u(i + 1, j) - u(i, j);
        }
    }
    return g;
}

/// Negative adjoint of grad2d_forward: <grad u, g> = -<u, div g>.
inline Tensor div2d(const Tensor& g) {
    if (g.ndim() != 3 || g.dim(0) != 2) {
        throw DimensionError("div2d expects a (2,H,W) field, got " + shape_str(g.shape()));
    }
    const std::size_t H = g.dim(1), W = g.dim(2);
    if (H * W < 2) throw DimensionError("div2d needs at least two pixels");
    Tensor d(Shape{H, W});
    for (std::size_t i = 0; i < H; ++i) {
        for (std::size_t j = 0; j < W; ++j) {
            double v = 0.0;
            if (j + 1 < W) v += g(0, i, j);
            if (j > 0) v -= g(0, i, j - 1);
            if (i + 1 < H) v += g(1, i, j);
            if (i > 0) v -= g(1, i - 1, j);
            d(i, j) = v;
        }
    }
    return d;
}

namespace detail {

inline void require_field_image(const Tensor& u, const char* what) {
    if (u.ndim() != 2 && u.ndim() != 3) {
        throw DimensionError(std::string(what) + " expects (H,W) or (C,H,W), got " + shape_str(u.shape()));
    }
}

inline Tensor plane(const Tensor& u, std::size_t c) {
    const std::size_t H = u.dim(1), W = u.dim(2), n = H * W;
    Tensor out(Shape{H, W});
    std::copy(u.begin() + static_cast<std::ptrdiff_t>(c * n), u.begin() + static_cast<std::ptrdiff_t>((c + 1) * n),
              out.begin());
    return out;
}

} // namespace detail

/// Gradient of every channel of (H,W) or (C,H,W) input, stacked as (2C,H,W):
/// plane 2c holds x-differences and plane 2c+1 y-differences of channel c.
inline Tensor grad_field(const Tensor& u) {
    detail::require_field_image(u, "grad_field");
    if (u.ndim() == 2) return grad2d_forward(u);
    const std::size_t C = u.dim(0), n = u.dim(1) * u.dim(2);
    Tensor g(Shape{2 * C, u.dim(1), u.dim(2)});
    for (std::size_t c = 0; c < C; ++c) {
        const Tensor gc = grad2d_forward(detail::plane(u, c));
        std::copy(gc.begin(), gc.end(), g.begin() + static_cast<std::ptrdiff_t>(2 * c * n));
    }
    return g;
}

/// Negative adjoint of grad_field; `image_shape` selects the (H,W) or (C,H,W) layout.
inline Tensor div_field(const Tensor& g, const Shape& image_shape) {
    if (image_shape.size() == 2) return div2d(g);
    if (image_shape.size() != 3 || g.ndim() != 3 || g.dim(0) != 2 * image_shape[0] ||
        g.dim(1) != image_shape[1] || g.dim(2) != image_shape[2]) {
        throw DimensionError("div_field: field " + shape_str(g.shape()) + " does not match image " +
                             shape_str(image_shape));
    }
    const std::size_t C = image_shape[0], H = image_shape[1], W = image_shape[2], n = H * W;
    Tensor d(image_shape);
    for (std::size_t c = 0; c < C; ++c) {
        Tensor gc(Shape{2, H, W});
        std::copy(g.begin() + static_cast<std::ptrdiff_t>(2 * c * n),
                  g.begin() + static_cast<std::ptrdiff_t>(2 * (c + 1) * n), gc.begin());
        const Tensor dc = div2d(gc);
        std::copy(dc.begin(), dc.end(), d.begin() + static_cast<std::ptrdiff_t>(c * n));
    }
    return d;
}

/// Pointwise Euclidean length over all planes of a gradient field, summed.
inline double field_l21_norm(const Tensor& g) {
    const std::size_t planes = g.dim(0), n = g.size() / planes;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double m = 0.0;
        for (std::size_t c = 0; c < planes; ++c) m += g[c * n + i] * g[c * n + i];
        s += std::sqrt(m);
    }
    return s;
}

/// Isotropic total variation; channels of (C,H,W) input are coupled per pixel.
inline double total_variation(const Tensor& u) { return field_l21_norm(grad_field(u)); }

namespace detail {

/// Orthonormal DCT-II matrix, row k holds basis function k.
inline std::vector<double> dct_matrix(std::size_t n) {
    std::vector<double> c(n * n);
    const double pi = std::numbers::pi;
    for (std::size_t k = 0; k < n; ++k) {
        const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
        for (std::size_t x = 0; x < n; ++x) {
            c[k * n + x] = scale * std::cos(pi * (2.0 * static_cast<double>(x) + 1.0) *
                                            static_cast<double>(k) / (2.0 * static_cast<double>(n)));
        }
    }
    return c;
}

inline std::vector<std::complex<double>> dft_matrix(std::size_t n, double sign) {
    std::vector<std::complex<double>> f(n * n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    const double pi = std::numbers::pi;
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t x = 0; x < n; ++x) {
            // reduce k*x mod n before the trig call to keep phases exact
            const double ph = sign * 2.0 * pi * static_cast<double>((k * x) % n) / static_cast<double>(n);
            f[k * n + x] = scale * std::complex<double>(std::cos(ph), std::sin(ph));
        }
    }
    return f;
}

/// out = M_rows * A * M_cols^T for row-major square matrices M.
template <class T, class M>
BasicTensor<T> separable_apply(const BasicTensor<T>& a, const std::vector<M>& mr, const std::vector<M>& mc,
                               bool transpose) {
    const std::size_t H = a.dim(0), W = a.dim(1);
    auto at = [transpose](const std::vector<M>& m, std::size_t n, std::size_t r, std::size_t c) {
        return transpose ? m[c * n + r] : m[r * n + c];
    };
    BasicTensor<T> tmp(a.shape());
    for (std::size_t i = 0; i < H; ++i) {
        for (std::size_t k = 0; k < W; ++k) {
            T s{};
            for (std::size_t j = 0; j < W; ++j) s += at(mc, W, k, j) * a(i, j);
            tmp(i, k) = s;
        }
    }
    BasicTensor<T> out(a.shape());
    for (std::size_t k = 0; k < H; ++k) {
        for (std::size_t j = 0; j < W; ++j) {
            T s{};
            for (std::size_t i = 0; i < H; ++i) s += at(mr, H, k, i) * tmp(i, j);
            out(k, j) = s;
        }
    }
    return out;
}

template <class T>
std::vector<T> conj_all(std::vector<T> m) {
    for (auto& v : m) v = std::conj(v);
    return m;
}

} // namespace detail

/// Orthonormal 2-D DCT-II. Coefficient (k1, k2) sits at flat index k1*W + k2.
inline Tensor dct2(const Tensor& u) {
    detail::require_image(u, "dct2");
    return detail::separable_apply(u, detail::dct_matrix(u.dim(0)), detail::dct_matrix(u.dim(1)), false);
}

inline Tensor idct2(const Tensor& c) {
    detail::require_image(c, "idct2");
    return detail::separable_apply(c, detail::dct_matrix(c.dim(0)), detail::dct_matrix(c.dim(1)), true);
}

/// Orthonormal 2-D DFT, F(k) = n^{-1/2} sum_x u(x) exp(-2 pi i k x / n) per axis.
inline ComplexTensor dft2(const ComplexTensor& u) {
    if (u.ndim() != 2) throw DimensionError("dft2 expects a 2-D array, got " + shape_str(u.shape()));
    return detail::separable_apply(u, detail::dft_matrix(u.dim(0), -1.0), detail::dft_matrix(u.dim(1), -1.0),
                                   false);
}

inline ComplexTensor idft2(const ComplexTensor& c) {
    if (c.ndim() != 2) throw DimensionError("idft2 expects a 2-D array, got " + shape_str(c.shape()));
    return detail::separable_apply(c, detail::dft_matrix(c.dim(0), 1.0), detail::dft_matrix(c.dim(1), 1.0),
                                   false);
}

inline ComplexTensor dft2(const Tensor& u) { return dft2(to_complex(u)); }

struct ThinSvd {
    Tensor U; ///< m x r, orthonormal columns
    std::vector<double> s; ///< r = min(m, n) values, nonincreasing
    Tensor V; ///< n x r, orthonormal columns
};

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const RowMajorMatrix> as_matrix(const Tensor& a) {
    if (a.ndim() != 2) throw DimensionError("expected a matrix, got " + shape_str(a.shape()));
    return {a.data(), static_cast<Eigen::Index>(a.dim(0)), static_cast<Eigen::Index>(a.dim(1))};
}

inline Eigen::Map<RowMajorMatrix> as_matrix(Tensor& a) {
    if (a.ndim() != 2) throw DimensionError("expected a matrix, got " + shape_str(a.shape()));
    return {a.data(), static_cast<Eigen::Index>(a.dim(0)), static_cast<Eigen::Index>(a.dim(1))};
}

inline Tensor from_matrix(const RowMajorMatrix& m) {
    Tensor out(Shape{static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
    as_matrix(out) = m;
    return out;
}

inline ThinSvd svd_thin(const Tensor& a) {
    if (!a.all_finite()) throw NumericalError("svd_thin: non-finite input");
    const auto m = as_matrix(a);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(m), Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) throw NumericalError("svd_thin: Jacobi SVD did not converge");
    ThinSvd out;
    out.U = from_matrix(svd.matrixU());
    out.V = from_matrix(svd.matrixV());
    const auto& sv = svd.singularValues();
    out.s.assign(sv.data(), sv.data() + sv.size());
    return out;
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    const auto ma = as_matrix(a);
    const auto mb = as_matrix(b);
    if (ma.cols() != mb.rows()) {
        throw DimensionError("matmul: " + shape_str(a.shape()) + " times " + shape_str(b.shape()));
    }
    return from_matrix(ma * mb);
}

inline Tensor transpose(const Tensor& a) {
    return from_matrix(as_matrix(a).transpose());
}

} // namespace linbreg
