#pragma once

#include <linbreg/error.hpp>
#include <linbreg/objective.hpp>
#include <linbreg/operators.hpp>
#include <linbreg/regularizers.hpp>
#include <linbreg/tensor.hpp>

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace linbreg {

using cplx = std::complex<double>;

enum class MaskKind { Full, Spiral, Random };

inline MaskKind parse_mask_kind(const std::string& s) {
    if (s == "full") return MaskKind::Full;
    if (s == "spiral") return MaskKind::Spiral;
    if (s == "random") return MaskKind::Random;
    throw ArgumentError("unknown mask kind '" + s + "' (full | spiral | random)");
}

/// Sampling mask over the unshifted DFT grid (DC at (0,0)), entries 0 or 1.
/// The spiral is an Archimedean band around the centred k-space origin whose
/// radial duty cycle is `spiral_fill`; `p` is the keep probability of Random.
inline Tensor make_mask(MaskKind kind, std::size_t n, std::uint64_t seed = 0, double p = 0.5,
                        double spiral_fill = 0.25, double arm_spacing = 4.0) {
    Tensor m(Shape{n, n});
    switch (kind) {
    case MaskKind::Full:
        for (auto& v : m) v = 1.0;
        break;
    case MaskKind::Random: {
        if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("random mask probability must lie in [0, 1]");
        std::mt19937_64 rng(seed);
        std::bernoulli_distribution keep(p);
        for (auto& v : m) v = keep(rng) ? 1.0 : 0.0;
        break;
    }
    case MaskKind::Spiral: {
        if (!(spiral_fill > 0.0 && spiral_fill <= 1.0)) throw ArgumentError("spiral fill must lie in (0, 1]");
        const double c = static_cast<double>(n / 2);
        const double two_pi = 2.0 * std::numbers::pi;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const double y = static_cast<double>(i) - c, x = static_cast<double>(j) - c;
                const double r = std::hypot(x, y);
                double theta = std::atan2(y, x);
                if (theta < 0.0) theta += two_pi;
                // radial offset to the nearest arm r = d (theta + 2 pi m) / (2 pi)
                double off = std::fmod(r - arm_spacing * theta / two_pi, arm_spacing);
                if (off < 0.0) off += arm_spacing;
                const double dist = std::min(off, arm_spacing - off);
                const bool on = dist < 0.5 * spiral_fill * arm_spacing || r < 1.5;
                // centred coordinates -> unshifted DFT index
                m((i + n - n / 2) % n, (j + n - n / 2) % n) = on ? 1.0 : 0.0;
            }
        }
        break;
    }
    }
    return m;
}

inline double mask_fraction(const Tensor& mask) { return sum(mask) / static_cast<double>(mask.size()); }

/// E(u, b_1..b_s) = 0.5 sum_j ||S F(u b_j) - f_j||^2 + (eps/2)(||u||^2 + sum_j ||b_j||^2).
/// Complex images are stored as (N,N,2) paired reals; the flat variable is
/// [u | b_1 | ... | b_s]. Data f_j live on the full grid, zero off the mask.
class ParallelMriObjective final : public SmoothObjective {
public:
    ParallelMriObjective(Tensor mask, std::vector<ComplexTensor> data,
                         double eps = std::numeric_limits<double>::epsilon())
        : mask_(std::move(mask)), data_(std::move(data)), eps_(eps) {
        if (mask_.ndim() != 2) throw DimensionError("MRI mask must be 2-D");
        for (double v : mask_) {
            if (v != 0.0 && v != 1.0) throw ArgumentError("MRI mask must be binary");
        }
        if (data_.empty()) throw ArgumentError("MRI problem needs at least one coil");
        for (auto& f : data_) {
            if (f.shape() != mask_.shape()) throw DimensionError("coil data does not match the mask shape");
            for (std::size_t i = 0; i < f.size(); ++i) f[i] *= mask_[i];
        }
        if (!(eps_ >= 0.0)) throw ArgumentError("level-set weight must be >= 0");
    }

    std::string name() const override { return "parallel_mri"; }
    std::size_t coils() const { return data_.size(); }
    double eps() const { return eps_; }
    const Tensor& mask() const { return mask_; }
    Shape image_shape() const { return {mask_.dim(0), mask_.dim(1), 2}; }
    std::size_t block_size() const { return 2 * mask_.size(); }
    std::size_t dimension() const { return block_size() * (1 + coils()); }
    BlockRange block(std::size_t j) const { return {j * block_size(), image_shape()}; }

    Tensor pack(const ComplexTensor& u, const std::vector<ComplexTensor>& b) const {
        std::vector<Tensor> blocks{pack_complex(u)};
        for (const auto& bj : b) blocks.push_back(pack_complex(bj));
        Tensor x = stack_blocks(blocks).first;
        check(x);
        return x;
    }
    ComplexTensor unpack(const Tensor& x, std::size_t j) const { return unpack_complex(extract_block(x, block(j))); }

    /// (eps/2) ||x||^2.
    double level_set_term(const Tensor& x) const { return 0.5 * eps_ * squared_norm(x); }

    double value(const Tensor& x) const override {
        check(x);
        const ComplexTensor u = unpack(x, 0);
        double s = 0.0;
        for (std::size_t j = 0; j < coils(); ++j) s += squared_norm(residual(u, unpack(x, j + 1), j));
        return 0.5 * s + level_set_term(x);
    }

    double value_and_gradient(const Tensor& x, Tensor& grad) const override {
        check(x);
        const ComplexTensor u = unpack(x, 0);
        ComplexTensor gu(u.shape());
        grad = Tensor(x.shape());
        double s = 0.0;
        for (std::size_t j = 0; j < coils(); ++j) {
            const ComplexTensor bj = unpack(x, j + 1);
            const ComplexTensor r = residual(u, bj, j);
            s += squared_norm(r);
            const ComplexTensor back = idft2(r); // F^H S^T r, r already zero off the mask
            ComplexTensor gb(u.shape());
            for (std::size_t i = 0; i < u.size(); ++i) {
                gu[i] += std::conj(bj[i]) * back[i];
                gb[i] = std::conj(u[i]) * back[i];
            }
            insert_block(grad, block(j + 1), pack_complex(gb));
        }
        insert_block(grad, block(0), pack_complex(gu));
        if (eps_ > 0.0) grad.axpy(eps_, x);
        return 0.5 * s + level_set_term(x);
    }

private:
    ComplexTensor residual(const ComplexTensor& u, const ComplexTensor& bj, std::size_t j) const {
        ComplexTensor prod(u.shape());
        for (std::size_t i = 0; i < u.size(); ++i) prod[i] = u[i] * bj[i];
        ComplexTensor r = dft2(prod);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = mask_[i] * r[i] - data_[j][i];
        return r;
    }

    void check(const Tensor& x) const {
        if (x.size() != dimension()) {
            throw DimensionError("MRI variable has size " + std::to_string(x.size()) + ", expected " +
                                 std::to_string(dimension()));
        }
    }

    Tensor mask_;
    std::vector<ComplexTensor> data_;
    double eps_;
};

/// Value and stacked gradient of the MRI energy at (u, b_1..b_s).
inline std::pair<double, Tensor> mri_energy_grad(const ParallelMriObjective& E, const Tensor& x) {
    Tensor g;
    const double v = E.value_and_gradient(x, g);
    return {v, std::move(g)};
}

/// DCT weights: `low` on the four lowest coefficients (0,0), (0,1), (1,0),
/// (1,1) in row-major coefficient order, `high` elsewhere.
inline Tensor mri_dct_weights(std::size_t n, double low = 1e-6, double high = 5.0) {
    Tensor w(Shape{n, n}, high);
    w(0, 0) = w(0, 1) = w(1, 0) = w(1, 1) = low;
    return w;
}

/// R = alpha0 TV(u) + sum_j alpha_coil sum_l w_l |(C b_j)_l|.
inline BregmanPtr make_mri_regularizer(const ParallelMriObjective& E, double alpha0, double alpha_coil,
                                       const Tensor& weights, const PdhgConfig& cfg = {},
                                       bool accept_inexact = false) {
    std::vector<SeparableSum::Part> parts;
    parts.push_back({alpha0 > 0.0 ? BregmanPtr(std::make_shared<TotalVariation>(alpha0, cfg, accept_inexact))
                                  : BregmanPtr(std::make_shared<ZeroFunction>()),
                     E.block(0)});
    const auto coil = std::make_shared<WeightedDctL1>(alpha_coil, weights);
    for (std::size_t j = 0; j < E.coils(); ++j) parts.push_back({coil, E.block(j + 1)});
    return compose_separable(std::move(parts));
}

struct SyntheticMri {
    Tensor mask;
    std::vector<ComplexTensor> data;
    ComplexTensor u_true;
    std::vector<ComplexTensor> b_true;
};

/// Real piecewise-smooth phantom: an ellipse with two inner disks and a smooth ramp.
inline ComplexTensor mri_phantom(std::size_t n) {
    ComplexTensor u(Shape{n, n});
    const double c = 0.5 * static_cast<double>(n - 1), s = static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double y = (static_cast<double>(i) - c) / s, x = (static_cast<double>(j) - c) / s;
            double v = 0.0;
            if ((x * x) / 0.16 + (y * y) / 0.1225 < 1.0) v = 1.0 + 0.3 * x;
            if ((x + 0.12) * (x + 0.12) + (y - 0.05) * (y - 0.05) < 0.01) v = 2.0;
            if ((x - 0.15) * (x - 0.15) + (y + 0.1) * (y + 0.1) < 0.0064) v = 0.4;
            u(i, j) = v;
        }
    }
    return u;
}

/// Smooth coil maps: Gaussian magnitude centred on a ring around the field of
/// view with a slowly varying seeded phase.
inline std::vector<ComplexTensor> mri_coil_maps(std::size_t n, std::size_t coils, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::vector<ComplexTensor> maps;
    const double c = 0.5 * static_cast<double>(n - 1), s = static_cast<double>(n);
    for (std::size_t k = 0; k < coils; ++k) {
        const double ang = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(coils);
        const double cx = 0.5 * std::cos(ang), cy = 0.5 * std::sin(ang);
        const double px = unif(rng), py = unif(rng), p0 = std::numbers::pi * unif(rng);
        ComplexTensor b(Shape{n, n});
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const double y = (static_cast<double>(i) - c) / s, x = (static_cast<double>(j) - c) / s;
                const double mag = std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) / 0.5);
                b(i, j) = std::polar(mag, p0 + px * x + py * y);
            }
        }
        maps.push_back(std::move(b));
    }
    return maps;
}

/// Synthetic phantom, coil maps and exact data f_j = S F(u b_j), plus optional
/// complex Gaussian noise of standard deviation sigma per component.
inline SyntheticMri make_synthetic_mri(std::uint64_t seed, std::size_t n, std::size_t coils, MaskKind mask_kind,
                                       double p = 0.5, double sigma = 0.0) {
    if (coils == 0) throw ArgumentError("MRI needs at least one coil");
    SyntheticMri out;
    out.mask = make_mask(mask_kind, n, seed, p);
    out.u_true = mri_phantom(n);
    out.b_true = mri_coil_maps(n, coils, seed + 1);
    std::mt19937_64 rng(seed + 2);
    std::normal_distribution<double> noise(0.0, sigma > 0.0 ? sigma : 1.0);
    for (std::size_t k = 0; k < coils; ++k) {
        ComplexTensor prod(out.u_true.shape());
        for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = out.u_true[i] * out.b_true[k][i];
        ComplexTensor f = dft2(prod);
        for (std::size_t i = 0; i < f.size(); ++i) {
            if (sigma > 0.0) {
                const double re = noise(rng), im = noise(rng);
                f[i] += cplx(re, im);
            }
            f[i] *= out.mask[i];
        }
        out.data.push_back(std::move(f));
    }
    return out;
}

} // namespace linbreg
