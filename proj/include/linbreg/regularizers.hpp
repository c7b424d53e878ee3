#pragma once

#include <linbreg/error.hpp>
#include <linbreg/operators.hpp>
#include <linbreg/pdhg.hpp>
#include <linbreg/tensor.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace linbreg {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Constraint-violation band used by indicator values and conjugates.
inline constexpr double kIndicatorBand = 1e-9;

/// Caller-owned warm-start state for iterative proxes, keyed by the function
/// instance. Never shared between concurrent runs.
class ProxWorkspace {
public:
    Tensor* find(const void* owner) {
        auto it = slots_.find(owner);
        return it == slots_.end() ? nullptr : &it->second;
    }
    void store(const void* owner, Tensor t) { slots_[owner] = std::move(t); }
    void clear() { slots_.clear(); }

    int inner_iterations = 0;  ///< accumulated over all iterative prox calls
    int inner_unconverged = 0; ///< inexact prox results accepted instead of thrown

private:
    std::unordered_map<const void*, Tensor> slots_;
};

/// A proper convex R with prox, a subgradient selection and optionally R*.
/// Instances are immutable after construction.
class BregmanFunction {
public:
    virtual ~BregmanFunction() = default;

    virtual std::string name() const = 0;
    /// R(u); +inf outside the domain.
    virtual double value(const Tensor& u) const = 0;
    /// argmin_u 0.5||u - z||^2 + tau R(u).
    virtual Tensor prox(const Tensor& z, double tau, ProxWorkspace* ws = nullptr) const = 0;
    /// A deterministic element of dR(u); u must lie in dom R.
    virtual Tensor initial_subgradient(const Tensor& u) const = 0;
    virtual bool has_conjugate() const { return false; }
    /// True when R only takes the values 0 and +inf (prox is a projection).
    virtual bool is_indicator() const { return false; }
    virtual double conjugate_value(const Tensor& /*q*/) const {
        throw UnsupportedOperation(name() + ": conjugate has no closed form");
    }

protected:
    static void check_tau(double tau) {
        if (!(tau > 0.0) || !std::isfinite(tau)) throw ArgumentError("prox step must be finite and > 0");
    }
    static void check_weight(double alpha, const char* what) {
        if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
            throw ArgumentError(std::string(what) + ": weight must be finite and >= 0");
        }
    }
};

using BregmanPtr = std::shared_ptr<const BregmanFunction>;

struct SubgradientPair {
    Tensor point;
    Tensor subgradient;
};

// ---------------------------------------------------------------------------
// Closed-form proximal maps

inline Tensor prox_l1(const Tensor& z, double lambda) {
    if (!(lambda >= 0.0)) throw ArgumentError("prox_l1: lambda must be >= 0");
    Tensor out(z.shape());
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double a = std::abs(z[i]) - lambda;
        out[i] = a > 0.0 ? std::copysign(a, z[i]) : 0.0;
    }
    return out;
}

namespace detail {

/// Group soft-thresholding of `groups` interleaved components per entry.
inline void group_shrink(Tensor& c, std::size_t groups, const std::function<double(std::size_t)>& threshold) {
    const std::size_t n = c.size() / groups;
    for (std::size_t l = 0; l < n; ++l) {
        double m2 = 0.0;
        for (std::size_t g = 0; g < groups; ++g) m2 += c[l * groups + g] * c[l * groups + g];
        const double m = std::sqrt(m2);
        const double t = threshold(l);
        const double s = m > t ? (m - t) / m : 0.0;
        for (std::size_t g = 0; g < groups; ++g) c[l * groups + g] *= s;
    }
}

/// Splits an (H,W) or (H,W,2) tensor into real planes, applies f to each plane.
inline Tensor map_planes(const Tensor& u, const std::function<Tensor(const Tensor&)>& f) {
    if (u.ndim() == 2) return f(u);
    if (u.ndim() != 3 || u.dim(2) != 2) {
        throw DimensionError("expected (H,W) or paired-complex (H,W,2), got " + shape_str(u.shape()));
    }
    const std::size_t H = u.dim(0), W = u.dim(1), n = H * W;
    Tensor out(u.shape());
    for (std::size_t part = 0; part < 2; ++part) {
        Tensor p(Shape{H, W});
        for (std::size_t i = 0; i < n; ++i) p[i] = u[2 * i + part];
        const Tensor r = f(p);
        for (std::size_t i = 0; i < n; ++i) out[2 * i + part] = r[i];
    }
    return out;
}

/// (H,W,2) interleaved -> (2,H,W) planar, and back.
inline Tensor interleaved_to_planar(const Tensor& u) {
    const std::size_t H = u.dim(0), W = u.dim(1), n = H * W;
    Tensor out(Shape{2, H, W});
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = u[2 * i];
        out[n + i] = u[2 * i + 1];
    }
    return out;
}

inline Tensor planar_to_interleaved(const Tensor& u) {
    const std::size_t H = u.dim(1), W = u.dim(2), n = H * W;
    Tensor out(Shape{H, W, 2});
    for (std::size_t i = 0; i < n; ++i) {
        out[2 * i] = u[i];
        out[2 * i + 1] = u[n + i];
    }
    return out;
}

inline std::size_t complex_groups(const Tensor& u) { return u.ndim() == 3 ? 2 : 1; }

} // namespace detail

/// idct2(shrink(dct2(z), lambda * w)); (H,W,2) input is paired complex and
/// shrinks the coefficient modulus.
inline Tensor prox_weighted_l1_dct(const Tensor& z, double lambda, const Tensor& w) {
    if (!(lambda >= 0.0)) throw ArgumentError("prox_weighted_l1_dct: lambda must be >= 0");
    for (double v : w) {
        if (v < 0.0) throw ArgumentError("prox_weighted_l1_dct: negative weight");
    }
    Tensor c = detail::map_planes(z, [](const Tensor& p) { return dct2(p); });
    if (w.size() * detail::complex_groups(z) != c.size()) {
        throw DimensionError("DCT weights " + shape_str(w.shape()) + " do not match " + shape_str(z.shape()));
    }
    detail::group_shrink(c, detail::complex_groups(z), [&](std::size_t l) { return lambda * w[l]; });
    return detail::map_planes(c, [](const Tensor& p) { return idct2(p); });
}

/// Euclidean projection onto {h >= 0, sum h = 1} by sort-and-threshold.
inline Tensor project_simplex(const Tensor& z) {
    std::vector<double> s(z.begin(), z.end());
    std::sort(s.begin(), s.end(), std::greater<>());
    double css = 0.0, theta = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        css += s[i];
        const double t = (css - 1.0) / static_cast<double>(i + 1);
        if (s[i] - t > 0.0) theta = t;
    }
    Tensor out(z.shape());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::max(z[i] - theta, 0.0);
    return out;
}

/// Singular value soft-thresholding.
inline Tensor prox_nuclear(const Tensor& a, double lambda) {
    if (!(lambda >= 0.0)) throw ArgumentError("prox_nuclear: lambda must be >= 0");
    const ThinSvd svd = svd_thin(a);
    const auto U = as_matrix(svd.U);
    const auto V = as_matrix(svd.V);
    Eigen::VectorXd s(static_cast<Eigen::Index>(svd.s.size()));
    for (std::size_t i = 0; i < svd.s.size(); ++i) s[static_cast<Eigen::Index>(i)] = std::max(svd.s[i] - lambda, 0.0);
    return from_matrix(U * s.asDiagonal() * V.transpose());
}

inline PdhgResult prox_tv(const Tensor& z, double lambda, const PdhgConfig& cfg = {}, const Tensor* warm = nullptr) {
    return pdhg_tv_prox(z, lambda, cfg, warm);
}

// ---------------------------------------------------------------------------
// Instances

/// R = 0.
class ZeroFunction final : public BregmanFunction {
public:
    std::string name() const override { return "zero"; }
    double value(const Tensor&) const override { return 0.0; }
    Tensor prox(const Tensor& z, double tau, ProxWorkspace* = nullptr) const override {
        check_tau(tau);
        return z;
    }
    Tensor initial_subgradient(const Tensor& u) const override { return Tensor::zeros_like(u); }
    bool has_conjugate() const override { return true; }
    double conjugate_value(const Tensor& q) const override { return max_abs(q) <= kIndicatorBand ? 0.0 : kInf; }
};

/// R = (alpha/2)||u||^2.
class SquaredNorm final : public BregmanFunction {
public:
    explicit SquaredNorm(double alpha = 1.0) : alpha_(alpha) {
        check_weight(alpha, "SquaredNorm");
        if (alpha == 0.0) throw ArgumentError("SquaredNorm: alpha must be > 0 (use ZeroFunction)");
    }
    std::string name() const override { return "squared_norm"; }
    double value(const Tensor& u) const override { return 0.5 * alpha_ * squared_norm(u); }
    Tensor prox(const Tensor& z, double tau, ProxWorkspace* = nullptr) const override {
        check_tau(tau);
        return (1.0 / (1.0 + tau * alpha_)) * z;
    }
    Tensor initial_subgradient(const Tensor& u) const override { return alpha_ * u; }
    bool has_conjugate() const override { return true; }
    double conjugate_value(const Tensor& q) const override { return 0.5 * squared_norm(q) / alpha_; }

private:
    double alpha_;
};

/// R = alpha ||u||_1.
class L1Norm final : public BregmanFunction {
public:
    explicit L1Norm(double alpha = 1.0) : alpha_(alpha) { check_weight(alpha, "L1Norm"); }
    std::string name() const override { return "l1"; }
    double value(const Tensor& u) const override {
        double s = 0.0;
        for (double v : u) s += std::abs(v);
        return alpha_ * s;
    }
    Tensor prox(const Tensor& z, double tau, ProxWorkspace* = nullptr) const override {
        check_tau(tau);
        return prox_l1(z, tau * alpha_);
    }
    /// Minimal-norm selection: alpha*sign(u), 0 where u = 0.
    Tensor initial_subgradient(const Tensor& u) const override {
        Tensor q(u.shape());
        for (std::size_t i = 0; i < u.size(); ++i) q[i] = u[i] > 0.0 ? alpha_ : (u[i] < 0.0 ? -alpha_ : 0.0);
        return q;
    }
    bool has_conjugate() const override { return true; }
    /// Indicator of the alpha-ball in the max norm.
    double conjugate_value(const Tensor& q) const override {
        return max_abs(q) <= alpha_ + kIndicatorBand * std::max(1.0, alpha_) ? 0.0 : kInf;
    }

private:
    double alpha_;
};

/// R = alpha sum_l w_l |(C u)_l| with C the orthonormal 2-D DCT. Input is (H,W),
/// or (H,W,2) paired complex where |.| is the coefficient modulus.
class WeightedDctL1 final : public BregmanFunction {
public:
    WeightedDctL1(double alpha, Tensor weights) : alpha_(alpha), w_(std::move(weights)) {
        check_weight(alpha, "WeightedDctL1");
        if (w_.ndim() != 2) throw DimensionError("WeightedDctL1: weights must be (H,W)");
        for (double v : w_) {
            if (v < 0.0) throw ArgumentError("WeightedDctL1: negative weight");
        }
    }
    std::string name() const override { return "weighted_dct_l1"; }
    const Tensor& weights() const { return w_; }

    double value(const Tensor& u) const override {
        const Tensor c = coefficients(u);
        const std::size_t g = detail::complex_groups(u);
        double s = 0.0;
        for (std::size_t l = 0; l < w_.size(); ++l) s += w_[l] * group_modulus(c, g, l);
        return alpha_ * s;
    }
    Tensor prox(const Tensor& z, double tau, ProxWorkspace* = nullptr) const override {
        check_tau(tau);
        return prox_weighted_l1_dct(z, tau * alpha_, w_);
    }
    /// C^T applied to alpha*w*c/|c| per coefficient, 0 where the coefficient vanishes.
    Tensor initial_subgradient(const Tensor& u) const override {
        Tensor c = coefficients(u);
        const std::size_t g = detail::complex_groups(u);
        for (std::size_t l = 0; l < w_.size(); ++l) {
            const double m = group_modulus(c, g, l);
            const double s = m > 0.0 ? alpha_ * w_[l] / m : 0.0;
            for (std::size_t k = 0; k < g; ++k) c[l * g + k] *= s;
        }
        return detail::map_planes(c, [](const Tensor& p) { return idct2(p); });
    }
    bool has_conjugate() const override { return true; }
    /// Indicator of {q : |(C q)_l| <= alpha w_l}.
    double conjugate_value(const Tensor& q) const override {
        const Tensor c = coefficients(q);
        const std::size_t g = detail::complex_groups(q);
        for (std::size_t l = 0; l < w_.size(); ++l) {
            const double bound = alpha_ * w_[l];
            if (group_modulus(c, g, l) > bound + kIndicatorBand * std::max(1.0, bound)) return kInf;
        }
        return 0.0;
    }

private:
    Tensor coefficients(const Tensor& u) const {
        Tensor c = detail::map_planes(u, [](const Tensor& p) { return dct2(p); });
        if (c.size() != w_.size() * detail::complex_groups(u)) {
            throw DimensionError("WeightedDctL1: input " + shape_str(u.shape()) + " does not match weights " +
                                 shape_str(w_.shape()));
        }
        return c;
    }
    static double group_modulus(const Tensor& c, std::size_t g, std::size_t l) {
        double m2 = 0.0;
        for (std::size_t k = 0; k < g; ++k) m2 += c[l * g + k] * c[l * g + k];
        return std::sqrt(m2);
    }

    double alpha_;
    Tensor w_;
};

/// Indicator of the probability simplex.
class SimplexIndicator final : public BregmanFunction {
public:
    std::string name() const override { return "simplex"; }
    double value(const Tensor& u) const override {
        double s = 0.0;
        for (double v : u) {
            if (v < -kIndicatorBand) return kInf;
            s += v;
        }
        return std::abs(s - 1.0) <= kIndicatorBand ? 0.0 : kInf;
    }
    Tensor prox(const Tensor& z, double tau, ProxWorkspace* = nullptr) const override {
        check_tau(tau);
        return project_simplex(z);
    }
    /// 0 always lies in the normal cone.
    Tensor initial_subgradient(const Tensor& u) const override {
        if (!std::isfinite(value(u))) throw ArgumentError("simplex subgradient requested outside the simplex");
        return Tensor::zeros_like(u);
    }
    bool is_indicator() const override { return true; }
    bool has_conjugate() const override { return true; }
    /// Support function of the simplex: max_i q_i.
    double conjugate_value(const Tensor& q) const override { return *std::max_element(q.begin(), q.end()); }
};

/// Indicator of the nonnegative orthant.
class NonnegIndicator final : public BregmanFunction {
public:
    std::string name() const override { return "nonneg"; }
    double value(const Tensor& u) const override {
        for (double v : u) {
            if (v < -kIndicatorBand) return kInf;
        }
        return 0.0;
    }
    Tensor prox(const Tensor& z, double tau, ProxWorkspace* = nullptr) const override {
        check_tau(tau);
        Tensor out(z.shape());
        for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::max(z[i], 0.0);
        return out;
    }
    Tensor initial_subgradient(const Tensor& u) const override {
        if (!std::isfinite(value(u))) throw ArgumentError("nonneg subgradient requested outside the orthant");
        return Tensor::zeros_like(u);
    }
    bool is_indicator() const override { return true; }
    bool has_conjugate() const override { return true; }
    /// Indicator of the nonpositive orthant.
    double conjugate_value(const Tensor& q) const override {
        for (double v : q) {
            if (v > kIndicatorBand) return kInf;
        }
        return 0.0;
    }
};

/// R = alpha ||A||_* on m x n matrices.
class NuclearNorm final : public BregmanFunction {
public:
    explicit NuclearNorm(double alpha = 1.0, double rank_tol = 1e-12) : alpha_(alpha), rank_tol_(rank_tol) {
        check_weight(alpha, "NuclearNorm");
    }
    std::string name() const override { return "nuclear"; }
    double value(const Tensor& a) const override {
        const ThinSvd svd = svd_thin(a);
        double s = 0.0;
        for (double v : svd.s) s += v;
        return alpha_ * s;
    }
    Tensor prox(const Tensor& z, double tau, ProxWorkspace* = nullptr) const override {
        check_tau(tau);
        return prox_nuclear(z, tau * alpha_);
    }
    /// Minimal-norm selection alpha * U_r V_r^T over singular values above
    /// rank_tol * max(1, s_max); 0 at the zero matrix.
    Tensor initial_subgradient(const Tensor& a) const override {
        const ThinSvd svd = svd_thin(a);
        const auto U = as_matrix(svd.U);
        const auto V = as_matrix(svd.V);
        const double cut = rank_tol_ * std::max(1.0, svd.s.empty() ? 0.0 : svd.s.front());
        Eigen::Index r = 0;
        while (r < static_cast<Eigen::Index>(svd.s.size()) && svd.s[static_cast<std::size_t>(r)] > cut) ++r;
        RowMajorMatrix q = alpha_ * U.leftCols(r) * V.leftCols(r).transpose();
        return from_matrix(q);
    }
    bool has_conjugate() const override { return true; }
    /// Indicator of the spectral-norm ball of radius alpha.
    double conjugate_value(const Tensor& q) const override {
        const ThinSvd svd = svd_thin(q);
        const double smax = svd.s.empty() ? 0.0 : svd.s.front();
        return smax <= alpha_ + kIndicatorBand * std::max(1.0, alpha_) ? 0.0 : kInf;
    }

private:
    double alpha_;
    double rank_tol_;
};

/// R = alpha TV(u) for (H,W) images or (H,W,2) paired-complex images (both
/// parts coupled in the pointwise norm). Prox by PDHG with dual warm start.
/// With accept_inexact the best PDHG iterate is returned when maxit is hit,
/// and the event is counted in the workspace instead of thrown.
class TotalVariation final : public BregmanFunction {
public:
    explicit TotalVariation(double alpha, PdhgConfig cfg = {}, bool accept_inexact = false)
        : alpha_(alpha), cfg_(cfg), accept_inexact_(accept_inexact) {
        check_weight(alpha, "TotalVariation");
        cfg_.validate();
    }
    std::string name() const override { return "tv"; }
    double alpha() const { return alpha_; }
    const PdhgConfig& config() const { return cfg_; }

    double value(const Tensor& u) const override { return alpha_ * total_variation(to_field_layout(u)); }

    Tensor prox(const Tensor& z, double tau, ProxWorkspace* ws = nullptr) const override {
        check_tau(tau);
        const Tensor zf = to_field_layout(z);
        const Tensor* warm = ws ? ws->find(this) : nullptr;
        if (warm && warm->shape() != grad_field(zf).shape()) warm = nullptr;
        PdhgResult r;
        try {
            r = pdhg_tv_prox(zf, tau * alpha_, cfg_, warm);
        } catch (const InnerSolverNotConverged& e) {
            if (!accept_inexact_) throw;
            r = e.best();
            if (ws) ++ws->inner_unconverged;
        }
        if (ws) {
            ws->inner_iterations += r.iters;
            ws->store(this, r.p);
        }
        return from_field_layout(r.u, z);
    }

    /// 0 at constant images; otherwise -alpha div(grad u / |grad u|) with the
    /// normalised field set to 0 where grad u vanishes.
    Tensor initial_subgradient(const Tensor& u) const override {
        const Tensor uf = to_field_layout(u);
        Tensor g = grad_field(uf);
        const std::size_t planes = g.dim(0), n = g.size() / planes;
        for (std::size_t i = 0; i < n; ++i) {
            double m2 = 0.0;
            for (std::size_t c = 0; c < planes; ++c) m2 += g[c * n + i] * g[c * n + i];
            const double m = std::sqrt(m2);
            for (std::size_t c = 0; c < planes; ++c) g[c * n + i] = m > 0.0 ? g[c * n + i] / m : 0.0;
        }
        Tensor q = div_field(g, uf.shape());
        q *= -alpha_;
        return from_field_layout(q, u);
    }

private:
    static Tensor to_field_layout(const Tensor& u) {
        if (u.ndim() == 2) return u;
        if (u.ndim() == 3 && u.dim(2) == 2) return detail::interleaved_to_planar(u);
        throw DimensionError("TotalVariation expects (H,W) or (H,W,2), got " + shape_str(u.shape()));
    }
    static Tensor from_field_layout(const Tensor& f, const Tensor& like) {
        return like.ndim() == 2 ? f : detail::planar_to_interleaved(f);
    }

    double alpha_;
    PdhgConfig cfg_;
    bool accept_inexact_;
};

/// Block-separable sum R(x) = sum_i R_i(x[range_i]) over a flat variable.
class SeparableSum final : public BregmanFunction {
public:
    struct Part {
        BregmanPtr fn;
        BlockRange range;
    };

    explicit SeparableSum(std::vector<Part> parts) : parts_(std::move(parts)) {
        if (parts_.empty()) throw ArgumentError("SeparableSum: no parts");
        std::vector<std::pair<std::size_t, std::size_t>> iv;
        for (const auto& p : parts_) {
            if (!p.fn) throw ArgumentError("SeparableSum: null part");
            iv.emplace_back(p.range.offset, p.range.end());
        }
        std::sort(iv.begin(), iv.end());
        std::size_t cursor = 0;
        for (const auto& [a, b] : iv) {
            if (a < cursor) throw ArgumentError("SeparableSum: overlapping block ranges");
            if (a > cursor) throw ArgumentError("SeparableSum: block ranges leave a gap");
            cursor = b;
        }
        total_ = cursor;
    }

    std::string name() const override {
        std::string s = "separable(";
        for (std::size_t i = 0; i < parts_.size(); ++i) s += (i ? "," : "") + parts_[i].fn->name();
        return s + ")";
    }
    const std::vector<Part>& parts() const { return parts_; }
    std::size_t size() const { return total_; }

    double value(const Tensor& u) const override {
        check_size(u);
        double s = 0.0;
        for (const auto& p : parts_) s += p.fn->value(extract_block(u, p.range));
        return s;
    }
    Tensor prox(const Tensor& z, double tau, ProxWorkspace* ws = nullptr) const override {
        check_size(z);
        Tensor out(z.shape());
        for (const auto& p : parts_) insert_block(out, p.range, p.fn->prox(extract_block(z, p.range), tau, ws));
        return out;
    }
    Tensor initial_subgradient(const Tensor& u) const override {
        check_size(u);
        Tensor out(u.shape());
        for (const auto& p : parts_) insert_block(out, p.range, p.fn->initial_subgradient(extract_block(u, p.range)));
        return out;
    }
    bool has_conjugate() const override {
        return std::all_of(parts_.begin(), parts_.end(), [](const Part& p) { return p.fn->has_conjugate(); });
    }
    double conjugate_value(const Tensor& q) const override {
        check_size(q);
        double s = 0.0;
        for (const auto& p : parts_) s += p.fn->conjugate_value(extract_block(q, p.range));
        return s;
    }

private:
    void check_size(const Tensor& u) const {
        if (u.size() != total_) {
            throw DimensionError("SeparableSum: variable of size " + std::to_string(u.size()) + ", expected " +
                                 std::to_string(total_));
        }
    }

    std::vector<Part> parts_;
    std::size_t total_ = 0;
};

inline BregmanPtr compose_separable(std::vector<SeparableSum::Part> parts) {
    return std::make_shared<SeparableSum>(std::move(parts));
}

// ---------------------------------------------------------------------------
// Bregman distances

/// D_R^q(u, v) = R(u) - R(v) - <q, u - v>; +inf when u is outside dom R.
inline double bregman_distance(const BregmanFunction& R, const Tensor& u, const Tensor& v, const Tensor& q) {
    const double ru = R.value(u);
    if (!std::isfinite(ru)) return kInf;
    return ru - R.value(v) - dot(q, u - v);
}

/// D_R^symm(u, v) = <p - q, u - v> for p in dR(u), q in dR(v).
inline double symmetric_bregman_distance(const Tensor& u, const Tensor& v, const Tensor& p, const Tensor& q) {
    return dot(p - q, u - v);
}

/// R(u) + R*(q) - <u, q>; zero iff q in dR(u).
inline double fenchel_residual(const BregmanFunction& R, const Tensor& u, const Tensor& q) {
    if (!R.has_conjugate()) throw UnsupportedOperation(R.name() + ": fenchel_residual needs R*");
    return R.value(u) + R.conjugate_value(q) - dot(u, q);
}

/// Certifies q in dR(u) through the Fenchel residual.
inline bool certify_subgradient(const BregmanFunction& R, const Tensor& u, const Tensor& q, double rel_tol = 1e-8) {
    const double r = fenchel_residual(R, u, q);
    return std::isfinite(r) && std::abs(r) <= rel_tol * (1.0 + std::abs(R.value(u)));
}

inline bool certify_subgradient(const BregmanFunction& R, const SubgradientPair& pair, double rel_tol = 1e-8) {
    return certify_subgradient(R, pair.point, pair.subgradient, rel_tol);
}

} // namespace linbreg
