#pragma once

#include <linbreg/error.hpp>
#include <linbreg/operators.hpp>
#include <linbreg/tensor.hpp>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace linbreg {

/// Forward-difference operator norm bound: ||grad||^2 <= 8.
inline constexpr double kGradNormSquaredBound = 8.0;

struct PdhgConfig {
    double sigma = 1.0 / std::sqrt(8.0);
    double tau_inner = 1.0 / std::sqrt(8.0);
    double theta = 1.0;
    double tol = 1e-7;
    int maxit = 2000;
    int check_every = 10;

    void validate() const {
        if (!(sigma > 0.0) || !(tau_inner > 0.0)) throw ArgumentError("PDHG steps must be positive");
        if (sigma * tau_inner * kGradNormSquaredBound > 1.0 + 1e-12) {
            throw ArgumentError("PDHG steps violate sigma*tau*8 <= 1");
        }
        if (theta < 0.0 || theta > 1.0) throw ArgumentError("PDHG theta must lie in [0, 1]");
        if (!(tol >= 0.0)) throw ArgumentError("PDHG tolerance must be nonnegative");
        if (maxit < 1 || check_every < 1) throw ArgumentError("PDHG maxit and check_every must be >= 1");
    }
};

struct PdhgResult {
    Tensor u;   ///< z + div p, exactly
    Tensor p;   ///< dual field in grad_field layout, pointwise length <= lambda
    double gap = 0.0; ///< relative primal-dual gap of (u, p)
    int iters = 0;
    std::vector<double> gap_history; ///< best gap at each checkpoint, nonincreasing
};

/// maxit reached with the gap above tolerance; carries the best iterate found.
class InnerSolverNotConverged : public std::runtime_error {
public:
    InnerSolverNotConverged(PdhgResult best, double tol)
        : std::runtime_error("TV prox: relative gap " + std::to_string(best.gap) + " above tolerance " +
                             std::to_string(tol) + " after " + std::to_string(best.iters) + " iterations"),
          best_(std::move(best)) {}
    const PdhgResult& best() const noexcept { return best_; }
    const Tensor& u() const noexcept { return best_.u; }
    double gap() const noexcept { return best_.gap; }
    int iters() const noexcept { return best_.iters; }

private:
    PdhgResult best_;
};

namespace detail {

inline void project_dual_ball(Tensor& p, double lambda) {
    const std::size_t planes = p.dim(0), n = p.size() / planes;
    for (std::size_t i = 0; i < n; ++i) {
        double m2 = 0.0;
        for (std::size_t c = 0; c < planes; ++c) m2 += p[c * n + i] * p[c * n + i];
        const double m = std::sqrt(m2);
        if (m > lambda) {
            const double s = lambda > 0.0 ? lambda / m : 0.0;
            for (std::size_t c = 0; c < planes; ++c) p[c * n + i] *= s;
        }
    }
}

struct TvGap {
    double primal;
    double dual;
    double relative;
};

/// Gap between P(z + div p) = 0.5||div p||^2 + lambda TV(z + div p) and
/// D(p) = 0.5||z||^2 - 0.5||z + div p||^2, for dual-feasible p.
inline TvGap tv_gap(const Tensor& z, const Tensor& up, const Tensor& divp, double lambda) {
    const double primal = 0.5 * squared_norm(divp) + lambda * total_variation(up);
    const double dual = 0.5 * squared_norm(z) - 0.5 * squared_norm(up);
    const double g = std::max(0.0, primal - dual);
    return {primal, dual, g / (1.0 + std::abs(primal))};
}

} // namespace detail

/// Solves argmin_u 0.5||u - z||^2 + lambda TV(u) by PDHG on the dual field p.
/// z is (H,W) or (C,H,W); `warm` has the grad_field shape, seeds the dual
/// variable and is not modified.
inline PdhgResult pdhg_tv_prox(const Tensor& z, double lambda, const PdhgConfig& cfg = {},
                               const Tensor* warm = nullptr) {
    cfg.validate();
    detail::require_field_image(z, "pdhg_tv_prox");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ArgumentError("TV weight must be finite and >= 0");
    const std::size_t C = z.ndim() == 3 ? z.dim(0) : 1;
    const Shape field_shape{2 * C, z.dim(z.ndim() - 2), z.dim(z.ndim() - 1)};

    Tensor p(field_shape);
    if (warm != nullptr) {
        if (warm->shape() != field_shape) {
            throw DimensionError("PDHG warm start has shape " + shape_str(warm->shape()) + ", expected " +
                                 shape_str(field_shape));
        }
        p = *warm;
        detail::project_dual_ball(p, lambda);
    }

    Tensor u = z + div_field(p, z.shape());
    Tensor u_bar = u;

    PdhgResult best;
    best.gap = std::numeric_limits<double>::infinity();

    for (int it = 1; it <= cfg.maxit; ++it) {
        p.axpy(cfg.sigma, grad_field(u_bar));
        detail::project_dual_ball(p, lambda);

        const Tensor divp = div_field(p, z.shape());
        Tensor u_next(z.shape());
        const double t = cfg.tau_inner;
        for (std::size_t i = 0; i < u.size(); ++i) u_next[i] = (u[i] + t * divp[i] + t * z[i]) / (1.0 + t);
        for (std::size_t i = 0; i < u.size(); ++i) u_bar[i] = u_next[i] + cfg.theta * (u_next[i] - u[i]);
        u = std::move(u_next);

        if (it == 1 || it % cfg.check_every == 0 || it == cfg.maxit) {
            Tensor up = z + divp;
            const auto g = detail::tv_gap(z, up, divp, lambda);
            if (g.relative < best.gap) {
                best.gap = g.relative;
                best.u = std::move(up);
                best.p = p;
            }
            best.iters = it;
            best.gap_history.push_back(best.gap);
            if (best.gap <= cfg.tol) return best;
        }
    }
    throw InnerSolverNotConverged(std::move(best), cfg.tol);
}

} // namespace linbreg
