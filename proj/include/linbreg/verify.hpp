#pragma once

#include <linbreg/error.hpp>
#include <linbreg/objective.hpp>
#include <linbreg/operators.hpp>
#include <linbreg/pdhg.hpp>
#include <linbreg/regularizers.hpp>
#include <linbreg/tensor.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

namespace linbreg {

struct FdCheckReport {
    double max_rel_err = 0.0;
    std::size_t worst_coordinate = 0;
    double step = 0.0;
    std::size_t checked = 0;
};

/// Central differences on `n_coords` seeded coordinates (all of them when
/// n_coords >= size). The error on coordinate i is
/// |fd - g_i| / max(|fd|, |g_i|, 1e-6 (1 + max|g|)).
inline FdCheckReport finite_difference_gradient_check(const SmoothObjective& E, const Tensor& u,
                                                      std::size_t n_coords, std::uint64_t seed,
                                                      std::optional<double> step = std::nullopt) {
    const Tensor g = E.gradient(u);
    if (g.size() != u.size()) throw DimensionError("gradient size does not match the point");
    FdCheckReport rep;
    rep.step = step ? *step : 1e-6 * (1.0 + norm(u));

    std::vector<std::size_t> coords(u.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (n_coords < u.size()) {
        std::mt19937_64 rng(seed);
        std::shuffle(coords.begin(), coords.end(), rng);
        coords.resize(n_coords);
    }
    const double floor = 1e-6 * (1.0 + max_abs(g));
    Tensor x = u;
    for (std::size_t i : coords) {
        const double keep = x[i];
        x[i] = keep + rep.step;
        const double ep = E.value(x);
        x[i] = keep - rep.step;
        const double em = E.value(x);
        x[i] = keep;
        if (!std::isfinite(ep) || !std::isfinite(em)) {
            throw NumericalError("finite-difference check: non-finite energy at coordinate " + std::to_string(i));
        }
        const double fd = (ep - em) / (2.0 * rep.step);
        const double err = std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), floor});
        if (rep.checked == 0 || err > rep.max_rel_err) {
            rep.max_rel_err = err;
            rep.worst_coordinate = i;
        }
        ++rep.checked;
    }
    return rep;
}

struct TvDualOracle {
    Tensor u;
    Tensor p;
    double gap = 0.0;
    int iters = 0;
    bool converged = false;
};

/// Projected gradient on min_{|p| <= lambda} 0.5 ||z + div p||^2 with step 1/8,
/// run until the relative primal-dual gap is at most gap_tol.
inline TvDualOracle tv_dual_oracle(const Tensor& z, double lambda, double gap_tol = 1e-12, int maxit = 2000000) {
    const Tensor g0 = grad_field(z);
    TvDualOracle out;
    out.p = Tensor(g0.shape());
    for (int it = 1; it <= maxit; ++it) {
        const Tensor up = z + div_field(out.p, z.shape());
        out.p.axpy(1.0 / kGradNormSquaredBound, grad_field(up));
        detail::project_dual_ball(out.p, lambda);
        if (it % 50 == 0 || it == maxit) {
            const Tensor divp = div_field(out.p, z.shape());
            out.u = z + divp;
            out.gap = detail::tv_gap(z, out.u, divp, lambda).relative;
            out.iters = it;
            if (out.gap <= gap_tol) {
                out.converged = true;
                return out;
            }
        }
    }
    return out;
}

struct ProxOracleReport {
    double gap = 0.0;          ///< phi(prox output) - best oracle value
    double prox_value = 0.0;   ///< phi(prox output)
    double oracle_value = 0.0; ///< best oracle value
    bool conclusive = false;
};

/// Prox objective phi(u) = 0.5 ||u - z||^2 + tau R(u).
inline double prox_objective(const BregmanFunction& R, const Tensor& z, double tau, const Tensor& u) {
    return 0.5 * squared_norm(u - z) + tau * R.value(u);
}

/// Compares R.prox(z, tau) with an independent minimisation of phi: the dual
/// oracle for TV, otherwise projected subgradient descent (steps 1/(k+1), the
/// 1-strong-convexity rate) started from z and from the prox output.
inline ProxOracleReport prox_oracle_check(const BregmanFunction& R, const Tensor& z, double tau,
                                          int iterations = 20000) {
    ProxOracleReport rep;
    const Tensor p = R.prox(z, tau);
    rep.prox_value = prox_objective(R, z, tau, p);

    if (const auto* tv = dynamic_cast<const TotalVariation*>(&R)) {
        const TvDualOracle o = tv_dual_oracle(z, tau * tv->alpha());
        rep.oracle_value = prox_objective(R, z, tau, o.u);
        rep.conclusive = o.converged;
        rep.gap = rep.prox_value - rep.oracle_value;
        return rep;
    }

    auto project = [&](const Tensor& x) { return R.is_indicator() ? R.prox(x, 1.0) : x; };
    auto descend = [&](Tensor u) {
        double best = prox_objective(R, z, tau, u);
        for (int k = 0; k < iterations; ++k) {
            Tensor s = u - z;
            s.axpy(tau, R.initial_subgradient(u));
            u.axpy(-1.0 / (k + 1.0), s);
            u = project(u);
            best = std::min(best, prox_objective(R, z, tau, u));
        }
        return best;
    };
    const double from_z = descend(project(z));
    const double from_p = descend(p);
    rep.oracle_value = std::min(from_z, from_p);
    rep.gap = rep.prox_value - rep.oracle_value;
    rep.conclusive = std::abs(from_z - from_p) <= 1e-3 * (1.0 + std::abs(rep.oracle_value));
    return rep;
}

} // namespace linbreg
