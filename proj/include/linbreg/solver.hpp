#pragma once

#include <linbreg/error.hpp>
#include <linbreg/objective.hpp>
#include <linbreg/regularizers.hpp>
#include <linbreg/tensor.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace linbreg {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum class SolverKind { LinBreg, ProximalGradient, ProjectedGradient };

inline std::string to_string(SolverKind k) {
    switch (k) {
    case SolverKind::LinBreg: return "linbreg";
    case SolverKind::ProximalGradient: return "proximal-gd";
    case SolverKind::ProjectedGradient: return "projected-gd";
    }
    return "unknown";
}

/// s^k = (u^k, q^{k-1}) plus the previous pair. At k = 0, u_prev = u and
/// q_prev = q so that F(s^0) = E(u^0).
struct SolverState {
    Tensor u;
    Tensor q;
    Tensor u_prev;
    Tensor q_prev;
    Tensor grad; ///< grad E(u)
    double tau = 0.0;
    int k = 0;
    double energy = kNaN;
    double surrogate = kNaN;
    double grad_norm = kNaN;
};

struct StoppingRule {
    int max_iter = 1000;
    std::optional<double> discrepancy_eta;
    std::optional<double> iterate_gap_tol;

    void validate() const {
        if (max_iter < 0) throw ArgumentError("max_iter must be >= 0");
        if (discrepancy_eta && !(*discrepancy_eta >= 0.0)) throw ArgumentError("discrepancy eta must be >= 0");
        if (iterate_gap_tol && !(*iterate_gap_tol >= 0.0)) throw ArgumentError("iterate gap tol must be >= 0");
    }
};

struct BacktrackingPolicy {
    double tau0 = 1.0;
    double shrink = 0.75;
    /// Accepted increase of E per step; unset means 1e-12 * max(1, |E(u^0)|).
    std::optional<double> eps_decrease;
    /// Stagnation floor relative to tau0.
    double min_tau_ratio = 1e-16;

    void validate() const {
        if (!(tau0 > 0.0) || !std::isfinite(tau0)) throw ArgumentError("tau0 must be finite and > 0");
        if (!(shrink > 0.0 && shrink < 1.0)) throw ArgumentError("backtracking shrink must lie in (0, 1)");
        if (eps_decrease && !(*eps_decrease >= 0.0)) throw ArgumentError("eps_decrease must be >= 0");
    }
    double eps_for(double e0) const { return eps_decrease ? *eps_decrease : 1e-12 * std::max(1.0, std::abs(e0)); }
};

struct MonitorRecord {
    int k = 0;
    double tau = kNaN;          ///< step used to produce u^k
    double energy = kNaN;       ///< E(u^k)
    double surrogate = kNaN;    ///< F(s^k)
    double iterate_gap = kNaN;  ///< ||u^k - u^{k-1}||
    double breg_sym = kNaN;     ///< D^symm_R(u^k, u^{k-1})
    double r_norm = kNaN;       ///< ||r^k||
    double rho2_bound = kNaN;   ///< rho_2 ||u^k - u^{k-1}||
    double r_roundoff = 0.0;    ///< bound on the floating-point error of r_norm; not exported
    bool decrease_ok = true;
    bool bound_ok = true;
    std::vector<std::pair<std::string, double>> extras;
};

// ---------------------------------------------------------------------------
// Surrogate and subgradient

/// F(x, y) = E(x) + R(x) + R*(y) - <x, y>.
inline double surrogate_conjugate_form(double energy, const BregmanFunction& R, const Tensor& x, const Tensor& y) {
    return energy + R.value(x) + R.conjugate_value(y) - dot(x, y);
}

/// F(x, y) = E(x) + D_R^y(x, v) for y in dR(v).
inline double surrogate_bregman_form(double energy, const BregmanFunction& R, const Tensor& x, const Tensor& y,
                                     const Tensor& v) {
    return energy + bregman_distance(R, x, v, y);
}

/// Conjugate form when R* exists, else the Bregman form against `fallback_prev`.
inline double surrogate_value(const SmoothObjective& E, const BregmanFunction& R, const Tensor& x, const Tensor& y,
                              const Tensor* fallback_prev = nullptr) {
    const double e = E.value(x);
    if (R.has_conjugate()) return surrogate_conjugate_form(e, R, x, y);
    if (fallback_prev == nullptr) {
        throw UnsupportedOperation("surrogate: " + R.name() + " has no conjugate and no previous point was given");
    }
    return surrogate_bregman_form(e, R, x, y, *fallback_prev);
}

/// Norm of r^k = (grad E(u^k) + q^k - q^{k-1}, u^{k-1} - u^k).
inline double surrogate_subgradient_norm(const SolverState& st) {
    if (st.k == 0) throw ArgumentError("surrogate subgradient undefined at k = 0");
    Tensor first = st.grad + st.q - st.q_prev;
    return std::sqrt(squared_norm(first) + squared_norm(st.u_prev - st.u));
}

/// Stacked pair r^k; the second block is u^{k-1} - u^k.
inline std::pair<Tensor, Tensor> surrogate_subgradient(const SolverState& st) {
    if (st.k == 0) throw ArgumentError("surrogate subgradient undefined at k = 0");
    return {st.grad + st.q - st.q_prev, st.u_prev - st.u};
}

// ---------------------------------------------------------------------------
// Steps

namespace detail {

inline void check_step_inputs(const SolverState& st) {
    if (!(st.tau > 0.0) || !std::isfinite(st.tau)) throw ArgumentError("step requires finite tau > 0");
    if (!st.grad.all_finite() || st.grad.shape() != st.u.shape()) {
        throw NumericalError("non-finite or missing gradient at iteration " + std::to_string(st.k));
    }
}

inline SolverState advance(const SolverState& st, Tensor u_next, Tensor q_next, double tau) {
    SolverState out;
    out.u_prev = st.u;
    out.q_prev = st.q;
    out.u = std::move(u_next);
    out.q = std::move(q_next);
    out.tau = tau;
    out.k = st.k + 1;
    return out;
}

} // namespace detail

/// u+ = prox_{tau R}(u + tau (q - grad E(u))), q+ = q - (u+ - u + tau grad E(u)) / tau.
/// Gradient and energy of the result are left unevaluated.
inline SolverState linbreg_step(const BregmanFunction& R, const SolverState& st, ProxWorkspace* ws = nullptr) {
    detail::check_step_inputs(st);
    const double tau = st.tau;
    Tensor z = st.u;
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += tau * (st.q[i] - st.grad[i]);
    Tensor u_next = R.prox(z, tau, ws);
    Tensor q_next(st.q.shape());
    for (std::size_t i = 0; i < q_next.size(); ++i) {
        q_next[i] = st.q[i] - (u_next[i] - st.u[i] + tau * st.grad[i]) / tau;
    }
    return detail::advance(st, std::move(u_next), std::move(q_next), tau);
}

/// u+ = prox_{tau R}(u - tau grad E(u)); no dual memory (q is carried as 0).
inline SolverState proximal_gradient_step(const BregmanFunction& R, const SolverState& st,
                                          ProxWorkspace* ws = nullptr) {
    detail::check_step_inputs(st);
    Tensor z = st.u;
    z.axpy(-st.tau, st.grad);
    Tensor u_next = R.prox(z, st.tau, ws);
    Tensor q_next = Tensor::zeros_like(u_next);
    return detail::advance(st, std::move(u_next), std::move(q_next), st.tau);
}

/// u+ = proj(u - tau grad E(u)); blocks left free by `proj` take plain gradient steps.
inline SolverState projected_gradient_step(const std::function<Tensor(const Tensor&)>& proj, const SolverState& st) {
    detail::check_step_inputs(st);
    Tensor z = st.u;
    z.axpy(-st.tau, st.grad);
    Tensor u_next = proj(z);
    Tensor q_next = Tensor::zeros_like(u_next);
    return detail::advance(st, std::move(u_next), std::move(q_next), st.tau);
}

/// Evaluates E and grad E at st.u in place.
inline void evaluate(const SmoothObjective& E, SolverState& st) {
    st.energy = E.value_and_gradient(st.u, st.grad);
    if (!std::isfinite(st.energy) || !st.grad.all_finite()) {
        throw NumericalError("non-finite energy or gradient at iteration " + std::to_string(st.k));
    }
    st.grad_norm = norm(st.grad);
}

/// State at k = 0. q0 defaults to R.initial_subgradient(u0).
inline SolverState make_initial_state(const SmoothObjective& E, const BregmanFunction& R, Tensor u0, double tau0,
                                      std::optional<Tensor> q0 = std::nullopt) {
    SolverState st;
    st.u = std::move(u0);
    if (!st.u.all_finite()) throw ArgumentError("initial point has non-finite entries");
    st.q = q0 ? std::move(*q0) : R.initial_subgradient(st.u);
    st.q.require_same(st.u, "initial subgradient");
    st.u_prev = st.u;
    st.q_prev = st.q;
    st.tau = tau0;
    st.k = 0;
    evaluate(E, st);
    st.surrogate = st.energy;
    return st;
}

using StepFn = std::function<SolverState(const SolverState&)>;

/// Retries `step` from the same (u, q) with tau <- shrink * tau until
/// E(u+) <= E(u) + eps. The accepted tau is kept for the next iteration.
inline SolverState backtrack(const SmoothObjective& E, const StepFn& step, const SolverState& st,
                             const BacktrackingPolicy& policy, double eps, int* trials = nullptr) {
    SolverState trial_in = st;
    const double floor = policy.min_tau_ratio * policy.tau0;
    int n = 0;
    while (true) {
        ++n;
        SolverState next = step(trial_in);
        evaluate(E, next);
        if (next.energy <= st.energy + eps) {
            if (trials) *trials = n;
            return next;
        }
        trial_in.tau *= policy.shrink;
        if (trial_in.tau < floor) {
            throw StagnationError("backtracking stagnated: tau " + std::to_string(trial_in.tau) +
                                      " below floor at iteration " + std::to_string(st.k),
                                  trial_in.tau);
        }
    }
}

// ---------------------------------------------------------------------------
// Audits

/// rho_1 = max(0, 1/tau - L/2).
inline double rho1_for(double tau, double L) { return std::max(0.0, 1.0 / tau - 0.5 * L); }

/// Largest step allowed for a given rho_1: 2 / (L + 2 rho_1).
inline double max_tau_for(double L, double rho1) { return 2.0 / (L + 2.0 * rho1); }

struct DecreaseReport {
    int violations = 0;
    int checked = 0;
    int first_violation = -1;
    double worst_excess = 0.0; ///< max of lhs - rhs relative to 1 + |F(s^{k-1})|
};

/// Audits F(s^k) + rho_1 ||u^k - u^{k-1}||^2 <= F(s^{k-1}) with rho_1 from tau^{k-1}.
inline DecreaseReport check_sufficient_decrease(double f0, const std::vector<MonitorRecord>& records, double L,
                                                double rel_tol = 1e-10) {
    DecreaseReport rep;
    double f_prev = f0;
    for (const auto& r : records) {
        const double rho1 = rho1_for(r.tau, L);
        const double lhs = r.surrogate + rho1 * r.iterate_gap * r.iterate_gap;
        const double excess = (lhs - f_prev) / (1.0 + std::abs(f_prev));
        ++rep.checked;
        rep.worst_excess = std::max(rep.worst_excess, excess);
        if (!(excess <= rel_tol)) {
            ++rep.violations;
            if (rep.first_violation < 0) rep.first_violation = r.k;
        }
        f_prev = r.surrogate;
    }
    return rep;
}

struct BoundReport {
    int violations = 0;
    int checked = 0;
    int first_violation = -1;
    double worst_ratio = 0.0; ///< max ||r^k|| / (rho_2 ||u^k - u^{k-1}||)
    int within_roundoff = 0;  ///< steps that exceed the bound by less than r_roundoff
};

/// Audits ||r^k|| <= (1 + L + 1/tau_min) ||u^k - u^{k-1}|| with tau_min over the whole run.
/// An excess below the record's r_roundoff is counted separately, not as a violation.
inline BoundReport check_subgradient_bound(const std::vector<MonitorRecord>& records, double L,
                                           double rel_tol = 1e-9) {
    BoundReport rep;
    double tau_min = std::numeric_limits<double>::infinity();
    for (const auto& r : records) tau_min = std::min(tau_min, r.tau);
    const double rho2 = 1.0 + L + 1.0 / tau_min;
    for (const auto& r : records) {
        const double bound = rho2 * r.iterate_gap;
        ++rep.checked;
        if (bound > 0.0) rep.worst_ratio = std::max(rep.worst_ratio, r.r_norm / bound);
        const double allowed = bound * (1.0 + rel_tol) + rel_tol * std::numeric_limits<double>::min();
        if (r.r_norm > allowed && r.r_norm <= allowed + r.r_roundoff) {
            ++rep.within_roundoff;
        } else if (!(r.r_norm <= allowed)) {
            ++rep.violations;
            if (rep.first_violation < 0) rep.first_violation = r.k;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Driver

struct RunOptions {
    SolverKind kind = SolverKind::LinBreg;
    /// Overrides E.lipschitz() for the monitors; unset and unknown disables assertions.
    std::optional<double> lipschitz;
    bool monitor_surrogate = true;
    ProxWorkspace* workspace = nullptr;
    /// Called once per accepted iteration; may append extras to the record.
    std::function<void(const SolverState& prev, const SolverState& next, MonitorRecord& rec)> on_iteration;
};

struct RunResult {
    SolverState state;
    std::vector<MonitorRecord> records;
    std::string stop_reason;
    double tau_min = kNaN;
    double f0 = kNaN; ///< F(s^0)
    int inner_iterations = 0;
    int inner_unconverged = 0;
    int backtracks = 0;
};

/// Algorithm driver: iterates the chosen step with backtracking until a
/// stopping criterion fires. Runs with R* available compute the surrogate in
/// conjugate form, otherwise in Bregman form against u^{k-1}.
inline RunResult run(const SmoothObjective& E, const BregmanFunction& R, const SolverState& st0,
                     const BacktrackingPolicy& policy, const StoppingRule& stop, const RunOptions& opts = {}) {
    policy.validate();
    stop.validate();
    RunResult res;
    res.state = st0;
    res.f0 = st0.surrogate;
    if (!std::isfinite(res.state.energy)) evaluate(E, res.state);

    const std::optional<double> L = opts.lipschitz ? opts.lipschitz : E.lipschitz();
    const double eps = policy.eps_for(st0.energy);
    ProxWorkspace local_ws;
    ProxWorkspace* ws = opts.workspace ? opts.workspace : &local_ws;
    const int inner0 = ws->inner_iterations;
    const int unconverged0 = ws->inner_unconverged;

    StepFn step;
    switch (opts.kind) {
    case SolverKind::LinBreg: step = [&](const SolverState& s) { return linbreg_step(R, s, ws); }; break;
    case SolverKind::ProximalGradient:
        step = [&](const SolverState& s) { return proximal_gradient_step(R, s, ws); };
        break;
    case SolverKind::ProjectedGradient:
        step = [&](const SolverState& s) {
            return projected_gradient_step([&](const Tensor& z) { return R.prox(z, s.tau, ws); }, s);
        };
        break;
    }
    const bool dual = opts.kind == SolverKind::LinBreg;

    auto discrepancy_met = [&](const SolverState& s) {
        return stop.discrepancy_eta && s.energy <= *stop.discrepancy_eta;
    };
    if (stop.max_iter == 0) {
        res.stop_reason = "max_iter";
        return res;
    }
    if (discrepancy_met(res.state)) {
        res.stop_reason = "discrepancy";
        return res;
    }

    double tau_min = std::numeric_limits<double>::infinity();
    double f_prev = res.f0;
    while (true) {
        int trials = 0;
        SolverState next = backtrack(E, step, res.state, policy, eps, &trials);
        res.backtracks += trials - 1;
        tau_min = std::min(tau_min, next.tau);

        MonitorRecord rec;
        rec.k = next.k;
        rec.tau = next.tau;
        rec.energy = next.energy;
        const Tensor du = next.u - next.u_prev;
        rec.iterate_gap = norm(du);
        if (opts.monitor_surrogate) {
            if (dual) {
                next.surrogate = R.has_conjugate()
                                     ? surrogate_conjugate_form(next.energy, R, next.u, next.q_prev)
                                     : surrogate_bregman_form(next.energy, R, next.u, next.q_prev, next.u_prev);
                rec.breg_sym = symmetric_bregman_distance(next.u, next.u_prev, next.q, next.q_prev);
                rec.r_norm = surrogate_subgradient_norm(next);
                rec.r_roundoff = 4.0 * std::numeric_limits<double>::epsilon() *
                                 (norm(next.grad) + norm(next.q) + norm(next.q_prev) + norm(next.u) +
                                  norm(next.u_prev));
            } else {
                // composite objective and its subgradient grad E(u+) - grad E(u) - du/tau
                next.surrogate = next.energy + R.value(next.u);
                Tensor r1 = next.grad - res.state.grad;
                r1.axpy(-1.0 / next.tau, du);
                rec.r_norm = norm(r1);
                rec.r_roundoff = 4.0 * std::numeric_limits<double>::epsilon() *
                                 (norm(next.grad) + norm(res.state.grad) + rec.iterate_gap / next.tau);
            }
            rec.surrogate = next.surrogate;
            if (L) {
                const double rho1 = rho1_for(next.tau, *L);
                const double lhs = next.surrogate + rho1 * rec.iterate_gap * rec.iterate_gap;
                rec.decrease_ok = (lhs - f_prev) <= 1e-10 * (1.0 + std::abs(f_prev));
                rec.rho2_bound = (1.0 + *L + 1.0 / tau_min) * rec.iterate_gap;
                rec.bound_ok = rec.r_norm <= rec.rho2_bound * (1.0 + 1e-9) + rec.r_roundoff;
            } else {
                rec.decrease_ok = next.surrogate <= f_prev + 1e-10 * (1.0 + std::abs(f_prev));
            }
            f_prev = next.surrogate;
        }
        if (opts.on_iteration) opts.on_iteration(res.state, next, rec);
        res.records.push_back(std::move(rec));
        res.state = std::move(next);

        if (discrepancy_met(res.state)) {
            res.stop_reason = "discrepancy";
            break;
        }
        if (stop.iterate_gap_tol && res.records.back().iterate_gap <= *stop.iterate_gap_tol) {
            res.stop_reason = "iterate_gap";
            break;
        }
        if (res.state.k >= stop.max_iter) {
            res.stop_reason = "max_iter";
            break;
        }
    }
    res.tau_min = tau_min;
    res.inner_iterations = ws->inner_iterations - inner0;
    res.inner_unconverged = ws->inner_unconverged - unconverged0;
    return res;
}

// ---------------------------------------------------------------------------
// CSV export

inline void write_double(std::ostream& os, double v) {
    if (std::isnan(v)) {
        os << "nan";
    } else if (std::isinf(v)) {
        os << (v > 0 ? "inf" : "-inf");
    } else {
        std::ostringstream tmp;
        tmp << std::setprecision(17) << v;
        os << tmp.str();
    }
}

/// Fixed monitor columns followed by problem-specific extras.
inline void write_monitor_header(std::ostream& os, const std::vector<std::string>& extra_columns = {}) {
    os << "k,tau,energy,surrogate,iterate_gap,breg_sym,r_norm,rho2_bound,decrease_ok,bound_ok";
    for (const auto& c : extra_columns) os << ',' << c;
    os << '\n';
}

/// Extras missing from the record are written as nan.
inline void write_monitor_row(std::ostream& os, const MonitorRecord& r,
                              const std::vector<std::string>& extra_columns = {}) {
    os << r.k;
    for (double v : {r.tau, r.energy, r.surrogate, r.iterate_gap, r.breg_sym, r.r_norm, r.rho2_bound}) {
        os << ',';
        write_double(os, v);
    }
    os << ',' << (r.decrease_ok ? 1 : 0) << ',' << (r.bound_ok ? 1 : 0);
    for (const auto& c : extra_columns) {
        os << ',';
        auto it = std::find_if(r.extras.begin(), r.extras.end(), [&](const auto& e) { return e.first == c; });
        write_double(os, it == r.extras.end() ? kNaN : it->second);
    }
    os << '\n';
}

/// One row per accepted iteration.
inline void write_monitor_csv(std::ostream& os, const std::vector<MonitorRecord>& records,
                              const std::vector<std::string>& extra_columns = {}) {
    write_monitor_header(os, extra_columns);
    for (const auto& r : records) write_monitor_row(os, r, extra_columns);
}

} // namespace linbreg
