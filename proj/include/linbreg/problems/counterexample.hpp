#pragma once

#include <linbreg/error.hpp>
#include <linbreg/objective.hpp>
#include <linbreg/regularizers.hpp>
#include <linbreg/solver.hpp>
#include <linbreg/tensor.hpp>

#include <vector>

namespace linbreg {

/// E(u) = (u + 1)^2 / 2 on the real line; the unconstrained minimiser is -1.
inline FunctionObjective counterexample_objective() {
    return FunctionObjective(
        [](const Tensor& u) { return 0.5 * (u[0] + 1.0) * (u[0] + 1.0); },
        [](const Tensor& u, Tensor& g) {
            g = Tensor(u.shape(), u[0] + 1.0);
            return 0.5 * (u[0] + 1.0) * (u[0] + 1.0);
        },
        1.0, "counterexample");
}

struct CounterexampleTrajectory {
    std::vector<double> u; ///< u^0 .. u^steps
    std::vector<double> q; ///< q^0 .. q^steps
    double final_gradient = 0.0; ///< E'(u^steps)
};

/// Linearised Bregman with R = chi_{>=0}, q^0 = 0 and constant tau = 1.
inline CounterexampleTrajectory counterexample_run(double u0, int steps) {
    if (!(u0 > 0.0)) throw ArgumentError("counterexample requires u0 > 0");
    if (steps < 0) throw ArgumentError("steps must be >= 0");
    const FunctionObjective E = counterexample_objective();
    const NonnegIndicator R;
    SolverState st = make_initial_state(E, R, Tensor(Shape{1}, {u0}), 1.0, Tensor(Shape{1}, {0.0}));
    CounterexampleTrajectory out;
    out.u.push_back(st.u[0]);
    out.q.push_back(st.q[0]);
    for (int k = 0; k < steps; ++k) {
        st = linbreg_step(R, st);
        evaluate(E, st);
        out.u.push_back(st.u[0]);
        out.q.push_back(st.q[0]);
    }
    out.final_gradient = st.grad[0];
    return out;
}

} // namespace linbreg
