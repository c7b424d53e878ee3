#include "test_util.hpp"

#include <linbreg/objective.hpp>
#include <linbreg/problems/deconvolution.hpp>
#include <linbreg/regularizers.hpp>
#include <linbreg/verify.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <string>

using namespace linbreg;
using linbreg::testing::max_abs_diff;
using linbreg::testing::random_tensor;

namespace {

FunctionObjective linear(const Tensor& c) {
    return FunctionObjective([c](const Tensor& u) { return dot(c, u); },
                             [c](const Tensor& u, Tensor& g) {
                                 g = c;
                                 return dot(c, u);
                             });
}

} // namespace

TEST(FiniteDifference, LinearIsExact) {
    const Tensor c = Tensor::vector({1.0, -2.0, 0.5, 4.0});
    const auto rep = finite_difference_gradient_check(linear(c), random_tensor({4}, 1), 4, 0);
    EXPECT_EQ(rep.checked, 4u);
    EXPECT_LE(rep.max_rel_err, 1e-9);
}

TEST(FiniteDifference, HalfSquaredNorm) {
    const QuadraticObjective E(Tensor(Shape{6}));
    const Tensor u = random_tensor({6}, 2);
    const auto rep = finite_difference_gradient_check(E, u, 6, 0);
    EXPECT_LE(rep.max_rel_err, 1e-10);
    EXPECT_DOUBLE_EQ(rep.step, 1e-6 * (1.0 + norm(u)));
}

TEST(FiniteDifference, DeconvolutionInstance) {
    const BlindDeconvObjective E(random_tensor({8, 8}, 3), {3, 3});
    const Tensor x = E.pack(random_tensor({8, 8}, 4), random_tensor({3, 3}, 5));
    EXPECT_LE(finite_difference_gradient_check(E, x, 25, 6).max_rel_err, 1e-4);
}

TEST(FiniteDifference, DetectsAWrongGradient) {
    const FunctionObjective E([](const Tensor& u) { return 0.5 * squared_norm(u); },
                              [](const Tensor& u, Tensor& g) {
                                  g = u;
                                  g[2] *= 1.01;
                                  return 0.5 * squared_norm(u);
                              });
    const auto rep = finite_difference_gradient_check(E, Tensor::vector({1.0, 2.0, 3.0}), 3, 0);
    EXPECT_EQ(rep.worst_coordinate, 2u);
    EXPECT_NEAR(rep.max_rel_err, 0.01 / 1.01, 1e-6);
}

TEST(FiniteDifference, NonFiniteEnergyNamesTheCoordinate) {
    const FunctionObjective E(
        [](const Tensor& u) { return u[1] > 0.5 ? std::numeric_limits<double>::infinity() : squared_norm(u); },
        [](const Tensor& u, Tensor& g) {
            g = 2.0 * u;
            return squared_norm(u);
        });
    try {
        finite_difference_gradient_check(E, Tensor::vector({0.0, 0.5, 0.0}), 3, 0);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("coordinate 1"), std::string::npos);
    }
}

TEST(FiniteDifference, SeededSubsetIsDeterministic) {
    const BlindDeconvObjective E(random_tensor({6, 6}, 7), {3, 3});
    const Tensor x = E.pack(random_tensor({6, 6}, 8), random_tensor({3, 3}, 9));
    const auto a = finite_difference_gradient_check(E, x, 7, 42), b = finite_difference_gradient_check(E, x, 7, 42);
    EXPECT_EQ(a.checked, 7u);
    EXPECT_EQ(a.max_rel_err, b.max_rel_err);
    EXPECT_EQ(a.worst_coordinate, b.worst_coordinate);
}

TEST(ProxOracle, L1ClosedFormIsOptimal) {
    const auto rep = prox_oracle_check(L1Norm(0.8), random_tensor({10}, 10, -2.0, 2.0), 0.9);
    EXPECT_TRUE(rep.conclusive);
    EXPECT_LE(rep.gap, 1e-10);
}

TEST(ProxOracle, SimplexProjectionIsExact) {
    const auto rep = prox_oracle_check(SimplexIndicator(), random_tensor({5}, 11, -1.0, 2.0), 1.0);
    EXPECT_TRUE(rep.conclusive);
    EXPECT_LE(rep.gap, 1e-15);
    EXPECT_EQ(rep.prox_value, prox_objective(SimplexIndicator(), random_tensor({5}, 11, -1.0, 2.0), 1.0,
                                             project_simplex(random_tensor({5}, 11, -1.0, 2.0))));
}

TEST(ProxOracle, TvStepSignal) {
    PdhgConfig cfg;
    cfg.tol = 1e-12;
    cfg.maxit = 500000;
    const auto rep = prox_oracle_check(TotalVariation(1.0, cfg), Tensor({1, 6}, {0, 0, 4, 4, 0, 0}), 1.0);
    EXPECT_TRUE(rep.conclusive);
    EXPECT_LE(std::abs(rep.gap), 1e-6);
}

TEST(ProxOracle, ShortOracleRunIsInconclusiveNotAPass) {
    // a deliberately wrong "prox" that returns its input
    struct Identity final : BregmanFunction {
        std::string name() const override { return "identity_prox"; }
        double value(const Tensor& u) const override { return L1Norm(1.0).value(u); }
        Tensor prox(const Tensor& z, double, ProxWorkspace* = nullptr) const override { return z; }
        Tensor initial_subgradient(const Tensor& u) const override { return L1Norm(1.0).initial_subgradient(u); }
    };
    const auto rep = prox_oracle_check(Identity(), Tensor::vector({2.0, -0.5, 0.1}), 1.0);
    EXPECT_GT(rep.gap, 0.1);
    const auto short_run = prox_oracle_check(L1Norm(1.0), Tensor::vector({2.0, -0.5, 0.1}), 1.0, 1);
    EXPECT_FALSE(short_run.conclusive);
}

TEST(DualOracle, IsDeterministicAndFeasible) {
    const Tensor z = random_tensor({5, 4}, 12);
    const TvDualOracle a = tv_dual_oracle(z, 0.4, 1e-10), b = tv_dual_oracle(z, 0.4, 1e-10);
    ASSERT_TRUE(a.converged);
    EXPECT_EQ(a.iters, b.iters);
    EXPECT_EQ(max_abs_diff(a.u, b.u), 0.0);
    EXPECT_LE(a.gap, 1e-10);
    EXPECT_NEAR(sum(a.u), sum(z), 1e-10);
}
