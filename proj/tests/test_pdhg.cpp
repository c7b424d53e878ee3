#include "test_util.hpp"

#include <linbreg/operators.hpp>
#include <linbreg/pdhg.hpp>
#include <linbreg/verify.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace linbreg;
using linbreg::testing::max_abs_diff;
using linbreg::testing::random_tensor;

namespace {

PdhgConfig tight(double tol = 1e-12, int maxit = 500000) {
    PdhgConfig cfg;
    cfg.tol = tol;
    cfg.maxit = maxit;
    return cfg;
}

double max_dual_length(const Tensor& p) {
    const std::size_t planes = p.dim(0), n = p.size() / planes;
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t c = 0; c < planes; ++c) s += p[c * n + i] * p[c * n + i];
        m = std::max(m, std::sqrt(s));
    }
    return m;
}

} // namespace

TEST(Pdhg, ZeroWeightReturnsInputAfterOneIteration) {
    const Tensor z = random_tensor({5, 7}, 1);
    const PdhgResult r = pdhg_tv_prox(z, 0.0);
    EXPECT_EQ(r.iters, 1);
    EXPECT_EQ(r.gap, 0.0);
    EXPECT_LT(max_abs_diff(r.u, z), 1e-15);
}

TEST(Pdhg, ConstantImageIsFixed) {
    const Tensor z({6, 4}, -1.25);
    for (double lambda : {0.1, 1.0, 50.0}) {
        const PdhgResult r = pdhg_tv_prox(z, lambda);
        EXPECT_LT(max_abs_diff(r.u, z), 1e-14) << lambda;
        EXPECT_LE(r.gap, 1e-7);
    }
}

TEST(Pdhg, StepSignalMatchesDualOracle) {
    const Tensor z({1, 6}, {0, 0, 4, 4, 0, 0});
    const PdhgResult r = pdhg_tv_prox(z, 1.0, tight());
    const TvDualOracle o = tv_dual_oracle(z, 1.0, 1e-12);
    ASSERT_TRUE(o.converged);
    EXPECT_LT(max_abs_diff(r.u, o.u), 1e-6);
    // the plateau shrinks by 2 lambda / width and the ground rises by 2 lambda / 4
    const Tensor expect({1, 6}, {0.5, 0.5, 3.0, 3.0, 0.5, 0.5});
    EXPECT_LT(max_abs_diff(r.u, expect), 1e-6);
}

TEST(Pdhg, RandomImageMatchesDualOracle) {
    const Tensor z = random_tensor({6, 5}, 2);
    const PdhgResult r = pdhg_tv_prox(z, 0.3, tight());
    const TvDualOracle o = tv_dual_oracle(z, 0.3, 1e-12);
    ASSERT_TRUE(o.converged);
    EXPECT_LT(max_abs_diff(r.u, o.u), 1e-6);
}

TEST(Pdhg, GapHistoryIsNonincreasing) {
    PdhgConfig cfg = tight(1e-10);
    cfg.check_every = 50;
    const PdhgResult r = pdhg_tv_prox(random_tensor({8, 8}, 3), 0.5, cfg);
    ASSERT_GE(r.gap_history.size(), 3u);
    for (std::size_t i = 1; i < r.gap_history.size(); ++i) EXPECT_LE(r.gap_history[i], r.gap_history[i - 1]);
    EXPECT_LE(r.gap, 1e-10);
    EXPECT_EQ(r.gap, r.gap_history.back());
}

TEST(Pdhg, PreservesMeanAndDualBound) {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const Tensor z = random_tensor({7, 6}, 10 + s, -3.0, 3.0);
        const double lambda = 0.2 + 0.4 * static_cast<double>(s);
        const PdhgResult r = pdhg_tv_prox(z, lambda, tight(1e-9));
        EXPECT_NEAR(sum(r.u) / static_cast<double>(r.u.size()), sum(z) / static_cast<double>(z.size()), 1e-10);
        EXPECT_LE(max_dual_length(r.p), lambda * (1.0 + 1e-14));
        EXPECT_LT(max_abs_diff(r.u, z + div_field(r.p, z.shape())), 1e-14);
    }
}

TEST(Pdhg, MultichannelSharesTheDualBall) {
    const Tensor z = random_tensor({2, 5, 5}, 20);
    const PdhgResult r = pdhg_tv_prox(z, 0.7, tight(1e-10));
    EXPECT_EQ(r.p.shape(), (Shape{4, 5, 5}));
    EXPECT_LE(max_dual_length(r.p), 0.7 * (1.0 + 1e-14));
    const TvDualOracle o = tv_dual_oracle(z, 0.7, 1e-12);
    ASSERT_TRUE(o.converged);
    EXPECT_LT(max_abs_diff(r.u, o.u), 1e-5);
}

TEST(Pdhg, NotConvergedCarriesBestIterate) {
    PdhgConfig cfg;
    cfg.tol = 1e-14;
    cfg.maxit = 30;
    const Tensor z = random_tensor({6, 6}, 4);
    try {
        pdhg_tv_prox(z, 1.0, cfg);
        FAIL() << "expected InnerSolverNotConverged";
    } catch (const InnerSolverNotConverged& e) {
        EXPECT_EQ(e.iters(), 30);
        EXPECT_GT(e.gap(), 1e-14);
        EXPECT_TRUE(std::isfinite(e.gap()));
        EXPECT_EQ(e.u().shape(), z.shape());
        EXPECT_LT(max_abs_diff(e.u(), z + div_field(e.best().p, z.shape())), 1e-14);
        EXPECT_EQ(e.gap(), *std::min_element(e.best().gap_history.begin(), e.best().gap_history.end()));
    }
}

TEST(Pdhg, WarmStartFromSolutionConvergesImmediately) {
    const Tensor z = random_tensor({6, 6}, 5);
    const PdhgResult cold = pdhg_tv_prox(z, 0.4, tight(1e-9));
    const PdhgResult warm = pdhg_tv_prox(z, 0.4, tight(1e-9), &cold.p);
    EXPECT_LE(warm.iters, 10);
    EXPECT_LT(max_abs_diff(warm.u, cold.u), 1e-4);

    // a warm start outside the smaller ball is projected back into it
    const PdhgResult shrunk = pdhg_tv_prox(z, 0.1, {}, &cold.p);
    EXPECT_LE(max_dual_length(shrunk.p), 0.1 * (1.0 + 1e-14));
}

TEST(Pdhg, RejectsInvalidInput) {
    const Tensor z = random_tensor({4, 4}, 6);
    EXPECT_THROW(pdhg_tv_prox(z, -1.0), ArgumentError);
    PdhgConfig bad;
    bad.sigma = 1.0;
    EXPECT_THROW(pdhg_tv_prox(z, 1.0, bad), ArgumentError);
    PdhgConfig theta;
    theta.theta = 1.5;
    EXPECT_THROW(pdhg_tv_prox(z, 1.0, theta), ArgumentError);
    const Tensor wrong({3, 4, 4});
    EXPECT_THROW(pdhg_tv_prox(z, 1.0, {}, &wrong), DimensionError);
}
