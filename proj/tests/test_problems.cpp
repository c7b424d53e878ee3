#include "test_util.hpp"

#include <linbreg/io.hpp>
#include <linbreg/problems/classifier.hpp>
#include <linbreg/problems/counterexample.hpp>
#include <linbreg/problems/deconvolution.hpp>
#include <linbreg/problems/mri.hpp>
#include <linbreg/verify.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <random>
#include <vector>

using namespace linbreg;
using linbreg::testing::max_abs_diff;
using linbreg::testing::random_complex;
using linbreg::testing::random_tensor;

namespace {

// Ten seeded points around x0; the invariant check used for every problem.
double worst_fd_error(const SmoothObjective& E, const Tensor& x0, std::size_t coords, std::uint64_t seed) {
    double worst = 0.0;
    for (std::uint64_t p = 0; p < 10; ++p) {
        Tensor x = x0;
        if (p > 0) x += 0.1 * random_tensor(x0.shape(), seed + p);
        worst = std::max(worst, finite_difference_gradient_check(E, x, coords, seed + 100 + p).max_rel_err);
    }
    return worst;
}

ParallelMriObjective random_mri(std::size_t n, std::size_t coils, std::uint64_t seed, double eps) {
    const Tensor mask = make_mask(MaskKind::Random, n, seed, 0.5);
    std::vector<ComplexTensor> data;
    for (std::size_t j = 0; j < coils; ++j) {
        ComplexTensor f = random_complex({n, n}, seed + 10 + j);
        for (std::size_t i = 0; i < f.size(); ++i) f[i] *= mask[i];
        data.push_back(std::move(f));
    }
    return ParallelMriObjective(mask, std::move(data), eps);
}

} // namespace

// --- blind deconvolution ---------------------------------------------------

TEST(BlindDeconv, ExactFitHasZeroGradient) {
    const Tensor u = random_tensor({8, 8}, 1);
    const Tensor h = project_simplex(random_tensor({3, 3}, 2, 0.0, 1.0));
    const Tensor f = conv2d_periodic(u, h);
    const auto [gu, gh] = blind_deconv_grad(u, h, f);
    EXPECT_LT(max_abs(gu), 1e-14);
    EXPECT_LT(max_abs(gh), 1e-14);
}

TEST(BlindDeconv, DeltaKernelGivesResidual) {
    const Tensor u = random_tensor({6, 7}, 3), f = random_tensor({6, 7}, 4);
    Tensor delta({3, 3});
    delta(1, 1) = 1.0;
    EXPECT_LT(max_abs_diff(blind_deconv_grad(u, delta, f).first, u - f), 1e-14);
    EXPECT_LT(max_abs_diff(blind_deconv_grad(u, Tensor({1, 1}, 1.0), f).first, u - f), 1e-14);
}

TEST(BlindDeconv, GradientMatchesFiniteDifferences) {
    const Tensor f = random_tensor({8, 8}, 5);
    const BlindDeconvObjective E(f, {3, 5});
    const Tensor x = E.pack(random_tensor({8, 8}, 6), random_tensor({3, 5}, 7));
    const auto rep = finite_difference_gradient_check(E, x, x.size(), 8);
    EXPECT_EQ(rep.checked, x.size());
    EXPECT_LE(rep.max_rel_err, 1e-5);
    EXPECT_LE(worst_fd_error(E, x, 30, 9), 1e-4);
}

TEST(BlindDeconv, LevelSetTermAddsToValueAndGradient) {
    const Tensor f = random_tensor({6, 6}, 10);
    const BlindDeconvObjective plain(f, {3, 3}), eps(f, {3, 3}, 0.25);
    const Tensor x = plain.pack(random_tensor({6, 6}, 11), random_tensor({3, 3}, 12));
    EXPECT_NEAR(eps.value(x), plain.value(x) + 0.125 * squared_norm(x), 1e-12);
    EXPECT_LT(max_abs_diff(eps.gradient(x), plain.gradient(x) + 0.25 * x), 1e-12);
    EXPECT_LE(worst_fd_error(eps, x, 20, 13), 1e-4);
}

TEST(BlindDeconv, SymmetricInImageAndKernelOfFullSize) {
    const Tensor u = random_tensor({6, 6}, 14), h = random_tensor({6, 6}, 15), f = random_tensor({6, 6}, 16);
    EXPECT_NEAR(blind_deconv_data_fit(u, h, f), blind_deconv_data_fit(h, u, f), 1e-12);
    const auto a = blind_deconv_grad(u, h, f), b = blind_deconv_grad(h, u, f);
    EXPECT_LT(max_abs_diff(a.first, b.second), 1e-12);
    EXPECT_LT(max_abs_diff(a.second, b.first), 1e-12);
}

TEST(BlindDeconv, ShapeErrors) {
    EXPECT_THROW(blind_deconv_grad(Tensor({4, 4}), Tensor({3, 3}), Tensor({4, 5})), DimensionError);
    EXPECT_THROW(BlindDeconvObjective(Tensor({4, 4}), {5, 3}), DimensionError);
    const BlindDeconvObjective E(Tensor({4, 4}), {3, 3});
    EXPECT_THROW(E.value(Tensor(Shape{24})), DimensionError);
}

TEST(BlindDeconv, RegulariserBlocks) {
    const BlindDeconvObjective E(random_tensor({5, 5}, 17), {3, 3});
    const BregmanPtr R = make_deconv_regularizer(E, 0.05);
    const auto* sep = dynamic_cast<const SeparableSum*>(R.get());
    ASSERT_NE(sep, nullptr);
    ASSERT_EQ(sep->parts().size(), 2u);
    EXPECT_EQ(sep->parts()[0].fn->name(), "tv");
    EXPECT_EQ(sep->parts()[1].fn->name(), "simplex");
    EXPECT_EQ(sep->parts()[1].range.offset, 25u);
    EXPECT_EQ(make_deconv_regularizer(E, 0.0)->name(), "separable(zero,simplex)");
}

TEST(SyntheticDeconv, NoiselessDataFitsExactly) {
    const Tensor k = motion_kernel_3x5();
    EXPECT_NEAR(sum(k), 1.0, 1e-15);
    const SyntheticDeconv s = make_synthetic_deconv(7, 16, 16, k, 0.0);
    const BlindDeconvObjective E(s.f, k.shape());
    EXPECT_EQ(E.value(E.pack(s.u_true, s.h_true)), 0.0);
    EXPECT_NEAR(sum(s.u_true), 0.0, 1e-12);
    EXPECT_NEAR(norm(s.u_true), 1.0, 1e-12);
}

TEST(SyntheticDeconv, NoiseIsSeedReproducible) {
    const Tensor k = motion_kernel_3x5();
    const SyntheticDeconv a = make_synthetic_deconv(3, 12, 12, k, 1e-2), b = make_synthetic_deconv(3, 12, 12, k, 1e-2);
    const SyntheticDeconv c = make_synthetic_deconv(4, 12, 12, k, 1e-2);
    EXPECT_EQ(max_abs_diff(a.f, b.f), 0.0);
    EXPECT_GT(max_abs_diff(a.f, c.f), 1e-4);
    const double noise_energy = squared_norm(a.f - conv2d_periodic(a.u_true, k));
    EXPECT_NEAR(noise_energy / (144.0 * 1e-4), 1.0, 0.35);
    EXPECT_THROW(make_synthetic_deconv(1, 8, 8, 2.0 * k, 0.0), ArgumentError);
}

TEST(SyntheticDeconv, DiscrepancyThreshold) {
    EXPECT_DOUBLE_EQ(deconv_discrepancy_eta(1e-4, 424, 640), 1.2e-8 / (2.0 * std::sqrt(424.0 * 640.0)));
    EXPECT_NEAR(deconv_discrepancy_eta(1e-4, 424, 640), 1.1518e-11, 1e-15);
    EXPECT_DOUBLE_EQ(deconv_discrepancy_eta(1e-4, 32, 32), 1.875e-10);
}

TEST(SyntheticDeconv, KernelHelpers) {
    const Tensor e = embed_kernel(motion_kernel_3x5(), {5, 7});
    EXPECT_NEAR(sum(e), 1.0, 1e-15);
    EXPECT_EQ(e(1, 1), motion_kernel_3x5()(0, 0));
    EXPECT_EQ(e(3, 5), motion_kernel_3x5()(2, 4));
    // embedding keeps the anchor, so the blur is unchanged
    const Tensor u = random_tensor({10, 10}, 18);
    EXPECT_LT(max_abs_diff(conv2d_periodic(u, e), conv2d_periodic(u, motion_kernel_3x5())), 1e-14);
    const Tensor uni = uniform_kernel({5, 7});
    EXPECT_DOUBLE_EQ(uni[0], 1.0 / 35.0);
    EXPECT_THROW(embed_kernel(motion_kernel_3x5(), {3, 3}), DimensionError);
}

// --- parallel MRI ----------------------------------------------------------

TEST(ParallelMri, OriginIsStationary) {
    const ParallelMriObjective E = random_mri(8, 2, 0, 1e-3);
    Tensor g;
    const double v = E.value_and_gradient(Tensor(Shape{E.dimension()}), g);
    double expect = 0.0;
    const Tensor mask = make_mask(MaskKind::Random, 8, 0, 0.5);
    for (std::size_t j = 0; j < 2; ++j) {
        ComplexTensor f = random_complex({8, 8}, 10 + j);
        for (std::size_t i = 0; i < f.size(); ++i) f[i] *= mask[i];
        expect += 0.5 * squared_norm(f);
    }
    EXPECT_NEAR(v, expect, 1e-12);
    EXPECT_EQ(max_abs(g), 0.0);
}

TEST(ParallelMri, FullMaskExactFitIsStationaryUpToLevelSet) {
    const std::size_t n = 8;
    const ComplexTensor u_bar = random_complex({n, n}, 21);
    const double eps = 1e-3;
    const ParallelMriObjective E(make_mask(MaskKind::Full, n), {dft2(u_bar)}, eps);
    const Tensor x = E.pack(u_bar, {ComplexTensor(Shape{n, n}, cplx(1.0, 0.0))});
    const Tensor g = E.gradient(x);
    const Tensor gu = extract_block(g, E.block(0));
    EXPECT_LT(max_abs_diff(gu, eps * pack_complex(u_bar)), 1e-13);
    EXPECT_NEAR(E.value(x), 0.5 * eps * squared_norm(x), 1e-12);
}

TEST(ParallelMri, FullMaskReducesByParseval) {
    const std::size_t n = 8;
    const ComplexTensor f = random_complex({n, n}, 22);
    const ParallelMriObjective E(make_mask(MaskKind::Full, n), {f}, 0.0);
    const ComplexTensor u = random_complex({n, n}, 23);
    const Tensor x = E.pack(u, {ComplexTensor(Shape{n, n}, cplx(1.0, 0.0))});
    const ComplexTensor back = idft2(f);
    double direct = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) direct += 0.5 * std::norm(u[i] - back[i]);
    EXPECT_NEAR(E.value(x), direct, 1e-10);
}

TEST(ParallelMri, GradientMatchesFiniteDifferences) {
    const ParallelMriObjective E = random_mri(8, 2, 24, std::numeric_limits<double>::epsilon());
    const Tensor x = random_tensor({E.dimension()}, 25);
    EXPECT_LE(finite_difference_gradient_check(E, x, x.size(), 26).max_rel_err, 1e-5);
    EXPECT_LE(worst_fd_error(E, x, 40, 27), 1e-4);
    const auto [v, g] = mri_energy_grad(E, x);
    EXPECT_DOUBLE_EQ(v, E.value(x));
    EXPECT_EQ(g.size(), E.dimension());
}

TEST(SyntheticMri, FullMaskExactDataLeavesLevelSetOnly) {
    const SyntheticMri s = make_synthetic_mri(3, 16, 2, MaskKind::Full);
    const ParallelMriObjective E(s.mask, s.data, 1e-4);
    const Tensor x = E.pack(s.u_true, s.b_true);
    EXPECT_NEAR(E.value(x), 0.5 * 1e-4 * squared_norm(x), 1e-12);
}

TEST(SyntheticMri, SpiralKeepsAboutAQuarter) {
    const double frac = mask_fraction(make_mask(MaskKind::Spiral, 64));
    EXPECT_GE(frac, 0.20);
    EXPECT_LE(frac, 0.30);
    const Tensor m = make_mask(MaskKind::Spiral, 64);
    EXPECT_EQ(m[0], 1.0); // DC sample
    for (double v : m) EXPECT_TRUE(v == 0.0 || v == 1.0);
}

TEST(SyntheticMri, RandomMaskIsSeedReproducible) {
    const Tensor a = make_mask(MaskKind::Random, 32, 5, 0.5), b = make_mask(MaskKind::Random, 32, 5, 0.5);
    EXPECT_EQ(max_abs_diff(a, b), 0.0);
    EXPECT_GT(max_abs_diff(a, make_mask(MaskKind::Random, 32, 6, 0.5)), 0.0);
    EXPECT_NEAR(mask_fraction(a), 0.5, 0.06);
    EXPECT_THROW(make_mask(MaskKind::Random, 8, 0, 1.5), ArgumentError);
    EXPECT_THROW(parse_mask_kind("radial"), ArgumentError);
}

TEST(SyntheticMri, RegulariserAndWeights) {
    const Tensor w = mri_dct_weights(6);
    EXPECT_EQ(w(0, 0), 1e-6);
    EXPECT_EQ(w(1, 1), 1e-6);
    EXPECT_EQ(w(0, 2), 5.0);
    EXPECT_EQ(w(2, 0), 5.0);
    const SyntheticMri s = make_synthetic_mri(1, 6, 3, MaskKind::Spiral);
    const ParallelMriObjective E(s.mask, s.data);
    const BregmanPtr R = make_mri_regularizer(E, 1.0, 1.0, w);
    EXPECT_EQ(R->name(), "separable(tv,weighted_dct_l1,weighted_dct_l1,weighted_dct_l1)");
    // the smooth coil maps are nearly free under the weights
    const Tensor x = E.pack(s.u_true, s.b_true);
    EXPECT_EQ(x.size(), 4u * 72u);
    EXPECT_TRUE(std::isfinite(R->value(x)));
}

// --- classifier ------------------------------------------------------------

TEST(Classifier, ZeroWeightsGiveZeroOutput) {
    const Tensor d = random_tensor({4, 5}, 30), y = one_hot({0, 1, 1, 0, 1}, 2);
    const std::vector<Tensor> layers = {Tensor({2, 3}), Tensor({3, 4})};
    const std::vector<Activation> acts(2);
    EXPECT_EQ(max_abs(nn_forward(layers, d, acts)), 0.0);
    const auto r = nn_energy_grad(layers, d, y, acts, {}, 0.0);
    EXPECT_DOUBLE_EQ(r.value, 0.5 * squared_norm(y));
}

TEST(Classifier, ActivationsMatchTheirFormulas) {
    const Tensor z({2, 3}, {-2.0, -0.3, 0.0, 0.4, 1.0, 2.5});
    Activation rect;
    const Tensor r = detail::activate(z, rect);
    EXPECT_LT(max_abs_diff(r, Tensor({2, 3}, {0.0, 0.0, 0.0, 0.4, 1.0, 1.0})), 1e-15);
    const Tensor gr = detail::activate_backward(z, r, Tensor({2, 3}, 1.0), rect);
    EXPECT_LT(max_abs_diff(gr, Tensor({2, 3}, {0.0, 0.0, 0.0, 1.0, 0.0, 0.0})), 1e-15);

    Activation sm;
    sm.kind = ActivationKind::SmoothMax;
    sm.beta = 5.0;
    sm.c = 0.2;
    const Tensor s = detail::activate(z, sm);
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double x = z[i], eb = std::exp(sm.beta * x), ec = std::exp(sm.beta * sm.c);
        EXPECT_NEAR(s[i], (x * eb + sm.c * ec) / (eb + ec), 1e-14);
    }

    Activation soft;
    soft.kind = ActivationKind::SoftMax;
    const Tensor p = detail::activate(random_tensor({4, 6}, 31, -30.0, 30.0), soft);
    for (std::size_t c = 0; c < 6; ++c) {
        double col = 0.0;
        for (std::size_t i = 0; i < 4; ++i) col += p(i, c);
        EXPECT_NEAR(col, 1.0, 1e-14);
    }
}

TEST(Classifier, SmoothMaxGradientMatchesFiniteDifferences) {
    Activation sm;
    sm.kind = ActivationKind::SmoothMax;
    sm.beta = 5.0;
    const Tensor d = random_tensor({4, 5}, 32), y = one_hot({0, 1, 1, 0, 1}, 2);
    const ClassifierObjective E(d, y, {{2, 3}, {3, 4}}, {sm, sm}, {}, 0.0);
    const Tensor x = E.pack(init_layers({{2, 3}, {3, 4}}, 33));
    EXPECT_LE(finite_difference_gradient_check(E, x, x.size(), 34).max_rel_err, 1e-4);
    EXPECT_LE(worst_fd_error(E, x, x.size(), 35), 1e-4);
}

TEST(Classifier, KlLossesGradientsMatchFiniteDifferences) {
    Activation sm, soft;
    sm.kind = ActivationKind::SmoothMax;
    soft.kind = ActivationKind::SoftMax;
    const Tensor d = random_tensor({5, 7}, 36), y = one_hot({0, 2, 1, 1, 0, 2, 1}, 3);
    for (LossKind kind : {LossKind::ShiftedKL, LossKind::SymmetrisedKL}) {
        Loss loss;
        loss.kind = kind;
        const ClassifierObjective E(d, y, {{3, 4}, {4, 5}}, {soft, sm}, loss, 1e-3);
        const Tensor x = E.pack(init_layers({{3, 4}, {4, 5}}, 37));
        EXPECT_LE(worst_fd_error(E, x, x.size(), 38), 1e-4);
    }
}

TEST(Classifier, RectifierGradientMatchesAwayFromKinks) {
    const Tensor d = random_tensor({6, 8}, 39, 0.0, 1.0);
    const Tensor y = one_hot({0, 1, 2, 0, 1, 2, 0, 1}, 3);
    const ClassifierObjective E(d, y, {{3, 5}, {5, 6}}, {Activation{}, Activation{}}, {});
    const Tensor x = E.pack(init_layers({{3, 5}, {5, 6}}, 40));
    EXPECT_LE(worst_fd_error(E, x, x.size(), 41), 1e-4);
}

TEST(Classifier, KlRejectsNegativeShiftedArguments) {
    Loss loss;
    loss.kind = LossKind::ShiftedKL;
    const Tensor x({1, 2}, {-0.5, 0.5}), y({1, 2}, {0.0, 1.0});
    EXPECT_THROW(detail::loss_value_grad(x, y, loss, nullptr), DomainError);
    EXPECT_NO_THROW(detail::loss_value_grad(Tensor({1, 2}, {0.2, 0.5}), y, loss, nullptr));
}

TEST(Classifier, ShapesMustChain) {
    const Tensor d = random_tensor({4, 5}, 42), y = one_hot({0, 1, 1, 0, 1}, 2);
    EXPECT_THROW(ClassifierObjective(d, y, {{2, 3}, {3, 5}}, {Activation{}, Activation{}}, {}), DimensionError);
    EXPECT_THROW(ClassifierObjective(d, y, {{3, 3}, {3, 4}}, {Activation{}, Activation{}}, {}), DimensionError);
    EXPECT_THROW(ClassifierObjective(d, y, {{2, 4}}, {}, {}), DimensionError);
}

TEST(Classifier, HelpersOnSmallExamples) {
    EXPECT_EQ(rank_of(Tensor({2, 2}, {3.0, 0.0, 0.0, 1e-10})), 1);
    EXPECT_EQ(rank_of(Tensor({2, 3})), 0);
    EXPECT_EQ(rank_of(random_tensor({4, 6}, 43)), 4);
    EXPECT_EQ(rank_of(Tensor({3, 3}, {1, 2, 3, 2, 4, 6, 1, 0, 0})), 2);
    EXPECT_THROW(rank_of(Tensor({2, 2}), 0.0), ArgumentError);

    const Tensor y = one_hot({2, 0, 1}, 3);
    EXPECT_EQ(y(2, 0), 1.0);
    EXPECT_EQ(sum(y), 3.0);
    EXPECT_THROW(one_hot({3}, 3), ArgumentError);
    const Tensor out({3, 3}, {0.1, 0.9, 0.8, 0.3, 0.0, 0.7, 0.6, 0.1, 0.1});
    EXPECT_DOUBLE_EQ(prediction_rate(out, y), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(prediction_rate(y, y), 1.0);
    // ties resolve to the lowest row
    EXPECT_EQ(column_argmax(Tensor({2, 1}, {0.5, 0.5}), 0), 0u);
}

TEST(Classifier, InitialLayersAreScaledAndFullRank) {
    const auto layers = init_layers({{10, 32}, {32, 784}}, 11);
    EXPECT_LE(max_abs(layers[0]), 1.0 / std::sqrt(32.0));
    EXPECT_LE(max_abs(layers[1]), 1.0 / std::sqrt(784.0));
    EXPECT_EQ(rank_of(layers[0]), 10);
    EXPECT_EQ(rank_of(layers[1]), 32);
    EXPECT_EQ(max_abs_diff(init_layers({{10, 32}}, 11)[0], layers[0]), 0.0);
}

TEST(Classifier, MnistSubsetLoads) {
    const std::filesystem::path dir = LINBREG_DATA_DIR "/mnist-subset";
    const Tensor images = read_idx_images(dir / "train-images-idx3-ubyte", 20);
    const std::vector<int> labels = read_idx_labels(dir / "train-labels-idx1-ubyte", 20);
    EXPECT_EQ(images.shape(), (Shape{20, 784}));
    EXPECT_EQ(labels.size(), 20u);
    EXPECT_LE(max_abs(images), 255.0);
    EXPECT_GT(max_abs(images), 0.0);
    for (int l : labels) EXPECT_TRUE(l >= 0 && l <= 9);
    EXPECT_THROW(read_idx_images(dir / "train-labels-idx1-ubyte"), IoError);
    EXPECT_THROW(read_idx_labels(dir / "missing"), IoError);
}

// --- counterexample --------------------------------------------------------

TEST(Counterexample, IteratesStickToTheConstraintBoundary) {
    const CounterexampleTrajectory t = counterexample_run(0.5, 3);
    ASSERT_EQ(t.u.size(), 4u);
    EXPECT_EQ(t.u[0], 0.5);
    for (std::size_t k = 1; k <= 3; ++k) EXPECT_EQ(t.u[k], 0.0);
    // recursion from q^0 = 0, tau = 1: q^1 = -(0 - u^0 + E'(u^0)) = -1, then q^{k+1} = q^k - E'(0) = q^k - 1
    EXPECT_EQ(t.q[0], 0.0);
    EXPECT_EQ(t.q[1], -1.0);
    EXPECT_EQ(t.q[3], -3.0);
    // E'(0) = 1: the limit 0 is not the critical point -1
    EXPECT_EQ(t.final_gradient, 1.0);
}

TEST(Counterexample, DualGrowsWithSlopeOne) {
    for (double u0 : {0.1, 0.5, 2.0, 7.0}) {
        const CounterexampleTrajectory t = counterexample_run(u0, 50);
        for (std::size_t k = 2; k < t.q.size(); ++k) EXPECT_EQ(t.q[k - 1] - t.q[k], 1.0) << u0;
        EXPECT_EQ(t.u.back(), 0.0);
        EXPECT_TRUE(certify_subgradient(NonnegIndicator(), Tensor::vector({t.u.back()}), Tensor::vector({t.q.back()})));
    }
    EXPECT_THROW(counterexample_run(0.0, 3), ArgumentError);
    EXPECT_THROW(counterexample_run(1.0, -1), ArgumentError);
}

TEST(Counterexample, ObjectiveGradientMatchesFiniteDifferences) {
    const FunctionObjective E = counterexample_objective();
    for (double u : {-3.0, -1.0, 0.0, 0.7}) {
        EXPECT_LE(finite_difference_gradient_check(E, Tensor::vector({u}), 1, 0).max_rel_err, 1e-8);
    }
    EXPECT_EQ(E.gradient(Tensor::vector({-1.0}))[0], 0.0);
}
