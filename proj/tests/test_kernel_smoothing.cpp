#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

using namespace sbf;

namespace {

const Kernel kEpa{KernelName::epanechnikov};
const Kernel kAll[] = {{KernelName::epanechnikov}, {KernelName::quartic}, {KernelName::uniform}};

OccurrenceExposureGrid random_rectangle(testutil::Gen& g, std::size_t n0, std::size_t n1) {
    auto oe = testutil::rectangle(n0, n1);
    for (std::size_t f = 0; f < oe.shape.size(); ++f) {
        oe.exposure[f] = g.uniform(1.0, 5.0);
        oe.occurrence[f] = g.uniform(0.0, 1.0) * oe.exposure[f];
    }
    return oe;
}

}  // namespace

TEST(Kernel, AnchorAndSupport) {
    EXPECT_DOUBLE_EQ(kEpa(0.0), 0.75);
    for (const auto& k : kAll) {
        EXPECT_EQ(k(1.0001), 0.0);
        EXPECT_EQ(k(-1.5), 0.0);
        for (double u : {0.1, 0.33, 0.7, 0.99}) EXPECT_DOUBLE_EQ(k(u), k(-u));
    }
}

TEST(Kernel, IntegratesToOne) {
    for (const auto& k : kAll) {
        // composite Simpson, exact for the polynomial pieces up to rounding
        const int n = 2000;
        double s = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double u = -1.0 + 2.0 * i / n;
            s += (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0)) * k(u);
        }
        EXPECT_NEAR(s * (2.0 / n) / 3.0, 1.0, 1e-10) << k.str();
        EXPECT_NEAR(k.cdf(1.0), 1.0, 1e-15);
        EXPECT_NEAR(k.cdf(-1.0), 0.0, 1e-15);
    }
}

TEST(Kernel, CellMassMatchesQuadrature) {
    testutil::Gen g(1);
    for (const auto& k : kAll)
        for (int i = 0; i < 200; ++i) {
            const double x = g.uniform(0, 10), lo = g.uniform(0, 10), b = g.uniform(0.3, 4);
            const double hi = lo + g.uniform(0.1, 2);
            EXPECT_NEAR(k.mass(x, lo, hi, b), testutil::kernel_cell_mass(k, x, lo, hi, b), 1e-9);
        }
}

TEST(LocalConstant, KappaInteriorIsOne) {
    Shape s = Shape::square(30);
    EXPECT_NEAR(kappa(s, kEpa, {3.0, 3.0}, {15, 15}), 1.0, 1e-10);
    EXPECT_GT(kappa(s, kEpa, {3.0, 3.0}, {0, 15}), 1.0);
}

TEST(LocalConstant, ConstantRatioOnRectangle) {
    testutil::Gen g(2);
    auto oe = random_rectangle(g, 8, 9);
    for (std::size_t f = 0; f < oe.shape.size(); ++f) oe.occurrence[f] = 0.37 * oe.exposure[f];
    for (double b : {0.7, 1.5, 4.0}) {
        auto h = smooth_local_constant(oe, kEpa, {b, b});
        for (std::size_t f = 0; f < oe.shape.size(); ++f) {
            ASSERT_TRUE(h.valid[f]);
            EXPECT_NEAR(h.hazard[f], 0.37, 1e-12);
        }
    }
}

TEST(LocalConstant, UniformKernelConvolutionOracle) {
    auto oe = testutil::rectangle(5, 5);
    for (auto& e : oe.exposure) e = 1.0;
    oe.occurrence[oe.shape.flat(2, 1)] = 4.0;
    const Kernel k{KernelName::uniform};
    const double b = 1.5;
    auto h = smooth_local_constant(oe, k, {b, b});
    for (std::size_t i0 = 0; i0 < 5; ++i0)
        for (std::size_t i1 = 0; i1 < 5; ++i1) {
            const double x0 = i0 + 0.5, x1 = i1 + 0.5;
            const double w = testutil::kernel_cell_mass(k, x0, 2, 3, b) * testutil::kernel_cell_mass(k, x1, 1, 2, b);
            const double kap = 1.0 / (testutil::kernel_cell_mass(k, x0, 0, 5, b) * testutil::kernel_cell_mass(k, x1, 0, 5, b));
            EXPECT_NEAR(h.smoothed_occurrence[oe.shape.flat(i0, i1)], kap * w * 4.0, 1e-12);
        }
}

TEST(LocalConstant, MassPreservationInterior) {
    auto oe = testutil::rectangle(30, 30);
    testutil::Gen g(4);
    double total = 0.0;
    for (std::size_t i0 = 10; i0 < 20; ++i0)
        for (std::size_t i1 = 10; i1 < 20; ++i1) {
            const double v = g.uniform(0, 10);
            oe.occurrence[oe.shape.flat(i0, i1)] = v;
            total += v;
        }
    for (auto& e : oe.exposure) e = 1.0;
    for (const auto& k : kAll) {
        auto h = smooth_local_constant(oe, k, {2.5, 3.0});
        EXPECT_NEAR(integrate(oe.shape, h.smoothed_occurrence, {}), total, 1e-8 * total) << k.str();
    }
}

TEST(LocalConstant, WarningAndErrors) {
    auto oe = testutil::rectangle(4, 4);
    for (auto& e : oe.exposure) e = 1.0;
    auto h = smooth_local_constant(oe, kEpa, {0.5, 2.0});
    EXPECT_FALSE(h.warnings.empty());
    auto zero = testutil::rectangle(4, 4);
    EXPECT_THROW(smooth_local_constant(zero, kEpa, {2.0, 2.0}), std::runtime_error);
    EXPECT_THROW(smooth_local_constant(oe, kEpa, {2.0}), std::invalid_argument);
    EXPECT_THROW(smooth_local_constant(oe, kEpa, {2.0, -1.0}), std::invalid_argument);
}

TEST(LocalLinear, SymmetricExposureEqualsLocalConstant) {
    auto oe = testutil::rectangle(21, 21);
    testutil::Gen g(6);
    // exposure symmetric about the centre cell (10, 10)
    for (std::size_t i0 = 0; i0 <= 10; ++i0)
        for (std::size_t i1 = 0; i1 <= 10; ++i1) {
            const double e = g.uniform(1, 3);
            for (std::size_t a : {i0, 20 - i0})
                for (std::size_t b : {i1, 20 - i1}) oe.exposure[oe.shape.flat(a, b)] = e;
        }
    for (std::size_t f = 0; f < oe.shape.size(); ++f) oe.occurrence[f] = g.uniform(0, 1) * oe.exposure[f];
    const std::size_t c = oe.shape.flat(10, 10);
    auto ll = smooth_local_linear(oe, kEpa, {3.0, 4.0});
    auto lc = smooth_local_constant(oe, kEpa, {3.0, 4.0});
    EXPECT_NEAR(ll.hazard[c], lc.hazard[c], 1e-10);
}

TEST(LocalLinear, ConstantRatio) {
    testutil::Gen g(8);
    auto oe = testutil::lower_triangle(10);
    for (std::size_t f = 0; f < oe.shape.size(); ++f)
        if (oe.support[f]) {
            oe.exposure[f] = g.uniform(1, 4);
            oe.occurrence[f] = 0.2 * oe.exposure[f];
        }
    auto h = smooth_local_linear(oe, kEpa, {2.0, 2.0});
    for (std::size_t f = 0; f < oe.shape.size(); ++f)
        if (h.valid[f]) EXPECT_NEAR(h.hazard[f], 0.2, 1e-10);
}

TEST(LocalLinear, TriangleMatchesBruteForceDisplays) {
    testutil::Gen g(10);
    auto oe = testutil::lower_triangle(6);
    for (std::size_t f = 0; f < oe.shape.size(); ++f)
        if (oe.support[f]) {
            oe.exposure[f] = g.uniform(2, 8);
            oe.occurrence[f] = std::floor(g.uniform(0, oe.exposure[f]));
        }
    auto h = smooth_local_linear(oe, kEpa, {2.0, 2.0});
    auto [oh, eh] = testutil::brute_local_linear(oe, kEpa, {2.0, 2.0});
    EXPECT_EQ(h.fallback_count, 0u);
    for (std::size_t f = 0; f < oe.shape.size(); ++f) {
        if (!oe.support[f]) continue;
        EXPECT_NEAR(h.smoothed_exposure[f], eh[f], 1e-10);
        EXPECT_NEAR(h.raw_occurrence[f], oh[f], 1e-10);
    }
}

TEST(LocalLinear, ReproducesLinearHazard) {
    auto oe = testutil::rectangle(25, 25);
    const double a = 0.5, b0 = 0.02, b1 = -0.01;
    for (std::size_t i0 = 0; i0 < 25; ++i0)
        for (std::size_t i1 = 0; i1 < 25; ++i1) {
            auto f = oe.shape.flat(i0, i1);
            oe.exposure[f] = 1.0;
            oe.occurrence[f] = a + b0 * (i0 + 0.5) + b1 * (i1 + 0.5);
        }
    auto h = smooth_local_linear(oe, kEpa, {3.0, 2.5});
    for (std::size_t i0 = 4; i0 < 21; ++i0)
        for (std::size_t i1 = 4; i1 < 21; ++i1)
            EXPECT_NEAR(h.hazard[oe.shape.flat(i0, i1)], a + b0 * (i0 + 0.5) + b1 * (i1 + 0.5), 1e-6);
}

TEST(Smoothing, ReflectionCommutes) {
    testutil::Gen g(12);
    auto oe = random_rectangle(g, 9, 7);
    auto flip = oe;
    for (std::size_t i0 = 0; i0 < 9; ++i0)
        for (std::size_t i1 = 0; i1 < 7; ++i1) {
            flip.exposure[oe.shape.flat(8 - i0, i1)] = oe.exposure[oe.shape.flat(i0, i1)];
            flip.occurrence[oe.shape.flat(8 - i0, i1)] = oe.occurrence[oe.shape.flat(i0, i1)];
        }
    for (auto m : {Smoother::local_constant, Smoother::local_linear}) {
        auto h = smooth(oe, kEpa, {2.2, 1.7}, m);
        auto hf = smooth(flip, kEpa, {2.2, 1.7}, m);
        for (std::size_t i0 = 0; i0 < 9; ++i0)
            for (std::size_t i1 = 0; i1 < 7; ++i1)
                EXPECT_NEAR(h.hazard[oe.shape.flat(i0, i1)], hf.hazard[oe.shape.flat(8 - i0, i1)], 1e-12);
    }
}

TEST(Smoothing, HazardNonnegativeAndValidInsideSupport) {
    testutil::Gen g(13);
    for (int rep = 0; rep < 20; ++rep) {
        auto tri = testutil::random_triangle(g, 4 + g.index(10), 20);
        auto oe = build_occurrence_exposure(tri);
        if (oe.total_occurrence() == 0) continue;
        for (auto m : {Smoother::local_constant, Smoother::local_linear}) {
            auto h = smooth(oe, kEpa, {g.uniform(1, 3), g.uniform(1, 3)}, m);
            for (std::size_t f = 0; f < oe.shape.size(); ++f) {
                if (h.valid[f]) EXPECT_TRUE(oe.support[f]);
                if (h.valid[f]) EXPECT_GE(h.hazard[f], 0.0);
            }
        }
    }
}

TEST(Smoothing, LeaveOutMatchesResmoothing) {
    testutil::Gen g(14);
    auto tri = testutil::random_triangle(g, 9, 15);
    auto oe = build_occurrence_exposure(tri);
    auto plan = make_plan(oe, kEpa, {1.5, 2.0}, Smoother::local_linear);
    auto full = apply_plan(plan, oe.occurrence);
    for (std::size_t c = 0; c < oe.shape.size(); ++c) {
        if (!oe.support[c] || oe.occurrence[c] == 0.0) continue;
        auto lo = leave_out(plan, full, c, oe.occurrence[c]);
        auto occ = oe.occurrence;
        occ[c] = 0.0;
        auto direct = apply_plan(plan, occ);
        EXPECT_EQ(lo.clip_count, direct.clip_count);
        for (std::size_t f = 0; f < oe.shape.size(); ++f) EXPECT_NEAR(lo.hazard[f], direct.hazard[f], 1e-12);
    }
}

TEST(Smoothing, ThreeDimensionalConstantRatio) {
    OccurrenceExposureGrid oe(Shape({Axis{5, 1.0, 0.0}, Axis{4, 0.5, 0.0}, Axis{6, 2.0, 1.0}}));
    testutil::Gen g(15);
    for (std::size_t f = 0; f < oe.shape.size(); ++f) {
        oe.exposure[f] = g.uniform(1, 2);
        oe.occurrence[f] = 1.5 * oe.exposure[f];
    }
    for (auto m : {Smoother::local_constant, Smoother::local_linear}) {
        auto h = smooth(oe, kEpa, {1.5, 1.0, 3.0}, m);
        for (std::size_t f = 0; f < oe.shape.size(); ++f) EXPECT_NEAR(h.hazard[f], 1.5, 1e-10);
    }
}

// Noise-free smooth surface on [0,1]^2 at two resolutions with halved bandwidth: the interior
// gap between local linear and local constant shrinks.
TEST(Smoothing, LocalLinearAndConstantAgreeAsBandwidthShrinks) {
    auto gap = [](std::size_t n, double b) {
        auto oe = testutil::rectangle(n, n, 1.0 / n, 1.0 / n);
        for (std::size_t i0 = 0; i0 < n; ++i0)
            for (std::size_t i1 = 0; i1 < n; ++i1) {
                const double x = (i0 + 0.5) / n, y = (i1 + 0.5) / n;
                auto f = oe.shape.flat(i0, i1);
                oe.exposure[f] = 1.0 + x + 0.5 * y * y;
                oe.occurrence[f] = (1.0 + std::sin(3 * x) * std::cos(2 * y)) * oe.exposure[f];
            }
        auto ll = smooth_local_linear(oe, kEpa, {b, b});
        auto lc = smooth_local_constant(oe, kEpa, {b, b});
        double worst = 0.0;
        for (std::size_t i0 = 0; i0 < n; ++i0)
            for (std::size_t i1 = 0; i1 < n; ++i1) {
                const double x = (i0 + 0.5) / n, y = (i1 + 0.5) / n;
                if (x < 0.3 || x > 0.7 || y < 0.3 || y > 0.7) continue;
                auto f = oe.shape.flat(i0, i1);
                worst = std::max(worst, std::abs(ll.hazard[f] - lc.hazard[f]));
            }
        return worst;
    };
    const double g1 = gap(20, 0.25), g2 = gap(40, 0.125);
    EXPECT_LT(g2, g1);
    EXPECT_LT(g2, 0.5 * g1);
}
