#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "eafnet/polarimetry.hpp"

using namespace eafnet;
using namespace eafnet::polar;

namespace {

IntensityQuad quad_of(double i0, double i45, double i90, double i135)
{
    return {ImageD(1, 1, 1, i0), ImageD(1, 1, 1, i45), ImageD(1, 1, 1, i90), ImageD(1, 1, 1, i135)};
}

StokesMap stokes_of(double s0, double s1, double s2)
{
    return {ImageD(1, 1, 1, s0), ImageD(1, 1, 1, s1), ImageD(1, 1, 1, s2)};
}

// Random physically valid Stokes pixel: s0 in (0, 2], |(s1, s2)| <= s0.
void random_stokes(std::mt19937_64& rng, double& s0, double& s1, double& s2)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    s0 = 2.0 * u(rng) + 1e-6;
    const double p = u(rng), phi = 2 * std::numbers::pi * u(rng);
    s1 = s0 * p * std::cos(phi);
    s2 = s0 * p * std::sin(phi);
}

}  // namespace

TEST(Stokes, UnpolarizedLight)
{
    auto s = compute_stokes(quad_of(0.5, 0.5, 0.5, 0.5));
    EXPECT_EQ(s.s0.data[0], 1.0);
    EXPECT_EQ(s.s1.data[0], 0.0);
    EXPECT_EQ(s.s2.data[0], 0.0);
}

TEST(Stokes, PartiallyPolarized)
{
    auto s = compute_stokes(quad_of(0.8, 0.5, 0.2, 0.5));
    EXPECT_NEAR(s.s0.data[0], 1.0, 1e-15);
    EXPECT_NEAR(s.s1.data[0], 0.6, 1e-15);
    EXPECT_NEAR(s.s2.data[0], 0.0, 1e-15);
}

TEST(Stokes, FullyHorizontal)
{
    auto s = compute_stokes(quad_of(1.0, 0.5, 0.0, 0.5));
    EXPECT_EQ(s.s0.data[0], 1.0);
    EXPECT_EQ(s.s1.data[0], 1.0);
    EXPECT_EQ(s.s2.data[0], 0.0);
}

TEST(Stokes, RejectsMismatchedPlanes)
{
    IntensityQuad q{ImageD(1, 2, 2), ImageD(1, 2, 2), ImageD(1, 2, 3), ImageD(1, 2, 2)};
    EXPECT_THROW(compute_stokes(q), std::invalid_argument);
}

TEST(Stokes, ConsistencyResidualIsReportedNotEnforced)
{
    auto q = quad_of(0.6, 0.5, 0.2, 0.5);
    EXPECT_NO_THROW(compute_stokes(q));
    EXPECT_NEAR(consistency_residual(q).data[0], 0.2, 1e-15);
}

TEST(Dolp, HandCases)
{
    EXPECT_EQ(compute_dolp(stokes_of(1, 0, 0)).data[0], 0.0);
    EXPECT_EQ(compute_dolp(stokes_of(1, 1, 0)).data[0], 1.0);
    EXPECT_NEAR(compute_dolp(stokes_of(1.0, 0.6, 0.0)).data[0], 0.6, 1e-15);
    // dark pixel convention
    EXPECT_EQ(compute_dolp(stokes_of(0, 0, 0)).data[0], 0.0);
    EXPECT_EQ(compute_dolp(stokes_of(1e-13, 1e-13, 0)).data[0], 0.0);
}

TEST(Aolp, HandCases)
{
    EXPECT_EQ(compute_aolp(stokes_of(1, 0, 0)).data[0], 0.0);
    EXPECT_NEAR(compute_aolp(stokes_of(1, 1, 0)).data[0], 45.0, 1e-12);
    EXPECT_NEAR(compute_aolp(stokes_of(1, 0, -1)).data[0], 90.0, 1e-12);
    // negative zeros must not leak through atan2's signed-zero branch
    EXPECT_EQ(compute_aolp(stokes_of(1, -0.0, -0.0)).data[0], 0.0);
}

TEST(Aolp, StandardConventionSwapsArguments)
{
    // (s1, s2) = (1, 0): atan2(s1, s2) order gives 45, textbook order gives 0.
    EXPECT_NEAR(compute_aolp(stokes_of(1, 1, 0), AolpConvention::standard).data[0], 0.0, 1e-12);
    EXPECT_NEAR(compute_aolp(stokes_of(1, 0, 1), AolpConvention::standard).data[0], 45.0, 1e-12);
}

TEST(Aolp, RangeProperty)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 100000; ++i) {
        const double a = aolp_of(u(rng), u(rng));
        ASSERT_GE(a, 0.0);
        ASSERT_LT(a, 180.0);
    }
    // values that round to exactly -0 after halving
    EXPECT_LT(aolp_of(-1e-300, 1.0), 180.0);
}

TEST(Dolp, RangeAndSaturationProperty)
{
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 100000; ++i) {
        const double d = dolp_of(std::abs(u(rng)), u(rng), u(rng));
        ASSERT_GE(d, 0.0);
        ASSERT_LE(d, 1.0);
    }
    for (int i = 0; i < 1000; ++i) {
        const double phi = u(rng), s0 = std::abs(u(rng)) + 0.1;
        EXPECT_NEAR(dolp_of(s0, s0 * std::cos(phi), s0 * std::sin(phi)), 1.0, 1e-9);
    }
}

TEST(Synthesize, HandCases)
{
    auto q = synthesize_intensities(stokes_of(1, 0, 0));
    for (const ImageD* p : {&q.i0, &q.i45, &q.i90, &q.i135}) EXPECT_EQ(p->data[0], 0.5);
    q = synthesize_intensities(stokes_of(1, 1, 0));
    EXPECT_EQ(q.i0.data[0], 1.0);
    EXPECT_EQ(q.i90.data[0], 0.0);
    EXPECT_EQ(q.i45.data[0], 0.5);
    EXPECT_EQ(q.i135.data[0], 0.5);
}

TEST(Synthesize, RejectsNonPhysicalState)
{
    EXPECT_THROW(synthesize_intensities(stokes_of(1, 0.9, 0.9)), std::invalid_argument);
    EXPECT_THROW(synthesize_intensities(stokes_of(-1, 0, 0)), std::invalid_argument);
}

TEST(Synthesize, RoundTripProperty)
{
    std::mt19937_64 rng(13);
    const int n = 10000;
    StokesMap s{ImageD(1, 100, 100), ImageD(1, 100, 100), ImageD(1, 100, 100)};
    for (int i = 0; i < n; ++i) random_stokes(rng, s.s0.data[i], s.s1.data[i], s.s2.data[i]);
    auto back = compute_stokes(synthesize_intensities(s));
    for (int i = 0; i < n; ++i) {
        ASSERT_LT(std::abs(back.s0.data[i] - s.s0.data[i]), 1e-9);
        ASSERT_LT(std::abs(back.s1.data[i] - s.s1.data[i]), 1e-9);
        ASSERT_LT(std::abs(back.s2.data[i] - s.s2.data[i]), 1e-9);
    }
    EXPECT_EQ(compute_stokes(synthesize_intensities(s)).s0, back.s0);  // deterministic
}

TEST(Fresnel, NormalIncidence)
{
    auto f = fresnel_coefficients(1.0, 1.5, 0.0);
    EXPECT_NEAR(f.r_s, -0.2, 1e-12);
    EXPECT_NEAR(f.r_p, 0.2, 1e-12);
    EXPECT_NEAR(f.t_s, 0.8, 1e-12);
    EXPECT_NEAR(f.t_p, 0.8, 1e-12);
    EXPECT_EQ(f.theta_t_deg, 0.0);
}

TEST(Fresnel, BrewsterAngle)
{
    for (double ratio : {1.33, 1.5, 2.4}) {
        auto f = fresnel_coefficients(1.0, ratio, brewster_angle_deg(1.0, ratio));
        EXPECT_NEAR(f.r_p, 0.0, 1e-9) << ratio;
    }
    EXPECT_NEAR(brewster_angle_deg(1.0, 1.5), 56.309932474020215, 1e-12);
}

TEST(Fresnel, NoInterface)
{
    auto f = fresnel_coefficients(1.4, 1.4, 37.0);
    EXPECT_NEAR(f.r_s, 0.0, 1e-15);
    EXPECT_NEAR(f.r_p, 0.0, 1e-15);
    EXPECT_NEAR(f.t_s, 1.0, 1e-15);
    EXPECT_NEAR(f.t_p, 1.0, 1e-15);
}

TEST(Fresnel, TotalInternalReflectionIsAnError)
{
    EXPECT_THROW(fresnel_coefficients(1.5, 1.0, 60.0), std::domain_error);
    EXPECT_NO_THROW(fresnel_coefficients(1.5, 1.0, 30.0));
    EXPECT_THROW(fresnel_coefficients(1.0, 1.5, 90.0), std::invalid_argument);
    EXPECT_THROW(fresnel_coefficients(0.0, 1.5, 10.0), std::invalid_argument);
}

TEST(Fresnel, CoefficientBoundsAndSingleZeroCrossing)
{
    for (double n2 : {1.2, 1.5, 2.4}) {
        int sign_changes = 0;
        double prev = fresnel_coefficients(1.0, n2, 0.0).r_p;
        for (double t = 0.01; t < 90.0; t += 0.01) {
            auto f = fresnel_coefficients(1.0, n2, t);
            EXPECT_LE(std::abs(f.r_s), 1.0);
            EXPECT_LE(std::abs(f.r_p), 1.0);
            if ((f.r_p < 0) != (prev < 0)) ++sign_changes;
            prev = f.r_p;
        }
        EXPECT_EQ(sign_changes, 1) << n2;
    }
}

TEST(Flip, ValueMap)
{
    EXPECT_EQ(flip_aolp(30.0), 150.0);
    EXPECT_EQ(flip_aolp(0.0), 0.0);
    EXPECT_EQ(flip_aolp(90.0), 90.0);
    ImageD a(1, 1, 2);
    a.data = {30.0, 0.0};
    auto f = flip_aolp_values(a);
    EXPECT_EQ(f.data[0], 150.0);
    EXPECT_EQ(f.data[1], 0.0);
}

TEST(Flip, InvolutionProperty)
{
    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> u(0.0, 180.0);
    for (int i = 0; i < 100000; ++i) {
        const double a = u(rng);
        const double f = flip_aolp(a);
        ASSERT_GE(f, 0.0);
        ASSERT_LT(f, 180.0);
        ASSERT_NEAR(flip_aolp(f), a, 1e-12);
    }
}

TEST(ChannelMean, AveragesStokesComponents)
{
    StokesMap s{ImageD(3, 1, 1), ImageD(3, 1, 1), ImageD(3, 1, 1)};
    s.s0.data = {1.0, 2.0, 3.0};
    s.s1.data = {0.5, 0.0, -0.5};
    s.s2.data = {0.3, 0.3, 0.3};
    auto m = channel_mean(s);
    EXPECT_EQ(m.s0.channels, 1);
    EXPECT_NEAR(m.s0.data[0], 2.0, 1e-15);
    EXPECT_NEAR(m.s1.data[0], 0.0, 1e-15);
    EXPECT_NEAR(m.s2.data[0], 0.3, 1e-15);
}

TEST(ReflectedDolp, FullAtBrewsterAndZeroAtNormal)
{
    EXPECT_NEAR(reflected_dolp(1.0, 1.5, brewster_angle_deg(1.0, 1.5)), 1.0, 1e-12);
    EXPECT_NEAR(reflected_dolp(1.0, 1.5, 0.0), 0.0, 1e-12);
}
