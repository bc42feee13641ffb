#include <boltzsym/grids.hpp>

#include <gtest/gtest.h>

#include <cstdio>

using namespace boltzsym;

TEST(Grids, SpecInvariants)
{
    GridSpec g(8, 16);
    EXPECT_DOUBLE_EQ(g.dv() * g.N, 2 * g.R);
    for (int k = 0; k < g.N; ++k) EXPECT_DOUBLE_EQ(g.eta(k), -g.eta(g.N - 1 - k));
    EXPECT_EQ(g.size(), 4096u);
    EXPECT_THROW(GridSpec(8, 7), InputError);
    EXPECT_THROW(GridSpec(8, 16, 2), InputError);
}

TEST(Grids, SampleUnitGaussian)
{
    GridSpec g(8, 16);
    auto t = TestFunction::gaussian({}, 1.3);
    auto f = sample(t, g);
    double c = std::pow(1.3 * std::sqrt(pi), -1.5);
    for (std::size_t i = 0; i < g.size(); i += 37) {
        Vec3 v = g.point(i);
        EXPECT_NEAR(std::abs(f[i] - c * std::exp(-norm2(v) / (2 * 1.3 * 1.3))), 0, 1e-14);
    }
}

TEST(Grids, HermiteParity)
{
    GridSpec g(8, 16);
    auto f = sample(TestFunction::gaussian({}, 1.0, {1, 0, 0}), g);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(std::abs(f[i] + f[g.mirror(i)]), 0, 1e-14);
}

TEST(Grids, ModulationKeepsModulus)
{
    GridSpec g(8, 16);
    auto a = sample(TestFunction::gaussian({0.5, 0, 0}, 1.0), g);
    auto b = sample(TestFunction::gaussian({0.5, 0, 0}, 1.0, {0, 0, 0}, {1.0, -2.0, 0.3}), g);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(std::abs(a[i]), std::abs(b[i]), 1e-14);
}

TEST(Grids, NormOfSqrtMaxwellian)
{
    GridSpec g(8, 32);
    auto f = sample_fn([](Vec3 v) { return cplx(sqrt_maxwellian(v)); }, g);
    EXPECT_NEAR(l2_norm(f), 1.0, 1e-6);
    EXPECT_EQ(l2_norm(GridField(g)), 0.0);
}

TEST(Grids, Plancherel)
{
    GridSpec g(6, 16);
    auto f = sample(TestFunction::gaussian({0.3, -0.4, 0.2}, 0.9, {1, 2, 0}, {0.5, 0, 0}), g);
    EXPECT_NEAR(l2_norm(f), l2_norm_fourier(f), 1e-10 * l2_norm(f));
    auto back = dft_inverse(g, dft_forward(f));
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(std::abs(back[i] - f[i]), 0, 1e-12);
}

TEST(Grids, DftMatchesClosedForm)
{
    GridSpec g(8, 32);
    auto t = TestFunction::gaussian({0.5, 0, -0.3}, 1.1, {0, 1, 2}, {0.2, 0, 0});
    auto d = dft_forward(sample(t, g));
    double worst = 0;
    for (std::size_t k = 0; k < g.size(); k += 97) worst = std::max(worst, std::abs(d[k] - t.fourier(g.freq(k))));
    EXPECT_LT(worst, 1e-8);
}

// 1D radial quadrature of int <eta>^{2 sigma} |fhat|^2 for a centred Gaussian.
static double radial_oracle(double scale, double sigma)
{
    Rule1D q = composite(uniform_edges(0, 40 / scale, 0.25), 20);
    double s = 0;
    double c = std::pow(2 * pi, 3) * std::pow(scale * scale / pi, 1.5);
    for (std::size_t i = 0; i < q.size(); ++i) {
        double r = q.x[i];
        s += q.w[i] * 4 * pi * r * r * std::pow(1 + r * r, sigma) * c * std::exp(-scale * scale * r * r);
    }
    return std::sqrt(s / std::pow(2 * pi, 3));
}

TEST(Grids, FractionalNormAgainstRadialOracle)
{
    GridSpec g(8, 32);
    for (double sig : {0.5, 1.0, 1.5}) {
        auto f = sample(TestFunction::gaussian({}, 1.0), g);
        EXPECT_NEAR(weighted_fractional_norm(f, 0, sig), radial_oracle(1.0, sig), 1e-6);
    }
}

TEST(Grids, FractionalNormIdentityCase)
{
    GridSpec g(8, 16);
    auto f = sample(TestFunction::gaussian({1, 0, 0}, 0.8), g);
    EXPECT_NEAR(weighted_fractional_norm(f, 0, 0), l2_norm(f), 1e-14);
}

TEST(Grids, WedgeNormStableUnderRefinement)
{
    auto t = TestFunction::gaussian({}, 1.0);
    double a = weighted_fractional_norm(sample(t, GridSpec(6, 12)), 0, 1.0, NormMode::wedge);
    double b = weighted_fractional_norm(sample(t, GridSpec(6, 24)), 0, 1.0, NormMode::wedge);
    EXPECT_LT(std::abs(a - b) / b, 0.01);
    EXPECT_THROW(weighted_fractional_norm(sample(t, GridSpec(6, 16, 1)), 0, 1.0, NormMode::wedge), InputError);
}

TEST(Grids, WedgeNormParity)
{
    GridSpec g(6, 12);
    auto t = TestFunction::gaussian({0.7, -0.2, 0.1}, 0.9, {1, 0, 0});
    auto f = sample(t, g);
    GridField m(g);
    for (std::size_t i = 0; i < g.size(); ++i) m[i] = f[g.mirror(i)];
    EXPECT_NEAR(weighted_fractional_norm(f, 1.0, 0.5, NormMode::wedge),
                weighted_fractional_norm(m, 1.0, 0.5, NormMode::wedge), 1e-12);
    EXPECT_NEAR(weighted_fractional_norm(f, 1.0, 0.5), weighted_fractional_norm(m, 1.0, 0.5), 1e-12);
}

TEST(Grids, CorpusDeterministicAndPrepended)
{
    auto a = corpus(42, 12), b = corpus(42, 12);
    ASSERT_EQ(a.size(), 12u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].label, b[i].label);
        EXPECT_DOUBLE_EQ(a[i].center.x, b[i].center.x);
        EXPECT_DOUBLE_EQ(a[i].scale, b[i].scale);
    }
    auto n = corpus(7, 5);
    ASSERT_EQ(n.size(), 5u);
    EXPECT_EQ(n[0].label, "sqrt_mu");
    EXPECT_EQ(n[4].label, "energy_sqrt_mu");
    EXPECT_THROW(corpus(1, 0), InputError);
}

TEST(Grids, NullSpaceFamilyValues)
{
    auto ns = null_space_family();
    Vec3 v{0.4, -1.1, 0.7};
    EXPECT_NEAR(std::abs(ns[0](v) - sqrt_maxwellian(v)), 0, 1e-15);
    double e = std::abs(ns[4](v)) / (norm2(v) * sqrt_maxwellian(v));
    Vec3 w{-1.5, 0.2, 0.9};
    EXPECT_NEAR(e, std::abs(ns[4](w)) / (norm2(w) * sqrt_maxwellian(w)), 1e-12);
    for (auto& t : ns) EXPECT_NEAR(t.norm2_exact(), 1.0, 1e-12);
}

TEST(Grids, CorpusTruncationMass)
{
    GridSpec g(8, 48);
    for (const auto& t : corpus(5, 20)) {
        EXPECT_LT(t.tail_mass_bound(8.0), 1e-8);
        double n = l2_norm(sample(t, g));
        EXPECT_NEAR(n * n, t.norm2_exact(), 1e-8) << t.label;
    }
}

TEST(Grids, SpectralConvergenceOfNorms)
{
    auto t = TestFunction::gaussian({0.2, 0.1, -0.3}, 0.7, {1, 0, 1});
    double e1 = std::abs(std::pow(l2_norm(sample(t, GridSpec(6, 12))), 2) - 1);
    double e2 = std::abs(std::pow(l2_norm(sample(t, GridSpec(6, 24))), 2) - 1);
    EXPECT_LT(e2, e1 / 4);
}

TEST(Grids, BinaryRoundTrip)
{
    GridSpec g(5, 8);
    auto f = sample(TestFunction::gaussian({0.1, 0, 0}, 1.0, {0, 1, 0}, {0.3, 0, 0}), g);
    std::string p = ::testing::TempDir() + "field.bin";
    write_field(p, f);
    auto r = read_field(p);
    EXPECT_TRUE(r.spec == g);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(r[i], f[i]);
    std::remove(p.c_str());
}
