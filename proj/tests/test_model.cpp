#include <boltzsym/model.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace boltzsym;

TEST(Model, ParamsRejectOutOfRange)
{
    EXPECT_THROW(ModelParams::make(-3.0, 0.5), InputError);
    EXPECT_THROW(ModelParams::make(0.0, 0.0), InputError);
    EXPECT_THROW(ModelParams::make(0.0, 1.0), InputError);
    EXPECT_THROW(ModelParams::make(0.0, 0.5, 0.0), InputError);
    EXPECT_THROW(ModelParams::make(0.0, 0.5, 1.5), InputError);
    EXPECT_THROW(ModelParams::make(0.0, 0.5, 1.0, -1.0), InputError);
    EXPECT_NO_THROW(ModelParams::make(-2.5, 0.9, 0.3, 10.0, -1.0));
}

TEST(Model, MaxwellianAtOrigin)
{
    EXPECT_NEAR(maxwellian({0, 0, 0}), 0.06349363593424097, 1e-15);
}

TEST(Model, MaxwellianIsEven)
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0, 2);
    for (int i = 0; i < 100; ++i) {
        Vec3 v{n(rng), n(rng), n(rng)};
        EXPECT_DOUBLE_EQ(maxwellian(v), maxwellian(-v));
    }
}

TEST(Model, MaxwellianGridMass)
{
    const int N = 32;
    const double R = 8, h = 2 * R / N;
    double s = 0;
    for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b)
            for (int c = 0; c < N; ++c)
                s += maxwellian({-R + (a + 0.5) * h, -R + (b + 0.5) * h, -R + (c + 0.5) * h});
    EXPECT_NEAR(s * h * h * h, 1.0, 1e-8);
}

TEST(Model, PostCollisionFixedPoint)
{
    Vec3 v{0.3, -1.2, 2.0}, vs{-0.7, 0.4, 1.1};
    Vec3 sig = (v - vs) / norm(v - vs);
    auto [vp, vsp] = post_collision(v, vs, sig);
    EXPECT_NEAR(norm(vp - v), 0, 1e-14);
    EXPECT_NEAR(norm(vsp - vs), 0, 1e-14);
    EXPECT_NEAR(cos_theta(v, vs, sig), 1.0, 1e-15);
}

TEST(Model, PostCollisionExample)
{
    auto [vp, vsp] = post_collision({1, 0, 0}, {-1, 0, 0}, {0, 1, 0});
    EXPECT_NEAR(norm(vp - Vec3{0, 1, 0}), 0, 1e-15);
    EXPECT_NEAR(norm(vsp - Vec3{0, -1, 0}), 0, 1e-15);
}

TEST(Model, PostCollisionRejectsNonUnit)
{
    EXPECT_THROW(post_collision({1, 0, 0}, {0, 0, 0}, {0, 1.001, 0}), InputError);
}

TEST(Model, ConservationOnRandomSamples)
{
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0, 2);
    double worst_p = 0, worst_e = 0, worst_mu = 0;
    for (int i = 0; i < 100000; ++i) {
        Vec3 v{n(rng), n(rng), n(rng)}, vs{n(rng), n(rng), n(rng)}, s{n(rng), n(rng), n(rng)};
        s = s / norm(s);
        auto [vp, vsp] = post_collision(v, vs, s);
        double scale = 1 + norm2(v) + norm2(vs);
        worst_p = std::max(worst_p, norm(vp + vsp - v - vs) / std::sqrt(scale));
        worst_e = std::max(worst_e, std::abs(norm2(vp) + norm2(vsp) - norm2(v) - norm2(vs)) / scale);
        double m0 = maxwellian(v) * maxwellian(vs);
        worst_mu = std::max(worst_mu, std::abs(maxwellian(vp) * maxwellian(vsp) - m0) / std::pow(2 * pi, -3.0));
    }
    EXPECT_LT(worst_p, 1e-12);
    EXPECT_LT(worst_e, 1e-12);
    EXPECT_LT(worst_mu, 1e-12);
}

TEST(Model, SingularModelIdentity)
{
    for (double s : {0.2, 0.5, 0.8}) {
        auto xs = CrossSection::singular(s);
        for (double th : {0.01, 0.5, 1.5})
            EXPECT_NEAR(std::sin(th) * b_eval(xs, th) * std::pow(th, 1 + 2 * s), 1.0, 1e-13);
    }
}

TEST(Model, BEvalDomain)
{
    auto xs = CrossSection::singular(0.5);
    EXPECT_THROW(b_eval(xs, 0.0), InputError);
    EXPECT_THROW(b_eval(xs, 2.0), InputError);
    auto m = CrossSection::mollified(0.5, 0.1);
    EXPECT_EQ(b_eval(m, 0.05), 0.0);
    EXPECT_GT(b_eval(m, 0.2), 0.0);
}

TEST(Model, AngularMassMatchesQuadrature)
{
    for (double s : {0.3, 0.75}) {
        auto xs = CrossSection::mollified(s, 0.1);
        Rule1D q = composite(graded_edges(0.1, pi / 2, 1e-3, 0.7, 0.05), 10);
        double acc = 0;
        for (std::size_t i = 0; i < q.size(); ++i) acc += q.w[i] * xs.sin_b(q.x[i]);
        double exact = (std::pow(0.1, -2 * s) - std::pow(pi / 2, -2 * s)) / (2 * s);
        EXPECT_NEAR(acc, exact, 1e-8 * exact);
        EXPECT_NEAR(xs.angular_mass(0.1), exact, 1e-14 * exact);
    }
}

TEST(Model, AngularMassDivergesAsCutoffShrinks)
{
    auto xs = CrossSection::singular(0.5);
    double prev = 0;
    for (double t : {1e-1, 1e-2, 1e-3, 1e-4}) {
        double m = xs.angular_mass(t);
        EXPECT_GT(m, 5 * prev);
        prev = m;
    }
}
