#include <boltzsym/quantize.hpp>

#include <gtest/gtest.h>

using namespace boltzsym;

namespace {

const GridSpec g3(6.0, 8);
const GridSpec g1(12.0, 64, 1);

Matrix eye(std::size_t n) { return Matrix::Identity(n, n); }

std::vector<GridField> fields(const GridSpec& g, int n = 3)
{
    std::vector<GridField> out;
    CorpusOptions opt;
    opt.box = g.R;
    opt.center_max = 1.5;
    for (auto t : corpus(7, n + 5, opt)) {
        if (out.size() == (std::size_t)n) break;
        t.dim = g.dim;
        out.push_back(sample(t, g));
    }
    return out;
}

double max_abs(const Matrix& A) { return A.cwiseAbs().maxCoeff(); }

auto smooth_symbol = [](Vec3 v, Vec3 e) { return cplx(atilde(v, e, 0, 0.5) * std::exp(-0.05 * norm2(v))); };

}  // namespace

TEST(Quantize, ConstantIsIdentity)
{
    auto one = [](Vec3, Vec3) { return 1.0; };
    for (const GridSpec& g : {g1, g3}) {
        EXPECT_LT(max_abs(weyl_matrix(one, g) - eye(g.size())), 1e-12);
        EXPECT_LT(max_abs(quant_matrix(one, g, Quantization::classical) - eye(g.size())), 1e-12);
        EXPECT_LT(max_abs(wick_matrix(one, g) - eye(g.size())), 1e-12);
    }
}

TEST(Quantize, MultiplicationSymbolIsDiagonal)
{
    auto q = [](Vec3 v, Vec3) { return std::exp(-0.1 * norm2(v)) + v.x; };
    Matrix A = weyl_matrix(q, g3), C = quant_matrix(q, g3, Quantization::classical);
    Matrix D = Matrix::Zero(g3.size(), g3.size());
    for (std::size_t i = 0; i < g3.size(); ++i) D(i, i) = q(g3.point(i), {});
    EXPECT_LT(max_abs(A - D), 1e-12);
    EXPECT_LT(max_abs(C - D), 1e-12);
}

TEST(Quantize, FourierMultiplierMatchesNormPath)
{
    double sigma = 0.7;
    auto q = [&](Vec3, Vec3 e) { return std::pow(1 + norm2(e), sigma); };
    GridField f = fields(g3, 1)[0];
    GridField a = op0_apply(q, f);
    GridField b = fourier_multiply(f, [&](Vec3 e) { return std::pow(1 + norm2(e), sigma); });
    EXPECT_LT(l2_norm(a - b), 1e-12 * l2_norm(b));
    EXPECT_LT(l2_norm(apply_matrix(weyl_matrix(q, g3), f) - b), 1e-12 * l2_norm(b));
    EXPECT_NEAR(l2_norm(a), weighted_fractional_norm(f, 0, 2 * sigma), 1e-12 * l2_norm(a));
}

TEST(Quantize, RealSymbolGivesHermitianMatrix)
{
    EXPECT_LT(hermitian_defect(weyl_matrix(smooth_symbol, g3)), 1e-10);
    EXPECT_LT(hermitian_defect(weyl_matrix(smooth_symbol, g1)), 1e-10);
}

TEST(Quantize, AdjointIsConjugateSymbol)
{
    auto q = [](Vec3 v, Vec3 e) { return cplx(std::cos(v.x - e.y), std::sin(0.5 * v.z * e.x)); };
    auto qc = [&](Vec3 v, Vec3 e) { return std::conj(q(v, e)); };
    Matrix A = weyl_matrix(q, g3), B = weyl_matrix(qc, g3);
    EXPECT_LT(max_abs(A.adjoint() - B), 1e-10 * max_abs(A));
}

TEST(Quantize, LinearInSymbol)
{
    auto q1 = [](Vec3 v, Vec3 e) { return atilde(v, e, 0, 0.5); };
    auto q2 = [](Vec3 v, Vec3 e) { return cplx(std::sin(v.x) * std::cos(e.y), e.z); };
    cplx c(0.3, -1.2);
    auto mix = [&](Vec3 v, Vec3 e) { return q1(v, e) + c * q2(v, e); };
    Matrix A = weyl_matrix(mix, g3), B = weyl_matrix(q1, g3) + c * weyl_matrix(q2, g3);
    EXPECT_LT(max_abs(A - B), 1e-12 * max_abs(A));
}

TEST(Quantize, AffineSymbolWeylEqualsClassical)
{
    auto aff = [](Vec3 v, Vec3 e) { return 0.3 * v.x - 0.2 * v.y + 0.7 * e.x + e.z + 1.0; };
    for (const auto& f : fields(g3)) {
        GridField a = apply_matrix(weyl_matrix(aff, g3), f), b = op0_apply(aff, f);
        EXPECT_LT(l2_norm(a - b), 1e-12 * l2_norm(a));
    }
}

TEST(Quantize, DualRouteAgreement)
{
    EXPECT_LT(weyl_dual_route(smooth_symbol, fields(g3)), 1e-10);
    EXPECT_LT(weyl_dual_route(smooth_symbol, fields(g1)), 1e-10);
    auto bad = [](Vec3 v, Vec3 e) { return atilde(v, e, 0, 0.5); };
    EXPECT_NO_THROW(weyl_dual_route(bad, fields(g1), 1e-6));
}

TEST(Quantize, ContinuumRouteConvergesIn1D)
{
    auto q = [](Vec3 v, Vec3 e) { return cplx(std::exp(-v.x * v.x / 8) * std::exp(-e.x * e.x / 8) * (1 + v.x * e.x)); };
    double prev = INFINITY;
    for (int N : {32, 64, 128}) {
        GridSpec g(12, N, 1);
        GridField f = sample_fn([](Vec3 v) { return cplx(std::exp(-0.5 * v.x * v.x)); }, g);
        GridField a = apply_matrix(weyl_matrix(q, g), f), b = op0_apply_table(weyl_to_classical_fourier(q, g), f);
        double e = l2_norm(a - b) / l2_norm(a);
        EXPECT_LE(e, std::max(prev, 1e-9));
        prev = e;
    }
    EXPECT_LT(prev, 1e-6);
}

TEST(Quantize, MatrixFreeMatchesDense)
{
    auto fs = fields(g3, 2);
    for (auto t : {Quantization::weyl, Quantization::wick, Quantization::classical}) {
        Matrix A = quant_matrix(smooth_symbol, g3, t);
        auto out = quant_apply_batch(smooth_symbol, fs, t);
        for (std::size_t m = 0; m < fs.size(); ++m) {
            GridField ref = apply_matrix(A, fs[m]);
            EXPECT_LT(l2_norm(out[m] - ref), 1e-12 * l2_norm(ref)) << quantization_name(t);
        }
    }
    QuantOperator op{Quantization::weyl, {"s", smooth_symbol}, Representation::matrix_free, g3};
    QuantOperator od{Quantization::weyl, {"s", smooth_symbol}, Representation::dense, g3};
    EXPECT_LT(l2_norm(op.apply(fs[0]) - od.apply(fs[0])), 1e-12 * l2_norm(od.apply(fs[0])));
    EXPECT_THROW(op.apply(fields(g1, 1)[0]), InputError);
}

TEST(Quantize, WickOfLinearSymbolIsMultiplication)
{
    Vec3 xi{1.5, -0.5, 2};
    auto q = [&](Vec3 v, Vec3) { return dot(v, xi); };
    Matrix W = wick_matrix(q, g3);
    Matrix D = Matrix::Zero(g3.size(), g3.size());
    for (std::size_t i = 0; i < g3.size(); ++i) D(i, i) = dot(g3.point(i), xi);
    EXPECT_LT(max_abs(W - D), 1e-10);
}

TEST(Quantize, WickPositivity)
{
    auto q = [](Vec3 v, Vec3 e) { return std::pow(std::sin(v.x * e.y + e.x) * std::cos(v.z), 2); };
    Matrix W = wick_matrix(q, g3);
    EXPECT_GE(min_rayleigh(W), -1e-8);
    EXPECT_GE(min_eigenvalue(W), -1e-10);
}

TEST(Quantize, CommutingMultipliersCompose)
{
    auto p1 = [](Vec3, Vec3 e) { return std::exp(-0.1 * norm2(e)); };
    auto p2 = [](Vec3, Vec3 e) { return 1 + e.x * e.x; };
    auto p12 = [&](Vec3 v, Vec3 e) { return p1(v, e) * p2(v, e); };
    Matrix A = weyl_matrix(p1, g3) * weyl_matrix(p2, g3);
    EXPECT_LT(max_abs(A - weyl_matrix(p12, g3)), 1e-10 * max_abs(A));
    auto one = [](Vec3, Vec3) { return cplx(1); };
    SymbolFn b = phase_bump({0.5, 0, 0}, {0, 0, 0}, 1, 1);
    ComposeResult r = compose_remainders(b, {"one", one}, g1);
    EXPECT_LT(r.weyl, 1e-8);
}

TEST(Quantize, MoyalRemainderDecays)
{
    auto rep = compose_check(GridSpec(24, 256, 1));
    EXPECT_TRUE(rep.pass) << rep.to_json().dump();
    EXPECT_GE(rep.fitted_constants["weyl_order"], 1.5);
    EXPECT_GE(rep.fitted_constants["wick_order"], 1.5);
}

TEST(Quantize, SchurBounds)
{
    GridSpec g(5, 100, 1);
    SchurBound z = schur_bound(Matrix::Zero(10, 10), 0.1);
    EXPECT_EQ(z.bound, 0.0);
    Matrix K = sample_kernel([](Vec3 y, Vec3 z) { return std::abs(y.x - z.x) <= 1.0 ? 1.0 : 0.0; }, g);
    SchurBound s = schur_bound(K, g.cell());
    EXPECT_NEAR(s.M1, 2.0, 0.11);
    EXPECT_NEAR(s.M2, s.M1, 1e-12);
    EXPECT_GE(s.bound, operator_norm(K * g.cell()) * (1 - 1e-12));

    GridSpec g8(6.0, 12);
    Matrix E = sample_kernel([](Vec3 y, Vec3 z) { return std::exp(-norm(y - z)); }, g8);
    SchurBound e8 = schur_bound(E, g8.cell());
    GridSpec g9(8.0, 16);
    SchurBound e9 = schur_bound(sample_kernel([](Vec3 y, Vec3 z) { return std::exp(-norm(y - z)); }, g9), g9.cell());
    // row masses approach 4 pi int r^2 e^{-r} dr = 8 pi as the box grows
    EXPECT_LT(std::abs(e9.M1 - 8 * pi), std::abs(e8.M1 - 8 * pi) + 0.05);
    EXPECT_NEAR(e9.M1, 8 * pi, 0.1 * 8 * pi);
}

TEST(Quantize, PoissonBracket)
{
    auto q = [](Vec3 v, Vec3 e) { return std::sin(v.x) * e.y + v.z * v.z * e.x; };
    Vec3 v{0.3, -0.2, 1.1}, e{0.5, 2.0, -1};
    EXPECT_NEAR(poisson_bracket(q, q, v, e), 0.0, 1e-12);
    for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) {
            auto ej = [j](Vec3, Vec3 e) { return e[j]; };
            auto vk = [k](Vec3 v, Vec3) { return v[k]; };
            EXPECT_NEAR(poisson_bracket(ej, vk, v, e), j == k ? 1.0 : 0.0, 1e-10);
        }
}

TEST(Quantize, MultiplierIdentityByFiniteDifferences)
{
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> U(-4, 4);
    const double gamma = -1, s = 0.3;
    for (int i = 0; i < 100; ++i) {
        Vec3 v{U(rng), U(rng), U(rng)}, eta{U(rng), U(rng), U(rng)}, xi{U(rng), U(rng), U(rng)};
        auto P = [&](Vec3 w) { return 1 + norm2(w) + norm2(xi) + norm2(cross(w, xi)); };
        auto a3 = [&](Vec3 w, Vec3 e) {
            return std::pow(1 + norm2(w), 0.5 * gamma) * std::pow(P(w), s - 1) * (dot(xi, e) + dot(cross(w, xi), cross(w, e)));
        };
        auto vxi = [&](Vec3 w, Vec3) { return dot(w, xi); };
        double lhs = poisson_bracket(a3, vxi, v, eta);
        double rhs = atilde(v, xi, gamma, s) - std::pow(1 + norm2(v), 0.5 * gamma + 1) * std::pow(P(v), s - 1);
        EXPECT_NEAR(lhs, rhs, 1e-6 * std::max(1.0, std::abs(rhs)));
    }
}

TEST(Quantize, L2Continuity)
{
    auto c = [](Vec3, Vec3) { return 2.5; };
    auto rc = l2_continuity_check(c, g1, {0});
    EXPECT_NEAR(rc.fitted_constants["operator_norm"], 2.5, 1e-10);
    SymbolFn b = phase_bump({0, 0, 0}, {0, 0, 0}, 1, 1);
    auto rb = l2_continuity_check(b, g1, {0, 2, 4, 7});
    EXPECT_TRUE(rb.pass);
    EXPECT_LE(rb.fitted_constants["operator_norm"], rb.fitted_constants["C_7"] * rb.cells.back().rhs * (1 + 1e-12));
    // bounded independently of the grid
    auto sn = [](Vec3 v, Vec3 e) { return std::sin(v.x) * std::sin(e.x); };
    double n1 = operator_norm(weyl_matrix(sn, GridSpec(12, 64, 1)));
    double n2 = operator_norm(weyl_matrix(sn, GridSpec(12, 128, 1)));
    EXPECT_LT(n1, 2.0);
    EXPECT_LT(n2, 2.0);
    EXPECT_NEAR(n1, n2, 0.1 * n1);
}
