#include <boltzsym/symbols.hpp>

#include <gtest/gtest.h>

#include <map>
#include <memory>

using namespace boltzsym;

namespace {

const SymbolEvaluator& evaluator(double gamma, double s)
{
    static std::map<std::pair<double, double>, std::unique_ptr<SymbolEvaluator>> cache;
    auto& slot = cache[{gamma, s}];
    if (!slot) slot = std::make_unique<SymbolEvaluator>(ModelParams::make(gamma, s));
    return *slot;
}

std::vector<std::pair<Vec3, Vec3>> random_pairs(int n, double box, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-box, box);
    std::vector<std::pair<Vec3, Vec3>> out;
    for (int i = 0; i < n; ++i) out.push_back({{U(rng), U(rng), U(rng)}, {U(rng), U(rng), U(rng)}});
    return out;
}

}  // namespace

TEST(Symbols, AtildeClosedForm)
{
    EXPECT_DOUBLE_EQ(atilde({}, {}, -1, 0.3), 1.0);
    Vec3 v{1, 2, -1};
    Vec3 e = 2.5 * v;
    double expect = std::pow(1 + norm2(v), -0.5) * std::pow(1 + norm2(v) + norm2(e), 0.3);
    EXPECT_NEAR(atilde(v, e, -1, 0.3), expect, 1e-13 * expect);
}

TEST(Symbols, ApVanishesAtZeroAndIsEven)
{
    const auto& ev = evaluator(0, 0.5);
    EXPECT_EQ(ev.ap({1, 2, 3}, {}), 0.0);
    for (const auto& [v, e] : random_pairs(6, 3, 1)) {
        double a = ev.ap(v, e);
        EXPECT_GE(a, 0);
        EXPECT_NEAR(ev.ap(v, -e), a, 1e-10 * a);
        EXPECT_NEAR(ev.ap(-v, e), a, 1e-10 * a);
    }
}

TEST(Symbols, AmRadialPositiveAndBanded)
{
    for (auto [g, s] : {std::pair{0.0, 0.5}, std::pair{-1.0, 0.3}}) {
        const auto& ev = evaluator(g, s);
        EXPECT_DOUBLE_EQ(ev.am({1, -2, 0.5}), ev.am({-1, 2, -0.5}));
        double lo = INFINITY, hi = 0;
        for (double L = 0; L <= 8; L += 0.5) {
            double r = ev.am({L, 0, 0}) / vweight({L, 0, 0}, g, s);
            lo = std::min(lo, r);
            hi = std::max(hi, r);
        }
        EXPECT_GT(lo, 0);
        EXPECT_LT(hi / lo, 50);
    }
}

TEST(Symbols, AsConjugateSymmetry)
{
    const auto& ev = evaluator(0, 0.5);
    EXPECT_EQ(ev.as({1, 0, 0}, {}), cplx(0));
    for (const auto& [v, e] : random_pairs(4, 3, 2)) {
        cplx a = ev.as(v, e), b = ev.as(v, -e);
        EXPECT_NEAR(std::abs(a - std::conj(b)), 0, 1e-10 * std::abs(a));
    }
}

TEST(Symbols, AsRelativeBound)
{
    // |a_s| <= eps a + C_eps <v>^{gamma+2s}: minimal C_eps is monotone in eps and finite
    const auto& ev = evaluator(0, 0.5);
    auto pts = random_pairs(40, 5, 3);
    std::map<double, double> C;
    for (double eps : {0.1, 0.01}) {
        double c = 0;
        for (const auto& [v, e] : pts)
            c = std::max(c, (std::abs(ev.as(v, e)) - eps * ev.a(v, e)) / vweight(v, 0, 0.5));
        C[eps] = c;
    }
    EXPECT_TRUE(std::isfinite(C[0.01]));
    EXPECT_GE(C[0.01], C[0.1]);
}

TEST(Symbols, SumIsExact)
{
    const auto& ev = evaluator(0, 0.5);
    Vec3 v{0.3, 1, -2}, e{4, 0, 1};
    EXPECT_EQ(ev.a(v, e), ev.ap(v, e) + ev.am(v));
    ModelParams p = ModelParams::make(0, 0.5, 1.0, 100.0);
    SymbolEvaluator evK(p);
    EXPECT_DOUBLE_EQ(evK.aK(v, e), evK.a(v, e) + 100.0 * vweight(v, 0, 0.5));
}

TEST(Symbols, RBlockBounds)
{
    // delta^{2-2s} min(k^2, k^{2s}) <~ int_0^delta (1 - cos rk) r^{-1-2s} dr <= C_s k^{2s}
    for (double s : {0.3, 0.75}) {
        const auto& ev = evaluator(0, s);
        double Cs = -std::tgamma(-2 * s) * std::cos(pi * s);
        double lo = INFINITY;
        for (double k = 1e-2; k < 2e3; k *= 1.7) {
            double I = ev.r_block(k);
            // independent oracle in u = r k: cosine series on [0, u0], Gauss-Legendre beyond
            double hi_u = k * ev.params.delta;
            double u0 = std::min(hi_u, 1.0);
            double ref = 0, term = 1;
            for (int n = 1; n < 30; ++n) {
                term /= (2.0 * n - 1) * (2.0 * n);
                double p = 2.0 * n - 2 * s;
                ref += ((n % 2) ? 1 : -1) * term * std::pow(u0, p) / p;
            }
            if (hi_u > u0) {
                Rule1D q = composite(uniform_edges(u0, hi_u, 0.5), 12);
                for (std::size_t i = 0; i < q.size(); ++i)
                    ref += q.w[i] * (1 - std::cos(q.x[i])) * std::pow(q.x[i], -1 - 2 * s);
            }
            ref *= std::pow(k, 2 * s);
            EXPECT_NEAR(I, ref, 1e-7 * ref) << "k=" << k;
            EXPECT_LE(I, Cs * std::pow(k, 2 * s) * (1 + 1e-9));
            lo = std::min(lo, I / std::min(k * k, std::pow(k, 2 * s)));
        }
        EXPECT_GT(lo, 0.05);
    }
}

TEST(Symbols, ApUpperAndLowerStructure)
{
    const ModelParams p = ModelParams::make(0, 0.5);
    const auto& ev = evaluator(0, 0.5);
    SymbolLattice lat = SymbolLattice::standard(5, 8, 8);
    double up = 0, kappa = INFINITY;
    lat.for_each([&](Vec3 v, Vec3 e) {
        double a = ev.ap(v, e);
        double w = std::pow(1 + norm2(v), 0.5 * p.gamma);
        double top = w * (1 + std::pow(norm(e), 2 * p.s) + std::pow(norm(cross(e, v)), 2 * p.s));
        up = std::max(up, a / top);
        double low = std::pow(p.delta, 2 - 2 * p.s) *
                     (w * (std::pow(norm(e), 2 * p.s) + std::pow(norm(cross(e, v)), 2 * p.s)) - vweight(v, p.gamma, p.s));
        if (low > 0) kappa = std::min(kappa, a / low);
    });
    EXPECT_TRUE(std::isfinite(up));
    EXPECT_GT(kappa, 0);
}

TEST(Symbols, SandwichOnSmallLattice)
{
    auto rep = sandwich_check(ModelParams::make(0, 0.5), SymbolLattice::standard(4, 8, 8));
    EXPECT_TRUE(rep.pass) << rep.to_json().dump();
    EXPECT_GT(rep.fitted_constants["ratio_min"], 0);
    EXPECT_LT(rep.drift, 0.1);
}

TEST(Symbols, ApGrowthExponent)
{
    const auto& ev = evaluator(0, 0.5);
    GrowthFit fit = ap_growth(ev, {0.5, 0.2, 0}, {0.3, 1, 0.2});
    EXPECT_NEAR(fit.offset, 1.0, 0.1);
}

TEST(Symbols, PowerOffsetFitRecoversExponent)
{
    std::vector<double> x, y;
    for (double t = 4; t <= 64; t *= 1.5) {
        x.push_back(t);
        y.push_back(2.0 * std::pow(t, 0.7) - 1.5);
    }
    EXPECT_NEAR(power_offset_exponent(x, y), 0.7, 1e-3);
}

TEST(Symbols, ClassicalRouteMatchesCollisionPiece)
{
    // L_{1,2,delta} f = -a_p(v, D_v) f, the right side by Gauss-Hermite quadrature in eta
    const auto& ev = evaluator(0, 0.5);
    TestFunction tf = TestFunction::gaussian({0.3, -0.2, 0.1}, 0.9);
    Vec3 x{0.2, 0.1, -0.3};
    cplx L = ev.collision().piece(Piece::L12d, [&](Vec3 u) { return tf(u); }, x);
    HermiteRule hr = HermiteRule::around({}, 1.0 / 0.9, 16);
    cplx acc = 0;
    for (std::size_t i = 0; i < hr.x.size(); ++i)
        acc += hr.w[i] * ev.ap(x, hr.x[i]) * tf.fourier(hr.x[i]) * std::polar(1.0, dot(x, hr.x[i]));
    acc *= std::pow(2 * pi, -3);
    EXPECT_NEAR(std::abs(L + acc), 0, 1e-3 * std::abs(L));
}

TEST(Symbols, SymbolClassOfAtilde)
{
    auto pts = random_pairs(30, 6, 4);
    auto w = [](Vec3 v, Vec3 e) { return atilde(v, e, -1, 0.3); };
    auto rep = symbol_class_check(w, w, 2, pts);
    for (double r : rep.ratio) EXPECT_TRUE(std::isfinite(r));
    EXPECT_NEAR(rep.ratio[0], 1.0, 1e-12);
    auto one = [](Vec3, Vec3) { return 1.0; };
    auto rc = symbol_class_check(one, one, 2, pts);
    EXPECT_EQ(rc.ratio[1], 0.0);
    EXPECT_EQ(rc.ratio[2], 0.0);
}

TEST(Symbols, EtaDerivativeBound) { EXPECT_LE(eta_derivative_bound(0, 0.5), 10.0); }

TEST(Symbols, TemperanceAndPeetre)
{
    EXPECT_TRUE(std::isfinite(temperance_constant(-1, 0.3)));
    for (double beta : {-1.5, 0.5, 2.0}) EXPECT_LE(peetre_constant(beta), std::pow(2.0, std::abs(beta)) * (1 + 1e-12));
}

TEST(Symbols, RotationalTableInterpolates)
{
    auto q = [](Vec3 v, Vec3 e) { return atilde(v, e, 0, 0.5); };
    auto t = RotationalTable::build(q, 6, 4, 0.1, 0.1, 24);
    for (const auto& [v, e] : random_pairs(20, 2, 9)) EXPECT_NEAR(t(v, e), q(v, e), 2e-3 * q(v, e));
}

TEST(Symbols, CsvDump)
{
    std::string path = ::testing::TempDir() + "sym.csv";
    write_symbol_csv(path, atilde_symbol(0, 0.5), SymbolLattice::standard(3, 2, 2));
    std::ifstream is(path);
    std::string line;
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, 1 + 27);
}
