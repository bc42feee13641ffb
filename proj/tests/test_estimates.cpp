#include <boltzsym/estimates.hpp>

#include <gtest/gtest.h>

using namespace boltzsym;

namespace {

const ModelParams p05 = ModelParams::make(0, 0.5);

const SymbolBank& bank8()
{
    static const SymbolBank b(p05, GridSpec(4.0, 8));
    return b;
}

double max_abs(const Matrix& A) { return A.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(Estimates, SymbolBankMatchesEvaluator)
{
    const auto& b = bank8();
    for (auto [v, e] : {std::pair{Vec3{0.3, -1.2, 2.0}, Vec3{1.5, 0.2, -2.5}}, std::pair{Vec3{-3, 1, 0.5}, Vec3{0, 4, 1}},
                        std::pair{Vec3{1, 1, 1}, Vec3{-0.3, 0.1, 0.2}}}) {
        double ref = b.evaluator().ap(v, e);
        EXPECT_NEAR(b.ap(v, e), ref, 2e-3 * ref + 1e-8);
        EXPECT_NEAR(b.a(v, e), ref + b.am(v), 2e-3 * ref + 1e-8);
        EXPECT_DOUBLE_EQ(b.aK(v, e, 10), b.a(v, e) + 10 * vweight(v, 0, 0.5));
    }
    EXPECT_EQ(b.ap({1, 0, 0}, {0, 0, 0}), 0.0);
}

TEST(Estimates, HalfLatticeTableReproducesWeylMatrix)
{
    GridSpec g(4.0, 8);
    auto q = [](Vec3 v, Vec3 e) { return std::exp(-0.1 * norm2(v)) * (1 + norm2(e)) + dot(v, e); };
    HalfLatticeTable t(g, q);
    Vec3 on{-g.R + 0.5 * g.dv() * 3, 0, 0.5 * g.dv()}, off{0.1234, 0, 0};
    EXPECT_DOUBLE_EQ(t(on, g.freq(5)), q(on, g.freq(5)));
    EXPECT_DOUBLE_EQ(t(off, {0.7, 0, 0}), q(off, {0.7, 0, 0}));
    EXPECT_LT(max_abs(weyl_matrix(t, g) - weyl_matrix(q, g)), 1e-13);
}

TEST(Estimates, BatchedAnisotropicNormMatchesSingle)
{
    GridSpec g(5.0, 10);
    auto fs = detail::sample_all(dense_corpus(3, 3, g.R), g);
    auto batch = anisotropic_norm2(fs, -1.0, 0.3);
    for (std::size_t i = 0; i < fs.size(); ++i) EXPECT_NEAR(batch[i], anisotropic_norm2(fs[i], -1.0, 0.3), 1e-10 * batch[i]);
}

TEST(Estimates, DenseCorpusIsResolved)
{
    auto fs = dense_corpus(7, 12, 5.0);
    ASSERT_EQ(fs.size(), 12u);
    // the null-space family leads and is not filtered
    for (std::size_t i = null_space_family().size(); i < fs.size(); ++i) {
        const auto& t = fs[i];
        EXPECT_LE(t.tail_mass_bound(5.0), 1e-4);
        EXPECT_GE(t.scale, 1.0 - 1e-12);
    }
}

TEST(Estimates, IdentityDefectNorm)
{
    GridSpec g(4.0, 8);
    Matrix A = weyl_matrix([](Vec3 v, Vec3 e) { return 1 + norm2(v) / 4 + norm2(e) / 4; }, g);
    Matrix B = A.inverse();
    EXPECT_LT(identity_defect_norm(B, A), 1e-6);
    EXPECT_NEAR(identity_defect_norm(0.5 * B, A), 0.5, 1e-5);
}

TEST(Estimates, CoercivitySmallGrid)
{
    CoercivityOptions o;
    o.R = 5.0;
    o.N_coarse = 10;
    o.N_fine = 12;
    o.n_hermite = 6;
    o.middle_term = false;
    auto rep = coercivity_sandwich(dense_corpus(7, 3, o.R, 2), p05, o);
    EXPECT_TRUE(rep.pass) << rep.to_json().dump();
    EXPECT_GT(rep.fitted_constants.at("c"), 0);
    EXPECT_GE(rep.fitted_constants.at("C"), rep.fitted_constants.at("c"));
    EXPECT_EQ(rep.cells.size(), 6u);  // one cell per function and grid
    EXPECT_THROW(coercivity_sandwich({}, p05, o), InputError);
}

TEST(Estimates, RemainderConstantShrinksWithEps)
{
    RemainderOptions o;
    o.N = 8;
    o.xis = {{0, 0, 0}};
    auto rep = remainder_relative_bound(dense_corpus(7, 2, o.R), p05, {0.05, 0.5}, o);
    double c_small = rep.fitted_constants.at("C_eps_" + std::to_string(0.05));
    double c_big = rep.fitted_constants.at("C_eps_" + std::to_string(0.5));
    EXPECT_TRUE(std::isfinite(c_small));
    EXPECT_GE(c_small, c_big);
}

TEST(Estimates, InverseDefectDecaysWithK)
{
    InverseOptions o;
    o.R = 4.0;
    o.N = 8;
    auto rep = inverse_check(p05, {1e2, 1e3, 1e4}, o);
    EXPECT_TRUE(rep.pass) << rep.to_json().dump();
    EXPECT_LT(rep.fitted_constants.at("norm_at_max_K"), 1);
    EXPECT_LE(rep.fitted_constants.at("decay_exponent"), -0.25);
    EXPECT_LT(rep.fitted_constants.at("lu_residual"), 1e-8);
    EXPECT_THROW(inverse_check(p05, {}, o), InputError);
}

TEST(Estimates, HypoContextRealPartIsSymbolForm)
{
    // Re(P f, f) = (a_K^w f, f): the transport part is skew
    GridSpec g(4.0, 8);
    const auto& b = bank8();
    auto A = std::make_shared<const Matrix>(weyl_matrix([&](Vec3 v, Vec3 e) { return b.aK(v, e, 10); }, g));
    HypoContext ctx{p05, g, {1, 2, 2}, 3.0, A};
    for (const auto& t : dense_corpus(5, 3, g.R)) {
        GridField f = sample(t, g);
        GridField Pf = ctx.apply(f);
        EXPECT_LT(l2_norm(Pf - apply_matrix(ctx.P(), f)), 1e-12 * l2_norm(Pf));
        double form = inner(apply_matrix(*A, f), f).real();
        EXPECT_NEAR(inner(Pf, f).real(), form, 1e-10 * std::abs(form));
    }
}

TEST(Estimates, HypoEllipticSmall)
{
    HypoOptions o;
    o.R = 4.0;
    o.N_coarse = 8;
    o.N_fine = 10;
    o.wick_ingredient = false;
    auto p = ModelParams::make(0, 0.5, 1.0, 10.0);
    auto rep = hypoelliptic_check(dense_corpus(7, 2, o.R), p, {{0, 0, 0}, {1, 0, 0}, {4, 0, 0}}, o);
    EXPECT_TRUE(detail::all_finite(rep));
    EXPECT_GT(rep.fitted_constants.at("ratio_max"), 0);
    EXPECT_LT(rep.fitted_constants.at("form_identity_residual"), 1e-10);
    EXPECT_EQ(rep.cells.size(), 6u);
}

TEST(Estimates, CutoffProfile)
{
    EXPECT_EQ(MultiplierG::chi(0.3), 1.0);
    EXPECT_EQ(MultiplierG::chi(-1.0), 1.0);
    EXPECT_EQ(MultiplierG::chi(2.0), 0.0);
    EXPECT_NEAR(MultiplierG::chi(1.5), 0.5, 1e-15);
    double prev = 1;
    for (double t = 1; t <= 2; t += 0.05) {
        EXPECT_LE(MultiplierG::chi(t), prev + 1e-15);
        prev = MultiplierG::chi(t);
    }
}

TEST(Estimates, MultiplierBracketIdentity)
{
    MultiplierG m{0.0, 0.5, {1, 2, 2}};
    auto vxi = [&](Vec3 v, Vec3) { return dot(v, m.xi); };
    auto a3 = [&](Vec3 v, Vec3 e) { return m.a3(v, e); };
    for (Vec3 v : {Vec3{0.3, -1, 2}, Vec3{-2, 0.5, 0.1}})
        for (Vec3 e : {Vec3{1, 1, 0}, Vec3{-3, 2, 5}}) {
            double lhs = poisson_bracket(a3, vxi, v, e);
            EXPECT_NEAR(lhs, m.bracket_rhs(v), 1e-6 * std::abs(m.bracket_rhs(v)));
        }
}

TEST(Estimates, MultiplierDiagnosticsWithoutCommutator)
{
    MultiplierOptions o;
    o.commutator = false;
    o.identity_points = 40;
    auto rep = multiplier_diagnostics({1, 2, 2}, p05, SymbolLattice::standard(3, 4, 4), o);
    EXPECT_TRUE(rep.pass) << rep.to_json().dump();
    EXPECT_LT(rep.fitted_constants.at("identity_residual"), 1e-6);
    EXPECT_GE(rep.fitted_constants.at("psi_min"), 0);
    EXPECT_LE(rep.fitted_constants.at("psi_max"), 1);
}

TEST(Estimates, ToyScalingExponents)
{
    auto rep = kolmogorov_toy();
    EXPECT_TRUE(rep.pass) << rep.to_json().dump();
    EXPECT_NEAR(rep.fitted_constants.at("exponent_s0.50"), 0.5, 0.05);
    EXPECT_NEAR(rep.fitted_constants.at("exponent_s1.00"), 2.0 / 3, 0.05);
    EXPECT_LT(rep.fitted_constants.at("commutator_residual"), 1e-8);
}

TEST(Estimates, Bump2Scaling)
{
    Bump2 b{0.5, -0.3, 2, 1, 0.4};
    Bump2 c = b.scaled(2.0, 0.5);
    for (auto [x, v] : {std::pair{0.1, 0.2}, std::pair{-0.05, 0.3}})
        EXPECT_LT(std::abs(c(x, v) - b(4 * x, 2 * v)), 1e-14);
    auto c1 = corpus2d(5, 4), c2 = corpus2d(5, 4);
    ASSERT_EQ(c1.size(), 4u);
    EXPECT_EQ(c1[3].x0, c2[3].x0);
}

TEST(Estimates, YoungConstantIsModerate)
{
    double c = young_constant(0, 0.5, 20000);
    EXPECT_TRUE(std::isfinite(c));
    EXPECT_GT(c, 0);
    EXPECT_LT(c, 3);
}

TEST(Estimates, TimeDependentSmall)
{
    Hypo13Options o;
    o.R = 4.0;
    o.N = 8;
    o.young_samples = 10000;
    auto ladder = default_xi_tau_ladder();
    ladder.resize(2);
    auto rep = time_dependent_check(dense_corpus(7, 1, o.R), p05, ladder, o);
    EXPECT_TRUE(detail::all_finite(rep));
    EXPECT_EQ(rep.params["corpus_size"].get<int>(), 2);  // one resonant Gaussian added
    EXPECT_EQ(rep.cells.size(), 4u);
    EXPECT_GT(rep.fitted_constants.at("ratio_base"), 0);
}
