#include <boltzsym/collision.hpp>

#include <gtest/gtest.h>

#include <memory>

using namespace boltzsym;

namespace {

const CollisionOperator& mollified_op()
{
    static const CollisionOperator op =
        CollisionOperator::make(ModelParams::make(0.0, 0.5), CrossSection::mollified(0.5, 0.1));
    return op;
}

const CollisionOperator& singular_op(double gamma, double s)
{
    static std::map<std::pair<double, double>, std::unique_ptr<CollisionOperator>> cache;
    auto& p = cache[{gamma, s}];
    if (!p)
        p = std::make_unique<CollisionOperator>(
            CollisionOperator::make(ModelParams::make(gamma, s), CrossSection::singular(s)));
    return *p;
}

}  // namespace

TEST(Collision, PieceNamesRoundTrip)
{
    for (Piece p : all_pieces) EXPECT_EQ(piece_from_name(piece_name(p)), p);
    EXPECT_THROW(piece_from_name("L9"), InputError);
    int mult = 0;
    for (Piece p : all_pieces) mult += is_multiplication(p);
    EXPECT_EQ(mult, 3);
}

TEST(Collision, RejectsInconsistentSetup)
{
    auto prm = ModelParams::make(0.0, 0.5);
    EXPECT_THROW(CollisionOperator(prm, CarlemanKernel::unit(0.0, 0.3)), InputError);
    EXPECT_THROW(CollisionOperator::make(prm, CrossSection::singular(0.4)), InputError);
    CollisionQuadrature q;
    q.n_phi = 15;
    EXPECT_THROW(CollisionOperator(prm, CarlemanKernel::unit(0.0, 0.5), q), InputError);
    auto t = TestFunction::gaussian({}, 1.0);
    EXPECT_THROW(mollified_op().apply(t, Vec3{20, 0, 0}), InputError);
}

TEST(Collision, CarlemanMatchesSigmaPerPiece)
{
    const auto& op = mollified_op();
    auto xs = CrossSection::mollified(0.5, 0.1);
    auto sq = SigmaQuadrature::make(xs);
    auto t = TestFunction::gaussian({0.4, -0.3, 0.2}, 0.9);
    for (Vec3 v : {Vec3{0.5, 0.1, -0.2}, Vec3{-1.2, 0.8, 0.4}}) {
        auto P = op.pieces(t, v);
        for (std::size_t i = 0; i < all_pieces.size(); ++i) {
            cplx s = sigma_piece(all_pieces[i], t, v, op.params, xs, sq);
            EXPECT_LT(std::abs(P[i] - s), 1e-4 * (1e-3 + std::abs(s))) << piece_name(all_pieces[i]);
        }
    }
}

TEST(Collision, NullSpaceAnnihilated)
{
    for (auto [g, s] : {std::pair{0.0, 0.5}, std::pair{-1.0, 0.3}, std::pair{1.0, 0.75}}) {
        const auto& op = singular_op(g, s);
        for (const auto& t : null_space_family())
            for (Vec3 v : {Vec3{0.3, 0.2, -0.1}, Vec3{1.5, -0.7, 0.9}, Vec3{-2.5, 1.0, 0.0}}) {
                double scale = 0;
                for (cplx z : op.pieces(t, v)) scale += std::abs(z);
                EXPECT_LT(std::abs(op.apply(t, v)), 1e-4 * std::max(1.0, scale)) << t.label << " gamma " << g;
            }
    }
}

TEST(Collision, Linearity)
{
    const auto& op = singular_op(0.0, 0.5);
    auto a = TestFunction::gaussian({0.2, 0, 0}, 0.8), b = TestFunction::gaussian({0, -0.5, 0.1}, 1.2, {1, 0, 0});
    auto ab = [&](Vec3 w) { return 2.0 * a(w) - cplx(0, 3) * b(w); };
    Vec3 v{0.3, -0.4, 0.6};
    cplx lhs = op.apply(ab, v), rhs = 2.0 * op.apply(a, v) - cplx(0, 3) * op.apply(b, v);
    EXPECT_LT(std::abs(lhs - rhs), 1e-12 * std::abs(rhs));
}

TEST(Collision, DirichletFormNonnegative)
{
    const auto& op = singular_op(0.0, 0.5);
    auto cs = corpus(3, 8);
    for (int i : {0, 5, 6, 7}) EXPECT_GT(dirichlet_form(op, cs[i], 8), -1e-6) << cs[i].label;
    EXPECT_GT(dirichlet_form(op, TestFunction::gaussian({0.5, 0, 0}, 0.7), 8), 1e-3);
}

TEST(Collision, L2GainKernelSymmetric)
{
    const auto& op = singular_op(0.0, 0.5);
    auto f = TestFunction::gaussian({0.3, 0, 0}, 0.9), g = TestFunction::gaussian({-0.2, 0.4, 0}, 0.9);
    auto hr = HermiteRule::around({}, 1.0, 12);
    cplx fg = 0, gf = 0;
    for (std::size_t i = 0; i < hr.x.size(); ++i) {
        fg += hr.w[i] * op.piece(Piece::L2r, f, hr.x[i]) * std::conj(g(hr.x[i]));
        gf += hr.w[i] * f(hr.x[i]) * std::conj(op.piece(Piece::L2c, g, hr.x[i]));
    }
    EXPECT_LT(std::abs(fg - gf), 1e-6 * std::abs(fg));
}

TEST(Collision, TripleNormAgainstSigma)
{
    const auto& op = mollified_op();
    auto xs = CrossSection::mollified(0.5, 0.1);
    auto sq = SigmaQuadrature::make(xs);
    auto t = TestFunction::gaussian({0.4, -0.3, 0.2}, 0.9);
    Vec3 v{0.5, 0.1, -0.2};
    double d = sigma_integrate(
        [&](Vec3 v0, Vec3 vs, Vec3 vp, Vec3) { return maxwellian(vs) * std::norm(t(v0) - t(vp)); }, v, xs, sq);
    EXPECT_NEAR(op.triple_density(t, v), d, 1e-5 * d);
    double w = sigma_integrate(
        [&](Vec3, Vec3 vs, Vec3, Vec3 vsp) {
            double q = sqrt_maxwellian(vsp) - sqrt_maxwellian(vs);
            return q * q;
        },
        v, xs, sq);
    EXPECT_NEAR(op.triple_weight(norm(v)), w, 1e-5 * w);
}

TEST(Collision, TripleNormHomogeneous)
{
    const auto& op = singular_op(0.0, 0.5);
    GridSpec g(6, 8);
    auto t = TestFunction::gaussian({}, 0.8);
    double a = triple_norm(op, t, g);
    double b = triple_norm(op, [&](Vec3 w) { return cplx(0, 2) * t(w); }, g);
    EXPECT_GT(a, 0);
    EXPECT_NEAR(b, 4 * a, 1e-12 * b);
}

TEST(Collision, MultiplicationPiecesCommuteWithWeight)
{
    const auto& op = singular_op(0.0, 0.5);
    GridSpec g(6, 8);
    auto f = sample(TestFunction::gaussian({0.3, 0, 0}, 1.0, {1, 0, 0}), g);
    auto w2 = [](Vec3 v) { return 1 + norm2(v); };
    for (Piece p : {Piece::L1db, Piece::L13d, Piece::L14d}) {
        auto a = apply_piece(op, p, multiply(f, w2));
        auto b = multiply(apply_piece(op, p, f), w2);
        EXPECT_LT(l2_norm(a - b), 1e-14 * l2_norm(a));
    }
}

TEST(Collision, L13ScalesWithDelta)
{
    CollisionQuadrature q;
    q.v_max = 2;
    std::vector<double> ds{0.05, 0.1, 0.2}, ms;
    double s = 0.4;
    for (double d : ds)
        ms.push_back(std::abs(
            CollisionOperator::make(ModelParams::make(0.0, s, d), CrossSection::singular(s), q).m13(0.7)));
    EXPECT_NEAR(loglog_slope(ds, ms), 2 - 2 * s, 0.05);
}

TEST(Collision, TrigInterpolantHitsNodes)
{
    GridSpec g(5, 8);
    auto f = sample(TestFunction::gaussian({0.2, 0, 0}, 1.0, {0, 0, 1}), g);
    TrigInterpolant ti{f};
    for (std::size_t i = 0; i < g.size(); i += 29) EXPECT_LT(std::abs(ti(g.point(i)) - f[i]), 1e-12);
}

TEST(Collision, ProjectorProperties)
{
    GridSpec g(8, 16);
    auto f = sample(TestFunction::gaussian({0.4, -0.2, 0}, 0.8, {1, 0, 0}), g);
    auto pf = projector_P(f);
    EXPECT_LT(l2_norm(projector_P(pf) - pf), 1e-12);
    auto m = sample(null_space_family()[4], g);
    EXPECT_LT(l2_norm(projector_P(m) - m), 1e-12);
    auto r = f - pf;
    for (const auto& t : null_space_family()) EXPECT_LT(std::abs(inner(sample(t, g), r)), 1e-12);
}
