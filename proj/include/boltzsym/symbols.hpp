#pragma once

#include "collision.hpp"
#include "report.hpp"

#include <functional>
#include <random>

namespace boltzsym {

// ---------------------------------------------------------------- closed-form weights

/// <v>^gamma (1 + |v|^2 + |eta|^2 + |eta ^ v|^2)^s
inline double atilde(Vec3 v, Vec3 eta, double gamma, double s)
{
    return std::pow(1 + norm2(v), 0.5 * gamma) * std::pow(1 + norm2(v) + norm2(eta) + norm2(cross(eta, v)), s);
}

/// <v>^{gamma + 2s}
inline double vweight(Vec3 v, double gamma, double s) { return std::pow(1 + norm2(v), 0.5 * gamma + s); }

struct SymbolFn {
    std::string name = "custom";
    std::function<cplx(Vec3, Vec3)> eval;

    cplx operator()(Vec3 v, Vec3 eta) const { return eval(v, eta); }
};

inline SymbolFn atilde_symbol(double gamma, double s)
{
    return {"a_tilde", [=](Vec3 v, Vec3 e) { return cplx(atilde(v, e, gamma, s)); }};
}

// ---------------------------------------------------------------- interpolation tables

/// Samples on [0, h0 n0) x ..., 4-point Lagrange per axis; axes flagged even are mirrored at 0.
struct Table2 {
    double h[2]{1, 1};
    int n[2]{0, 0};
    bool even[2]{true, false};
    std::vector<double> y;

    double at(int i, int j) const { return y[(std::size_t)i * n[1] + j]; }

    static void stencil(double x, double h, int n, bool ev, int& i0, double w[4])
    {
        double t = x / h;
        i0 = (int)std::floor(t) - 1;
        if (!ev && i0 < 0) i0 = 0;
        if (i0 + 3 > n - 1) i0 = n - 4;
        double u = t - i0;
        w[0] = -(u - 1) * (u - 2) * (u - 3) / 6;
        w[1] = u * (u - 2) * (u - 3) / 2;
        w[2] = -u * (u - 1) * (u - 3) / 2;
        w[3] = u * (u - 1) * (u - 2) / 6;
    }

    double operator()(double a, double b) const
    {
        int i0, j0;
        double wa[4], wb[4];
        stencil(a, h[0], n[0], even[0], i0, wa);
        stencil(b, h[1], n[1], even[1], j0, wb);
        double s = 0;
        for (int p = 0; p < 4; ++p) {
            int i = std::abs(i0 + p);
            double r = 0;
            for (int q = 0; q < 4; ++q) r += wb[q] * at(i, std::abs(j0 + q));
            s += wa[p] * r;
        }
        return s;
    }
};

struct Table3 {
    double h[3]{1, 1, 1};
    int n[3]{0, 0, 0};
    std::vector<double> y;

    double at(int i, int j, int k) const { return y[((std::size_t)i * n[1] + j) * n[2] + k]; }

    /// All three axes even at 0.
    double operator()(double a, double b, double c) const
    {
        int i0, j0, k0;
        double wa[4], wb[4], wc[4];
        Table2::stencil(std::abs(a), h[0], n[0], true, i0, wa);
        Table2::stencil(std::abs(b), h[1], n[1], true, j0, wb);
        Table2::stencil(std::abs(c), h[2], n[2], true, k0, wc);
        double s = 0;
        for (int p = 0; p < 4; ++p)
            for (int q = 0; q < 4; ++q) {
                double r = 0;
                for (int t = 0; t < 4; ++t) r += wc[t] * at(std::abs(i0 + p), std::abs(j0 + q), std::abs(k0 + t));
                s += wa[p] * wb[q] * r;
            }
        return s;
    }
};

// ---------------------------------------------------------------- symbol quadrature

struct SymbolQuadrature {
    double v_max = 14.5;
    double x_panel = 0.75;
    int x_order = 6;
    int n_phi = 32;
    int n_jacobi = 12;
    int r_order = 8;
    double r_width = 1.0;   // panel width in r times max(|eta|, 1)
    int r_table = 64;       // beta-hat samples on [0, delta]
    double table_step = 0.05;

    SymbolQuadrature refined(int level) const
    {
        SymbolQuadrature q = *this;
        q.x_panel /= level;
        q.n_phi *= level;
        q.n_jacobi += 4 * (level - 1);
        q.r_width /= level;
        q.r_table *= level;
        q.table_step /= level;
        return q;
    }
};

/// Symbols of the singular-part splitting with btilde = 1: a_p, a_m, a_s, a = a_p + a_m, a_K.
class SymbolEvaluator {
public:
    ModelParams params;
    SymbolQuadrature quad;
    CutoffPhi phi;

    SymbolEvaluator(const ModelParams& p, const SymbolQuadrature& q = {}, const CollisionQuadrature& cq = {})
        : params(p), quad(q), phi{p.delta}, coll_(p, CarlemanKernel::unit(p.gamma, p.s), cq)
    {
        build();
    }

    const CollisionOperator& collision() const { return coll_; }

    /// int_|h|<=delta phi (1 - cos(eta . h)) (plane Gaussian) |h|^{-3-2s}
    double ap(Vec3 v, Vec3 eta) const
    {
        double E = norm(eta);
        if (E == 0) return 0.0;
        double sum = 0;
        sweep(v, E, [&](double x, const std::vector<double>& W, const std::vector<double>& r, const std::vector<Vec3>& ring,
                        double dw) {
            double g = std::exp(-0.5 * x * x), acc = 0;
            for (const Vec3& w : ring) {
                double k = dot(w, eta);
                for (std::size_t j = 0; j < r.size(); ++j) {
                    double sn = std::sin(0.5 * r[j] * k);
                    acc += W[j] * 2 * sn * sn;
                }
            }
            // omega and -omega give the same contribution
            sum += 2 * dw * g * acc;
        });
        return sum;
    }

    double am(Vec3 v) const { return coll_.a_m(norm(v)); }
    double a(Vec3 v, Vec3 eta) const { return ap(v, eta) + am(v); }
    double aK(Vec3 v, Vec3 eta) const { return a(v, eta) + params.K * vweight(v, params.gamma, params.s); }

    /// -int phi (e^{-i h . eta} - 1) mu^{1/2}(v+alpha) (mu^{1/2}(v+alpha-h) - mu^{1/2}(v+alpha)) ...
    cplx as(Vec3 v, Vec3 eta) const
    {
        double E = norm(eta);
        if (E == 0) return 0.0;
        cplx sum = 0;
        sweep(v, E, [&](double x, const std::vector<double>& W, const std::vector<double>& r, const std::vector<Vec3>& ring,
                        double dw) {
            double g0 = std::exp(-0.5 * x * x);
            std::vector<double> dp(r.size()), dm(r.size());
            for (std::size_t j = 0; j < r.size(); ++j) {
                dp[j] = W[j] * (std::exp(-0.25 * (x * x + (x - r[j]) * (x - r[j]))) - g0);
                dm[j] = W[j] * (std::exp(-0.25 * (x * x + (x + r[j]) * (x + r[j]))) - g0);
            }
            cplx acc = 0;
            for (const Vec3& w : ring) {
                double k = dot(w, eta);
                for (std::size_t j = 0; j < r.size(); ++j) {
                    cplx e = std::polar(1.0, -r[j] * k);
                    acc += dp[j] * (e - 1.0) + dm[j] * (std::conj(e) - 1.0);
                }
            }
            sum -= dw * acc;
        });
        return sum;
    }

    /// int_0^delta (1 - cos(r k)) r^{-1-2s} dr
    double r_block(double k) const
    {
        k = std::abs(k);
        if (k == 0) return 0.0;
        auto [r, w] = r_rule(k, false);
        double acc = 0;
        for (std::size_t j = 0; j < r.size(); ++j) {
            double sn = std::sin(0.5 * r[j] * k);
            acc += w[j] * 2 * sn * sn;
        }
        return acc;
    }

    SymbolFn symbol_ap() const
    {
        return {"a_p", [this](Vec3 v, Vec3 e) { return cplx(ap(v, e)); }};
    }
    SymbolFn symbol_a() const
    {
        return {"a", [this](Vec3 v, Vec3 e) { return cplx(a(v, e)); }};
    }
    SymbolFn symbol_aK() const
    {
        return {"a_K", [this](Vec3 v, Vec3 e) { return cplx(aK(v, e)); }};
    }
    SymbolFn symbol_as() const
    {
        return {"a_s", [this](Vec3 v, Vec3 e) { return as(v, e); }};
    }

private:
    CollisionOperator coll_;
    Table2 beta_;  // beta-hat(rho0, r), r in [0, delta]

    static double c0() { return std::pow(2 * pi, -1.5); }

    void build()
    {
        const double d = params.delta;
        CarlemanKernel ker = CarlemanKernel::unit(params.gamma, params.s);
        beta_.h[0] = quad.table_step;
        beta_.h[1] = d / quad.r_table;
        beta_.n[0] = (int)std::ceil(quad.v_max / quad.table_step) + 4;
        beta_.n[1] = quad.r_table + 4;
        beta_.y.resize((std::size_t)beta_.n[0] * beta_.n[1]);
        parallel_for(beta_.y.size(), [&](std::size_t idx) {
            double rho0 = (idx / beta_.n[1]) * beta_.h[0], r = (idx % beta_.n[1]) * beta_.h[1];
            double hi = std::max(r, rho0) + 12.0;
            Rule1D q = composite(uniform_edges(r, hi, 0.5), 8);
            if (r == 0) q = composite(graded_edges(0, hi, 1e-3, 0.5, 0.5), 8);
            double acc = 0;
            for (std::size_t i = 0; i < q.size(); ++i) {
                double rho = q.x[i];
                acc += q.w[i] * rho * ker.plane_factor(rho, r) * std::exp(-0.5 * (rho - rho0) * (rho - rho0)) *
                       i0e(rho * rho0);
            }
            beta_.y[idx] = 2 * pi * acc;
        });
    }

    /// r nodes on (0, delta] with weights of r^{-1-2s} dr (times phi_delta when `cut`).
    std::pair<std::vector<double>, std::vector<double>> r_rule(double E, bool cut = true) const
    {
        const double d = params.delta, s = params.s;
        double w = quad.r_width / std::max(E, 1.0);
        double r1 = std::min(d / 2, w);
        std::vector<double> r, wt;
        auto gj = gauss_jacobi_power(quad.n_jacobi, 1 - 2 * s, r1);
        for (std::size_t i = 0; i < gj.size(); ++i) {
            r.push_back(gj.x[i]);
            wt.push_back(gj.w[i] / (gj.x[i] * gj.x[i]) * (cut ? phi(gj.x[i]) : 1.0));
        }
        std::vector<double> e1 = r1 < d / 2 ? uniform_edges(r1, d / 2, w) : std::vector<double>{};
        std::vector<double> e2 = uniform_edges(d / 2, d, std::min(w, d / 2));
        for (const auto* e : {&e1, &e2}) {
            if (e->size() < 2) continue;
            Rule1D q = composite(*e, quad.r_order);
            for (std::size_t i = 0; i < q.size(); ++i) {
                r.push_back(q.x[i]);
                wt.push_back(q.w[i] * std::pow(q.x[i], -1 - 2 * s) * (cut ? phi(q.x[i]) : 1.0));
            }
        }
        return {r, wt};
    }

    /// Half-sphere of omega (pole v) with, per cos node, c0 beta-hat(rho0, r_j) times r weights.
    template <class Body>
    void sweep(Vec3 v, double E, Body&& body) const
    {
        double L = norm(v);
        if (L > quad.v_max) throw InputError("|v| exceeds the symbol table range");
        Vec3 e = L > 0 ? v / L : Vec3{0, 0, 1}, e1, e2;
        orthonormal_frame(e, e1, e2);
        auto [r, w] = r_rule(E);
        std::vector<double> ce{0.0};
        double top = std::min(L, 9.5);
        if (L <= quad.x_panel) {
            ce.push_back(1.0);
        } else {
            int n = (int)std::ceil(top / quad.x_panel - 1e-12);
            for (int i = 1; i <= n; ++i) ce.push_back(std::min(1.0, top * i / n / L));
        }
        Rule1D cr = composite(ce, quad.x_order);
        const int nph = quad.n_phi;
        std::vector<Vec3> ring(nph);
        std::vector<double> W(r.size());
        for (std::size_t i = 0; i < cr.size(); ++i) {
            double ct = cr.x[i], st = std::sqrt(std::max(0.0, 1 - ct * ct));
            double x = ct * L, rho0 = st * L;
            for (int j = 0; j < nph; ++j) {
                double a = 2 * pi * (j + 0.5) / nph;
                ring[j] = ct * e + st * (std::cos(a) * e1 + std::sin(a) * e2);
            }
            for (std::size_t j = 0; j < r.size(); ++j) W[j] = c0() * w[j] * beta_(rho0, r[j]);
            body(x, W, r, ring, cr.w[i] * 2 * pi / nph);
        }
    }
};

/// a_p tabulated in (|v|, |eta|, cos angle) for bulk evaluation (quantisation lattices).
class RotationalTable {
public:
    Table3 t;

    template <class Q>
    static RotationalTable build(Q&& q, double v_max, double eta_max, double hv = 0.25, double he = 0.25, int nc = 12)
    {
        RotationalTable rt;
        rt.t.h[0] = hv;
        rt.t.h[1] = he;
        rt.t.h[2] = 1.0 / nc;
        rt.t.n[0] = (int)std::ceil(v_max / hv) + 4;
        rt.t.n[1] = (int)std::ceil(eta_max / he) + 4;
        rt.t.n[2] = nc + 1;
        rt.t.y.resize((std::size_t)rt.t.n[0] * rt.t.n[1] * rt.t.n[2]);
        parallel_for(rt.t.y.size(), [&](std::size_t idx) {
            int k = idx % rt.t.n[2], j = (idx / rt.t.n[2]) % rt.t.n[1], i = idx / ((std::size_t)rt.t.n[1] * rt.t.n[2]);
            double L = i * hv, E = j * he, c = std::min(1.0, k * rt.t.h[2]);
            Vec3 v{L, 0, 0}, eta{E * c, E * std::sqrt(std::max(0.0, 1 - c * c)), 0};
            rt.t.y[idx] = q(v, eta);
        });
        return rt;
    }

    double operator()(Vec3 v, Vec3 eta) const
    {
        double L = norm(v), E = norm(eta);
        double c = L > 0 && E > 0 ? dot(v, eta) / (L * E) : 0.0;
        return t(L, E, c);
    }
};

// ---------------------------------------------------------------- checks

struct SymbolLattice {
    std::vector<double> v_norms, eta_norms, angles;

    static SymbolLattice standard(int n = 9, double vmax = 8, double emax = 8)
    {
        SymbolLattice l;
        for (int i = 0; i < n; ++i) {
            l.v_norms.push_back(vmax * i / (n - 1));
            l.eta_norms.push_back(emax * i / (n - 1));
            l.angles.push_back(0.5 * pi * i / (n - 1));
        }
        return l;
    }

    template <class Fn>
    void for_each(Fn&& fn) const
    {
        for (double L : v_norms)
            for (double E : eta_norms)
                for (double th : angles) fn(Vec3{L, 0, 0}, Vec3{E * std::cos(th), E * std::sin(th), 0});
    }
};

/// min and max of a / atilde on the lattice, at two quadrature levels.
inline VerificationReport sandwich_check(const ModelParams& p, const SymbolLattice& lat = SymbolLattice::standard())
{
    VerificationReport rep;
    rep.name = "sandwich";
    rep.params = {{"gamma", p.gamma}, {"s", p.s}, {"delta", p.delta}};
    double lo[2], hi[2];
    for (int level : {1, 2}) {
        SymbolEvaluator ev(p, SymbolQuadrature{}.refined(level), CollisionQuadrature{}.refined(level));
        std::vector<Vec3> vs, es;
        lat.for_each([&](Vec3 v, Vec3 e) {
            vs.push_back(v);
            es.push_back(e);
        });
        std::vector<double> ratio(vs.size());
        parallel_for(vs.size(), [&](std::size_t i) { ratio[i] = ev.a(vs[i], es[i]) / atilde(vs[i], es[i], p.gamma, p.s); });
        lo[level - 1] = *std::min_element(ratio.begin(), ratio.end());
        hi[level - 1] = *std::max_element(ratio.begin(), ratio.end());
        if (level == 1)
            for (std::size_t i = 0; i < vs.size(); ++i)
                rep.add({{"v", norm(vs[i])}, {"eta", norm(es[i])}, {"angle", std::atan2(es[i].y, es[i].x)}},
                        ratio[i] * atilde(vs[i], es[i], p.gamma, p.s), atilde(vs[i], es[i], p.gamma, p.s));
    }
    rep.fitted_constants["ratio_min"] = lo[0];
    rep.fitted_constants["ratio_max"] = hi[0];
    rep.fitted_constants["ratio_min_refined"] = lo[1];
    rep.fitted_constants["ratio_max_refined"] = hi[1];
    rep.drift = std::max(rel_change(lo[0], lo[1]), rel_change(hi[0], hi[1]));
    rep.pass = lo[0] > 0 && std::isfinite(hi[0]) && rep.drift < 0.1;
    return rep;
}

/// Exponent k of the least-squares model A x^k + B (relative residuals), scanned on [0, 2.5].
inline double power_offset_exponent(const std::vector<double>& x, const std::vector<double>& y)
{
    auto resid = [&](double k) {
        double s11 = 0, s12 = 0, s22 = 0, t1 = 0, t2 = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            double w = 1 / (y[i] * y[i]), p = std::pow(x[i], k);
            s11 += w * p * p;
            s12 += w * p;
            s22 += w;
            t1 += w * p * y[i];
            t2 += w * y[i];
        }
        double det = s11 * s22 - s12 * s12, A = (t1 * s22 - t2 * s12) / det, B = (s11 * t2 - s12 * t1) / det, r = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            double d = (A * std::pow(x[i], k) + B - y[i]) / y[i];
            r += d * d;
        }
        return r;
    };
    double best = 0, br = INFINITY;
    for (double k = 0.01; k < 2.5; k += 0.01)
        if (double r = resid(k); r < br) br = r, best = k;
    for (double k = best - 0.01; k < best + 0.01; k += 1e-4)
        if (double r = resid(k); r < br) br = r, best = k;
    return best;
}

struct GrowthFit {
    double loglog = 0;  // plain slope of log a_p against log |eta|
    double offset = 0;  // exponent of A |eta|^k + B
};

/// Growth of a_p in |eta| on [4, 64] along a fixed direction.
inline GrowthFit ap_growth(const SymbolEvaluator& ev, Vec3 v, Vec3 dir)
{
    std::vector<double> E, A;
    for (int i = 0; i < 9; ++i) {
        double e = 4 * std::pow(2.0, 0.5 * i);
        E.push_back(e);
        A.push_back(ev.ap(v, e / norm(dir) * dir));
    }
    return {loglog_slope(E, A), power_offset_exponent(E, A)};
}

struct SymbolClassReport {
    std::string weight;
    int order = 0;
    std::vector<double> ratio;  // per derivative order 0..k
    bool underflow = false;
};

/// Central differences (Richardson-extrapolated, step h) of q in the six phase-space directions,
/// sup over samples of |d^alpha q| / M for |alpha| <= k (k <= 2).
template <class Q, class M>
SymbolClassReport symbol_class_check(Q&& q, M&& weight, int k, const std::vector<std::pair<Vec3, Vec3>>& samples,
                                     double h = 1e-3, const std::string& wname = "M")
{
    if (k < 0 || k > 2) throw InputError("symbol_class_check supports orders 0..2");
    SymbolClassReport rep;
    rep.weight = wname;
    rep.order = k;
    rep.ratio.assign(k + 1, 0.0);
    auto shift = [](std::pair<Vec3, Vec3> y, int a, double t) {
        double* c = a < 3 ? &y.first.x : &y.second.x;
        c[a % 3] += t;
        return y;
    };
    auto val = [&](const std::pair<Vec3, Vec3>& y) { return std::abs(cplx(q(y.first, y.second))) > 0 ? cplx(q(y.first, y.second)) : cplx(0); };
    for (const auto& y : samples) {
        double m = weight(y.first, y.second);
        cplx q0 = val(y);
        rep.ratio[0] = std::max(rep.ratio[0], std::abs(q0) / m);
        if (k >= 1)
            for (int a = 0; a < 6; ++a) {
                auto d1 = [&](double t) { return (val(shift(y, a, t)) - val(shift(y, a, -t))) / (2 * t); };
                cplx d = (4.0 * d1(h / 2) - d1(h)) / 3.0;
                rep.ratio[1] = std::max(rep.ratio[1], std::abs(d) / m);
                if (std::abs(q0) > 0 && std::abs(d) * h < 1e-13 * std::abs(q0) && std::abs(d) > 0) rep.underflow = true;
            }
        if (k >= 2)
            for (int a = 0; a < 6; ++a)
                for (int b = a; b < 6; ++b) {
                    auto d2 = [&](double t) {
                        return (val(shift(shift(y, a, t), b, t)) - val(shift(shift(y, a, t), b, -t)) -
                                val(shift(shift(y, a, -t), b, t)) + val(shift(shift(y, a, -t), b, -t))) /
                               (4 * t * t);
                    };
                    cplx d = (4.0 * d2(h / 2) - d2(h)) / 3.0;
                    rep.ratio[2] = std::max(rep.ratio[2], std::abs(d) / m);
                }
    }
    return rep;
}

/// max over random pairs of atilde(Y)/atilde(Y') (1 + |Y - Y'|)^{-(4s + |gamma|)}.
inline double temperance_constant(double gamma, double s, int pairs = 10000, std::uint64_t seed = 11, double box = 8)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-box, box);
    auto rv = [&] { return Vec3{U(rng), U(rng), U(rng)}; };
    double C = 0;
    for (int i = 0; i < pairs; ++i) {
        Vec3 v = rv(), e = rv(), v2 = rv(), e2 = rv();
        double dist = std::sqrt(norm2(v - v2) + norm2(e - e2));
        C = std::max(C, atilde(v, e, gamma, s) / atilde(v2, e2, gamma, s) / std::pow(1 + dist, 4 * s + std::abs(gamma)));
    }
    return C;
}

/// max over random samples of <u>^beta <u+w>^{-|beta|} / <w>^beta.
inline double peetre_constant(double beta, int samples = 100000, std::uint64_t seed = 5, double box = 20)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-box, box);
    double C = 0;
    for (int i = 0; i < samples; ++i) {
        Vec3 u{U(rng), U(rng), U(rng)}, w{U(rng), U(rng), U(rng)};
        C = std::max(C, std::pow(jbracket(u), beta) * std::pow(jbracket(u + w), -std::abs(beta)) / std::pow(jbracket(w), beta));
    }
    return C;
}

/// sup |xi . d_eta atilde| / (<v>^gamma (1+|v|^2+|eta|^2+|eta^v|^2)^{s-1/2} (|xi|^2 + |v^xi|^2)^{1/2}).
inline double eta_derivative_bound(double gamma, double s, int samples = 2000, std::uint64_t seed = 3, double box = 8)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-box, box);
    double C = 0;
    for (int i = 0; i < samples; ++i) {
        Vec3 v{U(rng), U(rng), U(rng)}, e{U(rng), U(rng), U(rng)}, xi{U(rng), U(rng), U(rng)};
        double h = 1e-4;
        double d = (atilde(v, e + h * xi, gamma, s) - atilde(v, e - h * xi, gamma, s)) / (2 * h);
        double M = std::pow(1 + norm2(v), 0.5 * gamma) * std::pow(1 + norm2(v) + norm2(e) + norm2(cross(e, v)), s - 0.5) *
                   std::sqrt(norm2(xi) + norm2(cross(v, xi)));
        C = std::max(C, std::abs(d) / M);
    }
    return C;
}

/// CSV lattice dump: v1,v2,v3,eta1,eta2,eta3,re,im
template <class Q>
void write_symbol_csv(const std::string& path, Q&& q, const SymbolLattice& lat)
{
    std::ofstream os(path);
    if (!os) throw InputError("cannot open " + path);
    os << "v1,v2,v3,eta1,eta2,eta3,re,im\n";
    os.precision(17);
    lat.for_each([&](Vec3 v, Vec3 e) {
        cplx z = q(v, e);
        os << v.x << ',' << v.y << ',' << v.z << ',' << e.x << ',' << e.y << ',' << e.z << ',' << z.real() << ','
           << z.imag() << '\n';
    });
}

}  // namespace boltzsym
