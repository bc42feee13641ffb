#pragma once

#include "core.hpp"
#include "model.hpp"

#include <fstream>
#include <random>

namespace boltzsym {

// ---------------------------------------------------------------- principal values

namespace detail {

/// int_lo^{pi/2} w(t) d(t) dt where d(t) = O(t^2) at 0. With lo = 0 the panel [0, eps] uses
/// d(t) ~ d(eps) t^2 / eps^2, which avoids the roundoff of d near 0.
template <class W, class D>
double cancelling_integral(double lo, W&& w, D&& d, double width, int order = 12, double eps = 1e-3)
{
    KahanSum acc;
    if (lo <= 0) {
        double c = d(eps) / (eps * eps);
        Rule1D r0 = composite(graded_edges(0.0, eps, eps * 1e-10, 0.7, eps), order);
        for (std::size_t i = 0; i < r0.size(); ++i) acc.add(r0.w[i] * w(r0.x[i]) * c * r0.x[i] * r0.x[i]);
        lo = eps;
    }
    Rule1D r = composite(graded_edges(lo, pi / 2, std::min(width, eps), 0.7, width), order);
    for (std::size_t i = 0; i < r.size(); ++i) acc.add(r.w[i] * w(r.x[i]) * d(r.x[i]));
    return acc.value();
}

}  // namespace detail

/// 1/2 int q(theta) (psi(theta) + psi(-theta) - 2 psi(0)) d theta over [-pi/2, pi/2], q even.
template <class Q, class Psi>
double pv_integral(Q&& q, Psi&& psi)
{
    for (double t : {1e-3, 0.1, 0.7, 1.3}) {
        double a = q(t), b = q(-t);
        if (std::abs(a - b) > 1e-12 * std::max({1.0, std::abs(a), std::abs(b)}))
            throw InputError("pv_integral: density is not even");
    }
    double p0 = psi(0.0);
    return detail::cancelling_integral(0.0, q, [&](double t) { return psi(t) + psi(-t) - 2 * p0; }, 0.05);
}

// ---------------------------------------------------------------- plane exchange

struct FubiniResult {
    double lhs = 0, rhs = 0, se_lhs = 0, se_rhs = 0;
    double stderr_combined() const { return std::sqrt(se_lhs * se_lhs + se_rhs * se_rhs); }
};

/// Monte Carlo estimates of  int dh int_{E_{0,h}} F  and  int da int_{E_{0,a}} (|h|/|a|) F.
/// Gaussian importance sampling with standard deviation `spread` in every coordinate.
template <class F>
FubiniResult fubini_both_sides(F&& Fn, long budget, std::uint64_t seed = 1, double spread = 0.8)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, spread);
    const double c3 = std::pow(2 * pi * spread * spread, -1.5), c2 = 1 / (2 * pi * spread * spread);
    auto side = [&](bool swapped) {
        double m = 0, m2 = 0;
        for (long k = 0; k < budget; ++k) {
            Vec3 a{nd(rng), nd(rng), nd(rng)};
            double u = nd(rng), w = nd(rng);
            double na = norm(a);
            Vec3 e1, e2;
            orthonormal_frame(a / na, e1, e2);
            Vec3 b = u * e1 + w * e2;
            double p = c3 * std::exp(-norm2(a) / (2 * spread * spread)) * c2 *
                       std::exp(-(u * u + w * w) / (2 * spread * spread));
            // not swapped: a plays h (3D), b plays alpha (in plane); swapped: a is alpha, b is h
            double val = swapped ? norm(b) / na * Fn(a, b) / p : Fn(b, a) / p;
            m += val;
            m2 += val * val;
        }
        m /= budget;
        double var = std::max(0.0, m2 / budget - m * m);
        return std::pair{m, std::sqrt(var / budget)};
    };
    FubiniResult r;
    auto [l, sl] = side(false);
    auto [rr, sr] = side(true);
    r.lhs = l;
    r.se_lhs = sl;
    r.rhs = rr;
    r.se_rhs = sr;
    return r;
}

// ---------------------------------------------------------------- Carleman

/// Kernel of the Carleman form: btilde(alpha, h) 1_{|alpha|>=|h|} |alpha+h|^{gamma+1+2s} / |h|^{3+2s}.
struct CarlemanKernel {
    enum class Mode { unit, from_b };
    Mode mode = Mode::unit;
    CrossSection xs;  // used in from_b mode
    double gamma = 0, s = 0.5;

    static CarlemanKernel unit(double gamma, double s)
    {
        CarlemanKernel k;
        k.gamma = gamma;
        k.s = s;
        k.xs = CrossSection::singular(s);
        return k;
    }
    static CarlemanKernel from_b(const CrossSection& xs, double gamma)
    {
        CarlemanKernel k;
        k.mode = Mode::from_b;
        k.xs = xs;
        k.gamma = gamma;
        k.s = xs.s;
        return k;
    }

    /// Deviation angle of the node: tan(theta/2) = |h|/|alpha|.
    static double theta(double rho, double r) { return 2 * std::atan2(r, rho); }

    /// btilde = 4 b(cos theta) sin^{2+2s}(theta/2) in from_b mode, 1 in unit mode.
    double btilde(double rho, double r) const
    {
        if (mode == Mode::unit) return 1.0;
        double th = theta(rho, r);
        if (th < xs.lower() || th <= 0) return 0.0;
        double sb = xs.sin_b(th) / std::sin(th);
        return 4 * sb * std::pow(std::sin(0.5 * th), 2 + 2 * s);
    }

    /// Largest |alpha| with nonzero kernel for given |h|.
    double rho_max(double r) const
    {
        if (mode == Mode::from_b && xs.lower() > 0) return r / std::tan(0.5 * xs.lower());
        return std::numeric_limits<double>::infinity();
    }

    /// btilde (|alpha|^2 + |h|^2)^{(gamma+1+2s)/2}: the kernel without |h|^{-3-2s} and the indicator.
    double plane_factor(double rho, double r) const
    {
        return btilde(rho, r) * std::pow(rho * rho + r * r, 0.5 * (gamma + 1 + 2 * s));
    }

    /// sin(theta) b(cos theta) of the sigma-model represented by this kernel.
    double sin_b(double theta) const
    {
        if (mode == Mode::from_b) return xs.sin_b(theta);
        return std::sin(theta) / (4 * std::pow(std::sin(0.5 * theta), 2 + 2 * s));
    }

    double theta_lower() const { return mode == Mode::from_b ? xs.lower() : 0.0; }

    double weight(double rho, double r) const
    {
        if (rho < r) return 0.0;
        return btilde(rho, r) * std::pow(rho * rho + r * r, 0.5 * (gamma + 1 + 2 * s)) * std::pow(r, -3 - 2 * s);
    }
};

/// h = r omega (sphere x radial rule), alpha in E_{0,omega} in polar form.
struct PlaneQuadrature {
    SphereRule omega;
    Rule1D r;
    double rho_panel = 0.75;  // in-plane radial panel width
    int rho_order = 6;
    int n_phi = 16;
    double alpha_extent = 12.0;  // in-plane decay length beyond max(|h|, |v|)

    static PlaneQuadrature make(int n_cos = 8, int n_phi_omega = 16, double r_max = 12.0, int level = 1)
    {
        PlaneQuadrature q;
        q.omega = sphere_rule({0, 0, 1}, uniform_edges(-1, 1, 2.0 / level), n_cos, n_phi_omega, 0.5);
        q.r = composite(graded_edges(0, r_max, 1e-4, 0.7, 0.75 / level), 6);
        q.rho_panel = 0.75 / level;
        q.rho_order = 6;
        q.n_phi = 16 * level;
        return q;
    }

    Rule1D rho_rule(double lo, double hi) const { return composite(uniform_edges(lo, hi, rho_panel), rho_order); }

    /// int_{E_{0,omega}} e^{-|alpha|^2} d alpha on every omega node; returns the worst error against pi.
    double plane_gaussian_error() const
    {
        double worst = 0;
        Rule1D rr = rho_rule(0, alpha_extent);
        for (std::size_t i = 0; i < omega.size(); ++i) {
            Vec3 e1, e2;
            orthonormal_frame(omega.n[i], e1, e2);
            double acc = 0;
            for (std::size_t a = 0; a < rr.size(); ++a)
                for (int j = 0; j < n_phi; ++j) {
                    double ph = 2 * pi * j / n_phi;
                    Vec3 al = rr.x[a] * (std::cos(ph) * e1 + std::sin(ph) * e2);
                    acc += rr.w[a] * rr.x[a] * (2 * pi / n_phi) * std::exp(-norm2(al));
                }
            worst = std::max(worst, std::abs(acc - pi));
        }
        return worst;
    }
};

/// int dh int_{E_{0,h}} d alpha  K(alpha, h) F(v, v + alpha - h, v - h, v + alpha).
template <class F>
auto carleman_integrate(F&& Fn, Vec3 v, const CarlemanKernel& ker, const PlaneQuadrature& q)
{
    using T = std::decay_t<decltype(Fn(v, v, v, v))>;
    std::vector<T> part(q.omega.size());
    double vn = norm(v);
    parallel_for(q.omega.size(), [&](std::size_t i) {
        Vec3 w = q.omega.n[i], e1, e2;
        orthonormal_frame(w, e1, e2);
        SumOf<T> acc;
        for (std::size_t k = 0; k < q.r.size(); ++k) {
            double r = q.r.x[k];
            Vec3 h = r * w;
            double hi = std::min(ker.rho_max(r), std::max(r, vn) + q.alpha_extent);
            if (hi <= r) continue;
            Rule1D rr = q.rho_rule(r, hi);
            T sub{};
            for (std::size_t a = 0; a < rr.size(); ++a) {
                double rho = rr.x[a], kw = ker.weight(rho, r);
                if (kw == 0) continue;
                T ring{};
                for (int j = 0; j < q.n_phi; ++j) {
                    double ph = 2 * pi * j / q.n_phi;
                    Vec3 al = rho * (std::cos(ph) * e1 + std::sin(ph) * e2);
                    ring += Fn(v, v + al - h, v - h, v + al);
                }
                sub += rr.w[a] * rho * kw * ring * (2 * pi / q.n_phi);
            }
            acc.add(q.r.w[k] * r * r * sub);
        }
        part[i] = q.omega.w[i] * acc.value();
    });
    SumOf<T> t;
    for (const T& p : part) t.add(p);
    return t.value();
}

/// Node table as CSV: omega_x, omega_y, omega_z, r, alpha_u, alpha_w, weight.
inline void write_node_table(const std::string& path, const PlaneQuadrature& q, const CarlemanKernel& ker,
                             double v_norm = 0.0)
{
    std::ofstream os(path);
    if (!os) throw InputError("cannot open " + path);
    os << "omega_x,omega_y,omega_z,r,alpha_u,alpha_w,weight\n";
    os.precision(17);
    for (std::size_t i = 0; i < q.omega.size(); ++i)
        for (std::size_t k = 0; k < q.r.size(); ++k) {
            double r = q.r.x[k];
            double hi = std::min(ker.rho_max(r), std::max(r, v_norm) + q.alpha_extent);
            if (hi <= r) continue;
            Rule1D rr = q.rho_rule(r, hi);
            for (std::size_t a = 0; a < rr.size(); ++a)
                for (int j = 0; j < q.n_phi; ++j) {
                    double ph = 2 * pi * j / q.n_phi;
                    double w = q.omega.w[i] * q.r.w[k] * r * r * rr.w[a] * rr.x[a] * (2 * pi / q.n_phi) *
                               ker.weight(rr.x[a], r);
                    const Vec3& o = q.omega.n[i];
                    os << o.x << ',' << o.y << ',' << o.z << ',' << r << ',' << rr.x[a] * std::cos(ph) << ','
                       << rr.x[a] * std::sin(ph) << ',' << w << '\n';
                }
        }
}

// ---------------------------------------------------------------- sigma representation

/// v* = v - rho n, sigma at polar angle theta about n.
struct SigmaQuadrature {
    SphereRule n;
    Rule1D rho;
    Rule1D theta;
    int n_phi = 16;

    static SigmaQuadrature make(const CrossSection& xs, int n_cos = 8, int n_phi_n = 16, double rho_max = 12.0,
                                int level = 1)
    {
        SigmaQuadrature q;
        q.n = sphere_rule({0, 0, 1}, uniform_edges(-1, 1, 2.0 / level), n_cos, n_phi_n, 0.5);
        q.rho = composite(uniform_edges(0, rho_max, 0.75 / level), 6);
        double lo = xs.lower();
        q.theta = lo > 0 ? composite(uniform_edges(lo, pi / 2, 0.25 / level), 6)
                         : composite(graded_edges(0, pi / 2, 1e-6, 0.7, 0.25 / level), 6);
        q.n_phi = 16 * level;
        return q;
    }
};

struct PowerKinetic {
    double gamma = 0;
    double operator()(double rel, double) const { return std::pow(rel, gamma); }
};

/// int dv* int d sigma  kin(|v - v*|, |v - v'|) b(cos theta) F(v, v*, v', v'*).
/// In singular mode only integrands vanishing at theta = 0 are accepted (`cancelling`).
template <class F, class Kin = PowerKinetic>
auto sigma_integrate(F&& Fn, Vec3 v, const CrossSection& xs, const SigmaQuadrature& q, Kin kin = {},
                       bool cancelling = false)
{
    using T = std::decay_t<decltype(Fn(v, v, v, v))>;
    if (xs.mode == XsMode::singular && !(cancelling && xs.s < 0.5))
        throw InputError("sigma_integrate: singular cross-section needs s < 1/2 and a cancelling integrand");
    std::vector<T> part(q.n.size());
    parallel_for(q.n.size(), [&](std::size_t i) {
        Vec3 n = q.n.n[i], e1, e2;
        orthonormal_frame(n, e1, e2);
        SumOf<T> acc;
        for (std::size_t k = 0; k < q.rho.size(); ++k) {
            double rho = q.rho.x[k];
            Vec3 vs = v - rho * n, m = 0.5 * (v + vs);
            T sub{};
            for (std::size_t t = 0; t < q.theta.size(); ++t) {
                double th = q.theta.x[t], sb = xs.sin_b(th);
                if (sb == 0) continue;
                double ct = std::cos(th), st = std::sin(th);
                T ring{};
                for (int j = 0; j < q.n_phi; ++j) {
                    double ph = 2 * pi * j / q.n_phi;
                    Vec3 sg = ct * n + st * (std::cos(ph) * e1 + std::sin(ph) * e2);
                    Vec3 vp = m + 0.5 * rho * sg, vsp = m - 0.5 * rho * sg;
                    ring += Fn(v, vs, vp, vsp);
                }
                sub += q.theta.w[t] * sb * kin(rho, rho * std::sin(0.5 * th)) * ring * (2 * pi / q.n_phi);
            }
            acc.add(q.rho.w[k] * rho * rho * sub);
        }
        part[i] = q.n.w[i] * acc.value();
    });
    SumOf<T> t;
    for (const T& p : part) t.add(p);
    return t.value();
}

// ---------------------------------------------------------------- cancellation lemma

/// S(z) = 2 pi int sin(theta) b [G(|z|/c, |z| s/c) c^{-3} - G(|z|, |z| s)] d theta,  c = cos(theta/2), s = sin(theta/2).
template <class G>
double cancellation_S(double z, G&& Gf, const CrossSection& xs, int level = 1)
{
    auto d = [&](double th) {
        double c = std::cos(0.5 * th), s = std::sin(0.5 * th);
        return Gf(z / c, z * s / c) / (c * c * c) - Gf(z, z * s);
    };
    return 2 * pi * detail::cancelling_integral(xs.lower(), [&](double th) { return xs.sin_b(th); }, d, 0.05 / level);
}

/// S = S1 + S2 for G = |z|^gamma phi_delta(|v - v'|) (the cos^{-3-gamma} regrouping).
struct SSplit {
    double S1, S2;
};

inline SSplit cancellation_split(double z, double gamma, const CutoffPhi& phi, const CrossSection& xs, int level = 1)
{
    auto sb = [&](double th) { return xs.sin_b(th); };
    auto d1 = [&](double th) {
        double c = std::cos(0.5 * th), s = std::sin(0.5 * th);
        return phi(z * s / c) * (std::pow(c, -3 - gamma) - 1);
    };
    auto d2 = [&](double th) {
        double c = std::cos(0.5 * th), s = std::sin(0.5 * th);
        return phi(z * s / c) - phi(z * s);
    };
    double zg = std::pow(z, gamma), w = 0.05 / level;
    return {2 * pi * zg * detail::cancelling_integral(xs.lower(), sb, d1, w),
            2 * pi * zg * detail::cancelling_integral(xs.lower(), sb, d2, w)};
}

/// (S * F)(v) = int S(|z|) F(v - z) dz with S tabulated on the radial nodes.
template <class S, class F>
double radial_convolution(S&& Sfn, F&& Fn, Vec3 v, const SphereRule& sph, const Rule1D& rad)
{
    std::vector<double> sv(rad.size());
    for (std::size_t k = 0; k < rad.size(); ++k) sv[k] = Sfn(rad.x[k]);
    KahanSum acc;
    for (std::size_t i = 0; i < sph.size(); ++i) {
        double sub = 0;
        for (std::size_t k = 0; k < rad.size(); ++k) {
            double z = rad.x[k];
            sub += rad.w[k] * z * z * sv[k] * Fn(v - z * sph.n[i]);
        }
        acc.add(sph.w[i] * sub);
    }
    return acc.value();
}

}  // namespace boltzsym
