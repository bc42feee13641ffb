#pragma once

#include "grids.hpp"
#include "model.hpp"
#include "representations.hpp"

#include <Eigen/Dense>

#include <array>
#include <map>

namespace boltzsym {

// ---------------------------------------------------------------- splitting tags

enum class Piece { L2r, L2ca, L2c, L2d, L1da, L1db, L11d, L12d, L13d, L14d };
enum class Route { sigma, carleman, multiplication, symbol };

inline constexpr std::array<Piece, 10> all_pieces{Piece::L2r,  Piece::L2ca, Piece::L2c,  Piece::L2d,  Piece::L1da,
                                                  Piece::L1db, Piece::L11d, Piece::L12d, Piece::L13d, Piece::L14d};

inline const char* piece_name(Piece p)
{
    switch (p) {
    case Piece::L2r: return "L2r";
    case Piece::L2ca: return "L2ca";
    case Piece::L2c: return "L2c";
    case Piece::L2d: return "L2d";
    case Piece::L1da: return "L1da";
    case Piece::L1db: return "L1db";
    case Piece::L11d: return "L11d";
    case Piece::L12d: return "L12d";
    case Piece::L13d: return "L13d";
    case Piece::L14d: return "L14d";
    }
    return "?";
}

inline Piece piece_from_name(const std::string& s)
{
    for (Piece p : all_pieces)
        if (s == piece_name(p)) return p;
    throw InputError("unknown piece tag: " + s);
}

inline bool is_multiplication(Piece p) { return p == Piece::L1db || p == Piece::L13d || p == Piece::L14d; }

struct SplitPiece {
    Piece tag;
    Route route;
};

// ---------------------------------------------------------------- tables

/// Samples on a uniform grid of [0, h (n-1)], four-point Lagrange interpolation, even extension at 0.
struct CubicTable {
    double h = 1;
    std::vector<double> y;

    double operator()(double x) const
    {
        const int n = (int)y.size();
        double t = x / h;
        int i0 = (int)std::floor(t) - 1;
        if (i0 + 3 > n - 1) i0 = n - 4;
        double u = t - i0;
        auto at = [&](int k) { return y[std::abs(k)]; };
        double y0 = at(i0), y1 = at(i0 + 1), y2 = at(i0 + 2), y3 = at(i0 + 3);
        return -y0 * (u - 1) * (u - 2) * (u - 3) / 6 + y1 * u * (u - 2) * (u - 3) / 2 - y2 * u * (u - 1) * (u - 3) / 2 +
               y3 * u * (u - 1) * (u - 2) / 6;
    }
};

template <class Fn>
CubicTable tabulate(double xmax, double h, Fn&& fn)
{
    CubicTable t;
    int n = std::max(4, (int)std::ceil(xmax / h) + 3);
    t.h = h;
    t.y.resize(n);
    parallel_for(n, [&](std::size_t i) { t.y[i] = fn(i * h); });
    return t;
}

// ---------------------------------------------------------------- operator

struct CollisionQuadrature {
    double v_max = 14.5;    // largest |v| served by the tables
    double x_cut = 9.0;     // |omega . v| beyond which Gaussian factors are dropped
    double x_panel = 0.75;  // panel width in omega . v
    int x_order = 6;
    int n_phi = 16;         // azimuthal nodes (even)
    int n_jacobi = 16;      // nodes on the singular range [0, delta/2]
    int mid_order = 6;      // nodes on [delta/2, delta]
    double r_panel = 1.5;   // far-range panels
    int r_order = 6;
    double table_step = 0.05;
    int conv_order = 6;     // radial order of the L2ca convolution
    double conv_panel = 1.0;

    /// Every resolution knob refined by `level`.
    CollisionQuadrature refined(int level) const
    {
        CollisionQuadrature q = *this;
        q.x_panel /= level;
        q.n_phi *= level;
        q.n_jacobi *= level;
        q.mid_order *= level;
        q.r_panel /= level;
        q.conv_panel /= level;
        q.table_step /= level;
        return q;
    }
};

/// Linearized collision operator in the Carleman representation. The plane integrals are
/// done in closed form against the Gaussian factors, leaving two-dimensional integrals over
/// (omega, |h|) for the L1 pieces and (alpha direction, |alpha|) for the L2 pieces.
class CollisionOperator {
public:
    ModelParams params;
    CarlemanKernel kernel;
    CutoffPhi phi;
    CollisionQuadrature quad;

    CollisionOperator(const ModelParams& p, const CarlemanKernel& k, const CollisionQuadrature& q = {})
        : params(p), kernel(k), phi{p.delta}, quad(q)
    {
        p.validate();
        if (std::abs(k.gamma - p.gamma) > 1e-14 || std::abs(k.s - p.s) > 1e-14)
            throw InputError("kernel exponents differ from the model parameters");
        if (q.n_phi % 2) throw InputError("n_phi must be even");
        build();
    }

    /// Unit btilde for the singular model, btilde from b for mollified cross-sections.
    static CollisionOperator make(const ModelParams& p, const CrossSection& xs, const CollisionQuadrature& q = {})
    {
        if (std::abs(xs.s - p.s) > 1e-14) throw InputError("cross-section s differs from the model parameters");
        if (xs.mode == XsMode::singular) return CollisionOperator(p, CarlemanKernel::unit(p.gamma, p.s), q);
        return CollisionOperator(p, CarlemanKernel::from_b(xs, p.gamma), q);
    }

    // radial multipliers
    double a_m(double L) const { return am_(L); }
    double m13(double L) const { return m13_(L); }
    double m14(double L) const { return m14_(L); }
    double triple_weight(double L) const { return wtr_(L); }
    double c_S() const { return cS_; }

    double multiplier(Piece p, double L) const
    {
        if (L > quad.v_max) throw InputError("|v| exceeds the tabulated range v_max");
        switch (p) {
        case Piece::L1db: return -am_(L);
        case Piece::L13d: return m13_(L);
        case Piece::L14d: return m14_(L);
        default: throw InputError("not a multiplication piece");
        }
    }

    /// beta-hat(rho0, r) at the k-th |h| node.
    double beta_hat(std::size_t k, double rho0) const { return beta_[k](rho0); }
    const std::vector<double>& r_nodes() const { return r_; }
    const std::vector<double>& r_weights() const { return rw_; }

    /// All ten pieces at v, in the order of `all_pieces`.
    template <class F>
    std::array<cplx, 10> pieces(F&& f, Vec3 v) const
    {
        std::array<cplx, 10> out{};
        cplx fv = f(v);
        double L = checked_norm(v);
        L1Out l1 = l1_integrals(f, v, fv);
        L2Out l2 = l2_integrals(f, v);
        out[0] = l2.r;
        out[1] = l2ca(f, v);
        out[2] = l2.c;
        out[3] = l2.d;
        out[4] = l1.da;
        out[5] = -am_(L) * fv;
        out[6] = l1.d11;
        out[7] = l1.d12;
        out[8] = m13_(L) * fv;
        out[9] = m14_(L) * fv;
        return out;
    }

    template <class F>
    cplx piece(Piece p, F&& f, Vec3 v) const
    {
        double L = checked_norm(v);
        switch (p) {
        case Piece::L1db:
        case Piece::L13d:
        case Piece::L14d: return multiplier(p, L) * f(v);
        case Piece::L2ca: return l2ca(f, v);
        case Piece::L2r:
        case Piece::L2c: return l2_integrals(f, v).r;
        case Piece::L2d: return l2_integrals(f, v).d;
        case Piece::L1da: return l1_integrals(f, v, f(v)).da;
        case Piece::L11d: return l1_integrals(f, v, f(v)).d11;
        case Piece::L12d: return l1_integrals(f, v, f(v)).d12;
        }
        return 0.0;
    }

    /// (L f)(v).
    template <class F>
    cplx apply(F&& f, Vec3 v) const
    {
        auto p = pieces(f, v);
        cplx s = 0;
        for (const cplx& z : p) s += z;
        return s;
    }

    template <class F>
    cplx apply_L1(F&& f, Vec3 v) const
    {
        auto p = pieces(f, v);
        return p[4] + p[5] + p[6] + p[7] + p[8] + p[9];
    }

    template <class F>
    cplx apply_L2(F&& f, Vec3 v) const
    {
        L2Out l2 = l2_integrals(f, v);
        return l2.r + l2.c + l2.d + l2ca(f, v);
    }

    /// First term of the triple norm density at v: int dv* dsigma B mu* |f - f'|^2.
    template <class F>
    double triple_density(F&& f, Vec3 v) const
    {
        return l1_integrals(f, v, f(v), true).tri;
    }

private:
    struct L1Out {
        cplx da = 0, d11 = 0, d12 = 0;
        double tri = 0;
    };
    struct L2Out {
        cplx r = 0, c = 0, d = 0;
    };

    static constexpr double kExpCut = 45.0;

    double checked_norm(Vec3 v) const
    {
        double L = norm(v);
        if (L > quad.v_max) throw InputError("|v| exceeds the tabulated range v_max");
        return L;
    }
    static double c0() { return std::pow(2 * pi, -1.5); }

    std::vector<double> r_, rw_, phi_r_;  // |h| nodes, weights of int r^{-1-2s} (.) dr, phi_delta(r)
    std::vector<CubicTable> beta_;
    std::vector<double> rho_, rhow_;  // |alpha| nodes for L2
    std::vector<CubicTable> j12_, j14_;
    CubicTable am_, m13_, m14_, wtr_;
    double cS_ = 0;
    Rule1D conv_inner_;  // Gauss-Jacobi start of the L2ca radial rule

    /// Panels in cos(theta) in [0, 1] clustered so that L cos(theta) has panels of width x_panel.
    Rule1D half_cos(double L, double xmax) const
    {
        std::vector<double> e{0.0};
        if (L * 1.0 <= quad.x_panel) {
            e.push_back(1.0);
        } else {
            double top = std::min(L, xmax);
            int n = (int)std::ceil(top / quad.x_panel - 1e-12);
            for (int i = 1; i <= n; ++i) e.push_back(std::min(1.0, top * i / n / L));
        }
        return composite(e, quad.x_order);
    }

    Rule1D full_cos(double L, double xmax) const
    {
        Rule1D h = half_cos(L, xmax), r;
        for (std::size_t i = h.size(); i-- > 0;) {
            r.x.push_back(-h.x[i]);
            r.w.push_back(h.w[i]);
        }
        for (std::size_t i = 0; i < h.size(); ++i) {
            r.x.push_back(h.x[i]);
            r.w.push_back(h.w[i]);
        }
        return r;
    }

    void build()
    {
        const double s = params.s, d = params.delta;
        // |h| nodes: Gauss-Jacobi on [0, d/2] for r^{1-2s} times a smooth factor, then Gauss-Legendre
        auto gj = gauss_jacobi_power(quad.n_jacobi, 1 - 2 * s, d / 2);
        for (std::size_t i = 0; i < gj.size(); ++i) {
            r_.push_back(gj.x[i]);
            rw_.push_back(gj.w[i] / (gj.x[i] * gj.x[i]));
        }
        auto mid = composite({d / 2, d}, quad.mid_order);
        double r_max = quad.v_max + quad.x_cut;
        auto far = composite(uniform_edges(d, r_max, quad.r_panel), quad.r_order);
        for (const Rule1D* R : {&mid, &far})
            for (std::size_t i = 0; i < R->size(); ++i) {
                r_.push_back(R->x[i]);
                rw_.push_back(R->w[i] * std::pow(R->x[i], -1 - 2 * s));
            }
        for (double r : r_) phi_r_.push_back(phi(r));

        const double h = quad.table_step, vm = quad.v_max;
        // beta-hat(rho0, r) = 2 pi int_r^inf rho (rho^2 + r^2)^p btilde e^{-(rho - rho0)^2/2} i0e(rho rho0) d rho
        beta_.resize(r_.size());
        for (std::size_t k = 0; k < r_.size(); ++k) {
            double r = r_[k];
            beta_[k] = tabulate(vm, h, [&](double rho0) {
                double hi = std::min(kernel.rho_max(r), std::max(r, rho0) + 12.0);
                if (hi <= r) return 0.0;
                Rule1D q = composite(uniform_edges(r, hi, 0.5), 8);
                double acc = 0;
                for (std::size_t i = 0; i < q.size(); ++i) {
                    double rho = q.x[i];
                    acc += q.w[i] * rho * kernel.plane_factor(rho, r) * std::exp(-0.5 * (rho - rho0) * (rho - rho0)) *
                           i0e(rho * rho0);
                }
                return 2 * pi * acc;
            });
        }

        // |alpha| nodes and J_c(rho0, rho)
        double rho_max = 2 * quad.x_cut;
        Rule1D ar = composite(uniform_edges(0, rho_max, quad.r_panel), quad.r_order);
        rho_ = ar.x;
        rhow_ = ar.w;
        j12_.resize(rho_.size());
        j14_.resize(rho_.size());
        for (std::size_t k = 0; k < rho_.size(); ++k) {
            j12_[k] = tabulate(vm, h, [&](double rho0) { return j_value(0.5, rho0, rho_[k]); });
            j14_[k] = tabulate(vm, h, [&](double rho0) { return j_value(0.25, rho0, rho_[k]); });
        }

        // radial multipliers
        am_ = tabulate(vm, h, [&](double L) { return radial_multiplier(L, 0); });
        m13_ = tabulate(vm, h, [&](double L) { return radial_multiplier(L, 1); });
        m14_ = tabulate(vm, h, [&](double L) { return radial_multiplier(L, 2); });
        wtr_ = tabulate(vm, h, [&](double L) { return radial_multiplier(L, 3); });

        // cancellation constant: 2 pi int sin(theta) b (cos^{-3-gamma}(theta/2) - 1)
        cS_ = 2 * pi *
              detail::cancelling_integral(
                  kernel.theta_lower(), [&](double th) { return kernel.sin_b(th); },
                  [&](double th) { return std::pow(std::cos(0.5 * th), -3 - params.gamma) - 1; }, 0.05);
        double g2 = 2 + params.gamma;
        conv_inner_ = gauss_jacobi_power(quad.conv_order, g2, 0.5);
    }

    /// J_c(rho0, rho) = 2 pi int_0^rho t^{-1-2s} plane_factor(rho, t) [e^{-c(t-rho0)^2} i0e(2c t rho0) - e^{-c rho0^2}] dt
    double j_value(double c, double rho0, double rho) const
    {
        const double s = params.s;
        double tlo = 0;
        if (kernel.mode == CarlemanKernel::Mode::from_b && kernel.xs.lower() > 0)
            tlo = rho * std::tan(0.5 * kernel.xs.lower());
        auto bracket = [&](double t) {
            return std::exp(-c * (t - rho0) * (t - rho0)) * i0e(2 * c * t * rho0) - std::exp(-c * rho0 * rho0);
        };
        double acc = 0;
        double t1 = tlo;
        if (tlo == 0) {
            t1 = std::min(rho, 0.5);
            auto gj = gauss_jacobi_power(quad.n_jacobi, 1 - 2 * s, t1);
            for (std::size_t i = 0; i < gj.size(); ++i) {
                double t = gj.x[i];
                acc += gj.w[i] * kernel.plane_factor(rho, t) * bracket(t) / (t * t);
            }
        }
        if (rho > t1) {
            Rule1D q = composite(uniform_edges(t1, rho, 0.5), 8);
            for (std::size_t i = 0; i < q.size(); ++i) {
                double t = q.x[i];
                acc += q.w[i] * std::pow(t, -1 - 2 * s) * kernel.plane_factor(rho, t) * bracket(t);
            }
        }
        return 2 * pi * acc;
    }

    /// 0: a_m, 1: L13 multiplier, 2: L14 multiplier, 3: triple-norm weight.
    double radial_multiplier(double L, int which) const
    {
        Rule1D cr = full_cos(L, 1e300);
        double acc = 0;
        for (std::size_t i = 0; i < cr.size(); ++i) {
            double ct = cr.x[i], st = std::sqrt(std::max(0.0, 1 - ct * ct));
            double x = ct * L, rho0 = st * L, sub = 0;
            for (std::size_t k = 0; k < r_.size(); ++k) {
                double r = r_[k], ph = phi_r_[k];
                if (which == 0 && ph == 1) continue;
                if (which == 1 || which == 2)
                    if (ph == 0) break;
                double eB = 0.5 * (x - r) * (x - r), e0 = 0.5 * x * x, ep = 0.25 * (x * x + (x - r) * (x - r));
                if (std::min({eB, e0, ep}) > kExpCut) continue;
                double bh = c0() * beta_[k](rho0);
                double gB = bh * std::exp(-eB), g0 = bh * std::exp(-e0), gp = bh * std::exp(-ep), val = 0;
                switch (which) {
                case 0: val = (1 - ph) * gB; break;
                case 1: val = ph * (g0 - gB); break;
                case 2: val = ph * (gp - g0); break;
                default: val = g0 - 2 * gp + gB; break;
                }
                sub += rw_[k] * val;
            }
            acc += cr.w[i] * sub;
        }
        return 2 * pi * acc;
    }

    template <class F>
    L1Out l1_integrals(F& f, Vec3 v, cplx fv, bool triple = false) const
    {
        L1Out out;
        double L = norm(v);
        Vec3 e = L > 0 ? v / L : Vec3{0, 0, 1}, e1, e2;
        orthonormal_frame(e, e1, e2);
        Rule1D cr = half_cos(L, triple ? 1e300 : quad.x_cut);
        const int nph = quad.n_phi;
        std::vector<Vec3> ring(nph);
        cplx da = 0, d11 = 0, d12 = 0;
        double tri = 0;
        for (std::size_t i = 0; i < cr.size(); ++i) {
            double ct = cr.x[i], st = std::sqrt(std::max(0.0, 1 - ct * ct));
            double x = ct * L, rho0 = st * L;
            if (!triple && 0.25 * x * x > kExpCut) continue;
            for (int j = 0; j < nph; ++j) {
                double a = 2 * pi * (j + 0.5) / nph;
                ring[j] = ct * e + st * (std::cos(a) * e1 + std::sin(a) * e2);
            }
            double dw = cr.w[i] * 2 * pi / nph;
            cplx sda = 0, s11 = 0, s12 = 0;
            double stri = 0;
            for (std::size_t k = 0; k < r_.size(); ++k) {
                double r = r_[k], ph = phi_r_[k];
                double e0 = 0.5 * x * x, ep = 0.25 * (x * x + (x - r) * (x - r)),
                       em = 0.25 * (x * x + (x + r) * (x + r));
                double eBp = 0.5 * (x - r) * (x - r), eBm = 0.5 * (x + r) * (x + r);
                if (!triple && std::min(ep, em) > kExpCut) continue;
                if (triple && std::min({eBp, eBm}) > kExpCut) continue;
                double bh = c0() * beta_[k](rho0);
                double g0 = bh * std::exp(-e0), gp = bh * std::exp(-ep), gm = bh * std::exp(-em);
                double w = rw_[k];
                if (triple) {
                    double gBp = bh * std::exp(-eBp), gBm = bh * std::exp(-eBm);
                    double acc = 0;
                    for (int j = 0; j < nph; ++j) {
                        cplx fp = f(v - r * ring[j]), fm = f(v + r * ring[j]);
                        acc += gBp * std::norm(fv - fp) + gBm * std::norm(fv - fm);
                    }
                    stri += w * acc;
                    continue;
                }
                cplx sum_p = 0, sum_m = 0;
                for (int j = 0; j < nph; ++j) {
                    sum_p += f(v - r * ring[j]);
                    sum_m += f(v + r * ring[j]);
                }
                double n = nph;
                if (ph < 1) sda += w * (1 - ph) * (gp * sum_p + gm * sum_m);
                if (ph > 0) {
                    s12 += w * ph * g0 * (sum_p + sum_m - 2 * n * fv);
                    s11 += w * ph * ((gp - g0) * (sum_p - n * fv) + (gm - g0) * (sum_m - n * fv));
                }
            }
            da += dw * sda;
            d11 += dw * s11;
            d12 += dw * s12;
            tri += dw * stri;
        }
        out.da = da;
        out.d11 = d11;
        out.d12 = d12;
        out.tri = tri;
        return out;
    }

    template <class F>
    L2Out l2_integrals(F& f, Vec3 v) const
    {
        L2Out out;
        double L = norm(v);
        Vec3 e = L > 0 ? v / L : Vec3{0, 0, 1}, e1, e2;
        orthonormal_frame(e, e1, e2);
        Rule1D cr = full_cos(L, quad.x_cut);
        const int nph = quad.n_phi;
        std::vector<Vec3> ring(nph);
        cplx rc = 0, dd = 0;
        for (std::size_t i = 0; i < cr.size(); ++i) {
            double ct = cr.x[i], st = std::sqrt(std::max(0.0, 1 - ct * ct));
            double y = ct * L, rho0 = st * L;
            if (0.25 * y * y > kExpCut) continue;
            for (int j = 0; j < nph; ++j) {
                double a = 2 * pi * (j + 0.5) / nph;
                ring[j] = ct * e + st * (std::cos(a) * e1 + std::sin(a) * e2);
            }
            double dw = cr.w[i] * 2 * pi / nph, g4 = std::exp(-0.25 * rho0 * rho0);
            cplx src = 0, sd = 0;
            for (std::size_t k = 0; k < rho_.size(); ++k) {
                double rho = rho_[k], ex = 0.25 * (y * y + (y + rho) * (y + rho));
                if (ex > kExpCut) continue;
                double pref = c0() * std::exp(-ex) * rhow_[k] * rho;
                double j14 = j14_[k](rho0), j12 = j12_[k](rho0);
                cplx sum = 0;
                for (int j = 0; j < nph; ++j) sum += f(v + rho * ring[j]);
                src += pref * g4 * j14 * sum;
                sd += pref * (j12 - 2 * g4 * j14) * sum;
            }
            rc += dw * src;
            dd += dw * sd;
        }
        out.r = out.c = rc;
        out.d = dd;
        return out;
    }

    /// mu^{1/2}(v) c_S int |z|^gamma (mu^{1/2} f)(v - z) dz
    template <class F>
    cplx l2ca(F& f, Vec3 v) const
    {
        double L = norm(v);
        if (0.25 * L * L > kExpCut) return 0.0;
        Vec3 e = L > 0 ? v / L : Vec3{0, 0, 1}, e1, e2;
        orthonormal_frame(e, e1, e2);
        const Rule1D& zr = conv_inner_;  // carries the weight z^{2+gamma}
        Rule1D far = composite(uniform_edges(0.5, L + 2 * quad.x_cut, quad.conv_panel), quad.conv_order);
        std::vector<double> zx = zr.x, zw = zr.w;
        for (std::size_t i = 0; i < far.size(); ++i) {
            zx.push_back(far.x[i]);
            zw.push_back(far.w[i] * std::pow(far.x[i], 2 + params.gamma));
        }
        Rule1D cr = composite(uniform_edges(-1, 1, 0.5), quad.x_order);
        const int nph = quad.n_phi;
        cplx acc = 0;
        for (std::size_t i = 0; i < cr.size(); ++i) {
            double ct = cr.x[i], st = std::sqrt(std::max(0.0, 1 - ct * ct));
            for (int j = 0; j < nph; ++j) {
                double a = 2 * pi * (j + 0.5) / nph;
                Vec3 n = ct * e + st * (std::cos(a) * e1 + std::sin(a) * e2);
                cplx sub = 0;
                for (std::size_t k = 0; k < zx.size(); ++k) {
                    Vec3 w = v - zx[k] * n;
                    double q = norm2(w);
                    if (0.25 * q > kExpCut) continue;
                    sub += zw[k] * sqrt_maxwellian(w) * f(w);
                }
                acc += cr.w[i] * (2 * pi / nph) * sub;
            }
        }
        return sqrt_maxwellian(v) * cS_ * acc;
    }
};

// ---------------------------------------------------------------- sigma route

/// Direct sigma-representation value of one piece at v (mollified cross-sections,
/// B = |v - v*|^gamma b); the independent cross-check of the Carleman route.
template <class Fn>
cplx sigma_piece(Piece p, Fn&& f, Vec3 v, const ModelParams& prm, const CrossSection& xs, const SigmaQuadrature& q)
{
    CutoffPhi phi{prm.delta};
    auto sm = [](Vec3 u) { return sqrt_maxwellian(u); };
    auto integrand = [&](Vec3 v0, Vec3 vs, Vec3 vp, Vec3 vsp) -> cplx {
        double ph = phi(norm(vp - v0)), pt = 1 - ph;
        switch (p) {
        case Piece::L1da: return pt * sm(vs) * sm(vsp) * f(vp);
        case Piece::L1db: return -pt * sm(vs) * sm(vs) * f(v0);
        case Piece::L11d: return ph * sm(vsp) * (f(vp) - f(v0)) * (sm(vs) - sm(vsp));
        case Piece::L14d: return ph * sm(vsp) * (sm(vs) - sm(vsp)) * f(v0);
        case Piece::L12d: return ph * sm(vsp) * sm(vsp) * (f(vp) - f(v0));
        case Piece::L13d: return ph * (sm(vsp) * sm(vsp) - sm(vs) * sm(vs)) * f(v0);
        case Piece::L2r: return sm(vsp) * f(vsp) * (sm(vp) - sm(v0));
        case Piece::L2ca: return sm(v0) * (sm(vsp) * f(vsp) - sm(vs) * f(vs));
        case Piece::L2c: return sm(v0) * (sm(vs) - sm(vsp)) * f(vsp);
        case Piece::L2d: return (sm(vp) - sm(v0)) * (sm(vs) - sm(vsp)) * f(vsp);
        }
        return 0.0;
    };
    return sigma_integrate(integrand, v, xs, q, PowerKinetic{prm.gamma});
}

// ---------------------------------------------------------------- grid application

/// Trigonometric interpolant of a grid field, consistent with the half-shifted dual lattice.
struct TrigInterpolant {
    GridField f;

    static double dirichlet(double t, int N, double R)
    {
        double th = pi * t / (2 * R), sn = std::sin(th);
        if (std::abs(sn) < 1e-12) return std::cos(N * th) / std::cos(th);
        return std::sin(N * th) / (N * sn);
    }

    cplx operator()(Vec3 w) const
    {
        const GridSpec& g = f.spec;
        const int N = g.N;
        std::vector<double> dx(N), dy(N), dz(N);
        for (int j = 0; j < N; ++j) {
            dx[j] = dirichlet(w.x - g.x(j), N, g.R);
            dy[j] = dirichlet(w.y - g.x(j), N, g.R);
            dz[j] = dirichlet(w.z - g.x(j), N, g.R);
        }
        cplx acc = 0;
        std::size_t idx = 0;
        for (int a = 0; a < N; ++a) {
            cplx sa = 0;
            for (int b = 0; b < N; ++b) {
                cplx sb = 0;
                for (int c = 0; c < N; ++c) sb += dz[c] * f.values[idx++];
                sa += dy[b] * sb;
            }
            acc += dx[a] * sa;
        }
        return acc;
    }
};

template <class F>
GridField apply_L(const CollisionOperator& op, F&& f, const GridSpec& g)
{
    GridField out(g);
    parallel_for(g.size(), [&](std::size_t i) { out[i] = op.apply(f, g.point(i)); });
    return out;
}

inline GridField apply_L(const CollisionOperator& op, const GridField& f)
{
    TrigInterpolant ti{f};
    return apply_L(op, ti, f.spec);
}

template <class F>
GridField apply_piece(const CollisionOperator& op, Piece p, F&& f, const GridSpec& g)
{
    GridField out(g);
    parallel_for(g.size(), [&](std::size_t i) { out[i] = op.piece(p, f, g.point(i)); });
    return out;
}

inline GridField apply_piece(const CollisionOperator& op, Piece p, const GridField& f)
{
    if (is_multiplication(p)) {
        GridField out(f.spec);
        for (std::size_t i = 0; i < f.spec.size(); ++i) out[i] = op.multiplier(p, norm(f.spec.point(i))) * f[i];
        return out;
    }
    TrigInterpolant ti{f};
    return apply_piece(op, p, ti, f.spec);
}

// ---------------------------------------------------------------- quadratic forms

/// Tensor Gauss-Hermite rule adapted to a test function: nodes c + scale z.
struct HermiteRule {
    std::vector<Vec3> x;
    std::vector<double> w;

    static HermiteRule around(Vec3 c, double scale, int n)
    {
        // Golub-Welsch for the weight e^{-z^2}
        Eigen::VectorXd d = Eigen::VectorXd::Zero(n), sub(std::max(1, n - 1));
        for (int k = 1; k < n; ++k) sub(k - 1) = std::sqrt(k / 2.0);
        std::vector<double> z(n), wz(n);
        if (n == 1) {
            z[0] = 0;
            wz[0] = std::sqrt(pi);
        } else {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
            es.computeFromTridiagonal(d, sub.head(n - 1));
            for (int i = 0; i < n; ++i) {
                z[i] = es.eigenvalues()(i);
                double v0 = es.eigenvectors()(0, i);
                wz[i] = std::sqrt(pi) * v0 * v0 * std::exp(z[i] * z[i]);
            }
        }
        HermiteRule r;
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                for (int c3 = 0; c3 < n; ++c3) {
                    r.x.push_back(c + scale * Vec3{z[a], z[b], z[c3]});
                    r.w.push_back(scale * scale * scale * wz[a] * wz[b] * wz[c3]);
                }
        return r;
    }
};

/// -(L f, f) as a continuum integral with a Hermite rule adapted to f.
inline double dirichlet_form(const CollisionOperator& op, const TestFunction& f, int n_hermite = 10)
{
    auto hr = HermiteRule::around(f.center, f.scale, n_hermite);
    std::vector<double> part(hr.x.size());
    parallel_for(hr.x.size(), [&](std::size_t i) {
        cplx fv = f(hr.x[i]);
        if (std::abs(fv) < 1e-14) return;
        part[i] = -hr.w[i] * (op.apply(f, hr.x[i]) * std::conj(fv)).real();
    });
    KahanSum t;
    for (double p : part) t.add(p);
    return t.value();
}

// ---------------------------------------------------------------- null space

/// Orthonormal basis of span{mu^{1/2}, v_i mu^{1/2}, |v|^2 mu^{1/2}} on the grid (modified Gram-Schmidt).
inline std::vector<GridField> null_space_basis(const GridSpec& g)
{
    std::vector<GridField> b;
    for (int k = 0; k < 5; ++k) {
        GridField e(g);
        for (std::size_t i = 0; i < g.size(); ++i) {
            Vec3 v = g.point(i);
            double m = sqrt_maxwellian(v);
            double poly = k == 0 ? 1 : k == 1 ? v.x : k == 2 ? v.y : k == 3 ? v.z : norm2(v);
            e[i] = poly * m;
        }
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& q : b) {
                cplx c = inner(q, e);
                for (std::size_t i = 0; i < g.size(); ++i) e[i] -= c * q[i];
            }
        double n = l2_norm(e);
        for (auto& z : e.values) z /= n;
        b.push_back(std::move(e));
    }
    return b;
}

inline GridField projector_P(const GridField& f)
{
    auto b = null_space_basis(f.spec);
    GridField out(f.spec);
    for (const auto& q : b) {
        cplx c = inner(q, f);
        for (std::size_t i = 0; i < f.spec.size(); ++i) out[i] += c * q[i];
    }
    return out;
}

// ---------------------------------------------------------------- triple norm

/// Both terms of the triple norm squared, the outer v-integral as a grid sum.
template <class F>
double triple_norm(const CollisionOperator& op, F&& f, const GridSpec& g)
{
    std::vector<double> part(g.size());
    const double cell = g.cell();
    parallel_for(g.size(), [&](std::size_t i) {
        Vec3 v = g.point(i);
        cplx fv = f(v);
        part[i] = cell * (op.triple_density(f, v) + std::norm(fv) * op.triple_weight(norm(v)));
    });
    KahanSum t;
    for (double p : part) t.add(p);
    return t.value();
}

// ---------------------------------------------------------------- matrix export

/// Dense matrix of a linear grid map, column by column on the unit vectors (row-major output).
template <class Apply>
std::vector<cplx> dense_matrix(const GridSpec& g, Apply&& A)
{
    const std::size_t n = g.size();
    std::vector<cplx> m(n * n);
    for (std::size_t j = 0; j < n; ++j) {
        GridField e(g);
        e[j] = 1;
        GridField col = A(e);
        for (std::size_t i = 0; i < n; ++i) m[i * n + j] = col[i];
    }
    return m;
}

}  // namespace boltzsym
