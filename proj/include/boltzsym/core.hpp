#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include <Eigen/Eigenvalues>

namespace boltzsym {

using cplx = std::complex<double>;
inline constexpr double pi = std::numbers::pi;

/// Bad arguments: wrong shapes, out-of-range parameters, non-unit vectors.
struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Quadrature or solver did not reach the requested accuracy.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Vec3 {
    double x = 0, y = 0, z = 0;

    constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

    friend constexpr Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend constexpr Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend constexpr Vec3 operator-(Vec3 a) { return {-a.x, -a.y, -a.z}; }
    friend constexpr Vec3 operator*(double c, Vec3 a) { return {c * a.x, c * a.y, c * a.z}; }
    friend constexpr Vec3 operator*(Vec3 a, double c) { return c * a; }
    friend constexpr Vec3 operator/(Vec3 a, double c) { return {a.x / c, a.y / c, a.z / c}; }
    Vec3& operator+=(Vec3 b) { x += b.x; y += b.y; z += b.z; return *this; }
    Vec3& operator-=(Vec3 b) { x -= b.x; y -= b.y; z -= b.z; return *this; }
};

inline constexpr double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline constexpr Vec3 cross(Vec3 a, Vec3 b)
{
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline constexpr double norm2(Vec3 a) { return dot(a, a); }
inline double norm(Vec3 a) { return std::sqrt(norm2(a)); }

/// <v> = (1+|v|^2)^{1/2}
inline double jbracket(Vec3 v) { return std::sqrt(1.0 + norm2(v)); }
inline double jbracket(double t) { return std::sqrt(1.0 + t * t); }

/// Orthonormal pair (e1, e2) completing the unit vector w to a right-handed frame.
inline void orthonormal_frame(Vec3 w, Vec3& e1, Vec3& e2)
{
    Vec3 a = std::abs(w.x) < 0.6 ? Vec3{1, 0, 0} : (std::abs(w.y) < 0.6 ? Vec3{0, 1, 0} : Vec3{0, 0, 1});
    e1 = a - dot(a, w) * w;
    e1 = e1 / norm(e1);
    e2 = cross(w, e1);
}

// ---------------------------------------------------------------- threads

namespace detail {
inline int& thread_cap()
{
    static int n = [] {
        if (const char* e = std::getenv("BOLTZSYM_THREADS")) {
            int k = std::atoi(e);
            if (k > 0) return k;
        }
        return 1;
    }();
    return n;
}
}  // namespace detail

inline void set_threads(int n) { detail::thread_cap() = std::max(1, n); }
inline int threads() { return detail::thread_cap(); }

/// Static block partition; each index is written by exactly one worker, so
/// results do not depend on the thread count.
template <class F>
void parallel_for(std::size_t n, F&& body)
{
    int nt = std::min<std::size_t>(threads(), std::max<std::size_t>(n, 1));
    if (nt <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::size_t chunk = (n + nt - 1) / nt;
    for (int t = 0; t < nt; ++t) {
        std::size_t lo = t * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------- quadrature

struct Rule1D {
    std::vector<double> x, w;
    std::size_t size() const { return x.size(); }
};

/// Gauss-Legendre nodes on [-1, 1].
inline Rule1D gauss_legendre(int n)
{
    Rule1D r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(pi * (i + 0.75) / (n + 0.5)), dp = 0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1, p1 = z;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1, p1 = z;
            dp = n * (z * p1 - p0) / (z * z - 1);
            double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        r.x[i] = -z;
        r.x[n - 1 - i] = z;
        r.w[i] = r.w[n - 1 - i] = 2 / ((1 - z * z) * dp * dp);
    }
    return r;
}

inline const Rule1D& gl_cached(int n)
{
    static thread_local std::vector<Rule1D> cache(129);
    if (n < 1 || n > 128) throw InputError("gauss_legendre order out of range");
    if (cache[n].x.empty()) cache[n] = gauss_legendre(n);
    return cache[n];
}

/// Composite Gauss-Legendre over the consecutive panels of `edges`.
inline Rule1D composite(const std::vector<double>& edges, int per_panel)
{
    const Rule1D& g = gl_cached(per_panel);
    Rule1D r;
    for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
        double a = edges[p], b = edges[p + 1];
        if (b <= a) continue;
        double h = 0.5 * (b - a), c = 0.5 * (a + b);
        for (std::size_t i = 0; i < g.size(); ++i) {
            r.x.push_back(c + h * g.x[i]);
            r.w.push_back(h * g.w[i]);
        }
    }
    return r;
}

/// Panels on [lo, hi] geometrically graded toward lo (ratio q, innermost width
/// `inner` measured from lo) and uniform beyond `uniform_from`.
inline std::vector<double> graded_edges(double lo, double hi, double inner, double q, double max_width)
{
    std::vector<double> e{lo};
    if (hi <= lo) return {lo, lo};
    double w = std::min(inner, hi - lo);
    double x = lo + w;
    e.push_back(x);
    while (x < hi - 1e-14) {
        w = std::min(w / q, max_width);
        x = std::min(hi, x + w);
        e.push_back(x);
    }
    return e;
}

/// Uniform panels of width at most h on [a, b].
inline std::vector<double> uniform_edges(double a, double b, double h)
{
    int n = std::max(1, (int)std::ceil((b - a) / h - 1e-12));
    std::vector<double> e(n + 1);
    for (int i = 0; i <= n; ++i) e[i] = a + (b - a) * i / n;
    return e;
}

/// e^{-x} I_0(x) for x >= 0: power series below 17, Hankel expansion above.
inline double i0e(double x)
{
    x = std::abs(x);
    if (x < 17) {
        double q = 0.25 * x * x, term = 1, sum = 1;
        for (int k = 1; k < 80; ++k) {
            term *= q / (double(k) * k);
            sum += term;
            if (term < 1e-17 * sum) break;
        }
        return std::exp(-x) * sum;
    }
    double t = 1 / (8 * x), term = 1, sum = 1;
    for (int k = 1; k < 60; ++k) {
        double next = term * (2 * k - 1) * (2 * k - 1) * t / k;
        if (next > term) break;
        term = next;
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return sum / std::sqrt(2 * pi * x);
}

/// Gauss-Jacobi rule for int_0^L r^beta g(r) dr, beta > -1 (Golub-Welsch).
inline Rule1D gauss_jacobi_power(int n, double beta, double L)
{
    if (!(beta > -1) || n < 1) throw InputError("gauss_jacobi_power: need beta > -1 and n >= 1");
    const double a = 0, b = beta;
    Eigen::VectorXd diag(n), sub(std::max(n - 1, 1));
    for (int k = 0; k < n; ++k) {
        double s2 = 2 * k + a + b;
        diag(k) = k == 0 ? (b - a) / (a + b + 2) : (b * b - a * a) / (s2 * (s2 + 2));
        if (k >= 1) {
            double num = 4.0 * k * (k + a) * (k + b) * (k + a + b);
            double den = s2 * s2 * (s2 + 1) * (s2 - 1);
            sub(k - 1) = std::sqrt(num / den);
        }
    }
    Rule1D r;
    r.x.resize(n);
    r.w.resize(n);
    double mu0 = std::pow(2.0, a + b + 1) * std::tgamma(a + 1) * std::tgamma(b + 1) / std::tgamma(a + b + 2);
    if (n == 1) {
        r.x[0] = diag(0);
        r.w[0] = mu0;
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
        es.computeFromTridiagonal(diag, sub.head(n - 1));
        for (int i = 0; i < n; ++i) {
            r.x[i] = es.eigenvalues()(i);
            double v0 = es.eigenvectors()(0, i);
            r.w[i] = mu0 * v0 * v0;
        }
    }
    // (1 + x)^beta on [-1, 1]  ->  r^beta on [0, L]
    double sc = std::pow(L / 2, beta + 1);
    for (int i = 0; i < n; ++i) {
        r.x[i] = L * (1 + r.x[i]) / 2;
        r.w[i] *= sc;
    }
    return r;
}

/// Unit-sphere rule: Gauss-Legendre in the polar cosine (panels given in
/// [-1, 1]) times the periodic trapezoid rule in azimuth, about `pole`.
struct SphereRule {
    std::vector<Vec3> n;
    std::vector<double> w;
    std::size_t size() const { return n.size(); }
};

inline SphereRule sphere_rule(Vec3 pole, const std::vector<double>& cos_edges, int per_panel, int n_phi,
                              double phase = 0.0)
{
    SphereRule r;
    double pn = norm(pole);
    Vec3 p = pn > 0 ? pole / pn : Vec3{0, 0, 1};
    Vec3 e1, e2;
    orthonormal_frame(p, e1, e2);
    Rule1D c = composite(cos_edges, per_panel);
    for (std::size_t i = 0; i < c.size(); ++i) {
        double ct = c.x[i], st = std::sqrt(std::max(0.0, 1 - ct * ct));
        for (int j = 0; j < n_phi; ++j) {
            double ph = 2 * pi * (j + phase) / n_phi;
            r.n.push_back(ct * p + st * std::cos(ph) * e1 + st * std::sin(ph) * e2);
            r.w.push_back(c.w[i] * 2 * pi / n_phi);
        }
    }
    return r;
}

inline SphereRule sphere_rule(int n_cos, int n_phi)
{
    return sphere_rule({0, 0, 1}, {-1.0, 1.0}, n_cos, n_phi, 0.5);
}

/// Neumaier-compensated accumulator.
struct KahanSum {
    double s = 0, c = 0;
    void add(double x)
    {
        double t = s + x;
        if (std::abs(s) >= std::abs(x))
            c += (s - t) + x;
        else
            c += (x - t) + s;
        s = t;
    }
    double value() const { return s + c; }
};

/// Compensated sum for real or complex terms.
template <class T>
struct SumOf {
    KahanSum re;
    void add(double x) { re.add(x); }
    double value() const { return re.value(); }
};

template <>
struct SumOf<cplx> {
    KahanSum re, im;
    void add(cplx z)
    {
        re.add(z.real());
        im.add(z.imag());
    }
    cplx value() const { return {re.value(), im.value()}; }
};

/// Least-squares slope of y against x.
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    std::size_t n = x.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) mx += x[i], my += y[i];
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    return sxy / sxx;
}

inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
    }
    return fit_slope(lx, ly);
}

}  // namespace boltzsym
