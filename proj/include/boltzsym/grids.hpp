#pragma once

#include "core.hpp"
#include "model.hpp"

#include <fftw3.h>

#include <cstring>
#include <fstream>
#include <mutex>
#include <random>

namespace boltzsym {

/// Uniform cell-centred grid on [-R, R]^dim with N points per axis.
/// Dual lattice eta_k = (k + 1/2) pi / R, k = -N/2 .. N/2-1.
struct GridSpec {
    double R = 8.0;
    int N = 16;
    int dim = 3;

    GridSpec() = default;
    GridSpec(double R_, int N_, int dim_ = 3) : R(R_), N(N_), dim(dim_) { validate(); }

    void validate() const
    {
        if (!(R > 0)) throw InputError("grid half width must be positive");
        if (N < 8 || N % 2) throw InputError("N must be even and >= 8");
        if (dim != 1 && dim != 3) throw InputError("grid dim must be 1 or 3");
    }

    double dv() const { return 2 * R / N; }
    double deta() const { return pi / R; }
    double x(int j) const { return -R + (j + 0.5) * dv(); }
    double eta(int k) const { return (k - N / 2 + 0.5) * deta(); }
    std::size_t size() const { return dim == 3 ? (std::size_t)N * N * N : (std::size_t)N; }
    double cell() const { return std::pow(dv(), dim); }
    double dual_cell() const { return std::pow(deta(), dim); }

    /// Row-major index with the last axis fastest.
    Vec3 point(std::size_t i) const
    {
        if (dim == 1) return {x((int)i), 0, 0};
        int a = i / (N * N), b = (i / N) % N, c = i % N;
        return {x(a), x(b), x(c)};
    }
    Vec3 freq(std::size_t k) const
    {
        if (dim == 1) return {eta((int)k), 0, 0};
        int a = k / (N * N), b = (k / N) % N, c = k % N;
        return {eta(a), eta(b), eta(c)};
    }
    /// Index of the mirrored point -v.
    std::size_t mirror(std::size_t i) const
    {
        if (dim == 1) return N - 1 - i;
        int a = i / (N * N), b = (i / N) % N, c = i % N;
        return ((std::size_t)(N - 1 - a) * N + (N - 1 - b)) * N + (N - 1 - c);
    }
    bool operator==(const GridSpec& o) const { return R == o.R && N == o.N && dim == o.dim; }
};

struct GridField {
    GridSpec spec;
    std::vector<cplx> values;

    GridField() = default;
    explicit GridField(const GridSpec& g) : spec(g), values(g.size()) {}
    GridField(const GridSpec& g, std::vector<cplx> v) : spec(g), values(std::move(v))
    {
        if (values.size() != spec.size()) throw InputError("field length does not match grid");
    }
    std::size_t size() const { return values.size(); }
    cplx& operator[](std::size_t i) { return values[i]; }
    const cplx& operator[](std::size_t i) const { return values[i]; }
};

inline GridField operator+(const GridField& a, const GridField& b)
{
    GridField r(a.spec);
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}
inline GridField operator-(const GridField& a, const GridField& b)
{
    GridField r(a.spec);
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}
inline GridField operator*(cplx c, const GridField& a)
{
    GridField r(a.spec);
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = c * a[i];
    return r;
}

inline double l2_norm(const GridField& f)
{
    KahanSum s;
    for (auto z : f.values) s.add(std::norm(z));
    return std::sqrt(s.value() * f.spec.cell());
}

/// (f, g) = sum f conj(g) dv^dim
inline cplx inner(const GridField& f, const GridField& g)
{
    KahanSum re, im;
    for (std::size_t i = 0; i < f.size(); ++i) {
        cplx z = f[i] * std::conj(g[i]);
        re.add(z.real());
        im.add(z.imag());
    }
    return cplx(re.value(), im.value()) * f.spec.cell();
}

template <class W>
GridField multiply(const GridField& f, W&& w)
{
    GridField r(f.spec);
    for (std::size_t i = 0; i < f.size(); ++i) r[i] = w(f.spec.point(i)) * f[i];
    return r;
}

// ---------------------------------------------------------------- DFT

namespace detail {
inline std::mutex& fftw_mutex()
{
    static std::mutex m;
    return m;
}

/// Per-axis phase tables: A_k = exp(-i eta_k v_0), B_j = exp(-i eta_0 (v_j - v_0)).
struct Phases {
    std::vector<cplx> A, B;
    explicit Phases(const GridSpec& g) : A(g.N), B(g.N)
    {
        for (int k = 0; k < g.N; ++k) A[k] = std::polar(1.0, -g.eta(k) * g.x(0));
        for (int j = 0; j < g.N; ++j) B[j] = std::polar(1.0, -g.eta(0) * (g.x(j) - g.x(0)));
    }
};

inline void raw_fft(std::vector<cplx>& data, const GridSpec& g, int sign)
{
    fftw_plan p;
    auto* d = reinterpret_cast<fftw_complex*>(data.data());
    {
        std::lock_guard<std::mutex> lk(fftw_mutex());
        if (g.dim == 3)
            p = fftw_plan_dft_3d(g.N, g.N, g.N, d, d, sign, FFTW_ESTIMATE);
        else
            p = fftw_plan_dft_1d(g.N, d, d, sign, FFTW_ESTIMATE);
    }
    fftw_execute(p);
    std::lock_guard<std::mutex> lk(fftw_mutex());
    fftw_destroy_plan(p);
}

template <class F>
void for_each_index(const GridSpec& g, F&& f)
{
    if (g.dim == 1) {
        for (int a = 0; a < g.N; ++a) f((std::size_t)a, a, 0, 0);
        return;
    }
    std::size_t i = 0;
    for (int a = 0; a < g.N; ++a)
        for (int b = 0; b < g.N; ++b)
            for (int c = 0; c < g.N; ++c, ++i) f(i, a, b, c);
}
}  // namespace detail

/// fhat(eta_k) = sum_j f(v_j) exp(-i eta_k . v_j) dv^dim
inline std::vector<cplx> dft_forward(const GridField& f)
{
    const GridSpec& g = f.spec;
    detail::Phases ph(g);
    std::vector<cplx> d(f.values);
    detail::for_each_index(g, [&](std::size_t i, int a, int b, int c) {
        d[i] *= g.dim == 3 ? ph.B[a] * ph.B[b] * ph.B[c] : ph.B[a];
    });
    detail::raw_fft(d, g, FFTW_FORWARD);
    double cell = g.cell();
    detail::for_each_index(g, [&](std::size_t i, int a, int b, int c) {
        d[i] *= cell * (g.dim == 3 ? ph.A[a] * ph.A[b] * ph.A[c] : ph.A[a]);
    });
    return d;
}

/// f(v_j) = (2 pi)^{-dim} sum_k fhat(eta_k) exp(i eta_k . v_j) deta^dim
inline GridField dft_inverse(const GridSpec& g, std::vector<cplx> d)
{
    detail::Phases ph(g);
    detail::for_each_index(g, [&](std::size_t i, int a, int b, int c) {
        d[i] *= std::conj(g.dim == 3 ? ph.A[a] * ph.A[b] * ph.A[c] : ph.A[a]);
    });
    detail::raw_fft(d, g, FFTW_BACKWARD);
    double sc = g.dual_cell() / std::pow(2 * pi, g.dim);
    detail::for_each_index(g, [&](std::size_t i, int a, int b, int c) {
        d[i] *= sc * std::conj(g.dim == 3 ? ph.B[a] * ph.B[b] * ph.B[c] : ph.B[a]);
    });
    return GridField(g, std::move(d));
}

/// Fourier multiplier m(eta).
template <class M>
GridField fourier_multiply(const GridField& f, M&& m)
{
    auto d = dft_forward(f);
    for (std::size_t k = 0; k < d.size(); ++k) d[k] *= m(f.spec.freq(k));
    return dft_inverse(f.spec, std::move(d));
}

/// Plancherel-side norm: ((2 pi)^{-dim} sum |fhat|^2 deta^dim)^{1/2}.
inline double l2_norm_fourier(const GridField& f)
{
    auto d = dft_forward(f);
    KahanSum s;
    for (auto z : d) s.add(std::norm(z));
    return std::sqrt(s.value() * f.spec.dual_cell() / std::pow(2 * pi, f.spec.dim));
}

// ---------------------------------------------------------------- test functions

/// Physicists' Hermite polynomial H_n.
inline double hermite(int n, double y)
{
    double h0 = 1, h1 = 2 * y;
    if (n == 0) return h0;
    for (int k = 1; k < n; ++k) {
        double h2 = 2 * y * h1 - 2 * k * h0;
        h0 = h1;
        h1 = h2;
    }
    return h1;
}

/// Linear combination of Hermite functions sharing centre, scale and phase:
///   f(v) = e^{i p.v} sum_t c_t prod_a H_{n_a}(y_a) e^{-y_a^2/2},  y = (v - c)/scale.
/// Each product term is L2-normalised before the coefficient is applied.
struct TestFunction {
    struct Term {
        cplx coef;
        std::array<int, 3> n;
    };
    Vec3 center{};
    double scale = 1.0;
    Vec3 phase{};
    std::vector<Term> terms{{1.0, {0, 0, 0}}};
    int dim = 3;
    std::string label = "gaussian";

    static TestFunction gaussian(Vec3 c, double scale, std::array<int, 3> n = {0, 0, 0}, Vec3 phase = {})
    {
        TestFunction t;
        t.center = c;
        t.scale = scale;
        t.phase = phase;
        t.terms = {{1.0, n}};
        return t;
    }

    double term_norm(const std::array<int, 3>& n) const
    {
        double m = 1;
        for (int a = 0; a < dim; ++a) {
            double f = 1;
            for (int k = 2; k <= n[a]; ++k) f *= k;
            m *= scale * std::pow(2.0, n[a]) * f * std::sqrt(pi);
        }
        return std::sqrt(m);
    }

    cplx operator()(Vec3 v) const
    {
        Vec3 y = (v - center) / scale;
        double r2 = dim == 3 ? norm2(y) : y.x * y.x;
        double env = std::exp(-0.5 * r2);
        cplx acc = 0;
        for (const auto& t : terms) {
            double p = 1;
            for (int a = 0; a < dim; ++a)
                if (t.n[a]) p *= hermite(t.n[a], y[a]);
            acc += t.coef * (p / term_norm(t.n));
        }
        double ph = dim == 3 ? dot(phase, v) : phase.x * v.x;
        return acc * env * (ph == 0 ? cplx(1) : std::polar(1.0, ph));
    }

    /// Closed-form fhat(eta) = int f(v) e^{-i eta.v} dv.
    cplx fourier(Vec3 eta) const
    {
        Vec3 k = eta - phase;
        cplx acc = 0;
        for (const auto& t : terms) {
            cplx p = 1;
            for (int a = 0; a < dim; ++a) {
                double z = scale * k[a];
                cplx mi = std::pow(cplx(0, -1), t.n[a]);
                p *= scale * std::sqrt(2 * pi) * mi * hermite(t.n[a], z) * std::exp(-0.5 * z * z) *
                     std::polar(1.0, -center[a] * k[a]);
            }
            acc += t.coef * p / term_norm(t.n);
        }
        return acc;
    }

    /// Exact L2 norm squared, using orthogonality of the Hermite terms.
    double norm2_exact() const
    {
        double s = 0;
        for (std::size_t i = 0; i < terms.size(); ++i)
            for (std::size_t j = 0; j < terms.size(); ++j)
                if (terms[i].n == terms[j].n) s += (terms[i].coef * std::conj(terms[j].coef)).real();
        return s;
    }

    /// Upper bound on the L2 mass outside [-R, R]^dim.
    double tail_mass_bound(double R) const
    {
        // 1D tail of the normalised Hermite function, by quadrature on both sides.
        auto tail1 = [&](int n, double c) {
            double lo = (R - c) / scale, lo2 = (R + c) / scale;
            auto side = [&](double a) {
                if (a > 60) return 0.0;
                Rule1D q = composite(uniform_edges(std::max(a, -60.0), std::max(a, -60.0) + 80, 1.0), 16);
                double s = 0;
                for (std::size_t i = 0; i < q.size(); ++i) {
                    double h = hermite(n, q.x[i]);
                    s += q.w[i] * h * h * std::exp(-q.x[i] * q.x[i]);
                }
                double f = 1;
                for (int k = 2; k <= n; ++k) f *= k;
                return s / (std::pow(2.0, n) * f * std::sqrt(pi));
            };
            return side(lo) + side(lo2);
        };
        double csum = 0, bound = 0;
        for (const auto& t : terms) csum += std::abs(t.coef);
        for (const auto& t : terms) {
            double out = 0;
            for (int a = 0; a < dim; ++a) out += tail1(t.n[a], center[a]);
            bound += std::abs(t.coef) * std::min(1.0, out);
        }
        return csum * bound;
    }
};

inline GridField sample(const TestFunction& tf, const GridSpec& g)
{
    GridField f(g);
    for (std::size_t i = 0; i < g.size(); ++i) f[i] = tf(g.point(i));
    return f;
}

template <class F>
GridField sample_fn(F&& fn, const GridSpec& g)
{
    GridField f(g);
    for (std::size_t i = 0; i < g.size(); ++i) f[i] = fn(g.point(i));
    return f;
}

/// The five collision invariants times sqrt(mu): sqrt(mu), v_j sqrt(mu), |v|^2 sqrt(mu).
inline std::vector<TestFunction> null_space_family()
{
    const double sc = std::sqrt(2.0);
    std::vector<TestFunction> out;
    // sqrt(mu) = (2 pi)^{-3/4} e^{-|v|^2/4}; the normalised Hermite term has norm 1.
    out.push_back(TestFunction::gaussian({}, sc));
    out.back().label = "sqrt_mu";
    for (int a = 0; a < 3; ++a) {
        std::array<int, 3> n{0, 0, 0};
        n[a] = 1;
        out.push_back(TestFunction::gaussian({}, sc, n));
        out.back().label = "v" + std::to_string(a + 1) + "_sqrt_mu";
    }
    // |v|^2 e^{-|v|^2/4} = sum_a (H_2(y_a) + 2) e^{-|y|^2/2}, y = v/sqrt 2
    TestFunction e = TestFunction::gaussian({}, sc);
    e.terms.clear();
    TestFunction probe = e;
    for (int a = 0; a < 3; ++a) {
        std::array<int, 3> n{0, 0, 0};
        n[a] = 2;
        e.terms.push_back({probe.term_norm(n), n});
    }
    e.terms.push_back({6.0 * probe.term_norm({0, 0, 0}), {0, 0, 0}});
    double nn = std::sqrt(e.norm2_exact());
    for (auto& t : e.terms) t.coef /= nn;
    e.label = "energy_sqrt_mu";
    out.push_back(e);
    return out;
}

struct CorpusOptions {
    double center_max = 3.0;
    double scale_min = 0.5;
    double scale_max = 2.0;
    int max_degree = 2;
    double box = 8.0;
    double tail_tol = 1e-8;
    bool null_space = true;
};

/// Deterministic pseudo-random corpus; the null-space family comes first.
inline std::vector<TestFunction> corpus(std::uint64_t seed, int size, const CorpusOptions& opt = {})
{
    if (size < 1) throw InputError("corpus size must be >= 1");
    std::vector<TestFunction> out;
    if (opt.null_space) out = null_space_family();
    if ((int)out.size() > size) out.resize(size);
    std::mt19937_64 rng(seed);
    auto unif = [&](double a, double b) { return a + (b - a) * ((rng() >> 11) * 0x1.0p-53); };
    int guard = 0;
    while ((int)out.size() < size) {
        if (++guard > 1000000) throw NumericalError("corpus rejection sampling did not terminate");
        Vec3 c{unif(-1, 1), unif(-1, 1), unif(-1, 1)};
        if (norm(c) > 1) continue;
        c = opt.center_max * c;
        double sc = unif(opt.scale_min, opt.scale_max);
        std::array<int, 3> n{};
        for (int a = 0; a < 3; ++a) n[a] = (int)std::floor(unif(0, opt.max_degree + 1 - 1e-12));
        TestFunction t = TestFunction::gaussian(c, sc, n);
        if (t.tail_mass_bound(opt.box) >= opt.tail_tol) continue;
        t.label = "g" + std::to_string(out.size());
        out.push_back(t);
    }
    return out;
}

// ---------------------------------------------------------------- binary IO

namespace detail {
inline void put_header(std::ostream& os, std::uint32_t version, std::uint32_t dim, std::uint32_t N, double R,
                       std::uint64_t rows)
{
    os.write("BSYM", 4);
    os.write(reinterpret_cast<const char*>(&version), 4);
    os.write(reinterpret_cast<const char*>(&dim), 4);
    os.write(reinterpret_cast<const char*>(&N), 4);
    os.write(reinterpret_cast<const char*>(&R), 8);
    os.write(reinterpret_cast<const char*>(&rows), 8);
}

struct Header {
    std::uint32_t version, dim, N;
    double R;
    std::uint64_t rows;
};

inline Header get_header(std::istream& is)
{
    char magic[4];
    Header h{};
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "BSYM", 4) != 0) throw InputError("bad magic in binary file");
    is.read(reinterpret_cast<char*>(&h.version), 4);
    is.read(reinterpret_cast<char*>(&h.dim), 4);
    is.read(reinterpret_cast<char*>(&h.N), 4);
    is.read(reinterpret_cast<char*>(&h.R), 8);
    is.read(reinterpret_cast<char*>(&h.rows), 8);
    if (!is) throw InputError("truncated header");
    return h;
}
}  // namespace detail

inline void write_field(const std::string& path, const GridField& f)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot open " + path);
    detail::put_header(os, 1, f.spec.dim, f.spec.N, f.spec.R, 0);
    os.write(reinterpret_cast<const char*>(f.values.data()), f.values.size() * sizeof(cplx));
}

inline GridField read_field(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open " + path);
    auto h = detail::get_header(is);
    if (h.version != 1) throw InputError("not a field file");
    GridSpec g(h.R, h.N, h.dim);
    GridField f(g);
    is.read(reinterpret_cast<char*>(f.values.data()), f.values.size() * sizeof(cplx));
    if (!is) throw InputError("truncated field data");
    return f;
}

/// Dense complex matrix in row-major order; the header carries the row count.
inline void write_matrix(const std::string& path, const GridSpec& g, std::size_t rows, const cplx* data,
                         std::size_t cols)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot open " + path);
    detail::put_header(os, 2, g.dim, g.N, g.R, rows);
    os.write(reinterpret_cast<const char*>(data), rows * cols * sizeof(cplx));
}

inline std::vector<cplx> read_matrix(const std::string& path, GridSpec& g, std::size_t& rows)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open " + path);
    auto h = detail::get_header(is);
    if (h.version != 2) throw InputError("not a matrix file");
    g = GridSpec(h.R, h.N, h.dim);
    rows = h.rows;
    std::vector<cplx> d(rows * g.size());
    is.read(reinterpret_cast<char*>(d.data()), d.size() * sizeof(cplx));
    if (!is) throw InputError("truncated matrix data");
    return d;
}

// ---------------------------------------------------------------- classical quantisation

/// (op0 q f)(v_i) = (2 pi)^{-dim} sum_k q(v_i, eta_k) fhat(eta_k) e^{i eta_k . v_i} deta^dim,
/// applied to a batch of fields sharing one grid.
template <class Q>
std::vector<GridField> op0_apply_batch(Q&& q, const std::vector<GridField>& fs)
{
    if (fs.empty()) return {};
    const GridSpec& g = fs[0].spec;
    std::vector<std::vector<cplx>> hats;
    for (const auto& f : fs) hats.push_back(dft_forward(f));
    const int N = g.N;
    std::vector<cplx> E(N * N);
    for (int j = 0; j < N; ++j)
        for (int k = 0; k < N; ++k) E[j * N + k] = std::polar(1.0, g.eta(k) * g.x(j));
    double sc = g.dual_cell() / std::pow(2 * pi, g.dim);
    std::vector<GridField> out(fs.size(), GridField(g));
    const std::size_t M = g.size();
    parallel_for(M, [&](std::size_t i) {
        Vec3 v = g.point(i);
        int ia = g.dim == 3 ? i / (N * N) : i, ib = g.dim == 3 ? (i / N) % N : 0, ic = g.dim == 3 ? i % N : 0;
        std::vector<cplx> acc(fs.size(), 0.0);
        for (std::size_t k = 0; k < M; ++k) {
            int ka = g.dim == 3 ? k / (N * N) : k, kb = g.dim == 3 ? (k / N) % N : 0, kc = g.dim == 3 ? k % N : 0;
            cplx ph = g.dim == 3 ? E[ia * N + ka] * E[ib * N + kb] * E[ic * N + kc] : E[ia * N + ka];
            cplx w = cplx(q(v, g.freq(k))) * ph;
            for (std::size_t m = 0; m < fs.size(); ++m) acc[m] += w * hats[m][k];
        }
        for (std::size_t m = 0; m < fs.size(); ++m) out[m][i] = sc * acc[m];
    });
    return out;
}

template <class Q>
GridField op0_apply(Q&& q, const GridField& f)
{
    return op0_apply_batch(std::forward<Q>(q), std::vector<GridField>{f})[0];
}

enum class NormMode { plain, wedge };

/// plain: || <v>^kappa <D_v>^sigma f ||;  wedge: || <v>^kappa <v ^ D_v>^sigma f || (classical quantisation).
inline double weighted_fractional_norm(const GridField& f, double kappa, double sigma, NormMode mode = NormMode::plain)
{
    GridField g(f.spec);
    if (mode == NormMode::wedge) {
        if (f.spec.dim != 3) throw InputError("wedge norm needs a 3D grid");
        g = op0_apply([sigma](Vec3 v, Vec3 e) { return std::pow(1 + norm2(cross(v, e)), 0.5 * sigma); }, f);
    } else if (sigma != 0) {
        g = fourier_multiply(f, [&](Vec3 e) { return std::pow(1 + norm2(e), 0.5 * sigma); });
    } else {
        g = f;
    }
    if (kappa != 0) g = multiply(g, [&](Vec3 v) { return std::pow(1 + norm2(v), 0.5 * kappa); });
    return l2_norm(g);
}

}  // namespace boltzsym
