#pragma once

#include "grids.hpp"
#include "report.hpp"
#include "symbols.hpp"

#include <Eigen/Dense>

#include <memory>
#include <sstream>

namespace boltzsym {

using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

enum class Quantization { classical, weyl, wick };
enum class Representation { dense, matrix_free };

inline std::string quantization_name(Quantization q)
{
    switch (q) {
        case Quantization::classical: return "classical";
        case Quantization::weyl: return "weyl";
        case Quantization::wick: return "wick";
    }
    return "?";
}

namespace detail {

/// Kernel bookkeeping. Every kernel is K(a, b) = T_key(a - b) dv^dim where T_key is the
/// inverse DFT of one symbol row q(point(key), eta_k). Classical keys are rows a. Midpoint
/// keys u = a + b + 1 index the half lattice -R + u dv/2, u in [0, 2N). Grid functions are
/// anti-periodic, so with `torus` a pair further apart than half the box takes the midpoint
/// of the short arc (u + N mod 2N); otherwise the plain midpoint picks up a ghost copy of the
/// near-diagonal kernel.
enum class KeyMode { row, midpoint, torus };

struct KernelLayout {
    struct Pair {
        int a, b, j;
        double sign;
        int n;  // signed separation in grid steps, short arc for torus keys
    };

    GridSpec g;
    KeyMode mode;
    int K1 = 0;
    std::vector<std::vector<Pair>> pairs;

    KernelLayout(const GridSpec& g_, KeyMode m) : g(g_), mode(m), K1(m == KeyMode::row ? g_.N : 2 * g_.N), pairs(K1)
    {
        const int N = g.N;
        for (int a = 0; a < N; ++a)
            for (int b = 0; b < N; ++b) {
                int n = a - b, u = mode == KeyMode::row ? a : a + b + 1;
                if (mode == KeyMode::torus && 2 * std::abs(n) > N) {
                    u = (u + N) % (2 * N);
                    n -= n > 0 ? N : -N;
                }
                // T(n) lives at j = n + N/2 - 1 and is anti-periodic with period N
                int j = (a - b) + N / 2 - 1;
                double sg = 1;
                if (j < 0) j += N, sg = -1;
                if (j >= N) j -= N, sg = -1;
                pairs[u].push_back({a, b, j, sg, n});
            }
    }

    std::size_t keys() const { return g.dim == 3 ? (std::size_t)K1 * K1 * K1 : (std::size_t)K1; }
    double coord(int u) const { return mode == KeyMode::row ? g.x(u) : -g.R + 0.5 * u * g.dv(); }
    void split(std::size_t S, int& s0, int& s1, int& s2) const
    {
        if (g.dim == 1) {
            s0 = (int)S, s1 = s2 = 0;
            return;
        }
        s0 = S / ((std::size_t)K1 * K1), s1 = (S / K1) % K1, s2 = S % K1;
    }
    bool empty(std::size_t S) const
    {
        int s0, s1, s2;
        split(S, s0, s1, s2);
        if (g.dim == 1) return pairs[s0].empty();
        return pairs[s0].empty() || pairs[s1].empty() || pairs[s2].empty();
    }
    Vec3 point(std::size_t S) const
    {
        int s0, s1, s2;
        split(S, s0, s1, s2);
        if (g.dim == 1) return {coord(s0), 0, 0};
        return {coord(s0), coord(s1), coord(s2)};
    }
};

/// T(n dv) = (2 pi)^{-dim} sum_k q_k e^{i n dv . eta_k} deta^dim, stored at j = n + N/2 - 1.
inline std::vector<cplx> kernel_row(const GridSpec& g, std::vector<cplx> qk)
{
    const int N = g.N;
    std::vector<cplx> ph(N);
    for (int k = 0; k < N; ++k) ph[k] = std::polar(1.0, 0.5 * g.eta(k) * g.dv());
    detail::for_each_index(g, [&](std::size_t i, int a, int b, int c) {
        qk[i] *= g.dim == 3 ? ph[a] * ph[b] * ph[c] : ph[a];
    });
    return dft_inverse(g, std::move(qk)).values;
}

/// Calls visit(row, col, value, |v_row - v_col|^2) for every kernel entry owned by key S.
template <class V>
void scatter(const KernelLayout& L, std::size_t S, const std::vector<cplx>& T, V&& visit)
{
    const GridSpec& g = L.g;
    const int N = g.N;
    const double cell = g.cell(), h = g.dv();
    int s0, s1, s2;
    L.split(S, s0, s1, s2);
    if (g.dim == 1) {
        for (const auto& p : L.pairs[s0]) {
            double d = p.n * h;
            visit((std::size_t)p.a, (std::size_t)p.b, p.sign * T[p.j] * cell, d * d);
        }
        return;
    }
    for (const auto& p : L.pairs[s0])
        for (const auto& q : L.pairs[s1])
            for (const auto& r : L.pairs[s2]) {
                std::size_t row = ((std::size_t)p.a * N + q.a) * N + r.a;
                std::size_t col = ((std::size_t)p.b * N + q.b) * N + r.b;
                std::size_t j = ((std::size_t)p.j * N + q.j) * N + r.j;
                double d2 = h * h * (p.n * p.n + q.n * q.n + r.n * r.n);
                visit(row, col, p.sign * q.sign * r.sign * T[j] * cell, d2);
            }
}

/// Drives fill(S, point, row) -> kernel rows -> visit. Parallel only when visits are disjoint.
template <class Fill, class V>
void sweep_kernel(const KernelLayout& L, Fill&& fill, V&& visit, bool parallel)
{
    const std::size_t M = L.g.size();
    auto one = [&](std::size_t S) {
        if (L.empty(S)) return;
        std::vector<cplx> row(M);
        fill(S, L.point(S), row);
        scatter(L, S, kernel_row(L.g, std::move(row)), visit);
    };
    if (parallel)
        parallel_for(L.keys(), one);
    else
        for (std::size_t S = 0; S < L.keys(); ++S) one(S);
}

inline KeyMode key_mode(Quantization t)
{
    return t == Quantization::classical ? KeyMode::row : (t == Quantization::wick ? KeyMode::midpoint : KeyMode::torus);
}

template <class Q>
auto symbol_fill(const GridSpec& g, Q& q)
{
    return [&g, &q](std::size_t, Vec3 v, std::vector<cplx>& row) {
        for (std::size_t k = 0; k < row.size(); ++k) row[k] = cplx(q(v, g.freq(k)));
    };
}

/// Wick smoothing: for every eta_k the symbol on the padded half lattice is convolved per axis
/// with normalised weights exp(-(c dv/2)^2), |c| <= pad. Result indexed [S * M + k].
template <class Q>
std::vector<cplx> wick_table(const KernelLayout& L, Q& q, double pad_width)
{
    const GridSpec& g = L.g;
    const std::size_t M = g.size(), nk = L.keys();
    const double hh = 0.5 * g.dv();
    const int P = (int)std::ceil(pad_width / hh);
    std::vector<double> w(2 * P + 1);
    double z = 0;
    for (int c = -P; c <= P; ++c) z += w[c + P] = std::exp(-(c * hh) * (c * hh));
    for (auto& x : w) x /= z;
    const int K1 = L.K1, E = K1 + 2 * P;
    auto coord = [&](int t) { return -g.R + hh * (t - P); };
    std::vector<cplx> out(nk * M);
    parallel_for(M, [&](std::size_t k) {
        Vec3 eta = g.freq(k);
        if (g.dim == 1) {
            std::vector<cplx> raw(E);
            for (int t = 0; t < E; ++t) raw[t] = cplx(q(Vec3{coord(t), 0, 0}, eta));
            for (int s = 0; s < K1; ++s) {
                cplx acc = 0;
                for (int c = 0; c <= 2 * P; ++c) acc += w[c] * raw[s + c];
                out[s * M + k] = acc;
            }
            return;
        }
        // three separable passes, shrinking one axis at a time
        std::vector<cplx> A((std::size_t)E * E * E);
        for (int a = 0; a < E; ++a)
            for (int b = 0; b < E; ++b)
                for (int c = 0; c < E; ++c)
                    A[((std::size_t)a * E + b) * E + c] = cplx(q(Vec3{coord(a), coord(b), coord(c)}, eta));
        std::vector<cplx> B((std::size_t)K1 * E * E);
        for (int a = 0; a < K1; ++a)
            for (int b = 0; b < E; ++b)
                for (int c = 0; c < E; ++c) {
                    cplx acc = 0;
                    for (int t = 0; t <= 2 * P; ++t) acc += w[t] * A[((std::size_t)(a + t) * E + b) * E + c];
                    B[((std::size_t)a * E + b) * E + c] = acc;
                }
        std::vector<cplx> C((std::size_t)K1 * K1 * E);
        for (int a = 0; a < K1; ++a)
            for (int b = 0; b < K1; ++b)
                for (int c = 0; c < E; ++c) {
                    cplx acc = 0;
                    for (int t = 0; t <= 2 * P; ++t) acc += w[t] * B[((std::size_t)a * E + b + t) * E + c];
                    C[((std::size_t)a * K1 + b) * E + c] = acc;
                }
        for (int a = 0; a < K1; ++a)
            for (int b = 0; b < K1; ++b)
                for (int c = 0; c < K1; ++c) {
                    cplx acc = 0;
                    for (int t = 0; t <= 2 * P; ++t) acc += w[t] * C[((std::size_t)a * K1 + b) * E + c + t];
                    out[(((std::size_t)a * K1 + b) * K1 + c) * M + k] = acc;
                }
    });
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------- dense matrices

/// Dense matrix of op_t q, t = 0 (classical) or 1/2 (Weyl), acting on grid values.
template <class Q>
Matrix quant_matrix(Q&& q, const GridSpec& g, Quantization t = Quantization::weyl, double wick_pad = 5.0)
{
    if (g.size() > 4096) throw InputError("dense quantisation is capped at 16 points per axis in 3D");
    const std::size_t M = g.size();
    Matrix A = Matrix::Zero(M, M);
    detail::KernelLayout L(g, detail::key_mode(t));
    if (t == Quantization::wick) {
        auto tab = detail::wick_table(L, q, wick_pad);
        detail::sweep_kernel(
            L,
            [&](std::size_t S, Vec3, std::vector<cplx>& row) {
                std::copy(tab.begin() + S * M, tab.begin() + (S + 1) * M, row.begin());
            },
            [&](std::size_t r, std::size_t c, cplx val, double d2) { A(r, c) = val * std::exp(-0.25 * d2); }, true);
        return A;
    }
    detail::sweep_kernel(L, detail::symbol_fill(g, q), [&](std::size_t r, std::size_t c, cplx val, double) { A(r, c) = val; },
                         true);
    return A;
}

template <class Q>
Matrix weyl_matrix(Q&& q, const GridSpec& g)
{
    return quant_matrix(q, g, Quantization::weyl);
}
template <class Q>
Matrix wick_matrix(Q&& q, const GridSpec& g, double pad = 5.0)
{
    return quant_matrix(q, g, Quantization::wick, pad);
}

inline Vector to_vector(const GridField& f) { return Eigen::Map<const Vector>(f.values.data(), f.size()); }
inline GridField to_field(const GridSpec& g, const Vector& x) { return GridField(g, std::vector<cplx>(x.data(), x.data() + x.size())); }

inline GridField apply_matrix(const Matrix& A, const GridField& f) { return to_field(f.spec, A * to_vector(f)); }

// ---------------------------------------------------------------- matrix-free application

/// Weyl (or classical) application to a batch without storing the matrix. Memory O(M).
template <class Q>
std::vector<GridField> quant_apply_batch(Q&& q, const std::vector<GridField>& fs, Quantization t = Quantization::weyl,
                                         double wick_pad = 5.0)
{
    if (fs.empty()) return {};
    const GridSpec& g = fs[0].spec;
    std::vector<GridField> out(fs.size(), GridField(g));
    detail::KernelLayout L(g, detail::key_mode(t));
    auto acc = [&](std::size_t r, std::size_t c, cplx val, double d2) {
        if (t == Quantization::wick) val *= std::exp(-0.25 * d2);
        for (std::size_t m = 0; m < fs.size(); ++m) out[m][r] += val * fs[m][c];
    };
    if (t == Quantization::wick) {
        const std::size_t M = g.size();
        auto tab = detail::wick_table(L, q, wick_pad);
        detail::sweep_kernel(
            L,
            [&](std::size_t S, Vec3, std::vector<cplx>& row) {
                std::copy(tab.begin() + S * M, tab.begin() + (S + 1) * M, row.begin());
            },
            acc, false);
    } else {
        detail::sweep_kernel(L, detail::symbol_fill(g, q), acc, false);
    }
    return out;
}

template <class Q>
GridField weyl_apply(Q&& q, const GridField& f)
{
    return quant_apply_batch(q, std::vector<GridField>{f}, Quantization::weyl)[0];
}
template <class Q>
GridField wick_apply(Q&& q, const GridField& f, double pad = 5.0)
{
    return quant_apply_batch(q, std::vector<GridField>{f}, Quantization::wick, pad)[0];
}

// ---------------------------------------------------------------- J^{1/2} route

/// Classical symbol P(a, k) = p(v_a, eta_k) with op0 p = q^w on the grid, i.e. the discrete
///   p(v, eta) = N^{-dim} sum_z sum_zeta e^{-2i z.zeta} q(v + z, eta + zeta),
/// z on the half lattice (v + z inside the box), zeta on the eta lattice. The zeta sum is the
/// midpoint kernel; the z sum is one forward DFT per row over v_a - v_b.
template <class Q>
Matrix weyl_to_classical(Q&& q, const GridSpec& g)
{
    if (g.size() > 4096) throw InputError("classical symbol table is capped at 16 points per axis in 3D");
    const std::size_t M = g.size();
    const int N = g.N;
    Matrix K = weyl_matrix(q, g);
    Matrix P(M, M);
    std::vector<cplx> E(N * N);
    for (int a = 0; a < N; ++a)
        for (int k = 0; k < N; ++k) E[a * N + k] = std::polar(1.0, -g.eta(k) * g.x(a));
    parallel_for(M, [&](std::size_t a) {
        // sum_b K(a,b) e^{i v_b . eta} = conj(dft_forward(conj K(a, .))) / dv^dim
        GridField row(g);
        for (std::size_t b = 0; b < M; ++b) row[b] = std::conj(K(a, b));
        auto d = dft_forward(row);
        int ia = g.dim == 3 ? a / (N * N) : a, ib = g.dim == 3 ? (a / N) % N : 0, ic = g.dim == 3 ? a % N : 0;
        for (std::size_t k = 0; k < M; ++k) {
            int ka = g.dim == 3 ? k / (N * N) : k, kb = g.dim == 3 ? (k / N) % N : 0, kc = g.dim == 3 ? k % N : 0;
            cplx ph = g.dim == 3 ? E[ia * N + ka] * E[ib * N + kb] * E[ic * N + kc] : E[ia * N + ka];
            P(a, k) = std::conj(d[k]) * ph / g.cell();
        }
    });
    return P;
}

/// 1D continuum route: p(v, eta) = (2 pi)^{-1} int e^{i theta v} qhat(theta, eta + theta/2) dtheta,
/// with qhat the grid Fourier transform in v of q sampled on the lattice only. Unlike
/// weyl_to_classical this differs from the midpoint kernel by a discretisation error.
template <class Q>
Matrix weyl_to_classical_fourier(Q&& q, const GridSpec& g)
{
    if (g.dim != 1) throw InputError("continuum J^{1/2} route is implemented in 1D");
    const int N = g.N;
    Matrix P(N, N);
    const double dv = g.dv(), dt = g.deta();
    parallel_for((std::size_t)N, [&](std::size_t k) {
        std::vector<cplx> qh(N);
        for (int c = 0; c < N; ++c) {
            double th = g.eta(c);
            cplx acc = 0;
            for (int b = 0; b < N; ++b)
                acc += cplx(q(Vec3{g.x(b), 0, 0}, Vec3{g.eta((int)k) + 0.5 * th, 0, 0})) * std::polar(dv, -th * g.x(b));
            qh[c] = acc;
        }
        for (int a = 0; a < N; ++a) {
            cplx acc = 0;
            for (int c = 0; c < N; ++c) acc += qh[c] * std::polar(dt, g.eta(c) * g.x(a));
            P(a, k) = acc / (2 * pi);
        }
    });
    return P;
}

/// op0 with a tabulated symbol P(a, k) = p(v_a, eta_k).
inline GridField op0_apply_table(const Matrix& P, const GridField& f)
{
    const GridSpec& g = f.spec;
    const int N = g.N;
    const std::size_t M = g.size();
    auto fh = dft_forward(f);
    std::vector<cplx> E(N * N);
    for (int j = 0; j < N; ++j)
        for (int k = 0; k < N; ++k) E[j * N + k] = std::polar(1.0, g.eta(k) * g.x(j));
    const double sc = g.dual_cell() / std::pow(2 * pi, g.dim);
    GridField out(g);
    parallel_for(M, [&](std::size_t i) {
        int ia = g.dim == 3 ? i / (N * N) : i, ib = g.dim == 3 ? (i / N) % N : 0, ic = g.dim == 3 ? i % N : 0;
        cplx acc = 0;
        for (std::size_t k = 0; k < M; ++k) {
            int ka = g.dim == 3 ? k / (N * N) : k, kb = g.dim == 3 ? (k / N) % N : 0, kc = g.dim == 3 ? k % N : 0;
            cplx ph = g.dim == 3 ? E[ia * N + ka] * E[ib * N + kb] * E[ic * N + kc] : E[ia * N + ka];
            acc += P(i, k) * ph * fh[k];
        }
        out[i] = sc * acc;
    });
    return out;
}

/// Max over fs of ||q^w f - op0(J^{1/2} q) f|| / ||q^w f||; throws NumericalError beyond tol.
template <class Q>
double weyl_dual_route(Q&& q, const std::vector<GridField>& fs, double tol = 1e-6)
{
    if (fs.empty()) return 0.0;
    const GridSpec& g = fs[0].spec;
    Matrix W = weyl_matrix(q, g);
    Matrix P = weyl_to_classical(q, g);
    double worst = 0;
    for (const auto& f : fs) {
        GridField a = apply_matrix(W, f), b = op0_apply_table(P, f);
        double n = l2_norm(a);
        double e = l2_norm(a - b) / (n > 0 ? n : 1.0);
        worst = std::max(worst, e);
    }
    if (worst > tol) {
        std::ostringstream os;
        os << "Weyl routes disagree: relative difference " << worst << " exceeds " << tol;
        throw NumericalError(os.str());
    }
    return worst;
}

// ---------------------------------------------------------------- operator wrapper

struct QuantOperator {
    Quantization quantization = Quantization::weyl;
    SymbolFn symbol;
    Representation representation = Representation::dense;
    GridSpec grid;
    double wick_pad = 5.0;

    QuantOperator(Quantization t, SymbolFn q, Representation r, const GridSpec& g, double pad = 5.0)
        : quantization(t), symbol(std::move(q)), representation(r), grid(g), wick_pad(pad)
    {
    }

    Matrix dense() const { return quant_matrix(symbol, grid, quantization, wick_pad); }

    GridField apply(const GridField& f) const
    {
        if (!(f.spec == grid)) throw InputError("field grid does not match operator grid");
        if (quantization == Quantization::classical && representation == Representation::matrix_free)
            return op0_apply(symbol, f);
        if (representation == Representation::matrix_free)
            return quant_apply_batch(symbol, std::vector<GridField>{f}, quantization, wick_pad)[0];
        if (!cache_) cache_ = std::make_shared<Matrix>(dense());
        return apply_matrix(*cache_, f);
    }

private:
    mutable std::shared_ptr<Matrix> cache_;
};

// ---------------------------------------------------------------- norms and spectra

/// Largest singular value: exact SVD for small matrices, power iteration on A*A otherwise.
inline double operator_norm(const Matrix& A, int max_iter = 500, double tol = 1e-11, std::uint64_t seed = 17)
{
    if (A.size() == 0) return 0.0;
    if (A.cols() <= 600) {
        Eigen::BDCSVD<Matrix> svd(A);
        return svd.singularValues()(0);
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Vector x(A.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = cplx(nd(rng), nd(rng));
    x.normalize();
    double lam = 0;
    for (int it = 0; it < max_iter; ++it) {
        Vector y = A.adjoint() * (A * x);
        double nl = y.norm();
        if (nl == 0) return 0.0;
        x = y / nl;
        if (std::abs(nl - lam) <= tol * nl) {
            lam = nl;
            break;
        }
        lam = nl;
    }
    return std::sqrt(lam);
}

/// Smallest Rayleigh quotient Re(Af, f)/(f, f) over `count` seeded Gaussian vectors.
inline double min_rayleigh(const Matrix& A, int count = 100, std::uint64_t seed = 23)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    double m = INFINITY;
    Vector x(A.cols());
    for (int c = 0; c < count; ++c) {
        for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = cplx(nd(rng), nd(rng));
        m = std::min(m, (x.adjoint() * A * x)(0).real() / x.squaredNorm());
    }
    return m;
}

/// Smallest eigenvalue of the Hermitian part.
inline double min_eigenvalue(const Matrix& A)
{
    Matrix H = 0.5 * (A + A.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(H, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

inline double hermitian_defect(const Matrix& A)
{
    double n = A.norm();
    return n > 0 ? (A - A.adjoint()).norm() / n : 0.0;
}

// ---------------------------------------------------------------- Schur test

struct SchurBound {
    double M1 = 0, M2 = 0, bound = 0;
};

/// Row and column sup of sum |k(y_i, z_j)| dv^dim for a kernel sampled on the grid.
inline SchurBound schur_bound(const Matrix& kernel, double cell)
{
    SchurBound s;
    if (kernel.size() == 0) return s;
    s.M1 = kernel.cwiseAbs().rowwise().sum().maxCoeff() * cell;
    s.M2 = kernel.cwiseAbs().colwise().sum().maxCoeff() * cell;
    s.bound = std::sqrt(s.M1 * s.M2);
    return s;
}

template <class K>
Matrix sample_kernel(K&& k, const GridSpec& g)
{
    const std::size_t M = g.size();
    Matrix A(M, M);
    parallel_for(M, [&](std::size_t i) {
        for (std::size_t j = 0; j < M; ++j) A(i, j) = cplx(k(g.point(i), g.point(j)));
    });
    return A;
}

// ---------------------------------------------------------------- brackets and derivatives

/// Fourth-order central difference of a real symbol along coordinate c in 0..5 (v then eta).
template <class Q>
double partial(Q&& q, Vec3 v, Vec3 eta, int c, double h = 1e-3)
{
    auto at = [&](double t) {
        Vec3 vv = v, ee = eta;
        if (c < 3)
            vv[c] += t;
        else
            ee[c - 3] += t;
        return std::real(cplx(q(vv, ee)));
    };
    return (8 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12 * h);
}

/// {q1, q2} = d_eta q1 . d_v q2 - d_v q1 . d_eta q2
template <class Q1, class Q2>
double poisson_bracket(Q1&& q1, Q2&& q2, Vec3 v, Vec3 eta, double h = 1e-3, int dim = 3)
{
    double s = 0;
    for (int j = 0; j < dim; ++j)
        s += partial(q1, v, eta, 3 + j, h) * partial(q2, v, eta, j, h) -
             partial(q1, v, eta, j, h) * partial(q2, v, eta, 3 + j, h);
    return s;
}

/// q1' . q2' over all phase-space coordinates.
template <class Q1, class Q2>
double gradient_dot(Q1&& q1, Q2&& q2, Vec3 v, Vec3 eta, double h = 1e-3, int dim = 3)
{
    double s = 0;
    for (int j = 0; j < dim; ++j)
        s += partial(q1, v, eta, j, h) * partial(q2, v, eta, j, h) +
             partial(q1, v, eta, 3 + j, h) * partial(q2, v, eta, 3 + j, h);
    return s;
}

// ---------------------------------------------------------------- composition

/// Phase-space Gaussian bump exp(-|v - v0|^2 / (2 w^2) - |eta - e0|^2 / (2 w^2)) dilated by lambda.
inline SymbolFn phase_bump(Vec3 v0, Vec3 e0, double w, double lambda, double amp = 1.0)
{
    return {"bump", [=](Vec3 v, Vec3 e) {
                double W = w * lambda;
                return cplx(amp * std::exp(-0.5 * (norm2(v - lambda * v0) + norm2(e - lambda * e0)) / (W * W)));
            }};
}

struct ComposeResult {
    double weyl = 0, wick = 0;  // operator norms of the remainders
};

/// Remainders  p1^w p2^w - (p1 p2 + (1/2i){p1,p2})^w  and
///             p1^W p2^W - (p1 p2 - (1/2) p1'.p2' + (1/2i){p1,p2})^W  (W = Wick).
inline ComposeResult compose_remainders(const SymbolFn& p1, const SymbolFn& p2, const GridSpec& g, double h = 1e-3)
{
    const int dim = g.dim;
    auto lead_w = [&](Vec3 v, Vec3 e) {
        return p1(v, e) * p2(v, e) + cplx(0, -0.5) * poisson_bracket(p1, p2, v, e, h, dim);
    };
    auto lead_k = [&](Vec3 v, Vec3 e) {
        return p1(v, e) * p2(v, e) - 0.5 * gradient_dot(p1, p2, v, e, h, dim) +
               cplx(0, -0.5) * poisson_bracket(p1, p2, v, e, h, dim);
    };
    ComposeResult r;
    Matrix A = weyl_matrix(p1, g), B = weyl_matrix(p2, g);
    r.weyl = operator_norm(A * B - weyl_matrix(lead_w, g));
    Matrix Ak = wick_matrix(p1, g), Bk = wick_matrix(p2, g);
    r.wick = operator_norm(Ak * Bk - wick_matrix(lead_k, g));
    return r;
}

/// Dilation study on a 1D grid: remainders for lambda in `lambdas`, fitted decay orders.
inline VerificationReport compose_check(const GridSpec& g, const std::vector<double>& lambdas = {1, 2, 4})
{
    VerificationReport rep;
    rep.name = "compose";
    rep.params = {{"R", g.R}, {"N", g.N}, {"dim", g.dim}};
    std::vector<double> x, yw, yk;
    for (double lam : lambdas) {
        SymbolFn p1 = phase_bump({0.6, 0, 0}, {-0.4, 0, 0}, 1.0, lam);
        SymbolFn p2 = phase_bump({-0.5, 0, 0}, {0.7, 0, 0}, 0.8, lam, 1.5);
        ComposeResult c = compose_remainders(p1, p2, g);
        rep.add({{"lambda", lam}, {"quantization", "weyl"}}, c.weyl, 1.0);
        rep.add({{"lambda", lam}, {"quantization", "wick"}}, c.wick, 1.0);
        x.push_back(lam);
        yw.push_back(c.weyl);
        yk.push_back(c.wick);
    }
    double ow = -loglog_slope(x, yw), ok = -loglog_slope(x, yk);
    rep.fitted_constants["weyl_order"] = ow;
    rep.fitted_constants["wick_order"] = ok;
    rep.pass = ow >= 1.5 && ok >= 1.5;
    return rep;
}

// ---------------------------------------------------------------- L2 continuity

/// max over |alpha| <= order and samples of |d^alpha q| by nested central differences
/// (step h) over the 2*dim phase-space coordinates.
template <class Q>
double symbol_seminorm(Q&& q, int order, const std::vector<std::pair<Vec3, Vec3>>& samples, int dim = 3, double h = 0.1)
{
    const int nc = 2 * dim;
    std::vector<int> alpha(nc, 0);
    double best = 0;
    auto coord = [&](int c) { return c < dim ? c : 3 + (c - dim); };
    std::function<void(int, int)> rec = [&](int c, int left) {
        if (c == nc) {
            for (const auto& [v0, e0] : samples) {
                // tensor stencil of binomial central differences
                std::vector<std::pair<std::vector<int>, double>> pts{{std::vector<int>(nc, 0), 1.0}};
                for (int a = 0; a < nc; ++a) {
                    std::vector<std::pair<std::vector<int>, double>> nxt;
                    int m = alpha[a];
                    double binom = 1;
                    for (int i = 0; i <= m; ++i) {
                        double coef = (i % 2 ? -1.0 : 1.0) * binom / std::pow(h, m);
                        for (const auto& [off, w] : pts) {
                            auto o = off;
                            o[a] = m - 2 * i;  // offsets in half steps
                            nxt.push_back({o, w * coef});
                        }
                        binom = binom * (m - i) / (i + 1);
                    }
                    pts.swap(nxt);
                }
                double acc = 0;
                for (const auto& [off, w] : pts) {
                    Vec3 v = v0, e = e0;
                    for (int a = 0; a < nc; ++a) {
                        int cc = coord(a);
                        double d = 0.5 * h * off[a];
                        if (cc < 3)
                            v[cc] += d;
                        else
                            e[cc - 3] += d;
                    }
                    acc += w * std::abs(cplx(q(v, e)));
                }
                best = std::max(best, std::abs(acc));
            }
            return;
        }
        for (int m = 0; m <= left; ++m) {
            alpha[c] = m;
            rec(c + 1, left - m);
        }
        alpha[c] = 0;
    };
    rec(0, order);
    return best;
}

/// ||q^w|| against seminorms of several orders; fitted C_k = ||q^w|| / seminorm_k.
template <class Q>
VerificationReport l2_continuity_check(Q&& q, const GridSpec& g, const std::vector<int>& orders = {0, 2, 4},
                                       const std::vector<std::pair<Vec3, Vec3>>& samples = {})
{
    VerificationReport rep;
    rep.name = "l2_continuity";
    rep.params = {{"R", g.R}, {"N", g.N}, {"dim", g.dim}};
    std::vector<std::pair<Vec3, Vec3>> pts = samples;
    if (pts.empty()) {
        // lattice points of the quantised range
        int step = std::max(1, g.N / 8);
        for (int a = 0; a < g.N; a += step)
            for (int k = 0; k < g.N; k += step) pts.push_back({{g.x(a), 0, 0}, {g.eta(k), 0, 0}});
    }
    double nrm = operator_norm(weyl_matrix(q, g));
    rep.fitted_constants["operator_norm"] = nrm;
    bool ok = std::isfinite(nrm);
    for (int k : orders) {
        double sn = symbol_seminorm(q, k, pts, g.dim);
        rep.add({{"order", k}}, nrm, sn);
        rep.fitted_constants["C_" + std::to_string(k)] = sn > 0 ? nrm / sn : INFINITY;
        ok = ok && std::isfinite(sn);
    }
    rep.pass = ok;
    return rep;
}

}  // namespace boltzsym
