#pragma once

// Named verification suites, the run configuration and the report files written by the CLI.

#include "estimates.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace boltzsym {

// ---------------------------------------------------------------- representations

/// Gain-type integrand mu(v'_*) f(v') through both parametrisations of the collision sphere.
inline VerificationReport dual_representation_check(const std::vector<TestFunction>& fs, const ModelParams& p,
                                                    double theta_min = 0.1, double tol = 1e-3)
{
    VerificationReport rep;
    rep.name = "dual_representation";
    rep.params = detail::params_json(p);
    rep.params["theta_min"] = theta_min;
    rep.params["corpus_size"] = fs.size();
    auto xs = CrossSection::mollified(p.s, theta_min);
    auto ker = CarlemanKernel::from_b(xs, p.gamma);
    auto pq = PlaneQuadrature::make();
    pq.alpha_extent = 9;
    auto sq = SigmaQuadrature::make(xs);
    double worst = 0;
    for (const auto& t : fs) {
        Vec3 v = t.center + Vec3{0.3, -0.2, 0.1};
        auto F = [&](Vec3, Vec3, Vec3 vp, Vec3 vsp) { return maxwellian(vsp) * t(vp); };
        cplx a = carleman_integrate(F, v, ker, pq);
        cplx b = sigma_integrate(F, v, xs, sq, PowerKinetic{p.gamma});
        double e = std::abs(a - b), n = std::abs(b);
        rep.add({{"f", t.label}, {"v", detail::vec_json(v)}}, e, n);
        worst = std::max(worst, n > 0 ? e / n : e);
    }
    rep.fitted_constants["rel_error_max"] = worst;
    rep.headline = "rel_error_max";
    rep.note = "single quadrature level; drift not measured";
    rep.pass = std::isfinite(worst) && worst <= tol;
    return rep;
}

/// S(z) is constant for G = 1, and the gain-minus-loss integral equals the radial convolution with S.
inline VerificationReport cancellation_check(const std::vector<TestFunction>& fs, double gamma = 0.5, double s = 0.5,
                                             double theta_min = 0.1)
{
    VerificationReport rep;
    rep.name = "cancellation";
    rep.params = {{"gamma", gamma}, {"s", s}, {"theta_min", theta_min}, {"corpus_size", fs.size()}};

    auto sing = CrossSection::singular(s);
    auto one = [](double, double) { return 1.0; };
    double S1 = cancellation_S(1.0, one, sing), flat = 0;
    for (double z : {0.5, 3.0}) {
        double Sz = cancellation_S(z, one, sing);
        rep.add({{"kind", "S_constant"}, {"z", z}}, Sz, S1);
        flat = std::max(flat, std::abs(Sz / S1 - 1));
    }

    auto xs = CrossSection::mollified(s, theta_min);
    auto sq = SigmaQuadrature::make(xs);
    auto G = [gamma](double a, double) { return std::pow(a, gamma); };
    auto rad = composite(uniform_edges(0, 10, 0.25), 10);
    auto sph = sphere_rule(16, 32);
    double worst = 0;
    for (const auto& t : fs) {
        Vec3 v = t.center + Vec3{0.5, -0.2, -0.1};
        double lhs = sigma_integrate([&](Vec3, Vec3 vs, Vec3, Vec3 vsp) { return t(vsp).real() - t(vs).real(); }, v,
                                     xs, sq, PowerKinetic{gamma});
        double rhs = radial_convolution([&](double z) { return cancellation_S(z, G, xs); },
                                        [&](Vec3 w) { return t(w).real(); }, v, sph, rad);
        rep.add({{"kind", "convolution"}, {"f", t.label}, {"v", detail::vec_json(v)}}, lhs, rhs);
        worst = std::max(worst, std::abs(lhs - rhs) / std::abs(rhs));
    }
    rep.fitted_constants["S_flatness"] = flat;
    rep.fitted_constants["rel_error_max"] = worst;
    rep.headline = "rel_error_max";
    rep.note = "single quadrature level; drift not measured";
    rep.pass = flat <= 1e-8 && worst <= 1e-3;
    return rep;
}

// ---------------------------------------------------------------- symbols

/// Upper bound a_p <= C <v>^g (1 + |eta|^{2s} + |eta x v|^{2s}) and the matching lower structure.
inline VerificationReport ap_bounds_check(const ModelParams& p, const SymbolLattice& lat = SymbolLattice::standard(5, 8, 8))
{
    VerificationReport rep;
    rep.name = "ap_bounds";
    rep.params = detail::params_json(p);
    SymbolEvaluator ev(p);
    std::vector<Vec3> vs, es;
    lat.for_each([&](Vec3 v, Vec3 e) {
        vs.push_back(v);
        es.push_back(e);
    });
    std::vector<double> a(vs.size());
    parallel_for(vs.size(), [&](std::size_t i) { a[i] = ev.ap(vs[i], es[i]); });
    double up = 0, kappa = INFINITY;
    for (std::size_t i = 0; i < vs.size(); ++i) {
        Vec3 v = vs[i], e = es[i];
        double w = std::pow(1 + norm2(v), 0.5 * p.gamma);
        double ne = std::pow(norm(e), 2 * p.s), nx = std::pow(norm(cross(e, v)), 2 * p.s);
        double top = w * (1 + ne + nx);
        rep.add({{"v", norm(v)}, {"eta", norm(e)}}, a[i], top);
        up = std::max(up, a[i] / top);
        double low = std::pow(p.delta, 2 - 2 * p.s) * (w * (ne + nx) - vweight(v, p.gamma, p.s));
        if (low > 0) kappa = std::min(kappa, a[i] / low);
    }
    rep.fitted_constants["upper_C"] = up;
    rep.fitted_constants["lower_c"] = kappa;
    rep.headline = "upper_C";
    rep.note = "single quadrature level; drift not measured";
    rep.pass = std::isfinite(up) && up > 0 && kappa > 0;
    return rep;
}

/// Offset-power exponent of a_p in |eta|, expected 2s, along two probes per s.
inline VerificationReport ap_growth_check(const std::vector<double>& s_list, double gamma = 0.0, double tol = 0.1)
{
    VerificationReport rep;
    rep.name = "ap_growth";
    rep.params = {{"gamma", gamma}, {"s_list", s_list}};
    const std::pair<Vec3, Vec3> probes[] = {{{0.5, 0.2, 0}, {0.3, 1, 0.2}}, {{-1, 0.5, 0.3}, {1, 0.2, -0.4}}};
    bool ok = true;
    for (double s : s_list) {
        SymbolEvaluator ev(ModelParams::make(gamma, s));
        double worst = 0;
        for (const auto& [v, d] : probes) {
            GrowthFit fit = ap_growth(ev, v, d);
            rep.add({{"s", s}, {"v", detail::vec_json(v)}, {"dir", detail::vec_json(d)}, {"loglog", fit.loglog}},
                    fit.offset, 2 * s);
            worst = std::max(worst, std::abs(fit.offset - 2 * s));
        }
        char key[32];
        std::snprintf(key, sizeof key, "offset_error_s%.2f", s);
        rep.fitted_constants[key] = worst;
        ok = ok && worst <= tol;
    }
    rep.pass = ok && !s_list.empty();
    return rep;
}

// ---------------------------------------------------------------- collision

/// L annihilates mu^{1/2} times {1, v, |v|^2}, relative to the size of its pieces.
inline VerificationReport null_space_check(const CollisionOperator& op, double tol = 1e-4)
{
    VerificationReport rep;
    rep.name = "null_space";
    rep.params = detail::params_json(op.params);
    double worst = 0;
    for (const auto& t : null_space_family())
        for (Vec3 v : {Vec3{0.3, 0.2, -0.1}, Vec3{1.5, -0.7, 0.9}, Vec3{-2.5, 1.0, 0.0}}) {
            double scale = 0;
            for (cplx z : op.pieces(t, v)) scale += std::abs(z);
            double r = std::abs(op.apply(t, v));
            rep.add({{"f", t.label}, {"v", detail::vec_json(v)}}, r, std::max(1.0, scale));
            worst = std::max(worst, r / std::max(1.0, scale));
        }
    rep.fitted_constants["relative_residual"] = worst;
    rep.headline = "relative_residual";
    rep.pass = worst <= tol;
    return rep;
}

/// -(L f, f) >= 0 on a corpus, at two Hermite levels.
inline VerificationReport dirichlet_sign_check(const CollisionOperator& op, const std::vector<TestFunction>& fs,
                                               int n_hermite = 6)
{
    VerificationReport rep;
    rep.name = "dirichlet_sign";
    rep.params = detail::params_json(op.params);
    rep.params["n_hermite"] = {n_hermite, n_hermite + 2};
    rep.params["corpus_size"] = fs.size();
    double lo = INFINITY, drift = 0;
    for (const auto& t : fs) {
        double e0 = dirichlet_form(op, t, n_hermite), e1 = dirichlet_form(op, t, n_hermite + 2);
        double n2 = t.norm2_exact();
        rep.add({{"f", t.label}}, e0, n2);
        lo = std::min(lo, e0 / n2);
        if (std::max(std::abs(e0), std::abs(e1)) > 1e-8 * n2) drift = std::max(drift, rel_change(e0, e1));
    }
    rep.fitted_constants["form_over_norm_min"] = lo;
    rep.headline = "form_over_norm_min";
    rep.drift = drift;
    rep.pass = lo >= -1e-8 && drift < 0.1;
    return rep;
}

// ---------------------------------------------------------------- quantization

namespace detail {

inline std::vector<GridField> quantize_fields(const GridSpec& g, int n = 3)
{
    CorpusOptions opt;
    opt.box = g.R;
    opt.center_max = 1.5;
    std::vector<GridField> out;
    for (auto t : corpus(7, n + 5, opt)) {
        if (out.size() == (std::size_t)n) break;
        out.push_back(sample(t, g));
    }
    return out;
}

}  // namespace detail

/// Midpoint Weyl matrix against the J^{1/2} classical route on smooth symbols.
inline VerificationReport weyl_dual_route_check(const GridSpec& g = GridSpec(6.0, 8), double tol = 1e-6)
{
    VerificationReport rep;
    rep.name = "weyl_dual_route";
    rep.params = detail::grid_json(g);
    auto fs = detail::quantize_fields(g);
    std::vector<std::pair<std::string, SymbolFn>> syms = {
        {"atilde_damped",
         {"atilde_damped", [](Vec3 v, Vec3 e) { return cplx(atilde(v, e, 0, 0.5) * std::exp(-0.05 * norm2(v))); }}},
        {"bump", phase_bump({0.5, -0.3, 0.2}, {-0.4, 0.6, 0.1}, 1.2, 1.0)},
        {"transport", {"transport", [](Vec3 v, Vec3 e) { return cplx(dot(v, e) * std::exp(-0.1 * norm2(e))); }}},
    };
    double worst = 0;
    for (const auto& [name, q] : syms) {
        double e = weyl_dual_route(q, fs, INFINITY);
        rep.add({{"symbol", name}}, e, tol);
        worst = std::max(worst, e);
    }
    rep.fitted_constants["rel_difference_max"] = worst;
    rep.headline = "rel_difference_max";
    rep.pass = worst <= tol;
    return rep;
}

/// Smallest Rayleigh quotient of Wick matrices of nonnegative symbols.
inline VerificationReport wick_positivity_check(const GridSpec& g = GridSpec(6.0, 8), int count = 20,
                                                std::uint64_t seed = 41)
{
    VerificationReport rep;
    rep.name = "wick_positivity";
    rep.params = detail::grid_json(g);
    rep.params["symbols"] = count;
    std::mt19937_64 rng(seed);
    auto unif = [&](double a, double b) { return a + (b - a) * ((rng() >> 11) * 0x1.0p-53); };
    auto rvec = [&](double m) { return Vec3{unif(-m, m), unif(-m, m), unif(-m, m)}; };
    double lo = INFINITY, eig = INFINITY;
    for (int i = 0; i < count; ++i) {
        std::function<double(Vec3, Vec3)> q;
        std::string kind;
        Vec3 a = rvec(2), b = rvec(2);
        double w = unif(0.5, 1.5), c = unif(0, pi);
        switch (i % 4) {
        case 0:
            kind = "gaussian";
            q = [=](Vec3 v, Vec3 e) { return std::exp(-(norm2(v - a) + norm2(e - b)) / (2 * w * w)); };
            break;
        case 1:
            kind = "sine_squared";
            q = [=](Vec3 v, Vec3 e) { return std::pow(std::sin(dot(v, a) / 4 + dot(e, b) / 4 + c), 2); };
            break;
        case 2: {
            kind = "atilde";
            double gm = unif(-1, 1), sv = unif(0.2, 0.8);
            q = [=](Vec3 v, Vec3 e) { return atilde(v, e, gm, sv); };
            break;
        }
        default:
            kind = "transport_squared";
            q = [=](Vec3 v, Vec3 e) { return std::pow(dot(v, a) + dot(e, b), 2) * std::exp(-0.1 * norm2(e)); };
        }
        Matrix W = wick_matrix(q, g);
        double r = min_rayleigh(W), m = min_eigenvalue(W);
        rep.add({{"index", i}, {"kind", kind}, {"min_eigenvalue", m}}, r, 1.0);
        lo = std::min(lo, r);
        eig = std::min(eig, m);
    }
    rep.fitted_constants["min_rayleigh"] = lo;
    rep.fitted_constants["min_eigenvalue"] = eig;
    rep.headline = "min_rayleigh";
    rep.pass = lo >= -1e-8;
    return rep;
}

/// Wick quantization of v.xi is multiplication by v.xi.
inline VerificationReport wick_linear_check(const GridSpec& g = GridSpec(6.0, 8))
{
    VerificationReport rep;
    rep.name = "wick_linear";
    rep.params = detail::grid_json(g);
    double worst = 0;
    for (Vec3 xi : {Vec3{1.5, -0.5, 2}, Vec3{0, 3, -1}}) {
        Matrix W = wick_matrix([&](Vec3 v, Vec3) { return dot(v, xi); }, g);
        for (std::size_t i = 0; i < g.size(); ++i) W(i, i) -= dot(g.point(i), xi);
        double e = W.cwiseAbs().maxCoeff();
        rep.add({{"xi", detail::vec_json(xi)}}, e, 1.0);
        worst = std::max(worst, e);
    }
    rep.fitted_constants["max_entry_error"] = worst;
    rep.headline = "max_entry_error";
    rep.pass = worst <= 1e-10;
    return rep;
}

// ---------------------------------------------------------------- configuration

struct RunConfig {
    ModelParams params;
    std::optional<GridSpec> grid;  // unset: each suite uses its own grids
    std::uint64_t corpus_seed = 7;
    int corpus_size = 20;
    std::vector<std::string> suites;
    std::string output_dir = "boltzsym_out";
    int refinement_steps = 1;

    json to_json() const
    {
        json j;
        j["params"] = detail::params_json(params);
        j["grid"] = grid ? detail::grid_json(*grid) : json(nullptr);
        j["corpus"] = {{"seed", corpus_seed}, {"size", corpus_size}};
        j["suites"] = suites;
        j["refinement"] = {{"steps", refinement_steps}};
        return j;
    }
};

inline const std::vector<std::string>& suite_registry()
{
    static const std::vector<std::string> names{"symbols",    "representations", "collision", "quantize",
                                                "coercivity", "hypo11",          "hypo13",    "toy"};
    return names;
}

namespace detail {

inline std::string trim(const std::string& s)
{
    auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
}

inline std::string strip_comment(const std::string& s)
{
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') quoted = !quoted;
        if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
}

inline std::string unquote(const std::string& raw, const std::string& where)
{
    std::string s = trim(raw);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    if (s.empty() || s.find('"') != std::string::npos) throw InputError(where + ": bad string value '" + raw + "'");
    return s;
}

inline double to_number(const std::string& raw, const std::string& where)
{
    std::string s = trim(raw);
    std::size_t used = 0;
    double x;
    try {
        x = std::stod(s, &used);
    } catch (const std::exception&) {
        throw InputError(where + ": expected a number, got '" + s + "'");
    }
    if (used != s.size()) throw InputError(where + ": expected a number, got '" + s + "'");
    return x;
}

inline int to_int(const std::string& raw, const std::string& where)
{
    double x = to_number(raw, where);
    if (x != std::floor(x) || std::abs(x) > 1e9) throw InputError(where + ": expected an integer");
    return (int)x;
}

inline std::vector<std::string> to_list(const std::string& raw, const std::string& where)
{
    std::string s = trim(raw);
    if (s.size() < 2 || s.front() != '[' || s.back() != ']') throw InputError(where + ": expected [ ... ] list");
    std::vector<std::string> out;
    std::string body = trim(s.substr(1, s.size() - 2));
    if (body.empty()) return out;
    std::stringstream ss(body);
    for (std::string item; std::getline(ss, item, ',');) out.push_back(unquote(item, where));
    return out;
}

}  // namespace detail

/// TOML-style text: [section] headers, key = value lines, # comments.
inline RunConfig parse_config(const std::string& text)
{
    RunConfig c;
    std::optional<double> gR;
    std::optional<int> gN;
    std::string section;
    std::istringstream is(text);
    int lineno = 0;
    for (std::string line; std::getline(is, line);) {
        ++lineno;
        std::string where = "line " + std::to_string(lineno);
        line = detail::trim(detail::strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']' && line.find('=') == std::string::npos) {
            section = detail::trim(line.substr(1, line.size() - 2));
            if (section != "params" && section != "grid" && section != "corpus" && section != "refinement")
                throw InputError(where + ": unknown section [" + section + "]");
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) throw InputError(where + ": expected key = value");
        std::string key = detail::trim(line.substr(0, eq)), val = line.substr(eq + 1);
        if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
        if (key == "params.gamma") c.params.gamma = detail::to_number(val, where);
        else if (key == "params.s") c.params.s = detail::to_number(val, where);
        else if (key == "params.delta") c.params.delta = detail::to_number(val, where);
        else if (key == "params.c_b") c.params.c_b = detail::to_number(val, where);
        else if (key == "params.K") c.params.K = detail::to_number(val, where);
        else if (key == "params.ell") c.params.ell = detail::to_number(val, where);
        else if (key == "grid.R") gR = detail::to_number(val, where);
        else if (key == "grid.N") gN = detail::to_int(val, where);
        else if (key == "corpus.seed") {
            int sd = detail::to_int(val, where);
            if (sd < 0) throw InputError(where + ": seed must be nonnegative");
            c.corpus_seed = (std::uint64_t)sd;
        } else if (key == "corpus.size") c.corpus_size = detail::to_int(val, where);
        else if (key == "refinement.steps") c.refinement_steps = detail::to_int(val, where);
        else if (key == "suites") c.suites = detail::to_list(val, where);
        else if (key == "output_dir") c.output_dir = detail::unquote(val, where);
        else throw InputError(where + ": unknown key '" + key + "'");
    }
    c.params.validate();
    if (gR || gN) c.grid = GridSpec(gR.value_or(6.0), gN.value_or(12));
    if (c.corpus_size < 1) throw InputError("corpus.size must be >= 1");
    if (c.refinement_steps < 1) throw InputError("refinement.steps must be >= 1");
    std::vector<std::string> expanded;
    for (const auto& s : c.suites) {
        if (s == "all") {
            expanded = suite_registry();
            break;
        }
        if (std::find(suite_registry().begin(), suite_registry().end(), s) == suite_registry().end())
            throw InputError("unknown suite '" + s + "'");
        if (std::find(expanded.begin(), expanded.end(), s) == expanded.end()) expanded.push_back(s);
    }
    c.suites = expanded;
    return c;
}

inline RunConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot read config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

// ---------------------------------------------------------------- suites

namespace detail {

inline VerificationReport with_headline(VerificationReport r, const std::string& key)
{
    r.headline = key;
    return r;
}

}  // namespace detail

/// Reports of one named suite under the configuration.
inline std::vector<VerificationReport> run_suite(const std::string& name, const RunConfig& c)
{
    const ModelParams& p = c.params;
    const int fine_step = 4 * c.refinement_steps;
    if (name == "symbols")
        return {detail::with_headline(sandwich_check(p), "ratio_max"), ap_bounds_check(p),
                ap_growth_check({0.3, 0.5, 0.75})};
    if (name == "representations") {
        auto fs = corpus(c.corpus_seed, c.corpus_size);
        return {dual_representation_check(fs, p), cancellation_check(corpus(c.corpus_seed, 3))};
    }
    if (name == "collision") {
        auto op = CollisionOperator::make(p, CrossSection::singular(p.s));
        CorpusOptions opt;
        opt.null_space = false;
        return {null_space_check(op), dirichlet_sign_check(op, corpus(c.corpus_seed, std::min(c.corpus_size, 5), opt))};
    }
    if (name == "quantize")
        return {weyl_dual_route_check(), wick_positivity_check(), wick_linear_check(),
                detail::with_headline(compose_check(GridSpec(24, 256, 1)), "weyl_order")};
    if (name == "coercivity") {
        CoercivityOptions o;
        if (c.grid) {
            o.R = c.grid->R;
            o.N_coarse = c.grid->N;
            o.N_fine = c.grid->N + 2 * fine_step;
        }
        return {detail::with_headline(coercivity_sandwich(dense_corpus(c.corpus_seed, c.corpus_size, o.R, 2), p, o),
                                      "C")};
    }
    if (name == "hypo11") {
        HypoOptions o;
        if (c.grid) {
            o.R = c.grid->R;
            o.N_coarse = c.grid->N;
            o.N_fine = c.grid->N + fine_step;
        }
        auto fs = dense_corpus(c.corpus_seed, c.corpus_size, o.R);
        return {detail::with_headline(hypoelliptic_check(fs, p, default_xi_ladder(), o), "ratio_max"),
                detail::with_headline(multiplier_diagnostics({1, 2, 2}, p, SymbolLattice::standard(6, 6, 6)),
                                      "identity_residual")};
    }
    if (name == "hypo13") {
        Hypo13Options o;
        if (c.grid) {
            o.R = c.grid->R;
            o.N = c.grid->N;
        }
        auto fs = dense_corpus(c.corpus_seed, c.corpus_size, o.R);
        return {detail::with_headline(time_dependent_check(fs, p, default_xi_tau_ladder(), o), "ratio_top")};
    }
    if (name == "toy") return {detail::with_headline(kolmogorov_toy(), "exponent_s0.50")};
    throw InputError("unknown suite '" + name + "'");
}

// ---------------------------------------------------------------- report files

namespace detail {

inline std::string csv_number(double x)
{
    if (!std::isfinite(x)) return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

inline std::string summary_row(const std::string& suite, const VerificationReport& r)
{
    return suite + "," + r.name + "," + csv_number(r.ratio_min()) + "," + csv_number(r.ratio_max()) + "," +
           csv_number(r.headline_value()) + "," + csv_number(r.drift) + "," + (r.pass ? "true" : "false");
}

inline json suite_json(const std::string& suite, const RunConfig& c, const std::vector<VerificationReport>& reps)
{
    json j;
    j["suite"] = suite;
    j["config"] = c.to_json();
    json rs = json::array();
    for (const auto& r : reps) rs.push_back(r.to_json());
    j["reports"] = rs;
    return j;
}

}  // namespace detail

inline constexpr const char* summary_header = "suite,check,ratio_min,ratio_max,fitted_C,drift,pass";

/// Runs every suite of the config into `out_dir`; returns the exit code (0 all pass, 1 otherwise).
inline int run_config(const RunConfig& c, const std::string& out_dir, std::ostream& log = std::cerr)
{
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::ofstream summary(fs::path(out_dir) / "summary.csv", std::ios::binary);
    summary << summary_header << "\n";
    int code = 0;
    for (const auto& suite : c.suites) {
        std::vector<VerificationReport> reps;
        try {
            reps = run_suite(suite, c);
        } catch (const NumericalError& e) {
            VerificationReport r;
            r.name = suite;
            r.note = e.what();
            reps = {r};
        }
        std::ofstream(fs::path(out_dir) / (suite + ".json"), std::ios::binary)
            << detail::suite_json(suite, c, reps).dump(2) << "\n";
        for (const auto& r : reps) {
            summary << detail::summary_row(suite, r) << "\n";
            if (!r.pass) {
                log << "FAIL " << suite << "/" << r.name << (r.note.empty() ? "" : ": " + r.note) << "\n";
                code = 1;
            }
        }
    }
    return code;
}

namespace detail {

struct SuiteFile {
    std::string suite;
    std::vector<VerificationReport> reports;
};

inline SuiteFile read_suite_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot read report " + path.string());
    try {
        json j = json::parse(in);
        SuiteFile f;
        f.suite = j.at("suite").get<std::string>();
        for (const auto& r : j.at("reports")) f.reports.push_back(VerificationReport::from_json(r));
        return f;
    } catch (const json::exception& e) {
        throw InputError("malformed report " + path.string() + ": " + e.what());
    }
}

/// A report file, or every *.json in a run directory, keyed by suite.
inline std::map<std::string, SuiteFile> read_reports(const std::string& path)
{
    namespace fs = std::filesystem;
    std::map<std::string, SuiteFile> out;
    if (fs::is_directory(path)) {
        for (const auto& e : fs::directory_iterator(path))
            if (e.path().extension() == ".json") {
                auto f = read_suite_file(e.path());
                out[f.suite] = f;
            }
    } else {
        auto f = read_suite_file(path);
        out[f.suite] = f;
    }
    if (out.empty()) throw InputError("no reports found in " + path);
    return out;
}

inline bool differs(double a, double b, double tol)
{
    if (std::isnan(a) || std::isnan(b)) return std::isnan(a) != std::isnan(b);
    if (std::isinf(a) || std::isinf(b)) return a != b;
    return rel_change(a, b) > tol;
}

}  // namespace detail

/// Regression diff of fitted constants and cell ratios. 0 equal within tol, 1 differences, 2 schema mismatch.
inline int compare_reports(const std::string& a_path, const std::string& b_path, double rel_tol,
                           std::ostream& log = std::cerr)
{
    std::map<std::string, detail::SuiteFile> A, B;
    try {
        A = detail::read_reports(a_path);
        B = detail::read_reports(b_path);
    } catch (const InputError& e) {
        log << "error: " << e.what() << "\n";
        return 2;
    }
    int code = 0;
    for (const auto& [suite, fa] : A) {
        auto it = B.find(suite);
        if (it == B.end()) {
            log << "schema: suite " << suite << " missing in " << b_path << "\n";
            return 2;
        }
        const auto& fb = it->second;
        if (fa.reports.size() != fb.reports.size()) {
            log << "schema: suite " << suite << " has different check counts\n";
            return 2;
        }
        for (std::size_t k = 0; k < fa.reports.size(); ++k) {
            const auto &ra = fa.reports[k], &rb = fb.reports[k];
            std::string tag = suite + "/" + ra.name;
            if (ra.name != rb.name || ra.cells.size() != rb.cells.size()) {
                log << "schema: " << tag << " does not match " << rb.name << "\n";
                return 2;
            }
            for (const auto& [key, va] : ra.fitted_constants) {
                auto jt = rb.fitted_constants.find(key);
                if (jt == rb.fitted_constants.end()) {
                    log << "schema: " << tag << " lacks fitted constant " << key << " in " << b_path << "\n";
                    return 2;
                }
                if (detail::differs(va, jt->second, rel_tol)) {
                    log << "diff " << tag << " " << key << ": " << va << " vs " << jt->second << "\n";
                    code = 1;
                }
            }
            for (std::size_t i = 0; i < ra.cells.size(); ++i)
                if (detail::differs(ra.cells[i].ratio, rb.cells[i].ratio, rel_tol)) {
                    log << "diff " << tag << " cell " << i << " ratio: " << ra.cells[i].ratio << " vs "
                        << rb.cells[i].ratio << "\n";
                    code = 1;
                }
            if (ra.pass != rb.pass) {
                log << "diff " << tag << " pass: " << ra.pass << " vs " << rb.pass << "\n";
                code = 1;
            }
        }
    }
    return code;
}

}  // namespace boltzsym
