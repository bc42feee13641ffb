#pragma once

#include "core.hpp"

#include <utility>

namespace boltzsym {

/// Physical and regularisation parameters.
struct ModelParams {
    double gamma = 0.0;  // kinetic exponent, > -3
    double s = 0.5;      // angular singularity order, in (0, 1)
    double delta = 1.0;  // splitting radius, in (0, 1]
    double c_b = 1.0;    // kernel equivalence constant (reporting only)
    double K = 0.0;      // shift in a_K
    double ell = 0.0;    // weight exponent
    int dim = 3;

    void validate() const
    {
        if (!(gamma > -3)) throw InputError("gamma must exceed -3");
        if (!(s > 0 && s < 1)) throw InputError("s must lie in (0,1)");
        if (!(delta > 0 && delta <= 1)) throw InputError("delta must lie in (0,1]");
        if (!(c_b > 0)) throw InputError("c_b must be positive");
        if (!(K >= 0)) throw InputError("K must be nonnegative");
        if (dim != 3) throw InputError("collision machinery is three dimensional");
    }

    static ModelParams make(double gamma, double s, double delta = 1.0, double K = 0.0, double ell = 0.0)
    {
        ModelParams p;
        p.gamma = gamma;
        p.s = s;
        p.delta = delta;
        p.K = K;
        p.ell = ell;
        p.validate();
        return p;
    }
};

/// (2 pi)^{-3/2} exp(-|v|^2/2)
inline double maxwellian(Vec3 v) { return std::pow(2 * pi, -1.5) * std::exp(-0.5 * norm2(v)); }
inline double sqrt_maxwellian(Vec3 v) { return std::pow(2 * pi, -0.75) * std::exp(-0.25 * norm2(v)); }

enum class XsMode { singular, mollified };

/// Angular cross-section with sin(theta) b(cos theta) = theta^{-1-2s} on (0, pi/2].
struct CrossSection {
    XsMode mode = XsMode::singular;
    double theta_min = 0.0;
    double s = 0.5;

    static CrossSection singular(double s)
    {
        CrossSection x;
        x.s = s;
        return x;
    }
    static CrossSection mollified(double s, double theta_min)
    {
        if (!(theta_min > 0 && theta_min < pi / 2)) throw InputError("theta_min must lie in (0, pi/2)");
        CrossSection x;
        x.mode = XsMode::mollified;
        x.s = s;
        x.theta_min = theta_min;
        return x;
    }

    double lower() const { return mode == XsMode::mollified ? theta_min : 0.0; }

    /// sin(theta) b(cos theta)
    double sin_b(double theta) const
    {
        if (mode == XsMode::mollified && theta < theta_min) return 0.0;
        return std::pow(theta, -1 - 2 * s);
    }

    double b(double theta) const
    {
        if (!(theta > 0 && theta <= pi / 2 + 1e-15)) throw InputError("theta outside (0, pi/2]");
        return sin_b(theta) / std::sin(theta);
    }

    /// Closed form of the integral of sin(theta) b over [a, pi/2], a >= lower().
    double angular_mass(double a) const
    {
        a = std::max(a, lower());
        return (std::pow(a, -2 * s) - std::pow(pi / 2, -2 * s)) / (2 * s);
    }
};

inline double b_eval(const CrossSection& xs, double theta) { return xs.b(theta); }

/// sigma-representation: v' = (v+v*)/2 + |v-v*|/2 sigma, v'* = (v+v*)/2 - |v-v*|/2 sigma.
inline std::pair<Vec3, Vec3> post_collision(Vec3 v, Vec3 vs, Vec3 sigma)
{
    if (std::abs(norm(sigma) - 1) > 1e-12) throw InputError("sigma must be a unit vector");
    Vec3 m = 0.5 * (v + vs);
    double h = 0.5 * norm(v - vs);
    return {m + h * sigma, m - h * sigma};
}

/// cos(theta) = (v - v*)/|v - v*| . sigma
inline double cos_theta(Vec3 v, Vec3 vs, Vec3 sigma)
{
    Vec3 u = v - vs;
    double nu = norm(u);
    return nu > 0 ? dot(u, sigma) / nu : 1.0;
}

/// Radial cutoff phi_delta(v) = phi(|v|^2/delta^2): phi = 1 on [0, 1/4], 0 on [1, inf),
/// quintic smoothstep in between.
struct CutoffPhi {
    double delta = 1.0;

    static double phi(double x)
    {
        if (x <= 0.25) return 1.0;
        if (x >= 1.0) return 0.0;
        double t = (x - 0.25) / 0.75;
        return 1.0 - t * t * t * (10 - 15 * t + 6 * t * t);
    }
    double operator()(double r) const { return phi(r * r / (delta * delta)); }
    double operator()(Vec3 v) const { return phi(norm2(v) / (delta * delta)); }
    double tilde(double r) const { return 1.0 - (*this)(r); }
};

}  // namespace boltzsym
