#pragma once

#include <array>
#include <cmath>
#include <string>

#include "errors.hpp"

namespace backstep {

/// Index assignment used for the L12 prefactor of the two-state explicit kernels.
enum class ClosedFormVariant {
    Printed,             ///< prefactor sigma21/(mu2 - mu1), as typeset
    L12PrefactorSigma12  ///< prefactor sigma12/(mu2 - mu1), matching the hypotenuse condition
};

inline std::string to_string(ClosedFormVariant v) {
    return v == ClosedFormVariant::Printed ? "printed" : "l12-prefactor-sigma12";
}

/// L11, L12, L21, L22 at one point.
using KernelQuad = std::array<double, 4>;

struct TwoStateParameters {
    double mu1 = 1.0, mu2 = 0.2;
    double s12 = 2.0, s21 = 5.0;
};

namespace detail {

/// 2 I1(z)/z, continuous at z = 0.
inline double scaled_i1(double z) { return z < 1e-8 ? 1.0 + z * z / 8.0 : 2.0 * std::cyl_bessel_i(1.0, z) / z; }

/// 2 J1(w)/w, continuous at w = 0.
inline double scaled_j1(double w) { return w < 1e-8 ? 1.0 - w * w / 8.0 : 2.0 * std::cyl_bessel_j(1.0, w) / w; }

}  // namespace detail

/**
 * Explicit kernels of the homodirectional two-state system with Sigma-- = [[0, s12], [s21, 0]].
 * The square-root prefactors are rewritten with 2 I1(z)/z and 2 J1(w)/w so the removable
 * singularities on the diagonal and at the origin evaluate to their limits.
 */
[[nodiscard]] inline KernelQuad closed_form_2x2(const TwoStateParameters& p, double x, double xi,
                                                ClosedFormVariant variant = ClosedFormVariant::L12PrefactorSigma12) {
    if (!(p.mu1 > p.mu2 && p.mu2 > 0.0)) throw ParameterError("explicit kernels need mu1 > mu2 > 0");
    if (p.s12 * p.s21 < 0.0) throw ParameterError("explicit kernels need s12 * s21 >= 0");
    const double tol = 1e-12;
    if (!(xi >= -tol && xi <= x + tol && x <= 1.0 + tol)) throw DomainError("point lies outside 0 <= xi <= x <= 1");
    xi = std::max(0.0, std::min(xi, x));

    const double ss = p.s12 * p.s21;
    const double dm = p.mu1 - p.mu2;
    const double d = x - xi;
    const double a = p.mu1 * xi - p.mu2 * x;
    const double b = p.mu1 * x - p.mu2 * xi;

    KernelQuad out{0.0, 0.0, 0.0, 0.0};
    if (xi >= p.mu2 / p.mu1 * x) {
        const double z = 2.0 / dm * std::sqrt(std::max(0.0, ss * d * a / p.mu1));
        out[0] = -ss * a / (p.mu1 * dm * dm) * detail::scaled_i1(z);
        const double pref = variant == ClosedFormVariant::Printed ? p.s21 : p.s12;
        out[1] = pref / (p.mu2 - p.mu1) * std::cyl_bessel_i(0.0, z);
    }
    const double w = 2.0 / dm * std::sqrt(std::max(0.0, ss * d * b / p.mu2));
    if (b <= 0.0) {
        out[2] = p.s21 / dm;  // common limit of both terms at the origin
    } else {
        out[2] = p.s21 * xi / b * std::cyl_bessel_j(0.0, w) + p.mu1 * p.s21 * d / (b * dm) * detail::scaled_j1(w);
    }
    out[3] = xi * ss / (p.mu2 * dm) * detail::scaled_j1(w);
    return out;
}

/**
 * Largest finite-difference residual of the four kernel PDEs
 *   mu_i dL_ij/dx + mu_j dL_ij/dxi = sum_p sigma_pj L_ip
 * over a fixed set of interior points away from the discontinuity line.
 */
[[nodiscard]] inline double closed_form_pde_residual(const TwoStateParameters& p, ClosedFormVariant variant,
                                                     double h = 1e-5) {
    const double mus[2] = {p.mu1, p.mu2};
    const double sig[2][2] = {{0.0, p.s12}, {p.s21, 0.0}};
    const double pts[][2] = {{0.7, 0.5}, {0.9, 0.6}, {0.5, 0.3}, {0.95, 0.25}, {0.6, 0.05}, {0.8, 0.7}, {0.4, 0.35}};
    double worst = 0.0;
    for (const auto& pt : pts) {
        const double x = pt[0], xi = pt[1];
        if (std::abs(xi - p.mu2 / p.mu1 * x) < 10 * h) continue;
        const auto c = closed_form_2x2(p, x, xi, variant);
        const auto xp = closed_form_2x2(p, x + h, xi, variant), xm = closed_form_2x2(p, x - h, xi, variant);
        const auto yp = closed_form_2x2(p, x, xi + h, variant), ym = closed_form_2x2(p, x, xi - h, variant);
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                const int f = 2 * i + j;
                const double lx = (xp[f] - xm[f]) / (2 * h);
                const double ly = (yp[f] - ym[f]) / (2 * h);
                double rhs = 0.0;
                for (int q = 0; q < 2; ++q) rhs += sig[q][j] * c[2 * i + q];
                worst = std::max(worst, std::abs(mus[i] * lx + mus[j] * ly - rhs));
            }
        }
    }
    return worst;
}

struct ClosedFormResolution {
    ClosedFormVariant variant = ClosedFormVariant::L12PrefactorSigma12;
    double residual_printed = 0.0;
    double residual_swapped = 0.0;
};

/// Picks the index assignment whose kernels satisfy the PDEs by substitution.
[[nodiscard]] inline ClosedFormResolution resolve_closed_form_variant(const TwoStateParameters& p) {
    ClosedFormResolution r;
    r.residual_printed = closed_form_pde_residual(p, ClosedFormVariant::Printed);
    r.residual_swapped = closed_form_pde_residual(p, ClosedFormVariant::L12PrefactorSigma12);
    r.variant = r.residual_printed <= r.residual_swapped ? ClosedFormVariant::Printed
                                                         : ClosedFormVariant::L12PrefactorSigma12;
    return r;
}

}  // namespace backstep
