#pragma once

#include <algorithm>
#include <utility>

#include "errors.hpp"
#include "system_model.hpp"

namespace backstep {

/// Tolerance of the sign test deciding where an i < j L-characteristic terminates.
inline constexpr double kBranchTolerance = 1e-13;

namespace detail {

inline void require_in_triangle(double x, double xi) {
    const double tol = 1e-12;
    if (!(xi >= -tol && xi <= x + tol && x <= 1.0 + tol)) throw DomainError("point lies outside 0 <= xi <= x <= 1");
}

}  // namespace detail

/**
 * Characteristic of K_ij through (x, xi):  x(s) = x - mu_i s,  xi(s) = xi + lambda_j s,
 * ending on the hypotenuse after s_F = (x - xi)/(mu_i + lambda_j).
 */
struct KCharacteristic {
    double x = 0.0, xi = 0.0;
    double mu_i = 1.0, lambda_j = 1.0;
    double s_final = 0.0;
    double end = 0.0;  ///< endpoint (end, end)

    [[nodiscard]] std::pair<double, double> at(double s) const { return {x - mu_i * s, xi + lambda_j * s}; }
};

[[nodiscard]] inline KCharacteristic k_characteristic(double mu_i, double lambda_j, double x, double xi) {
    detail::require_in_triangle(x, xi);
    KCharacteristic c;
    c.x = x;
    c.xi = xi;
    c.mu_i = mu_i;
    c.lambda_j = lambda_j;
    c.s_final = std::max(0.0, (x - xi) / (mu_i + lambda_j));
    c.end = (lambda_j * x + mu_i * xi) / (mu_i + lambda_j);
    return c;
}

[[nodiscard]] inline KCharacteristic trace_characteristic_K(const HyperbolicSystem& sys, int i, int j, double x,
                                                            double xi) {
    if (i < 0 || i >= sys.m || j < 0 || j >= sys.n) throw DimensionError("K index out of range");
    return k_characteristic(sys.mu(i), sys.lambda(j), x, xi);
}

/// Boundary piece on which an L-characteristic ends.
enum class LTerminus { Hypotenuse, Bottom, RightEdge };

/**
 * Characteristic of L_ij through (x, xi):  chi(nu) = x + eps mu_i nu,  zeta(nu) = xi + eps mu_j nu,
 * with eps = +1 for i > j and -1 otherwise. `delta` is 1 when the endpoint value comes from
 * hypotenuse or artificial data, 0 when it comes from the xi = 0 relation.
 */
struct LCharacteristic {
    double x = 0.0, xi = 0.0;
    double mu_i = 1.0, mu_j = 1.0;
    int eps = -1;
    int delta = 0;
    LTerminus terminus = LTerminus::Bottom;
    double nu_final = 0.0;
    double chi_end = 0.0, zeta_end = 0.0;

    [[nodiscard]] std::pair<double, double> at(double nu) const {
        return {x + eps * mu_i * nu, xi + eps * mu_j * nu};
    }
};

[[nodiscard]] inline LCharacteristic l_characteristic(int i, int j, double mu_i, double mu_j, double x, double xi) {
    detail::require_in_triangle(x, xi);
    x = std::min(x, 1.0);
    xi = std::clamp(xi, 0.0, x);
    LCharacteristic c;
    c.x = x;
    c.xi = xi;
    c.mu_i = mu_i;
    c.mu_j = mu_j;
    c.eps = i > j ? 1 : -1;
    if (i == j) {
        c.delta = 0;
        c.terminus = LTerminus::Bottom;
        c.nu_final = xi / mu_i;
    } else if (i < j) {
        // mu_i > mu_j: moving backwards the path leaves the hypotenuse behind unless it started above the line.
        if (mu_i * xi - mu_j * x > kBranchTolerance) {
            c.delta = 1;
            c.terminus = LTerminus::Hypotenuse;
            c.nu_final = (x - xi) / (mu_i - mu_j);
        } else {
            c.delta = 0;
            c.terminus = LTerminus::Bottom;
            c.nu_final = xi / mu_j;
        }
    } else {
        // mu_i < mu_j: forward in nu the path climbs towards the hypotenuse or reaches x = 1.
        c.delta = 1;
        const double nu_h = (x - xi) / (mu_j - mu_i);
        const double nu_1 = (1.0 - x) / mu_i;
        if (nu_h < nu_1 - kBranchTolerance) {
            c.terminus = LTerminus::Hypotenuse;
            c.nu_final = nu_h;
        } else {
            c.terminus = LTerminus::RightEdge;
            c.nu_final = nu_1;
        }
    }
    c.nu_final = std::max(0.0, c.nu_final);
    auto [ce, ze] = c.at(c.nu_final);
    if (c.terminus == LTerminus::Bottom) ze = 0.0;
    if (c.terminus == LTerminus::RightEdge) ce = 1.0;
    if (c.terminus == LTerminus::Hypotenuse) ze = ce;
    c.chi_end = std::clamp(ce, 0.0, 1.0);
    c.zeta_end = std::clamp(ze, 0.0, c.chi_end);
    return c;
}

[[nodiscard]] inline LCharacteristic trace_characteristic_L(const HyperbolicSystem& sys, int i, int j, double x,
                                                            double xi) {
    if (i < 0 || i >= sys.m || j < 0 || j >= sys.m) throw DimensionError("L index out of range");
    return l_characteristic(i, j, sys.mu(i), sys.mu(j), x, xi);
}

}  // namespace backstep
