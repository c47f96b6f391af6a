#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include "errors.hpp"
#include "picard.hpp"
#include "system_model.hpp"

namespace backstep {

/// Upper end of the admissible open interval for eps: 1 - max_{j<i} mu_i / mu_j (1 when m < 2).
[[nodiscard]] inline double eps_upper_limit(const HyperbolicSystem& sys) {
    double r = 0.0;
    for (int i = 0; i < sys.m; ++i)
        for (int j = 0; j < i; ++j) r = std::max(r, sys.mu(i) / sys.mu(j));
    return 1.0 - r;
}

/**
 * Constructive kernel bound  |K|, |L| <= phi_bar exp(M (x - (1 - eps) xi))  obtained from the
 * factorial estimate of the successive approximations.
 */
struct KernelBound {
    double eps = 0.0;
    double lambda_bar = 0.0;    ///< max(lambda_n, mu_1)
    double lambda_under = 0.0;  ///< max(1/lambda_1, 1/mu_m)
    double sigma_bar = 0.0;     ///< largest coupling magnitude
    double q_bar = 0.0;         ///< largest |q_ij|
    double M_lambda = 0.0;
    double M = 0.0;
    double phi_bar = 0.0;

    [[nodiscard]] double operator()(double x, double xi) const { return phi_bar * std::exp(M * (x - (1.0 - eps) * xi)); }

    /// Envelope phi_bar M^q s^q / q! of the q-th increment, with s = max of x - (1 - eps) xi = 1.
    [[nodiscard]] double increment_envelope(int q) const {
        return phi_bar * std::exp(q * std::log(std::max(M, 1e-300)) - std::lgamma(q + 1.0));
    }
};

[[nodiscard]] inline KernelBound theoretical_bound(const HyperbolicSystem& sys, const ArtificialBoundary& art,
                                                   std::optional<double> eps = std::nullopt) {
    require_valid(sys);
    const double upper = eps_upper_limit(sys);
    KernelBound b;
    b.eps = eps.value_or(0.5 * upper);
    if (!(b.eps > 0.0 && b.eps < upper)) throw ParameterError("eps must lie strictly inside (0, " + std::to_string(upper) + ")");

    const int n = sys.n, m = sys.m;
    b.lambda_bar = sys.mu(0);
    b.lambda_under = 1.0 / sys.mu(m - 1);
    if (n > 0) {
        b.lambda_bar = std::max(b.lambda_bar, sys.lambda(n - 1));
        b.lambda_under = std::max(b.lambda_under, 1.0 / sys.lambda(0));
    }
    auto amax = [](const Matrix& A) { return A.size() ? A.cwiseAbs().maxCoeff() : 0.0; };
    b.sigma_bar = std::max({amax(sys.sigma_pp), amax(sys.sigma_pm), amax(sys.sigma_mp), amax(sys.sigma_mm)});
    b.q_bar = amax(sys.q0);

    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) b.M_lambda = std::max(b.M_lambda, 1.0 / (sys.mu(i) + (1.0 - b.eps) * sys.lambda(j)));
        for (int p = 0; p < m; ++p) {
            const double e = i > p ? 1.0 : -1.0;
            b.M_lambda = std::max(b.M_lambda, 1.0 / (-e * (sys.mu(i) - (1.0 - b.eps) * sys.mu(p))));
        }
    }
    b.M = (n * b.lambda_bar * b.lambda_under * b.q_bar + 1.0) * (n + m) * b.sigma_bar * b.M_lambda;

    // Zeroth iterate: the boundary data carried along the characteristics.
    double phi = 0.0;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) phi = std::max(phi, std::abs(sys.k_hyp(i, j)));
        for (int j = 0; j < m; ++j) {
            if (i != j) phi = std::max(phi, std::abs(sys.l_hyp(i, j)));
            if (i <= j) {
                double s = 0.0;
                for (int r = 0; r < n; ++r) s += sys.lambda(r) * sys.q0(r, j) * sys.k_hyp(i, r);
                phi = std::max(phi, std::abs(s / sys.mu(j)));
            }
        }
    }
    b.phi_bar = std::max(phi, art.sup_abs(sys));
    return b;
}

}  // namespace backstep
