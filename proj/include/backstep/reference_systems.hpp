#pragma once

#include <random>

#include "closed_form.hpp"
#include "picard.hpp"
#include "system_model.hpp"

namespace backstep::reference {

/**
 * n = 1, m = 2 heterodirectional system used throughout the acceptance runs. The boundary
 * reflections are strong enough that the uncontrolled system grows.
 */
inline HyperbolicSystem heterodirectional() {
    HyperbolicSystem s = HyperbolicSystem::zeros(1, 2);
    s.lambda << 1.0;
    s.mu << 1.0, 0.2;
    s.sigma_pp << 0.3;
    s.sigma_pm << 0.5, -0.4;
    s.sigma_mp << 0.6, 0.8;
    s.sigma_mm << 0.0, 0.7, -0.5, 0.0;
    s.q0 << 1.0, -0.6;
    s.r1 << 0.8, 1.2;
    return s;
}

/// Two leftward states with mu = (1, 0.2), sigma_12 = 2, sigma_21 = 5; the Bessel closed-form family.
inline TwoStateParameters two_state_parameters() { return {}; }

inline HyperbolicSystem two_state(const TwoStateParameters& p = two_state_parameters()) {
    HyperbolicSystem s = HyperbolicSystem::zeros(0, 2);
    s.mu << p.mu1, p.mu2;
    s.sigma_mm << 0.0, p.s12, p.s21, 0.0;
    return s;
}

/// Artificial datum L_21(1, xi) taken from the closed form, so that the solver reproduces it.
inline ArtificialBoundary two_state_artificial(const TwoStateParameters& p, ClosedFormVariant v) {
    ArtificialBoundary a(2);
    a.set(1, 0, [p, v](double xi) { return closed_form_2x2(p, 1.0, xi, v)[2]; });
    return a;
}

/// Heterodirectional speeds and reflections with every coupling entry drawn from U[-1, 1].
inline HyperbolicSystem random_coupling(std::mt19937& gen) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    HyperbolicSystem s = heterodirectional();
    auto fill = [&](Matrix& a) {
        for (int r = 0; r < a.rows(); ++r)
            for (int c = 0; c < a.cols(); ++c) a(r, c) = u(gen);
    };
    fill(s.sigma_pp);
    fill(s.sigma_pm);
    fill(s.sigma_mp);
    fill(s.sigma_mm);
    for (int j = 0; j < s.m; ++j) s.sigma_mm(j, j) = 0.0;
    return s;
}

}  // namespace backstep::reference
