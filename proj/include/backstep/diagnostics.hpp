#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "bound.hpp"
#include "closed_form.hpp"
#include "observer.hpp"
#include "picard.hpp"

namespace backstep {

/// Largest boundary-condition violation of each kind. Corner nodes, where two data meet, are skipped.
struct BoundaryResiduals {
    double hypotenuse_K = 0.0;
    double hypotenuse_L = 0.0;
    double xi_zero = 0.0;
    double artificial = 0.0;

    [[nodiscard]] double max() const { return std::max({hypotenuse_K, hypotenuse_L, xi_zero, artificial}); }
};

[[nodiscard]] inline BoundaryResiduals controller_residuals(const KernelPair& kp, const ArtificialBoundary& art) {
    const auto& sys = kp.sys;
    const int N = kp.grid.N, n = sys.n, m = sys.m;
    BoundaryResiduals r;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j)
            for (int a = 0; a <= N; ++a)
                r.hypotenuse_K = std::max(r.hypotenuse_K, std::abs(kp.k(i, j).at(a, a) - sys.k_hyp(i, j)));
        for (int j = 0; j < m; ++j) {
            if (i != j)
                for (int a = 1; a < N; ++a)
                    r.hypotenuse_L = std::max(r.hypotenuse_L, std::abs(kp.l(i, j).at(a, a) - sys.l_hyp(i, j)));
            if (i <= j) {
                for (int a = 0; a <= N; ++a) {
                    double rhs = 0.0;
                    for (int k = 0; k < n; ++k) rhs += sys.lambda(k) * kp.k(i, k).at(a, 0) * sys.q0(k, j);
                    r.xi_zero = std::max(r.xi_zero, std::abs(sys.mu(j) * kp.l(i, j).at(a, 0) - rhs));
                }
            } else {
                for (int b = 0; b < N; ++b)
                    r.artificial = std::max(r.artificial,
                                            std::abs(kp.l(i, j).at(N, b) - art.value(sys, i, j, kp.grid.coord(b))));
            }
        }
    }
    return r;
}

/**
 * Observer analogues: M(x,x) = sigma^{+-}/(lambda_i + mu_j), N_ij(x,x) = sigma^{--}_ij/(mu_j - mu_i)
 * for i != j, N_ij(x,0) = 0 for i < j and N_ij(1,x) = sum_k r_ik M_kj(1,x) for j <= i.
 * Reported in the same slots: hypotenuse_K for M, hypotenuse_L for N, xi_zero and artificial
 * for the two remaining relations.
 */
[[nodiscard]] inline BoundaryResiduals observer_residuals(const ObserverKernels& ok) {
    const auto& sys = ok.sys;
    const int N = ok.grid.N, n = sys.n, m = sys.m;
    BoundaryResiduals r;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            const double target = sys.sigma_pm(i, j) / (sys.lambda(i) + sys.mu(j));
            for (int a = 0; a <= N; ++a) r.hypotenuse_K = std::max(r.hypotenuse_K, std::abs(ok.m_(i, j).at(a, a) - target));
        }
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            if (i != j) {
                const double target = sys.sigma_mm(i, j) / (sys.mu(j) - sys.mu(i));
                for (int a = 1; a < N; ++a)
                    r.hypotenuse_L = std::max(r.hypotenuse_L, std::abs(ok.n_(i, j).at(a, a) - target));
            }
            if (i < j)
                for (int a = 0; a < N; ++a) r.xi_zero = std::max(r.xi_zero, std::abs(ok.n_(i, j).at(a, 0)));
            if (j <= i)
                for (int b = 0; b < N; ++b) {
                    double rhs = 0.0;
                    for (int k = 0; k < n; ++k) rhs += sys.r1(i, k) * ok.m_(k, j).at(N, b);
                    r.artificial = std::max(r.artificial, std::abs(ok.n_(i, j).at(N, b) - rhs));
                }
        }
    return r;
}

/// Largest |L_ij - closed form| over all four fields, skipping nodes with |xi - (mu2/mu1) x| < band.
[[nodiscard]] inline double closed_form_error(const KernelPair& kp, const TwoStateParameters& p,
                                              ClosedFormVariant variant, double band) {
    const int N = kp.grid.N;
    const double c = p.mu2 / p.mu1;
    double worst = 0.0;
    for (int a = 0; a <= N; ++a)
        for (int b = 0; b <= a; ++b) {
            const double x = kp.grid.coord(a), xi = kp.grid.coord(b);
            if (std::abs(xi - c * x) < band) continue;
            const KernelQuad q = closed_form_2x2(p, x, xi, variant);
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) worst = std::max(worst, std::abs(kp.l(i, j).at(a, b) - q[2 * i + j]));
        }
    return worst;
}

/// max over nodes and fields of |K|/bound and |L|/bound; dominance holds when this is <= 1.
[[nodiscard]] inline double bound_ratio(const KernelPair& kp, const KernelBound& bound) {
    const int N = kp.grid.N;
    double worst = 0.0;
    auto scan = [&](const std::vector<KernelField>& fs) {
        for (const auto& f : fs)
            for (int a = 0; a <= N; ++a)
                for (int b = 0; b <= a; ++b)
                    worst = std::max(worst, std::abs(f.at(a, b)) / bound(kp.grid.coord(a), kp.grid.coord(b)));
    };
    scan(kp.K);
    scan(kp.L);
    return worst;
}

/**
 * Shape of the increment history after its peak, down to the point where it reaches `floor`.
 * `early_rate` and `late_rate` are the mean slopes of log10 increments over the first and
 * second half of that stretch; factorial decay makes the late rate the steeper one.
 */
struct IncrementShape {
    int peak = 0;
    int last = 0;
    double early_rate = 0.0;
    double late_rate = 0.0;

    [[nodiscard]] bool superlinear() const { return last - peak >= 4 && late_rate < early_rate; }
};

[[nodiscard]] inline IncrementShape increment_shape(const std::vector<double>& inc, double floor = 1e-13) {
    IncrementShape s;
    if (inc.size() < 2) return s;
    s.peak = static_cast<int>(std::max_element(inc.begin(), inc.end()) - inc.begin());
    s.last = s.peak;
    while (s.last + 1 < static_cast<int>(inc.size()) && inc[static_cast<std::size_t>(s.last)] > floor) ++s.last;
    const int mid = (s.peak + s.last) / 2;
    auto slope = [&](int a, int b) {
        if (b <= a) return 0.0;
        return (std::log10(std::max(inc[static_cast<std::size_t>(b)], 1e-300)) -
                std::log10(std::max(inc[static_cast<std::size_t>(a)], 1e-300))) /
               (b - a);
    };
    s.early_rate = slope(s.peak, mid);
    s.late_rate = slope(mid, s.last);
    return s;
}

}  // namespace backstep
