#pragma once

#include <vector>

#include "kernel_field.hpp"
#include "picard.hpp"
#include "volterra.hpp"

namespace backstep {

/// Everything the state-feedback design produces.
struct ControllerKernels {
    KernelPair kernels;
    ArtificialBoundary artificial;
    PicardReport report;
    std::vector<PiecewiseTrace> G;  ///< m x m, row-major; zero traces on and above the diagonal
    FieldBlock c_plus;              ///< m x n
    FieldBlock c_minus;             ///< m x m
    VolterraReport c_report;

    [[nodiscard]] const HyperbolicSystem& sys() const { return kernels.sys; }
    [[nodiscard]] const TriangularGrid& grid() const { return kernels.grid; }
    [[nodiscard]] const PiecewiseTrace& g(int i, int j) const { return G[static_cast<std::size_t>(i) * kernels.sys.m + j]; }
};

namespace detail {

inline std::vector<KernelField> row_prototypes(const KernelPair& kp) {
    std::vector<KernelField> protos;
    for (int i = 0; i < kp.sys.m; ++i) {
        const KernelField& src = kp.sys.n > 0 ? kp.k(i, 0) : kp.l(i, 0);
        protos.emplace_back(kp.grid, src.lines());
    }
    return protos;
}

}  // namespace detail

/**
 * g_ij(x) = mu_j L_ij(x, 0) - sum_p lambda_p q_pj K_ip(x, 0) for i > j; entries with i <= j are
 * exactly zero because the xi = 0 boundary relation makes them vanish.
 */
[[nodiscard]] inline std::vector<PiecewiseTrace> compute_G(const KernelPair& kp) {
    const auto& sys = kp.sys;
    const int m = sys.m;
    std::vector<PiecewiseTrace> G(static_cast<std::size_t>(m) * m);
    const int N = kp.grid.N;
    std::vector<TraceKnot> zero(N + 1);
    for (int a = 0; a <= N; ++a) zero[a].pos = kp.grid.coord(a);
    for (int i = 0; i < m; ++i) {
        std::vector<PiecewiseTrace> lb, kb;
        for (int j = 0; j < m; ++j) lb.push_back(bottom_trace(kp.l(i, j)));
        for (int p = 0; p < sys.n; ++p) kb.push_back(bottom_trace(kp.k(i, p)));
        for (int j = 0; j < m; ++j) {
            if (i <= j) {
                G[static_cast<std::size_t>(i) * m + j] = PiecewiseTrace(zero);
                continue;
            }
            std::vector<std::pair<double, const PiecewiseTrace*>> terms{{sys.mu(j), &lb[j]}};
            for (int p = 0; p < sys.n; ++p) terms.push_back({-sys.lambda(p) * sys.q0(p, j), &kb[p]});
            G[static_cast<std::size_t>(i) * m + j] = combine_traces(terms);
        }
    }
    return G;
}

struct CKernels {
    FieldBlock c_plus;   ///< m x n
    FieldBlock c_minus;  ///< m x m
    VolterraReport report;
};

/**
 * C^-(x,xi) = L(x,xi) + int_xi^x C^-(x,s) L(s,xi) ds   (successive substitution)
 * C^+(x,xi) = K(x,xi) + int_xi^x C^-(x,s) K(s,xi) ds   (explicit)
 */
[[nodiscard]] inline CKernels solve_C_kernels(const KernelPair& kp, double tol = 1e-10, int max_iter = 500) {
    const auto& sys = kp.sys;
    const auto protos = detail::row_prototypes(kp);
    FieldBlock L(sys.m, sys.m, protos), K(sys.m, sys.n, protos);
    for (int i = 0; i < sys.m; ++i) {
        for (int j = 0; j < sys.m; ++j) L(i, j) = kp.l(i, j);
        for (int j = 0; j < sys.n; ++j) K(i, j) = kp.k(i, j);
    }
    auto [cm, rep] = volterra_neumann(L, L, true, tol, max_iter);
    if (!rep.converged) throw ConvergenceError("C^- successive substitution did not converge", PicardReport{rep.iterations, rep.increments, false, 0.0});
    FieldBlock cp = K;
    if (sys.n > 0) {
        FieldBlock prod = K;
        compose_into(cm, K, prod);
        for (std::size_t k = 0; k < cp.f.size(); ++k) {
            auto dst = cp.f[k].values();
            auto add = prod.f[k].values();
            for (std::size_t z = 0; z < dst.size(); ++z) dst[z] += add[z];
        }
    }
    return {std::move(cp), std::move(cm), rep};
}

/**
 * Kernel R of the inverse transformation (u,v) = (alpha,beta) - int_0^x R (alpha,beta) dxi,
 * computed as minus the resolvent Gamma = F + F o Gamma of F = [[0, 0], [K, L]]. Only the lower
 * blocks are stored; the rows belonging to u vanish identically.
 */
struct InverseKernel {
    int n = 0, m = 0;
    FieldBlock lower;  ///< m x (n + m): [R_vu, R_vv]
    VolterraReport report;

    /// R_ij for the full (n+m) x (n+m) index range; zero for i < n.
    [[nodiscard]] double operator()(int i, int j, double x, double xi) const {
        if (i < n) return 0.0;
        return lower(i - n, j)(x, xi);
    }
};

[[nodiscard]] inline InverseKernel invert_transform(const KernelPair& kp, double tol = 1e-10, int max_iter = 500) {
    const auto& sys = kp.sys;
    const int n = sys.n, m = sys.m;
    const auto protos = detail::row_prototypes(kp);
    FieldBlock Fv(m, n + m, protos);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) Fv(i, j) = kp.k(i, j);
        for (int j = 0; j < m; ++j) Fv(i, n + j) = kp.l(i, j);
    }
    FieldBlock Lb(m, m, protos);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) Lb(i, j) = kp.l(i, j);
    // Gamma's u-rows vanish, so Gamma_v = F_v + L o Gamma_v.
    auto [gamma, rep] = volterra_neumann(Fv, Lb, false, tol, max_iter);
    if (!rep.converged) throw ConvergenceError("inverse-kernel successive substitution did not converge", PicardReport{rep.iterations, rep.increments, false, 0.0});
    for (auto& f : gamma.f)
        for (double& v : f.values()) v = -v;
    return {n, m, std::move(gamma), rep};
}

/// Solves K, L by successive approximations and derives G and C^+-.
[[nodiscard]] inline ControllerKernels synthesize_controller(const HyperbolicSystem& sys, const TriangularGrid& grid,
                                                             const ArtificialBoundary& art,
                                                             const PicardOptions& opts = {}, bool with_c = true) {
    auto [kp, rep] = picard_solve_controller(sys, grid, art, opts);
    ControllerKernels ck;
    ck.kernels = std::move(kp);
    ck.artificial = art;
    ck.report = rep;
    ck.G = compute_G(ck.kernels);
    if (with_c) {
        auto c = solve_C_kernels(ck.kernels);
        ck.c_plus = std::move(c.c_plus);
        ck.c_minus = std::move(c.c_minus);
        ck.c_report = c.report;
    }
    return ck;
}

}  // namespace backstep
