#pragma once

#include <vector>

#include "kernel_field.hpp"
#include "picard.hpp"
#include "system_model.hpp"
#include "volterra.hpp"

namespace backstep {

/**
 * The observer kernel system becomes a controller kernel system after the change of variables
 * (x, xi) -> (1 - xi, 1 - x). This builds the system whose controller kernels K', L' give
 *   M_ka(x, xi) = -K'_ak(1 - xi, 1 - x),   N_pa(x, xi) = -L'_ap(1 - xi, 1 - x)
 * with zero artificial data. Coupling blocks are transposed and Q0' = (Lambda^+)^-1 R1^T Lambda^-.
 */
[[nodiscard]] inline HyperbolicSystem dual_system(const HyperbolicSystem& sys) {
    HyperbolicSystem d = HyperbolicSystem::zeros(sys.n, sys.m);
    d.lambda = sys.lambda;
    d.mu = sys.mu;
    d.sigma_pp = sys.sigma_pp.transpose();
    d.sigma_pm = sys.sigma_mp.transpose();
    d.sigma_mp = sys.sigma_pm.transpose();
    d.sigma_mm = sys.sigma_mm.transpose();
    for (int r = 0; r < sys.n; ++r)
        for (int p = 0; p < sys.m; ++p) d.q0(r, p) = sys.r1(p, r) * sys.mu(p) / sys.lambda(r);
    return d;
}

/// Field g(x, xi) = sign * f(1 - xi, 1 - x) on the same grid, with reflected lines.
[[nodiscard]] inline KernelField reflect_field(const KernelField& f, double sign) {
    std::vector<DiscontinuityLine> lines;
    for (const auto& ln : f.lines()) lines.push_back(ln.reflected());
    KernelField out(f.grid(), std::move(lines));
    const int N = f.grid().N;
    for (int a = 0; a <= N; ++a)
        for (int b = 0; b <= a; ++b) out.at(a, b) = sign * f.at(N - b, N - a);
    return out;
}

/// Everything the observer design produces.
struct ObserverKernels {
    HyperbolicSystem sys;
    TriangularGrid grid{2};
    PicardReport report;
    std::vector<KernelField> M;       ///< n x m
    std::vector<KernelField> N;       ///< m x m
    std::vector<PiecewiseTrace> H;    ///< m x m, strictly upper triangular
    std::vector<PiecewiseTrace> P_plus;   ///< n x m gains x -> M(x,0) Lambda^-
    std::vector<PiecewiseTrace> P_minus;  ///< m x m gains x -> N(x,0) Lambda^-
    FieldBlock D_plus;   ///< n x n
    FieldBlock D_minus;  ///< m x n
    int gain_sign = 1;   ///< multiplies both gains; +1 is the derived convention

    [[nodiscard]] const KernelField& m_(int k, int a) const { return M[static_cast<std::size_t>(k) * sys.m + a]; }
    [[nodiscard]] const KernelField& n_(int p, int a) const { return N[static_cast<std::size_t>(p) * sys.m + a]; }
    [[nodiscard]] const PiecewiseTrace& h(int i, int j) const { return H[static_cast<std::size_t>(i) * sys.m + j]; }
    [[nodiscard]] const PiecewiseTrace& p_plus(int i, int j) const { return P_plus[static_cast<std::size_t>(i) * sys.m + j]; }
    [[nodiscard]] const PiecewiseTrace& p_minus(int i, int j) const { return P_minus[static_cast<std::size_t>(i) * sys.m + j]; }
};

namespace detail {

inline PiecewiseTrace scaled_trace(PiecewiseTrace t, double c) {
    std::vector<TraceKnot> k = t.knots();
    for (auto& q : k) {
        q.left *= c;
        q.right *= c;
    }
    return PiecewiseTrace(std::move(k));
}

/// Union of the lines of a set of fields, without duplicates.
inline std::vector<DiscontinuityLine> union_lines(const std::vector<KernelField>& fields) {
    std::vector<DiscontinuityLine> out;
    for (const auto& f : fields)
        for (const auto& ln : f.lines())
            if (std::find(out.begin(), out.end(), ln) == out.end()) out.push_back(ln);
    return out;
}

}  // namespace detail

/**
 * Solves the observer kernel equations through the dual controller system, then forms H, the
 * output-injection gains and the target-system kernels
 *   D^- = -N Sigma^{-+} - int_xi^x N(x,s) D^-(s,xi) ds,   D^+ = -M Sigma^{-+} - int_xi^x M(x,s) D^-(s,xi) ds.
 */
[[nodiscard]] inline ObserverKernels solve_observer_kernels(const HyperbolicSystem& sys, const TriangularGrid& grid,
                                                            const PicardOptions& opts = {}) {
    require_valid(sys);
    const int n = sys.n, m = sys.m;
    const HyperbolicSystem dual = dual_system(sys);
    auto [kp, rep] = picard_solve_controller(dual, grid, ArtificialBoundary::zero(m), opts);

    ObserverKernels ok;
    ok.sys = sys;
    ok.grid = grid;
    ok.report = rep;
    ok.M.resize(static_cast<std::size_t>(n) * m);
    ok.N.resize(static_cast<std::size_t>(m) * m);
    for (int a = 0; a < m; ++a) {
        for (int k = 0; k < n; ++k) ok.M[static_cast<std::size_t>(k) * m + a] = reflect_field(kp.k(a, k), -1.0);
        for (int p = 0; p < m; ++p) ok.N[static_cast<std::size_t>(p) * m + a] = reflect_field(kp.l(a, p), -1.0);
    }

    // H(x) = N(1, x) - R1 M(1, x); the x = 1 relation makes it vanish on and below the diagonal.
    std::vector<PiecewiseTrace> mr(static_cast<std::size_t>(n) * m);
    for (std::size_t q = 0; q < mr.size(); ++q) mr[q] = right_trace(ok.M[q]);
    ok.H.resize(static_cast<std::size_t>(m) * m);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            const PiecewiseTrace nr = right_trace(ok.n_(i, j));
            if (j <= i) {
                ok.H[static_cast<std::size_t>(i) * m + j] = detail::scaled_trace(nr, 0.0);
                continue;
            }
            std::vector<std::pair<double, const PiecewiseTrace*>> terms{{1.0, &nr}};
            for (int k = 0; k < n; ++k) terms.push_back({-sys.r1(i, k), &mr[static_cast<std::size_t>(k) * m + j]});
            ok.H[static_cast<std::size_t>(i) * m + j] = combine_traces(terms);
        }
    }

    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) ok.P_plus.push_back(detail::scaled_trace(bottom_trace(ok.m_(i, j)), sys.mu(j)));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) ok.P_minus.push_back(detail::scaled_trace(bottom_trace(ok.n_(i, j)), sys.mu(j)));

    if (n > 0) {
        std::vector<KernelField> all = ok.N;
        all.insert(all.end(), ok.M.begin(), ok.M.end());
        const KernelField proto(grid, detail::union_lines(all));
        const std::vector<KernelField> protos_m(m, proto), protos_n(n, proto);
        FieldBlock negN(m, m, protos_m), Fm(m, n, protos_m);
        for (int i = 0; i < m; ++i)
            for (int k = 0; k < m; ++k) {
                negN(i, k) = ok.n_(i, k);
                for (double& v : negN(i, k).values()) v = -v;
            }
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                auto dst = Fm(i, j).values();
                for (int k = 0; k < m; ++k) {
                    const double c = -sys.sigma_mp(k, j);
                    if (c == 0.0) continue;
                    auto src = ok.n_(i, k).values();
                    for (std::size_t z = 0; z < dst.size(); ++z) dst[z] += c * src[z];
                }
            }
        auto [dm, drep] = volterra_neumann(Fm, negN, false);
        if (!drep.converged)
            throw ConvergenceError("observer target kernel D^- did not converge",
                                   PicardReport{drep.iterations, drep.increments, false, 0.0});
        FieldBlock negM(n, m, protos_n), Dp(n, n, protos_n);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < m; ++k) {
                negM(i, k) = ok.m_(i, k);
                for (double& v : negM(i, k).values()) v = -v;
            }
        FieldBlock prod = Dp;
        compose_into(negM, dm, prod);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                auto dst = Dp(i, j).values();
                auto add = prod(i, j).values();
                for (std::size_t z = 0; z < dst.size(); ++z) dst[z] = add[z];
                for (int k = 0; k < m; ++k) {
                    const double c = -sys.sigma_mp(k, j);
                    if (c == 0.0) continue;
                    auto src = ok.m_(i, k).values();
                    for (std::size_t z = 0; z < dst.size(); ++z) dst[z] += c * src[z];
                }
            }
        ok.D_minus = std::move(dm);
        ok.D_plus = std::move(Dp);
    }
    return ok;
}

}  // namespace backstep
