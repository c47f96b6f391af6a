#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <stdexcept>
#include <string>
#include <vector>

#include "characteristics.hpp"
#include "errors.hpp"
#include "kernel_field.hpp"
#include "system_model.hpp"

namespace backstep {

/**
 * Free boundary data L_ij(1, xi) for i > j. Entries without a function fall back to the
 * hypotenuse constant l_ij, which keeps L_ij continuous at the corner (1, 1).
 */
class ArtificialBoundary {
public:
    using Datum = std::function<double(double)>;

    ArtificialBoundary() = default;
    explicit ArtificialBoundary(int m) : m_(m), data_(static_cast<std::size_t>(m) * m) {}

    /// Every entry set to zero instead of the hypotenuse constant.
    static ArtificialBoundary zero(int m) {
        ArtificialBoundary a(m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < i; ++j) a.set(i, j, [](double) { return 0.0; });
        return a;
    }

    void set(int i, int j, Datum f) {
        if (i <= j || i >= m_ || j < 0) throw DimensionError("artificial boundary data exists only for i > j");
        data_[static_cast<std::size_t>(i) * m_ + j] = std::move(f);
    }

    [[nodiscard]] bool is_custom(int i, int j) const {
        return m_ > 0 && static_cast<bool>(data_[static_cast<std::size_t>(i) * m_ + j]);
    }

    [[nodiscard]] double value(const HyperbolicSystem& sys, int i, int j, double xi) const {
        if (m_ > 0 && i < m_ && j < m_) {
            const auto& f = data_[static_cast<std::size_t>(i) * m_ + j];
            if (f) return f(xi);
        }
        return sys.l_hyp(i, j);
    }

    /// Sampled sup-norm over xi in [0, 1] and i > j.
    [[nodiscard]] double sup_abs(const HyperbolicSystem& sys, int samples = 1000) const {
        double r = 0.0;
        for (int i = 0; i < sys.m; ++i)
            for (int j = 0; j < i; ++j)
                for (int k = 0; k <= samples; ++k)
                    r = std::max(r, std::abs(value(sys, i, j, static_cast<double>(k) / samples)));
        return r;
    }

private:
    int m_ = 0;
    std::vector<Datum> data_;
};

/// How integrals along characteristics are discretized.
enum class PathQuadrature {
    Trapezoid,  ///< arc step <= grid step, cell interpolation (second order)
    Cubic       ///< samples on grid-line crossings, cubic line interpolation, fourth-order rule
};

struct PicardOptions {
    double tol = 1e-10;
    int max_iter = 200;
    bool parallel = true;  ///< solve independent rows concurrently
    PathQuadrature quadrature = PathQuadrature::Cubic;
    bool in_place = true;  ///< Gauss-Seidel order within a row; false gives the plain Jacobi sequence
};

struct PicardReport {
    int iterations = 0;
    std::vector<double> increments;  ///< sup-norm of H^q - H^{q-1}, one per iteration
    bool converged = false;
    double residual = 0.0;  ///< sup-norm of T(H) - H at the returned iterate
};

class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, PicardReport report)
        : std::runtime_error(what), report_(std::move(report)) {}
    [[nodiscard]] const PicardReport& report() const { return report_; }

private:
    PicardReport report_;
};

/**
 * Lines across which row i of (K, L) jumps. L_ij with i < j switches from xi = 0 data to the
 * hypotenuse value across the line through the origin; L_ij with i > j switches from artificial
 * to hypotenuse data across the line through (1, 1). A line is flagged only when the two data
 * disagree where they meet, since otherwise every field of the row is continuous across it.
 */
[[nodiscard]] inline std::vector<DiscontinuityLine> row_lines(const HyperbolicSystem& sys,
                                                              const ArtificialBoundary& art, int i) {
    std::vector<DiscontinuityLine> out;
    auto differs = [](double a, double b) { return std::abs(a - b) > 1e-12 * (1.0 + std::abs(a) + std::abs(b)); };
    for (int j = 0; j < sys.m; ++j) {
        if (j == i) continue;
        if (i < j) {
            double bottom = 0.0;
            for (int r = 0; r < sys.n; ++r) bottom += sys.lambda(r) * sys.q0(r, j) * sys.k_hyp(i, r);
            bottom /= sys.mu(j);
            if (differs(bottom, sys.l_hyp(i, j)))
                out.push_back(DiscontinuityLine::through(0.0, 0.0, sys.mu(i), sys.mu(j)));
        } else if (differs(art.value(sys, i, j, 1.0), sys.l_hyp(i, j))) {
            out.push_back(DiscontinuityLine::through(1.0, 1.0, sys.mu(i), sys.mu(j)));
        }
    }
    return out;
}

/// Converged K and L on the triangular grid. K is m x n, L is m x m, both stored row-major.
struct KernelPair {
    HyperbolicSystem sys;
    TriangularGrid grid{2};
    std::vector<KernelField> K;
    std::vector<KernelField> L;

    [[nodiscard]] const KernelField& k(int i, int j) const { return K[static_cast<std::size_t>(i) * sys.n + j]; }
    [[nodiscard]] const KernelField& l(int i, int j) const { return L[static_cast<std::size_t>(i) * sys.m + j]; }
    KernelField& k(int i, int j) { return K[static_cast<std::size_t>(i) * sys.n + j]; }
    KernelField& l(int i, int j) { return L[static_cast<std::size_t>(i) * sys.m + j]; }
};

struct RowSolution {
    std::vector<KernelField> K;  ///< n fields
    std::vector<KernelField> L;  ///< m fields
    std::vector<double> increments;
    bool converged = false;
    double residual = 0.0;
};

namespace detail {

/// Composite trapezoid of f along a straight path p(t) = (x0 + t vx, xi0 + t vxi), t in [0, T],
/// split wherever the path crosses a line of `f`; each piece samples only its own side.
inline double path_integral(const KernelField& f, double x0, double xi0, double vx, double vxi, double T) {
    if (T <= 0.0) return 0.0;
    const double speed = std::hypot(vx, vxi);
    const double h = f.grid().step();

    double cuts[34];
    int nc = 0;
    cuts[nc++] = 0.0;
    for (const auto& ln : f.lines()) {
        const double c0 = ln.offset(x0, xi0);
        const double rate = -ln.dxi * vx + ln.dx * vxi;
        if (std::abs(rate) < 1e-12 * std::hypot(vx, vxi)) continue;
        const double t = -c0 / rate;
        if (t > 1e-14 * T && t < T * (1.0 - 1e-14)) cuts[nc++] = t;
    }
    cuts[nc++] = T;
    std::sort(cuts + 1, cuts + nc - 1);

    double total = 0.0;
    for (int p = 0; p + 1 < nc; ++p) {
        const double ta = cuts[p], tb = cuts[p + 1];
        if (tb <= ta) continue;
        const double tm = 0.5 * (ta + tb);
        const std::uint32_t mask = f.mask_of(x0 + tm * vx, xi0 + tm * vxi);
        const int steps = std::max(1, static_cast<int>(std::ceil((tb - ta) * speed / h - 1e-9)));
        const double dt = (tb - ta) / steps;
        double acc = 0.5 * (f.evaluate_masked(x0 + ta * vx, xi0 + ta * vxi, mask) +
                            f.evaluate_masked(x0 + tb * vx, xi0 + tb * vxi, mask));
        for (int k = 1; k < steps; ++k) {
            const double t = ta + k * dt;
            acc += f.evaluate_masked(x0 + t * vx, xi0 + t * vxi, mask);
        }
        total += acc * dt;
    }
    return total;
}

/// Integral over [s_0, s_K] of the piecewise cubic through the samples (s_k, f_k).
inline double composite_cubic(const double* s, const double* f, int K) {
    if (K <= 0) return 0.0;
    if (K == 1) return 0.5 * (s[1] - s[0]) * (f[0] + f[1]);
    const double g = 0.5 / std::sqrt(3.0);
    double total = 0.0;
    const int width = std::min(K, 3);
    for (int k = 0; k < K; ++k) {
        const int j0 = std::clamp(k - 1, 0, K - width);
        const double h = s[k + 1] - s[k];
        if (width == 3 && j0 == k - 1) {
            const double h0 = s[k] - s[k - 1], h2 = s[k + 2] - s[k + 1];
            if (std::abs(h0 - h) <= 1e-9 * h && std::abs(h2 - h) <= 1e-9 * h) {
                total += h / 24.0 * (-f[k - 1] + 13.0 * f[k] + 13.0 * f[k + 1] - f[k + 2]);
                continue;
            }
        }
        const double mid = s[k] + 0.5 * h;
        for (double e : {mid - g * h, mid + g * h}) {
            double val = 0.0;
            for (int a = j0; a <= j0 + width; ++a) {
                double w = 1.0;
                for (int b = j0; b <= j0 + width; ++b)
                    if (b != a) w *= (e - s[b]) / (s[a] - s[b]);
                val += w * f[a];
            }
            total += 0.5 * h * val;
        }
    }
    return total;
}

/// Fourth-order counterpart of path_integral: samples where the path crosses grid lines.
inline double path_integral_cubic(const KernelField& f, double x0, double xi0, double vx, double vxi, double T,
                                  std::vector<double>& s_buf, std::vector<double>& f_buf) {
    if (T <= 0.0) return 0.0;
    const int N = f.grid().N;
    const bool along_x = std::abs(vx) >= std::abs(vxi);
    const double c0 = along_x ? x0 : xi0;
    const double vc = along_x ? vx : vxi;

    double cuts[34];
    int nc = 0;
    cuts[nc++] = 0.0;
    for (const auto& ln : f.lines()) {
        const double o = ln.offset(x0, xi0);
        const double rate = -ln.dxi * vx + ln.dx * vxi;
        if (std::abs(rate) < 1e-12 * std::hypot(vx, vxi)) continue;
        const double t = -o / rate;
        if (t > 1e-14 * T && t < T * (1.0 - 1e-14)) cuts[nc++] = t;
    }
    cuts[nc++] = T;
    std::sort(cuts + 1, cuts + nc - 1);

    double total = 0.0;
    for (int p = 0; p + 1 < nc; ++p) {
        const double ta = cuts[p], tb = cuts[p + 1];
        if (tb <= ta) continue;
        const double tm = 0.5 * (ta + tb);
        const std::uint32_t mask = f.mask_of(x0 + tm * vx, xi0 + tm * vxi);
        s_buf.clear();
        f_buf.clear();
        s_buf.push_back(ta);
        f_buf.push_back(f.evaluate_point(x0 + ta * vx, xi0 + ta * vxi, mask));
        // Grid indices strictly between the piece ends, in the direction of travel.
        const double ca = (c0 + vc * ta) * N, cb = (c0 + vc * tb) * N;
        const double clo = std::min(ca, cb), chi = std::max(ca, cb);
        int g_first = static_cast<int>(std::floor(clo + 1e-9)) + 1;
        int g_last = static_cast<int>(std::ceil(chi - 1e-9)) - 1;
        const double tol_t = 1e-9 * (tb - ta);
        auto push = [&](int gi) {
            const double t = (static_cast<double>(gi) / N - c0) / vc;
            if (t <= ta + tol_t || t >= tb - tol_t) return;
            const double px = along_x ? static_cast<double>(gi) / N : x0 + t * vx;
            const double pxi = along_x ? xi0 + t * vxi : static_cast<double>(gi) / N;
            const double kpos = along_x ? pxi * N : px * N - gi;
            const GridLine gl = along_x ? GridLine::vertical(gi) : GridLine::horizontal(gi, N);
            double v = f.line_value(gl, kpos, mask);
            if (std::isnan(v)) v = f.evaluate_masked(px, pxi, mask);
            s_buf.push_back(t);
            f_buf.push_back(v);
        };
        if (vc > 0.0)
            for (int gi = g_first; gi <= g_last; ++gi) push(gi);
        else
            for (int gi = g_last; gi >= g_first; --gi) push(gi);
        s_buf.push_back(tb);
        f_buf.push_back(f.evaluate_point(x0 + tb * vx, xi0 + tb * vxi, mask));
        total += composite_cubic(s_buf.data(), f_buf.data(), static_cast<int>(s_buf.size()) - 1);
    }
    return total;
}

/// One application of the characteristic integral operator to row i.
/// With `in_place`, each field's source reads the values already updated in this sweep.
inline void row_sweep(const HyperbolicSystem& sys, const ArtificialBoundary& art, int i,
                      const std::vector<KernelField>& K, const std::vector<KernelField>& L,
                      std::vector<KernelField>& SK, std::vector<KernelField>& SL, std::vector<KernelField>& Knew,
                      std::vector<KernelField>& Lnew, PathQuadrature quad, bool in_place) {
    const int n = sys.n, m = sys.m;
    const TriangularGrid& g = K.empty() ? L.front().grid() : K.front().grid();
    const std::size_t nodes = g.node_count();
    std::vector<double> s_buf, f_buf;
    auto integrate = [&](const KernelField& f, double x, double xi, double vx, double vxi, double T) {
        return quad == PathQuadrature::Cubic ? path_integral_cubic(f, x, xi, vx, vxi, T, s_buf, f_buf)
                                             : path_integral(f, x, xi, vx, vxi, T);
    };
    if (in_place) {
        for (int j = 0; j < n; ++j) std::copy(K[j].values().begin(), K[j].values().end(), Knew[j].values().begin());
        for (int j = 0; j < m; ++j) std::copy(L[j].values().begin(), L[j].values().end(), Lnew[j].values().begin());
    }
    const std::vector<KernelField>& Ksrc = in_place ? Knew : K;
    const std::vector<KernelField>& Lsrc = in_place ? Lnew : L;

    // Right-hand side of a characteristic ODE, combined once per node.
    auto combine = [&](KernelField& out_field, auto coef_k, auto coef_l) {
        auto out = out_field.values();
        std::fill(out.begin(), out.end(), 0.0);
        bool any = false;
        for (int k = 0; k < n; ++k) {
            const double c = coef_k(k);
            if (c == 0.0) continue;
            any = true;
            auto in = Ksrc[k].values();
            for (std::size_t q = 0; q < nodes; ++q) out[q] += c * in[q];
        }
        for (int p = 0; p < m; ++p) {
            const double c = coef_l(p);
            if (c == 0.0) continue;
            any = true;
            auto in = Lsrc[p].values();
            for (std::size_t q = 0; q < nodes; ++q) out[q] += c * in[q];
        }
        return any && !out_field.is_zero();
    };

    if (!in_place) {
        for (int j = 0; j < n; ++j) {
            combine(SK[j], [&](int k) { return sys.sigma_pp(k, j); }, [&](int p) { return sys.sigma_mp(p, j); });
        }
        for (int j = 0; j < m; ++j) {
            combine(SL[j], [&](int k) { return sys.sigma_pm(k, j); }, [&](int p) { return sys.sigma_mm(p, j); });
        }
    }

    for (int j = 0; j < n; ++j) {
        if (in_place)
            combine(SK[j], [&](int k) { return sys.sigma_pp(k, j); }, [&](int p) { return sys.sigma_mp(p, j); });
        const double mu_i = sys.mu(i), lam = sys.lambda(j);
        const double kij = sys.k_hyp(i, j);
        const bool zero_src = SK[j].is_zero();
        for (int a = 0; a <= g.N; ++a) {
            const double x = g.coord(a);
            for (int b = 0; b <= a; ++b) {
                const double xi = g.coord(b);
                const double sF = (x - xi) / (mu_i + lam);
                Knew[j].at(a, b) = kij + (zero_src ? 0.0 : integrate(SK[j], x, xi, -mu_i, lam, sF));
            }
        }
    }

    // L endpoints on xi = 0 read the freshly updated K.
    for (int j = 0; j < m; ++j) {
        if (in_place)
            combine(SL[j], [&](int k) { return sys.sigma_pm(k, j); }, [&](int p) { return sys.sigma_mm(p, j); });
        const double mu_i = sys.mu(i), mu_j = sys.mu(j);
        const bool zero_src = SL[j].is_zero();
        for (int a = 0; a <= g.N; ++a) {
            const double x = g.coord(a);
            for (int b = 0; b <= a; ++b) {
                const double xi = g.coord(b);
                const LCharacteristic c = l_characteristic(i, j, mu_i, mu_j, x, xi);
                double end = 0.0;
                switch (c.terminus) {
                    case LTerminus::Hypotenuse: end = sys.l_hyp(i, j); break;
                    case LTerminus::RightEdge: end = art.value(sys, i, j, c.zeta_end); break;
                    case LTerminus::Bottom:
                        for (int r = 0; r < n; ++r) {
                            const double w = sys.lambda(r) * sys.q0(r, j);
                            if (w != 0.0)
                                end += w * Knew[r].evaluate_point(c.chi_end, 0.0, Knew[r].mask_of(c.chi_end, 0.0));
                        }
                        end /= mu_j;
                        break;
                }
                const double integral =
                    zero_src ? 0.0 : integrate(SL[j], x, xi, c.eps * mu_i, c.eps * mu_j, c.nu_final);
                Lnew[j].at(a, b) = end - c.eps * integral;
            }
        }
    }
}

inline double sup_diff(const std::vector<KernelField>& a, const std::vector<KernelField>& b) {
    double r = 0.0;
    for (std::size_t f = 0; f < a.size(); ++f) {
        auto va = a[f].values();
        auto vb = b[f].values();
        for (std::size_t q = 0; q < va.size(); ++q) r = std::max(r, std::abs(va[q] - vb[q]));
    }
    return r;
}

}  // namespace detail

/**
 * Successive approximations for row i of the controller kernels. The row only references
 * K_ik and L_ip with the same first index, so rows are solved independently and a row
 * solved alone is bit-identical to the same row inside a full solve.
 */
[[nodiscard]] inline RowSolution solve_controller_row(const HyperbolicSystem& sys, const TriangularGrid& grid,
                                                      const ArtificialBoundary& art, int i,
                                                      const PicardOptions& opts = {}) {
    if (i < 0 || i >= sys.m) throw DimensionError("row index out of range");
    const KernelField proto(grid, row_lines(sys, art, i));
    RowSolution row;
    row.K.assign(sys.n, proto);
    row.L.assign(sys.m, proto);
    std::vector<KernelField> SK(sys.n, proto), SL(sys.m, proto), Knew(sys.n, proto), Lnew(sys.m, proto);

    for (int q = 1; q <= opts.max_iter; ++q) {
        detail::row_sweep(sys, art, i, row.K, row.L, SK, SL, Knew, Lnew, opts.quadrature, opts.in_place);
        const double inc = std::max(detail::sup_diff(Knew, row.K), detail::sup_diff(Lnew, row.L));
        std::swap(row.K, Knew);
        std::swap(row.L, Lnew);
        row.increments.push_back(inc);
        if (!std::isfinite(inc)) break;
        if (inc < opts.tol) {
            row.converged = true;
            break;
        }
    }
    detail::row_sweep(sys, art, i, row.K, row.L, SK, SL, Knew, Lnew, opts.quadrature, opts.in_place);
    row.residual = std::max(detail::sup_diff(Knew, row.K), detail::sup_diff(Lnew, row.L));
    return row;
}

/**
 * Solves the controller kernel equations for K and L by the method of characteristics and
 * successive approximations. Throws ConvergenceError (carrying the report) when any row
 * exhausts max_iter.
 */
[[nodiscard]] inline std::pair<KernelPair, PicardReport> picard_solve_controller(const HyperbolicSystem& sys,
                                                                                const TriangularGrid& grid,
                                                                                const ArtificialBoundary& art,
                                                                                const PicardOptions& opts = {}) {
    require_valid(sys);
    if (!(opts.tol > 0.0)) throw ParameterError("Picard tolerance must be positive");
    if (opts.max_iter < 1) throw ParameterError("max_iter must be at least 1");

    std::vector<RowSolution> rows(sys.m);
    if (opts.parallel && sys.m > 1) {
        std::vector<std::future<RowSolution>> futs;
        for (int i = 0; i < sys.m; ++i)
            futs.push_back(std::async(std::launch::async, [&, i] { return solve_controller_row(sys, grid, art, i, opts); }));
        for (int i = 0; i < sys.m; ++i) rows[i] = futs[i].get();
    } else {
        for (int i = 0; i < sys.m; ++i) rows[i] = solve_controller_row(sys, grid, art, i, opts);
    }

    PicardReport rep;
    rep.converged = true;
    for (const auto& r : rows) {
        rep.converged = rep.converged && r.converged;
        rep.residual = std::max(rep.residual, r.residual);
        if (r.increments.size() > rep.increments.size()) rep.increments.resize(r.increments.size(), 0.0);
        for (std::size_t q = 0; q < r.increments.size(); ++q)
            rep.increments[q] = std::max(rep.increments[q], r.increments[q]);
    }
    rep.iterations = static_cast<int>(rep.increments.size());
    if (!rep.converged)
        throw ConvergenceError("successive approximations did not reach tol " + std::to_string(opts.tol) + " within " +
                                   std::to_string(opts.max_iter) + " iterations",
                               rep);

    KernelPair kp;
    kp.sys = sys;
    kp.grid = grid;
    kp.K.reserve(static_cast<std::size_t>(sys.m) * sys.n);
    kp.L.reserve(static_cast<std::size_t>(sys.m) * sys.m);
    for (auto& r : rows) {
        for (auto& f : r.K) kp.K.push_back(std::move(f));
        for (auto& f : r.L) kp.L.push_back(std::move(f));
    }
    return {std::move(kp), rep};
}

}  // namespace backstep
