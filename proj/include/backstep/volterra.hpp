#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "errors.hpp"
#include "kernel_field.hpp"

namespace backstep {

/// Outcome of a successive-substitution solve of a Volterra equation on T.
struct VolterraReport {
    int iterations = 0;
    bool converged = false;
    std::vector<double> increments;
};

/// A square or rectangular array of kernel fields, row-major.
struct FieldBlock {
    int rows = 0, cols = 0;
    std::vector<KernelField> f;

    FieldBlock() = default;
    FieldBlock(int r, int c, const std::vector<KernelField>& proto_per_row)
        : rows(r), cols(c) {
        f.reserve(static_cast<std::size_t>(r) * c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) f.push_back(proto_per_row[i]);
    }

    [[nodiscard]] const KernelField& operator()(int i, int j) const { return f[static_cast<std::size_t>(i) * cols + j]; }
    KernelField& operator()(int i, int j) { return f[static_cast<std::size_t>(i) * cols + j]; }
};

namespace detail {

/**
 * A field restricted to one grid line: node values indexed by the global node coordinate
 * along the line plus the crossings with the field's flagged lines, stored with both
 * one-sided limits (positions in node units).
 */
struct LineData {
    const double* v = nullptr;  ///< v[c] valid on the line's node range
    std::vector<double> storage;
    std::vector<TraceKnot> breaks;
};

inline void add_breaks(const KernelField& f, const GridLine& gl, int c_offset, LineData& out) {
    out.breaks.clear();
    const double N = f.grid().N;
    for (const auto& ln : f.lines()) {
        const double c0 = ln.offset(gl.a0 / N, gl.b0 / N);
        const double c1 = -ln.dxi * gl.da / N + ln.dx * gl.db / N;
        if (std::abs(c1) < 1e-15) continue;
        const double kc = -c0 / c1;
        if (kc < -1e-9 || kc > gl.count + 1e-9) continue;
        const double k = std::clamp(kc, 0.0, static_cast<double>(gl.count));
        auto mask_near = [&](double kk) {
            return f.mask_of((gl.a0 + gl.da * kk) / N, (gl.b0 + gl.db * kk) / N);
        };
        TraceKnot t;
        t.pos = c_offset + k;
        const double lo = std::max(0.0, k - 0.5), hi = std::min<double>(gl.count, k + 0.5);
        t.right = hi > k ? f.line_value(gl, k, mask_near(hi)) : f.line_value(gl, k, mask_near(lo));
        t.left = lo < k ? f.line_value(gl, k, mask_near(lo)) : t.right;
        if (std::isnan(t.left) || std::isnan(t.right)) continue;
        out.breaks.push_back(t);
    }
    std::sort(out.breaks.begin(), out.breaks.end(), [](const TraceKnot& a, const TraceKnot& b) { return a.pos < b.pos; });
}

/// Values along vertical line a, indexed by b.
inline LineData vertical_data(const KernelField& f, int a) {
    LineData d;
    d.v = f.values().data() + f.grid().index(a, 0);
    if (!f.lines().empty()) add_breaks(f, GridLine::vertical(a), 0, d);
    return d;
}

/// Values along horizontal line b, indexed by a (entries below b unused).
inline LineData horizontal_data(const KernelField& f, int b) {
    const int N = f.grid().N;
    LineData d;
    d.storage.assign(N + 1, 0.0);
    for (int a = b; a <= N; ++a) d.storage[a] = f.at(a, b);
    d.v = d.storage.data();
    if (!f.lines().empty()) add_breaks(f, GridLine::horizontal(b, N), b, d);
    return d;
}

/// Value of a line function inside cell [c, c+1] at position q (node units) from the given side.
inline double cell_eval(const LineData& d, int c, double q, int side) {
    const double eps = 1e-9;
    // Knots of the cell: left node, interior breaks, right node.
    double lp = c, lv = d.v[c];
    double rp = c + 1, rv = d.v[c + 1];
    for (const auto& b : d.breaks) {
        if (std::abs(b.pos - c) <= eps) lv = b.right;
        if (std::abs(b.pos - (c + 1)) <= eps) rv = b.left;
    }
    for (const auto& b : d.breaks) {
        if (b.pos <= c + eps || b.pos >= c + 1 - eps) continue;
        if (std::abs(q - b.pos) <= eps) return side < 0 ? b.left : b.right;
        if (b.pos < q) {
            lp = b.pos;
            lv = b.right;
        } else if (b.pos < rp) {
            rp = b.pos;
            rv = b.left;
        }
    }
    if (std::abs(q - lp) <= eps) return lv;
    if (std::abs(q - rp) <= eps) return rv;
    return lv + (q - lp) / (rp - lp) * (rv - lv);
}

/**
 * integral_{lo}^{hi} A(s) B(s) ds in node units times h: trapezoid over nodes, with every cell
 * that contains a jump of either factor replaced by the split trapezoid.
 */
inline double line_product(const LineData& A, const LineData& B, int lo, int hi, double h) {
    if (hi <= lo) return 0.0;
    double acc = 0.5 * (A.v[lo] * B.v[lo] + A.v[hi] * B.v[hi]);
    for (int c = lo + 1; c < hi; ++c) acc += A.v[c] * B.v[c];
    if (A.breaks.empty() && B.breaks.empty()) return acc * h;

    int cells[16];
    int nc = 0;
    auto add_cell = [&](int c) {
        if (c < lo || c >= hi || nc >= 16) return;
        for (int k = 0; k < nc; ++k)
            if (cells[k] == c) return;
        cells[nc++] = c;
    };
    for (const auto* L : {&A, &B}) {
        for (const auto& b : L->breaks) {
            if (b.pos < lo - 1e-9 || b.pos > hi + 1e-9) continue;
            const double r = std::round(b.pos);
            if (std::abs(b.pos - r) <= 1e-9) {
                add_cell(static_cast<int>(r) - 1);
                add_cell(static_cast<int>(r));
            } else {
                add_cell(static_cast<int>(std::floor(b.pos)));
            }
        }
    }
    for (int k = 0; k < nc; ++k) {
        const int c = cells[k];
        acc -= 0.5 * (A.v[c] * B.v[c] + A.v[c + 1] * B.v[c + 1]);
        double pts[18];
        int np = 0;
        pts[np++] = c;
        for (const auto* L : {&A, &B})
            for (const auto& b : L->breaks)
                if (b.pos > c + 1e-9 && b.pos < c + 1 - 1e-9 && np < 17) pts[np++] = b.pos;
        pts[np++] = c + 1;
        std::sort(pts + 1, pts + np - 1);
        for (int q = 0; q + 1 < np; ++q) {
            const double p0 = pts[q], p1 = pts[q + 1];
            if (p1 - p0 <= 1e-12) continue;
            const double f0 = cell_eval(A, c, p0, +1) * cell_eval(B, c, p0, +1);
            const double f1 = cell_eval(A, c, p1, -1) * cell_eval(B, c, p1, -1);
            acc += 0.5 * (p1 - p0) * (f0 + f1);
        }
    }
    return acc * h;
}

inline double block_sup_diff(const FieldBlock& a, const FieldBlock& b) {
    double r = 0.0;
    for (std::size_t k = 0; k < a.f.size(); ++k) {
        auto va = a.f[k].values();
        auto vb = b.f[k].values();
        for (std::size_t q = 0; q < va.size(); ++q) r = std::max(r, std::abs(va[q] - vb[q]));
    }
    return r;
}

}  // namespace detail

/**
 * out(i,j)(x,xi) = sum_p integral_xi^x A(i,p)(x,s) B(p,j)(s,xi) ds at every node of T.
 * `out` must already hold fields of the right shape; their values are overwritten.
 */
inline void compose_into(const FieldBlock& A, const FieldBlock& B, FieldBlock& out) {
    if (A.cols != B.rows || out.rows != A.rows || out.cols != B.cols)
        throw DimensionError("kernel composition shapes do not match");
    if (A.f.empty() || B.f.empty()) {
        for (auto& f : out.f) std::fill(f.values().begin(), f.values().end(), 0.0);
        return;
    }
    const TriangularGrid g = A.f.front().grid();
    const int N = g.N;
    const double h = g.step();

    // Horizontal data of B for every line b, vertical data of A for every line a.
    std::vector<std::vector<detail::LineData>> Bh(B.f.size());
    std::vector<bool> B_zero(B.f.size()), A_zero(A.f.size());
    for (std::size_t k = 0; k < B.f.size(); ++k) {
        B_zero[k] = B.f[k].is_zero();
        if (B_zero[k]) continue;
        Bh[k].reserve(N + 1);
        for (int b = 0; b <= N; ++b) Bh[k].push_back(detail::horizontal_data(B.f[k], b));
    }
    for (std::size_t k = 0; k < A.f.size(); ++k) A_zero[k] = A.f[k].is_zero();

    for (int i = 0; i < out.rows; ++i) {
        for (int j = 0; j < out.cols; ++j) {
            KernelField& o = out(i, j);
            std::fill(o.values().begin(), o.values().end(), 0.0);
            for (int p = 0; p < A.cols; ++p) {
                const std::size_t ka = static_cast<std::size_t>(i) * A.cols + p;
                const std::size_t kb = static_cast<std::size_t>(p) * B.cols + j;
                if (A_zero[ka] || B_zero[kb]) continue;
                for (int a = 0; a <= N; ++a) {
                    const detail::LineData Av = detail::vertical_data(A.f[ka], a);
                    for (int b = 0; b <= a; ++b) o.at(a, b) += detail::line_product(Av, Bh[kb][b], b, a, h);
                }
            }
        }
    }
}

/**
 * Successive substitution for U = F + U o B (right form, `unknown_left` = true) or
 * U = F + B o U (left form). Each iterate is kept on F's line sets.
 */
[[nodiscard]] inline std::pair<FieldBlock, VolterraReport> volterra_neumann(const FieldBlock& F, const FieldBlock& B,
                                                                           bool unknown_left, double tol = 1e-10,
                                                                           int max_iter = 500) {
    VolterraReport rep;
    FieldBlock U = F;
    FieldBlock prod = F;
    for (int q = 1; q <= max_iter; ++q) {
        if (unknown_left)
            compose_into(U, B, prod);
        else
            compose_into(B, U, prod);
        FieldBlock next = F;
        for (std::size_t k = 0; k < next.f.size(); ++k) {
            auto dst = next.f[k].values();
            auto add = prod.f[k].values();
            for (std::size_t z = 0; z < dst.size(); ++z) dst[z] += add[z];
        }
        const double inc = detail::block_sup_diff(next, U);
        U = std::move(next);
        rep.increments.push_back(inc);
        rep.iterations = q;
        if (!std::isfinite(inc)) break;
        if (inc < tol) {
            rep.converged = true;
            break;
        }
    }
    return {std::move(U), rep};
}

}  // namespace backstep
