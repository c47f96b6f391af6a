#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "errors.hpp"

namespace backstep {

/// Uniform discretization of T = {0 <= xi <= x <= 1}: nodes (a/N, b/N) with b <= a.
struct TriangularGrid {
    int N = 0;

    explicit TriangularGrid(int subdivisions = 2) : N(subdivisions) {
        if (N < 2) throw ParameterError("triangular grid needs N >= 2");
    }

    [[nodiscard]] double step() const { return 1.0 / N; }
    [[nodiscard]] double coord(int a) const { return static_cast<double>(a) / N; }
    [[nodiscard]] std::size_t node_count() const { return static_cast<std::size_t>(N + 1) * (N + 2) / 2; }
    /// Row-major (a, b <= a) node index.
    [[nodiscard]] std::size_t index(int a, int b) const { return static_cast<std::size_t>(a) * (a + 1) / 2 + b; }

    bool operator==(const TriangularGrid&) const = default;
};

inline constexpr double kOnLineTolerance = 1e-12;

/**
 * A straight line across which a kernel may jump. Points are classified by the
 * sign of their offset along the upward normal; points on the line belong to
 * `online_side` (the side whose boundary datum the tie-break selects).
 */
struct DiscontinuityLine {
    double x0 = 0.0, xi0 = 0.0;  ///< a point on the line
    double dx = 1.0, dxi = 0.0;  ///< unit direction, dx >= 0
    int online_side = -1;

    static DiscontinuityLine through(double x0, double xi0, double dir_x, double dir_xi, int online_side = -1) {
        double nrm = std::hypot(dir_x, dir_xi);
        if (nrm == 0.0) throw ParameterError("discontinuity line needs a nonzero direction");
        if (dir_x < 0.0 || (dir_x == 0.0 && dir_xi < 0.0)) {
            dir_x = -dir_x;
            dir_xi = -dir_xi;
        }
        return {x0, xi0, dir_x / nrm, dir_xi / nrm, online_side};
    }

    /// Signed distance, positive on the side with larger xi.
    [[nodiscard]] double offset(double x, double xi) const { return -dxi * (x - x0) + dx * (xi - xi0); }

    [[nodiscard]] int side(double x, double xi) const {
        double c = offset(x, xi);
        if (c > kOnLineTolerance) return 1;
        if (c < -kOnLineTolerance) return -1;
        return online_side;
    }

    /// Image under (x, xi) -> (1 - xi, 1 - x).
    [[nodiscard]] DiscontinuityLine reflected() const {
        DiscontinuityLine r = through(1.0 - xi0, 1.0 - x0, -dxi, -dx);
        // A point on the online side, mapped, decides which side the tie-break lands on.
        double px = x0 - 1e-6 * dxi * online_side;
        double pxi = xi0 + 1e-6 * dx * online_side;
        r.online_side = r.offset(1.0 - pxi, 1.0 - px) > 0.0 ? 1 : -1;
        return r;
    }

    bool operator==(const DiscontinuityLine&) const = default;
};

/// Nodes (a0 + da k, b0 + db k), k = 0..count, along one straight grid line inside T.
struct GridLine {
    int a0 = 0, b0 = 0;
    int da = 0, db = 1;
    int count = 0;

    static GridLine vertical(int a) { return {a, 0, 0, 1, a}; }
    static GridLine horizontal(int b, int N) { return {b, b, 1, 0, N - b}; }
    static GridLine diagonal(int N) { return {0, 0, 1, 1, N}; }
};

/// Sides of a reference point with respect to each line of a field.
using SideVector = std::vector<std::int8_t>;

/**
 * Scalar field on the triangular grid. Off-node values come from bilinear
 * interpolation, linear on the half cells cut by the hypotenuse. Stencils never
 * straddle a flagged discontinuity line: when the natural cell mixes sides, the
 * nearest single-sided cell is extrapolated instead.
 */
class KernelField {
public:
    KernelField() : grid_(2) {}
    explicit KernelField(TriangularGrid grid) : grid_(grid), values_(grid.node_count(), 0.0) {}
    KernelField(TriangularGrid grid, std::vector<DiscontinuityLine> lines) : KernelField(grid) {
        set_lines(std::move(lines));
    }

    [[nodiscard]] const TriangularGrid& grid() const { return grid_; }
    [[nodiscard]] std::span<const double> values() const { return values_; }
    [[nodiscard]] std::span<double> values() { return values_; }
    [[nodiscard]] const std::vector<DiscontinuityLine>& lines() const { return lines_; }

    void set_lines(std::vector<DiscontinuityLine> lines) {
        if (lines.size() > 31) throw ParameterError("too many discontinuity lines on one field");
        lines_ = std::move(lines);
        node_code_.assign(grid_.node_count(), 0u);
        cell_code_.assign(grid_.node_count(), 0u);
        if (lines_.empty()) return;
        for (int a = 0; a <= grid_.N; ++a) {
            for (int b = 0; b <= a; ++b) node_code_[grid_.index(a, b)] = mask_of(grid_.coord(a), grid_.coord(b));
        }
        for (int a = 0; a < grid_.N; ++a) {
            for (int b = 0; b <= a; ++b) {
                const std::uint32_t c = code(a, b);
                bool same = code(a + 1, b) == c && code(a + 1, b + 1) == c;
                if (b < a) same = same && code(a, b + 1) == c;
                cell_code_[grid_.index(a, b)] = same ? c : kMixed;
            }
        }
    }

    /// Bit l is set when the point lies on the upper side of line l.
    [[nodiscard]] std::uint32_t mask_of(double x, double xi) const {
        std::uint32_t m = 0;
        for (std::size_t l = 0; l < lines_.size(); ++l)
            if (lines_[l].side(x, xi) > 0) m |= 1u << l;
        return m;
    }

    [[nodiscard]] static std::uint32_t mask_from(std::span<const std::int8_t> sides) {
        std::uint32_t m = 0;
        for (std::size_t l = 0; l < sides.size(); ++l)
            if (sides[l] > 0) m |= 1u << l;
        return m;
    }

    [[nodiscard]] double at(int a, int b) const { return values_[grid_.index(a, b)]; }
    double& at(int a, int b) { return values_[grid_.index(a, b)]; }

    [[nodiscard]] SideVector sides_of(double x, double xi) const {
        SideVector s(lines_.size());
        for (std::size_t l = 0; l < lines_.size(); ++l) s[l] = static_cast<std::int8_t>(lines_[l].side(x, xi));
        return s;
    }

    /// Value at (x, xi), on the side of each line the point itself lies on.
    [[nodiscard]] double operator()(double x, double xi) const { return evaluate_masked(x, xi, mask_of(x, xi)); }

    /// Value at (x, xi) using only nodes on the prescribed side of every line.
    [[nodiscard]] double evaluate_sided(double x, double xi, std::span<const std::int8_t> sides) const {
        return evaluate_masked(x, xi, mask_from(sides));
    }

    /// Same as evaluate_sided with the sides packed as a bit mask (see mask_of).
    [[nodiscard]] double evaluate_masked(double x, double xi, std::uint32_t mask) const {
        const int N = grid_.N;
        x = std::clamp(x, 0.0, 1.0);
        xi = std::clamp(xi, 0.0, x);
        const double X = x * N;
        const double Y = xi * N;
        const int a = std::min(static_cast<int>(X), N - 1);
        const int b = std::min(static_cast<int>(Y), a);
        if (lines_.empty() || cell_code_[grid_.index(a, b)] == mask) return cell_value(a, b, X, Y);
        return fallback(a, b, X, Y, mask);
    }

    /**
     * Value at fractional position `k` along a grid line, by Lagrange interpolation through up to
     * four consecutive nodes that all lie on the prescribed sides. Returns NaN when no node qualifies.
     */
    [[nodiscard]] double line_value(const GridLine& gl, double k, std::uint32_t mask) const {
        int lo = 0, hi = gl.count;
        if (!lines_.empty()) {
            auto bit = [&](int kk, std::size_t l) { return (code(gl.a0 + gl.da * kk, gl.b0 + gl.db * kk) >> l) & 1u; };
            const double N = grid_.N;
            for (std::size_t l = 0; l < lines_.size() && lo <= hi; ++l) {
                const auto& ln = lines_[l];
                const std::uint32_t want = (mask >> l) & 1u;
                const double c0 = ln.offset(gl.a0 / N, gl.b0 / N);
                const double c1 = -ln.dxi * gl.da / N + ln.dx * gl.db / N;
                if (std::abs(c1) < 1e-15) {
                    if (bit(lo, l) != want) return std::numeric_limits<double>::quiet_NaN();
                    continue;
                }
                const double kc = std::clamp(-c0 / c1, -2.0, gl.count + 2.0);
                // Upper side lies at k > kc when c1 > 0.
                const bool raise_lo = (c1 > 0.0) == (want == 1u);
                if (raise_lo) {
                    int kk = std::max(lo, static_cast<int>(std::floor(kc)) - 1);
                    while (kk <= hi && bit(kk, l) != want) ++kk;
                    lo = kk;
                } else {
                    int kk = std::min(hi, static_cast<int>(std::ceil(kc)) + 1);
                    while (kk >= lo && bit(kk, l) != want) --kk;
                    hi = kk;
                }
            }
            if (lo > hi) return std::numeric_limits<double>::quiet_NaN();
        }
        auto node = [&](int kk) { return at(gl.a0 + gl.da * kk, gl.b0 + gl.db * kk); };
        const int avail = hi - lo + 1;
        if (avail == 1) return node(lo);
        if (avail == 2) {
            const double t = k - lo;
            return node(lo) + t * (node(lo + 1) - node(lo));
        }
        if (avail == 3) {
            const double t = k - lo;
            return node(lo) * (t - 1) * (t - 2) / 2 - node(lo + 1) * t * (t - 2) + node(lo + 2) * t * (t - 1) / 2;
        }
        const int start = std::clamp(static_cast<int>(std::floor(k)) - 1, lo, hi - 3);
        const double t = k - start;
        const double l0 = -(t - 1) * (t - 2) * (t - 3) / 6.0;
        const double l1 = t * (t - 2) * (t - 3) / 2.0;
        const double l2 = -t * (t - 1) * (t - 3) / 2.0;
        const double l3 = t * (t - 1) * (t - 2) / 6.0;
        return l0 * node(start) + l1 * node(start + 1) + l2 * node(start + 2) + l3 * node(start + 3);
    }

    /**
     * One-sided value preferring cubic interpolation along a grid line (vertical, horizontal or the
     * hypotenuse) when the point lies on one, and the cell interpolant otherwise.
     */
    [[nodiscard]] double evaluate_point(double x, double xi, std::uint32_t mask) const {
        const int N = grid_.N;
        x = std::clamp(x, 0.0, 1.0);
        xi = std::clamp(xi, 0.0, x);
        const double X = x * N, Y = xi * N;
        const double ra = std::round(X), rb = std::round(Y);
        double v = std::numeric_limits<double>::quiet_NaN();
        if (std::abs(X - ra) < 1e-9) {
            v = line_value(GridLine::vertical(static_cast<int>(ra)), Y, mask);
        } else if (std::abs(Y - rb) < 1e-9) {
            v = line_value(GridLine::horizontal(static_cast<int>(rb), N), X - rb, mask);
        } else if (std::abs(X - Y) < 1e-9) {
            v = line_value(GridLine::diagonal(N), X, mask);
        }
        return std::isnan(v) ? evaluate_masked(x, xi, mask) : v;
    }

    [[nodiscard]] double max_abs() const {
        double r = 0.0;
        for (double v : values_) r = std::max(r, std::abs(v));
        return r;
    }

    [[nodiscard]] bool is_zero() const {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
    }

private:
    static constexpr std::uint32_t kMixed = 0xFFFFFFFFu;

    [[nodiscard]] std::uint32_t code(int a, int b) const { return node_code_[grid_.index(a, b)]; }

    /// Polynomial of cell (a, b) evaluated at scaled coordinates (X, Y); extrapolates outside the cell.
    [[nodiscard]] double cell_value(int a, int b, double X, double Y) const {
        const double fx = X - a;
        const double fy = Y - b;
        if (b == a) {
            const double f00 = at(a, a), f10 = at(a + 1, a), f11 = at(a + 1, a + 1);
            return f00 + fx * (f10 - f00) + fy * (f11 - f10);
        }
        const double f00 = at(a, b), f10 = at(a + 1, b), f01 = at(a, b + 1), f11 = at(a + 1, b + 1);
        return f00 * (1 - fx) * (1 - fy) + f10 * fx * (1 - fy) + f01 * (1 - fx) * fy + f11 * fx * fy;
    }

    [[nodiscard]] double fallback(int a, int b, double X, double Y, std::uint32_t mask) const {
        const int N = grid_.N;
        for (int radius = 1; radius <= 4; ++radius) {
            double best = std::numeric_limits<double>::infinity();
            int ba = -1, bb = -1;
            for (int ca = std::max(0, a - radius); ca <= std::min(N - 1, a + radius); ++ca) {
                for (int cb = std::max(0, b - radius); cb <= std::min(ca, b + radius); ++cb) {
                    if (cell_code_[grid_.index(ca, cb)] != mask) continue;
                    const double cx = ca + (cb == ca ? 2.0 / 3.0 : 0.5);
                    const double cy = cb + (cb == ca ? 1.0 / 3.0 : 0.5);
                    const double d = (cx - X) * (cx - X) + (cy - Y) * (cy - Y);
                    if (d < best) {
                        best = d;
                        ba = ca;
                        bb = cb;
                    }
                }
            }
            if (ba >= 0) return cell_value(ba, bb, X, Y);
        }
        // Nothing single-sided nearby: nearest admissible node, else the plain cell.
        double best = std::numeric_limits<double>::infinity();
        double val = cell_value(a, b, X, Y);
        for (int na = std::max(0, a - 4); na <= std::min(N, a + 5); ++na) {
            for (int nb = std::max(0, b - 4); nb <= std::min(na, b + 5); ++nb) {
                if (code(na, nb) != mask) continue;
                const double d = (na - X) * (na - X) + (nb - Y) * (nb - Y);
                if (d < best) {
                    best = d;
                    val = at(na, nb);
                }
            }
        }
        return val;
    }

    TriangularGrid grid_;
    std::vector<double> values_;
    std::vector<DiscontinuityLine> lines_;
    std::vector<std::uint32_t> node_code_;
    std::vector<std::uint32_t> cell_code_;
};

/// A knot of a piecewise-linear function: value approached from the left and from the right.
struct TraceKnot {
    double pos = 0.0;
    double left = 0.0;
    double right = 0.0;
};

/**
 * Piecewise-linear function on an interval, continuous except at flagged knots.
 * Used for kernel traces along grid lines and edges of T.
 */
class PiecewiseTrace {
public:
    PiecewiseTrace() = default;
    explicit PiecewiseTrace(std::vector<TraceKnot> knots) : knots_(std::move(knots)) {}

    [[nodiscard]] const std::vector<TraceKnot>& knots() const { return knots_; }
    [[nodiscard]] double lo() const { return knots_.front().pos; }
    [[nodiscard]] double hi() const { return knots_.back().pos; }

    /// Value at s; at a jump knot `side` < 0 selects the left limit, otherwise the right.
    [[nodiscard]] double operator()(double s, int side = -1) const {
        if (knots_.empty()) return 0.0;
        if (s <= knots_.front().pos) return knots_.front().right;
        if (s >= knots_.back().pos) return knots_.back().left;
        auto it = std::lower_bound(knots_.begin(), knots_.end(), s,
                                   [](const TraceKnot& k, double v) { return k.pos < v; });
        if (std::abs(it->pos - s) <= kOnLineTolerance) return side < 0 ? it->left : it->right;
        if (std::abs((it - 1)->pos - s) <= kOnLineTolerance) return side < 0 ? (it - 1)->left : (it - 1)->right;
        const TraceKnot& r = *it;
        const TraceKnot& l = *(it - 1);
        const double t = (s - l.pos) / (r.pos - l.pos);
        return l.right + t * (r.left - l.right);
    }

    [[nodiscard]] bool has_jumps() const {
        return std::any_of(knots_.begin(), knots_.end(), [](const TraceKnot& k) { return k.left != k.right; });
    }

    /// Positions where the left and right limits differ.
    [[nodiscard]] std::vector<double> jump_positions() const {
        std::vector<double> out;
        for (const auto& k : knots_)
            if (k.left != k.right) out.push_back(k.pos);
        return out;
    }

private:
    std::vector<TraceKnot> knots_;
};

namespace detail {

/// Side of `line` on which points just before (dir = -1) or after (+1) `p + t*d` lie, moving along d.
inline int side_along(const DiscontinuityLine& line, double px, double pxi, double dx, double dxi, int dir) {
    const double eta = 1e-7;
    return line.offset(px + dir * eta * dx, pxi + dir * eta * dxi) > 0.0 ? 1 : -1;
}

}  // namespace detail

/**
 * Trace of `f` along the segment from (x0, xi0) to (x1, xi1), sampled at `samples + 1`
 * equispaced points and split at every crossing of a flagged line, with one-sided limits.
 * The trace parameter is the coordinate that varies (x for horizontal segments, xi otherwise).
 */
[[nodiscard]] inline PiecewiseTrace segment_trace(const KernelField& f, double x0, double xi0, double x1, double xi1,
                                                 int samples) {
    const bool along_x = std::abs(x1 - x0) >= std::abs(xi1 - xi0);
    auto param = [&](double x, double xi) { return along_x ? x : xi; };
    const double ddx = x1 - x0, ddxi = xi1 - xi0;

    struct Crossing {
        double t;
        std::size_t line;
    };
    std::vector<Crossing> crossings;
    for (std::size_t l = 0; l < f.lines().size(); ++l) {
        const auto& ln = f.lines()[l];
        const double c0 = ln.offset(x0, xi0), c1 = ln.offset(x1, xi1);
        const double denom = c0 - c1;
        if (std::abs(denom) < 1e-15) continue;  // parallel
        const double t = c0 / denom;
        if (t < -1e-12 || t > 1.0 + 1e-12) continue;
        crossings.push_back({std::clamp(t, 0.0, 1.0), l});
    }

    std::vector<TraceKnot> knots;
    knots.reserve(samples + 1 + crossings.size());
    auto limit = [&](double t, int dir) {
        const double px = x0 + t * ddx, pxi = xi0 + t * ddxi;
        std::uint32_t mask = f.mask_of(px, pxi);
        for (std::size_t l = 0; l < f.lines().size(); ++l) {
            if (std::abs(f.lines()[l].offset(px, pxi)) <= 1e-9) {
                mask &= ~(1u << l);
                if (detail::side_along(f.lines()[l], px, pxi, ddx, ddxi, dir) > 0) mask |= 1u << l;
            }
        }
        return f.evaluate_point(px, pxi, mask);
    };

    std::vector<double> ts;
    for (int k = 0; k <= samples; ++k) ts.push_back(static_cast<double>(k) / samples);
    for (const auto& c : crossings) ts.push_back(c.t);
    std::sort(ts.begin(), ts.end());
    std::vector<double> uniq;
    for (double t : ts) {
        if (uniq.empty() || t - uniq.back() > 1e-12) uniq.push_back(t);
        else if (std::any_of(crossings.begin(), crossings.end(), [&](const Crossing& c) { return c.t == t; }))
            uniq.back() = t;
    }

    for (double t : uniq) {
        const double px = x0 + t * ddx, pxi = xi0 + t * ddxi;
        bool on_line = false;
        for (const auto& ln : f.lines()) on_line = on_line || std::abs(ln.offset(px, pxi)) <= 1e-9;
        TraceKnot k;
        k.pos = param(px, pxi);
        if (on_line) {
            k.left = t > 0.0 ? limit(t, -1) : limit(t, 1);
            k.right = t < 1.0 ? limit(t, 1) : k.left;
            if (t == 0.0) k.left = k.right;
        } else {
            k.left = k.right = f.evaluate_point(px, pxi, f.mask_of(px, pxi));
        }
        knots.push_back(k);
    }
    if (along_x ? (x1 < x0) : (xi1 < xi0)) {
        std::reverse(knots.begin(), knots.end());
        for (auto& k : knots) std::swap(k.left, k.right);
    }
    return PiecewiseTrace(std::move(knots));
}

/// Trace x -> f(x, 0) along the bottom edge, on the field's own grid.
[[nodiscard]] inline PiecewiseTrace bottom_trace(const KernelField& f) {
    return segment_trace(f, 0.0, 0.0, 1.0, 0.0, f.grid().N);
}

/// Trace xi -> f(1, xi) along the right edge, on the field's own grid.
[[nodiscard]] inline PiecewiseTrace right_trace(const KernelField& f) {
    return segment_trace(f, 1.0, 0.0, 1.0, 1.0, f.grid().N);
}

/// Linear combination of traces on the union of their knots, keeping every one-sided limit.
[[nodiscard]] inline PiecewiseTrace combine_traces(const std::vector<std::pair<double, const PiecewiseTrace*>>& terms) {
    std::vector<double> pos;
    for (const auto& [c, tr] : terms)
        for (const auto& k : tr->knots()) pos.push_back(k.pos);
    std::sort(pos.begin(), pos.end());
    std::vector<TraceKnot> knots;
    for (double p : pos)
        if (knots.empty() || p - knots.back().pos > kOnLineTolerance) knots.push_back({p, 0.0, 0.0});
    for (const auto& [c, tr] : terms) {
        if (c == 0.0) continue;
        for (auto& k : knots) {
            k.left += c * (*tr)(k.pos, -1);
            k.right += c * (*tr)(k.pos, +1);
        }
    }
    return PiecewiseTrace(std::move(knots));
}

/**
 * Weights c_k such that  integral_{lo}^{hi} f(s) w(s) ds ~= sum_k c_k w_k  for any w known at
 * `count + 1` equispaced nodes on [lo, hi] and linear in between. Sub-intervals are split at the
 * jump knots of f, so piecewise-smooth kernels keep second-order accuracy.
 */
[[nodiscard]] inline std::vector<double> product_weights(const PiecewiseTrace& f, double lo, double hi, int count) {
    std::vector<double> c(count + 1, 0.0);
    if (hi <= lo || count <= 0) return c;
    const double h = (hi - lo) / count;
    auto jumps = f.jump_positions();
    for (int k = 0; k < count; ++k) {
        const double p0 = lo + k * h, p1 = lo + (k + 1) * h;
        std::vector<double> pts{p0};
        for (double j : jumps)
            if (j > p0 + 1e-13 && j < p1 - 1e-13) pts.push_back(j);
        pts.push_back(p1);
        for (std::size_t s = 0; s + 1 < pts.size(); ++s) {
            const double p = pts[s], q = pts[s + 1];
            const double fp = f(p, +1), fq = f(q, -1);
            // w(p), w(q) are linear in w_k, w_{k+1}
            const double tp = (p - p0) / h, tq = (q - p0) / h;
            const double half = 0.5 * (q - p);
            c[k] += half * (fp * (1 - tp) + fq * (1 - tq));
            c[k + 1] += half * (fp * tp + fq * tq);
        }
    }
    return c;
}

}  // namespace backstep
