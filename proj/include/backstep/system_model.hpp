#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace backstep {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Speeds closer than this are treated as equal (isotachic).
inline constexpr double kIsotachicTolerance = 1e-12;

/**
 * Constant-coefficient coupled linear hyperbolic system on x in [0, 1]
 *
 *   u_t + diag(lambda) u_x = sigma_pp u + sigma_pm v
 *   v_t - diag(mu)     v_x = sigma_mp u + sigma_mm v
 *   u(t,0) = q0 v(t,0),   v(t,1) = r1 u(t,1) + U(t)
 *
 * with n rightward states u and m leftward (actuated) states v.
 */
struct HyperbolicSystem {
    int n = 0;
    int m = 0;
    Vector lambda;    ///< n rightward speeds, non-decreasing
    Vector mu;        ///< m leftward speeds, strictly decreasing
    Matrix sigma_pp;  ///< n x n
    Matrix sigma_pm;  ///< n x m
    Matrix sigma_mp;  ///< m x n
    Matrix sigma_mm;  ///< m x m, zero diagonal
    Matrix q0;        ///< n x m
    Matrix r1;        ///< m x n

    /// All-zero system of the given size with unit speeds left for the caller to fill.
    static HyperbolicSystem zeros(int n, int m) {
        HyperbolicSystem s;
        s.n = n;
        s.m = m;
        s.lambda = Vector::Ones(n);
        s.mu = Vector::Ones(m);
        s.sigma_pp = Matrix::Zero(n, n);
        s.sigma_pm = Matrix::Zero(n, m);
        s.sigma_mp = Matrix::Zero(m, n);
        s.sigma_mm = Matrix::Zero(m, m);
        s.q0 = Matrix::Zero(n, m);
        s.r1 = Matrix::Zero(m, n);
        return s;
    }

    [[nodiscard]] double max_speed() const {
        double s = 0.0;
        if (n > 0) s = std::max(s, lambda.maxCoeff());
        if (m > 0) s = std::max(s, mu.maxCoeff());
        return s;
    }

    /// Hypotenuse value of K_ij.
    [[nodiscard]] double k_hyp(int i, int j) const { return -sigma_mp(i, j) / (mu(i) + lambda(j)); }

    /// Hypotenuse value of L_ij, i != j (also the default artificial datum for i > j).
    [[nodiscard]] double l_hyp(int i, int j) const { return -sigma_mm(i, j) / (mu(i) - mu(j)); }
};

struct Violation {
    std::string rule;
    std::string message;
};

struct ValidationReport {
    bool ok = true;
    std::vector<Violation> violations;
    /// 0-based index sets of v-states sharing a speed.
    std::vector<std::vector<int>> isotachic_groups;

    [[nodiscard]] bool has(const std::string& rule) const {
        return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.rule == rule; });
    }

    [[nodiscard]] std::string summary() const {
        std::ostringstream os;
        for (const auto& v : violations) os << "[" << v.rule << "] " << v.message << "\n";
        for (const auto& g : isotachic_groups) {
            os << "[isotachic] v-states {";
            for (std::size_t k = 0; k < g.size(); ++k) os << (k ? "," : "") << g[k] + 1;
            os << "} share a transport speed\n";
        }
        return os.str();
    }

    /// Rule id of the first problem, "isotachic" if only equal speeds were found.
    [[nodiscard]] std::string first_rule() const {
        if (!violations.empty()) return violations.front().rule;
        if (!isotachic_groups.empty()) return "isotachic";
        return {};
    }
};

namespace detail {

inline bool shape_is(const Matrix& a, int rows, int cols) { return a.rows() == rows && a.cols() == cols; }

inline bool all_finite(const Matrix& a) { return a.allFinite(); }

}  // namespace detail

[[nodiscard]] inline ValidationReport validate(const HyperbolicSystem& sys) {
    ValidationReport rep;
    auto add = [&](std::string rule, std::string msg) { rep.violations.push_back({std::move(rule), std::move(msg)}); };

    if (sys.n < 0 || sys.m < 0) add("dimensions", "state counts must be non-negative");
    if (sys.m < 1) add("dimensions", "at least one actuated (leftward) state is required");

    const int n = std::max(sys.n, 0);
    const int m = std::max(sys.m, 0);
    bool dims_ok = sys.lambda.size() == n && sys.mu.size() == m && detail::shape_is(sys.sigma_pp, n, n) &&
                   detail::shape_is(sys.sigma_pm, n, m) && detail::shape_is(sys.sigma_mp, m, n) &&
                   detail::shape_is(sys.sigma_mm, m, m) && detail::shape_is(sys.q0, n, m) &&
                   detail::shape_is(sys.r1, m, n);
    if (!dims_ok) {
        add("dimensions", "matrix or speed-vector shapes are inconsistent with (n, m)");
        rep.ok = false;
        return rep;
    }

    for (const Matrix* mat : {&sys.sigma_pp, &sys.sigma_pm, &sys.sigma_mp, &sys.sigma_mm, &sys.q0, &sys.r1}) {
        if (!detail::all_finite(*mat)) {
            add("finite", "coupling or boundary matrices contain non-finite entries");
            break;
        }
    }
    if (!sys.lambda.allFinite() || !sys.mu.allFinite()) add("finite", "speeds contain non-finite entries");

    for (int i = 0; i < n; ++i) {
        if (!(sys.lambda(i) > 0.0)) add("lambda-positive", "lambda_" + std::to_string(i + 1) + " must be > 0");
    }
    for (int i = 0; i + 1 < n; ++i) {
        if (sys.lambda(i) > sys.lambda(i + 1))
            add("lambda-ordering", "lambda must be non-decreasing (lambda_" + std::to_string(i + 1) + " > lambda_" +
                                       std::to_string(i + 2) + ")");
    }
    for (int j = 0; j < m; ++j) {
        if (!(sys.mu(j) > 0.0)) add("mu-positive", "mu_" + std::to_string(j + 1) + " must be > 0");
    }
    for (int j = 0; j + 1 < m; ++j) {
        if (sys.mu(j + 1) > sys.mu(j) + kIsotachicTolerance)
            add("mu-ordering", "mu must be strictly decreasing (mu_" + std::to_string(j + 1) + " < mu_" +
                                   std::to_string(j + 2) + ")");
    }
    for (int j = 0; j < m; ++j) {
        if (sys.sigma_mm(j, j) != 0.0)
            add("sigma-mm-diagonal", "sigma--_" + std::to_string(j + 1) + std::to_string(j + 1) +
                                         " must be zero (no internal diagonal coupling of v is assumed)");
    }

    // Equal-speed groups, any order.
    std::vector<int> group_of(m, -1);
    for (int a = 0; a < m; ++a) {
        if (group_of[a] >= 0) continue;
        std::vector<int> g{a};
        for (int b = a + 1; b < m; ++b) {
            if (group_of[b] < 0 && std::abs(sys.mu(a) - sys.mu(b)) <= kIsotachicTolerance) g.push_back(b);
        }
        if (g.size() > 1) {
            for (int k : g) group_of[k] = static_cast<int>(rep.isotachic_groups.size());
            rep.isotachic_groups.push_back(std::move(g));
        }
    }

    rep.ok = rep.violations.empty() && rep.isotachic_groups.empty();
    return rep;
}

/// Throws ValidationError carrying the first violated rule id.
inline void require_valid(const HyperbolicSystem& sys) {
    auto rep = validate(sys);
    if (!rep.ok) throw ValidationError(rep.first_rule(), rep.summary());
}

struct DecouplingMatrices {
    Matrix B;  ///< B(x)
    Matrix C;  ///< C(x) = B(x)^{-1}
};

/**
 * Change of coordinates for a group of isotachic states with coupling block
 * sigma_iso and common speed mu_i:
 *
 *   B'(x) = (1/mu_i) B(x) sigma_iso,   B(0) = I
 *   C'(x) = -(1/mu_i) sigma_iso C(x),  C(0) = I
 *
 * Both are integrated with classical RK4 on a step small enough that B C = I
 * holds to ~1e-12 for moderate generators.
 */
[[nodiscard]] inline DecouplingMatrices isotachic_decoupling(const Matrix& sigma_iso, double mu_i, double x) {
    if (sigma_iso.rows() != sigma_iso.cols()) throw DimensionError("isotachic coupling block must be square");
    if (!(mu_i > 0.0)) throw ParameterError("isotachic speed must be positive");
    const auto k = sigma_iso.rows();
    const Matrix gen = sigma_iso / mu_i;

    const double rate = gen.cwiseAbs().rowwise().sum().maxCoeff() * std::abs(x);
    const int steps = std::max(16, static_cast<int>(std::ceil(rate / 5e-3)));
    const double h = x / steps;

    Matrix B = Matrix::Identity(k, k);
    Matrix C = Matrix::Identity(k, k);
    auto fb = [&](const Matrix& b) -> Matrix { return b * gen; };
    auto fc = [&](const Matrix& c) -> Matrix { return -gen * c; };
    for (int s = 0; s < steps; ++s) {
        Matrix k1 = fb(B), k2 = fb(B + 0.5 * h * k1), k3 = fb(B + 0.5 * h * k2), k4 = fb(B + h * k3);
        B += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        Matrix c1 = fc(C), c2 = fc(C + 0.5 * h * c1), c3 = fc(C + 0.5 * h * c2), c4 = fc(C + h * c3);
        C += h / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4);
    }
    return {B, C};
}

struct Horizons {
    std::optional<double> t_F;  ///< 1/lambda_1 + sum 1/mu_j; absent when n = 0
    double t_M = 0.0;           ///< sum 1/mu_j
};

[[nodiscard]] inline Horizons horizons(const HyperbolicSystem& sys) {
    require_valid(sys);
    Horizons h;
    for (int j = 0; j < sys.m; ++j) h.t_M += 1.0 / sys.mu(j);
    if (sys.n >= 1) h.t_F = 1.0 / sys.lambda(0) + h.t_M;
    return h;
}

}  // namespace backstep
