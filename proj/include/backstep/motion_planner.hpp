#pragma once

#include <string>
#include <utility>
#include <vector>

#include "controller.hpp"
#include "errors.hpp"
#include "functions.hpp"
#include "simulator.hpp"

namespace backstep {

/// Output reference Phi(t) with one component per v-state.
struct ReferenceTrajectory {
    std::vector<ScalarFunction> components;
    std::string description;

    [[nodiscard]] int size() const { return static_cast<int>(components.size()); }
    [[nodiscard]] double operator()(int i, double t) const { return components[static_cast<std::size_t>(i)](t); }

    [[nodiscard]] Vector at(double t) const {
        Vector out(size());
        for (int i = 0; i < size(); ++i) out(i) = (*this)(i, t);
        return out;
    }

    /// Largest |Phi_i| over [lo, hi]; the scale that tracking errors are measured against.
    [[nodiscard]] double amplitude(int i, double lo, double hi) const {
        return components[static_cast<std::size_t>(i)].sup_abs(lo, hi);
    }
};

/**
 * Boundary pre-compensation
 *   B_i(t) = Phi_i(t + 1/mu_i) - (1/mu_i) sum_{j<i} int_0^1 g_ij(xi) Phi_j(t + (1 - xi)/mu_i) dxi
 * with g_ij(xi) = mu_j L_ij(xi, 0). Reads Phi only on [t, t + 1/mu_m].
 */
class BoundaryPlan {
public:
    BoundaryPlan(const ControllerKernels& ck, ReferenceTrajectory phi) : mu_(ck.sys().mu), G_(ck.G), phi_(std::move(phi)) {
        const auto& sys = ck.sys();
        if (sys.n != 0) throw UnsupportedError("motion planning is implemented for systems without u-states (n = 0)");
        if (phi_.size() != sys.m)
            throw DimensionError("reference has " + std::to_string(phi_.size()) + " components, expected " +
                                 std::to_string(sys.m));
    }

    [[nodiscard]] double component(int i, double t) const {
        const int m = static_cast<int>(mu_.size());
        const double mu = mu_(i);
        double acc = 0.0;
        for (int j = 0; j < i; ++j) {
            const auto& g = G_[static_cast<std::size_t>(i) * m + j];
            if (g.knots().empty()) continue;
            acc += trace_integral(g, 0.0, 1.0, [&](double xi) { return phi_(j, t + (1.0 - xi) / mu); });
        }
        return phi_(i, t + 1.0 / mu) - acc / mu;
    }

    [[nodiscard]] Vector operator()(double t) const {
        Vector out(mu_.size());
        for (int i = 0; i < out.size(); ++i) out(i) = component(i, t);
        return out;
    }

    [[nodiscard]] const ReferenceTrajectory& reference() const { return phi_; }

private:
    Vector mu_;
    std::vector<PiecewiseTrace> G_;
    ReferenceTrajectory phi_;
};

[[nodiscard]] inline BoundaryPlan plan_boundary_inputs(const ControllerKernels& ck, const HyperbolicSystem& sys,
                                                       const ReferenceTrajectory& phi) {
    if (sys.n != 0) throw UnsupportedError("motion planning is implemented for systems without u-states (n = 0)");
    return BoundaryPlan(ck, phi);
}

/// U(t) = B(t) + int_0^1 L(1, xi) v(xi) dxi for the profiles v (m rows on a simulation grid).
[[nodiscard]] inline Vector tracking_control(const StateFeedback& feedback, const BoundaryPlan& plan, const Matrix& v,
                                             double t) {
    return plan(t) + feedback.control(v);
}

/**
 * Closed loop under the tracking law. Columns track_err (Euclidean over components) and
 * track_err_i hold |v_i(t, 0) - Phi_i(t)|.
 */
[[nodiscard]] inline TimeSeries run_tracking(const HyperbolicSystem& sys, const ControllerKernels& ck,
                                             const ReferenceTrajectory& phi, const FieldState& initial, double t_end,
                                             const SimOptions& opts = {}) {
    require_valid(sys);
    const BoundaryPlan plan = plan_boundary_inputs(ck, sys, phi);
    const Grid1D g(opts.Nx);
    const int m = sys.m;
    if (initial.v.rows() != m || initial.v.cols() != g.nodes()) throw DimensionError("initial state does not match");
    const StateFeedback fb(ck, g);
    const auto [dt, steps] = choose_time_step(sys.max_speed(), g, opts.cfl, t_end);
    TransportStepper st(plant_velocity(sys), g, opts.scheme, dt, opts.cfl);
    auto source = [&](double, const Matrix& X, Matrix& S) { S.noalias() += sys.sigma_mm * X; };
    auto closure = [&](double t, Matrix& X) {
        const Vector B = plan(t);
        fb.close(X, &B);
    };

    std::vector<std::string> cols{"norm_L2_u", "norm_L2_v", "norm_Linf", "track_err"};
    for (int i = 0; i < m; ++i) cols.push_back("track_err_" + std::to_string(i + 1));
    TimeSeries ts(cols);
    auto record = [&](double t, const Matrix& X) {
        const Vector e = X.col(0) - phi.at(t);
        std::vector<double> v{0.0, l2_norm(X, g.dx()), linf_norm(X), e.norm()};
        for (int i = 0; i < m; ++i) v.push_back(std::abs(e(i)));
        ts.add(t, v);
    };
    Matrix W = initial.v;
    record(0.0, W);
    for (long s = 1; s <= steps; ++s) {
        st.step((s - 1) * dt, W, source, closure);
        if (s % opts.sample_stride == 0 || s == steps) record(s * dt, W);
        if (detail::snapshot_due(opts, s * dt, dt)) ts.add_snapshot({s * dt, Matrix(0, W.cols()), W});
    }
    return ts;
}

}  // namespace backstep
