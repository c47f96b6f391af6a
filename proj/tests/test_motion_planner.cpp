#include "fixtures.hpp"

using namespace backstep;
using Catch::Matchers::WithinAbs;

namespace {

ReferenceTrajectory sinusoids(int m) {
    ReferenceTrajectory phi;
    for (int i = 0; i < m; ++i) phi.components.push_back({{Primitive::sinusoid(1.0, 1.0, 0.5 * std::numbers::pi * i)}});
    phi.description = "phase-shifted unit sinusoids";
    return phi;
}

}  // namespace

TEST_CASE("one leftward state: the plan is the reference one transit ahead", "[motion_planner]") {
    const auto sys = fixtures::uncoupled(0, 1);
    const auto ck = synthesize_controller(sys, TriangularGrid(10), ArtificialBoundary(1));
    const auto plan = plan_boundary_inputs(ck, sys, sinusoids(1));
    for (double t : {0.0, 0.37, 2.0}) CHECK_THAT(plan.component(0, t), WithinAbs(std::sin(2 * std::numbers::pi * (t + 1.0)), 1e-14));
}

TEST_CASE("without coupling every component is a pure preview", "[motion_planner]") {
    const auto sys = fixtures::uncoupled(0, 3);
    const auto ck = synthesize_controller(sys, TriangularGrid(10), ArtificialBoundary(3));
    const auto phi = sinusoids(3);
    const auto plan = plan_boundary_inputs(ck, sys, phi);
    for (int i = 0; i < 3; ++i) CHECK_THAT(plan.component(i, 0.4), WithinAbs(phi(i, 0.4 + 1.0 / sys.mu(i)), 1e-14));
}

TEST_CASE("the second component carries the L21(xi, 0) window of the first", "[motion_planner]") {
    const auto& ck = fixtures::two_state_kernels(100);
    const auto& sys = ck.sys();
    const auto phi = sinusoids(2);
    const auto plan = plan_boundary_inputs(ck, sys, phi);
    const int N = ck.grid().N;
    for (double t : {0.0, 0.8}) {
        double acc = 0.0;
        for (int b = 0; b <= N; ++b) {
            const double xi = ck.grid().coord(b), w = (b == 0 || b == N) ? 0.5 : 1.0;
            acc += w / N * sys.mu(0) / sys.mu(1) * ck.kernels.l(1, 0).at(b, 0) * phi(0, t + (1.0 - xi) / sys.mu(1));
        }
        CHECK_THAT(plan.component(0, t), WithinAbs(phi(0, t + 1.0), 1e-14));
        CHECK_THAT(plan.component(1, t), WithinAbs(phi(1, t + 1.0 / sys.mu(1)) - acc, 1e-6));
    }
}

TEST_CASE("the tracking law is the plan plus the kernel feedback", "[motion_planner]") {
    const auto& ck = fixtures::two_state_kernels(100);
    const Grid1D g(100);
    const StateFeedback fb(ck, g);
    const auto plan = plan_boundary_inputs(ck, ck.sys(), sinusoids(2));
    Matrix v(2, g.nodes());
    for (int k = 0; k <= g.Nx; ++k) {
        v(0, k) = std::cos(g.x(k));
        v(1, k) = g.x(k);
    }
    const Vector U = tracking_control(fb, plan, v, 0.3);
    CHECK((U - plan(0.3) - fb.control(v)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("zero reference and zero kernels give zero control", "[motion_planner]") {
    const auto sys = fixtures::uncoupled(0, 2);
    const auto ck = synthesize_controller(sys, TriangularGrid(10), ArtificialBoundary(2));
    ReferenceTrajectory phi{{ScalarFunction{}, ScalarFunction{}}, "zero"};
    const Grid1D g(20);
    const StateFeedback fb(ck, g);
    const auto plan = plan_boundary_inputs(ck, sys, phi);
    CHECK(tracking_control(fb, plan, Matrix::Ones(2, g.nodes()), 1.0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("planning rejects u-states and mismatched references", "[motion_planner]") {
    const auto& het = fixtures::hetero_kernels(50);
    CHECK_THROWS_AS(plan_boundary_inputs(het, het.sys(), sinusoids(2)), UnsupportedError);
    const auto& two = fixtures::two_state_kernels(100);
    CHECK_THROWS_AS(plan_boundary_inputs(two, two.sys(), sinusoids(3)), DimensionError);
}

TEST_CASE("the plan reads the reference only inside the preview window", "[motion_planner][property]") {
    const auto& ck = fixtures::two_state_kernels(100);
    const double t = 2.0, horizon = 1.0 / ck.sys().mu(1);
    const auto phi = sinusoids(2);
    // Same reference plus bumps that live strictly before t and strictly after t + 1/mu_m.
    ReferenceTrajectory other = phi;
    for (auto& c : other.components) {
        c.terms.push_back(Primitive::bump(3.0, t - 1.5, t - 0.01));
        c.terms.push_back(Primitive::bump(-2.0, t + horizon + 0.01, t + horizon + 3.0));
    }
    const auto a = plan_boundary_inputs(ck, ck.sys(), phi)(t);
    const auto b = plan_boundary_inputs(ck, ck.sys(), other)(t);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a zero reference reduces tracking to stabilization", "[motion_planner][tracking]") {
    const auto& ck = fixtures::two_state_kernels(100);
    const auto sys = ck.sys();
    ReferenceTrajectory phi{{ScalarFunction{}, ScalarFunction{}}, "zero"};
    SimOptions o;
    o.Nx = 200;
    const Grid1D g(o.Nx);
    const auto init = FieldState::sample(0, 2, g, [](int r, double x) { return r == 0 ? x : 1.0 - x; });
    const auto tr = run_tracking(sys, ck, phi, init, 7.0, o);
    const auto cl = run_closed_loop(sys, ck, init, 7.0, o);
    CHECK_THAT(tr.at("norm_L2_v", 7.0), WithinAbs(cl.at("norm_L2_v", 7.0), 1e-12));
}

TEST_CASE("a delay line tracks exactly once the signal has crossed", "[motion_planner][tracking]") {
    HyperbolicSystem sys = HyperbolicSystem::zeros(0, 2);
    sys.mu << 1.0, 0.5;
    const auto ck = synthesize_controller(sys, TriangularGrid(10), ArtificialBoundary(2));
    ReferenceTrajectory phi{{ScalarFunction{{Primitive::sinusoid(1.0, 0.25)}}, ScalarFunction{{Primitive::constant(0.7)}}}, "slow"};
    SimOptions o;
    o.Nx = 400;
    o.scheme = Scheme::Upwind3;
    const auto ts = run_tracking(sys, ck, phi, FieldState::zeros(0, 2, Grid1D(o.Nx)), 4.0, o);
    for (std::size_t k = 0; k < ts.size(); ++k) {
        const double t = ts.t()[k];
        // the start-up front from zero initial data needs a few cells to leave
        if (t >= 1.2) CHECK(ts.column("track_err_1")[k] <= 1e-6);
        if (t >= 2.4) CHECK(ts.column("track_err_2")[k] <= 1e-6);
    }
}
