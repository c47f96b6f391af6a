#include "fixtures.hpp"

using namespace backstep;
using Catch::Matchers::WithinAbs;

namespace {

FieldState smooth_state(int n, int m, const Grid1D& g) {
    return FieldState::sample(n, m, g, [](int r, double x) { return std::sin(std::numbers::pi * x * (r + 1)) + 0.5 * x; });
}

/// Steps a state to t_end with the largest admissible uniform step.
FieldState advance(const HyperbolicSystem& sys, FieldState s, double t_end, const StateFeedback* fb = nullptr,
                   const SimOptions& o = {}) {
    const Grid1D g(static_cast<int>(s.v.cols()) - 1);
    const auto [dt, steps] = choose_time_step(sys.max_speed(), g, o.cfl, t_end);
    for (long k = 0; k < steps; ++k) s = step(sys, s, dt, fb, o);
    return s;
}

}  // namespace

TEST_CASE("grid and state plumbing", "[simulator]") {
    CHECK_THROWS_AS(Grid1D(15), ParameterError);
    const Grid1D g(20);
    CHECK(g.nodes() == 21);
    CHECK_THAT(g.x(20), WithinAbs(1.0, 1e-15));
    const auto s = smooth_state(1, 2, g);
    const auto back = FieldState::unstack(0.0, s.stacked(), 1);
    CHECK(back.u == s.u);
    CHECK(back.v == s.v);
}

TEST_CASE("time series keeps strictly increasing samples", "[simulator]") {
    TimeSeries ts({"a"});
    ts.add(0.0, {1.0});
    ts.add(0.5, {3.0});
    ts.add(1.0, {2.0});
    CHECK_THROWS_AS(ts.add(1.0, {0.0}), ParameterError);
    CHECK_THROWS_AS(ts.add(2.0, {0.0, 1.0}), DimensionError);
    CHECK(ts.at("a", 0.7) == 3.0);
    CHECK(ts.running_max("a", 1.0) == 3.0);
    CHECK_THAT(ts.rms("a", 0.5, 1.0), WithinAbs(std::sqrt(6.5), 1e-14));
    CHECK_THROWS_AS(ts.column("b"), DimensionError);
}

TEST_CASE("a step that violates CFL is rejected", "[simulator]") {
    const auto sys = reference::heterodirectional();
    const Grid1D g(50);
    CHECK_THROWS_AS(step(sys, FieldState::zeros(1, 2, g), 2.0 * g.dx(), nullptr), ParameterError);
}

TEST_CASE("uncoupled transport empties the domain", "[simulator]") {
    HyperbolicSystem sys = HyperbolicSystem::zeros(1, 2);
    sys.mu << 1.0, 0.2;
    auto residue = [&](int Nx) {
        SimOptions o;
        o.Nx = Nx;
        const auto ts = run_plant(sys, nullptr, smooth_state(1, 2, Grid1D(Nx)), 5.5, o);
        return ts.at("norm_L2", 5.5) / ts.column("norm_L2").front();
    };
    const double r200 = residue(200), r400 = residue(400);
    CHECK(r200 <= 2.0 / 200.0);
    CHECK(r400 <= 2.0 / 400.0);
    CHECK(r400 < 0.75 * r200);
}

TEST_CASE("an indicator is transported at its speed", "[simulator]") {
    HyperbolicSystem sys = HyperbolicSystem::zeros(0, 1);
    sys.mu << 0.5;
    const Grid1D g(400);
    FieldState s = FieldState::sample(0, 1, g, [](int, double x) { return (x >= 0.4 && x <= 0.6) ? 1.0 : 0.0; });
    s = advance(sys, s, 0.4);
    double l1 = 0.0, mass = 0.0, moment = 0.0;
    for (int k = 0; k <= g.Nx; ++k) {
        const double x = g.x(k), exact = (x >= 0.2 && x <= 0.4) ? 1.0 : 0.0;
        l1 += std::abs(s.v(0, k) - exact) * g.dx();
        mass += s.v(0, k) * g.dx();
        moment += x * s.v(0, k) * g.dx();
    }
    CHECK(l1 <= 0.03);
    CHECK_THAT(moment / mass, WithinAbs(0.3, 2.0 * g.dx()));
}

TEST_CASE("mass leaves only through the outflow boundary", "[simulator]") {
    HyperbolicSystem sys = HyperbolicSystem::zeros(1, 1);
    sys.lambda << 1.0;
    sys.mu << 0.5;
    const Grid1D g(400);
    FieldState s = FieldState::sample(1, 1, g, [](int r, double x) { return r == 0 ? std::sin(std::numbers::pi * x) : x; });
    auto mass = [&](const FieldState& f) {
        double acc = 0.0;
        for (int k = 0; k <= g.Nx; ++k) {
            const double w = (k == 0 || k == g.Nx) ? 0.5 : 1.0;
            acc += w * (f.u(0, k) + f.v(0, k)) * g.dx();
        }
        return acc;
    };
    const auto [dt, steps] = choose_time_step(sys.max_speed(), g, 0.9, 0.5);
    const double m0 = mass(s);
    double outflow = 0.0;
    for (long k = 0; k < steps; ++k) {
        const double before = sys.lambda(0) * s.u(0, g.Nx) + sys.mu(0) * s.v(0, 0);
        s = step(sys, s, dt, nullptr);
        const double after = sys.lambda(0) * s.u(0, g.Nx) + sys.mu(0) * s.v(0, 0);
        outflow += 0.5 * dt * (before + after);
    }
    CHECK_THAT(mass(s), WithinAbs(m0 - outflow, 5.0 * g.dx()));
}

TEST_CASE("zero kernels give the reflection-cancelling control", "[simulator][feedback]") {
    auto sys = fixtures::uncoupled(1, 2);
    sys.r1 << 0.8, 1.2;
    const auto ck = synthesize_controller(sys, TriangularGrid(10), ArtificialBoundary(2));
    const Grid1D g(40);
    const StateFeedback fb(ck, g);
    const FieldState s = smooth_state(1, 2, g);
    const Vector U = fb.control(s.stacked());
    CHECK((U + sys.r1 * s.u.col(g.Nx)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("the control of the zero state is zero", "[simulator][feedback]") {
    const auto& ck = fixtures::hetero_kernels(50);
    const Grid1D g(100);
    const StateFeedback fb(ck, g);
    CHECK(fb.control(Matrix::Zero(3, g.nodes())).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("without u-states the control is the kernel integral alone", "[simulator][feedback]") {
    const auto& ck = fixtures::two_state_kernels(100);
    const Grid1D g(100);
    const StateFeedback fb(ck, g);
    Matrix v = Matrix::Zero(2, g.nodes());
    for (int k = 0; k <= g.Nx; ++k) v(0, k) = 1.0;
    // With v = (1, 0) the control is the trapezoid of L_i1(1, .) over [0, 1].
    const Vector U = fb.control(v);
    for (int i = 0; i < 2; ++i) {
        const auto tr = right_trace(ck.kernels.l(i, 0));
        const double ref = trace_integral(tr, 0.0, 1.0, [](double) { return 1.0; });
        CHECK_THAT(U(i), WithinAbs(ref, 2e-2 * std::max(1.0, std::abs(ref))));
    }
}

TEST_CASE("zero initial data stay at zero in closed loop", "[simulator][closed_loop]") {
    const auto& ck = fixtures::hetero_kernels(50);
    SimOptions o;
    o.Nx = 100;
    const auto ts = run_closed_loop(reference::heterodirectional(), ck, FieldState::zeros(1, 2, Grid1D(100)), 2.0, o);
    CHECK(ts.running_max("norm_Linf", 2.0) == 0.0);
}

TEST_CASE("the test system is unstable in open loop and settles in closed loop", "[simulator][closed_loop]") {
    const auto sys = reference::heterodirectional();
    const double tF = *horizons(sys).t_F;
    SimOptions o;
    o.Nx = 200;
    const auto init = smooth_state(1, 2, Grid1D(200));
    const auto open = run_plant(sys, nullptr, init, 1.1 * tF, o);
    CHECK(open.at("norm_L2", 1.1 * tF) > open.column("norm_L2").front());
    const auto closed = run_closed_loop(sys, fixtures::hetero_kernels(100), init, 1.1 * tF, o);
    CHECK(closed.at("norm_L2", 1.1 * tF) <= 0.05 * closed.running_max("norm_L2", 1.1 * tF));
}

TEST_CASE("closed-loop step keeps the actuated boundary relation", "[simulator][closed_loop]") {
    const auto sys = reference::heterodirectional();
    const auto& ck = fixtures::hetero_kernels(50);
    const Grid1D g(100);
    const StateFeedback fb(ck, g);
    FieldState s = smooth_state(1, 2, g);
    const auto [dt, steps] = choose_time_step(sys.max_speed(), g, 0.9, 0.1);
    s = step(sys, s, dt, &fb);
    const Vector U = fb.control(s.stacked());
    const Vector lhs = s.v.col(g.Nx);
    const Vector rhs = sys.r1 * s.u.col(g.Nx) + U;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((s.u.col(0) - sys.q0 * s.v.col(0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("the observer started on the truth has zero error", "[simulator][observer]") {
    const auto sys = reference::heterodirectional();
    SimOptions o;
    o.Nx = 100;
    const auto init = smooth_state(1, 2, Grid1D(100));
    const auto ts = run_observer(sys, fixtures::hetero_observer(50), fixtures::hetero_kernels(50), init, init,
                                 ObserverMode::StateFeedbackPlant, 3.0, o);
    CHECK(ts.running_max("err_L2", 3.0) <= 1e-12);
}

TEST_CASE("estimation error dies out after the finite horizon", "[simulator][observer]") {
    const auto sys = reference::heterodirectional();
    const double tF = *horizons(sys).t_F;
    SimOptions o;
    o.Nx = 200;
    const Grid1D g(200);
    const auto ts = run_observer(sys, fixtures::hetero_observer(100), fixtures::hetero_kernels(100), smooth_state(1, 2, g),
                                 FieldState::zeros(1, 2, g), ObserverMode::StateFeedbackPlant, 1.1 * tF, o);
    CHECK(ts.at("err_L2", 1.1 * tF) <= 0.05 * ts.column("err_L2").front());
}

TEST_CASE("target cascade: beta_1 and then all of beta vanish", "[simulator][target]") {
    const auto sys = reference::heterodirectional();
    const auto& ck = fixtures::hetero_kernels(50);
    SimOptions o;
    o.Nx = 200;
    const Grid1D g(o.Nx);
    const auto target = FieldState::sample(1, 2, g, [](int r, double x) {
        const double s = std::sin(std::numbers::pi * x);
        return r == 0 ? std::sin(0.5 * std::numbers::pi * x) : (r == 1 ? s : -2.0 * x * s);
    });
    const double tM = horizons(sys).t_M;
    const auto ts = run_target_system(sys, ck, target, 1.1 * tM, o);
    double b1 = 0.0, b = 0.0;
    for (std::size_t k = 0; k < ts.size(); ++k) {
        const double t = ts.t()[k];
        if (t >= 1.05 / sys.mu(0)) b1 = std::max(b1, ts.column("beta_Linf_1")[k]);
        if (t >= 1.05 * tM) b = std::max({b, ts.column("beta_Linf_1")[k], ts.column("beta_Linf_2")[k]});
    }
    CHECK(b1 <= 2.0 * g.dx());
    CHECK(b <= 2.0 * g.dx());
}

TEST_CASE("target integration needs the C kernels", "[simulator][target]") {
    const auto sys = reference::heterodirectional();
    const auto ck = synthesize_controller(sys, TriangularGrid(16), ArtificialBoundary(2), {}, false);
    CHECK_THROWS_AS(run_target_system(sys, ck, FieldState::zeros(1, 2, Grid1D(32)), 1.0, SimOptions{32}), UnsupportedError);
}

TEST_CASE("the cascade formula for one component is the delayed boundary signal", "[simulator][target]") {
    Vector mu(1);
    mu << 0.5;
    BetaPropagator beta({PiecewiseTrace{}}, mu, [](int, double s) { return std::cos(s); });
    for (auto [t, x] : {std::pair{2.0, 0.0}, std::pair{3.0, 0.5}}) CHECK_THAT(beta(0, t, x), WithinAbs(std::cos(t + (x - 1.0) / 0.5), 1e-15));
}

TEST_CASE("the cascade formula names the wait time when used too early", "[simulator][target]") {
    Vector mu(1);
    mu << 0.5;
    BetaPropagator beta({PiecewiseTrace{}}, mu, [](int, double) { return 1.0; });
    try {
        (void)beta(0, 0.5, 0.0);
        FAIL("expected a domain error");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("t >= 2") != std::string::npos);
    }
}
