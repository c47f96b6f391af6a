#include "fixtures.hpp"

#include <random>
#include <sstream>

using namespace backstep;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

// ---------------------------------------------------------------- characteristics

TEST_CASE("K characteristic starting on the hypotenuse has zero length", "[kernel_solver][characteristics]") {
    const auto c = k_characteristic(1.0, 1.0, 0.4, 0.4);
    CHECK(c.s_final == 0.0);
    CHECK_THAT(c.end, WithinAbs(0.4, 1e-15));
}

TEST_CASE("K characteristic lengths and endpoints", "[kernel_solver][characteristics]") {
    auto c = k_characteristic(1.0, 1.0, 1.0, 0.0);
    CHECK_THAT(c.s_final, WithinAbs(0.5, 1e-15));
    CHECK_THAT(c.end, WithinAbs(0.5, 1e-15));
    c = k_characteristic(1.0, 3.0, 0.8, 0.0);
    CHECK_THAT(c.s_final, WithinAbs(0.2, 1e-15));
    CHECK_THAT(c.end, WithinAbs(0.6, 1e-15));
    const auto [px, pxi] = c.at(c.s_final);
    CHECK_THAT(px, WithinAbs(pxi, 1e-14));
}

TEST_CASE("L characteristic for i == j runs parallel to the hypotenuse down to xi = 0", "[kernel_solver][characteristics]") {
    const auto c = l_characteristic(0, 0, 0.5, 0.5, 0.8, 0.2);
    CHECK_THAT(c.nu_final, WithinAbs(0.4, 1e-14));
    CHECK_THAT(c.chi_end, WithinAbs(0.6, 1e-14));
    CHECK_THAT(c.zeta_end, WithinAbs(0.0, 1e-14));
    CHECK(c.delta == 0);
    CHECK(c.terminus == LTerminus::Bottom);
    CHECK(c.eps == -1);
}

TEST_CASE("L characteristic for i < j below the critical line ends on xi = 0", "[kernel_solver][characteristics]") {
    const auto c = l_characteristic(0, 1, 1.0, 0.2, 0.5, 0.05);
    CHECK(c.delta == 0);
    CHECK(c.terminus == LTerminus::Bottom);
    const auto above = l_characteristic(0, 1, 1.0, 0.2, 0.5, 0.3);
    CHECK(above.delta == 1);
    CHECK(above.terminus == LTerminus::Hypotenuse);
}

TEST_CASE("L characteristic exactly on the critical line takes the xi = 0 branch", "[kernel_solver][characteristics]") {
    const auto c = l_characteristic(0, 1, 1.0, 0.2, 0.5, 0.1);
    CHECK(c.delta == 0);
}

TEST_CASE("L characteristic for i > j runs forward with eps = +1", "[kernel_solver][characteristics]") {
    for (auto [x, xi] : {std::pair{0.3, 0.1}, std::pair{0.9, 0.2}, std::pair{0.5, 0.45}}) {
        const auto c = l_characteristic(1, 0, 0.2, 1.0, x, xi);
        CHECK(c.eps == 1);
        CHECK(c.delta == 1);
        CHECK(c.terminus != LTerminus::Bottom);
    }
}

TEST_CASE("characteristics reject points outside the triangle", "[kernel_solver][characteristics]") {
    const auto sys = reference::heterodirectional();
    CHECK_THROWS_AS(trace_characteristic_K(sys, 0, 0, 0.3, 0.5), DomainError);
    CHECK_THROWS_AS(trace_characteristic_L(sys, 0, 1, 1.2, 0.5), DomainError);
}

// ---------------------------------------------------------------- grid and fields

TEST_CASE("triangular grid indexing", "[kernel_solver][grid]") {
    const TriangularGrid g(4);
    CHECK(g.node_count() == 15);
    CHECK(g.index(0, 0) == 0);
    CHECK(g.index(4, 4) == 14);
    CHECK_THAT(g.step(), WithinAbs(0.25, 0));
    CHECK_THROWS_AS(TriangularGrid(1), ParameterError);
}

TEST_CASE("kernel field interpolation reproduces bilinear functions", "[kernel_solver][grid]") {
    KernelField f(TriangularGrid(10));
    auto fn = [](double x, double xi) { return 1.0 + 2.0 * x - 3.0 * xi + 0.5 * x * xi; };
    for (int a = 0; a <= 10; ++a)
        for (int b = 0; b <= a; ++b) f.at(a, b) = fn(a / 10.0, b / 10.0);
    for (auto [x, xi] : {std::pair{0.33, 0.12}, std::pair{0.77, 0.5}, std::pair{0.95, 0.01}})
        CHECK_THAT(f(x, xi), WithinAbs(fn(x, xi), 1e-12));
    // Hypotenuse cells are triangles: linear data stay exact there.
    auto lin = [](double x, double xi) { return 0.3 + x - 2.0 * xi; };
    for (int a = 0; a <= 10; ++a)
        for (int b = 0; b <= a; ++b) f.at(a, b) = lin(a / 10.0, b / 10.0);
    CHECK_THAT(f(0.55, 0.54), WithinAbs(lin(0.55, 0.54), 1e-12));
}

TEST_CASE("kernel field never interpolates across a flagged line", "[kernel_solver][grid]") {
    const auto line = DiscontinuityLine::through(0.0, 0.0, 1.0, 0.5);
    KernelField f(TriangularGrid(20), {line});
    for (int a = 0; a <= 20; ++a)
        for (int b = 0; b <= a; ++b) f.at(a, b) = line.side(a / 20.0, b / 20.0) > 0 ? 1.0 : -1.0;
    CHECK_THAT(f(0.61, 0.31), WithinAbs(1.0, 1e-12));
    CHECK_THAT(f(0.61, 0.30), WithinAbs(-1.0, 1e-12));
}

// ---------------------------------------------------------------- successive approximations

TEST_CASE("zero coupling gives zero kernels after one iteration", "[kernel_solver][picard]") {
    auto sys = reference::heterodirectional();
    sys.sigma_pp.setZero();
    sys.sigma_pm.setZero();
    sys.sigma_mp.setZero();
    sys.sigma_mm.setZero();
    const auto [kp, rep] = picard_solve_controller(sys, TriangularGrid(20), ArtificialBoundary(sys.m));
    CHECK(rep.converged);
    CHECK(rep.iterations == 1);
    CHECK(fixtures::field_max(kp.K) == 0.0);
    CHECK(fixtures::field_max(kp.L) == 0.0);
}

TEST_CASE("a single leftward state has a zero kernel", "[kernel_solver][picard]") {
    const auto sys = fixtures::uncoupled(0, 1);
    const auto [kp, rep] = picard_solve_controller(sys, TriangularGrid(16), ArtificialBoundary(1));
    CHECK(rep.converged);
    CHECK(kp.l(0, 0).max_abs() == 0.0);
}

TEST_CASE("two-state kernels match the Bessel closed forms", "[kernel_solver][picard][oracle]") {
    const auto p = reference::two_state_parameters();
    const auto& ck = fixtures::two_state_kernels(200);
    const double band = 2.0 * ck.grid().step();
    const double err = closed_form_error(ck.kernels, p, resolve_closed_form_variant(p).variant, band);
    CHECK(err <= 2e-2);
}

TEST_CASE("a row solved alone is bit-identical to the same row in a full solve", "[kernel_solver][picard][property]") {
    const auto sys = reference::heterodirectional();
    const TriangularGrid grid(24);
    const ArtificialBoundary art(sys.m);
    const auto [kp, rep] = picard_solve_controller(sys, grid, art);
    for (int i = 0; i < sys.m; ++i) {
        const RowSolution row = solve_controller_row(sys, grid, art, i);
        for (int j = 0; j < sys.n; ++j) {
            const auto a = row.K[j].values();
            const auto b = kp.k(i, j).values();
            CHECK(std::equal(a.begin(), a.end(), b.begin()));
        }
        for (int j = 0; j < sys.m; ++j) {
            const auto a = row.L[j].values();
            const auto b = kp.l(i, j).values();
            CHECK(std::equal(a.begin(), a.end(), b.begin()));
        }
    }
}

TEST_CASE("parallel and sequential solves agree bit for bit", "[kernel_solver][picard][property]") {
    const auto sys = reference::heterodirectional();
    PicardOptions seq;
    seq.parallel = false;
    const auto [a, ra] = picard_solve_controller(sys, TriangularGrid(24), ArtificialBoundary(sys.m));
    const auto [b, rb] = picard_solve_controller(sys, TriangularGrid(24), ArtificialBoundary(sys.m), seq);
    CHECK(ra.increments == rb.increments);
    for (std::size_t f = 0; f < a.L.size(); ++f) {
        const auto x = a.L[f].values();
        const auto y = b.L[f].values();
        CHECK(std::equal(x.begin(), x.end(), y.begin()));
    }
}

TEST_CASE("exhausting max_iter raises a convergence error with the report", "[kernel_solver][picard]") {
    const auto sys = reference::heterodirectional();
    PicardOptions o;
    o.max_iter = 2;
    try {
        (void)picard_solve_controller(sys, TriangularGrid(16), ArtificialBoundary(sys.m), o);
        FAIL("expected a convergence error");
    } catch (const ConvergenceError& e) {
        CHECK(e.report().increments.size() == 2);
        CHECK_FALSE(e.report().converged);
    }
}

TEST_CASE("bad Picard parameters are rejected", "[kernel_solver][picard]") {
    const auto sys = reference::heterodirectional();
    PicardOptions o;
    o.tol = 0.0;
    CHECK_THROWS_AS(picard_solve_controller(sys, TriangularGrid(8), ArtificialBoundary(sys.m), o), ParameterError);
    auto bad = sys;
    bad.mu << 1.0, 1.0;
    CHECK_THROWS_AS(picard_solve_controller(bad, TriangularGrid(8), ArtificialBoundary(2)), ValidationError);
}

TEST_CASE("boundary relations hold on converged kernels", "[kernel_solver][picard][property]") {
    const auto& het = fixtures::hetero_kernels(50);
    CHECK(controller_residuals(het.kernels, het.artificial).max() <= 1e-2);
    const auto& two = fixtures::two_state_kernels(100);
    CHECK(controller_residuals(two.kernels, two.artificial).max() <= 1e-2);
}

TEST_CASE("converged kernels stay under the theoretical bound", "[kernel_solver][bound][property]") {
    const auto& het = fixtures::hetero_kernels(50);
    const auto sys = reference::heterodirectional();
    CHECK(bound_ratio(het.kernels, theoretical_bound(sys, het.artificial)) <= 1.0 + 1e-12);

    std::mt19937 gen(20240601);
    for (int draw = 0; draw < 3; ++draw) {
        const auto s = reference::random_coupling(gen);
        const ArtificialBoundary art(s.m);
        const auto [kp, rep] = picard_solve_controller(s, TriangularGrid(30), art);
        CHECK(bound_ratio(kp, theoretical_bound(s, art)) <= 1.0 + 1e-12);
    }
}

TEST_CASE("the bound is monotone in x and xi", "[kernel_solver][bound][property]") {
    const auto sys = reference::heterodirectional();
    const auto b = theoretical_bound(sys, ArtificialBoundary(sys.m));
    CHECK(b(0.6, 0.2) >= b(0.5, 0.2));
    CHECK(b(0.6, 0.3) <= b(0.6, 0.2));
    CHECK_THROWS_AS(theoretical_bound(sys, ArtificialBoundary(sys.m), 5.0), ParameterError);
}

TEST_CASE("zero coupling is trivially dominated", "[kernel_solver][bound]") {
    const auto sys = fixtures::uncoupled(1, 2);
    const auto [kp, rep] = picard_solve_controller(sys, TriangularGrid(10), ArtificialBoundary(2));
    CHECK(bound_ratio(kp, theoretical_bound(sys, ArtificialBoundary(2))) == 0.0);
}

TEST_CASE("increments decay faster than geometrically", "[kernel_solver][picard][property]") {
    const auto& het = fixtures::hetero_kernels(50);
    const auto shape = increment_shape(het.report.increments);
    CHECK(shape.superlinear());
    CHECK(het.report.iterations <= 60);
}

TEST_CASE("plain successive approximations stay under the factorial envelope", "[kernel_solver][picard][property]") {
    const auto sys = reference::heterodirectional();
    const ArtificialBoundary art(sys.m);
    PicardOptions o;
    o.in_place = false;
    const auto [kp, rep] = picard_solve_controller(sys, TriangularGrid(50), art, o);
    const auto b = theoretical_bound(sys, art);
    REQUIRE(rep.converged);
    for (std::size_t q = 0; q < rep.increments.size(); ++q)
        CHECK(rep.increments[q] <= b.increment_envelope(static_cast<int>(q)) * (1.0 + 1e-9));
}

// ---------------------------------------------------------------- closed forms

TEST_CASE("closed-form index question resolves to the sigma12 prefactor", "[kernel_solver][closed_form]") {
    const auto p = reference::two_state_parameters();
    const auto r = resolve_closed_form_variant(p);
    CHECK(r.variant == ClosedFormVariant::L12PrefactorSigma12);
    CHECK(r.residual_swapped < 1e-5);
    CHECK(r.residual_printed > 1.0);
}

TEST_CASE("closed forms meet the hypotenuse data", "[kernel_solver][closed_form]") {
    const auto p = reference::two_state_parameters();
    const auto sys = reference::two_state(p);
    for (double x : {0.2, 0.6, 1.0}) {
        const auto q = closed_form_2x2(p, x, x, ClosedFormVariant::L12PrefactorSigma12);
        CHECK_THAT(q[1], WithinAbs(sys.l_hyp(0, 1), 1e-10));
        CHECK_THAT(q[2], WithinAbs(sys.l_hyp(1, 0), 1e-10));
    }
}

TEST_CASE("L22 has a finite limit on the diagonal", "[kernel_solver][closed_form]") {
    const auto p = reference::two_state_parameters();
    for (double x : {0.3, 1.0}) {
        const double on = closed_form_2x2(p, x, x, ClosedFormVariant::L12PrefactorSigma12)[3];
        const double near = closed_form_2x2(p, x, x - 1e-6, ClosedFormVariant::L12PrefactorSigma12)[3];
        CHECK(std::isfinite(on));
        CHECK_THAT(on, WithinAbs(near, 1e-3 * std::max(1.0, std::abs(on))));
    }
}

// ---------------------------------------------------------------- G, C and the inverse

TEST_CASE("G is strictly lower triangular", "[kernel_solver][G]") {
    const auto& ck = fixtures::hetero_kernels(50);
    for (int i = 0; i < 2; ++i)
        for (int j = i; j < 2; ++j)
            for (double x : {0.0, 0.4, 1.0}) CHECK(ck.g(i, j)(x) == 0.0);
    CHECK(std::abs(ck.g(1, 0)(0.5)) > 0.0);
}

TEST_CASE("G of a single leftward state is zero", "[kernel_solver][G]") {
    const auto ck = synthesize_controller(fixtures::uncoupled(0, 1), TriangularGrid(10), ArtificialBoundary(1));
    REQUIRE(ck.G.size() == 1);
    CHECK(ck.g(0, 0)(0.5) == 0.0);
}

TEST_CASE("zero kernels give a zero G", "[kernel_solver][G]") {
    const auto ck = synthesize_controller(fixtures::uncoupled(1, 2), TriangularGrid(10), ArtificialBoundary(2));
    for (const auto& g : ck.G) CHECK(g(0.3) == 0.0);
}

TEST_CASE("g21 is mu1 L21(x, 0) when there are no u-states", "[kernel_solver][G]") {
    const auto& ck = fixtures::two_state_kernels(100);
    for (int a : {10, 50, 90}) {
        const double x = ck.grid().coord(a);
        CHECK_THAT(ck.g(1, 0)(x), WithinAbs(ck.sys().mu(0) * ck.kernels.l(1, 0).at(a, 0), 1e-12));
    }
}

TEST_CASE("C kernels when L vanishes", "[kernel_solver][C]") {
    auto sys = reference::heterodirectional();
    sys.sigma_pm.setZero();
    sys.sigma_mm.setZero();
    sys.q0.setZero();
    const auto ck = synthesize_controller(sys, TriangularGrid(20), ArtificialBoundary(sys.m));
    CHECK(fixtures::field_max(ck.kernels.L) == 0.0);
    CHECK(fixtures::field_max(ck.kernels.K) > 0.0);
    CHECK(fixtures::field_max(ck.c_minus.f) == 0.0);
    for (int i = 0; i < 2; ++i) {
        const auto a = ck.c_plus(i, 0).values();
        const auto b = ck.kernels.k(i, 0).values();
        for (std::size_t q = 0; q < a.size(); ++q) CHECK_THAT(a[q], WithinAbs(b[q], 1e-14));
    }
}

TEST_CASE("C kernels vanish with the controller kernels", "[kernel_solver][C]") {
    const auto ck = synthesize_controller(fixtures::uncoupled(1, 2), TriangularGrid(10), ArtificialBoundary(2));
    CHECK(fixtures::field_max(ck.c_plus.f) == 0.0);
    CHECK(fixtures::field_max(ck.c_minus.f) == 0.0);
}

TEST_CASE("a constant Volterra kernel sums to an exponential", "[kernel_solver][C]") {
    const double c = 0.8;
    const TriangularGrid g(40);
    KernelField f(g);
    for (double& v : f.values()) v = c;
    const FieldBlock F(1, 1, {f});
    const auto [U, rep] = volterra_neumann(F, F, true);
    CHECK(rep.converged);
    for (auto [a, b] : {std::pair{40, 0}, std::pair{30, 10}, std::pair{20, 20}}) {
        const double d = g.coord(a) - g.coord(b);
        CHECK_THAT(U(0, 0).at(a, b), WithinAbs(c * std::exp(c * d), 2e-3));
    }
}

TEST_CASE("the inverse kernel of zero kernels is zero", "[kernel_solver][inverse]") {
    const auto ck = synthesize_controller(fixtures::uncoupled(1, 2), TriangularGrid(10), ArtificialBoundary(2));
    const auto R = invert_transform(ck.kernels);
    CHECK(fixtures::field_max(R.lower.f) == 0.0);
    CHECK(R(0, 1, 0.5, 0.2) == 0.0);
}

TEST_CASE("forward then inverse transform returns the profile to second order", "[kernel_solver][inverse][property]") {
    auto err = [](int N) {
        const auto& ck = fixtures::hetero_kernels(N);
        const BacksteppingTransform T(ck, N);
        Matrix w(3, N + 1);
        for (int k = 0; k <= N; ++k) {
            const double x = static_cast<double>(k) / N;
            w(0, k) = std::sin(std::numbers::pi * x);
            w(1, k) = std::cos(std::numbers::pi * x);
            w(2, k) = x * x - 0.3;
        }
        return linf_norm(w - T.inverse(T.forward(w)));
    };
    const double e50 = err(50), e100 = err(100);
    CHECK(e50 <= 8.0 / (50.0 * 50.0));
    CHECK(e100 <= 8.0 / (100.0 * 100.0));
    CHECK(e50 / e100 > 3.0);
}

TEST_CASE("an explicit inverse kernel agrees with the C kernels", "[kernel_solver][inverse]") {
    const auto& ck = fixtures::hetero_kernels(50);
    const auto R = invert_transform(ck.kernels);
    BacksteppingTransform viaC(ck, 50), viaR(ck, 50);
    viaR.use_inverse_kernel(R);
    Matrix w = Matrix::Ones(3, 51);
    // two second-order discretisations of the same operator
    CHECK(linf_norm(viaC.inverse(w) - viaR.inverse(w)) <= 1.0 / (50.0 * 50.0));
}

// ---------------------------------------------------------------- observer kernels

TEST_CASE("observer kernels satisfy their boundary relations", "[kernel_solver][observer]") {
    const auto& ok = fixtures::hetero_observer(50);
    CHECK(ok.report.converged);
    CHECK(observer_residuals(ok).max() <= 1e-2);
}

TEST_CASE("H is strictly upper triangular", "[kernel_solver][observer]") {
    const auto& ok = fixtures::hetero_observer(50);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j <= i; ++j) CHECK(ok.h(i, j)(0.5) == 0.0);
}
