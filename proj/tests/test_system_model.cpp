#include "fixtures.hpp"

#include <random>

using namespace backstep;
using Catch::Matchers::WithinAbs;

TEST_CASE("validate accepts the heterodirectional test system", "[system_model]") {
    const auto rep = validate(reference::heterodirectional());
    CHECK(rep.ok);
    CHECK(rep.violations.empty());
    CHECK(rep.isotachic_groups.empty());
}

TEST_CASE("validate flags wrongly ordered leftward speeds", "[system_model]") {
    auto s = reference::heterodirectional();
    s.mu << 0.2, 1.0;
    const auto rep = validate(s);
    CHECK_FALSE(rep.ok);
    CHECK(rep.has("mu-ordering"));
}

TEST_CASE("validate reports equal leftward speeds as an isotachic group", "[system_model]") {
    auto s = reference::heterodirectional();
    s.mu << 1.0, 1.0;
    const auto rep = validate(s);
    CHECK_FALSE(rep.ok);
    REQUIRE(rep.isotachic_groups.size() == 1);
    CHECK(rep.isotachic_groups[0] == std::vector<int>{0, 1});
    CHECK(rep.first_rule() == "isotachic");
}

TEST_CASE("validate rejects diagonal sigma_mm, bad shapes and nonpositive speeds", "[system_model]") {
    auto s = reference::heterodirectional();
    s.sigma_mm(1, 1) = 0.1;
    CHECK(validate(s).has("sigma-mm-diagonal"));

    s = reference::heterodirectional();
    s.q0 = Matrix::Zero(2, 2);
    CHECK(validate(s).has("dimensions"));

    s = reference::heterodirectional();
    s.lambda << -1.0;
    CHECK(validate(s).has("lambda-positive"));

    s = reference::heterodirectional();
    s.sigma_pm(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK(validate(s).has("finite"));

    CHECK_THROWS_AS(require_valid(s), ValidationError);
}

TEST_CASE("validate allows ties among rightward speeds", "[system_model]") {
    HyperbolicSystem s = HyperbolicSystem::zeros(2, 1);
    s.lambda << 1.0, 1.0;
    CHECK(validate(s).ok);
    s.lambda << 2.0, 1.0;
    CHECK(validate(s).has("lambda-ordering"));
}

TEST_CASE("validate is idempotent and leaves its input untouched", "[system_model][property]") {
    auto s = reference::heterodirectional();
    s.mu << 0.2, 1.0;
    const auto copy = s;
    const auto a = validate(s), b = validate(s);
    CHECK(a.summary() == b.summary());
    CHECK(s.mu == copy.mu);
    CHECK(s.sigma_mm == copy.sigma_mm);
}

TEST_CASE("isotachic decoupling with a zero generator is the identity", "[system_model]") {
    const auto d = isotachic_decoupling(Matrix::Zero(3, 3), 0.7, 0.6);
    CHECK((d.B - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((d.C - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("isotachic decoupling of a scalar block is an exponential", "[system_model]") {
    Matrix s(1, 1);
    s << -1.3;
    for (double x : {0.0, 0.3, 1.0}) {
        const auto d = isotachic_decoupling(s, 1.0, x);
        CHECK_THAT(d.B(0, 0), WithinAbs(std::exp(-1.3 * x), 1e-10));
        CHECK_THAT(d.C(0, 0), WithinAbs(std::exp(1.3 * x), 1e-10));
    }
}

TEST_CASE("isotachic decoupling of a nilpotent block", "[system_model]") {
    Matrix s(2, 2);
    s << 0, 1, 0, 0;
    const auto d = isotachic_decoupling(s, 2.0, 1.0);
    Matrix expect(2, 2);
    expect << 1, 0.5, 0, 1;
    CHECK((d.B - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("isotachic decoupling rejects a non-square block", "[system_model]") {
    CHECK_THROWS_AS(isotachic_decoupling(Matrix::Zero(2, 3), 1.0, 0.5), DimensionError);
}

TEST_CASE("B(x) C(x) is the identity on random generators", "[system_model][property]") {
    std::mt19937 gen(7);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int k : {2, 3}) {
        for (int draw = 0; draw < 5; ++draw) {
            Matrix s(k, k);
            for (int r = 0; r < k; ++r)
                for (int c = 0; c < k; ++c) s(r, c) = u(gen);
            for (double x : {0.0, 0.25, 0.5, 0.75, 1.0}) {
                const auto d = isotachic_decoupling(s, 0.8, x);
                CHECK((d.B * d.C - Matrix::Identity(k, k)).cwiseAbs().maxCoeff() <= 1e-10);
            }
        }
    }
}

TEST_CASE("horizons of the reference speeds", "[system_model]") {
    const auto h = horizons(reference::heterodirectional());
    REQUIRE(h.t_F.has_value());
    CHECK_THAT(*h.t_F, WithinAbs(7.0, 1e-14));

    const auto h0 = horizons(reference::two_state());
    CHECK_FALSE(h0.t_F.has_value());
    CHECK_THAT(h0.t_M, WithinAbs(6.0, 1e-14));

    HyperbolicSystem s = HyperbolicSystem::zeros(1, 1);
    s.lambda << 2.0;
    s.mu << 4.0;
    CHECK_THAT(*horizons(s).t_F, WithinAbs(0.75, 1e-15));
}

TEST_CASE("horizons grow when any speed slows down", "[system_model][property]") {
    const auto base = reference::heterodirectional();
    const double t0 = *horizons(base).t_F;
    auto a = base;
    a.lambda(0) = 0.9;
    CHECK(*horizons(a).t_F > t0);
    auto b = base;
    b.mu(1) = 0.19;
    CHECK(*horizons(b).t_F > t0);
}

TEST_CASE("horizons reject an invalid system", "[system_model]") {
    auto s = reference::heterodirectional();
    s.mu << 1.0, 1.0;
    CHECK_THROWS_AS(horizons(s), ValidationError);
}
