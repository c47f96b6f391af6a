#include "fixtures.hpp"

#include <sstream>

using namespace backstep;
using Catch::Matchers::WithinAbs;

namespace {

Json minimal() {
    return Json::parse(R"({
        "name": "unit",
        "system": {"n": 1, "m": 2, "lambda": [1.0], "mu": [1.0, 0.2],
                   "sigma_mm": [[0.0, 0.7], [-0.5, 0.0]], "q0": [1.0, -0.6], "r1": [[0.8], [1.2]]},
        "kernel": {"N": 16},
        "simulation": {"Nx": 32, "t_end": {"multiple": 0.5, "of": "t_M"}},
        "scenario": "open-loop"
    })");
}

}  // namespace

TEST_CASE("config parsing fills the system row-major", "[experiment]") {
    const auto c = parse_config(minimal());
    CHECK(c.system.n == 1);
    CHECK(c.system.sigma_mm(0, 1) == 0.7);
    CHECK(c.system.sigma_mm(1, 0) == -0.5);
    CHECK(c.system.q0(0, 1) == -0.6);
    CHECK(c.system.r1(1, 0) == 1.2);
    CHECK(c.kernel.N == 16);
    CHECK(c.scenario == Scenario::OpenLoop);
    CHECK(c.initial.size() == 3);
    CHECK_THAT(resolve_t_end(c), WithinAbs(3.0, 1e-14));
}

TEST_CASE("config hash is stable and sensitive", "[experiment]") {
    auto j = minimal();
    const auto a = parse_config(j).hash;
    CHECK(a == parse_config(minimal()).hash);
    CHECK(a.size() == 16);
    j["kernel"]["N"] = 17;
    CHECK(parse_config(j).hash != a);
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("config errors carry rule ids", "[experiment]") {
    auto expect_rule = [](const Json& j, const std::string& rule) {
        try {
            (void)parse_config(j);
            FAIL("expected a validation error");
        } catch (const ValidationError& e) {
            CHECK(e.rule() == rule);
        }
    };
    auto j = minimal();
    j["system"]["mu"] = {1.0, 1.0};
    expect_rule(j, "isotachic");
    j = minimal();
    j["system"]["q0"] = {1.0};
    expect_rule(j, "config-dimensions");
    j = minimal();
    j["scenario"] = "bogus";
    expect_rule(j, "config-scenario");
    j = minimal();
    j["scenario"] = "tracking";
    expect_rule(j, "config-missing-block");
    j = minimal();
    j["kernel"]["artificial"] = "closed-form";
    expect_rule(j, "config-artificial");
    j = minimal();
    j.erase("system");
    expect_rule(j, "config-missing-block");
    j = minimal();
    j["simulation"]["Nx"] = 8;
    expect_rule(j, "config-simulation");
    j = minimal();
    j["observer_boundary_input"] = "estimate";
    expect_rule(j, "config-observer-boundary");
}

TEST_CASE("observer outputs record the boundary input reading", "[experiment]") {
    auto j = minimal();
    auto lines = provenance(parse_config(j));
    CHECK(lines.size() == 2);
    j["scenario"] = "observer";
    lines = provenance(parse_config(j));
    REQUIRE(lines.size() == 3);
    CHECK(lines[2] == "observer_boundary_input control");
}

TEST_CASE("reference primitives compose", "[experiment]") {
    const auto f = detail::read_function(Json::parse(R"([{"kind": "constant", "amplitude": 0.5},
        {"kind": "sinusoid", "amplitude": 2.0, "frequency": 0.25},
        {"kind": "polynomial", "coefficients": [0, 0, 1]}])"));
    const double t = 0.3;
    CHECK_THAT(f(t), WithinAbs(0.5 + 2.0 * std::sin(2 * std::numbers::pi * 0.25 * t) + t * t, 1e-14));
    CHECK(detail::read_function(Json(1.5))(7.0) == 1.5);
}

TEST_CASE("kernel dumps round-trip with full precision", "[experiment]") {
    const auto& ck = fixtures::hetero_kernels(50);
    std::stringstream ss;
    ss << "# config_hash test\n";
    write_kernel_field(ss, 1, 0, "L", ck.kernels.l(1, 0));
    write_kernel_field(ss, 0, 0, "K", ck.kernels.k(0, 0));
    const auto fields = read_kernel_dump(ss);
    REQUIRE(fields.size() == 2);
    CHECK(fields[0].i == 1);
    CHECK(fields[0].j == 0);
    CHECK(fields[0].kind == "L");
    CHECK(fields[0].N == 50);
    const auto v = ck.kernels.l(1, 0).values();
    CHECK(std::equal(v.begin(), v.end(), fields[0].values.begin()));
}

TEST_CASE("snapshot table columns", "[experiment]") {
    const Grid1D g(16);
    const auto s = FieldState::sample(1, 2, g, [](int r, double x) { return r + x; });
    std::stringstream ss;
    write_snapshot_csv(ss, s, {"config_hash abc"});
    std::string line;
    std::getline(ss, line);
    CHECK(line == "# config_hash abc");
    std::getline(ss, line);
    std::getline(ss, line);
    CHECK(line == "x,u_1,v_1,v_2");
}

TEST_CASE("svg output is well formed and tagged", "[experiment]") {
    const auto svg = svg_line_chart("t", {{"a", {0, 1, 2}, {1, 0.1, 0.01}}}, true, "config_hash 1");
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("config_hash 1") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);
}

TEST_CASE("scenarios run from a config and report their ratio", "[experiment]") {
    auto j = minimal();
    auto c = parse_config(j);
    auto r = run_scenario(c);
    CHECK(r.ratio_column == "norm_L2");
    CHECK(r.series.size() > 10);

    j["scenario"] = "state-feedback";
    j["kernel"]["N"] = 40;
    j["simulation"] = Json::parse(R"({"Nx": 100, "t_end": {"multiple": 1.1, "of": "t_F"}})");
    c = parse_config(j);
    r = run_scenario(c);
    CHECK(r.ratio <= 0.05);
}

TEST_CASE("identical configs give identical series", "[experiment][property]") {
    const auto c = parse_config(minimal());
    std::ostringstream a, b;
    run_scenario(c).series.write_csv(a, provenance(c));
    run_scenario(c).series.write_csv(b, provenance(c));
    CHECK(a.str() == b.str());
}

TEST_CASE("the closed-form artificial datum reproduces L21(1, xi)", "[experiment]") {
    auto j = Json::parse(R"({"system": {"n": 0, "m": 2, "mu": [1.0, 0.2], "sigma_mm": [[0, 2], [5, 0]]},
                             "kernel": {"artificial": "closed-form"}, "simulation": {"t_end": 1.0}})");
    const auto c = parse_config(j);
    const auto art = artificial_boundary(c);
    const auto p = two_state_of(c.system);
    CHECK_THAT(art.value(c.system, 1, 0, 0.4), WithinAbs(closed_form_2x2(p, 1.0, 0.4, ClosedFormVariant::L12PrefactorSigma12)[2], 1e-15));
}

TEST_CASE("shipped configs parse", "[experiment]") {
    for (const char* name : {"heterodirectional", "heterodirectional_open_loop", "heterodirectional_output_feedback",
                             "two_state_tracking", "zero_coupling"}) {
        INFO(name);
        CHECK_NOTHROW(load_config(std::string(BACKSTEP_SOURCE_DIR) + "/configs/" + name + ".json"));
    }
    CHECK_THROWS_AS(load_config(std::string(BACKSTEP_SOURCE_DIR) + "/configs/isotachic_invalid.json"), ValidationError);
}
