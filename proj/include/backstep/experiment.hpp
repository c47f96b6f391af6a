#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "closed_form.hpp"
#include "controller.hpp"
#include "errors.hpp"
#include "functions.hpp"
#include "motion_planner.hpp"
#include "observer.hpp"
#include "simulator.hpp"
#include "system_model.hpp"
#include "transform.hpp"

namespace backstep {

using Json = nlohmann::json;

enum class Scenario { OpenLoop, StateFeedback, Observer, OutputFeedback, TargetSystem, Tracking };

inline std::string to_string(Scenario s) {
    switch (s) {
        case Scenario::OpenLoop: return "open-loop";
        case Scenario::StateFeedback: return "state-feedback";
        case Scenario::Observer: return "observer";
        case Scenario::OutputFeedback: return "output-feedback";
        case Scenario::TargetSystem: return "target-system";
        case Scenario::Tracking: return "tracking";
    }
    return "?";
}

[[nodiscard]] inline Scenario scenario_from(const std::string& s) {
    for (Scenario c : {Scenario::OpenLoop, Scenario::StateFeedback, Scenario::Observer, Scenario::OutputFeedback,
                       Scenario::TargetSystem, Scenario::Tracking})
        if (to_string(c) == s) return c;
    throw ValidationError("config-scenario", "unknown scenario '" + s + "'");
}

/// Artificial boundary data for L_ij(1, xi), i > j.
enum class ArtificialKind { Constant, Zero, ClosedForm };

struct KernelConfig {
    int N = 200;
    double tol = 1e-10;
    int max_iter = 200;
    ArtificialKind artificial = ArtificialKind::Constant;
    bool parallel = true;
};

struct SimulationConfig {
    int Nx = 400;
    double cfl = 0.9;
    Scheme scheme = Scheme::Upwind1;
    double t_end_multiple = 1.1;
    std::string t_end_of = "t_F";  ///< "t_F", "t_M" or "absolute"
    int sample_stride = 1;
    std::optional<double> snapshot_dt;
};

struct OutputConfig {
    std::string dir = "out";
    bool svg = true;
};

/**
 * One experiment as read from a JSON file. Matrices are row-major, either flat or nested;
 * functions of x or t are lists of primitives ({"kind": "sinusoid", ...}) that are summed.
 */
struct ExperimentConfig {
    std::string name = "experiment";
    HyperbolicSystem system;
    KernelConfig kernel;
    SimulationConfig simulation;
    Scenario scenario = Scenario::StateFeedback;
    std::vector<ScalarFunction> initial;           ///< n + m profiles of x
    std::vector<ScalarFunction> observer_initial;  ///< empty means a zero estimate
    std::vector<ScalarFunction> reference;         ///< m components of t
    /// How the last term of the observer's x = 1 condition is read. Only "control" (the plant input U) is supported.
    std::string observer_boundary_input = "control";
    OutputConfig output;
    std::string hash;  ///< FNV-1a of the canonical JSON text

    [[nodiscard]] SimOptions sim_options() const {
        SimOptions o;
        o.Nx = simulation.Nx;
        o.cfl = simulation.cfl;
        o.scheme = simulation.scheme;
        o.sample_stride = simulation.sample_stride;
        o.snapshot_dt = simulation.snapshot_dt;
        return o;
    }

    [[nodiscard]] PicardOptions picard_options() const {
        PicardOptions o;
        o.tol = kernel.tol;
        o.max_iter = kernel.max_iter;
        o.parallel = kernel.parallel;
        return o;
    }
};

/// 64-bit FNV-1a, printed as 16 hex digits.
[[nodiscard]] inline std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

namespace detail {

inline Matrix read_matrix(const Json& j, int rows, int cols, const std::string& key) {
    Matrix a = Matrix::Zero(rows, cols);
    if (j.is_null()) return a;
    std::vector<double> flat;
    if (!j.is_array()) throw ValidationError("config-matrix", key + " must be an array");
    for (const auto& e : j) {
        if (e.is_array())
            for (const auto& x : e) flat.push_back(x.get<double>());
        else
            flat.push_back(e.get<double>());
    }
    if (static_cast<int>(flat.size()) != rows * cols)
        throw ValidationError("config-dimensions", key + " has " + std::to_string(flat.size()) + " entries, expected " +
                                                       std::to_string(rows) + "x" + std::to_string(cols));
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) a(r, c) = flat[static_cast<std::size_t>(r) * cols + c];
    return a;
}

inline Primitive read_primitive(const Json& j) {
    Primitive p;
    p.kind = primitive_kind(j.value("kind", std::string("constant")));
    p.amplitude = j.value("amplitude", 1.0);
    p.frequency = j.value("frequency", 1.0);
    p.phase = j.value("phase", 0.0);
    p.lo = j.value("lo", 0.0);
    p.hi = j.value("hi", 1.0);
    if (j.contains("coefficients")) p.coefficients = j.at("coefficients").get<std::vector<double>>();
    return p;
}

/// A number is shorthand for a constant; an object is one primitive; an array is a sum.
inline ScalarFunction read_function(const Json& j) {
    ScalarFunction f;
    if (j.is_number())
        f.terms.push_back(Primitive::constant(j.get<double>()));
    else if (j.is_object())
        f.terms.push_back(read_primitive(j));
    else if (j.is_array())
        for (const auto& e : j) f.terms.push_back(read_primitive(e));
    else
        throw ValidationError("config-function", "function must be a number, a primitive or a list of primitives");
    return f;
}

inline std::vector<ScalarFunction> read_functions(const Json& j, int count, const std::string& key) {
    std::vector<ScalarFunction> out;
    if (!j.is_array() || static_cast<int>(j.size()) != count)
        throw ValidationError("config-dimensions", key + " needs " + std::to_string(count) + " components");
    for (const auto& e : j) out.push_back(read_function(e));
    return out;
}

inline Scheme scheme_from(const std::string& s) {
    if (s == "upwind1") return Scheme::Upwind1;
    if (s == "upwind3") return Scheme::Upwind3;
    throw ValidationError("config-scheme", "unknown scheme '" + s + "' (upwind1 | upwind3)");
}

}  // namespace detail

/// Builds the system block alone, without validating the dynamics.
[[nodiscard]] inline HyperbolicSystem system_from_json(const Json& j) {
    const int n = j.value("n", 0), m = j.value("m", 0);
    if (n < 0 || m < 1) throw ValidationError("config-dimensions", "need n >= 0 and m >= 1");
    HyperbolicSystem s = HyperbolicSystem::zeros(n, m);
    s.lambda = detail::read_matrix(j.value("lambda", Json::array()), n, 1, "lambda");
    s.mu = detail::read_matrix(j.value("mu", Json::array()), m, 1, "mu");
    s.sigma_pp = detail::read_matrix(j.value("sigma_pp", Json()), n, n, "sigma_pp");
    s.sigma_pm = detail::read_matrix(j.value("sigma_pm", Json()), n, m, "sigma_pm");
    s.sigma_mp = detail::read_matrix(j.value("sigma_mp", Json()), m, n, "sigma_mp");
    s.sigma_mm = detail::read_matrix(j.value("sigma_mm", Json()), m, m, "sigma_mm");
    s.q0 = detail::read_matrix(j.value("q0", Json()), n, m, "q0");
    s.r1 = detail::read_matrix(j.value("r1", Json()), m, n, "r1");
    return s;
}

/**
 * Parses and checks an experiment. Structural problems raise ValidationError with a
 * "config-*" rule; the system itself is checked with validate() and reports its own rule ids.
 */
[[nodiscard]] inline ExperimentConfig parse_config(const Json& j) {
    ExperimentConfig c;
    if (!j.contains("system")) throw ValidationError("config-missing-block", "the system block is required");
    c.name = j.value("name", c.name);
    c.system = system_from_json(j.at("system"));
    const auto report = validate(c.system);
    if (!report.ok) throw ValidationError(report.first_rule(), report.summary());
    const int n = c.system.n, m = c.system.m;

    if (j.contains("kernel")) {
        const auto& k = j.at("kernel");
        c.kernel.N = k.value("N", c.kernel.N);
        c.kernel.tol = k.value("tol", c.kernel.tol);
        c.kernel.max_iter = k.value("max_iter", c.kernel.max_iter);
        c.kernel.parallel = k.value("parallel", c.kernel.parallel);
        const std::string art = k.value("artificial", std::string("constant"));
        if (art == "constant")
            c.kernel.artificial = ArtificialKind::Constant;
        else if (art == "zero")
            c.kernel.artificial = ArtificialKind::Zero;
        else if (art == "closed-form")
            c.kernel.artificial = ArtificialKind::ClosedForm;
        else
            throw ValidationError("config-artificial", "artificial must be constant | zero | closed-form");
    }
    if (c.kernel.N < 2) throw ValidationError("config-kernel", "kernel.N must be at least 2");
    if (!(c.kernel.tol > 0.0)) throw ValidationError("config-kernel", "kernel.tol must be positive");
    if (c.kernel.artificial == ArtificialKind::ClosedForm && (n != 0 || m != 2))
        throw ValidationError("config-artificial", "the closed-form trace exists only for n = 0, m = 2");

    if (j.contains("simulation")) {
        const auto& s = j.at("simulation");
        c.simulation.Nx = s.value("Nx", c.simulation.Nx);
        c.simulation.cfl = s.value("cfl", c.simulation.cfl);
        c.simulation.scheme = detail::scheme_from(s.value("scheme", std::string("upwind1")));
        c.simulation.sample_stride = s.value("sample_stride", c.simulation.sample_stride);
        if (s.contains("t_end")) {
            const auto& t = s.at("t_end");
            if (t.is_number()) {
                c.simulation.t_end_multiple = t.get<double>();
                c.simulation.t_end_of = "absolute";
            } else {
                c.simulation.t_end_multiple = t.value("multiple", 1.1);
                c.simulation.t_end_of = t.value("of", std::string("t_F"));
            }
        }
        if (s.contains("snapshot_dt")) c.simulation.snapshot_dt = s.at("snapshot_dt").get<double>();
    }
    if (c.simulation.Nx < 16) throw ValidationError("config-simulation", "simulation.Nx must be at least 16");
    if (!(c.simulation.cfl > 0.0 && c.simulation.cfl <= 1.0))
        throw ValidationError("config-simulation", "simulation.cfl must lie in (0, 1]");
    if (c.simulation.sample_stride < 1) throw ValidationError("config-simulation", "sample_stride must be positive");
    const auto& of = c.simulation.t_end_of;
    if (of != "t_F" && of != "t_M" && of != "absolute")
        throw ValidationError("config-simulation", "t_end.of must be t_F, t_M or absolute");
    if (of == "t_F" && n == 0) throw ValidationError("config-simulation", "t_F is undefined without u-states");
    if (!(c.simulation.t_end_multiple > 0.0)) throw ValidationError("config-simulation", "t_end must be positive");

    c.scenario = scenario_from(j.value("scenario", std::string("state-feedback")));
    if (j.contains("initial"))
        c.initial = detail::read_functions(j.at("initial"), n + m, "initial");
    else
        for (int r = 0; r < n + m; ++r)
            c.initial.push_back({{Primitive::sinusoid(1.0, 0.5 * (r + 1)), Primitive::polynomial({0.0, 0.5})}});
    if (j.contains("observer_initial")) c.observer_initial = detail::read_functions(j.at("observer_initial"), n + m, "observer_initial");
    c.observer_boundary_input = j.value("observer_boundary_input", c.observer_boundary_input);
    if (c.observer_boundary_input != "control")
        throw ValidationError("config-observer-boundary", "observer_boundary_input must be \"control\"");
    if (c.scenario == Scenario::Tracking) {
        if (!j.contains("reference")) throw ValidationError("config-missing-block", "tracking needs a reference block");
        if (n != 0) throw ValidationError("config-tracking", "tracking is implemented for n = 0 only");
        c.reference = detail::read_functions(j.at("reference"), m, "reference");
    }
    if (j.contains("output")) {
        c.output.dir = j.at("output").value("dir", c.output.dir);
        c.output.svg = j.at("output").value("svg", c.output.svg);
    }
    c.hash = fnv1a_hex(j.dump());
    return c;
}

[[nodiscard]] inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config-io", "cannot open " + path.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ValidationError("config-syntax", e.what());
    }
    return parse_config(j);
}

[[nodiscard]] inline double resolve_t_end(const ExperimentConfig& c) {
    const Horizons h = horizons(c.system);
    if (c.simulation.t_end_of == "absolute") return c.simulation.t_end_multiple;
    if (c.simulation.t_end_of == "t_M") return c.simulation.t_end_multiple * h.t_M;
    return c.simulation.t_end_multiple * h.t_F.value();
}

[[nodiscard]] inline TwoStateParameters two_state_of(const HyperbolicSystem& s) {
    return {s.mu(0), s.mu(1), s.sigma_mm(0, 1), s.sigma_mm(1, 0)};
}

[[nodiscard]] inline ArtificialBoundary artificial_boundary(const ExperimentConfig& c) {
    switch (c.kernel.artificial) {
        case ArtificialKind::Constant: return ArtificialBoundary(c.system.m);
        case ArtificialKind::Zero: return ArtificialBoundary::zero(c.system.m);
        case ArtificialKind::ClosedForm: {
            const TwoStateParameters p = two_state_of(c.system);
            ArtificialBoundary a(2);
            const ClosedFormVariant v = resolve_closed_form_variant(p).variant;
            a.set(1, 0, [p, v](double xi) { return closed_form_2x2(p, 1.0, xi, v)[2]; });
            return a;
        }
    }
    return ArtificialBoundary(c.system.m);
}

[[nodiscard]] inline FieldState sample_profiles(const std::vector<ScalarFunction>& f, int n, int m, const Grid1D& g) {
    if (f.empty()) return FieldState::zeros(n, m, g);
    return FieldState::sample(n, m, g, [&](int r, double x) { return f[static_cast<std::size_t>(r)](x); });
}

// ---------------------------------------------------------------------------------------------
// Output files

/// Header comments embedded in every file written for a config.
[[nodiscard]] inline std::vector<std::string> provenance(const ExperimentConfig& c) {
    std::vector<std::string> lines{"config_hash " + c.hash, "experiment " + c.name};
    if (c.scenario == Scenario::Observer || c.scenario == Scenario::OutputFeedback)
        lines.push_back("observer_boundary_input " + c.observer_boundary_input);
    return lines;
}

/**
 * One kernel field as text: a header line "i j kind N" (1-based indices), then the node values
 * in row-major (a, b <= a) order, one row of the triangle per line, 17 significant digits.
 */
inline void write_kernel_field(std::ostream& os, int i, int j, const std::string& kind, const KernelField& f) {
    const int N = f.grid().N;
    os << i + 1 << ' ' << j + 1 << ' ' << kind << ' ' << N << '\n';
    os << std::setprecision(17);
    for (int a = 0; a <= N; ++a) {
        for (int b = 0; b <= a; ++b) os << (b ? " " : "") << f.at(a, b);
        os << '\n';
    }
}

struct DumpedField {
    int i = 0, j = 0;
    std::string kind;
    int N = 0;
    std::vector<double> values;  ///< row-major (a, b <= a)
};

/// Reads back what write_kernel_field produced; lines starting with '#' are skipped.
[[nodiscard]] inline std::vector<DumpedField> read_kernel_dump(std::istream& is) {
    std::vector<DumpedField> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        DumpedField d;
        std::istringstream hs(line);
        if (!(hs >> d.i >> d.j >> d.kind >> d.N)) throw ValidationError("dump-format", "bad field header: " + line);
        --d.i;
        --d.j;
        const std::size_t count = static_cast<std::size_t>(d.N + 1) * (d.N + 2) / 2;
        d.values.reserve(count);
        while (d.values.size() < count && std::getline(is, line)) {
            std::istringstream vs(line);
            double v;
            while (vs >> v) d.values.push_back(v);
        }
        if (d.values.size() != count) throw ValidationError("dump-format", "truncated field " + d.kind);
        out.push_back(std::move(d));
    }
    return out;
}

/// Snapshot table with columns x, u_1.., v_1...
inline void write_snapshot_csv(std::ostream& os, const FieldState& s, const std::vector<std::string>& comments = {}) {
    for (const auto& c : comments) os << "# " << c << '\n';
    os << "# t " << std::setprecision(10) << s.t << '\n';
    const int n = static_cast<int>(s.u.rows()), m = static_cast<int>(s.v.rows());
    const int cols = static_cast<int>(n ? s.u.cols() : s.v.cols());
    os << 'x';
    for (int i = 0; i < n; ++i) os << ",u_" << i + 1;
    for (int i = 0; i < m; ++i) os << ",v_" << i + 1;
    os << '\n';
    for (int k = 0; k < cols; ++k) {
        os << static_cast<double>(k) / (cols - 1);
        for (int i = 0; i < n; ++i) os << ',' << s.u(i, k);
        for (int i = 0; i < m; ++i) os << ',' << s.v(i, k);
        os << '\n';
    }
}

struct ChartSeries {
    std::string label;
    std::vector<double> x, y;
};

/// Minimal SVG line chart; `log_y` plots log10 of positive values.
[[nodiscard]] inline std::string svg_line_chart(const std::string& title, const std::vector<ChartSeries>& series,
                                                bool log_y = false, const std::string& comment = {}) {
    const double W = 640, H = 400, pad = 50;
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    auto fy = [&](double y) { return log_y ? std::log10(std::max(y, 1e-300)) : y; };
    for (const auto& s : series)
        for (std::size_t k = 0; k < s.x.size(); ++k) {
            x0 = std::min(x0, s.x[k]);
            x1 = std::max(x1, s.x[k]);
            y0 = std::min(y0, fy(s.y[k]));
            y1 = std::max(y1, fy(s.y[k]));
        }
    if (!(x1 > x0)) x1 = x0 + 1.0;
    if (!(y1 > y0)) y1 = y0 + 1.0;
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    std::ostringstream os;
    os << std::setprecision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    if (!comment.empty()) os << "<!-- " << comment << " -->\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\">" << title << "</text>\n";
    os << "<rect x=\"" << pad << "\" y=\"" << pad << "\" width=\"" << W - 2 * pad << "\" height=\"" << H - 2 * pad
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<text x=\"" << pad << "\" y=\"" << H - pad + 15 << "\" font-size=\"10\">" << x0 << "</text>\n";
    os << "<text x=\"" << W - pad << "\" y=\"" << H - pad + 15 << "\" font-size=\"10\" text-anchor=\"end\">" << x1
       << "</text>\n";
    os << "<text x=\"" << pad - 4 << "\" y=\"" << H - pad << "\" font-size=\"10\" text-anchor=\"end\">"
       << (log_y ? "1e" : "") << y0 << "</text>\n";
    os << "<text x=\"" << pad - 4 << "\" y=\"" << pad + 8 << "\" font-size=\"10\" text-anchor=\"end\">"
       << (log_y ? "1e" : "") << y1 << "</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        const auto& ser = series[s];
        os << "<polyline fill=\"none\" stroke=\"" << colors[s % 6] << "\" points=\"";
        for (std::size_t k = 0; k < ser.x.size(); ++k) {
            const double px = pad + (ser.x[k] - x0) / (x1 - x0) * (W - 2 * pad);
            const double py = H - pad - (fy(ser.y[k]) - y0) / (y1 - y0) * (H - 2 * pad);
            os << px << ',' << py << ' ';
        }
        os << "\"/>\n";
        os << "<text x=\"" << W - pad - 5 << "\" y=\"" << pad + 15 + 14 * s << "\" font-size=\"11\" text-anchor=\"end\" fill=\""
           << colors[s % 6] << "\">" << ser.label << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

// ---------------------------------------------------------------------------------------------
// Running scenarios

struct ScenarioResult {
    TimeSeries series;
    double t_end = 0.0;
    std::string ratio_label;  ///< what `ratio` measures
    double ratio = 0.0;
    std::string ratio_column;
};

/// Final-to-running-maximum (or final-to-initial) ratio reported by `simulate`.
[[nodiscard]] inline double norm_ratio(const TimeSeries& ts, const std::string& col, bool vs_initial) {
    const auto& c = ts.column(col);
    const double ref = vs_initial ? c.front() : ts.running_max(col, ts.t().back());
    return ref > 0.0 ? c.back() / ref : 0.0;
}

/**
 * Runs the configured scenario. Kernels are solved here unless supplied; observer scenarios
 * solve the observer kernels as well.
 */
[[nodiscard]] inline ScenarioResult run_scenario(const ExperimentConfig& c, const ControllerKernels* supplied = nullptr) {
    const auto& sys = c.system;
    const Grid1D g(c.simulation.Nx);
    const SimOptions opts = c.sim_options();
    ScenarioResult r;
    r.t_end = resolve_t_end(c);
    const FieldState init = sample_profiles(c.initial, sys.n, sys.m, g);

    std::optional<ControllerKernels> own;
    auto kernels = [&]() -> const ControllerKernels& {
        if (supplied) return *supplied;
        if (!own) {
            const bool need_c = c.scenario == Scenario::TargetSystem;
            own = synthesize_controller(sys, TriangularGrid(c.kernel.N), artificial_boundary(c), c.picard_options(), need_c);
        }
        return *own;
    };

    switch (c.scenario) {
        case Scenario::OpenLoop:
            r.series = run_plant(sys, nullptr, init, r.t_end, opts);
            r.ratio_label = "final/initial L2";
            r.ratio_column = "norm_L2";
            r.ratio = norm_ratio(r.series, r.ratio_column, true);
            break;
        case Scenario::StateFeedback:
            r.series = run_closed_loop(sys, kernels(), init, r.t_end, opts);
            r.ratio_label = "final/running-max L2";
            r.ratio_column = "norm_L2";
            r.ratio = norm_ratio(r.series, r.ratio_column, false);
            break;
        case Scenario::Observer:
        case Scenario::OutputFeedback: {
            const ObserverKernels ok = solve_observer_kernels(sys, TriangularGrid(c.kernel.N), c.picard_options());
            const FieldState est = sample_profiles(c.observer_initial, sys.n, sys.m, g);
            const bool output = c.scenario == Scenario::OutputFeedback;
            r.series = run_observer(sys, ok, kernels(), init, est,
                                    output ? ObserverMode::OutputFeedback : ObserverMode::StateFeedbackPlant, r.t_end, opts);
            r.ratio_label = output ? "final/running-max plant+observer L2" : "final/initial estimation error L2";
            r.ratio_column = output ? "total_L2" : "err_L2";
            r.ratio = norm_ratio(r.series, r.ratio_column, !output);
            break;
        }
        case Scenario::TargetSystem: {
            const auto& ck = kernels();
            const BacksteppingTransform T(ck, g.Nx);
            const FieldState plant = FieldState::unstack(0.0, T.inverse(init.stacked()), sys.n);
            r.series = run_target_system(sys, ck, init, r.t_end, opts, &plant);
            r.ratio_label = "final/running-max target L2";
            r.ratio_column = "norm_L2_v";
            r.ratio = norm_ratio(r.series, r.ratio_column, false);
            break;
        }
        case Scenario::Tracking: {
            ReferenceTrajectory phi{c.reference, "config reference"};
            r.series = run_tracking(sys, kernels(), phi, init, r.t_end, opts);
            const double t0 = 1.1 * horizons(sys).t_M;
            r.ratio_label = "tracking RMS after 1.1 t_M";
            r.ratio_column = "track_err";
            r.ratio = r.series.rms("track_err", t0, r.t_end);
            break;
        }
    }
    return r;
}

}  // namespace backstep
