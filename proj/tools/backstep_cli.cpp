#include <backstep/acceptance.hpp>
#include <backstep/experiment.hpp>

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace backstep;

namespace {

enum ExitCode { kOk = 0, kValidation = 1, kNonConvergence = 2, kAcceptance = 3 };

/// Files produced by one command, kept in memory so a determinism probe can compare them.
using FileSet = std::map<std::string, std::string>;

void write_files(const fs::path& dir, const FileSet& files) {
    fs::create_directories(dir);
    for (const auto& [name, body] : files) {
        std::ofstream out(dir / name, std::ios::binary);
        out << body;
    }
}

/// Re-runs `make` and reports whether every file comes out byte-identical.
template <class F>
bool same_twice(const FileSet& first, F&& make) {
    const FileSet second = make();
    if (second.size() != first.size()) return false;
    for (const auto& [name, body] : first) {
        auto it = second.find(name);
        if (it == second.end() || it->second != body) {
            std::cout << "determinism: " << name << " differs between runs\n";
            return false;
        }
    }
    return true;
}

std::string comment_block(const ExperimentConfig& c, const std::string& prefix = "# ") {
    std::string s;
    for (const auto& line : provenance(c)) s += prefix + line + "\n";
    return s;
}

std::string trace_csv(const ExperimentConfig& c, const ControllerKernels& ck) {
    const auto& kp = ck.kernels;
    const int n = kp.sys.n, m = kp.sys.m, N = kp.grid.N;
    std::ostringstream os;
    os << comment_block(c) << "s";
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) os << ",K" << i + 1 << j + 1 << "(1;s)";
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) os << ",L" << i + 1 << j + 1 << "(1;s)";
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) os << ",L" << i + 1 << j + 1 << "(s;0)";
    os << '\n' << std::setprecision(12);
    for (int b = 0; b <= N; ++b) {
        os << kp.grid.coord(b);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) os << ',' << kp.k(i, j).at(N, b);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) os << ',' << kp.l(i, j).at(N, b);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) os << ',' << kp.l(i, j).at(b, 0);
        os << '\n';
    }
    return os.str();
}

std::string report_text(const ExperimentConfig& c, const std::string& what, const PicardReport& rep) {
    std::ostringstream os;
    os << comment_block(c) << "kernels " << what << "\nconverged " << (rep.converged ? "yes" : "no")
       << "\niterations " << rep.iterations << "\nresidual " << std::setprecision(6) << rep.residual << "\nincrements";
    for (double v : rep.increments) os << ' ' << v;
    os << '\n';
    return os.str();
}

FileSet kernel_files(const ExperimentConfig& c) {
    FileSet files;
    const ControllerKernels ck = synthesize_controller(c.system, TriangularGrid(c.kernel.N), artificial_boundary(c),
                                                       c.picard_options(), false);
    const auto& kp = ck.kernels;
    std::ostringstream dump;
    dump << comment_block(c);
    for (int i = 0; i < kp.sys.m; ++i)
        for (int j = 0; j < kp.sys.n; ++j) write_kernel_field(dump, i, j, "K", kp.k(i, j));
    for (int i = 0; i < kp.sys.m; ++i)
        for (int j = 0; j < kp.sys.m; ++j) write_kernel_field(dump, i, j, "L", kp.l(i, j));
    files["controller_kernels.txt"] = dump.str();
    files["controller_report.txt"] = report_text(c, "controller", ck.report);
    files["controller_traces.csv"] = trace_csv(c, ck);

    if (c.output.svg) {
        std::vector<ChartSeries> s;
        const int N = kp.grid.N;
        for (int i = 0; i < kp.sys.m; ++i)
            for (int j = 0; j < kp.sys.m; ++j) {
                ChartSeries a{"L" + std::to_string(i + 1) + std::to_string(j + 1) + "(1,s)", {}, {}};
                for (int b = 0; b <= N; ++b) {
                    a.x.push_back(kp.grid.coord(b));
                    a.y.push_back(kp.l(i, j).at(N, b));
                }
                s.push_back(std::move(a));
            }
        files["controller_traces.svg"] = svg_line_chart(c.name + ": L(1, s)", s, false, "config_hash " + c.hash);
    }

    if (c.scenario == Scenario::Observer || c.scenario == Scenario::OutputFeedback) {
        const ObserverKernels ok = solve_observer_kernels(c.system, TriangularGrid(c.kernel.N), c.picard_options());
        std::ostringstream od;
        od << comment_block(c);
        for (int i = 0; i < c.system.n; ++i)
            for (int j = 0; j < c.system.m; ++j) write_kernel_field(od, i, j, "M", ok.m_(i, j));
        for (int i = 0; i < c.system.m; ++i)
            for (int j = 0; j < c.system.m; ++j) write_kernel_field(od, i, j, "N", ok.n_(i, j));
        files["observer_kernels.txt"] = od.str();
        files["observer_report.txt"] = report_text(c, "observer", ok.report);
    }
    return files;
}

void print_horizons(const HyperbolicSystem& sys) {
    const Horizons h = horizons(sys);
    if (h.t_F) std::cout << "t_F = " << *h.t_F << "\n";
    std::cout << "t_M = " << h.t_M << "\n";
}

struct SimulationOutput {
    FileSet files;
    ScenarioResult result;
};

SimulationOutput simulation_files(const ExperimentConfig& c) {
    SimulationOutput out;
    out.result = run_scenario(c);
    const auto& ts = out.result.series;
    std::ostringstream csv;
    auto comments = provenance(c);
    comments.push_back("scenario " + to_string(c.scenario));
    ts.write_csv(csv, comments);
    out.files["timeseries.csv"] = csv.str();
    int k = 0;
    for (const auto& snap : ts.snapshots()) {
        std::ostringstream s;
        write_snapshot_csv(s, snap, provenance(c));
        std::ostringstream name;
        name << "snapshot_" << std::setw(4) << std::setfill('0') << k++ << ".csv";
        out.files[name.str()] = s.str();
    }
    if (c.output.svg) {
        std::vector<ChartSeries> s;
        for (const auto& col : ts.columns()) {
            if (col.rfind("norm_L2", 0) != 0 && col != "err_L2" && col != "track_err") continue;
            s.push_back({col, ts.t(), ts.column(col)});
        }
        out.files["norms.svg"] = svg_line_chart(c.name + ": " + to_string(c.scenario), s, true, "config_hash " + c.hash);
    }
    return out;
}

int run_kernels(const std::string& config, const std::string& out_dir, bool seed_check) {
    const ExperimentConfig c = load_config(config);
    print_horizons(c.system);
    const FileSet files = kernel_files(c);
    const fs::path dir = out_dir.empty() ? fs::path(c.output.dir) : fs::path(out_dir);
    write_files(dir, files);
    std::cout << files.at("controller_report.txt");
    std::cout << "wrote " << files.size() << " files to " << dir.string() << "\n";
    if (seed_check) {
        const bool same = same_twice(files, [&] { return kernel_files(c); });
        std::cout << "determinism: " << (same ? "identical" : "DIFFERENT") << "\n";
        if (!same) return kAcceptance;
    }
    return kOk;
}

int run_simulate(const std::string& config, const std::string& out_dir, bool seed_check, bool tracking_only) {
    ExperimentConfig c = load_config(config);
    if (tracking_only && c.scenario != Scenario::Tracking)
        throw ValidationError("config-scenario", "track needs scenario \"tracking\", got " + to_string(c.scenario));
    print_horizons(c.system);
    const SimulationOutput out = simulation_files(c);
    const fs::path dir = out_dir.empty() ? fs::path(c.output.dir) : fs::path(out_dir);
    write_files(dir, out.files);
    const auto& r = out.result;
    std::cout << "scenario " << to_string(c.scenario) << ", t_end = " << r.t_end << ", samples " << r.series.size()
              << "\n";
    std::cout << r.ratio_label << " (" << r.ratio_column << ") = " << r.ratio << "\n";
    if (c.scenario == Scenario::OpenLoop)
        std::cout << (r.ratio > 1.0 ? "open loop grows" : "open loop does not grow") << "\n";
    std::cout << "wrote " << out.files.size() << " files to " << dir.string() << "\n";
    if (seed_check) {
        const bool same = same_twice(out.files, [&] { return simulation_files(c).files; });
        std::cout << "determinism: " << (same ? "identical" : "DIFFERENT") << "\n";
        if (!same) return kAcceptance;
    }
    return kOk;
}

int run_verify(const std::string& config, const std::string& out_dir, const std::vector<int>& only) {
    acceptance::Settings s;
    std::string hash = "defaults";
    if (!config.empty()) {
        std::ifstream in(config);
        if (!in) throw ValidationError("config-io", "cannot open " + config);
        Json j;
        try {
            j = Json::parse(in);
        } catch (const Json::parse_error& e) {
            throw ValidationError("config-syntax", e.what());
        }
        hash = fnv1a_hex(j.dump());
        if (j.contains("verify")) {
            const auto& v = j.at("verify");
            s.N = v.value("N", s.N);
            s.N_fine = v.value("N_fine", s.N_fine);
            s.Nx = v.value("Nx", s.Nx);
            s.Nx_fine = v.value("Nx_fine", s.Nx_fine);
            s.seed = v.value("seed", s.seed);
        }
    }
    acceptance::Suite suite(s);
    const auto& res = suite.resolution();
    std::cout << "closed-form variant " << to_string(res.variant) << " (pde residual printed " << res.residual_printed
              << ", swapped " << res.residual_swapped << ")\n";

    std::vector<int> ids = only;
    if (ids.empty())
        for (const auto& c : acceptance::catalogue()) ids.push_back(c.id);
    std::ostringstream report;
    report << "# config_hash " << hash << "\n";
    int failed = 0;
    for (int id : ids) {
        const auto r = suite.run_guarded(id);
        std::cout << r.line() << std::endl;
        report << r.line() << "\n";
        if (!r.pass()) ++failed;
    }
    std::cout << (ids.size() - failed) << "/" << ids.size() << " criteria passed\n";
    if (!out_dir.empty()) write_files(out_dir, {{"verify_report.txt", report.str()}});
    return failed ? kAcceptance : kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Backstepping kernels, closed-loop simulation and verification for coupled hyperbolic systems"};
    app.require_subcommand(1);
    std::string config, out_dir;
    bool seed_check = false;
    std::vector<int> only;

    auto* kernels = app.add_subcommand("kernels", "solve kernels and write dumps, traces and a convergence report");
    auto* simulate = app.add_subcommand("simulate", "run the configured scenario and write the time series");
    auto* track = app.add_subcommand("track", "run a tracking scenario (motion planning)");
    auto* verify = app.add_subcommand("verify", "run the acceptance suite");
    for (auto* sc : {kernels, simulate, track}) {
        sc->add_option("--config", config, "experiment JSON file")->required()->check(CLI::ExistingFile);
        sc->add_option("--out", out_dir, "output directory (overrides output.dir)");
        sc->add_flag("--seed-check", seed_check, "repeat the run and require byte-identical outputs");
    }
    verify->add_option("--config", config, "optional JSON with a verify block (N, N_fine, Nx, Nx_fine, seed)")
        ->check(CLI::ExistingFile);
    verify->add_option("--out", out_dir, "directory for verify_report.txt");
    verify->add_option("--only", only, "criterion ids to run")->check(CLI::Range(1, 9));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    try {
        if (*kernels) return run_kernels(config, out_dir, seed_check);
        if (*simulate) return run_simulate(config, out_dir, seed_check, false);
        if (*track) return run_simulate(config, out_dir, seed_check, true);
        if (*verify) return run_verify(config, out_dir, only);
    } catch (const ValidationError& e) {
        std::cerr << "validation failed: " << e.what() << "\n";
        return kValidation;
    } catch (const ConvergenceError& e) {
        std::cerr << "no convergence: " << e.what() << " (last increment "
                  << (e.report().increments.empty() ? 0.0 : e.report().increments.back()) << ")\n";
        return kNonConvergence;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kValidation;
    } catch (const std::logic_error& e) {
        std::cerr << "unsupported: " << e.what() << "\n";
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidation;
    }
    return kOk;
}
