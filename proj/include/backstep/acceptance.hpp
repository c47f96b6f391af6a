#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bound.hpp"
#include "closed_form.hpp"
#include "controller.hpp"
#include "diagnostics.hpp"
#include "motion_planner.hpp"
#include "observer.hpp"
#include "reference_systems.hpp"
#include "simulator.hpp"
#include "transform.hpp"

namespace backstep::acceptance {

/// One measured quantity compared against a fixed threshold.
struct Check {
    std::string label;
    double measured = 0.0;
    double threshold = 0.0;
    bool at_least = false;  ///< pass when measured >= threshold instead of <=

    [[nodiscard]] bool pass() const {
        if (!std::isfinite(measured)) return false;
        return at_least ? measured >= threshold : measured <= threshold;
    }

    /// How close the check is to failing; above 1 means failed.
    [[nodiscard]] double load() const {
        if (!std::isfinite(measured)) return std::numeric_limits<double>::infinity();
        if (at_least) return measured > 0.0 ? threshold / measured : std::numeric_limits<double>::infinity();
        return threshold > 0.0 ? measured / threshold : (measured > 0.0 ? 1e300 : 0.0);
    }
};

struct CriterionResult {
    int id = 0;
    std::string name;
    std::vector<Check> checks;
    std::string note;
    double seconds = 0.0;

    [[nodiscard]] bool pass() const {
        if (checks.empty()) return false;
        for (const auto& c : checks)
            if (!c.pass()) return false;
        return true;
    }

    /// The check with the largest load, which decides the headline numbers.
    [[nodiscard]] const Check& binding() const {
        return *std::max_element(checks.begin(), checks.end(),
                                 [](const Check& a, const Check& b) { return a.load() < b.load(); });
    }

    /// id | name | measured | threshold | PASS/FAIL | every check | note
    [[nodiscard]] std::string line() const {
        std::ostringstream os;
        os.precision(4);
        const Check& b = binding();
        os << "criterion " << id << " | " << name << " | measured " << b.measured << " | threshold "
           << (b.at_least ? ">= " : "<= ") << b.threshold << " | " << (pass() ? "PASS" : "FAIL") << " | ";
        for (std::size_t k = 0; k < checks.size(); ++k) {
            const auto& c = checks[k];
            os << (k ? "; " : "") << c.label << '=' << c.measured << (c.at_least ? ">=" : "<=") << c.threshold
               << (c.pass() ? "" : " (fail)");
        }
        if (!note.empty()) os << " | " << note;
        os.precision(3);
        os << " | " << std::fixed << seconds << " s";
        return os.str();
    }
};

/// Resolutions and seed. Defaults follow the acceptance text: N = 200/400 and Nx = 200/400.
struct Settings {
    int N = 200;
    int N_fine = 400;
    int Nx = 200;
    int Nx_fine = 400;
    unsigned seed = 20240601;
};

/// Thresholds fixed by the acceptance text, plus the calibrated constants.
namespace limits {
inline constexpr double oracle_coarse = 2e-2;
inline constexpr double oracle_fine = 1e-2;
inline constexpr double oracle_band_cells = 2.0;
inline constexpr double oracle_seconds = 60.0;
inline constexpr double bc_coarse = 1e-2;
inline constexpr double bc_halving_lo = 0.5 * 0.75;
inline constexpr double bc_halving_hi = 0.5 * 1.25;
inline constexpr double bc_exact = 1e-12;
inline constexpr double bound_ratio = 1.0 + 1e-12;
inline constexpr double decay_fraction = 0.05;
inline constexpr double refinement_gain = 1.5;
inline constexpr double stabilization_seconds = 120.0;
inline constexpr double tracking_fraction = 0.02;
inline constexpr double roundtrip_C_hetero = 8.0;     ///< twice the N = 50 value of err / Delta^2
inline constexpr double roundtrip_C_two_state = 4000.0;
inline constexpr double cascade_C = 2.0;              ///< |beta| <= C dx after the horizons
inline constexpr double consistency_C = 8.0;          ///< |T[plant] - target| <= C dx
inline constexpr double cascade_margin = 0.05;        ///< relative wait past each horizon for scheme smear
inline constexpr int picard_iterations = 60;
inline constexpr double min_steepening = 1e-6;  ///< late minus early log10 decay rate; zero is plain geometric decay
}  // namespace limits

struct Criterion {
    int id;
    const char* name;
};

inline const std::vector<Criterion>& catalogue() {
    static const std::vector<Criterion> c{
        {1, "bessel_oracle"},          {2, "boundary_residuals"}, {3, "theoretical_bound"},
        {4, "finite_time_stabilization"}, {5, "observer_decay"},  {6, "motion_planning"},
        {7, "transform_round_trip"},   {8, "target_cascade"},     {9, "picard_envelope"},
    };
    return c;
}

/**
 * Runs the acceptance criteria with kernel solutions shared between them. Kernels are solved on
 * first use and kept for the lifetime of the suite.
 */
class Suite {
public:
    explicit Suite(Settings s = {}) : s_(s), p_(reference::two_state_parameters()) {
        resolution_ = resolve_closed_form_variant(p_);
        art53_ = reference::two_state_artificial(p_, resolution_.variant);
    }

    [[nodiscard]] const Settings& settings() const { return s_; }
    [[nodiscard]] const ClosedFormResolution& resolution() const { return resolution_; }

    CriterionResult run(int id) {
        const auto t0 = Clock::now();
        CriterionResult r;
        r.id = id;
        for (const auto& c : catalogue())
            if (c.id == id) r.name = c.name;
        if (r.name.empty()) throw ParameterError("unknown acceptance criterion " + std::to_string(id));
        switch (id) {
            case 1: oracle(r); break;
            case 2: residuals(r); break;
            case 3: bound(r); break;
            case 4: stabilization(r); break;
            case 5: observer(r); break;
            case 6: tracking(r); break;
            case 7: round_trip(r); break;
            case 8: cascade(r); break;
            case 9: envelope(r); break;
        }
        r.seconds = seconds_since(t0);
        return r;
    }

    /// run() with any exception turned into a failed criterion carrying the message.
    CriterionResult run_guarded(int id) {
        const auto t0 = Clock::now();
        try {
            return run(id);
        } catch (const std::exception& e) {
            CriterionResult r;
            r.id = id;
            for (const auto& c : catalogue())
                if (c.id == id) r.name = c.name;
            r.checks.push_back({"completed", 0.0, 1.0, true});
            r.note = std::string("raised: ") + e.what();
            r.seconds = seconds_since(t0);
            return r;
        }
    }

private:
    using Clock = std::chrono::steady_clock;

    static double seconds_since(Clock::time_point t0) {
        return std::chrono::duration<double>(Clock::now() - t0).count();
    }

    struct Timed {
        ControllerKernels ck;
        double seconds = 0.0;
        bool has_c = false;
    };

    Timed& controller(std::map<int, Timed>& cache, const HyperbolicSystem& sys, const ArtificialBoundary& art, int N,
                      bool need_c) {
        auto it = cache.find(N);
        if (it == cache.end()) {
            const auto t0 = Clock::now();
            Timed t;
            t.ck = synthesize_controller(sys, TriangularGrid(N), art, {}, false);
            t.seconds = seconds_since(t0);
            it = cache.emplace(N, std::move(t)).first;
        }
        if (need_c && !it->second.has_c) {
            auto c = solve_C_kernels(it->second.ck.kernels);
            it->second.ck.c_plus = std::move(c.c_plus);
            it->second.ck.c_minus = std::move(c.c_minus);
            it->second.ck.c_report = c.report;
            it->second.has_c = true;
        }
        return it->second;
    }

    Timed& hetero(int N, bool need_c = false) {
        return controller(het_, reference::heterodirectional(), ArtificialBoundary(2), N, need_c);
    }
    Timed& two_state(int N, bool need_c = false) {
        return controller(two_, reference::two_state(p_), art53_, N, need_c);
    }

    const ObserverKernels& observer_kernels(std::map<int, ObserverKernels>& cache, const HyperbolicSystem& sys, int N) {
        auto it = cache.find(N);
        if (it == cache.end()) it = cache.emplace(N, solve_observer_kernels(sys, TriangularGrid(N))).first;
        return it->second;
    }

    // ---------------------------------------------------------------------------------------------

    void oracle(CriterionResult& r) {
        for (int N : {s_.N, s_.N_fine}) {
            Timed& t = two_state(N);
            const double err = closed_form_error(t.ck.kernels, p_, resolution_.variant, limits::oracle_band_cells / N);
            const std::string tag = "N" + std::to_string(N);
            r.checks.push_back({"err_" + tag, err, N == s_.N ? limits::oracle_coarse : limits::oracle_fine});
            r.checks.push_back({"seconds_" + tag, t.seconds, limits::oracle_seconds});
        }
        std::ostringstream os;
        os.precision(3);
        os << "closed-form variant " << to_string(resolution_.variant) << " (pde residual printed "
           << resolution_.residual_printed << ", swapped " << resolution_.residual_swapped << ")";
        r.note = os.str();
    }

    void residual_checks(CriterionResult& r, const std::string& tag, double coarse, double fine) {
        r.checks.push_back({tag + "_N" + std::to_string(s_.N), coarse, limits::bc_coarse});
        if (coarse <= limits::bc_exact && fine <= limits::bc_exact) {
            r.checks.push_back({tag + "_exact", std::max(coarse, fine), limits::bc_exact});
            return;
        }
        const double ratio = coarse > 0.0 ? fine / coarse : std::numeric_limits<double>::infinity();
        r.checks.push_back({tag + "_ratio_lo", ratio, limits::bc_halving_lo, true});
        r.checks.push_back({tag + "_ratio_hi", ratio, limits::bc_halving_hi});
    }

    void residuals(CriterionResult& r) {
        const auto het = reference::heterodirectional();
        const auto two = reference::two_state(p_);
        residual_checks(r, "hetero_ctl", controller_residuals(hetero(s_.N).ck.kernels, ArtificialBoundary(2)).max(),
                        controller_residuals(hetero(s_.N_fine).ck.kernels, ArtificialBoundary(2)).max());
        residual_checks(r, "two_state_ctl", controller_residuals(two_state(s_.N).ck.kernels, art53_).max(),
                        controller_residuals(two_state(s_.N_fine).ck.kernels, art53_).max());
        residual_checks(r, "hetero_obs", observer_residuals(observer_kernels(het_obs_, het, s_.N)).max(),
                        observer_residuals(observer_kernels(het_obs_, het, s_.N_fine)).max());
        residual_checks(r, "two_state_obs", observer_residuals(observer_kernels(two_obs_, two, s_.N)).max(),
                        observer_residuals(observer_kernels(two_obs_, two, s_.N_fine)).max());
        r.note = "boundary data enter as characteristic end values; exact residuals make the halving clause moot";
    }

    void bound(CriterionResult& r) {
        r.checks.push_back({"hetero", bound_ratio(hetero(s_.N).ck.kernels,
                                                  theoretical_bound(reference::heterodirectional(), ArtificialBoundary(2))),
                            limits::bound_ratio});
        r.checks.push_back({"two_state", bound_ratio(two_state(s_.N).ck.kernels,
                                                     theoretical_bound(reference::two_state(p_), art53_)),
                            limits::bound_ratio});
        std::mt19937 gen(s_.seed);
        for (int k = 1; k <= 3; ++k) {
            const auto sys = reference::random_coupling(gen);
            const ArtificialBoundary art(sys.m);
            auto [kp, rep] = picard_solve_controller(sys, TriangularGrid(s_.N), art);
            r.checks.push_back({"random_" + std::to_string(k), bound_ratio(kp, theoretical_bound(sys, art)),
                                limits::bound_ratio});
        }
        r.note = "max |kernel| / bound over all nodes; equality sits at the origin, where the bound is the largest boundary datum";
    }

    static FieldState plant_initial(const Grid1D& g) {
        return FieldState::sample(1, 2, g, [](int r, double x) { return std::sin(std::numbers::pi * x * (r + 1)) + 0.5 * x; });
    }

    void stabilization(CriterionResult& r) {
        const auto sys = reference::heterodirectional();
        const double T = 1.1 * horizons(sys).t_F.value();
        Timed& t = hetero(s_.N);
        double elapsed = t.seconds;
        const auto t0 = Clock::now();

        SimOptions fine;
        fine.Nx = s_.Nx_fine;
        const auto open = run_plant(sys, nullptr, plant_initial(Grid1D(fine.Nx)), T, fine);
        const double growth = open.at("norm_L2", T) / open.column("norm_L2").front();

        auto ratio_at = [&](int Nx) {
            SimOptions o;
            o.Nx = Nx;
            const auto ts = run_closed_loop(sys, t.ck, plant_initial(Grid1D(Nx)), T, o);
            return ts.at("norm_L2", T) / ts.running_max("norm_L2", T);
        };
        const double coarse = ratio_at(s_.Nx), fine_ratio = ratio_at(s_.Nx_fine);
        elapsed += seconds_since(t0);

        r.checks.push_back({"open_loop_growth", growth, 1.0, true});
        r.checks.push_back({"closed_ratio_Nx" + std::to_string(s_.Nx_fine), fine_ratio, limits::decay_fraction});
        r.checks.push_back({"refinement_gain", coarse / fine_ratio, limits::refinement_gain, true});
        r.checks.push_back({"seconds", elapsed, limits::stabilization_seconds});
        std::ostringstream os;
        os.precision(3);
        os << "closed_ratio_Nx" << s_.Nx << "=" << coarse << ", first-order upwind";
        r.note = os.str();
    }

    void observer(CriterionResult& r) {
        const auto sys = reference::heterodirectional();
        const double tF = horizons(sys).t_F.value();
        ObserverKernels ok = observer_kernels(het_obs_, sys, s_.N);
        const auto& ck = hetero(s_.N).ck;
        SimOptions o;
        o.Nx = s_.Nx_fine;
        const Grid1D g(o.Nx);
        const FieldState truth = plant_initial(g), guess = FieldState::zeros(1, 2, g);

        auto measure = [&](int sign) {
            ok.gain_sign = sign;
            const auto a = run_observer(sys, ok, ck, truth, guess, ObserverMode::StateFeedbackPlant, 1.1 * tF, o);
            const auto b = run_observer(sys, ok, ck, truth, guess, ObserverMode::OutputFeedback, 2.2 * tF, o);
            return std::pair{a.at("err_L2", 1.1 * tF) / a.column("err_L2").front(),
                             b.at("total_L2", 2.2 * tF) / b.running_max("total_L2", 2.2 * tF)};
        };
        auto [err, total] = measure(+1);
        int sign = +1;
        if (err > limits::decay_fraction || total > limits::decay_fraction) {
            auto flipped = measure(-1);
            if (flipped.first <= limits::decay_fraction && flipped.second <= limits::decay_fraction) {
                std::tie(err, total) = flipped;
                sign = -1;
            }
        }
        r.checks.push_back({"estimation_error_ratio", err, limits::decay_fraction});
        r.checks.push_back({"output_feedback_ratio", total, limits::decay_fraction});
        r.note = std::string("gain convention P+ = M(x,0) Lambda^-, P- = N(x,0) Lambda^-, sign ") +
                 (sign > 0 ? "+1" : "-1");
    }

    void tracking(CriterionResult& r) {
        const auto sys = reference::two_state(p_);
        const double tM = horizons(sys).t_M;
        const auto& ck = two_state(s_.N_fine).ck;
        ReferenceTrajectory phi;
        phi.components = {ScalarFunction{{Primitive::sinusoid(1.0, 1.0)}},
                          ScalarFunction{{Primitive::sinusoid(1.0, 1.0, std::numbers::pi / 2)}}};
        phi.description = "(sin 2 pi t, cos 2 pi t)";
        const Grid1D g(s_.Nx_fine);

        auto run = [&](Scheme scheme) {
            SimOptions o;
            o.Nx = s_.Nx_fine;
            o.scheme = scheme;
            return run_tracking(sys, ck, phi, FieldState::zeros(0, 2, g), 2.0 * tM, o);
        };
        const auto ts = run(Scheme::Upwind3);
        for (int i = 0; i < 2; ++i) {
            const double amp = phi.amplitude(i, 0.0, 2.0 * tM);
            const std::string col = "track_err_" + std::to_string(i + 1);
            r.checks.push_back({"rms_" + std::to_string(i + 1), ts.rms(col, 1.1 * tM, 2.0 * tM) / amp,
                                limits::tracking_fraction});
        }
        double staged = 0.0;
        const auto& e1 = ts.column("track_err_1");
        for (std::size_t k = 0; k < ts.size(); ++k)
            if (ts.t()[k] >= 1.1 / sys.mu(0)) staged = std::max(staged, e1[k]);
        r.checks.push_back({"component1_after_1.1/mu1", staged / phi.amplitude(0, 0.0, 2.0 * tM),
                            limits::tracking_fraction});

        const auto first = run(Scheme::Upwind1);
        std::ostringstream os;
        os.precision(3);
        os << "third-order upwind with SSP-RK3, kernels N=" << s_.N_fine << "; first-order upwind gives rms "
           << first.rms("track_err_1", 1.1 * tM, 2.0 * tM) << ", " << first.rms("track_err_2", 1.1 * tM, 2.0 * tM);
        r.note = os.str();
    }

    static Matrix smooth_profiles(int rows, int N, std::mt19937& gen) {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        Matrix w(rows, N + 1);
        for (int r = 0; r < rows; ++r) {
            double a[4], b[4];
            for (int k = 0; k < 4; ++k) {
                a[k] = u(gen);
                b[k] = u(gen);
            }
            for (int q = 0; q <= N; ++q) {
                const double x = static_cast<double>(q) / N;
                double s = 0.0;
                for (int k = 0; k < 4; ++k)
                    s += a[k] * std::cos(k * std::numbers::pi * x) + b[k] * std::sin(k * std::numbers::pi * x);
                w(r, q) = s;
            }
        }
        return w;
    }

    void round_trip(CriterionResult& r) {
        const double h2 = 1.0 / (static_cast<double>(s_.N) * s_.N);
        std::mt19937 gen(s_.seed);
        auto worst = [&](const ControllerKernels& ck) {
            const BacksteppingTransform T(ck, s_.N);
            double e = 0.0;
            for (int k = 0; k < 5; ++k) {
                const Matrix w = smooth_profiles(ck.sys().n + ck.sys().m, s_.N, gen);
                e = std::max(e, linf_norm(w - T.inverse(T.forward(w))));
            }
            return e;
        };
        r.checks.push_back({"hetero", worst(hetero(s_.N, true).ck), limits::roundtrip_C_hetero * h2});
        r.checks.push_back({"two_state", worst(two_state(s_.N, true).ck), limits::roundtrip_C_two_state * h2});
        r.note = "5 seeded smooth profiles per system on the kernel grid; C fixed from an N=50 calibration";
    }

    void cascade(CriterionResult& r) {
        const auto sys = reference::heterodirectional();
        const auto& ck = hetero(s_.N, true).ck;
        const Grid1D g(s_.Nx_fine);
        const double dx = g.dx();
        const FieldState target = FieldState::sample(1, 2, g, [](int row, double x) {
            const double s = std::sin(std::numbers::pi * x);
            if (row == 0) return std::sin(0.5 * std::numbers::pi * x);
            return row == 1 ? s : -2.0 * x * s;
        });
        const BacksteppingTransform T(ck, g.Nx);
        const FieldState plant = FieldState::unstack(0.0, T.inverse(target.stacked()), sys.n);
        const double tM = horizons(sys).t_M;
        SimOptions o;
        o.Nx = g.Nx;
        const auto ts = run_target_system(sys, ck, target, 1.1 * horizons(sys).t_F.value(), o, &plant, 10);

        double beta1 = 0.0, beta = 0.0, gap = 0.0;
        for (std::size_t k = 0; k < ts.size(); ++k) {
            const double t = ts.t()[k];
            if (t >= (1.0 + limits::cascade_margin) / sys.mu(0)) beta1 = std::max(beta1, ts.column("beta_Linf_1")[k]);
            if (t >= (1.0 + limits::cascade_margin) * tM)
                beta = std::max({beta, ts.column("beta_Linf_1")[k], ts.column("beta_Linf_2")[k]});
            gap = std::max(gap, ts.column("transform_err")[k]);
        }
        r.checks.push_back({"beta1_after_1/mu1", beta1, limits::cascade_C * dx});
        r.checks.push_back({"beta_after_tM", beta, limits::cascade_C * dx});
        r.checks.push_back({"transform_gap", gap, limits::consistency_C * dx});
        r.note = "Nx=" + std::to_string(g.Nx) + ", horizons waited 5% past for scheme smear";
    }

    void envelope(CriterionResult& r) {
        const auto het = reference::heterodirectional();
        const auto two = reference::two_state(p_);
        std::vector<std::pair<std::string, PicardReport>> reports{
            {"hetero_ctl", hetero(s_.N).ck.report},
            {"two_state_ctl", two_state(s_.N).ck.report},
            {"hetero_obs", observer_kernels(het_obs_, het, s_.N).report},
            {"two_state_obs", observer_kernels(two_obs_, two, s_.N).report},
        };
        std::ostringstream os;
        os.precision(3);
        for (const auto& [name, rep] : reports) {
            const IncrementShape sh = increment_shape(rep.increments);
            r.checks.push_back({name + "_iterations", rep.converged ? static_cast<double>(rep.iterations) : 1e9,
                                static_cast<double>(limits::picard_iterations)});
            r.checks.push_back({name + "_rate_steepening", sh.superlinear() ? sh.early_rate - sh.late_rate : 0.0,
                                limits::min_steepening, true});
            os << name << " log10 rate " << sh.early_rate << " -> " << sh.late_rate << "; ";
        }
        r.note = os.str();
    }

    Settings s_;
    TwoStateParameters p_;
    ClosedFormResolution resolution_;
    ArtificialBoundary art53_;
    std::map<int, Timed> het_, two_;
    std::map<int, ObserverKernels> het_obs_, two_obs_;
};

}  // namespace backstep::acceptance
