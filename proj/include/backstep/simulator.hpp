#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "controller.hpp"
#include "errors.hpp"
#include "kernel_field.hpp"
#include "observer.hpp"
#include "system_model.hpp"
#include "transform.hpp"

namespace backstep {

/// Spatial discretization of the transport equations.
enum class Scheme {
    Upwind1,  ///< first-order upwind, forward Euler
    Upwind3   ///< third-order upwind-biased differences, three-stage SSP Runge-Kutta
};

/// Uniform grid on [0, 1] with Nx cells.
struct Grid1D {
    int Nx = 16;

    explicit Grid1D(int cells = 16) : Nx(cells) {
        if (Nx < 16) throw ParameterError("simulation grid needs Nx >= 16");
    }

    [[nodiscard]] double dx() const { return 1.0 / Nx; }
    [[nodiscard]] double x(int k) const { return static_cast<double>(k) / Nx; }
    [[nodiscard]] int nodes() const { return Nx + 1; }
};

/// Profiles u (n rows) and v (m rows) at the Nx + 1 grid nodes.
struct FieldState {
    double t = 0.0;
    Matrix u;
    Matrix v;

    static FieldState zeros(int n, int m, const Grid1D& g) {
        return {0.0, Matrix::Zero(n, g.nodes()), Matrix::Zero(m, g.nodes())};
    }

    /// f(row, x) with rows 0..n-1 for u and n..n+m-1 for v.
    template <class F>
    static FieldState sample(int n, int m, const Grid1D& g, F&& f) {
        FieldState s = zeros(n, m, g);
        for (int k = 0; k < g.nodes(); ++k) {
            for (int i = 0; i < n; ++i) s.u(i, k) = f(i, g.x(k));
            for (int i = 0; i < m; ++i) s.v(i, k) = f(n + i, g.x(k));
        }
        return s;
    }

    [[nodiscard]] Matrix stacked() const {
        Matrix W(u.rows() + v.rows(), u.cols() ? u.cols() : v.cols());
        W.topRows(u.rows()) = u;
        W.bottomRows(v.rows()) = v;
        return W;
    }

    static FieldState unstack(double t, const Matrix& W, int n) {
        return {t, W.topRows(n), W.bottomRows(W.rows() - n)};
    }
};

/// Trapezoid L2 norm over all rows together.
[[nodiscard]] inline double l2_norm(const Matrix& W, double dx) {
    if (W.size() == 0) return 0.0;
    const int last = static_cast<int>(W.cols()) - 1;
    double acc = 0.0;
    for (int r = 0; r < W.rows(); ++r) {
        double s = 0.5 * (W(r, 0) * W(r, 0) + W(r, last) * W(r, last));
        for (int k = 1; k < last; ++k) s += W(r, k) * W(r, k);
        acc += s * dx;
    }
    return std::sqrt(acc);
}

[[nodiscard]] inline double linf_norm(const Matrix& W) { return W.size() ? W.cwiseAbs().maxCoeff() : 0.0; }

/// Scalar diagnostics per sample plus optional state snapshots.
class TimeSeries {
public:
    TimeSeries() = default;
    explicit TimeSeries(std::vector<std::string> columns) : names_(std::move(columns)), data_(names_.size()) {}

    void add(double t, const std::vector<double>& values) {
        if (values.size() != names_.size()) throw DimensionError("sample has the wrong number of columns");
        if (!t_.empty() && !(t > t_.back())) throw ParameterError("sample times must increase strictly");
        t_.push_back(t);
        for (std::size_t c = 0; c < values.size(); ++c) data_[c].push_back(values[c]);
    }

    void add_snapshot(const FieldState& s) { snapshots_.push_back(s); }

    [[nodiscard]] const std::vector<double>& t() const { return t_; }
    [[nodiscard]] const std::vector<std::string>& columns() const { return names_; }
    [[nodiscard]] const std::vector<FieldState>& snapshots() const { return snapshots_; }
    [[nodiscard]] std::size_t size() const { return t_.size(); }

    [[nodiscard]] bool has(const std::string& name) const {
        return std::find(names_.begin(), names_.end(), name) != names_.end();
    }

    [[nodiscard]] const std::vector<double>& column(const std::string& name) const {
        auto it = std::find(names_.begin(), names_.end(), name);
        if (it == names_.end()) throw DimensionError("time series has no column '" + name + "'");
        return data_[static_cast<std::size_t>(it - names_.begin())];
    }

    /// Value at the last sample taken no later than t.
    [[nodiscard]] double at(const std::string& name, double t) const {
        const auto& c = column(name);
        auto it = std::upper_bound(t_.begin(), t_.end(), t + 1e-12);
        if (it == t_.begin()) throw DomainError("no sample at or before the requested time");
        return c[static_cast<std::size_t>(it - t_.begin()) - 1];
    }

    /// Largest value over samples with time <= t.
    [[nodiscard]] double running_max(const std::string& name, double t) const {
        const auto& c = column(name);
        double r = 0.0;
        for (std::size_t k = 0; k < t_.size() && t_[k] <= t + 1e-12; ++k) r = std::max(r, c[k]);
        return r;
    }

    /// Root mean square over samples with lo <= time <= hi.
    [[nodiscard]] double rms(const std::string& name, double lo, double hi) const {
        const auto& c = column(name);
        double acc = 0.0;
        int cnt = 0;
        for (std::size_t k = 0; k < t_.size(); ++k) {
            if (t_[k] < lo - 1e-12 || t_[k] > hi + 1e-12) continue;
            acc += c[k] * c[k];
            ++cnt;
        }
        return cnt ? std::sqrt(acc / cnt) : 0.0;
    }

    void write_csv(std::ostream& os, const std::vector<std::string>& comments = {}) const {
        for (const auto& c : comments) os << "# " << c << '\n';
        os << 't';
        for (const auto& n : names_) os << ',' << n;
        os << '\n';
        os.precision(10);
        for (std::size_t k = 0; k < t_.size(); ++k) {
            os << t_[k];
            for (const auto& d : data_) os << ',' << d[k];
            os << '\n';
        }
    }

private:
    std::vector<std::string> names_;
    std::vector<double> t_;
    std::vector<std::vector<double>> data_;
    std::vector<FieldState> snapshots_;
};

struct SimOptions {
    int Nx = 400;
    double cfl = 0.9;
    Scheme scheme = Scheme::Upwind1;
    int sample_stride = 1;               ///< record every k-th step
    std::optional<double> snapshot_dt;   ///< store full states this often
};

/**
 * Explicit transport integrator for stacked profiles W (one row per state). Row r moves to the
 * right with speed velocity(r) > 0 or to the left when velocity(r) < 0. Boundary nodes on the
 * inflow side are overwritten by the closure after every stage.
 */
class TransportStepper {
public:
    TransportStepper(Vector velocity, const Grid1D& grid, Scheme scheme, double dt, double cfl = 0.9)
        : c_(std::move(velocity)), grid_(grid), scheme_(scheme), dt_(dt) {
        if (!(cfl > 0.0 && cfl <= 1.0)) throw ParameterError("CFL number must lie in (0, 1]");
        const double vmax = c_.size() ? c_.cwiseAbs().maxCoeff() : 0.0;
        if (!(dt > 0.0)) throw ParameterError("time step must be positive");
        if (vmax > 0.0 && dt > cfl * grid.dx() / vmax * (1.0 + 1e-12))
            throw ParameterError("time step " + std::to_string(dt) + " violates the CFL bound " +
                                 std::to_string(cfl * grid.dx() / vmax));
    }

    [[nodiscard]] double dt() const { return dt_; }

    /// Advances W from t to t + dt. `source(t, W, S)` adds the non-transport terms into S;
    /// `closure(t, W)` writes the inflow boundary values.
    template <class Source, class Closure>
    void step(double t, Matrix& W, Source&& source, Closure&& closure) const {
        if (scheme_ == Scheme::Upwind1) {
            Matrix L = rhs(t, W, source);
            W += dt_ * L;
            closure(t + dt_, W);
            return;
        }
        const Matrix W0 = W;
        Matrix W1 = W0 + dt_ * rhs(t, W0, source);
        closure(t + dt_, W1);
        Matrix W2 = 0.75 * W0 + 0.25 * (W1 + dt_ * rhs(t + dt_, W1, source));
        closure(t + 0.5 * dt_, W2);
        W = (1.0 / 3.0) * W0 + (2.0 / 3.0) * (W2 + dt_ * rhs(t + 0.5 * dt_, W2, source));
        closure(t + dt_, W);
    }

private:
    template <class Source>
    Matrix rhs(double t, const Matrix& W, Source&& source) const {
        Matrix L = Matrix::Zero(W.rows(), W.cols());
        transport(W, L);
        source(t, W, L);
        return L;
    }

    /// L -= c dW/dx with upwind differences.
    void transport(const Matrix& W, Matrix& L) const {
        const int N = grid_.Nx;
        const double h = grid_.dx();
        for (int r = 0; r < W.rows(); ++r) {
            const double c = c_(r);
            if (c == 0.0) continue;
            // Work in the frame where the row moves right: index j maps to node k(j).
            auto at = [&](int j) { return c > 0 ? W(r, j) : W(r, N - j); };
            auto put = [&](int j, double d) {
                if (c > 0)
                    L(r, j) -= c * d;
                else
                    L(r, N - j) += c * d;  // mirrored derivative changes sign
            };
            for (int j = 1; j <= N; ++j) {
                double d;
                if (scheme_ == Scheme::Upwind1 || j == 1) {
                    d = scheme_ == Scheme::Upwind1 ? (at(j) - at(j - 1)) / h : (at(j + 1) - at(j - 1)) / (2.0 * h);
                } else if (j == N) {
                    d = (3.0 * at(N) - 4.0 * at(N - 1) + at(N - 2)) / (2.0 * h);
                } else {
                    d = (2.0 * at(j + 1) + 3.0 * at(j) - 6.0 * at(j - 1) + at(j - 2)) / (6.0 * h);
                }
                put(j, d);
            }
        }
    }

    Vector c_;
    Grid1D grid_;
    Scheme scheme_;
    double dt_;
};

/// Time step no larger than the CFL bound that divides t_end into a whole number of steps.
[[nodiscard]] inline std::pair<double, long> choose_time_step(double max_speed, const Grid1D& g, double cfl,
                                                              double t_end) {
    if (!(t_end > 0.0)) throw ParameterError("t_end must be positive");
    const double dt_max = cfl * g.dx() / max_speed;
    const long steps = static_cast<long>(std::ceil(t_end / dt_max - 1e-9));
    return {t_end / steps, steps};
}

/// Signed velocities (+lambda for u rows, -mu for v rows).
[[nodiscard]] inline Vector plant_velocity(const HyperbolicSystem& sys) {
    Vector c(sys.n + sys.m);
    for (int i = 0; i < sys.n; ++i) c(i) = sys.lambda(i);
    for (int j = 0; j < sys.m; ++j) c(sys.n + j) = -sys.mu(j);
    return c;
}

[[nodiscard]] inline Matrix coupling_matrix(const HyperbolicSystem& sys) {
    Matrix A(sys.n + sys.m, sys.n + sys.m);
    A << sys.sigma_pp, sys.sigma_pm, sys.sigma_mp, sys.sigma_mm;
    return A;
}

/**
 * Quadrature weights for  int_0^1 F_ij(1, xi) z_j(xi) dxi  on a simulation grid. The trace of
 * each field along x = 1 is resampled once; jumps inside a cell are integrated piecewise.
 */
class BoundaryFunctional {
public:
    BoundaryFunctional() = default;

    BoundaryFunctional(const std::vector<const KernelField*>& fields, int rows, int cols, const Grid1D& g)
        : rows_(rows), cols_(cols) {
        per_col_.assign(cols, Matrix::Zero(rows, g.nodes()));
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) {
                const KernelField& f = *fields[static_cast<std::size_t>(i) * cols + j];
                if (f.is_zero()) continue;
                const auto w = product_weights(right_trace(f), 0.0, 1.0, g.Nx);
                for (int k = 0; k < g.nodes(); ++k) per_col_[j](i, k) = w[k];
            }
    }

    /// Z has cols rows and Nx + 1 columns.
    [[nodiscard]] Vector apply(const Matrix& Z) const {
        Vector out = Vector::Zero(rows_);
        for (int j = 0; j < cols_; ++j) out += per_col_[j] * Z.row(j).transpose();
        return out;
    }

    /// rows x cols block of weights belonging to the node x = 1.
    [[nodiscard]] Matrix last() const {
        Matrix W(rows_, cols_);
        for (int j = 0; j < cols_; ++j) W.col(j) = per_col_[j].col(per_col_[j].cols() - 1);
        return W;
    }

private:
    int rows_ = 0, cols_ = 0;
    std::vector<Matrix> per_col_;
};

/// U(t) = -R1 u(t,1) + int_0^1 [K(1,xi) u(xi) + L(1,xi) v(xi)] dxi on a simulation grid.
class StateFeedback {
public:
    StateFeedback(const ControllerKernels& ck, const Grid1D& g) : sys_(ck.sys()) {
        std::vector<const KernelField*> f;
        for (int i = 0; i < sys_.m; ++i) {
            for (int j = 0; j < sys_.n; ++j) f.push_back(&ck.kernels.k(i, j));
            for (int j = 0; j < sys_.m; ++j) f.push_back(&ck.kernels.l(i, j));
        }
        q_ = BoundaryFunctional(f, sys_.m, sys_.n + sys_.m, g);
        const Matrix last = q_.last();
        wl_ = last.rightCols(sys_.m);
        solve_ = (Matrix::Identity(sys_.m, sys_.m) - wl_).partialPivLu();
    }

    /// Control for the stacked state W = (u; v).
    [[nodiscard]] Vector control(const Matrix& W) const {
        Vector U = q_.apply(W);
        if (sys_.n > 0) U -= sys_.r1 * W.topRows(sys_.n).col(W.cols() - 1);
        return U;
    }

    /**
     * Writes v(1) = R1 u(1) + U + extra into W with U evaluated on W itself (the control reads
     * the boundary value it sets, so the closure is solved as a small linear system). Returns U + extra.
     */
    Vector close(Matrix& W, const Vector* extra = nullptr) const {
        const int n = sys_.n, m = sys_.m, last = static_cast<int>(W.cols()) - 1;
        auto vN = W.bottomRows(m).col(last);
        Vector U0 = control(W) - wl_ * vN;
        if (extra) U0 += *extra;
        Vector rhs = U0;
        if (n > 0) rhs += sys_.r1 * W.topRows(n).col(last);
        const Vector v1 = solve_.solve(rhs);
        W.bottomRows(m).col(last) = v1;
        return U0 + wl_ * v1;
    }

private:
    HyperbolicSystem sys_;
    BoundaryFunctional q_;
    Matrix wl_;
    Eigen::PartialPivLU<Matrix> solve_;
};

namespace detail {

/// Node values x_k -> trace(x_k) for a row-major block of traces, as one matrix per column.
inline std::vector<Matrix> sample_traces(const std::vector<PiecewiseTrace>& tr, int rows, int cols, const Grid1D& g) {
    std::vector<Matrix> out(cols, Matrix::Zero(rows, g.nodes()));
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            const auto& t = tr[static_cast<std::size_t>(i) * cols + j];
            if (t.knots().empty()) continue;
            for (int k = 0; k < g.nodes(); ++k) out[j](i, k) = t(g.x(k), k == 0 ? 1 : -1);
        }
    return out;
}

inline bool snapshot_due(const SimOptions& o, double t, double dt) {
    if (!o.snapshot_dt) return false;
    const double p = *o.snapshot_dt;
    const double r = std::fmod(t + 0.5 * dt, p);
    return r < dt;
}

}  // namespace detail

/**
 * One explicit step of the plant with the control functional `control` (zero in open loop).
 * The control is re-evaluated on the stepped state so that v(1) = R1 u(1) + U holds exactly.
 */
[[nodiscard]] inline FieldState step(const HyperbolicSystem& sys, const FieldState& state, double dt,
                                     const StateFeedback* feedback, const SimOptions& opts = {}) {
    const Grid1D g(static_cast<int>(state.v.cols()) - 1);
    TransportStepper st(plant_velocity(sys), g, opts.scheme, dt, opts.cfl);
    const Matrix A = coupling_matrix(sys);
    Matrix W = state.stacked();
    const int n = sys.n, m = sys.m, N = g.Nx;
    st.step(
        state.t, W, [&](double, const Matrix& X, Matrix& S) { S.noalias() += A * X; },
        [&](double, Matrix& X) {
            if (n > 0) X.topRows(n).col(0) = sys.q0 * X.bottomRows(m).col(0);
            if (feedback)
                feedback->close(X);
            else
                X.bottomRows(m).col(N) = n > 0 ? Vector(sys.r1 * X.topRows(n).col(N)) : Vector::Zero(m);
        });
    return FieldState::unstack(state.t + dt, W, n);
}

/// Plant in open loop (feedback == nullptr) or under state feedback.
[[nodiscard]] inline TimeSeries run_plant(const HyperbolicSystem& sys, const StateFeedback* feedback,
                                          const FieldState& initial, double t_end, const SimOptions& opts = {}) {
    require_valid(sys);
    const Grid1D g(opts.Nx);
    if (initial.v.cols() != g.nodes() || initial.u.rows() != sys.n || initial.v.rows() != sys.m)
        throw DimensionError("initial state does not match the system and grid");
    const auto [dt, steps] = choose_time_step(sys.max_speed(), g, opts.cfl, t_end);
    TransportStepper st(plant_velocity(sys), g, opts.scheme, dt, opts.cfl);
    const Matrix A = coupling_matrix(sys);
    const int n = sys.n, m = sys.m, N = g.Nx;
    auto closure = [&](double, Matrix& X) {
        if (n > 0) X.topRows(n).col(0) = sys.q0 * X.bottomRows(m).col(0);
        if (feedback)
            feedback->close(X);
        else
            X.bottomRows(m).col(N) = n > 0 ? Vector(sys.r1 * X.topRows(n).col(N)) : Vector::Zero(m);
    };
    auto source = [&](double, const Matrix& X, Matrix& S) { S.noalias() += A * X; };

    TimeSeries ts({"norm_L2_u", "norm_L2_v", "norm_Linf", "norm_L2"});
    auto record = [&](double t, const Matrix& X) {
        const double a = l2_norm(X.topRows(n), g.dx()), b = l2_norm(X.bottomRows(m), g.dx());
        ts.add(t, {a, b, linf_norm(X), std::hypot(a, b)});
    };
    Matrix W = initial.stacked();
    record(0.0, W);
    if (opts.snapshot_dt) ts.add_snapshot(FieldState::unstack(0.0, W, n));
    for (long s = 1; s <= steps; ++s) {
        const double t0 = (s - 1) * dt;
        st.step(t0, W, source, closure);
        const double t = s * dt;
        if (s % opts.sample_stride == 0 || s == steps) record(t, W);
        if (detail::snapshot_due(opts, t, dt)) ts.add_snapshot(FieldState::unstack(t, W, n));
    }
    return ts;
}

[[nodiscard]] inline TimeSeries run_closed_loop(const HyperbolicSystem& sys, const ControllerKernels& ck,
                                                const FieldState& initial, double t_end, const SimOptions& opts = {}) {
    const StateFeedback fb(ck, Grid1D(opts.Nx));
    return run_plant(sys, &fb, initial, t_end, opts);
}

enum class ObserverMode { StateFeedbackPlant, OutputFeedback };

/**
 * Plant and boundary observer integrated together. The observer reads y = v(t, 0), uses
 * u_hat(t,0) = Q0 y and v_hat(t,1) = R1 u_hat(t,1) + U(t). With OutputFeedback the control is the
 * state-feedback law evaluated on the estimates.
 */
[[nodiscard]] inline TimeSeries run_observer(const HyperbolicSystem& sys, const ObserverKernels& ok,
                                             const ControllerKernels& ck, const FieldState& truth,
                                             const FieldState& estimate, ObserverMode mode, double t_end,
                                             const SimOptions& opts = {}) {
    require_valid(sys);
    const Grid1D g(opts.Nx);
    const int n = sys.n, m = sys.m, N = g.Nx, R = n + m;
    const auto [dt, steps] = choose_time_step(sys.max_speed(), g, opts.cfl, t_end);
    Vector c(2 * R);
    c << plant_velocity(sys), plant_velocity(sys);
    TransportStepper st(c, g, opts.scheme, dt, opts.cfl);
    const Matrix A = coupling_matrix(sys);
    const StateFeedback fb(ck, g);

    std::vector<PiecewiseTrace> gains = ok.P_plus;
    gains.insert(gains.end(), ok.P_minus.begin(), ok.P_minus.end());
    std::vector<Matrix> P = detail::sample_traces(gains, R, m, g);
    for (auto& p : P) p *= ok.gain_sign;

    auto source = [&](double, const Matrix& X, Matrix& S) {
        S.topRows(R).noalias() += A * X.topRows(R);
        S.bottomRows(R).noalias() += A * X.bottomRows(R);
        for (int j = 0; j < m; ++j) {
            const double innov = X(R + n + j, 0) - X(n + j, 0);
            if (innov != 0.0) S.bottomRows(R) -= P[j] * innov;
        }
    };
    auto closure = [&](double, Matrix& X) {
        const Vector y = X.block(n, 0, m, 1);
        if (n > 0) {
            X.block(0, 0, n, 1) = sys.q0 * y;
            X.block(R, 0, n, 1) = sys.q0 * y;
        }
        if (mode == ObserverMode::StateFeedbackPlant) {
            Matrix plant = X.topRows(R);
            const Vector U = fb.close(plant);
            X.topRows(R).col(N) = plant.col(N);
            Vector vh = U;
            if (n > 0) vh += sys.r1 * X.block(R, N, n, 1);
            X.block(R + n, N, m, 1) = vh;
        } else {
            Matrix obs = X.bottomRows(R);
            const Vector U = fb.close(obs);
            X.bottomRows(R).col(N) = obs.col(N);
            Vector vp = U;
            if (n > 0) vp += sys.r1 * X.block(0, N, n, 1);
            X.block(n, N, m, 1) = vp;
        }
    };

    TimeSeries ts({"norm_L2_u", "norm_L2_v", "norm_Linf", "err_L2", "norm_L2", "obs_L2", "total_L2"});
    auto record = [&](double t, const Matrix& X) {
        const double a = l2_norm(X.topRows(n), g.dx()), b = l2_norm(X.middleRows(n, m), g.dx());
        const double e = l2_norm(X.topRows(R) - X.bottomRows(R), g.dx());
        const double o = l2_norm(X.bottomRows(R), g.dx());
        ts.add(t, {a, b, linf_norm(X.topRows(R)), e, std::hypot(a, b), o, std::hypot(std::hypot(a, b), o)});
    };
    Matrix W(2 * R, g.nodes());
    W.topRows(R) = truth.stacked();
    W.bottomRows(R) = estimate.stacked();
    record(0.0, W);
    for (long s = 1; s <= steps; ++s) {
        st.step((s - 1) * dt, W, source, closure);
        if (s % opts.sample_stride == 0 || s == steps) record(s * dt, W);
    }
    return ts;
}

/**
 * Target system
 *   alpha_t + Lambda^+ alpha_x = Sigma^{++} alpha + Sigma^{+-} beta + Sigma^{+-} int_0^x (C^+ alpha + C^- beta) dxi
 *   beta_t - Lambda^- beta_x = G(x) beta(t, 0),   alpha(t,0) = Q0 beta(t,0),   beta(t,1) = 0.
 * When `plant` is given, the plant is integrated under state feedback alongside and the column
 * transform_err records the sup-norm gap between the transformed plant state and (alpha, beta).
 */
[[nodiscard]] inline TimeSeries run_target_system(const HyperbolicSystem& sys, const ControllerKernels& ck,
                                                  const FieldState& initial, double t_end, const SimOptions& opts = {},
                                                  const FieldState* plant = nullptr, int compare_stride = 10) {
    require_valid(sys);
    const Grid1D g(opts.Nx);
    const int n = sys.n, m = sys.m, N = g.Nx, R = n + m;
    if (ck.c_minus.f.empty()) throw UnsupportedError("target system needs the C kernels");
    const auto [dt, steps] = choose_time_step(sys.max_speed(), g, opts.cfl, t_end);
    const int blocks = plant ? 2 : 1;
    Vector c(blocks * R);
    c.head(R) = plant_velocity(sys);
    if (plant) c.tail(R) = plant_velocity(sys);
    TransportStepper st(c, g, opts.scheme, dt, opts.cfl);
    const Matrix A = coupling_matrix(sys);
    const std::vector<Matrix> Gn = detail::sample_traces(ck.G, m, m, g);
    const VolterraOperator Cop(stack_blocks({&ck.c_plus, &ck.c_minus}, m), N);
    const StateFeedback fb(ck, g);
    std::optional<BacksteppingTransform> T;
    if (plant) T.emplace(ck, N);

    auto source = [&](double, const Matrix& X, Matrix& S) {
        const Matrix Z = X.topRows(R);
        if (n > 0) {
            S.topRows(n).noalias() += sys.sigma_pp * Z.topRows(n) + sys.sigma_pm * Z.bottomRows(m);
            S.topRows(n).noalias() += sys.sigma_pm * Cop.apply(Z);
        }
        for (int j = 0; j < m; ++j) {
            const double b0 = Z(n + j, 0);
            if (b0 != 0.0) S.middleRows(n, m) += Gn[j] * b0;
        }
        if (plant) S.bottomRows(R).noalias() += A * X.bottomRows(R);
    };
    auto closure = [&](double, Matrix& X) {
        if (n > 0) X.block(0, 0, n, 1) = sys.q0 * X.block(n, 0, m, 1);
        X.block(n, N, m, 1).setZero();
        if (plant) {
            if (n > 0) X.block(R, 0, n, 1) = sys.q0 * X.block(R + n, 0, m, 1);
            Matrix P = X.bottomRows(R);
            fb.close(P);
            X.bottomRows(R).col(N) = P.col(N);
        }
    };

    std::vector<std::string> cols{"norm_L2_u", "norm_L2_v", "norm_Linf"};
    for (int j = 0; j < m; ++j) cols.push_back("beta_Linf_" + std::to_string(j + 1));
    if (plant) cols.push_back("transform_err");
    TimeSeries ts(cols);
    double last_gap = 0.0;
    auto record = [&](double t, const Matrix& X, bool compare) {
        const Matrix Z = X.topRows(R);
        std::vector<double> v{l2_norm(Z.topRows(n), g.dx()), l2_norm(Z.bottomRows(m), g.dx()), linf_norm(Z)};
        for (int j = 0; j < m; ++j) v.push_back(linf_norm(Z.row(n + j)));
        if (plant) {
            if (compare) last_gap = linf_norm(T->forward(X.bottomRows(R)) - Z);
            v.push_back(last_gap);
        }
        ts.add(t, v);
    };
    Matrix W(blocks * R, g.nodes());
    W.topRows(R) = initial.stacked();
    if (plant) W.bottomRows(R) = plant->stacked();
    record(0.0, W, true);
    long recorded = 0;
    for (long s = 1; s <= steps; ++s) {
        st.step((s - 1) * dt, W, source, closure);
        if (s % opts.sample_stride == 0 || s == steps) {
            record(s * dt, W, (++recorded % compare_stride) == 0 || s == steps);
        }
    }
    return ts;
}

/// int_lo^hi g(xi) f(xi) dxi by the trapezoid rule over the knots of g, one-sided at jumps.
template <class F>
[[nodiscard]] double trace_integral(const PiecewiseTrace& g, double lo, double hi, F&& f) {
    if (hi <= lo) return 0.0;
    std::vector<double> pts{lo};
    for (const auto& k : g.knots())
        if (k.pos > lo + 1e-14 && k.pos < hi - 1e-14 && k.pos > pts.back()) pts.push_back(k.pos);
    pts.push_back(hi);
    double acc = 0.0;
    for (std::size_t q = 0; q + 1 < pts.size(); ++q) {
        const double a = pts[q], b = pts[q + 1];
        acc += 0.5 * (b - a) * (g(a, +1) * f(a) + g(b, -1) * f(b));
    }
    return acc;
}

/**
 * Explicit cascade solution of  beta_t - Lambda^- beta_x = G(x) beta(t, 0),  beta(t, 1) = B(t):
 *   beta_i(t,x) = B_i(t + (x-1)/mu_i) + (1/mu_i) int_x^1 sum_j g_ij(xi) beta_j(t + (x-xi)/mu_i, 0) dxi
 * for t >= (1-x)/mu_i, and the initial-data branch before that when initial data are supplied.
 */
class BetaPropagator {
public:
    using Signal = std::function<double(int, double)>;

    BetaPropagator(std::vector<PiecewiseTrace> G, Vector mu, Signal boundary, Signal initial = {})
        : G_(std::move(G)), mu_(std::move(mu)), B_(std::move(boundary)), beta0_(std::move(initial)) {}

    [[nodiscard]] double operator()(int i, double t, double x) const {
        const int m = static_cast<int>(mu_.size());
        if (i < 0 || i >= m) throw DimensionError("beta component out of range");
        if (t < 0.0) throw DomainError("negative time");
        const double mu = mu_(i);
        double upper = 1.0, base;
        if (t >= (1.0 - x) / mu - 1e-14) {
            base = B_ ? B_(i, t + (x - 1.0) / mu) : 0.0;
        } else {
            if (!beta0_)
                throw DomainError("beta_" + std::to_string(i + 1) + " at x=" + std::to_string(x) + " needs t >= " +
                                  std::to_string((1.0 - x) / mu) + " without initial data");
            upper = x + mu * t;
            base = beta0_(i, upper);
        }
        double acc = 0.0;
        for (int j = 0; j < i; ++j) {
            const auto& g = G_[static_cast<std::size_t>(i) * m + j];
            if (g.knots().empty()) continue;
            acc += trace_integral(g, x, upper, [&](double xi) { return (*this)(j, t + (x - xi) / mu, 0.0); });
        }
        return base + acc / mu;
    }

private:
    std::vector<PiecewiseTrace> G_;
    Vector mu_;
    Signal B_;
    Signal beta0_;
};

}  // namespace backstep
