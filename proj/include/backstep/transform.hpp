#pragma once

#include <vector>

#include "controller.hpp"
#include "kernel_field.hpp"
#include "system_model.hpp"
#include "volterra.hpp"

namespace backstep {

/**
 * Discrete Volterra operator  w -> (x_k -> sum_j int_0^{x_k} F_ij(x_k, xi) w_j(xi) dxi)  on a
 * uniform grid with Nx cells. Kernel traces are resampled once; jumps of the kernels inside a
 * cell are integrated piecewise.
 */
class VolterraOperator {
public:
    VolterraOperator() = default;

    VolterraOperator(const FieldBlock& F, int Nx) : rows_(F.rows), cols_(F.cols), nx_(Nx) {
        if (Nx < 1) throw ParameterError("operator grid needs at least one cell");
        const std::size_t tri = static_cast<std::size_t>(Nx + 1) * (Nx + 2) / 2;
        weights_.assign(F.f.size(), {});
        active_.assign(F.f.size(), false);
        for (std::size_t q = 0; q < F.f.size(); ++q) {
            if (F.f[q].is_zero()) continue;
            active_[q] = true;
            auto& w = weights_[q];
            w.assign(tri, 0.0);
            for (int k = 1; k <= Nx; ++k) {
                const double x = static_cast<double>(k) / Nx;
                const PiecewiseTrace tr = segment_trace(F.f[q], x, 0.0, x, x, k);
                const auto c = product_weights(tr, 0.0, x, k);
                const std::size_t off = static_cast<std::size_t>(k) * (k + 1) / 2;
                for (int l = 0; l <= k; ++l) w[off + l] = c[l];
            }
        }
    }

    [[nodiscard]] int nx() const { return nx_; }

    /// `w` has cols() rows and Nx + 1 columns; the result has rows() rows.
    [[nodiscard]] Matrix apply(const Matrix& w) const {
        if (w.rows() != cols_ || w.cols() != nx_ + 1) throw DimensionError("profile shape does not match operator");
        Matrix out = Matrix::Zero(rows_, nx_ + 1);
        for (int i = 0; i < rows_; ++i) {
            for (int j = 0; j < cols_; ++j) {
                const std::size_t q = static_cast<std::size_t>(i) * cols_ + j;
                if (!active_[q]) continue;
                const auto& wt = weights_[q];
                for (int k = 1; k <= nx_; ++k) {
                    const std::size_t off = static_cast<std::size_t>(k) * (k + 1) / 2;
                    double acc = 0.0;
                    for (int l = 0; l <= k; ++l) acc += wt[off + l] * w(j, l);
                    out(i, k) += acc;
                }
            }
        }
        return out;
    }

    [[nodiscard]] int rows() const { return rows_; }
    [[nodiscard]] int cols() const { return cols_; }

private:
    int rows_ = 0, cols_ = 0, nx_ = 0;
    std::vector<std::vector<double>> weights_;
    std::vector<bool> active_;
};

/// Stacks [K, L] (or [C^+, C^-]) into one m x (n + m) block.
[[nodiscard]] inline FieldBlock stack_blocks(const std::vector<const FieldBlock*>& parts, int rows) {
    FieldBlock out;
    out.rows = rows;
    for (const auto* p : parts) out.cols += p->cols;
    out.f.reserve(static_cast<std::size_t>(rows) * out.cols);
    for (int i = 0; i < rows; ++i)
        for (const auto* p : parts)
            for (int j = 0; j < p->cols; ++j) out.f.push_back((*p)(i, j));
    return out;
}

[[nodiscard]] inline FieldBlock kl_block(const KernelPair& kp) {
    FieldBlock out;
    out.rows = kp.sys.m;
    out.cols = kp.sys.n + kp.sys.m;
    for (int i = 0; i < kp.sys.m; ++i) {
        for (int j = 0; j < kp.sys.n; ++j) out.f.push_back(kp.k(i, j));
        for (int j = 0; j < kp.sys.m; ++j) out.f.push_back(kp.l(i, j));
    }
    return out;
}

/**
 * The backstepping transformation on a simulation grid:
 *   forward:  alpha = u,  beta = v - int_0^x (K u + L v) dxi
 *   inverse:  u = alpha,  v = beta + int_0^x (C^+ alpha + C^- beta) dxi
 */
class BacksteppingTransform {
public:
    BacksteppingTransform(const ControllerKernels& ck, int Nx)
        : n_(ck.sys().n), m_(ck.sys().m), forward_(kl_block(ck.kernels), Nx) {
        if (!ck.c_minus.f.empty()) {
            inverse_ = VolterraOperator(stack_blocks({&ck.c_plus, &ck.c_minus}, m_), Nx);
            has_inverse_ = true;
        }
    }

    /// Inverse through an explicitly supplied kernel R (lower blocks), as produced by invert_transform.
    void use_inverse_kernel(const InverseKernel& R) {
        FieldBlock neg = R.lower;
        for (auto& f : neg.f)
            for (double& v : f.values()) v = -v;
        inverse_ = VolterraOperator(neg, forward_.nx());
        has_inverse_ = true;
    }

    /// Stacked state (u; v) with n + m rows -> stacked (alpha; beta).
    [[nodiscard]] Matrix forward(const Matrix& w) const {
        Matrix out = w;
        const Matrix I = forward_.apply(w);
        out.bottomRows(m_) -= I;
        return out;
    }

    [[nodiscard]] Matrix inverse(const Matrix& target) const {
        if (!has_inverse_) throw UnsupportedError("inverse transformation requires C kernels");
        Matrix out = target;
        out.bottomRows(m_) += inverse_.apply(target);
        return out;
    }

private:
    int n_ = 0, m_ = 0;
    VolterraOperator forward_;
    VolterraOperator inverse_;
    bool has_inverse_ = false;
};

}  // namespace backstep
