#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ksdgof/errors.hpp"
#include "ksdgof/kernel.hpp"
#include "ksdgof/model.hpp"
#include "ksdgof/stein.hpp"
#include "ksdgof/types.hpp"

namespace ksdgof {

/// Output of a minimum-KSD fit.
///
/// theta_hat estimates the population minimizer of KSD^2(P_theta, Q); that
/// minimizer itself is never computed.
struct EstimateResult {
    Vector theta_hat;
    Vector natural;           ///< eta(theta_hat)
    double objective = 0.0;   ///< KSD^2(P_theta_hat, Q_n) as a V-statistic
    double lambda_condition = std::numeric_limits<double>::quiet_NaN();
    double ridge = 0.0;       ///< diagonal shift added to Lambda_n before solving
};

/// KSD^2 of an exponential family is quadratic in the natural parameter:
///   KSD^2(eta) = eta' Lambda_n eta + eta' nu_n + offset.
struct SteinMoments {
    Matrix lambda_n;  ///< k x k, mean of k(x,x') grad t(x) grad t(x')'
    Vector nu_n;      ///< k
    double offset = 0.0;

    [[nodiscard]] double objective(const Vector& natural) const {
        return natural.dot(lambda_n * natural) + natural.dot(nu_n) + offset;
    }
};

struct EstimatorOptions {
    /// Lambda_n with a larger condition number is treated as ill-conditioned.
    double max_condition = 1e12;
    /// Ill-conditioned Lambda_n is shifted by a ridge that brings its condition
    /// number down to this value. Without it the solve follows near-null
    /// directions and the fitted density degenerates.
    double ridge_condition = 1e8;
    /// If false, ill-conditioned Lambda_n is an EstimationError instead.
    bool allow_ridge = true;
    /// Relative diagonal jitter (times trace / k) applied once when a
    /// well-conditioned Cholesky factorization still fails.
    double jitter = 1e-10;
};

namespace detail {

/// Pairwise radial kernel quantities for one dataset, both triangles filled.
struct PairTable {
    Matrix value;
    Matrix grad_scale;
    Matrix cross_trace;
};

inline PairTable pair_table(const KernelSpec& k, const Dataset& data) {
    const Eigen::Index n = data.cols();
    PairTable t{Matrix(n, n), Matrix(n, n), Matrix(n, n)};
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i <= j; ++i) {
            double sq = 0.0;
            for (Eigen::Index m = 0; m < data.rows(); ++m) {
                const double r = data(m, i) - data(m, j);
                sq += r * r;
            }
            const RadialTerms rt = radial_terms(k, sq, data.rows());
            t.value(i, j) = t.value(j, i) = rt.value;
            t.grad_scale(i, j) = t.grad_scale(j, i) = rt.grad_scale;
            t.cross_trace(i, j) = t.cross_trace(j, i) = rt.cross_trace;
        }
    }
    return t;
}

/// Same arithmetic as stein_pair, reading kernel terms from the table.
inline SteinGram stein_gram_from_table(const PairTable& t, const Dataset& data, const Matrix& s) {
    const Eigen::Index n = data.cols();
    Matrix h(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i <= j; ++i) {
            double sx_r = 0.0, sy_r = 0.0;
            for (Eigen::Index m = 0; m < data.rows(); ++m) {
                const double r = data(m, i) - data(m, j);
                sx_r += s(m, i) * r;
                sy_r += s(m, j) * r;
            }
            const double v = t.value(i, j) * s.col(i).dot(s.col(j)) + t.cross_trace(i, j) +
                             t.grad_scale(i, j) * (sy_r - sx_r);
            h(i, j) = v;
            h(j, i) = v;
        }
    }
    if (!h.allFinite()) {
        throw NumericError("stein_gram: non-finite Stein kernel value");
    }
    return SteinGram(std::move(h));
}

template <ExpFamilyModel M>
SteinMoments stein_moments_from_table(const M& model, const PairTable& t, const Dataset& data) {
    const Eigen::Index n = data.cols();
    const Eigen::Index d = data.rows();
    const Eigen::Index k = model.natural_dim();
    if (d != model.dim()) {
        throw InputError("stein_moments: data dimension " + std::to_string(d) +
                         " does not match model dimension " + std::to_string(model.dim()));
    }

    // grad_t stacked per spatial coordinate: gt[m] is k x n with column i = d t(x_i) / dx_m.
    std::vector<Matrix> gt(static_cast<std::size_t>(d), Matrix(k, n));
    Matrix gb(d, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vector x = data.col(i);
        const Matrix g = model.grad_t(x);
        if (g.rows() != k || g.cols() != d) {
            throw InputError("stein_moments: grad_t has wrong shape");
        }
        for (Eigen::Index m = 0; m < d; ++m) gt[static_cast<std::size_t>(m)].col(i) = g.col(m);
        gb.col(i) = model.grad_b(x);
    }
    if (!gb.allFinite()) throw NumericError("stein_moments: grad_b is not finite");
    for (const auto& g : gt) {
        if (!g.allFinite()) throw NumericError("stein_moments: grad_t is not finite");
    }

    SteinMoments out{Matrix::Zero(k, k), Vector::Zero(k), 0.0};
    Matrix antisym(n, n);  // g_ij r_ij along one coordinate
    double offset = t.cross_trace.sum();
    for (Eigen::Index m = 0; m < d; ++m) {
        const Matrix& g = gt[static_cast<std::size_t>(m)];
        const Vector b = gb.row(m).transpose();
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = 0; i < n; ++i) {
                antisym(i, j) = t.grad_scale(i, j) * (data(m, i) - data(m, j));
            }
        }
        const Vector kb = t.value * b;
        const Vector a_row = antisym.rowwise().sum();
        out.lambda_n.noalias() += g * t.value * g.transpose();
        out.nu_n.noalias() += 2.0 * g * (kb - a_row);
        // sum_ij A_ij (b_j - b_i)
        offset += b.dot(kb) + (antisym * b).sum() - b.dot(a_row);
    }
    // Cross-coordinate score products k_ij gb_i . gb_j are already complete above
    // because gb_i . gb_j = sum_m gb_i[m] gb_j[m].

    const double nn = static_cast<double>(n) * static_cast<double>(n);
    out.lambda_n /= nn;
    out.lambda_n = 0.5 * (out.lambda_n + out.lambda_n.transpose()).eval();
    out.nu_n /= nn;
    out.offset = offset / nn;
    return out;
}

inline double condition_number(const Matrix& a, double* lo = nullptr, double* hi = nullptr) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
    const double lmin = eig.eigenvalues().minCoeff();
    const double lmax = eig.eigenvalues().maxCoeff();
    if (lo) *lo = lmin;
    if (hi) *hi = lmax;
    return lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();
}

/// Solves Lambda_n z = -nu_n / 2 under the options' conditioning policy.
inline Vector solve_natural(const SteinMoments& mom, const EstimatorOptions& opt, double& condition,
                            double& ridge) {
    const Matrix& lam = mom.lambda_n;
    const Eigen::Index k = lam.rows();
    if (!lam.allFinite() || !mom.nu_n.allFinite()) {
        throw EstimationError("estimate: Stein moments are not finite",
                              std::numeric_limits<double>::infinity());
    }
    double lmin = 0.0, lmax = 0.0;
    condition = condition_number(lam, &lmin, &lmax);
    ridge = 0.0;
    if (!(lmax > 0.0)) {
        throw EstimationError("estimate: Lambda_n is zero", condition);
    }
    const Vector rhs = -0.5 * mom.nu_n;

    if (condition <= opt.max_condition) {
        Eigen::LLT<Matrix> llt(lam);
        if (llt.info() == Eigen::Success) return llt.solve(rhs);
        ridge = opt.jitter * lam.trace() / static_cast<double>(k);
        Eigen::LLT<Matrix> retry(lam + ridge * Matrix::Identity(k, k));
        if (retry.info() == Eigen::Success) return retry.solve(rhs);
        throw EstimationError("estimate: Cholesky factorization of Lambda_n failed", condition);
    }
    if (!opt.allow_ridge) {
        throw EstimationError("estimate: Lambda_n is ill-conditioned (condition " +
                                  std::to_string(condition) + ")",
                              condition);
    }
    const double target = opt.ridge_condition;
    ridge = std::max(0.0, (lmax - target * lmin) / (target - 1.0));
    Eigen::LLT<Matrix> llt(lam + ridge * Matrix::Identity(k, k));
    if (llt.info() != Eigen::Success) {
        throw EstimationError("estimate: regularized Lambda_n is not positive definite", condition);
    }
    return llt.solve(rhs);
}

}  // namespace detail

/// Lambda_n, nu_n and the parameter-free offset, averaged over all n^2 ordered pairs.
template <ExpFamilyModel M>
SteinMoments stein_moments(const M& model, const KernelSpec& k, const Dataset& data) {
    detail::require_nonempty(data, "stein_moments");
    return detail::stein_moments_from_table(model, detail::pair_table(k, data), data);
}

/// Closed-form minimum-KSD estimate theta_hat = eta^-1(-1/2 Lambda_n^-1 nu_n).
/// Only eta, t and b of `model` are used; its current theta is ignored.
template <ExpFamilyModel M>
EstimateResult closed_form_estimate(const M& model, const KernelSpec& k, const Dataset& data,
                                    const EstimatorOptions& opt = {}) {
    detail::require_nonempty(data, "closed_form_estimate");
    const detail::PairTable table = detail::pair_table(k, data);
    const SteinMoments mom = detail::stein_moments_from_table(model, table, data);

    EstimateResult out;
    out.natural = detail::solve_natural(mom, opt, out.lambda_condition, out.ridge);
    if (!out.natural.allFinite()) {
        throw EstimationError("estimate: solution is not finite", out.lambda_condition);
    }
    out.theta_hat = model.eta_inverse(out.natural);
    const M fitted = model.with_theta(out.theta_hat);
    const Matrix s = detail::scores_at(score_of(fitted), data, "closed_form_estimate");
    out.objective = detail::stein_gram_from_table(table, data, s).mean();
    return out;
}

/// Brute-force argmin of KSD^2 over a finite parameter grid; the first
/// minimizer in grid order wins.
template <ExpFamilyModel M>
EstimateResult grid_minimize_ksd(const M& family, const KernelSpec& k, const Dataset& data,
                                 std::span<const Vector> grid) {
    if (grid.empty()) throw InputError("grid_minimize_ksd: empty grid");
    detail::require_nonempty(data, "grid_minimize_ksd");
    const detail::PairTable table = detail::pair_table(k, data);
    EstimateResult best;
    best.objective = std::numeric_limits<double>::infinity();
    for (const Vector& theta : grid) {
        const M model = family.with_theta(theta);
        const Matrix s = detail::scores_at(score_of(model), data, "grid_minimize_ksd");
        const double value = detail::stein_gram_from_table(table, data, s).mean();
        if (value < best.objective) {
            best.objective = value;
            best.theta_hat = theta;
        }
    }
    if (best.theta_hat.size() == 0) {
        throw NumericError("grid_minimize_ksd: no finite objective on the grid");
    }
    best.natural = family.eta(best.theta_hat);
    return best;
}

}  // namespace ksdgof
