#pragma once

#include <cmath>
#include <concepts>
#include <string>
#include <utility>

#include "ksdgof/errors.hpp"
#include "ksdgof/kernel.hpp"
#include "ksdgof/types.hpp"

namespace ksdgof {

/// A callable returning grad log p(x) for an unnormalized density p.
template <typename F>
concept ScoreOracle = requires(const F& f, const Vector& x) {
    { f(x) } -> std::convertible_to<Vector>;
};

/// Adapts any model exposing score(x) to a ScoreOracle.
template <typename Model>
auto score_of(const Model& model) {
    return [&model](const Vector& x) -> Vector { return model.score(x); };
}

namespace detail {

inline void require_finite_score(const Vector& s, Eigen::Index dim, const char* where) {
    if (s.size() != dim) {
        throw InputError(std::string(where) + ": score dimension " + std::to_string(s.size()) +
                         " does not match point dimension " + std::to_string(dim));
    }
    if (!s.allFinite()) {
        throw NumericError(std::string(where) + ": score is not finite");
    }
}

/// h(x, y) = k s_x.s_y + div_x grad_y k + s_x.grad_y k + s_y.grad_x k
template <typename P, typename Q, typename S, typename T>
double stein_pair(const KernelSpec& k, const P& x, const Q& y, const S& sx, const T& sy) {
    double sq = 0.0, sx_r = 0.0, sy_r = 0.0;
    for (Eigen::Index m = 0; m < x.size(); ++m) {
        const double r = x[m] - y[m];
        sq += r * r;
        sx_r += sx[m] * r;
        sy_r += sy[m] * r;
    }
    const RadialTerms t = radial_terms(k, sq, x.size());
    return t.value * sx.dot(sy) + t.cross_trace + t.grad_scale * (sy_r - sx_r);
}

template <ScoreOracle F>
Matrix scores_at(const F& score, const Dataset& data, const char* where) {
    Matrix out(data.rows(), data.cols());
    for (Eigen::Index i = 0; i < data.cols(); ++i) {
        Vector s = score(Vector(data.col(i)));
        require_finite_score(s, data.rows(), where);
        out.col(i) = s;
    }
    return out;
}

}  // namespace detail

/// The Langevin Stein kernel h(x, y) for the model whose score is `score`.
template <ScoreOracle F>
double stein_h(const F& score, const KernelSpec& k, const ConstPoint& x, const ConstPoint& y) {
    detail::require_same_dim(x.size(), y.size(), "stein_h");
    const Vector sx = score(Vector(x));
    const Vector sy = score(Vector(y));
    detail::require_finite_score(sx, x.size(), "stein_h");
    detail::require_finite_score(sy, y.size(), "stein_h");
    return detail::stein_pair(k, x, y, sx, sy);
}

/// The n x n matrix of Stein kernel values h(x_i, x_j).
class SteinGram {
public:
    explicit SteinGram(Matrix values) : values_(std::move(values)) {
        if (values_.rows() != values_.cols()) {
            throw InputError("SteinGram: matrix must be square");
        }
    }

    [[nodiscard]] const Matrix& values() const noexcept { return values_; }
    [[nodiscard]] Eigen::Index n() const noexcept { return values_.rows(); }
    [[nodiscard]] double operator()(Eigen::Index i, Eigen::Index j) const { return values_(i, j); }

    /// Sum of all entries, accumulated row by row: sum_i (sum_j h_ij).
    /// Every statistic built from the gram uses this order, so results are
    /// bit-stable for a given input.
    [[nodiscard]] double total() const {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n(); ++i) acc += row_sum(i);
        return acc;
    }

    /// sum_i w_i (sum_j w_j h_ij), in the same order as total().
    [[nodiscard]] double quadratic_form(const Vector& w) const {
        if (w.size() != n()) {
            throw InputError("SteinGram::quadratic_form: weight length mismatch");
        }
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n(); ++i) {
            double row = 0.0;
            for (Eigen::Index j = 0; j < n(); ++j) row += w[j] * values_(j, i);
            acc += w[i] * row;
        }
        return acc;
    }

    /// KSD^2 as a V-statistic: total() / n^2.
    [[nodiscard]] double mean() const {
        const auto nn = static_cast<double>(n());
        return total() / (nn * nn);
    }

private:
    // Column-major storage; symmetry lets us read row i as column i.
    [[nodiscard]] double row_sum(Eigen::Index i) const {
        double row = 0.0;
        for (Eigen::Index j = 0; j < n(); ++j) row += values_(j, i);
        return row;
    }

    Matrix values_;
};

/// Evaluates the upper triangle and mirrors it.
template <ScoreOracle F>
SteinGram stein_gram(const F& score, const KernelSpec& k, const Dataset& data) {
    detail::require_nonempty(data, "stein_gram");
    const Matrix s = detail::scores_at(score, data, "stein_gram");
    const Eigen::Index n = data.cols();
    Matrix h(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i <= j; ++i) {
            const double v = detail::stein_pair(k, data.col(i), data.col(j), s.col(i), s.col(j));
            h(i, j) = v;
            h(j, i) = v;
        }
    }
    if (!h.allFinite()) {
        throw NumericError("stein_gram: non-finite Stein kernel value");
    }
    return SteinGram(std::move(h));
}

/// KSD^2(P, Q_n) = (1/n^2) sum_{i,j} h(x_i, x_j), diagonal included.
template <ScoreOracle F>
double ksd_squared_vstat(const F& score, const KernelSpec& k, const Dataset& data) {
    detail::require_nonempty(data, "ksd_squared_vstat");
    return stein_gram(score, k, data).mean();
}

}  // namespace ksdgof
