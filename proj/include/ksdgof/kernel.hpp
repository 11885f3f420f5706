#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ksdgof/errors.hpp"
#include "ksdgof/types.hpp"

namespace ksdgof {

enum class KernelFamily { Gaussian, IMQ };

inline std::string to_string(KernelFamily family) {
    return family == KernelFamily::Gaussian ? "gaussian" : "imq";
}

/// A radial base kernel on R^d.
///
///   Gaussian: k(x, y) = exp(-|x - y|^2 / (2 l^2))
///   IMQ:      k(x, y) = (1 + |x - y|^2 / l^2)^(-1/2)
///
/// Both satisfy k(x, x) = 1.
class KernelSpec {
public:
    KernelSpec(KernelFamily family, double lengthscale) : family_(family), lengthscale_(lengthscale) {
        if (!(lengthscale > 0.0) || !std::isfinite(lengthscale)) {
            throw InputError("KernelSpec: lengthscale must be positive and finite, got " +
                             std::to_string(lengthscale));
        }
    }

    static KernelSpec gaussian(double lengthscale) { return {KernelFamily::Gaussian, lengthscale}; }
    static KernelSpec imq(double lengthscale) { return {KernelFamily::IMQ, lengthscale}; }

    [[nodiscard]] KernelFamily family() const noexcept { return family_; }
    [[nodiscard]] double lengthscale() const noexcept { return lengthscale_; }

    friend bool operator==(const KernelSpec&, const KernelSpec&) = default;

private:
    KernelFamily family_;
    double lengthscale_;
};

/// Everything the Stein kernel needs from one pair (x, y), in terms of
/// r = x - y:
///   k(x, y)          = value
///   grad_x k(x, y)   =  grad_scale * r
///   grad_y k(x, y)   = -grad_scale * r
///   div_x grad_y k   = cross_trace
struct RadialTerms {
    double value;
    double grad_scale;
    double cross_trace;
};

/// Writing k = f(s) with s = |r|^2, the gradient is 2 f'(s) r and the mixed
/// trace is -(2 d f'(s) + 4 s f''(s)).
inline RadialTerms radial_terms(const KernelSpec& k, double sq_dist, Eigen::Index dim) {
    const double l2 = k.lengthscale() * k.lengthscale();
    const double d = static_cast<double>(dim);
    if (k.family() == KernelFamily::Gaussian) {
        const double f = std::exp(-sq_dist / (2.0 * l2));
        return {f, -f / l2, f * (d / l2 - sq_dist / (l2 * l2))};
    }
    const double u = 1.0 + sq_dist / l2;
    const double u_half = std::sqrt(u);
    const double f = 1.0 / u_half;           // u^(-1/2)
    const double f3 = f / u;                 // u^(-3/2)
    const double f5 = f3 / u;                // u^(-5/2)
    return {f, -f3 / l2, d * f3 / l2 - 3.0 * sq_dist * f5 / (l2 * l2)};
}

inline double eval(const KernelSpec& k, const ConstPoint& x, const ConstPoint& y) {
    detail::require_same_dim(x.size(), y.size(), "kernel eval");
    return radial_terms(k, (x - y).squaredNorm(), x.size()).value;
}

inline Vector grad_x(const KernelSpec& k, const ConstPoint& x, const ConstPoint& y) {
    detail::require_same_dim(x.size(), y.size(), "kernel grad_x");
    const Vector r = x - y;
    return radial_terms(k, r.squaredNorm(), x.size()).grad_scale * r;
}

inline Vector grad_y(const KernelSpec& k, const ConstPoint& x, const ConstPoint& y) {
    detail::require_same_dim(x.size(), y.size(), "kernel grad_y");
    const Vector r = x - y;
    return -radial_terms(k, r.squaredNorm(), x.size()).grad_scale * r;
}

/// Trace of the mixed second-derivative matrix, sum_m d^2 k / dx_m dy_m.
inline double div_grad_xy(const KernelSpec& k, const ConstPoint& x, const ConstPoint& y) {
    detail::require_same_dim(x.size(), y.size(), "kernel div_grad_xy");
    return radial_terms(k, (x - y).squaredNorm(), x.size()).cross_trace;
}

/// Median-heuristic lengthscale sqrt(median(d_ij / 2)) over all n^2 ordered
/// pairs, diagonal included. The median is element floor(m / 2) (0-based) of
/// the m sorted values, which for even m is the upper of the two middle values.
inline double median_heuristic(const Dataset& data) {
    const Eigen::Index n = data.cols();
    if (n < 2) {
        throw InputError("median_heuristic: need at least two points");
    }
    std::vector<double> half_sq;
    half_sq.reserve(static_cast<std::size_t>(n * n));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            half_sq.push_back((data.col(i) - data.col(j)).squaredNorm() / 2.0);
        }
    }
    const auto mid = half_sq.begin() + static_cast<std::ptrdiff_t>(half_sq.size() / 2);
    std::nth_element(half_sq.begin(), mid, half_sq.end());
    const double median = *mid;
    if (!(median > 0.0)) {
        throw DegenerateBandwidthError("median_heuristic: median squared distance is zero");
    }
    return std::sqrt(median);
}

}  // namespace ksdgof
