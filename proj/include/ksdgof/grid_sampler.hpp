#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <string>
#include <vector>

#include "ksdgof/errors.hpp"
#include "ksdgof/rng.hpp"

namespace ksdgof {

/// Inverse-CDF sampler for a one-dimensional unnormalized density.
///
/// The log-density is tabulated on a uniform grid over [lo, hi], shifted by
/// its maximum, exponentiated, and integrated with the trapezoid rule. Draws
/// invert the normalized cumulative table by linear interpolation, so the
/// sampled law is exactly the piecewise-linear CDF held in the table.
class GridInverseCdf {
public:
    static constexpr double kDefaultHalfWidth = 10.0;
    static constexpr std::size_t kDefaultPoints = 8192;

    template <typename LogDensity>
        requires std::invocable<const LogDensity&, double>
    GridInverseCdf(const LogDensity& log_density, double lo, double hi, std::size_t points)
        : lo_(lo), hi_(hi) {
        if (!(hi > lo) || points < 2) {
            throw InputError("GridInverseCdf: need hi > lo and at least two grid points");
        }
        step_ = (hi - lo) / static_cast<double>(points - 1);
        std::vector<double> logp(points);
        double peak = -INFINITY;
        for (std::size_t i = 0; i < points; ++i) {
            logp[i] = log_density(node(i));
            if (std::isnan(logp[i]) || logp[i] == INFINITY) {
                throw SamplingError("GridInverseCdf: log-density is not finite at x = " +
                                    std::to_string(node(i)));
            }
            peak = std::max(peak, logp[i]);
        }
        if (!std::isfinite(peak)) {
            throw SamplingError("GridInverseCdf: density vanishes on the whole grid");
        }
        cdf_.assign(points, 0.0);
        double prev = std::exp(logp[0] - peak);
        for (std::size_t i = 1; i < points; ++i) {
            const double cur = std::exp(logp[i] - peak);
            cdf_[i] = cdf_[i - 1] + 0.5 * (prev + cur) * step_;
            prev = cur;
        }
        const double mass = cdf_.back();
        if (!(mass > 0.0) || !std::isfinite(mass)) {
            throw SamplingError("GridInverseCdf: cumulative mass is numerically zero");
        }
        for (double& c : cdf_) c /= mass;
        cdf_.back() = 1.0;
    }

    template <typename LogDensity>
        requires std::invocable<const LogDensity&, double>
    explicit GridInverseCdf(const LogDensity& log_density)
        : GridInverseCdf(log_density, -kDefaultHalfWidth, kDefaultHalfWidth, kDefaultPoints) {}

    /// Maps u in [0, 1) to the table's quantile.
    [[nodiscard]] double quantile(double u) const {
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        if (it == cdf_.end()) return hi_;
        if (it == cdf_.begin()) return lo_;
        const auto idx = static_cast<std::size_t>(it - cdf_.begin());
        const double c0 = cdf_[idx - 1];
        const double c1 = cdf_[idx];
        return node(idx - 1) + (u - c0) / (c1 - c0) * step_;
    }

    /// The tabulated CDF, linearly interpolated between nodes.
    [[nodiscard]] double cdf(double x) const {
        if (x <= lo_) return 0.0;
        if (x >= hi_) return 1.0;
        const double pos = (x - lo_) / step_;
        const auto idx = std::min(static_cast<std::size_t>(pos), cdf_.size() - 2);
        const double frac = pos - static_cast<double>(idx);
        return cdf_[idx] + frac * (cdf_[idx + 1] - cdf_[idx]);
    }

    [[nodiscard]] std::vector<double> sample(std::size_t n, Engine& rng) const {
        std::vector<double> out(n);
        for (double& v : out) v = quantile(uniform01(rng));
        return out;
    }

    [[nodiscard]] double lo() const noexcept { return lo_; }
    [[nodiscard]] double hi() const noexcept { return hi_; }
    [[nodiscard]] std::size_t points() const noexcept { return cdf_.size(); }

private:
    [[nodiscard]] double node(std::size_t i) const {
        return lo_ + static_cast<double>(i) * step_;
    }

    double lo_;
    double hi_;
    double step_ = 0.0;
    std::vector<double> cdf_;
};

}  // namespace ksdgof
