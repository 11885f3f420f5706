#pragma once

#include <cmath>
#include <concepts>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ksdgof/errors.hpp"
#include "ksdgof/grid_sampler.hpp"
#include "ksdgof/rng.hpp"
#include "ksdgof/types.hpp"

namespace ksdgof {

// Exponential-family models p_theta(x) = exp(eta(theta) . t(x) - a(theta) + b(x)).
//
// The log-partition a(theta) is never computed: the Stein discrepancy and the
// closed-form estimator only see eta, t, b and their spatial gradients, so all
// densities here are unnormalized.

/// What the estimator and the bootstrap need from a model.
template <typename M>
concept ExpFamilyModel = requires(const M& m, const Vector& x, const Vector& theta, Engine& rng) {
    { m.dim() } -> std::convertible_to<Eigen::Index>;
    { m.natural_dim() } -> std::convertible_to<Eigen::Index>;
    { m.theta() } -> std::convertible_to<Vector>;
    { m.eta(theta) } -> std::convertible_to<Vector>;
    { m.eta_inverse(theta) } -> std::convertible_to<Vector>;
    { m.t(x) } -> std::convertible_to<Vector>;
    { m.grad_t(x) } -> std::convertible_to<Matrix>;  // k x d
    { m.b(x) } -> std::convertible_to<double>;
    { m.grad_b(x) } -> std::convertible_to<Vector>;
    { m.score(x) } -> std::convertible_to<Vector>;
    { m.log_density_unnormalized(x) } -> std::convertible_to<double>;
    { m.with_theta(theta) } -> std::same_as<M>;
    { m.sample(std::size_t{1}, rng) } -> std::convertible_to<Dataset>;
};

namespace detail {

inline Vector exp_family_score(const Matrix& grad_t, const Vector& natural, const Vector& grad_b) {
    Vector s = grad_t.transpose() * natural + grad_b;
    if (!s.allFinite()) {
        throw NumericError("score: non-finite value");
    }
    return s;
}

inline void require_scalar_point(const Vector& x, const char* where) {
    if (x.size() != 1) {
        throw InputError(std::string(where) + ": model is one-dimensional, got d = " +
                         std::to_string(x.size()));
    }
}

inline void require_param_size(const Vector& theta, Eigen::Index expected, const char* where) {
    if (theta.size() != expected) {
        throw InputError(std::string(where) + ": expected " + std::to_string(expected) +
                         " parameters, got " + std::to_string(theta.size()));
    }
    if (!theta.allFinite()) {
        throw NumericError(std::string(where) + ": parameter is not finite");
    }
}

}  // namespace detail

/// N(mu, sigma2) with sigma2 fixed: eta(mu) = mu / sigma2, t(x) = x,
/// b(x) = log(1 / sqrt(2 pi sigma2)) - x^2 / (2 sigma2).
class GaussianLocationModel {
public:
    GaussianLocationModel(double mu, double sigma2) : mu_(mu), sigma2_(sigma2) {
        if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
            throw InputError("GaussianLocationModel: sigma2 must be positive");
        }
        if (!std::isfinite(mu)) {
            throw NumericError("GaussianLocationModel: mu is not finite");
        }
    }

    [[nodiscard]] double mu() const noexcept { return mu_; }
    [[nodiscard]] double sigma2() const noexcept { return sigma2_; }

    [[nodiscard]] Eigen::Index dim() const noexcept { return 1; }
    [[nodiscard]] Eigen::Index natural_dim() const noexcept { return 1; }
    [[nodiscard]] Vector theta() const { return Vector::Constant(1, mu_); }

    [[nodiscard]] Vector eta(const Vector& theta) const {
        detail::require_param_size(theta, 1, "GaussianLocationModel::eta");
        return theta / sigma2_;
    }
    [[nodiscard]] Vector eta_inverse(const Vector& natural) const {
        detail::require_param_size(natural, 1, "GaussianLocationModel::eta_inverse");
        return natural * sigma2_;
    }

    [[nodiscard]] Vector t(const Vector& x) const {
        detail::require_scalar_point(x, "GaussianLocationModel::t");
        return x;
    }
    [[nodiscard]] Matrix grad_t(const Vector& x) const {
        detail::require_scalar_point(x, "GaussianLocationModel::grad_t");
        return Matrix::Ones(1, 1);
    }
    [[nodiscard]] double b(const Vector& x) const {
        detail::require_scalar_point(x, "GaussianLocationModel::b");
        return -0.5 * std::log(2.0 * std::numbers::pi * sigma2_) - x[0] * x[0] / (2.0 * sigma2_);
    }
    [[nodiscard]] Vector grad_b(const Vector& x) const {
        detail::require_scalar_point(x, "GaussianLocationModel::grad_b");
        return -x / sigma2_;
    }

    [[nodiscard]] Vector score(const Vector& x) const {
        return detail::exp_family_score(grad_t(x), eta(theta()), grad_b(x));
    }
    [[nodiscard]] double log_density_unnormalized(const Vector& x) const {
        return eta(theta()).dot(t(x)) + b(x);
    }

    [[nodiscard]] GaussianLocationModel with_theta(const Vector& theta) const {
        detail::require_param_size(theta, 1, "GaussianLocationModel::with_theta");
        return {theta[0], sigma2_};
    }

    [[nodiscard]] Dataset sample(std::size_t n, Engine& rng) const {
        if (n < 1) throw InputError("GaussianLocationModel::sample: n must be at least 1");
        std::normal_distribution<double> normal(0.0, 1.0);
        const double sd = std::sqrt(sigma2_);
        Dataset out(1, static_cast<Eigen::Index>(n));
        for (Eigen::Index i = 0; i < out.cols(); ++i) out(0, i) = mu_ + sd * normal(rng);
        return out;
    }

private:
    double mu_;
    double sigma2_;
};

/// phi_i(x) = x^i / sqrt(i!) exp(-x^2 / 2), evaluated in log space.
inline double basis_phi(int i, double x) {
    if (i < 1) throw InputError("basis_phi: index must be >= 1, got " + std::to_string(i));
    if (x == 0.0) return 0.0;
    const double mag = std::exp(i * std::log(std::abs(x)) - 0.5 * std::lgamma(i + 1.0) - 0.5 * x * x);
    return (x < 0.0 && i % 2 == 1) ? -mag : mag;
}

/// phi_i'(x) = (i x^(i-1) - x^(i+1)) / sqrt(i!) exp(-x^2 / 2).
inline double basis_phi_grad(int i, double x) {
    if (i < 1) throw InputError("basis_phi_grad: index must be >= 1, got " + std::to_string(i));
    const double poly = static_cast<double>(i) - x * x;
    if (i == 1) return poly * std::exp(-0.5 * x * x);
    if (x == 0.0) return 0.0;
    const double mag =
        std::exp((i - 1) * std::log(std::abs(x)) - 0.5 * std::lgamma(i + 1.0) - 0.5 * x * x);
    return ((x < 0.0 && (i - 1) % 2 == 1) ? -mag : mag) * poly;
}

/// Kernel exponential family on R: p(x) ∝ q(x) exp(sum_i theta_i phi_i(x))
/// with reference density q = N(0, reference_sd^2). Here eta is the identity,
/// t = (phi_1, ..., phi_p) and b = log q.
class KernelExpFamilyModel {
public:
    static constexpr double kDefaultReferenceSd = 3.0;

    explicit KernelExpFamilyModel(Vector theta, double reference_sd = kDefaultReferenceSd)
        : theta_(std::move(theta)),
          reference_sd_(reference_sd),
          cache_(std::make_shared<SamplerCache>()) {
        if (theta_.size() < 1) {
            throw InputError("KernelExpFamilyModel: need at least one basis function");
        }
        if (!theta_.allFinite()) {
            throw NumericError("KernelExpFamilyModel: theta is not finite");
        }
        if (!(reference_sd > 0.0) || !std::isfinite(reference_sd)) {
            throw InputError("KernelExpFamilyModel: reference_sd must be positive");
        }
    }

    /// The zero-parameter model with p basis functions, i.e. the reference density.
    static KernelExpFamilyModel with_basis(int p, double reference_sd = kDefaultReferenceSd) {
        if (p < 1) throw InputError("KernelExpFamilyModel: p must be >= 1");
        return KernelExpFamilyModel(Vector::Zero(p), reference_sd);
    }

    [[nodiscard]] int p_basis() const noexcept { return static_cast<int>(theta_.size()); }
    [[nodiscard]] double reference_sd() const noexcept { return reference_sd_; }

    [[nodiscard]] Eigen::Index dim() const noexcept { return 1; }
    [[nodiscard]] Eigen::Index natural_dim() const noexcept { return theta_.size(); }
    [[nodiscard]] Vector theta() const { return theta_; }

    [[nodiscard]] Vector eta(const Vector& theta) const {
        detail::require_param_size(theta, theta_.size(), "KernelExpFamilyModel::eta");
        return theta;
    }
    [[nodiscard]] Vector eta_inverse(const Vector& natural) const {
        detail::require_param_size(natural, theta_.size(), "KernelExpFamilyModel::eta_inverse");
        return natural;
    }

    [[nodiscard]] double phi(int i, double x) const {
        check_index(i);
        return basis_phi(i, x);
    }
    [[nodiscard]] double phi_grad(int i, double x) const {
        check_index(i);
        return basis_phi_grad(i, x);
    }

    [[nodiscard]] Vector t(const Vector& x) const {
        detail::require_scalar_point(x, "KernelExpFamilyModel::t");
        Vector out(theta_.size());
        for (int i = 1; i <= p_basis(); ++i) out[i - 1] = basis_phi(i, x[0]);
        return out;
    }
    [[nodiscard]] Matrix grad_t(const Vector& x) const {
        detail::require_scalar_point(x, "KernelExpFamilyModel::grad_t");
        Matrix out(theta_.size(), 1);
        for (int i = 1; i <= p_basis(); ++i) out(i - 1, 0) = basis_phi_grad(i, x[0]);
        return out;
    }
    [[nodiscard]] double b(const Vector& x) const {
        detail::require_scalar_point(x, "KernelExpFamilyModel::b");
        const double var = reference_sd_ * reference_sd_;
        return -0.5 * std::log(2.0 * std::numbers::pi * var) - x[0] * x[0] / (2.0 * var);
    }
    [[nodiscard]] Vector grad_b(const Vector& x) const {
        detail::require_scalar_point(x, "KernelExpFamilyModel::grad_b");
        return -x / (reference_sd_ * reference_sd_);
    }

    [[nodiscard]] Vector score(const Vector& x) const {
        return detail::exp_family_score(grad_t(x), theta_, grad_b(x));
    }
    [[nodiscard]] double log_density_unnormalized(const Vector& x) const {
        return theta_.dot(t(x)) + b(x);
    }
    [[nodiscard]] double log_density_unnormalized(double x) const {
        return log_density_unnormalized(Vector::Constant(1, x));
    }

    [[nodiscard]] KernelExpFamilyModel with_theta(const Vector& theta) const {
        detail::require_param_size(theta, theta_.size(), "KernelExpFamilyModel::with_theta");
        return KernelExpFamilyModel(theta, reference_sd_);
    }

    /// The inverse-CDF table used by sample(), built on first use.
    [[nodiscard]] const GridInverseCdf& sampler() const {
        std::call_once(cache_->once, [this] {
            cache_->sampler.emplace([this](double x) { return log_density_unnormalized(x); });
        });
        if (!cache_->sampler) {
            throw SamplingError("KernelExpFamilyModel: sampler construction failed");
        }
        return *cache_->sampler;
    }

    [[nodiscard]] Dataset sample(std::size_t n, Engine& rng) const {
        if (n < 1) throw InputError("KernelExpFamilyModel::sample: n must be at least 1");
        const auto draws = sampler().sample(n, rng);
        return dataset_from_values(draws);
    }

private:
    struct SamplerCache {
        std::once_flag once;
        std::optional<GridInverseCdf> sampler;
    };

    void check_index(int i) const {
        if (i < 1 || i > p_basis()) {
            throw InputError("KernelExpFamilyModel: basis index " + std::to_string(i) +
                             " outside 1.." + std::to_string(p_basis()));
        }
    }

    Vector theta_;
    double reference_sd_;
    std::shared_ptr<SamplerCache> cache_;
};

static_assert(ExpFamilyModel<GaussianLocationModel>);
static_assert(ExpFamilyModel<KernelExpFamilyModel>);

enum class StdConvention { Sample, Population };

/// y'_i = (y_i - mean) / (std / 2): output has mean 0 and standard deviation 2
/// under the same convention.
inline std::vector<double> normalize_dataset(std::span<const double> raw,
                                             StdConvention convention = StdConvention::Sample) {
    const std::size_t n = raw.size();
    if (n < 2) throw InputError("normalize_dataset: need at least two observations");
    const double mean = std::accumulate(raw.begin(), raw.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : raw) ss += (v - mean) * (v - mean);
    const double denom = convention == StdConvention::Sample ? static_cast<double>(n - 1)
                                                             : static_cast<double>(n);
    const double sd = std::sqrt(ss / denom);
    if (!(sd > 0.0) || !std::isfinite(sd)) {
        throw InputError("normalize_dataset: zero or non-finite variance");
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = (raw[i] - mean) / (0.5 * sd);
    return out;
}

}  // namespace ksdgof
