#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "ksdgof/errors.hpp"
#include "ksdgof/estimate.hpp"
#include "ksdgof/kernel.hpp"
#include "ksdgof/model.hpp"
#include "ksdgof/rng.hpp"
#include "ksdgof/stein.hpp"

namespace ksdgof {

enum class TestMethod { Wild, Parametric };

inline std::string to_string(TestMethod m) { return m == TestMethod::Wild ? "wild" : "parametric"; }

struct TestConfig {
    double alpha = 0.05;
    std::size_t replicates = 300;  ///< bootstrap count b
    std::uint64_t seed = 0;
    TestMethod method = TestMethod::Parametric;
    unsigned threads = 1;  ///< replicate workers; results do not depend on it

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0)) {
            throw ConfigError("TestConfig: alpha must lie in (0, 1), got " + std::to_string(alpha));
        }
        if (replicates < 1) throw ConfigError("TestConfig: need at least one bootstrap replicate");
        if (threads < 1) throw ConfigError("TestConfig: threads must be >= 1");
    }
};

struct TestResult {
    double delta = 0.0;    ///< n KSD^2(P_theta_hat, Q_n)
    double c_alpha = 0.0;  ///< (1 - alpha) quantile of the replicates
    bool reject = false;   ///< delta >= c_alpha
    std::vector<double> replicates;
    TestMethod method = TestMethod::Parametric;
};

/// The ceil(q b)-th smallest value (1-based). Products within 1e-9 of an
/// integer are snapped to it, so 0.95 * 100 selects the 95th value.
inline double empirical_quantile(std::span<const double> values, double q) {
    if (values.empty()) throw InputError("empirical_quantile: no values");
    if (!(q > 0.0 && q < 1.0)) {
        throw InputError("empirical_quantile: q must lie in (0, 1), got " + std::to_string(q));
    }
    const auto b = static_cast<double>(values.size());
    const double pos = q * b;
    const double nearest = std::round(pos);
    const double rank = std::abs(pos - nearest) < 1e-9 ? nearest : std::ceil(pos);
    const auto idx = static_cast<std::size_t>(std::clamp(rank, 1.0, b)) - 1;
    std::vector<double> sorted(values.begin(), values.end());
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(idx), sorted.end());
    return sorted[idx];
}

namespace detail {

// Stream tags keep wild and parametric draws apart under the same root seed.
inline constexpr std::uint64_t kWildStream = 0x57494c44;   // "WILD"
inline constexpr std::uint64_t kParamStream = 0x50415241;  // "PARA"

/// Runs fn(0..count-1) on `threads` workers. fn must write only to its own
/// slot. If several indices throw, the lowest index's exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::mutex mu;
    std::exception_ptr first_error;
    std::size_t first_index = std::numeric_limits<std::size_t>::max();
    const auto workers = static_cast<std::size_t>(std::min<std::size_t>(threads, count));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < count; i += workers) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (i < first_index) {
                        first_index = i;
                        first_error = std::current_exception();
                    }
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

inline TestResult finish(double delta, std::vector<double> replicates, double alpha, TestMethod m) {
    TestResult out;
    out.delta = delta;
    out.c_alpha = empirical_quantile(replicates, 1.0 - alpha);
    out.reject = out.delta >= out.c_alpha;
    out.replicates = std::move(replicates);
    out.method = m;
    return out;
}

}  // namespace detail

/// n independent +-1 weights, each with probability 1/2.
inline Vector rademacher_weights(Eigen::Index n, Engine& rng) {
    Vector w(n);
    std::uint64_t bits = 0;
    int left = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (left == 0) {
            bits = rng();
            left = 64;
        }
        w[i] = (bits & 1U) ? 1.0 : -1.0;
        bits >>= 1;
        --left;
    }
    return w;
}

/// One wild-bootstrap statistic (1/n) w' H w.
inline double wild_replicate(const SteinGram& gram, const Vector& weights) {
    return gram.quadratic_form(weights) / static_cast<double>(gram.n());
}

/// The wild bootstrap on a precomputed gram; the gram is shared read-only by
/// all replicates.
inline TestResult wild_bootstrap_from_gram(const SteinGram& gram, const TestConfig& cfg) {
    cfg.validate();
    const double delta = gram.total() / static_cast<double>(gram.n());
    std::vector<double> reps(cfg.replicates);
    detail::parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
        Engine rng = make_stream(cfg.seed, {detail::kWildStream, r});
        reps[r] = wild_replicate(gram, rademacher_weights(gram.n(), rng));
    });
    return detail::finish(delta, std::move(reps), cfg.alpha, TestMethod::Wild);
}

/// Wild-bootstrap test of the model with score `score` (already fitted).
template <ScoreOracle F>
TestResult wild_bootstrap_test(const F& score, const KernelSpec& k, const Dataset& data,
                               const TestConfig& cfg) {
    detail::require_nonempty(data, "wild_bootstrap_test");
    return wild_bootstrap_from_gram(stein_gram(score, k, data), cfg);
}

/// Parametric-bootstrap test. Each replicate draws n points from
/// P_theta_hat, refits by the closed-form estimator, and records n KSD^2 of
/// the refit on the fresh sample. A failing replicate is retried once on a new
/// stream; a second failure aborts the test.
template <ExpFamilyModel M>
TestResult parametric_bootstrap_test(const M& family, const KernelSpec& k, const Dataset& data,
                                     const Vector& theta_hat, const TestConfig& cfg,
                                     const EstimatorOptions& opt = {}) {
    cfg.validate();
    detail::require_nonempty(data, "parametric_bootstrap_test");
    const M fitted = family.with_theta(theta_hat);
    const auto n = static_cast<std::size_t>(data.cols());
    const double nd = static_cast<double>(n);
    const double delta = nd * ksd_squared_vstat(score_of(fitted), k, data);

    std::vector<double> reps(cfg.replicates);
    detail::parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
        std::string last_error;
        for (std::uint64_t attempt = 0; attempt < 2; ++attempt) {
            try {
                Engine rng = make_stream(cfg.seed, {detail::kParamStream, r, attempt});
                const Dataset fresh = fitted.sample(n, rng);
                reps[r] = nd * closed_form_estimate(family, k, fresh, opt).objective;
                return;
            } catch (const NumericError& e) {
                last_error = e.what();
            }
        }
        throw BootstrapAbort("parametric bootstrap: replicate " + std::to_string(r) +
                                 " failed twice: " + last_error,
                             r);
    });
    return detail::finish(delta, std::move(reps), cfg.alpha, TestMethod::Parametric);
}

}  // namespace ksdgof
