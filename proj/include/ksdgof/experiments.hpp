#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ksdgof/bootstrap.hpp"
#include "ksdgof/errors.hpp"
#include "ksdgof/estimate.hpp"
#include "ksdgof/kernel.hpp"
#include "ksdgof/model.hpp"
#include "ksdgof/rng.hpp"
#include "ksdgof/types.hpp"

namespace ksdgof {

enum class Experiment { PowerCurve, Galaxies, SingleTest, Estimate };

inline std::string to_string(Experiment e) {
    switch (e) {
        case Experiment::PowerCurve: return "power-curve";
        case Experiment::Galaxies: return "galaxies";
        case Experiment::SingleTest: return "test";
        case Experiment::Estimate: return "estimate";
    }
    return "?";
}

enum class ModelFamily { GaussianLocation, KernelExpFamily };

inline std::string to_string(ModelFamily f) {
    return f == ModelFamily::GaussianLocation ? "gaussian-location" : "kef";
}

inline ModelFamily parse_model_family(const std::string& s) {
    if (s == "gaussian-location" || s == "gaussian") return ModelFamily::GaussianLocation;
    if (s == "kef" || s == "kernel-exp-family") return ModelFamily::KernelExpFamily;
    throw ConfigError("unknown model family '" + s + "' (expected gaussian-location or kef)");
}

/// The family used for fitting and testing in the single-shot commands.
struct ModelChoice {
    ModelFamily family = ModelFamily::GaussianLocation;
    double sigma2 = 1.0;  // known variance of the Gaussian location family
    int p_basis = 1;      // number of basis functions of the kernel exponential family
};

/// A base kernel with either a fixed lengthscale or the median heuristic.
struct KernelChoice {
    KernelFamily family = KernelFamily::Gaussian;
    std::optional<double> lengthscale = 0.7;  // empty: median heuristic on the data

    [[nodiscard]] KernelSpec resolve(const Dataset& data) const {
        return KernelSpec(family, lengthscale ? *lengthscale : median_heuristic(data));
    }
};

inline constexpr std::size_t kFullScaleRepeats = 2000;

struct ExperimentSpec {
    Experiment experiment = Experiment::PowerCurve;
    Eigen::Index n = 10;
    std::vector<double> sigma2_grid{0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0};
    double true_mean = 1.3;
    std::size_t repeats = 200;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3};
    std::vector<int> p_basis_list{1, 2, 3, 4, 5, 25};
    KernelChoice kernel;
    std::vector<TestMethod> methods{TestMethod::Wild, TestMethod::Parametric};
    double alpha = 0.05;
    std::size_t wild_b = 500;
    std::size_t parametric_b = 300;
    unsigned threads = 1;
    ModelChoice model;
    EstimatorOptions estimator;
    StdConvention std_convention = StdConvention::Sample;
    std::filesystem::path output_path;

    /// Defaults for each experiment.
    static ExperimentSpec defaults(Experiment e) {
        ExperimentSpec s;
        s.experiment = e;
        switch (e) {
            case Experiment::PowerCurve: break;
            case Experiment::Galaxies:
                s.kernel = KernelChoice{KernelFamily::IMQ, std::nullopt};
                s.methods = {TestMethod::Parametric};
                s.parametric_b = 400;
                s.wild_b = 400;
                s.seeds = {0};
                break;
            case Experiment::SingleTest:
            case Experiment::Estimate:
                s.methods = {TestMethod::Parametric};
                s.seeds = {0};
                break;
        }
        return s;
    }

    [[nodiscard]] std::size_t replicates_for(TestMethod m) const {
        return m == TestMethod::Wild ? wild_b : parametric_b;
    }

    [[nodiscard]] TestConfig test_config(TestMethod m, std::uint64_t seed) const {
        TestConfig cfg;
        cfg.alpha = alpha;
        cfg.replicates = replicates_for(m);
        cfg.seed = seed;
        cfg.method = m;
        cfg.threads = threads;
        return cfg;
    }

    void validate() const {
        if (kernel.lengthscale && !(*kernel.lengthscale > 0.0 && std::isfinite(*kernel.lengthscale))) {
            throw ConfigError("lengthscale must be positive");
        }
        if (seeds.empty()) throw ConfigError("at least one seed is required");
        if (methods.empty()) throw ConfigError("at least one test method is required");
        if (threads < 1) throw ConfigError("threads must be >= 1");
        for (TestMethod m : methods) test_config(m, 0).validate();
        switch (experiment) {
            case Experiment::PowerCurve:
                if (sigma2_grid.empty()) throw ConfigError("sigma2 grid is empty");
                for (double s2 : sigma2_grid) {
                    if (!(s2 > 0.0 && std::isfinite(s2))) throw ConfigError("sigma2 values must be positive");
                }
                if (n < 1) throw ConfigError("n must be >= 1");
                if (repeats < 1) throw ConfigError("repeats must be >= 1");
                if (!std::isfinite(true_mean)) throw ConfigError("true mean must be finite");
                break;
            case Experiment::Galaxies:
                if (p_basis_list.empty()) throw ConfigError("p basis list is empty");
                for (int p : p_basis_list) {
                    if (p < 1) throw ConfigError("p values must be >= 1");
                }
                break;
            case Experiment::SingleTest:
            case Experiment::Estimate:
                if (!(model.sigma2 > 0.0 && std::isfinite(model.sigma2))) {
                    throw ConfigError("model sigma2 must be positive");
                }
                if (model.p_basis < 1) throw ConfigError("p must be >= 1");
                break;
        }
    }
};

/// Runs `fn` with a concrete model object for the runtime family choice.
template <typename Fn>
decltype(auto) with_model(const ModelChoice& choice, Fn&& fn) {
    if (choice.family == ModelFamily::GaussianLocation) {
        return fn(GaussianLocationModel(0.0, choice.sigma2));
    }
    return fn(KernelExpFamilyModel::with_basis(choice.p_basis));
}

namespace detail {

inline constexpr std::uint64_t kDataStream = 0x44415441;     // "DATA"
inline constexpr std::uint64_t kTestStream = 0x54455354;     // "TEST"
inline constexpr std::uint64_t kGalaxyStream = 0x47414c58;   // "GALX"

inline std::uint64_t bits_of(double v) { return std::bit_cast<std::uint64_t>(v); }

/// One 64-bit seed drawn from a named stream.
inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
    Engine e = make_stream(root, path);
    return e();
}

inline std::string coords(double sigma2, std::uint64_t seed, std::size_t repeat) {
    return " [sigma2=" + std::to_string(sigma2) + ", seed=" + std::to_string(seed) +
           ", repeat=" + std::to_string(repeat) + "]";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Power curve

struct PowerRecord {
    double sigma2 = 0.0;
    Eigen::Index n = 0;
    TestMethod method = TestMethod::Parametric;
    std::uint64_t seed = 0;
    double power = 0.0;
    double stderr_ = std::numeric_limits<double>::quiet_NaN();  // across seeds; NaN for one seed
    std::size_t rejections = 0;
    std::size_t repeats = 0;
};

/// Rejection rates for data drawn from N(true_mean, sigma2) tested against the
/// unit-variance Gaussian location family. Every repeat draws its dataset and
/// bootstrap seed from streams keyed by (seed, sigma2, n, repeat), so all
/// methods see the same data. Records are ordered by sigma2, then method, then seed.
inline std::vector<PowerRecord> run_power_curve(const ExperimentSpec& spec) {
    spec.validate();
    const GaussianLocationModel family(0.0, 1.0);
    const auto n = static_cast<std::size_t>(spec.n);
    const std::size_t n_methods = spec.methods.size();
    std::vector<PowerRecord> out;
    out.reserve(spec.sigma2_grid.size() * n_methods * spec.seeds.size());

    for (double sigma2 : spec.sigma2_grid) {
        const GaussianLocationModel truth(spec.true_mean, sigma2);
        const std::uint64_t s2 = detail::bits_of(sigma2);
        // counts[method][seed]
        std::vector<std::vector<std::size_t>> counts(n_methods, std::vector<std::size_t>(spec.seeds.size()));

        for (std::size_t si = 0; si < spec.seeds.size(); ++si) {
            const std::uint64_t seed = spec.seeds[si];
            std::vector<unsigned char> decisions(spec.repeats * n_methods);
            detail::parallel_for(spec.repeats, spec.threads, [&](std::size_t r) {
                try {
                    Engine data_rng = make_stream(seed, {detail::kDataStream, s2, n, r});
                    const Dataset data = truth.sample(n, data_rng);
                    const KernelSpec k = spec.kernel.resolve(data);
                    const EstimateResult est = closed_form_estimate(family, k, data, spec.estimator);
                    const std::uint64_t test_seed = detail::derive_seed(seed, {detail::kTestStream, s2, n, r});
                    std::optional<SteinGram> gram;
                    for (std::size_t mi = 0; mi < n_methods; ++mi) {
                        TestConfig cfg = spec.test_config(spec.methods[mi], test_seed);
                        cfg.threads = 1;
                        TestResult res;
                        if (cfg.method == TestMethod::Wild) {
                            if (!gram) gram = stein_gram(score_of(family.with_theta(est.theta_hat)), k, data);
                            res = wild_bootstrap_from_gram(*gram, cfg);
                        } else {
                            res = parametric_bootstrap_test(family, k, data, est.theta_hat, cfg, spec.estimator);
                        }
                        decisions[r * n_methods + mi] = res.reject ? 1 : 0;
                    }
                } catch (const BootstrapAbort& e) {
                    throw BootstrapAbort(e.what() + detail::coords(sigma2, seed, r), e.replicate());
                } catch (const EstimationError& e) {
                    throw EstimationError(e.what() + detail::coords(sigma2, seed, r), e.condition());
                } catch (const NumericError& e) {
                    throw NumericError(e.what() + detail::coords(sigma2, seed, r));
                }
            });
            for (std::size_t r = 0; r < spec.repeats; ++r)
                for (std::size_t mi = 0; mi < n_methods; ++mi) counts[mi][si] += decisions[r * n_methods + mi];
        }

        const auto reps = static_cast<double>(spec.repeats);
        const auto n_seeds = static_cast<double>(spec.seeds.size());
        for (std::size_t mi = 0; mi < n_methods; ++mi) {
            double mean = 0.0;
            for (std::size_t c : counts[mi]) mean += static_cast<double>(c) / reps;
            mean /= n_seeds;
            double se = std::numeric_limits<double>::quiet_NaN();
            if (spec.seeds.size() > 1) {
                double ss = 0.0;
                for (std::size_t c : counts[mi]) {
                    const double dev = static_cast<double>(c) / reps - mean;
                    ss += dev * dev;
                }
                se = std::sqrt(ss / (n_seeds - 1.0)) / std::sqrt(n_seeds);
            }
            for (std::size_t si = 0; si < spec.seeds.size(); ++si) {
                PowerRecord rec;
                rec.sigma2 = sigma2;
                rec.n = spec.n;
                rec.method = spec.methods[mi];
                rec.seed = spec.seeds[si];
                rec.rejections = counts[mi][si];
                rec.repeats = spec.repeats;
                rec.power = static_cast<double>(rec.rejections) / reps;
                rec.stderr_ = se;
                out.push_back(rec);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Galaxies

struct GalaxiesSeedResult {
    std::uint64_t seed = 0;
    double c_alpha = std::numeric_limits<double>::quiet_NaN();
    bool reject = false;
    std::string error;  // empty on success
};

struct GalaxiesEntry {
    int p = 0;
    std::string error;  // fit failure; the seed results are then empty
    Vector theta_hat;
    double objective = std::numeric_limits<double>::quiet_NaN();
    double condition = std::numeric_limits<double>::quiet_NaN();
    double ridge = 0.0;
    double delta = std::numeric_limits<double>::quiet_NaN();
    std::vector<GalaxiesSeedResult> tests;

    [[nodiscard]] bool ok() const { return error.empty(); }
};

struct GalaxiesReport {
    std::vector<double> data;  // normalized
    KernelSpec kernel = KernelSpec::imq(1.0);
    double alpha = 0.05;
    std::size_t replicates = 0;
    StdConvention std_convention = StdConvention::Sample;
    std::vector<GalaxiesEntry> entries;
};

/// Normalizes the raw velocities, picks the lengthscale, then fits and tests
/// the kernel exponential family for every p. Failures are recorded per p
/// (and per seed) rather than aborting the run.
inline GalaxiesReport run_galaxies(const ExperimentSpec& spec, std::span<const double> raw) {
    spec.validate();
    GalaxiesReport rep;
    rep.std_convention = spec.std_convention;
    rep.data = normalize_dataset(raw, spec.std_convention);
    const Dataset data = dataset_from_values(rep.data);
    rep.kernel = spec.kernel.resolve(data);
    rep.alpha = spec.alpha;
    rep.replicates = spec.parametric_b;

    for (int p : spec.p_basis_list) {
        GalaxiesEntry entry;
        entry.p = p;
        const auto family = KernelExpFamilyModel::with_basis(p);
        try {
            const EstimateResult est = closed_form_estimate(family, rep.kernel, data, spec.estimator);
            entry.theta_hat = est.theta_hat;
            entry.objective = est.objective;
            entry.condition = est.lambda_condition;
            entry.ridge = est.ridge;
            entry.delta = static_cast<double>(data.cols()) * est.objective;
        } catch (const EstimationError& e) {
            entry.error = e.what();
            entry.condition = e.condition();
        } catch (const NumericError& e) {
            entry.error = e.what();
        }
        if (entry.ok()) {
            for (std::uint64_t seed : spec.seeds) {
                GalaxiesSeedResult sr;
                sr.seed = seed;
                const TestConfig cfg = spec.test_config(
                    TestMethod::Parametric,
                    detail::derive_seed(seed, {detail::kGalaxyStream, static_cast<std::uint64_t>(p)}));
                try {
                    const TestResult res =
                        parametric_bootstrap_test(family, rep.kernel, data, entry.theta_hat, cfg, spec.estimator);
                    sr.c_alpha = res.c_alpha;
                    sr.reject = res.reject;
                } catch (const NumericError& e) {
                    sr.error = e.what();
                }
                entry.tests.push_back(sr);
            }
        }
        rep.entries.push_back(std::move(entry));
    }
    return rep;
}

struct DensityPoint {
    int p = 0;
    double x = 0.0;
    double unnormalized = 0.0;  // exp(log density - its maximum on the grid)
    double normalized = 0.0;    // divided by the trapezoid integral over the grid
};

/// Fitted densities on `points` equally spaced points over [min - 1, max + 1].
inline std::vector<DensityPoint> galaxies_density(const GalaxiesReport& rep, std::size_t points = 512) {
    if (points < 2) throw InputError("galaxies_density: need at least two grid points");
    const auto [lo_it, hi_it] = std::minmax_element(rep.data.begin(), rep.data.end());
    const double lo = *lo_it - 1.0, hi = *hi_it + 1.0;
    const double step = (hi - lo) / static_cast<double>(points - 1);
    std::vector<DensityPoint> out;
    for (const auto& e : rep.entries) {
        if (!e.ok()) continue;
        const KernelExpFamilyModel m(e.theta_hat);
        std::vector<double> xs(points), logq(points);
        for (std::size_t i = 0; i < points; ++i) {
            xs[i] = i + 1 == points ? hi : lo + step * static_cast<double>(i);
            logq[i] = m.log_density_unnormalized(Vector::Constant(1, xs[i]));
        }
        const double peak = *std::max_element(logq.begin(), logq.end());
        std::vector<double> q(points);
        for (std::size_t i = 0; i < points; ++i) q[i] = std::exp(logq[i] - peak);
        double mass = 0.0;
        for (std::size_t i = 1; i < points; ++i) mass += 0.5 * (q[i] + q[i - 1]) * (xs[i] - xs[i - 1]);
        for (std::size_t i = 0; i < points; ++i) out.push_back({e.p, xs[i], q[i], q[i] / mass});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Single runs

struct SingleRunReport {
    ModelChoice model;
    Eigen::Index n = 0;
    Eigen::Index dim = 0;
    KernelSpec kernel = KernelSpec::gaussian(1.0);
    EstimateResult estimate;
    std::optional<TestResult> test;
    double alpha = 0.05;
    std::uint64_t seed = 0;
};

inline SingleRunReport run_estimate(const ExperimentSpec& spec, const Dataset& data) {
    spec.validate();
    detail::require_nonempty(data, "run_estimate");
    SingleRunReport rep;
    rep.model = spec.model;
    rep.n = data.cols();
    rep.dim = data.rows();
    rep.kernel = spec.kernel.resolve(data);
    rep.estimate = with_model(spec.model, [&](const auto& family) {
        return closed_form_estimate(family, rep.kernel, data, spec.estimator);
    });
    return rep;
}

/// Fits the model, then runs the first configured test method.
inline SingleRunReport run_single_test(const ExperimentSpec& spec, const Dataset& data) {
    SingleRunReport rep = run_estimate(spec, data);
    rep.seed = spec.seeds.front();
    rep.alpha = spec.alpha;
    const TestConfig cfg = spec.test_config(spec.methods.front(), rep.seed);
    rep.test = with_model(spec.model, [&](const auto& family) {
        if (cfg.method == TestMethod::Wild) {
            return wild_bootstrap_test(score_of(family.with_theta(rep.estimate.theta_hat)), rep.kernel, data, cfg);
        }
        return parametric_bootstrap_test(family, rep.kernel, data, rep.estimate.theta_hat, cfg, spec.estimator);
    });
    return rep;
}

}  // namespace ksdgof
