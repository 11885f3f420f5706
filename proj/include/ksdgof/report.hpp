#pragma once

// CSV and JSON serialization of experiment results. Needs nlohmann/json
// (vendor/json.hpp) on the include path.

#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "ksdgof/experiments.hpp"

namespace ksdgof {

using Json = nlohmann::ordered_json;

/// Shortest round-trip decimal form; "nan"/"inf" for non-finite values.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return {buf.data(), res.ptr};
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string describe(const KernelSpec& k) {
    return to_string(k.family()) + "(" + format_number(k.lengthscale()) + ")";
}

inline std::string describe(const KernelChoice& k) {
    return to_string(k.family) + "(" + (k.lengthscale ? format_number(*k.lengthscale) : "median") + ")";
}

namespace detail {

inline Json vector_json(const Vector& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

// nlohmann writes NaN as null already; infinities would also become null, so
// keep them readable as strings.
inline Json number_json(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

template <typename T>
std::string join(const std::vector<T>& xs, const char* sep = " ") {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) s += sep;
        if constexpr (std::is_same_v<T, std::string>) {
            s += xs[i];
        } else if constexpr (std::is_floating_point_v<T>) {
            s += format_number(xs[i]);
        } else {
            s += std::to_string(xs[i]);
        }
    }
    return s;
}

}  // namespace detail

inline constexpr const char* kPowerCsvHeader = "sigma2,n,method,seed,repeats,rejections,power,stderr";

/// First line: '#' metadata including the timestamp. Second line: the header.
inline void write_power_csv(std::ostream& os, const ExperimentSpec& spec, const std::vector<PowerRecord>& rows,
                            const std::string& timestamp = utc_timestamp()) {
    std::vector<std::string> methods;
    for (TestMethod m : spec.methods) methods.push_back(to_string(m));
    os << "# ksdgof power-curve; repeats=" << spec.repeats
       << (spec.repeats < kFullScaleRepeats ? " (desk scale; full scale is " + std::to_string(kFullScaleRepeats) + ")"
                                        : std::string(" (full scale)"))
       << "; n=" << spec.n << "; true_mean=" << format_number(spec.true_mean)
       << "; kernel=" << describe(spec.kernel) << "; alpha=" << format_number(spec.alpha)
       << "; wild_b=" << spec.wild_b << "; parametric_b=" << spec.parametric_b
       << "; seeds=" << detail::join(spec.seeds) << "; methods=" << detail::join(methods)
       << "; generated=" << timestamp << "\n";
    os << kPowerCsvHeader << "\n";
    for (const auto& r : rows) {
        os << format_number(r.sigma2) << ',' << r.n << ',' << to_string(r.method) << ',' << r.seed << ','
           << r.repeats << ',' << r.rejections << ',' << format_number(r.power) << ','
           << format_number(r.stderr_) << "\n";
    }
}

inline constexpr const char* kDensityCsvHeader = "p,x,density_unnormalized,density_normalized";

inline void write_density_csv(std::ostream& os, const GalaxiesReport& rep, const std::vector<DensityPoint>& pts,
                              const std::string& timestamp = utc_timestamp()) {
    os << "# ksdgof galaxies fitted densities; kernel=" << describe(rep.kernel)
       << "; grid=[min-1,max+1] of normalized data; generated=" << timestamp << "\n";
    os << kDensityCsvHeader << "\n";
    for (const auto& d : pts) {
        os << d.p << ',' << format_number(d.x) << ',' << format_number(d.unnormalized) << ','
           << format_number(d.normalized) << "\n";
    }
}

inline Json to_json(const GalaxiesReport& rep) {
    Json j;
    j["experiment"] = "galaxies";
    j["n"] = rep.data.size();
    j["normalization"] = rep.std_convention == StdConvention::Sample ? "sample-std" : "population-std";
    j["kernel"] = to_string(rep.kernel.family());
    j["lengthscale"] = rep.kernel.lengthscale();
    j["alpha"] = rep.alpha;
    j["bootstrap_b"] = rep.replicates;
    Json entries = Json::array();
    for (const auto& e : rep.entries) {
        Json je;
        je["p"] = e.p;
        je["status"] = e.ok() ? "ok" : "error";
        if (!e.ok()) je["error"] = e.error;
        je["condition"] = detail::number_json(e.condition);
        if (e.ok()) {
            je["ridge"] = e.ridge;
            je["theta_hat"] = detail::vector_json(e.theta_hat);
            je["delta"] = e.delta;
            Json tests = Json::array();
            for (const auto& t : e.tests) {
                Json jt;
                jt["seed"] = t.seed;
                if (t.error.empty()) {
                    jt["c_alpha"] = t.c_alpha;
                    jt["reject"] = t.reject;
                } else {
                    jt["error"] = t.error;
                }
                tests.push_back(jt);
            }
            je["tests"] = tests;
        }
        entries.push_back(je);
    }
    j["results"] = entries;
    return j;
}

inline Json to_json(const SingleRunReport& rep) {
    Json j;
    j["model"] = to_string(rep.model.family);
    if (rep.model.family == ModelFamily::GaussianLocation) {
        j["sigma2"] = rep.model.sigma2;
    } else {
        j["p"] = rep.model.p_basis;
    }
    j["n"] = rep.n;
    j["dim"] = rep.dim;
    j["kernel"] = to_string(rep.kernel.family());
    j["lengthscale"] = rep.kernel.lengthscale();
    Json est;
    est["theta_hat"] = detail::vector_json(rep.estimate.theta_hat);
    est["objective"] = rep.estimate.objective;
    est["condition"] = detail::number_json(rep.estimate.lambda_condition);
    est["ridge"] = rep.estimate.ridge;
    j["estimate"] = est;
    if (rep.test) {
        Json t;
        t["method"] = to_string(rep.test->method);
        t["alpha"] = rep.alpha;
        t["seed"] = rep.seed;
        t["bootstrap_b"] = rep.test->replicates.size();
        t["delta"] = rep.test->delta;
        t["c_alpha"] = rep.test->c_alpha;
        t["reject"] = rep.test->reject;
        j["test"] = t;
    }
    return j;
}

}  // namespace ksdgof
