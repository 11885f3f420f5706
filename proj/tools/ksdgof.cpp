// ksdgof: command-line driver for the goodness-of-fit experiments.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ksdgof/experiments.hpp"
#include "ksdgof/io.hpp"
#include "ksdgof/report.hpp"

#ifndef KSDGOF_DATA_DIR
#define KSDGOF_DATA_DIR "data"
#endif

namespace {

using namespace ksdgof;

enum ExitCode : int { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kNumeric = 4 };

struct Args {
    std::uint64_t seed = 0;
    std::size_t seed_groups = 0;
    std::size_t repeats = 0;
    std::string method;
    double alpha = 0.05;
    std::size_t bootstrap_b = 0;
    std::size_t wild_b = 0;
    std::size_t parametric_b = 0;
    std::string out;
    std::string density_out;
    std::string data;
    std::string lengthscale;
    std::string kernel;
    long long n = 0;
    std::vector<double> sigma2_grid;
    double true_mean = 1.3;
    std::vector<int> p_basis;
    std::string model;
    double sigma2 = 1.0;
    unsigned threads = 1;
    bool strict = false;
    std::string std_convention;
};

struct Options {
    CLI::Option* seed;
    CLI::Option* seed_groups;
    CLI::Option* repeats;
    CLI::Option* method;
    CLI::Option* alpha;
    CLI::Option* bootstrap_b;
    CLI::Option* wild_b;
    CLI::Option* parametric_b;
    CLI::Option* lengthscale;
    CLI::Option* kernel;
    CLI::Option* n;
    CLI::Option* sigma2_grid;
    CLI::Option* true_mean;
    CLI::Option* p_basis;
    CLI::Option* model;
    CLI::Option* sigma2;
    CLI::Option* std_convention;
};

bool given(const CLI::Option* o) { return o->count() > 0; }

KernelFamily parse_kernel(const std::string& s) {
    if (s == "gaussian") return KernelFamily::Gaussian;
    if (s == "imq") return KernelFamily::IMQ;
    throw ConfigError("unknown kernel '" + s + "' (expected gaussian or imq)");
}

std::optional<double> parse_lengthscale(const std::string& s) {
    if (s == "median") return std::nullopt;
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::logic_error&) {
        throw ConfigError("--lengthscale expects a positive number or 'median', got '" + s + "'");
    }
}

std::vector<TestMethod> parse_methods(const std::string& s) {
    if (s == "wild") return {TestMethod::Wild};
    if (s == "parametric") return {TestMethod::Parametric};
    if (s == "both") return {TestMethod::Wild, TestMethod::Parametric};
    throw ConfigError("unknown method '" + s + "' (expected wild, parametric or both)");
}

ExperimentSpec build_spec(Experiment e, const Args& a, const Options& o) {
    ExperimentSpec spec = ExperimentSpec::defaults(e);
    std::size_t groups = spec.seeds.size();
    if (given(o.seed_groups)) groups = a.seed_groups;
    if (groups < 1) throw ConfigError("--seed-groups must be >= 1");
    spec.seeds.clear();
    for (std::size_t g = 0; g < groups; ++g) spec.seeds.push_back(a.seed + g);

    if (given(o.repeats)) spec.repeats = a.repeats;
    if (given(o.method)) spec.methods = parse_methods(a.method);
    if (given(o.alpha)) spec.alpha = a.alpha;
    if (given(o.bootstrap_b)) spec.wild_b = spec.parametric_b = a.bootstrap_b;
    if (given(o.wild_b)) spec.wild_b = a.wild_b;
    if (given(o.parametric_b)) spec.parametric_b = a.parametric_b;
    if (given(o.kernel)) spec.kernel.family = parse_kernel(a.kernel);
    if (given(o.lengthscale)) spec.kernel.lengthscale = parse_lengthscale(a.lengthscale);
    if (given(o.n)) {
        if (a.n < 1) throw ConfigError("--n must be >= 1");
        spec.n = static_cast<Eigen::Index>(a.n);
    }
    if (given(o.sigma2_grid)) spec.sigma2_grid = a.sigma2_grid;
    if (given(o.true_mean)) spec.true_mean = a.true_mean;
    if (given(o.p_basis)) {
        spec.p_basis_list = a.p_basis;
        spec.model.p_basis = a.p_basis.front();
    }
    if (given(o.model)) spec.model.family = parse_model_family(a.model);
    if (given(o.sigma2)) spec.model.sigma2 = a.sigma2;
    if (given(o.std_convention)) {
        if (a.std_convention == "sample") {
            spec.std_convention = StdConvention::Sample;
        } else if (a.std_convention == "population") {
            spec.std_convention = StdConvention::Population;
        } else {
            throw ConfigError("--std expects 'sample' or 'population'");
        }
    }
    spec.threads = a.threads;
    spec.estimator.allow_ridge = !a.strict;
    spec.output_path = a.out;
    spec.validate();
    return spec;
}

/// Writes to --out when given, otherwise to stdout.
template <typename Fn>
void emit(const std::string& path, Fn&& write) {
    if (path.empty()) {
        write(std::cout);
        std::cout.flush();
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open output file " + path);
    write(f);
    if (!f) throw ConfigError("failed writing " + path);
}

std::string density_path(const Args& a) {
    if (!a.density_out.empty()) return a.density_out;
    if (a.out.empty()) return {};
    std::filesystem::path p(a.out);
    return (p.parent_path() / (p.stem().string() + "_density.csv")).string();
}

void run(Experiment e, const Args& a, const Options& o) {
    const ExperimentSpec spec = build_spec(e, a, o);
    switch (e) {
        case Experiment::PowerCurve: {
            const auto rows = run_power_curve(spec);
            emit(a.out, [&](std::ostream& os) { write_power_csv(os, spec, rows); });
            break;
        }
        case Experiment::Galaxies: {
            const std::string path = a.data.empty() ? std::string(KSDGOF_DATA_DIR) + "/galaxies.csv" : a.data;
            const auto raw = load_galaxies(path);
            const GalaxiesReport rep = run_galaxies(spec, raw);
            emit(a.out, [&](std::ostream& os) { os << to_json(rep).dump(2) << "\n"; });
            if (const std::string dp = density_path(a); !dp.empty()) {
                const auto pts = galaxies_density(rep);
                emit(dp, [&](std::ostream& os) { write_density_csv(os, rep, pts); });
            }
            for (const auto& entry : rep.entries) {
                std::cerr << "p=" << entry.p;
                if (!entry.ok()) {
                    std::cerr << " error: " << entry.error << "\n";
                    continue;
                }
                std::cerr << " delta=" << format_number(entry.delta);
                for (const auto& t : entry.tests) {
                    std::cerr << " [seed " << t.seed << ": ";
                    if (t.error.empty()) {
                        std::cerr << "c=" << format_number(t.c_alpha) << (t.reject ? " reject" : " accept");
                    } else {
                        std::cerr << "error " << t.error;
                    }
                    std::cerr << "]";
                }
                std::cerr << "\n";
            }
            break;
        }
        case Experiment::SingleTest:
        case Experiment::Estimate: {
            if (a.data.empty()) throw ConfigError("--data is required");
            const Dataset data = load_dataset(a.data);
            const SingleRunReport rep =
                e == Experiment::Estimate ? run_estimate(spec, data) : run_single_test(spec, data);
            emit(a.out, [&](std::ostream& os) { os << to_json(rep).dump(2) << "\n"; });
            break;
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kernel Stein discrepancy estimation and composite goodness-of-fit tests"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "Flat key=value file; command-line flags take precedence");

    Args a;
    Options o{};
    o.seed = app.add_option("--seed", a.seed, "Root seed (first seed when several groups are run)");
    o.seed_groups = app.add_option("--seed-groups", a.seed_groups, "Number of seeds: seed, seed+1, ...");
    o.repeats = app.add_option("--repeats", a.repeats, "Repeats per (sigma2, seed) cell");
    o.method = app.add_option("--method", a.method, "wild, parametric or both");
    o.alpha = app.add_option("--alpha", a.alpha, "Test level");
    o.bootstrap_b = app.add_option("--bootstrap-b", a.bootstrap_b, "Bootstrap replicates for every method");
    o.wild_b = app.add_option("--wild-b", a.wild_b, "Wild bootstrap replicates");
    o.parametric_b = app.add_option("--parametric-b", a.parametric_b, "Parametric bootstrap replicates");
    app.add_option("--out", a.out, "Output file (default: stdout)");
    app.add_option("--density-out", a.density_out, "Galaxies density CSV (default: <out>_density.csv)");
    app.add_option("--data", a.data, "Input data file");
    o.lengthscale = app.add_option("--lengthscale", a.lengthscale, "Kernel lengthscale or 'median'");
    o.kernel = app.add_option("--kernel", a.kernel, "gaussian or imq");
    o.n = app.add_option("--n", a.n, "Sample size (power curve)");
    o.sigma2_grid = app.add_option("--sigma2-grid", a.sigma2_grid, "Data variances (power curve)")->delimiter(',');
    o.true_mean = app.add_option("--true-mean", a.true_mean, "Data mean (power curve)");
    o.p_basis = app.add_option("--p-basis", a.p_basis, "Basis sizes (galaxies) or one size (kef model)")
                    ->delimiter(',');
    o.model = app.add_option("--model", a.model, "gaussian-location or kef");
    o.sigma2 = app.add_option("--sigma2", a.sigma2, "Known variance of the gaussian-location model");
    o.std_convention = app.add_option("--std", a.std_convention, "Galaxies normalization: sample or population");
    app.add_option("--threads", a.threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--strict-conditioning", a.strict, "Fail instead of regularizing an ill-conditioned fit");

    auto* power = app.add_subcommand("power-curve", "Rejection rates over a grid of data variances (CSV)");
    auto* galaxies = app.add_subcommand("galaxies", "Kernel exponential family fits to the galaxies data (JSON)");
    auto* test = app.add_subcommand("test", "Fit a model to --data and run one bootstrap test (JSON)");
    auto* estimate = app.add_subcommand("estimate", "Closed-form minimum-KSD estimate on --data (JSON)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    Experiment e = Experiment::PowerCurve;
    if (galaxies->parsed()) e = Experiment::Galaxies;
    if (test->parsed()) e = Experiment::SingleTest;
    if (estimate->parsed()) e = Experiment::Estimate;
    (void)power;

    try {
        run(e, a, o);
    } catch (const ConfigError& ex) {
        std::cerr << "config error: " << ex.what() << "\n";
        return kConfig;
    } catch (const InputError& ex) {
        std::cerr << "input error: " << ex.what() << "\n";
        return kData;
    } catch (const DataError& ex) {
        std::cerr << "data error: " << ex.what() << "\n";
        return kData;
    } catch (const NumericError& ex) {
        std::cerr << "numeric error: " << ex.what() << "\n";
        return kNumeric;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kFailure;
    }
    return kOk;
}
