#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ksdgof/model.hpp"
#include "ksdgof/stein.hpp"
#include "unit/oracles.hpp"

using namespace ksdgof;
using ksdgof::testing::close_rel;
using ksdgof::testing::fd_stein_h;
using ksdgof::testing::random_dataset;
using ksdgof::testing::random_point;

namespace {

Vector standard_normal_score(const Vector& x) { return -x; }

/// Score of a diagonal Gaussian N(m, diag(v)), any dimension.
struct DiagGaussianScore {
    Vector mean;
    Vector var;
    Vector operator()(const Vector& x) const { return -((x - mean).array() / var.array()).matrix(); }
};

}  // namespace

TEST(SteinH, OriginUnderStandardNormal) {
    const auto k = KernelSpec::gaussian(1.0);
    const Vector zero = Vector::Zero(1);
    EXPECT_DOUBLE_EQ(stein_h(standard_normal_score, k, zero, zero), 1.0);
}

TEST(SteinH, SymmetricOnRandomPairs) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index d = 1 + trial % 3;
        const DiagGaussianScore score{random_point(rng, d), Vector::Constant(d, 1.7)};
        const KernelSpec k(trial % 2 ? KernelFamily::IMQ : KernelFamily::Gaussian, 0.9);
        const Vector x = random_point(rng, d), y = random_point(rng, d);
        EXPECT_EQ(stein_h(score, k, x, y), stein_h(score, k, y, x));
    }
}

TEST(SteinH, MatchesFiniteDifferenceAssembly) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> unif(0.5, 2.0);
    for (int trial = 0; trial < 60; ++trial) {
        const Eigen::Index d = (trial % 3 == 2) ? 3 : 1 + trial % 2;
        DiagGaussianScore score{random_point(rng, d), Vector(d)};
        for (Eigen::Index m = 0; m < d; ++m) score.var[m] = unif(rng);
        const KernelSpec k(trial % 2 ? KernelFamily::IMQ : KernelFamily::Gaussian, unif(rng));
        const Vector x = random_point(rng, d), y = random_point(rng, d);
        const double h = stein_h(score, k, x, y);
        const double h_fd = fd_stein_h(score, k, x, y);
        EXPECT_TRUE(close_rel(h, h_fd, 1e-4)) << h << " vs " << h_fd;
    }
    // a non-linear score: kernel exponential family with p = 3
    const KernelExpFamilyModel kef((Vector(3) << 0.4, -1.1, 0.7).finished());
    auto s = [&](const Vector& x) { return kef.score(x); };
    for (int trial = 0; trial < 20; ++trial) {
        const Vector x = random_point(rng, 1, 2.0), y = random_point(rng, 1, 2.0);
        const auto k = KernelSpec::imq(0.8);
        EXPECT_TRUE(close_rel(stein_h(s, k, x, y), fd_stein_h(s, k, x, y), 1e-4));
    }
}

TEST(SteinH, Errors) {
    const auto k = KernelSpec::gaussian(1.0);
    EXPECT_THROW(stein_h(standard_normal_score, k, Vector::Zero(1), Vector::Zero(2)), InputError);
    auto bad = [](const Vector& x) { return Vector::Constant(x.size(), std::nan("")); };
    EXPECT_THROW(stein_h(bad, k, Vector::Zero(1), Vector::Zero(1)), NumericError);
    auto wrong_dim = [](const Vector&) { return Vector::Zero(2); };
    EXPECT_THROW(stein_h(wrong_dim, k, Vector::Zero(1), Vector::Zero(1)), InputError);
}

TEST(KsdVStat, SinglePoint) {
    const Dataset data = Dataset::Zero(1, 1);
    EXPECT_DOUBLE_EQ(ksd_squared_vstat(standard_normal_score, KernelSpec::gaussian(1.0), data), 1.0);
    const SteinGram gram = stein_gram(standard_normal_score, KernelSpec::gaussian(1.0), data);
    ASSERT_EQ(gram.n(), 1);
    EXPECT_DOUBLE_EQ(gram(0, 0), 1.0);
}

TEST(KsdVStat, EmptyDatasetIsInputError) {
    const Dataset empty(1, 0);
    EXPECT_THROW(ksd_squared_vstat(standard_normal_score, KernelSpec::gaussian(1.0), empty), InputError);
    EXPECT_THROW(stein_gram(standard_normal_score, KernelSpec::gaussian(1.0), empty), InputError);
}

TEST(SteinGram, EntriesAreSteinKernelValues) {
    std::mt19937_64 rng(13);
    const Dataset data = random_dataset(rng, 2, 15);
    const DiagGaussianScore score{Vector::Constant(2, 0.3), Vector::Constant(2, 1.2)};
    const auto k = KernelSpec::imq(1.1);
    const SteinGram gram = stein_gram(score, k, data);
    for (Eigen::Index i = 0; i < data.cols(); ++i) {
        for (Eigen::Index j = 0; j < data.cols(); ++j) {
            EXPECT_EQ(gram(i, j), gram(j, i));
            EXPECT_EQ(gram(i, j), stein_h(score, k, data.col(i), data.col(j)));
        }
    }
    EXPECT_EQ(gram.mean(), ksd_squared_vstat(score, k, data));
    EXPECT_EQ(gram.quadratic_form(Vector::Ones(data.cols())), gram.total());
}

TEST(SteinGram, PermutedDataGivesPermutedGram) {
    std::mt19937_64 rng(14);
    const Dataset data = random_dataset(rng, 1, 20);
    const auto k = KernelSpec::gaussian(0.7);
    const SteinGram gram = stein_gram(standard_normal_score, k, data);
    std::vector<Eigen::Index> perm(20);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Dataset shuffled(1, 20);
    for (Eigen::Index i = 0; i < 20; ++i) shuffled.col(i) = data.col(perm[static_cast<std::size_t>(i)]);
    const SteinGram g2 = stein_gram(standard_normal_score, k, shuffled);
    for (Eigen::Index i = 0; i < 20; ++i)
        for (Eigen::Index j = 0; j < 20; ++j)
            EXPECT_EQ(g2(i, j), gram(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]));
}

TEST(KsdVStat, NonNegativeOnRandomInputs) {
    std::mt19937_64 rng(15);
    std::uniform_real_distribution<double> unif(0.2, 3.0);
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::Index d = 1 + trial % 4;
        const Eigen::Index n = 1 + trial % 37;
        const DiagGaussianScore score{random_point(rng, d, 2.0), Vector::Constant(d, unif(rng))};
        const KernelSpec k(trial % 2 ? KernelFamily::IMQ : KernelFamily::Gaussian, unif(rng));
        const Dataset data = random_dataset(rng, d, n, 0.5, unif(rng));
        EXPECT_GE(ksd_squared_vstat(score, k, data), -1e-12);
    }
}

TEST(SteinGram, InvariantToLogDensityConstant) {
    std::mt19937_64 rng(16);
    const Dataset data = random_dataset(rng, 1, 25);
    const KernelExpFamilyModel m((Vector(2) << 0.5, -0.3).finished());
    // Reference densities N(0, 3^2) differ from N(0, 3^2) * c only by a constant in b;
    // the score is built from grad_b alone, so both grams must agree bit for bit.
    struct Shifted {
        const KernelExpFamilyModel& base;
        double shift;
        double log_density(const Vector& x) const { return base.log_density_unnormalized(x) + shift; }
        Vector score(const Vector& x) const { return base.score(x); }
    };
    const Shifted a{m, 0.0}, b{m, 1234.5};
    const auto k = KernelSpec::imq(0.9);
    const SteinGram ga = stein_gram(score_of(a), k, data);
    const SteinGram gb = stein_gram(score_of(b), k, data);
    EXPECT_EQ((ga.values() - gb.values()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_NE(a.log_density(data.col(0)), b.log_density(data.col(0)));
}

TEST(KsdVStat, ShrinksWithSampleSizeUnderTheModel) {
    std::mt19937_64 rng(17);
    const Dataset big = random_dataset(rng, 1, 2000);
    const auto k = KernelSpec::gaussian(1.0);
    const double ksd_small = ksd_squared_vstat(standard_normal_score, k, big.leftCols(100));
    const double ksd_big = ksd_squared_vstat(standard_normal_score, k, big);
    EXPECT_LT(ksd_big, ksd_small);
    // E h(x, x) = E x^2 + 1 = 2, so KSD^2 ~ 2 / n under the model
    EXPECT_LT(ksd_big, 5e-3);
}

TEST(KsdVStat, ScaledStatisticStableUnderNullGrowingUnderAlternative) {
    const auto k = KernelSpec::gaussian(1.0);
    const std::vector<Eigen::Index> sizes{50, 100, 200, 400};
    double null_max = 0.0;
    std::vector<double> alt;
    for (int seed = 0; seed < 5; ++seed) {
        std::mt19937_64 rng(100 + seed);
        const Dataset data = random_dataset(rng, 1, 400);
        std::vector<double> alt_seed;
        for (Eigen::Index n : sizes) {
            const auto nd = static_cast<double>(n);
            null_max = std::max(null_max, nd * ksd_squared_vstat(standard_normal_score, k, data.leftCols(n)));
            // model N(0.5, 1) against N(0, 1) data
            auto shifted = [](const Vector& x) { return Vector((0.5 - x.array()).matrix()); };
            alt_seed.push_back(nd * ksd_squared_vstat(shifted, k, data.leftCols(n)));
        }
        // least-squares slope of n KSD^2 against n
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            mx += static_cast<double>(sizes[i]);
            my += alt_seed[i];
        }
        mx /= 4;
        my /= 4;
        double sxy = 0, sxx = 0;
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            sxy += (static_cast<double>(sizes[i]) - mx) * (alt_seed[i] - my);
            sxx += (static_cast<double>(sizes[i]) - mx) * (static_cast<double>(sizes[i]) - mx);
        }
        EXPECT_GT(sxy / sxx, 0.0);
        alt.push_back(alt_seed.back());
    }
    EXPECT_LT(null_max, 15.0);
    EXPECT_GT(*std::min_element(alt.begin(), alt.end()), null_max);
}
