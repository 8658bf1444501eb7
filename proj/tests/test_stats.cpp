#include <gtest/gtest.h>

#include <cmath>

#include "mpal/stats.hpp"

using namespace mpal;

TEST(ClopperPearson, ReferenceValues) {
    const auto a = stats::clopper_pearson(5, 10);
    EXPECT_NEAR(a.lo, 0.18708602844739855, 1e-10);
    EXPECT_NEAR(a.hi, 0.8129139715526015, 1e-10);
    const auto b = stats::clopper_pearson(0, 10);
    EXPECT_EQ(b.lo, 0.0);
    EXPECT_NEAR(b.hi, 0.30849710781876083, 1e-10);
    EXPECT_NEAR(stats::clopper_pearson(0, 1000).hi, 0.003682083896865671, 1e-12);
    EXPECT_EQ(stats::clopper_pearson(7, 7).hi, 1.0);
    EXPECT_THROW(stats::clopper_pearson(1, 0), DomainError);
    EXPECT_THROW(stats::clopper_pearson(3, 2), DomainError);
}

TEST(ClopperPearson, CoversPointEstimate) {
    for (std::uint64_t n : {1u, 5u, 37u, 400u})
        for (std::uint64_t k = 0; k <= n; k += 1 + n / 7) {
            const auto ci = stats::clopper_pearson(k, n);
            const double p = static_cast<double>(k) / static_cast<double>(n);
            EXPECT_LE(ci.lo, p);
            EXPECT_GE(ci.hi, p);
        }
}

TEST(CochranArmitage, ReferenceValue) {
    const auto t = stats::cochran_armitage({30, 20, 12, 5}, {100, 100, 100, 100}, {0, 1, 2, 3});
    EXPECT_NEAR(t.z, -4.970082156465339, 1e-9);
    EXPECT_NEAR(t.p_decreasing, 3.3462269043395725e-07, 1e-12);
    const auto flat = stats::cochran_armitage({0, 0, 0}, {10, 10, 10}, {0, 1, 2});
    EXPECT_EQ(flat.p_decreasing, 1.0);
}

TEST(ProportionTest, ReferenceValue) {
    EXPECT_NEAR(stats::proportion_greater_pvalue(30, 100, 20, 100), 0.051235217429874705, 1e-9);
    EXPECT_EQ(stats::proportion_greater_pvalue(0, 100, 0, 100), 1.0);
}

TEST(LogLogFit, ReferenceValue) {
    const auto f = stats::loglog_fit({2, 4, 8, 16}, {3, 10, 41, 160});
    EXPECT_NEAR(f.slope, 1.924652069222934, 1e-10);
    EXPECT_NEAR(f.intercept, -0.28768207245178035, 1e-10);
    EXPECT_NEAR(f.r2, 0.9989337037175731, 1e-10);
    EXPECT_NEAR(f.slope_se, 0.04446393018048481, 1e-10);
    EXPECT_THROW(stats::loglog_fit({1, 2}, {0, 1}), DomainError);
}

TEST(Bootstrap, DeterministicAndBracketsMedian) {
    std::vector<double> v;
    rng::PhiloxStream g(4);
    for (int i = 0; i < 200; ++i) v.push_back(1.0 + g.normal());
    const auto med = [](const std::vector<double>& s) { return stats::median(s); };
    const auto a = stats::bootstrap_ci(v, med, 9);
    const auto b = stats::bootstrap_ci(v, med, 9);
    EXPECT_EQ(a.lo, b.lo);
    EXPECT_EQ(a.hi, b.hi);
    const double m = stats::median(v);
    EXPECT_LE(a.lo, m);
    EXPECT_GE(a.hi, m);
    EXPECT_LT(a.hi - a.lo, 0.6);
}

TEST(Median, EvenAndOdd) {
    EXPECT_EQ(stats::median({3, 1, 2}), 2.0);
    EXPECT_EQ(stats::median({4, 1, 3, 2}), 2.5);
}
