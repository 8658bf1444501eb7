#include <gtest/gtest.h>

#include <cmath>

#include "mpal/radial_descent.hpp"

using namespace mpal;

namespace {

SubharmonicSpec line_spec(int L, int ell, double q, std::vector<int> S = {}, double c = 1.0) {
    SubharmonicSpec s;
    s.ell = ell;
    s.q = q;
    s.c = c;
    s.domain = Cube(Configuration::origin(1, 1), L);
    for (int v : S) s.S.push_back(Configuration(1, 1, {v}));
    return s;
}

} // namespace

TEST(DescentBound, Example) { EXPECT_DOUBLE_EQ(descent_bound(10, 0, 2, 0.5, 0), 1.0 / 16.0); }

TEST(DescentBound, RangeAndParameters) {
    EXPECT_DOUBLE_EQ(descent_bound(20, 5, 2, 0.5, 3), std::pow(0.5, 5));
    EXPECT_THROW(descent_bound(20, 4, 2, 0.5, 3), DomainError);
    EXPECT_THROW(descent_bound(20, 20, 2, 0.5, 3), DomainError);
    EXPECT_THROW(descent_bound(20, 0, 0, 0.5, 0), DomainError);
    EXPECT_THROW(descent_bound(20, 0, 2, 1.5, 0), DomainError);
}

TEST(Subharmonic, GrowingProfilePasses) {
    // q^{-|x|/ell} with q = 2^{-ell} meets the sphere clause with equality
    for (int ell : {1, 2, 3}) {
        const auto s = line_spec(15, ell, std::ldexp(1.0, -ell));
        const auto f = tabulate(s.domain, [](const Configuration& x) { return std::ldexp(1.0, std::abs(x.coords[0])); });
        EXPECT_TRUE(check_subharmonic(f, s).ok) << ell;
    }
    const auto s = line_spec(12, 1, 0.5);
    const auto f = tabulate(s.domain, [](const Configuration& x) { return std::pow(2.0, std::abs(x.coords[0])); });
    EXPECT_TRUE(check_subharmonic(f, s).ok);
}

TEST(Subharmonic, DecayingProfileFailsAtOrigin) {
    const auto s = line_spec(12, 1, 0.5);
    const auto f = tabulate(s.domain, [](const Configuration& x) { return std::pow(0.5, std::abs(x.coords[0])); });
    const auto chk = check_subharmonic(f, s);
    ASSERT_FALSE(chk.ok);
    EXPECT_EQ(chk.violation->coords, std::vector<int>{0});
    EXPECT_DOUBLE_EQ(chk.value, 1.0);
    EXPECT_DOUBLE_EQ(chk.bound, 0.25);
}

TEST(Subharmonic, ExceptionalClauseUsesShell) {
    // at an exceptional point only the shell ell <= |y - x| <= (1+c) ell counts
    auto s = line_spec(10, 1, 0.5, {0}, 1.0);
    auto f = tabulate(s.domain, [](const Configuration& x) { return std::pow(2.0, std::abs(x.coords[0])); });
    f[10] = 2.0;  // f(0) = 2 <= 0.5 * f(+-2) = 2
    EXPECT_TRUE(check_subharmonic(f, s).ok);
    f[10] = 2.5;
    EXPECT_FALSE(check_subharmonic(f, s).ok);
    s.S.clear();
    f[10] = 1.0;
    EXPECT_TRUE(check_subharmonic(f, s).ok);
}

TEST(Subharmonic, SignBlind) {
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        auto inst = random_descent_instance(seed);
        auto g = inst.f;
        for (auto& v : g) v = std::abs(v);
        EXPECT_EQ(check_subharmonic(inst.f, inst.spec).ok, check_subharmonic(g, inst.spec).ok);
        EXPECT_TRUE(check_subharmonic(g, inst.spec).ok);
    }
}

TEST(Subharmonic, Preconditions) {
    const auto s = line_spec(5, 1, 0.5);
    EXPECT_THROW(check_subharmonic(PointTable(5, 1.0), s), DomainError);
    PointTable f(11, 1.0);
    f[3] = std::nan("");
    EXPECT_THROW(check_subharmonic(f, s), DomainError);
    auto bad = line_spec(5, 1, 0.5, {9});
    EXPECT_THROW(check_subharmonic(PointTable(11, 1.0), bad), DomainError);
}

TEST(Cover, EmptySet) {
    const auto cov = cover_neighborhood({}, 1.5, 2, Configuration::origin(1, 1));
    EXPECT_TRUE(cov.annuli.empty());
    EXPECT_EQ(cov.total_width, 0);
}

TEST(Cover, SinglePoint) {
    const double c = 1.5;
    const int ell = 2;
    const int r = 9;
    const auto cov = cover_neighborhood({Configuration(1, 2, {4, -r})}, c, ell, Configuration::origin(1, 2));
    ASSERT_EQ(cov.annuli.size(), 1u);
    const auto& a = cov.annuli[0];
    for (int t = r - 3; t <= r + 3; ++t) EXPECT_TRUE(a.contains_radius(t));
    EXPECT_LE(cov.total_width, 2 * 3 + 1);
}

TEST(Cover, TwoPointsSameRadius) {
    const auto cov = cover_neighborhood({Configuration(1, 2, {7, 1}), Configuration(1, 2, {-3, -7})}, 1.0, 2,
                                        Configuration::origin(1, 2));
    EXPECT_EQ(cov.annuli.size(), 1u);
    EXPECT_EQ(cov.total_width, 5);
}

TEST(Cover, ExhaustiveValidity) {
    for (std::uint64_t seed = 100; seed < 160; ++seed) {
        const auto inst = random_descent_instance(seed);
        EXPECT_TRUE(cover_is_valid(inst.cover, inst.spec)) << seed;
        auto shrunk = inst.cover;
        if (!shrunk.annuli.empty()) {
            auto& a = shrunk.annuli.back();
            if (a.b - a.a > 1) {
                a = Annulus(a.center, a.a, a.b - 1);
                --shrunk.total_width;
                EXPECT_FALSE(cover_is_valid(shrunk, inst.spec)) << seed;
            }
        }
    }
}

TEST(VerifyDescent, GrowingProfileHasSlack) {
    const auto s = line_spec(20, 2, 0.5);
    const auto f = tabulate(s.domain, [](const Configuration& x) { return std::pow(0.5, -std::abs(x.coords[0]) / 2.0); });
    const auto cov = cover_neighborhood(s.S, s.c, s.ell, s.domain.center, s.domain.L);
    const auto rep = verify_descent(f, s, cov, 0);
    EXPECT_TRUE(rep.holds);
    EXPECT_GT(rep.slack, 0.0);
    EXPECT_EQ(rep.M_prime, 10);
    EXPECT_EQ(rep.sequence.back(), 0);
    EXPECT_TRUE(rep.gaps.empty());
}

TEST(VerifyDescent, GapAccounting) {
    // S fills the radii 6..9 so S'' covers 6..11
    const int L = 24, ell = 2;
    const auto base = line_spec(L, ell, 0.6);
    const auto full = line_spec(L, ell, 0.6, {-9, -8, -7, -6, 6, 7, 8, 9});
    rng::PhiloxStream g(3);
    const auto f0 = random_subharmonic(base, g);
    const auto f1 = random_subharmonic(full, g);
    const auto c0 = cover_neighborhood(base.S, base.c, ell, base.domain.center, L);
    const auto c1 = cover_neighborhood(full.S, full.c, ell, full.domain.center, L);
    EXPECT_EQ(c1.total_width, 8);
    const auto r0 = verify_descent(f0, base, c0, 0);
    const auto r1 = verify_descent(f1, full, c1, 0);
    EXPECT_TRUE(r0.holds);
    EXPECT_TRUE(r1.holds);
    EXPECT_EQ(r1.W_S2, 6);
    EXPECT_EQ(r0.M_prime, 12);
    for (const auto& rep : {r0, r1}) {
        EXPECT_EQ(L - rep.sequence.back(), ell * rep.M_prime + rep.skipped);
    }
    // the run 6..11 is crossed with one skipped radius: 24, 22, ..., 12, 5, 3, 1
    EXPECT_EQ(r1.skipped, 5);
    EXPECT_EQ(r1.M_prime, 9);
    ASSERT_EQ(r1.gaps.size(), 1u);
    EXPECT_EQ(r1.gaps[0], std::make_pair(6, 10));
}

TEST(VerifyDescent, Preconditions) {
    const auto s = line_spec(12, 1, 0.5);
    const auto dec = tabulate(s.domain, [](const Configuration& x) { return std::pow(0.5, std::abs(x.coords[0])); });
    EXPECT_THROW(verify_descent(dec, s, AnnulusCover{}, 0), DomainError);
    const auto inc = tabulate(s.domain, [](const Configuration& x) { return std::pow(2.0, std::abs(x.coords[0])); });
    EXPECT_NO_THROW(verify_descent(inc, s, AnnulusCover{}, 0));
    EXPECT_THROW(verify_descent(inc, s, AnnulusCover{}, 13), DomainError);
    const auto sx = line_spec(12, 1, 0.5, {3});
    EXPECT_THROW(verify_descent(random_subharmonic(sx, *std::make_unique<rng::PhiloxStream>(1)), sx, AnnulusCover{}, 0),
                 DomainError);
}

TEST(VerifyDescent, RandomInstances) {
    for (std::uint64_t seed = 1; seed <= 300; ++seed) {
        const auto inst = random_descent_instance(seed);
        ASSERT_TRUE(check_subharmonic(inst.f, inst.spec).ok) << seed;
        const auto rep = verify_descent(inst.f, inst.spec, inst.cover, inst.r);
        EXPECT_TRUE(rep.holds) << instance_json(inst).dump();
        EXPECT_LE(rep.W_S2, rep.W_A);
    }
}
