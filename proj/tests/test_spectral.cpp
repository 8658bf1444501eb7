#include <gtest/gtest.h>

#include <cmath>

#include "mpal/hamiltonian.hpp"
#include "mpal/spectral.hpp"

using namespace mpal;

namespace {

ModelSpec model(int N, int d, double g, bool hopping = true) {
    ModelSpec s;
    s.N = N;
    s.d = d;
    s.g = g;
    s.hopping = hopping;
    return s;
}

FiniteVolumeOperator build(const Cube& c, const ModelSpec& s, std::uint64_t seed) {
    return assemble(c, sample_field_for({c}, s.distribution, seed), s);
}

} // namespace

TEST(Eigendecompose, ResidualAndOrthonormality) {
    const auto op = build(Cube(Configuration::origin(2, 1), 3), model(2, 1, 2.0), 1);
    const auto sd = eigendecompose(op);
    const double hn = op.matrix().norm();
    for (Eigen::Index k = 0; k < sd.size(); ++k)
        EXPECT_LT((op.matrix() * sd.vectors.col(k) - sd.values[k] * sd.vectors.col(k)).norm(), 1e-9 * hn);
    const Eigen::MatrixXd gram = sd.vectors.transpose() * sd.vectors;
    EXPECT_LT((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff(), 1e-10);
    for (Eigen::Index k = 1; k < sd.size(); ++k) EXPECT_LE(sd.values[k - 1], sd.values[k]);
}

TEST(Eigendecompose, ConstantDiagonal) {
    const Cube c(Configuration::origin(1, 1), 3);
    auto field = sample_field_for({c}, FieldDistribution::gaussian(), 1);
    std::vector<std::pair<Site, double>> over;
    for (const auto& s : field.sites()) over.emplace_back(s, 0.25);
    const auto op = assemble(c, field.with_values(over), model(1, 1, 2.0, false));
    for (double e : to_std(eigendecompose(op).values)) EXPECT_EQ(e, 0.5);
}

TEST(Eigendecompose, CapEnforced) {
    const auto op = build(Cube(Configuration::origin(1, 1), 3), model(1, 1, 1.0), 1);
    EXPECT_THROW(eigendecompose(op, true, 5), DomainError);
}

TEST(GreenEntry, OnePointCube) {
    const auto op = build(Cube(Configuration::origin(1, 1), 0), model(1, 1, 1.0), 2);
    const double v = op.matrix()(0, 0);
    const auto sd = eigendecompose(op);
    EXPECT_NEAR(green_entry(sd, 0.3, 0, 0), 1.0 / (v - 0.3), 1e-14);
}

TEST(GreenEntry, DiagonalOperatorOffDiagonalZero) {
    const auto op = build(Cube(Configuration::origin(1, 1), 3), model(1, 1, 1.0, false), 2);
    const auto sd = eigendecompose(op);
    EXPECT_EQ(green_entry(sd, 10.0, 0, 3), 0.0);
}

TEST(GreenEntry, MatchesDirectInverse) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto op = build(Cube(Configuration::origin(2, 1), 2), model(2, 1, 1.5), seed);
        const auto sd = eigendecompose(op);
        const double e = 0.37;
        const Eigen::MatrixXd inv = green_matrix_direct(op.matrix(), e);
        const double scale = inv.cwiseAbs().maxCoeff();
        for (std::size_t x = 0; x < op.dim(); x += 3)
            for (std::size_t y = 0; y < op.dim(); y += 4) {
                const double g = green_entry(sd, e, x, y);
                EXPECT_LT(std::abs(g - inv(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y))), 1e-8 * scale);
                EXPECT_NEAR(g, green_entry(sd, e, y, x), 1e-10 * scale);
            }
    }
}

TEST(GreenEntry, ResonantEnergyRejected) {
    const auto op = build(Cube(Configuration::origin(1, 1), 2), model(1, 1, 1.0), 3);
    auto sd = std::make_shared<const SpectralData>(eigendecompose(op));
    const double e = sd->values[2];
    EXPECT_THROW(green_entry(*sd, e, 0, 0), ResonantEnergyError);
    EXPECT_THROW(GreenFunction(sd, e), ResonantEnergyError);
    const GreenFunction g(sd, e + 0.1);
    EXPECT_EQ(g(1, 2), green_entry(*sd, e + 0.1, 1, 2));
}

TEST(Gri, ResolventIdentityOnRandomGeometries) {
    rng::PhiloxStream pick(3);
    for (int t = 0; t < 20; ++t) {
        const Cube outer(Configuration::origin(2, 1), 4);
        const auto op = build(outer, model(2, 1, 1.0 + t % 3), static_cast<std::uint64_t>(t));
        const int l = 1 + static_cast<int>(pick.below(2));
        const Configuration w(2, 1, {static_cast<int>(pick.below(3)) - 1, static_cast<int>(pick.below(3)) - 1});
        const Cube inner(w, l);
        const auto in_pts = cube_points(inner);
        const auto x = in_pts[pick.below(in_pts.size())];
        Configuration y = x;
        do y = op.point_at(pick.below(op.dim()));
        while (inner.contains(y));
        const auto r = gri_residual(op, inner, 0.123, x, y);
        EXPECT_LT(r.residual, 1e-8 * std::max(1.0, r.scale));
        EXPECT_GT(r.edge_pairs, 0u);
    }
}

TEST(Gri, EigenfunctionIdentity) {
    const Cube outer(Configuration(2, 1, {0, 1}), 4);
    const auto op = build(outer, model(2, 1, 2.0), 9);
    const auto sd = eigendecompose(op);
    const Cube inner(Configuration(2, 1, {1, 1}), 2);
    for (Eigen::Index n = 0; n < sd.size(); n += 7)
        for (const auto& x : cube_points(inner)) {
            const auto r = gri_ef_residual(op, sd, n, inner, x);
            EXPECT_LT(r.residual, 1e-8 * std::max(1.0, r.scale));
        }
}

TEST(Gri, GeometryPreconditions) {
    const Cube outer(Configuration::origin(2, 1), 3);
    const auto op = build(outer, model(2, 1, 1.0), 1);
    const Cube touching(Configuration(2, 1, {1, 0}), 2);
    EXPECT_THROW(gri_residual(op, touching, 0.1, Configuration(2, 1, {1, 0}), Configuration(2, 1, {-3, 0})), GeometryError);
    const Cube inner(Configuration::origin(2, 1), 1);
    EXPECT_THROW(gri_residual(op, inner, 0.1, Configuration(2, 1, {3, 0}), Configuration(2, 1, {-3, 0})), GeometryError);
    EXPECT_THROW(gri_residual(op, inner, 0.1, Configuration(2, 1, {0, 0}), Configuration(2, 1, {1, 0})), GeometryError);
}

TEST(Gri, WithoutHoppingSignConvention) {
    // Decoupled operator: G_out(x, y) = 0 for x != y, and no hopping pairs contribute.
    const Cube outer(Configuration::origin(1, 1), 3);
    const auto op = build(outer, model(1, 1, 1.0, false), 1);
    const auto r = gri_residual(op, Cube(Configuration::origin(1, 1), 1), 0.2, Configuration(1, 1, {0}),
                                Configuration(1, 1, {3}));
    EXPECT_EQ(r.residual, 0.0);
}

TEST(SpectralDistance, Examples) {
    EXPECT_EQ(spectral_distance(std::vector<double>{0, 1}, std::vector<double>{1, 5}), 0.0);
    EXPECT_EQ(spectral_distance(std::vector<double>{0}, std::vector<double>{3}), 3.0);
    EXPECT_THROW(spectral_distance(std::vector<double>{}, std::vector<double>{3}), DomainError);
}

TEST(SpectralDistance, MatchesBruteForce) {
    rng::PhiloxStream g(4);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> a(1 + g.below(20)), b(1 + g.below(20));
        for (auto& v : a) v = g.normal();
        for (auto& v : b) v = g.normal();
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        double best = 1e300;
        for (double x : a)
            for (double y : b) best = std::min(best, std::abs(x - y));
        EXPECT_EQ(spectral_distance(a, b), best);
    }
}

TEST(ProjectionTrace, Counting) {
    const auto op = build(Cube(Configuration::origin(2, 1), 3), model(2, 1, 1.0), 2);
    const auto sd = eigendecompose(op, false);
    const double lo = sd.values[0], hi = sd.values[sd.size() - 1];
    EXPECT_EQ(projection_trace(sd, {hi + 1, hi + 2}), 0);
    EXPECT_EQ(projection_trace(sd, {lo - 1, hi + 1}), static_cast<long long>(op.dim()));
    EXPECT_EQ(projection_trace(sd, {1.0, 1.0}), 0);
    long long direct = 0;
    for (double e : to_std(sd.values)) direct += (e >= -0.5 && e <= 1.25);
    EXPECT_EQ(projection_trace(sd, {-0.5, 1.25}), direct);
    EXPECT_LE(projection_trace(sd, {-0.4, 1.0}), projection_trace(sd, {-0.5, 1.25}));
}

TEST(Correlator, CompletenessZeroAndProjector) {
    const auto op = build(Cube(Configuration::origin(2, 1), 2), model(2, 1, 1.0), 5);
    const auto sd = eigendecompose(op);
    for (std::size_t x = 0; x < op.dim(); ++x) {
        EXPECT_NEAR(correlator_entry(sd, [](double) { return 1.0; }, x, x), 1.0, 1e-12);
        EXPECT_EQ(correlator_entry(sd, [](double) { return 0.0; }, x, 0), 0.0);
    }
    const Interval I{-1.0, 1.5};
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(sd.size(), sd.size());
    for (Eigen::Index k = 0; k < sd.size(); ++k)
        if (I.contains(sd.values[k])) P += sd.vectors.col(k) * sd.vectors.col(k).transpose();
    const auto ind = [&](double e) { return I.contains(e) ? 1.0 : 0.0; };
    for (std::size_t x = 0; x < op.dim(); x += 2)
        for (std::size_t y = 0; y < op.dim(); y += 3)
            EXPECT_NEAR(correlator_entry(sd, ind, x, y), P(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)), 1e-12);
}

TEST(Correlator, InvariantUnderDegenerateRotation) {
    // Decoupled cube with a repeated value: any eigenbasis of the degenerate block gives the same kernel.
    const Cube c(Configuration::origin(1, 1), 2);
    auto field = sample_field_for({c}, FieldDistribution::gaussian(), 1);
    std::vector<std::pair<Site, double>> over;
    for (const auto& s : field.sites()) over.emplace_back(s, 1.0);
    const auto op = assemble(c, field.with_values(over), model(1, 1, 1.0));
    const auto sd = eigendecompose(op);
    Eigen::MatrixXd rotated = sd.vectors;
    rotated.col(0) = -rotated.col(0);
    SpectralData sd2 = sd;
    sd2.vectors = rotated;
    const auto eta = [](double e) { return e < 1.0 ? 1.0 : 0.0; };
    for (std::size_t x = 0; x < op.dim(); ++x)
        for (std::size_t y = 0; y < op.dim(); ++y)
            EXPECT_NEAR(correlator_entry(sd, eta, x, y), correlator_entry(sd2, eta, x, y), 1e-12);
}
