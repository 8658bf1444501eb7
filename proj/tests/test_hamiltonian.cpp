#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "mpal/hamiltonian.hpp"
#include "mpal/spectral.hpp"

using namespace mpal;

namespace {

ModelSpec model(int N, int d, double g) {
    ModelSpec s;
    s.N = N;
    s.d = d;
    s.g = g;
    return s;
}

FiniteVolumeOperator build(const Cube& c, const ModelSpec& s, std::uint64_t seed) {
    return assemble(c, sample_field_for({c}, s.distribution, seed), s);
}

int offdiag_count(const Eigen::MatrixXd& m, Eigen::Index row) {
    int n = 0;
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        if (j != row && m(row, j) != 0.0) ++n;
    return n;
}

} // namespace

TEST(Interaction, Examples) {
    ModelSpec s = model(2, 1, 1.0);
    s.r0 = 2;
    s.U2 = {0.7, 0.3, 0.2};
    EXPECT_EQ(interaction_energy(Configuration(2, 1, {0, 3}), s), 0.0);
    EXPECT_EQ(interaction_energy(Configuration(2, 1, {3, 3}), s), 0.7);
    ModelSpec s3 = model(3, 1, 1.0);
    s3.r0 = 2;
    s3.U2 = {1.0, 1.0, 1.0};
    EXPECT_EQ(interaction_energy(Configuration(3, 1, {0, 1, 2}), s3), 3.0);
}

TEST(Interaction, L1NormOption) {
    ModelSpec s = model(2, 2, 1.0);
    s.r0 = 2;
    s.U2 = {0.0, 0.0, 5.0};
    s.pair_norm = PairNorm::l1_norm;
    EXPECT_EQ(interaction_energy(Configuration(2, 2, {0, 0, 1, 1}), s), 5.0);
    s.pair_norm = PairNorm::max_norm;
    EXPECT_EQ(interaction_energy(Configuration(2, 2, {0, 0, 1, 1}), s), 0.0);
}

TEST(Assemble, FreePathSpectrum) {
    const int L = 6;
    const int n = 2 * L + 1;
    const auto op = build(Cube(Configuration::origin(1, 1), L), model(1, 1, 0.0), 1);
    const auto sd = eigendecompose(op);
    for (int k = 1; k <= n; ++k) EXPECT_NEAR(sd.values[k - 1], 2.0 * std::cos(std::numbers::pi * (n + 1 - k) / (n + 1)), 1e-10);
}

TEST(Assemble, RowDegrees) {
    const Cube c(Configuration::origin(2, 2), 1);
    const auto op = build(c, model(2, 2, 1.0), 3);
    EXPECT_EQ(offdiag_count(op.matrix(), op.index_of(Configuration::origin(2, 2))), 8);
    EXPECT_EQ(offdiag_count(op.matrix(), 0), 4);
    for (Eigen::Index i = 0; i < op.matrix().rows(); ++i) EXPECT_LE(offdiag_count(op.matrix(), i), 8);
}

TEST(Assemble, SymmetricWithUnitHopping) {
    const Cube c(Configuration(2, 1, {0, 3}), 3);
    ModelSpec s = model(2, 1, 2.0);
    s.r0 = 1;
    s.U2 = {1.5, 0.5};
    const auto op = build(c, s, 4);
    const auto& m = op.matrix();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            EXPECT_EQ(m(i, j), m(j, i));
            if (i != j) {
                EXPECT_TRUE(m(i, j) == 0.0 || m(i, j) == 1.0);
            }
        }
    for (std::size_t i = 0; i < op.dim(); ++i) {
        const auto x = op.point_at(i);
        const double expect = 2.0 * (op.field().value_at(x.particle(0)) + op.field().value_at(x.particle(1))) +
                              interaction_energy(x, s);
        EXPECT_EQ(m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)), expect);
    }
}

TEST(Assemble, ApplyMatchesDense) {
    const auto op = build(Cube(Configuration::origin(2, 1), 4), model(2, 1, 1.0), 5);
    rng::PhiloxStream g(1);
    Eigen::VectorXd v(static_cast<Eigen::Index>(op.dim()));
    for (auto& x : v) x = g.normal();
    EXPECT_LT((op.apply(v) - op.matrix() * v).norm(), 1e-12);
}

TEST(Assemble, FieldMustCoverCube) {
    const Cube c(Configuration::origin(2, 1), 2);
    const auto small = sample_field_for({Cube(Configuration::origin(2, 1), 1)}, FieldDistribution::gaussian(), 1);
    EXPECT_THROW(assemble(c, small, model(2, 1, 1.0)), DomainError);
}

TEST(Assemble, DenseCap) {
    const Cube c(Configuration::origin(2, 1), 3);
    EXPECT_THROW(assemble(c, sample_field_for({c}, FieldDistribution::gaussian(), 1), model(2, 1, 1.0), 10), DomainError);
}

TEST(Assemble, LaplacianGershgorin) {
    const auto op = build(Cube(Configuration::origin(2, 2), 2), model(2, 2, 0.0), 1);
    const auto sd = eigendecompose(op, false);
    EXPECT_GE(sd.values[0], -8.0);
    EXPECT_LE(sd.values[sd.size() - 1], 8.0);
}

TEST(Assemble, ShiftCoupling) {
    const Cube c(Configuration(2, 1, {0, 2}), 3);
    const ModelSpec s = model(2, 1, 1.7);
    const auto field = sample_field_for({c}, s.distribution, 8);
    const auto a = eigendecompose(assemble(c, field, s), false);
    const auto b = eigendecompose(assemble(c, field.shifted(0.3), s), false);
    for (Eigen::Index k = 0; k < a.size(); ++k) EXPECT_NEAR(b.values[k] - a.values[k], 1.7 * 2 * 0.3, 1e-10);
}

TEST(Assemble, PermutationInvariance) {
    const Cube c(Configuration(2, 1, {1, 1}), 3);
    ModelSpec s = model(2, 1, 1.0);
    s.r0 = 1;
    s.U2 = {2.0, 1.0};
    const auto op = build(c, s, 10);
    const auto& m = op.matrix();
    for (std::size_t i = 0; i < op.dim(); ++i) {
        auto xi = op.point_at(i);
        std::swap(xi.coords[0], xi.coords[1]);
        const auto pi = op.index_of(xi);
        for (std::size_t j = 0; j < op.dim(); ++j) {
            auto xj = op.point_at(j);
            std::swap(xj.coords[0], xj.coords[1]);
            EXPECT_EQ(m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), m(pi, op.index_of(xj)));
        }
    }
}

TEST(MatrixMarket, RoundTrip) {
    const auto op = build(Cube(Configuration::origin(2, 1), 2), model(2, 1, 1.0), 6);
    std::stringstream ss;
    write_matrix_market(ss, op);
    const auto back = read_matrix_market(ss);
    EXPECT_EQ(back, op.matrix());
}
