#pragma once

// Finite-volume N-particle operator H = Delta + g V + U on a cube, with
// Dirichlet conditions (hopping terms leaving the cube are dropped).

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mpal/errors.hpp"
#include "mpal/lattice.hpp"
#include "mpal/random_field.hpp"

namespace mpal {

/// Norm used for the inter-particle distance inside U^{(2)}(|x_i - x_j|).
enum class PairNorm { max_norm, l1_norm };

struct ModelSpec {
    int N = 2;  // particle count of the full system (enters gamma and distance multipliers)
    int d = 1;
    double g = 1.0;
    FieldDistribution distribution = FieldDistribution::gaussian();
    std::vector<double> U2;  // U2[r] for r = 0..r0; zero beyond r0
    int r0 = 0;
    PairNorm pair_norm = PairNorm::max_norm;
    bool hopping = true;  // test hook: false suppresses the Laplacian

    void validate() const {
        if (N < 1 || d < 1) throw DomainError("ModelSpec: N and d must be positive");
        if (r0 < 0) throw DomainError("ModelSpec: r0 must be non-negative");
        if (!U2.empty() && U2.size() != static_cast<std::size_t>(r0) + 1)
            throw DomainError("ModelSpec: U2 must list values for r = 0..r0");
        for (double u : U2)
            if (!std::isfinite(u)) throw DomainError("ModelSpec: U2 must be bounded");
        distribution.validate();
    }

    double pair_potential(int r) const {
        if (r < 0 || U2.empty() || r > r0) return 0.0;
        return U2[static_cast<std::size_t>(r)];
    }
};

inline int pair_distance(std::span<const int> a, std::span<const int> b, PairNorm norm) {
    if (norm == PairNorm::max_norm) return max_dist(a, b);
    int s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
}

/// U(x) = sum over unordered particle pairs of U2(|x_i - x_j|).
inline double interaction_energy(const Configuration& x, const ModelSpec& spec) {
    double u = 0.0;
    if (spec.U2.empty()) return u;
    for (int i = 0; i < x.N; ++i)
        for (int j = i + 1; j < x.N; ++j) u += spec.pair_potential(pair_distance(x.particle(i), x.particle(j), spec.pair_norm));
    return u;
}

/// Default cap on the dense matrix dimension.
inline constexpr std::size_t kDenseCap = 20000;

class FiniteVolumeOperator {
public:
    const Cube& cube() const noexcept { return indexer_.cube(); }
    const CubeIndexer& indexer() const noexcept { return indexer_; }
    const ModelSpec& spec() const noexcept { return spec_; }
    const FieldSample& field() const noexcept { return *field_; }
    std::shared_ptr<const FieldSample> field_ptr() const noexcept { return field_; }

    std::size_t dim() const noexcept { return indexer_.size(); }

    /// Dense symmetric matrix in cube enumeration order.
    const Eigen::MatrixXd& matrix() const noexcept { return matrix_; }

    /// Neighbour list: indices of lattice neighbours inside the cube.
    const std::vector<std::vector<int>>& neighbors() const noexcept { return neighbors_; }

    const Eigen::VectorXd& diagonal() const noexcept { return diag_; }

    /// Sparse product H v via the neighbour list.
    Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
        Eigen::VectorXd out = diag_.cwiseProduct(v);
        if (!spec_.hopping) return out;
        for (std::size_t i = 0; i < neighbors_.size(); ++i)
            for (int j : neighbors_[i]) out[static_cast<Eigen::Index>(i)] += v[j];
        return out;
    }

    std::ptrdiff_t index_of(const Configuration& x) const { return indexer_.index_of(x); }
    Configuration point_at(std::size_t i) const { return indexer_.point_at(i); }

private:
    friend FiniteVolumeOperator assemble(const Cube&, std::shared_ptr<const FieldSample>, const ModelSpec&, std::size_t);

    FiniteVolumeOperator(const Cube& cube, ModelSpec spec, std::shared_ptr<const FieldSample> field)
        : indexer_(cube), spec_(std::move(spec)), field_(std::move(field)) {}

    CubeIndexer indexer_;
    ModelSpec spec_;
    std::shared_ptr<const FieldSample> field_;
    Eigen::MatrixXd matrix_;
    Eigen::VectorXd diag_;
    std::vector<std::vector<int>> neighbors_;
};

/// Assemble H_{C} for the particle count of the cube's center.
///
/// (H psi)(x) = sum_{j, |e|=1, x + e_j in C} psi(x + e_j) + [g sum_j V(x_j) + U(x)] psi(x).
inline FiniteVolumeOperator assemble(const Cube& cube, std::shared_ptr<const FieldSample> field, const ModelSpec& spec,
                                     std::size_t dense_cap = kDenseCap) {
    spec.validate();
    if (!field) throw DomainError("assemble: null field");
    if (cube.d() != spec.d) throw DomainError("assemble: cube dimension differs from model dimension");
    if (field->d() != spec.d) throw DomainError("assemble: field dimension differs from model dimension");
    FiniteVolumeOperator op(cube, spec, std::move(field));
    const std::size_t n = op.indexer_.size();
    if (n > dense_cap)
        throw DomainError("assemble: dimension " + std::to_string(n) + " exceeds the dense cap " + std::to_string(dense_cap));

    const int nd = cube.center.size();
    op.matrix_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    op.diag_.resize(static_cast<Eigen::Index>(n));
    op.neighbors_.assign(n, {});

    Configuration x = cube.center;
    for (std::size_t i = 0; i < n; ++i) {
        op.indexer_.point_at(i, std::span<int>(x.coords));
        double v = 0.0;
        for (int j = 0; j < x.N; ++j) {
            const auto p = x.particle(j);
            if (!op.field_->contains(p))
                throw DomainError("assemble: field does not cover site of particle " + std::to_string(j) + " at " +
                                  to_string(x));
            v += op.field_->value_at(p);
        }
        const double diag = spec.g * v + interaction_energy(x, spec);
        op.diag_[static_cast<Eigen::Index>(i)] = diag;
        op.matrix_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = diag;

        if (!spec.hopping) continue;
        for (int k = 0; k < nd; ++k) {
            for (int step : {-1, 1}) {
                x.coords[static_cast<std::size_t>(k)] += step;
                const auto jdx = op.indexer_.index_of(std::span<const int>(x.coords));
                x.coords[static_cast<std::size_t>(k)] -= step;
                if (jdx < 0) continue;
                op.neighbors_[i].push_back(static_cast<int>(jdx));
                op.matrix_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(jdx)) = 1.0;
            }
        }
    }
    return op;
}

inline FiniteVolumeOperator assemble(const Cube& cube, const FieldSample& field, const ModelSpec& spec,
                                     std::size_t dense_cap = kDenseCap) {
    return assemble(cube, std::make_shared<const FieldSample>(field), spec, dense_cap);
}

/// Matrix-market coordinate export (lower triangle, 1-based, symmetric).
inline void write_matrix_market(std::ostream& os, const FiniteVolumeOperator& op) {
    const auto& m = op.matrix();
    std::size_t nnz = 0;
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = j; i < m.rows(); ++i)
            if (m(i, j) != 0.0) ++nnz;
    os << "%%MatrixMarket matrix coordinate real symmetric\n";
    os << "% cube center " << to_string(op.cube().center) << " radius " << op.cube().L << '\n';
    os << "% N " << op.cube().N() << " d " << op.cube().d() << " g " << op.spec().g << '\n';
    os << m.rows() << ' ' << m.cols() << ' ' << nnz << '\n';
    char buf[64];
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = j; i < m.rows(); ++i)
            if (m(i, j) != 0.0) {
                std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
                os << (i + 1) << ' ' << (j + 1) << ' ' << buf << '\n';
            }
}

/// Read back a symmetric coordinate matrix written by write_matrix_market.
inline Eigen::MatrixXd read_matrix_market(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("%%MatrixMarket", 0) != 0) throw ConfigError("matrix market: bad header");
    while (std::getline(is, line) && !line.empty() && line[0] == '%') {
    }
    std::istringstream dims(line);
    Eigen::Index rows = 0, cols = 0;
    std::size_t nnz = 0;
    if (!(dims >> rows >> cols >> nnz)) throw ConfigError("matrix market: bad size line");
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, cols);
    for (std::size_t k = 0; k < nnz; ++k) {
        Eigen::Index i = 0, j = 0;
        double v = 0.0;
        if (!(is >> i >> j >> v)) throw ConfigError("matrix market: truncated entries");
        m(i - 1, j - 1) = v;
        m(j - 1, i - 1) = v;
    }
    return m;
}

} // namespace mpal
