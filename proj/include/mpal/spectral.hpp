#pragma once

// Eigendecomposition, Green functions, spectral projections and the exact
// geometric resolvent identities.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "mpal/errors.hpp"
#include "mpal/hamiltonian.hpp"
#include "mpal/lattice.hpp"

namespace mpal {

/// Closed real interval [lo, hi]. Intervals with hi <= lo are treated as empty.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool empty() const noexcept { return !(hi > lo); }
    double length() const noexcept { return empty() ? 0.0 : hi - lo; }
    bool contains(double e) const noexcept { return !empty() && e >= lo && e <= hi; }

    friend bool operator==(const Interval&, const Interval&) = default;
};

/// Energies closer than this to an eigenvalue are treated as resonant.
inline constexpr double kResonanceGuard = 1e-12;

/// Distance from E to a sorted spectrum.
inline double distance_to_spectrum(const Eigen::VectorXd& sorted, double e) {
    if (sorted.size() == 0) return std::numeric_limits<double>::infinity();
    const double* begin = sorted.data();
    const double* end = begin + sorted.size();
    const double* it = std::lower_bound(begin, end, e);
    double best = std::numeric_limits<double>::infinity();
    if (it != end) best = std::min(best, *it - e);
    if (it != begin) best = std::min(best, e - *(it - 1));
    return best;
}

/// Eigenvalues (ascending) and orthonormal eigenvectors (columns).
struct SpectralData {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;  // empty when computed without vectors
    std::optional<CubeIndexer> indexer;

    Eigen::Index size() const noexcept { return values.size(); }
    bool has_vectors() const noexcept { return vectors.size() > 0; }

    std::size_t index_of(const Configuration& x) const {
        if (!indexer) throw DomainError("SpectralData: no cube attached");
        const auto i = indexer->index_of(x);
        if (i < 0) throw GeometryError("point " + to_string(x) + " is outside the cube");
        return static_cast<std::size_t>(i);
    }

    /// Distance from E to the spectrum.
    double distance_to_spectrum(double e) const { return mpal::distance_to_spectrum(values, e); }
};

/// Dense symmetric eigensolve.
inline SpectralData eigendecompose(const Eigen::MatrixXd& h, bool with_vectors = true) {
    if (h.rows() != h.cols()) throw DomainError("eigendecompose: matrix is not square");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h, with_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw Error("eigendecompose: eigensolver did not converge");
    SpectralData sd;
    sd.values = solver.eigenvalues();
    if (with_vectors) sd.vectors = solver.eigenvectors();
    return sd;
}

inline SpectralData eigendecompose(const FiniteVolumeOperator& op, bool with_vectors = true,
                                   std::size_t dim_cap = kDenseCap) {
    if (op.dim() > dim_cap)
        throw DomainError("eigendecompose: dimension " + std::to_string(op.dim()) + " exceeds cap " + std::to_string(dim_cap));
    SpectralData sd = eigendecompose(op.matrix(), with_vectors);
    sd.indexer = op.indexer();
    return sd;
}

inline void require_non_resonant(const SpectralData& sd, double e) {
    if (sd.distance_to_spectrum(e) <= kResonanceGuard) throw ResonantEnergyError(e);
}

/// G(x, y; E) = sum_k v_k(x) v_k(y) / (E_k - E), by index.
inline double green_entry(const SpectralData& sd, double e, std::size_t x, std::size_t y) {
    if (!sd.has_vectors()) throw DomainError("green_entry: eigenvectors required");
    require_non_resonant(sd, e);
    const auto xi = static_cast<Eigen::Index>(x);
    const auto yi = static_cast<Eigen::Index>(y);
    double s = 0.0;
    for (Eigen::Index k = 0; k < sd.size(); ++k) s += sd.vectors(xi, k) * sd.vectors(yi, k) / (sd.values[k] - e);
    return s;
}

inline double green_entry(const SpectralData& sd, double e, const Configuration& x, const Configuration& y) {
    return green_entry(sd, e, sd.index_of(x), sd.index_of(y));
}

/// (H - E)^{-1} by direct LU factorisation.
inline Eigen::MatrixXd green_matrix_direct(const Eigen::MatrixXd& h, double e) {
    const Eigen::MatrixXd shifted = h - e * Eigen::MatrixXd::Identity(h.rows(), h.cols());
    return shifted.partialPivLu().inverse();
}

/// Column G(., y; E) by a direct linear solve.
inline Eigen::VectorXd green_column_direct(const Eigen::MatrixXd& h, double e, std::size_t y) {
    const Eigen::MatrixXd shifted = h - e * Eigen::MatrixXd::Identity(h.rows(), h.cols());
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(h.rows());
    rhs[static_cast<Eigen::Index>(y)] = 1.0;
    return shifted.partialPivLu().solve(rhs);
}

/// Resolvent of one operator at one real energy, evaluated on demand from a
/// shared spectral decomposition.
class GreenFunction {
public:
    GreenFunction(std::shared_ptr<const SpectralData> sd, double energy) : sd_(std::move(sd)), energy_(energy) {
        if (!sd_ || !sd_->has_vectors()) throw DomainError("GreenFunction: eigenvectors required");
        require_non_resonant(*sd_, energy_);
    }

    double energy() const noexcept { return energy_; }
    double operator()(std::size_t x, std::size_t y) const { return green_entry(*sd_, energy_, x, y); }
    double operator()(const Configuration& x, const Configuration& y) const { return green_entry(*sd_, energy_, x, y); }

private:
    std::shared_ptr<const SpectralData> sd_;
    double energy_;
};

/// min |e1 - e2| over two sorted spectra, by a merged scan.
inline double spectral_distance(const std::vector<double>& s1, const std::vector<double>& s2) {
    if (s1.empty() || s2.empty()) throw DomainError("spectral_distance: empty spectrum");
    double best = std::numeric_limits<double>::infinity();
    std::size_t i = 0, j = 0;
    while (i < s1.size() && j < s2.size()) {
        best = std::min(best, std::abs(s1[i] - s2[j]));
        if (s1[i] < s2[j])
            ++i;
        else
            ++j;
    }
    return best;
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline double spectral_distance(const SpectralData& a, const SpectralData& b) {
    return spectral_distance(to_std(a.values), to_std(b.values));
}

/// tr P_I(H): the number of eigenvalues in I.
inline long long projection_trace(const SpectralData& sd, const Interval& interval) {
    long long n = 0;
    for (Eigen::Index k = 0; k < sd.size(); ++k)
        if (interval.contains(sd.values[k])) ++n;
    return n;
}

/// eta(H)(x, y) = sum_n eta(E_n) Psi_n(x) Psi_n(y).
inline double correlator_entry(const SpectralData& sd, const std::function<double(double)>& eta, std::size_t x,
                               std::size_t y) {
    if (!sd.has_vectors()) throw DomainError("correlator_entry: eigenvectors required");
    double s = 0.0;
    for (Eigen::Index k = 0; k < sd.size(); ++k) {
        const double w = eta(sd.values[k]);
        if (w != 0.0) s += w * sd.vectors(static_cast<Eigen::Index>(x), k) * sd.vectors(static_cast<Eigen::Index>(y), k);
    }
    return s;
}

inline double correlator_entry(const SpectralData& sd, const std::function<double(double)>& eta, const Configuration& x,
                               const Configuration& y) {
    return correlator_entry(sd, eta, sd.index_of(x), sd.index_of(y));
}

// Geometric resolvent identities.
//
// For an inner cube C_l(w) with C_{l+1}(w) inside the outer cube, splitting the
// outer operator into the decoupled part plus the hopping Gamma across the edge
// boundary gives, by the second resolvent identity,
//   G_out(x, y) = - sum_{(v, v') in edge boundary} Gamma(v, v') G_in(x, v) G_out(v', y)
// for x in the inner cube and y outside it. Gamma(v, v') is the hopping matrix
// element (1 for lattice neighbours, 0 for the diagonal max-norm pairs).
// Eigenfunctions satisfy Psi(x) = - sum Gamma(v, v') G_in(x, v; E) Psi(v').

struct GriCheck {
    double residual = 0.0;
    double scale = 0.0;  // max(|lhs|, sum of |terms|)
    std::size_t edge_pairs = 0;
};

namespace detail {

inline void require_gri_geometry(const FiniteVolumeOperator& outer, const Cube& inner) {
    if (inner.N() != outer.cube().N() || inner.d() != outer.cube().d())
        throw GeometryError("gri: inner cube has a different (N, d)");
    if (!outer.cube().contains(Cube(inner.center, inner.L + 1)))
        throw GeometryError("gri: outer boundary of the inner cube must lie inside the outer cube");
}

} // namespace detail

inline GriCheck gri_residual(const FiniteVolumeOperator& outer, const Cube& inner_cube, double e, const Configuration& x,
                             const Configuration& y) {
    detail::require_gri_geometry(outer, inner_cube);
    if (!inner_cube.contains(x)) throw GeometryError("gri: x must lie in the inner cube");
    if (!outer.cube().contains(y) || inner_cube.contains(y)) throw GeometryError("gri: y must lie in outer \\ inner");

    const auto inner = assemble(inner_cube, outer.field_ptr(), outer.spec());
    require_non_resonant(eigendecompose(outer, false), e);
    require_non_resonant(eigendecompose(inner, false), e);

    const CubeIndexer& in_idx = inner.indexer();
    const auto xi_in = static_cast<std::size_t>(in_idx.index_of(x));
    const auto yi_out = static_cast<std::size_t>(outer.index_of(y));
    const auto xi_out = static_cast<std::size_t>(outer.index_of(x));

    // Both operators are symmetric, so columns give rows.
    const Eigen::VectorXd g_in_x = green_column_direct(inner.matrix(), e, xi_in);
    const Eigen::VectorXd g_out_y = green_column_direct(outer.matrix(), e, yi_out);

    GriCheck out;
    double sum = 0.0, abs_sum = 0.0;
    if (outer.spec().hopping) {
        for (const auto& [v, vp] : edge_boundary(inner_cube)) {
            ++out.edge_pairs;
            if (!lattice_neighbors(v, vp)) continue;
            const double term = g_in_x[in_idx.index_of(v)] * g_out_y[outer.index_of(vp)];
            sum += term;
            abs_sum += std::abs(term);
        }
    }
    const double lhs = g_out_y[static_cast<Eigen::Index>(xi_out)];
    out.residual = std::abs(lhs + sum);
    out.scale = std::max(std::abs(lhs), abs_sum);
    return out;
}

/// Eigenfunction variant for eigenpair n of the outer operator (sd from eigendecompose(outer)).
inline GriCheck gri_ef_residual(const FiniteVolumeOperator& outer, const SpectralData& sd, Eigen::Index n,
                                const Cube& inner_cube, const Configuration& x) {
    detail::require_gri_geometry(outer, inner_cube);
    if (!inner_cube.contains(x)) throw GeometryError("gri: x must lie in the inner cube");
    if (!sd.has_vectors() || n < 0 || n >= sd.size()) throw DomainError("gri: invalid eigenpair index");

    const double e = sd.values[n];
    const auto inner = assemble(inner_cube, outer.field_ptr(), outer.spec());
    require_non_resonant(eigendecompose(inner, false), e);
    const CubeIndexer& in_idx = inner.indexer();
    const Eigen::VectorXd g_in_x = green_column_direct(inner.matrix(), e, static_cast<std::size_t>(in_idx.index_of(x)));

    GriCheck out;
    double sum = 0.0, abs_sum = 0.0;
    if (outer.spec().hopping) {
        for (const auto& [v, vp] : edge_boundary(inner_cube)) {
            ++out.edge_pairs;
            if (!lattice_neighbors(v, vp)) continue;
            const double term = g_in_x[in_idx.index_of(v)] * sd.vectors(outer.index_of(vp), n);
            sum += term;
            abs_sum += std::abs(term);
        }
    }
    const double lhs = sd.vectors(outer.index_of(x), n);
    out.residual = std::abs(lhs + sum);
    out.scale = std::max(std::abs(lhs), abs_sum);
    return out;
}

} // namespace mpal
