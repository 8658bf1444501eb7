#pragma once

// Geometry of the multi-particle configuration space Z^{Nd}: max-norm,
// symmetrized distance, cubes with their three boundaries, annuli and
// projections onto particle subsets.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mpal/errors.hpp"

namespace mpal {

/// N particle positions in Z^d, stored flat: particle j occupies coords[j*d, (j+1)*d).
struct Configuration {
    int N = 1;
    int d = 1;
    std::vector<int> coords;

    Configuration() : coords(1, 0) {}

    Configuration(int n_particles, int dim, std::vector<int> values)
        : N(n_particles), d(dim), coords(std::move(values)) {
        if (N < 1 || d < 1) throw DomainError("Configuration: N and d must be positive");
        if (coords.size() != static_cast<std::size_t>(N) * static_cast<std::size_t>(d))
            throw DomainError("Configuration: expected " + std::to_string(N * d) + " coordinates, got " +
                              std::to_string(coords.size()));
    }

    static Configuration origin(int n_particles, int dim) {
        return Configuration(n_particles, dim, std::vector<int>(static_cast<std::size_t>(n_particles * dim), 0));
    }

    /// Every coordinate of every particle set to `value`.
    static Configuration filled(int n_particles, int dim, int value) {
        return Configuration(n_particles, dim, std::vector<int>(static_cast<std::size_t>(n_particles * dim), value));
    }

    int size() const noexcept { return N * d; }

    std::span<const int> particle(int j) const {
        return std::span<const int>(coords).subspan(static_cast<std::size_t>(j * d), static_cast<std::size_t>(d));
    }

    friend bool operator==(const Configuration&, const Configuration&) = default;
    friend auto operator<=>(const Configuration& a, const Configuration& b) {
        if (auto c = a.N <=> b.N; c != 0) return c;
        if (auto c = a.d <=> b.d; c != 0) return c;
        return a.coords <=> b.coords;
    }
};

/// A single-particle site in Z^d.
using Site = std::vector<int>;

inline std::string to_string(const Configuration& x) {
    std::string out = "(";
    for (int j = 0; j < x.N; ++j) {
        if (j) out += "; ";
        for (int i = 0; i < x.d; ++i) {
            if (i) out += ",";
            out += std::to_string(x.coords[static_cast<std::size_t>(j * x.d + i)]);
        }
    }
    return out + ")";
}

inline void require_same_shape(const Configuration& x, const Configuration& y) {
    if (x.N != y.N || x.d != y.d)
        throw DomainError("configurations have different (N, d): " + to_string(x) + " vs " + to_string(y));
}

/// ||x||_inf over all particles and components.
inline int max_norm(const Configuration& x) {
    int m = 0;
    for (int c : x.coords) m = std::max(m, std::abs(c));
    return m;
}

inline int max_dist(std::span<const int> a, std::span<const int> b) {
    int m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline int max_dist(const Configuration& x, const Configuration& y) {
    require_same_shape(x, y);
    return max_dist(std::span<const int>(x.coords), std::span<const int>(y.coords));
}

/// True when all particles sit at the same site (the principal diagonal).
inline bool is_diagonal(const Configuration& x) {
    for (int j = 1; j < x.N; ++j)
        if (max_dist(x.particle(j), x.particle(0)) != 0) return false;
    return true;
}

/// Largest particle count accepted by sym_dist (exhaustive permutation scan).
inline constexpr int kMaxSymDistParticles = 8;

/// d_S(x, y) = min over particle permutations tau of ||x - tau(y)||_inf.
///
/// Exhaustive over all N! permutations; min-of-max is not a linear assignment
/// problem, so no relaxation is attempted. N > 8 is rejected.
inline int sym_dist(const Configuration& x, const Configuration& y) {
    require_same_shape(x, y);
    if (x.N > kMaxSymDistParticles)
        throw DomainError("sym_dist: N = " + std::to_string(x.N) + " exceeds the supported maximum of 8");
    // pair[i][j] = distance between particle i of x and particle j of y
    std::vector<int> pair(static_cast<std::size_t>(x.N * x.N));
    for (int i = 0; i < x.N; ++i)
        for (int j = 0; j < x.N; ++j)
            pair[static_cast<std::size_t>(i * x.N + j)] = max_dist(x.particle(i), y.particle(j));
    std::vector<int> perm(static_cast<std::size_t>(x.N));
    std::iota(perm.begin(), perm.end(), 0);
    int best = -1;
    do {
        int m = 0;
        for (int i = 0; i < x.N && (best < 0 || m < best); ++i)
            m = std::max(m, pair[static_cast<std::size_t>(i * x.N + perm[static_cast<std::size_t>(i)])]);
        if (best < 0 || m < best) best = m;
    } while (best > 0 && std::next_permutation(perm.begin(), perm.end()));
    return best;
}

/// "D-distant" in the sense used throughout: d_S(x, y) > D.
inline bool are_distant(const Configuration& x, const Configuration& y, double separation) {
    return static_cast<double>(sym_dist(x, y)) > separation;
}

/// The cube C_L(u) = {x : ||x - u||_inf <= L}.
struct Cube {
    Configuration center;
    int L = 0;

    Cube() = default;
    Cube(Configuration c, int radius) : center(std::move(c)), L(radius) {
        if (L < 0) throw DomainError("Cube: radius must be non-negative");
    }

    int N() const noexcept { return center.N; }
    int d() const noexcept { return center.d; }
    int side() const noexcept { return 2 * L + 1; }

    std::size_t cardinality() const {
        std::size_t n = 1;
        for (int i = 0; i < center.size(); ++i) n *= static_cast<std::size_t>(side());
        return n;
    }

    bool contains(const Configuration& x) const { return max_dist(x, center) <= L; }

    /// Whether `inner` lies entirely inside this cube.
    bool contains(const Cube& inner) const { return max_dist(inner.center, center) + inner.L <= L; }

    friend bool operator==(const Cube&, const Cube&) = default;
};

/// Position <-> index map for the lexicographic enumeration of a cube
/// (flattened Nd-tuple, first coordinate slowest). The index of a point is its
/// row/column in every matrix built over the cube.
class CubeIndexer {
public:
    explicit CubeIndexer(const Cube& cube) : cube_(cube) {
        const int n = cube.center.size();
        stride_.assign(static_cast<std::size_t>(n), 1);
        for (int i = n - 2; i >= 0; --i)
            stride_[static_cast<std::size_t>(i)] = stride_[static_cast<std::size_t>(i + 1)] * static_cast<std::size_t>(cube.side());
        size_ = cube.cardinality();
    }

    std::size_t size() const noexcept { return size_; }
    const Cube& cube() const noexcept { return cube_; }

    /// Index of x, or -1 when x lies outside the cube.
    std::ptrdiff_t index_of(std::span<const int> x) const {
        std::size_t idx = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const int off = x[i] - cube_.center.coords[i] + cube_.L;
            if (off < 0 || off >= cube_.side()) return -1;
            idx += static_cast<std::size_t>(off) * stride_[i];
        }
        return static_cast<std::ptrdiff_t>(idx);
    }

    std::ptrdiff_t index_of(const Configuration& x) const {
        require_same_shape(x, cube_.center);
        return index_of(std::span<const int>(x.coords));
    }

    void point_at(std::size_t index, std::span<int> out) const {
        for (std::size_t i = 0; i < out.size(); ++i) {
            const std::size_t off = index / stride_[i];
            index %= stride_[i];
            out[i] = cube_.center.coords[i] - cube_.L + static_cast<int>(off);
        }
    }

    Configuration point_at(std::size_t index) const {
        Configuration x = cube_.center;
        point_at(index, std::span<int>(x.coords));
        return x;
    }

private:
    Cube cube_;
    std::vector<std::size_t> stride_;
    std::size_t size_ = 0;
};

/// All points of the cube in lexicographic order (first coordinate slowest).
inline std::vector<Configuration> cube_points(const Cube& cube) {
    const CubeIndexer indexer(cube);
    std::vector<Configuration> pts;
    pts.reserve(indexer.size());
    for (std::size_t i = 0; i < indexer.size(); ++i) pts.push_back(indexer.point_at(i));
    return pts;
}

enum class BoundaryKind { inner, outer };

/// Inner boundary {||x-u|| = L} or outer boundary {||x-u|| = L+1}, in enumeration order.
inline std::vector<Configuration> boundary(const Cube& cube, BoundaryKind kind) {
    const int r = kind == BoundaryKind::inner ? cube.L : cube.L + 1;
    std::vector<Configuration> out;
    for (auto& x : cube_points(Cube(cube.center, r)))
        if (max_dist(x, cube.center) == r) out.push_back(std::move(x));
    return out;
}

inline std::vector<Configuration> inner_boundary(const Cube& cube) { return boundary(cube, BoundaryKind::inner); }
inline std::vector<Configuration> outer_boundary(const Cube& cube) { return boundary(cube, BoundaryKind::outer); }

/// Edge boundary: pairs (x, x') with x on the inner boundary, x' on the outer
/// boundary and ||x - x'||_inf = 1.
inline std::vector<std::pair<Configuration, Configuration>> edge_boundary(const Cube& cube) {
    std::vector<std::pair<Configuration, Configuration>> out;
    const int n = cube.center.size();
    std::vector<int> off(static_cast<std::size_t>(n), -1);
    const auto inner = inner_boundary(cube);
    for (const auto& x : inner) {
        std::fill(off.begin(), off.end(), -1);
        while (true) {
            Configuration y = x;
            bool zero = true;
            for (int i = 0; i < n; ++i) {
                y.coords[static_cast<std::size_t>(i)] += off[static_cast<std::size_t>(i)];
                zero = zero && off[static_cast<std::size_t>(i)] == 0;
            }
            if (!zero && max_dist(y, cube.center) == cube.L + 1) out.emplace_back(x, std::move(y));
            int i = n - 1;
            while (i >= 0 && off[static_cast<std::size_t>(i)] == 1) off[static_cast<std::size_t>(i--)] = -1;
            if (i < 0) break;
            ++off[static_cast<std::size_t>(i)];
        }
    }
    return out;
}

/// Whether x and y are nearest neighbours of the hypercubic lattice (l1 distance 1).
inline bool lattice_neighbors(const Configuration& x, const Configuration& y) {
    int l1 = 0;
    for (std::size_t i = 0; i < x.coords.size(); ++i) l1 += std::abs(x.coords[i] - y.coords[i]);
    return l1 == 1;
}

/// A = C_b(center) \ C_a(center). An inner radius of -1 denotes the full cube C_b.
struct Annulus {
    Configuration center;
    int a = -1;
    int b = 0;

    Annulus() = default;
    Annulus(Configuration c, int inner, int outer) : center(std::move(c)), a(inner), b(outer) {
        if (a < -1 || b <= a) throw DomainError("Annulus: need -1 <= a < b");
    }

    int width() const noexcept { return b - a; }

    bool contains(const Configuration& x) const {
        const int r = max_dist(x, center);
        return r > a && r <= b;
    }

    bool contains_radius(int r) const noexcept { return r > a && r <= b; }

    friend bool operator==(const Annulus&, const Annulus&) = default;
};

/// Projection of the cube onto a nonempty particle subset (0-based indices):
/// the |subset|-particle cube with the restricted center and the same radius.
inline Cube projection(const Cube& cube, const std::vector<int>& subset) {
    if (subset.empty()) throw DomainError("projection: empty particle subset");
    std::vector<int> sorted = subset;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw DomainError("projection: repeated particle index");
    std::vector<int> c;
    for (int j : subset) {
        if (j < 0 || j >= cube.N()) throw DomainError("projection: particle index " + std::to_string(j) + " out of range");
        auto p = cube.center.particle(j);
        c.insert(c.end(), p.begin(), p.end());
    }
    return Cube(Configuration(static_cast<int>(subset.size()), cube.d(), std::move(c)), cube.L);
}

/// Single-particle sites touched by any particle of any point of the cube,
/// sorted lexicographically and deduplicated.
inline std::vector<Site> single_particle_region(const Cube& cube) {
    std::vector<Site> sites;
    for (int j = 0; j < cube.N(); ++j) {
        auto p = cube.center.particle(j);
        const Cube box(Configuration(1, cube.d(), std::vector<int>(p.begin(), p.end())), cube.L);
        for (auto& x : cube_points(box)) sites.push_back(std::move(x.coords));
    }
    std::sort(sites.begin(), sites.end());
    sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
    return sites;
}

/// Union of the single-particle regions of several cubes.
inline std::vector<Site> single_particle_region(const std::vector<Cube>& cubes) {
    std::vector<Site> sites;
    for (const auto& c : cubes) {
        auto s = single_particle_region(c);
        sites.insert(sites.end(), s.begin(), s.end());
    }
    std::sort(sites.begin(), sites.end());
    sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
    return sites;
}

} // namespace mpal
