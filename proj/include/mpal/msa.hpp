#pragma once

// Multi-scale classification: scale ladder, decay exponent gamma, (E,m)
// singularity, E-resonance, partial/full interactivity, tunneling and the
// K counters.
//
// "Exists E in I" is discretised to a uniform grid plus the eigenvalues in I.
// Every grid point is decided exactly; a cheap spectral upper bound on the
// Green function is only used to skip points that are provably non-singular.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "mpal/errors.hpp"
#include "mpal/hamiltonian.hpp"
#include "mpal/lattice.hpp"
#include "mpal/spectral.hpp"

namespace mpal {

/// gamma(m, L, n) = m L (1 + L^{-1/4})^{N - n + 1}.
inline double gamma(double m, int L, int n, int N) {
    if (n < 1 || n > N) throw DomainError("gamma: need 1 <= n <= N (n = " + std::to_string(n) + ", N = " + std::to_string(N) + ")");
    if (L < 1) throw DomainError("gamma: L must be >= 1");
    if (!(m > 0.0)) throw DomainError("gamma: m must be positive");
    return m * L * std::pow(1.0 + std::pow(static_cast<double>(L), -0.25), N - n + 1);
}

/// floor(x^e) with a small tolerance so that exact integer powers are not lost to rounding.
inline int floor_pow(int x, double e) { return static_cast<int>(std::floor(std::pow(static_cast<double>(x), e) + 1e-9)); }

struct ScaleLadder {
    int L0 = 8;
    double alpha = 1.5;
    double m = 1.0;
    double p = 13.0;
    Interval I{-1.0, 1.0};
    int k_max = 2;
    double beta = 0.5;          // resonance scale exp(-L^beta)
    double grid_spacing = 0.0;  // 0: default spacing per scale
    double s = 2.0;             // moment exponent entering the validity condition on p

    void validate() const {
        if (L0 < 2) throw ConfigError("ladder: L0 must be >= 2");
        if (!(alpha > 1.0 && alpha < 2.0)) throw ConfigError("ladder: alpha must lie in (1, 2)");
        if (!(m > 0.0)) throw ConfigError("ladder: m must be positive");
        if (!(p > 0.0)) throw ConfigError("ladder: p must be positive");
        if (k_max < 0) throw ConfigError("ladder: k_max must be >= 0");
        if (!(beta > 0.0)) throw ConfigError("ladder: beta must be positive");
        if (grid_spacing < 0.0) throw ConfigError("ladder: grid_spacing must be >= 0");
        if (!std::isfinite(I.lo) || !std::isfinite(I.hi)) throw ConfigError("ladder: interval must be finite");
    }

    /// L_0, ..., L_{k_max} with L_{k+1} = floor(L_k^alpha).
    std::vector<int> scales() const {
        std::vector<int> out{L0};
        for (int k = 0; k < k_max; ++k) out.push_back(floor_pow(out.back(), alpha));
        return out;
    }

    int L(int k) const {
        if (k < 0) throw DomainError("ladder: negative scale index");
        int v = L0;
        for (int i = 0; i < k; ++i) v = floor_pow(v, alpha);
        return v;
    }

    /// Radius of the inner index set: floor(L^{1/alpha}), capped at L.
    int inner_radius(int L) const { return std::min(L, floor_pow(L, 1.0 / alpha)); }

    /// Right-hand side of the condition p > max{2Nd alpha/(2-alpha), (3Nd alpha + alpha s)/2}.
    double p_threshold(int N, int d) const {
        const double nd = static_cast<double>(N) * d;
        return std::max(2.0 * nd * alpha / (2.0 - alpha), (3.0 * nd * alpha + alpha * s) / 2.0);
    }

    bool p_valid(int N, int d) const { return p > p_threshold(N, d); }

    /// Grid spacing used at radius L: the override if set, else max(exp(-gamma(m,L,N))/4, 1e-6 |I|).
    double spacing(int L, int N) const {
        if (grid_spacing > 0.0) return grid_spacing;
        return std::max(std::exp(-gamma(m, L, N, N)) / 4.0, 1e-6 * I.length());
    }
};

/// L^{-p 2^{N-n+1}}.
inline double ds_bound(int L, double p, int n, int N) {
    if (n < 1 || n > N) throw DomainError("ds_bound: need 1 <= n <= N");
    return std::pow(static_cast<double>(L), -p * std::ldexp(1.0, N - n + 1));
}

/// Uniform grid lo, lo + h, ... over a closed interval. Empty intervals give no points.
class EnergyGrid {
public:
    EnergyGrid(Interval interval, double h) : interval_(interval), h_(h) {
        if (!(h > 0.0)) throw DomainError("EnergyGrid: spacing must be positive");
        if (!interval.empty()) {
            const double n = std::floor((interval.hi - interval.lo) / h + 1e-9) + 1.0;
            if (n > 1e12) throw DomainError("EnergyGrid: too many points");
            size_ = static_cast<long long>(n);
        }
    }

    const Interval& interval() const noexcept { return interval_; }
    double spacing() const noexcept { return h_; }
    long long size() const noexcept { return size_; }
    double at(long long j) const { return interval_.lo + static_cast<double>(j) * h_; }

    /// Index range [first, last] of grid points inside [a, b]; first > last when none.
    std::pair<long long, long long> index_range(double a, double b) const {
        if (size_ == 0 || b < a) return {0, -1};
        long long first = static_cast<long long>(std::ceil((a - interval_.lo) / h_));
        long long last = static_cast<long long>(std::floor((b - interval_.lo) / h_));
        first = std::max(first, 0LL);
        last = std::min(last, size_ - 1);
        while (first <= last && at(first) < a) ++first;
        while (last >= first && at(last) > b) --last;
        return {first, last};
    }

private:
    Interval interval_;
    double h_;
    long long size_ = 0;
};

enum class Singularity { NS, S };

/// Singularity test for one cube, reusable across many energies.
///
/// With eigenpairs (E_k, v_k) and X the inner index set, Y the inner boundary,
/// max_{x,y} |G(x,y;E)| <= UB(E) = sum_k c_k / |E_k - E|, c_k = max_X |v_k| max_Y |v_k|.
/// UB is convex between consecutive eigenvalues, so the set where UB is below
/// the threshold is a union of intervals located by golden section and bisection.
class SingularityProbe {
public:
    SingularityProbe(const FiniteVolumeOperator& op, double m, double alpha, int N_total)
        : cube_(op.cube()), threshold_(std::exp(-gamma(m, op.cube().L, op.cube().N(), N_total))) {
        const auto sd = eigendecompose(op);
        values_ = sd.values;
        const int r = std::min(op.cube().L, floor_pow(op.cube().L, 1.0 / alpha));
        std::vector<Eigen::Index> xs, ys;
        for (std::size_t i = 0; i < op.dim(); ++i) {
            const auto x = op.point_at(i);
            const int dist = max_dist(x, cube_.center);
            if (dist <= r) xs.push_back(static_cast<Eigen::Index>(i));
            if (dist == cube_.L) ys.push_back(static_cast<Eigen::Index>(i));
        }
        A_ = sd.vectors(xs, Eigen::all);
        B_ = sd.vectors(ys, Eigen::all);
        c_.resize(values_.size());
        for (Eigen::Index k = 0; k < values_.size(); ++k) c_[k] = A_.col(k).cwiseAbs().maxCoeff() * B_.col(k).cwiseAbs().maxCoeff();
    }

    const Cube& cube() const noexcept { return cube_; }
    double threshold() const noexcept { return threshold_; }
    const Eigen::VectorXd& eigenvalues() const noexcept { return values_; }
    Eigen::Index inner_count() const noexcept { return A_.rows(); }

    double distance_to_spectrum(double e) const { return mpal::distance_to_spectrum(values_, e); }

    double upper_bound(double e) const {
        double s = 0.0;
        for (Eigen::Index k = 0; k < values_.size(); ++k) s += c_[k] / std::abs(values_[k] - e);
        return s;
    }

    /// Exact max over the inner index set and inner boundary; +inf within the resonance guard.
    double max_green(double e) const {
        if (distance_to_spectrum(e) <= kResonanceGuard) return std::numeric_limits<double>::infinity();
        const Eigen::VectorXd w = (values_.array() - e).inverse();
        const Eigen::MatrixXd g = A_ * w.asDiagonal() * B_.transpose();
        return g.cwiseAbs().maxCoeff();
    }

    Singularity classify(double e) const { return max_green(e) > threshold_ ? Singularity::S : Singularity::NS; }
    bool singular(double e) const { return classify(e) == Singularity::S; }

    /// Closed intervals covering every E in I that is not certified non-singular.
    std::vector<Interval> uncertain(const Interval& I) const {
        std::vector<Interval> out;
        if (I.empty()) return out;
        const double level = threshold_ * (1.0 - 1e-9);
        const auto n = values_.size();
        // Certified non-singular intervals, ascending.
        std::vector<Interval> ns;
        const double csum = c_.sum();
        const double g = kResonanceGuard * 4.0;
        // Below the spectrum.
        if (I.lo < values_[0] - g) {
            const double far = values_[0] - csum / level - 1.0;
            const double e = rightmost_below(far, values_[0] - g, level);
            if (!std::isnan(e)) ns.push_back({-std::numeric_limits<double>::infinity(), e});
        }
        for (Eigen::Index k = 0; k + 1 < n; ++k) {
            const double a = values_[k] + g, b = values_[k + 1] - g;
            if (!(b > a) || b < I.lo || a > I.hi) continue;
            const auto iv = certified_in_gap(a, b, level);
            if (iv) ns.push_back(*iv);
        }
        if (I.hi > values_[n - 1] + g) {
            const double far = values_[n - 1] + csum / level + 1.0;
            const double e = leftmost_above(values_[n - 1] + g, far, level);
            if (!std::isnan(e)) ns.push_back({e, std::numeric_limits<double>::infinity()});
        }
        // Complement within I; endpoints of certified intervals are kept, which is harmless.
        double cursor = I.lo;
        for (const auto& iv : ns) {
            if (iv.hi < cursor) continue;
            if (iv.lo > I.hi) break;
            if (iv.lo > cursor) out.push_back({cursor, iv.lo});
            cursor = std::max(cursor, iv.hi);
        }
        if (cursor < I.hi) out.push_back({cursor, I.hi});
        return out;
    }

private:
    // Largest certified point in [lo, hi] when UB increases on it; NaN when none.
    double rightmost_below(double lo, double hi, double level) const {
        if (upper_bound(lo) > level) return std::nan("");
        if (upper_bound(hi) <= level) return hi;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
            const double mid = 0.5 * (lo + hi);
            (upper_bound(mid) <= level ? lo : hi) = mid;
        }
        return lo;
    }

    // Smallest certified point in [lo, hi] when UB decreases on it; NaN when none.
    double leftmost_above(double lo, double hi, double level) const {
        if (upper_bound(hi) > level) return std::nan("");
        if (upper_bound(lo) <= level) return lo;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
            const double mid = 0.5 * (lo + hi);
            (upper_bound(mid) <= level ? hi : lo) = mid;
        }
        return hi;
    }

    std::optional<Interval> certified_in_gap(double a, double b, double level) const {
        // Golden-section search for the minimum of the convex UB on [a, b].
        constexpr double invphi = 0.6180339887498949;
        double lo = a, hi = b;
        double x1 = hi - invphi * (hi - lo), x2 = lo + invphi * (hi - lo);
        double f1 = upper_bound(x1), f2 = upper_bound(x2);
        for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
            if (f1 <= level || f2 <= level) break;
            if (f1 < f2) {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - invphi * (hi - lo);
                f1 = upper_bound(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + invphi * (hi - lo);
                f2 = upper_bound(x2);
            }
        }
        double xm;
        if (f1 <= level)
            xm = x1;
        else if (f2 <= level)
            xm = x2;
        else
            return std::nullopt;
        return Interval{leftmost_above(a, xm, level), rightmost_below(xm, b, level)};
    }

    Cube cube_;
    double threshold_;
    Eigen::VectorXd values_;
    Eigen::MatrixXd A_, B_;
    Eigen::VectorXd c_;
};

inline Singularity classify_singular(const FiniteVolumeOperator& op, double e, const ScaleLadder& ladder, int N_total) {
    return SingularityProbe(op, ladder.m, ladder.alpha, N_total).classify(e);
}

enum class Resonance { NR, R };

/// R iff dist(sigma, E) < exp(-L^beta).
inline Resonance classify_resonant(const SpectralData& sd, double e, int L, double beta) {
    return sd.distance_to_spectrum(e) < std::exp(-std::pow(static_cast<double>(L), beta)) ? Resonance::R : Resonance::NR;
}

inline Resonance classify_resonant(const FiniteVolumeOperator& op, double e, double beta) {
    return classify_resonant(eigendecompose(op, false), e, op.cube().L, beta);
}

struct InteractiveClass {
    bool partial = false;  // PI when true, FI otherwise
    std::vector<int> J1, J2;
    int separation = 0;  // witnessing separation (PI) or the best separation found (FI)
};

/// All bipartitions (J1, J2) with particle 0 in J1, ordered lexicographically by J1.
inline std::vector<std::pair<std::vector<int>, std::vector<int>>> bipartitions(int N) {
    std::vector<std::pair<std::vector<int>, std::vector<int>>> out;
    if (N < 2) return out;
    for (std::uint32_t mask = 0; mask + 1 < (1u << (N - 1)); ++mask) {
        std::vector<int> a{0}, b;
        for (int j = 1; j < N; ++j) ((mask >> (j - 1)) & 1u ? a : b).push_back(j);
        out.emplace_back(std::move(a), std::move(b));
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Distance between the single-particle regions of the projections onto J1 and J2.
inline int projection_separation(const Cube& cube, const std::vector<int>& J1, const std::vector<int>& J2) {
    int best = std::numeric_limits<int>::max();
    for (int i : J1)
        for (int j : J2) best = std::min(best, max_dist(cube.center.particle(i), cube.center.particle(j)) - 2 * cube.L);
    return best;
}

/// PI iff some bipartition has projections separated by more than r0.
inline InteractiveClass classify_interactive(const Cube& cube, const ModelSpec& spec) {
    InteractiveClass out;
    out.separation = std::numeric_limits<int>::min();
    for (const auto& [a, b] : bipartitions(cube.N())) {
        const int sep = projection_separation(cube, a, b);
        if (sep > spec.r0) {
            out.partial = true;
            out.J1 = a;
            out.J2 = b;
            out.separation = sep;
            return out;
        }
        out.separation = std::max(out.separation, sep);
    }
    return out;
}

/// Centers of the radius-r cubes contained in `big`, in enumeration order.
inline std::vector<Configuration> subcube_centers(const Cube& big, int r) {
    if (r > big.L) return {};
    return cube_points(Cube(big.center, big.L - r));
}

struct ScanStats {
    long long candidates = 0;   // energies examined exactly
    long long grid_points = 0;  // size of the full grid over I
    double spacing = 0.0;
};

struct ScanOptions {
    long long max_candidates = 5'000'000;
};

/// Walk the energies of `grid` plus the probes' eigenvalues in I at which at
/// least `min_count` probes are possibly singular, in ascending order. For each,
/// `visit(E, singular_indices)` is called with the probes that are exactly
/// singular there; returning true stops the scan.
inline ScanStats scan_singular(const std::vector<const SingularityProbe*>& probes, const EnergyGrid& grid, std::size_t min_count,
                               const std::function<bool(double, const std::vector<std::size_t>&)>& visit,
                               const ScanOptions& opts = {}) {
    ScanStats stats;
    stats.grid_points = grid.size();
    stats.spacing = grid.spacing();
    const Interval I = grid.interval();
    if (I.empty() || probes.size() < min_count || min_count == 0) return stats;

    std::vector<std::vector<Interval>> unc(probes.size());
    struct Event {
        double x;
        int delta;
    };
    std::vector<Event> events;
    for (std::size_t i = 0; i < probes.size(); ++i) {
        unc[i] = probes[i]->uncertain(I);
        for (const auto& iv : unc[i]) {
            events.push_back({iv.lo, +1});
            events.push_back({iv.hi, -1});
        }
    }
    std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
        return a.x < b.x || (a.x == b.x && a.delta > b.delta);
    });
    std::vector<Interval> regions;
    int count = 0;
    double start = 0.0;
    for (const auto& ev : events) {
        const int before = count;
        count += ev.delta;
        if (before < static_cast<int>(min_count) && count >= static_cast<int>(min_count)) start = ev.x;
        if (before >= static_cast<int>(min_count) && count < static_cast<int>(min_count)) regions.push_back({start, ev.x});
    }

    auto possibly = [&](std::size_t i, double e) {
        const auto& v = unc[i];
        auto it = std::upper_bound(v.begin(), v.end(), e, [](double x, const Interval& iv) { return x < iv.lo; });
        return it != v.begin() && std::prev(it)->hi >= e;
    };

    std::vector<double> eig;
    for (const auto* p : probes)
        for (Eigen::Index k = 0; k < p->eigenvalues().size(); ++k)
            if (I.contains(p->eigenvalues()[k])) eig.push_back(p->eigenvalues()[k]);
    std::sort(eig.begin(), eig.end());

    std::vector<double> cand;
    std::vector<std::size_t> active, sing;
    for (const auto& reg : regions) {
        cand.clear();
        const auto [first, last] = grid.index_range(reg.lo, reg.hi);
        if (last >= first) {
            if (stats.candidates + (last - first + 1) > opts.max_candidates)
                throw DomainError("energy scan: more than " + std::to_string(opts.max_candidates) +
                                  " candidate energies; coarsen the grid or lower m");
            for (long long j = first; j <= last; ++j) cand.push_back(grid.at(j));
        }
        for (auto it = std::lower_bound(eig.begin(), eig.end(), reg.lo); it != eig.end() && *it <= reg.hi; ++it)
            cand.push_back(*it);
        std::sort(cand.begin(), cand.end());
        cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
        for (double e : cand) {
            ++stats.candidates;
            active.clear();
            for (std::size_t i = 0; i < probes.size(); ++i)
                if (possibly(i, e)) active.push_back(i);
            if (active.size() < min_count) continue;
            sing.clear();
            std::size_t remaining = active.size();
            for (std::size_t i : active) {
                --remaining;
                if (probes[i]->singular(e)) sing.push_back(i);
                if (sing.size() + remaining < min_count) break;
            }
            if (sing.size() < min_count) continue;
            if (visit(e, sing)) return stats;
        }
    }
    return stats;
}

struct CommonSingularity {
    bool found = false;
    double energy = std::numeric_limits<double>::quiet_NaN();
    ScanStats stats;
};

/// Smallest grid energy (or eigenvalue) in I at which both cubes are (E,m)-S.
inline CommonSingularity find_common_singular_energy(const SingularityProbe& a, const SingularityProbe& b, const EnergyGrid& grid,
                                                     const ScanOptions& opts = {}) {
    CommonSingularity out;
    out.stats = scan_singular(
        {&a, &b}, grid, 2,
        [&](double e, const std::vector<std::size_t>&) {
            out.found = true;
            out.energy = e;
            return true;
        },
        opts);
    return out;
}

/// Largest subset of `items` that is pairwise compatible. Exhaustive for at
/// most 12 items, greedy in the given order otherwise.
inline std::vector<std::size_t> max_compatible_set(const std::vector<std::size_t>& items,
                                                   const std::function<bool(std::size_t, std::size_t)>& compatible) {
    const std::size_t n = items.size();
    if (n <= 12) {
        std::uint32_t best = 0;
        int best_count = 0;
        for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
            const int c = std::popcount(mask);
            if (c <= best_count) continue;
            bool ok = true;
            for (std::size_t i = 0; i < n && ok; ++i)
                if (mask >> i & 1u)
                    for (std::size_t j = i + 1; j < n && ok; ++j)
                        if (mask >> j & 1u) ok = compatible(items[i], items[j]);
            if (ok) {
                best = mask;
                best_count = c;
            }
        }
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < n; ++i)
            if (best >> i & 1u) out.push_back(items[i]);
        return out;
    }
    std::vector<std::size_t> out;
    for (std::size_t it : items) {
        bool ok = true;
        for (std::size_t o : out) ok = ok && compatible(o, it);
        if (ok) out.push_back(it);
    }
    return out;
}

/// Probes for all radius-r sub-cubes of `big` (optionally filtered), sharing one field.
inline std::vector<SingularityProbe> subcube_probes(const Cube& big, int r, const std::shared_ptr<const FieldSample>& field,
                                                    const ModelSpec& spec, const ScaleLadder& ladder,
                                                    const std::function<bool(const Cube&)>& keep = {}) {
    std::vector<SingularityProbe> out;
    for (auto& c : subcube_centers(big, r)) {
        const Cube sub(std::move(c), r);
        if (keep && !keep(sub)) continue;
        out.emplace_back(assemble(sub, field, spec), ladder.m, ladder.alpha, spec.N);
    }
    return out;
}

struct TunnelingResult {
    bool tunneling = false;
    double energy = std::numeric_limits<double>::quiet_NaN();
    Configuration v1, v2;
    ScanStats stats;
};

/// (m,I)-tunneling at scale k >= 1: some E in the grid with two radius-L_{k-1}
/// sub-cubes, pairwise 2 N L_{k-1}-distant, both (E,m)-S.
inline TunnelingResult is_tunneling(const Cube& cube, const std::shared_ptr<const FieldSample>& field, const ModelSpec& spec,
                                    const ScaleLadder& ladder, int k, const ScanOptions& opts = {}) {
    if (k < 1) throw DomainError("is_tunneling: k must be >= 1");
    TunnelingResult out;
    const int r = ladder.L(k - 1);
    const EnergyGrid grid(ladder.I, ladder.spacing(r, spec.N));
    out.stats.grid_points = grid.size();
    out.stats.spacing = grid.spacing();
    if (ladder.I.empty()) return out;
    const double sep = 2.0 * spec.N * r;
    const auto centers = subcube_centers(cube, r);
    // Geometric feasibility first: some pair must be far enough apart.
    bool feasible = false;
    for (std::size_t i = 0; i < centers.size() && !feasible; ++i)
        for (std::size_t j = i + 1; j < centers.size() && !feasible; ++j) feasible = are_distant(centers[i], centers[j], sep);
    if (!feasible) return out;

    const auto probes = subcube_probes(cube, r, field, spec, ladder);
    std::vector<const SingularityProbe*> ptrs;
    for (const auto& p : probes) ptrs.push_back(&p);
    out.stats = scan_singular(
        ptrs, grid, 2,
        [&](double e, const std::vector<std::size_t>& sing) {
            for (std::size_t i = 0; i < sing.size(); ++i)
                for (std::size_t j = i + 1; j < sing.size(); ++j)
                    if (are_distant(probes[sing[i]].cube().center, probes[sing[j]].cube().center, sep)) {
                        out.tunneling = true;
                        out.energy = e;
                        out.v1 = probes[sing[i]].cube().center;
                        out.v2 = probes[sing[j]].cube().center;
                        return true;
                    }
            return false;
        },
        opts);
    return out;
}

struct PartialTunnelingResult {
    bool partially_tunneling = false;
    std::vector<int> J1, J2;
    TunnelingResult witness;
};

/// (m,I)-PT: for some bipartition, one of the factor cubes (same radius L_k)
/// is (m,I)-T at scale k.
inline PartialTunnelingResult is_partially_tunneling(const Cube& cube, const std::shared_ptr<const FieldSample>& field,
                                                     const ModelSpec& spec, const ScaleLadder& ladder, int k,
                                                     const ScanOptions& opts = {}) {
    PartialTunnelingResult out;
    for (const auto& [a, b] : bipartitions(cube.N())) {
        for (const auto* J : {&a, &b}) {
            const Cube factor = projection(cube, *J);
            auto t = is_tunneling(factor, field, spec, ladder, k, opts);
            if (t.tunneling) {
                out.partially_tunneling = true;
                out.J1 = a;
                out.J2 = b;
                out.witness = std::move(t);
                return out;
            }
        }
    }
    return out;
}

enum class InteractiveFilter { PI, FI };

struct KCount {
    int count = 0;
    double energy = std::numeric_limits<double>::quiet_NaN();
    std::vector<Configuration> centers;
    ScanStats stats;
};

/// K^PI / K^FI: the largest number, over grid energies in I, of radius-L_k cubes
/// of the given class inside `big`, pairwise 2 N L_k-distant and all (E,m)-S.
/// With `stop_at` > 0 the scan ends as soon as that count is reached.
inline KCount count_K(const Cube& big, const std::shared_ptr<const FieldSample>& field, const ModelSpec& spec,
                      const ScaleLadder& ladder, int k, InteractiveFilter cls, int stop_at = 0, const ScanOptions& opts = {}) {
    KCount out;
    const int r = ladder.L(k);
    const EnergyGrid grid(ladder.I, ladder.spacing(r, spec.N));
    out.stats.grid_points = grid.size();
    out.stats.spacing = grid.spacing();
    if (ladder.I.empty()) return out;
    const auto probes = subcube_probes(big, r, field, spec, ladder, [&](const Cube& c) {
        return classify_interactive(c, spec).partial == (cls == InteractiveFilter::PI);
    });
    std::vector<const SingularityProbe*> ptrs;
    for (const auto& p : probes) ptrs.push_back(&p);
    const double sep = 2.0 * spec.N * r;
    out.stats = scan_singular(
        ptrs, grid, 1,
        [&](double e, const std::vector<std::size_t>& sing) {
            if (static_cast<int>(sing.size()) <= out.count) return false;
            const auto best = max_compatible_set(
                sing, [&](std::size_t i, std::size_t j) { return are_distant(probes[i].cube().center, probes[j].cube().center, sep); });
            if (static_cast<int>(best.size()) > out.count) {
                out.count = static_cast<int>(best.size());
                out.energy = e;
                out.centers.clear();
                for (std::size_t i : best) out.centers.push_back(probes[i].cube().center);
            }
            return stop_at > 0 && out.count >= stop_at;
        },
        opts);
    return out;
}

/// Verdict on one cube at one energy, with the parameters that produced it.
struct CubeVerdict {
    Cube cube;
    double E = 0.0;
    bool singular = false;
    bool resonant = false;
    InteractiveClass interactive;
    std::optional<bool> tunneling;
    std::uint64_t seed = 0;
    double max_green = 0.0;
    double threshold = 0.0;
};

inline CubeVerdict make_verdict(const FiniteVolumeOperator& op, double e, const ScaleLadder& ladder, std::uint64_t seed) {
    const SingularityProbe probe(op, ladder.m, ladder.alpha, op.spec().N);
    CubeVerdict v;
    v.cube = op.cube();
    v.E = e;
    v.max_green = probe.max_green(e);
    v.threshold = probe.threshold();
    v.singular = v.max_green > v.threshold;
    SpectralData sd;
    sd.values = probe.eigenvalues();
    v.resonant = classify_resonant(sd, e, op.cube().L, ladder.beta) == Resonance::R;
    v.interactive = classify_interactive(op.cube(), op.spec());
    v.seed = seed;
    return v;
}

inline nlohmann::json ladder_json(const ScaleLadder& l) {
    return {{"L0", l.L0},       {"alpha", l.alpha}, {"m", l.m},         {"p", l.p},
            {"I", {l.I.lo, l.I.hi}}, {"k_max", l.k_max}, {"beta", l.beta}, {"grid_spacing", l.grid_spacing},
            {"s", l.s},         {"scales", l.scales()}};
}

/// One JSON-lines record.
inline nlohmann::json verdict_json(const CubeVerdict& v, const ScaleLadder& ladder, double grid_spacing) {
    nlohmann::json j;
    j["center"] = v.cube.center.coords;
    j["N"] = v.cube.N();
    j["d"] = v.cube.d();
    j["L"] = v.cube.L;
    j["E"] = v.E;
    j["singular"] = v.singular;
    j["resonant"] = v.resonant;
    j["max_green"] = std::isfinite(v.max_green) ? nlohmann::json(v.max_green) : nlohmann::json("inf");
    j["threshold"] = v.threshold;
    j["interactive"] = v.interactive.partial ? nlohmann::json{{"class", "PI"}, {"J1", v.interactive.J1}, {"J2", v.interactive.J2}}
                                             : nlohmann::json{{"class", "FI"}};
    if (v.tunneling) j["tunneling"] = *v.tunneling;
    j["seed"] = v.seed;
    j["grid_spacing"] = grid_spacing;
    j["ladder"] = ladder_json(ladder);
    return j;
}

} // namespace mpal
