#pragma once

// Discrete subharmonicity and the radial-descent bound, with an instrumented
// reconstruction of the descent sequence.
//
// Points of Z^n are stored as one-particle configurations (N = 1, d = n);
// functions on a cube are tables aligned with its enumeration order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "mpal/errors.hpp"
#include "mpal/lattice.hpp"
#include "mpal/rng.hpp"

namespace mpal {

struct SubharmonicSpec {
    int ell = 1;
    double q = 0.5;
    std::vector<Configuration> S;  // exceptional set
    double c = 1.0;
    Cube domain;

    int c_ell() const { return static_cast<int>(std::floor(c * ell + 1e-9)); }
    int outer_reach() const { return static_cast<int>(std::floor((1.0 + c) * ell + 1e-9)); }

    void validate() const {
        if (ell < 1) throw DomainError("subharmonic spec: ell must be >= 1");
        if (!(q > 0.0 && q <= 1.0)) throw DomainError("subharmonic spec: q must lie in (0, 1]");
        if (!(c >= 1.0)) throw DomainError("subharmonic spec: c must be >= 1");
        for (const auto& s : S)
            if (!domain.contains(s)) throw DomainError("subharmonic spec: exceptional point " + to_string(s) + " outside the domain");
    }

    bool exceptional(const Configuration& x) const { return std::find(S.begin(), S.end(), x) != S.end(); }
};

/// Table of f over the domain in enumeration order.
using PointTable = std::vector<double>;

template <class Fn>
PointTable tabulate(const Cube& domain, Fn&& fn) {
    PointTable out;
    for (const auto& x : cube_points(domain)) out.push_back(static_cast<double>(fn(x)));
    return out;
}

struct SubharmonicCheck {
    bool ok = true;
    std::optional<Configuration> violation;
    double value = 0.0;  // |f| at the violating point
    double bound = 0.0;  // q times the relevant max there
};

namespace detail {

inline void require_table(const PointTable& f, const Cube& domain) {
    if (f.size() != domain.cardinality()) throw DomainError("function table does not cover the domain");
    for (double v : f)
        if (std::isnan(v)) throw DomainError("function undefined (NaN) on part of the domain");
}

/// Indices of domain points y with lo <= ||y - x|| <= hi.
inline std::vector<std::size_t> shell_indices(const CubeIndexer& idx, const Configuration& x, int lo, int hi) {
    std::vector<std::size_t> out;
    for (const auto& y : cube_points(Cube(x, hi))) {
        const int r = max_dist(x, y);
        if (r < lo) continue;
        const auto i = idx.index_of(y);
        if (i >= 0) out.push_back(static_cast<std::size_t>(i));
    }
    return out;
}

/// Constraint set of x, or nullopt when no clause applies.
inline std::optional<std::vector<std::size_t>> constraint_set(const SubharmonicSpec& spec, const CubeIndexer& idx,
                                                              const Configuration& x) {
    if (spec.exceptional(x)) return shell_indices(idx, x, spec.ell, spec.outer_reach());
    if (!spec.domain.contains(Cube(x, spec.ell))) return std::nullopt;
    return shell_indices(idx, x, spec.ell, spec.ell);
}

} // namespace detail

/// Checks both clauses and reports the first violation in enumeration order.
inline SubharmonicCheck check_subharmonic(const PointTable& f, const SubharmonicSpec& spec) {
    spec.validate();
    detail::require_table(f, spec.domain);
    const CubeIndexer idx(spec.domain);
    SubharmonicCheck out;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto x = idx.point_at(i);
        const auto set = detail::constraint_set(spec, idx, x);
        if (!set) continue;
        double m = 0.0;
        for (auto j : *set) m = std::max(m, std::abs(f[j]));
        if (std::abs(f[i]) > spec.q * m) {
            out.ok = false;
            out.violation = x;
            out.value = std::abs(f[i]);
            out.bound = spec.q * m;
            return out;
        }
    }
    return out;
}

struct AnnulusCover {
    std::vector<Annulus> annuli;
    int total_width = 0;
};

/// Radial cover of the c*ell-neighbourhood of S around `center`: the radii
/// reached by the neighbourhood are grouped into maximal runs, one annulus per
/// run. Radii above `max_radius` are dropped.
inline AnnulusCover cover_neighborhood(const std::vector<Configuration>& S, double c, int ell, const Configuration& center,
                                       int max_radius = std::numeric_limits<int>::max()) {
    AnnulusCover out;
    const int pad = static_cast<int>(std::floor(c * ell + 1e-9));
    std::set<int> radii;
    for (const auto& s : S) {
        const int rho = max_dist(s, center);
        const int lo = std::max(0, rho - pad);
        const int hi = std::min(max_radius, rho + pad);
        for (int r = lo; r <= hi; ++r) radii.insert(r);
    }
    auto it = radii.begin();
    while (it != radii.end()) {
        const int first = *it;
        int last = first;
        ++it;
        while (it != radii.end() && *it == last + 1) last = *it++;
        out.annuli.emplace_back(center, first - 1, last);
        out.total_width += last - first + 1;
    }
    return out;
}

/// Whether every domain point within c*ell of S lies in some annulus.
inline bool cover_is_valid(const AnnulusCover& cover, const SubharmonicSpec& spec) {
    int w = 0;
    for (const auto& a : cover.annuli) w += a.width();
    if (w != cover.total_width) return false;
    const int pad = spec.c_ell();
    for (const auto& x : cube_points(spec.domain)) {
        bool near = false;
        for (const auto& s : spec.S) near = near || max_dist(x, s) <= pad;
        if (!near) continue;
        bool covered = false;
        for (const auto& a : cover.annuli) covered = covered || a.contains(x);
        if (!covered) return false;
    }
    return true;
}

/// Admissible radii: W + ell <= r <= L - W + ell, plus r = 0 (the bound at the centre).
inline bool descent_admissible(int L, int r, int ell, int W) { return r == 0 || (r >= W + ell && r <= L - W + ell && r <= L); }

/// q^{floor((L - r - W)/ell) - 1}.
inline double descent_bound(int L, int r, int ell, double q, int W) {
    if (ell < 1) throw DomainError("descent_bound: ell must be >= 1");
    if (!(q > 0.0 && q <= 1.0)) throw DomainError("descent_bound: q must lie in (0, 1]");
    if (!descent_admissible(L, r, ell, W))
        throw DomainError("descent_bound: r = " + std::to_string(r) + " outside the admissible range [" + std::to_string(W + ell) +
                          ", " + std::to_string(L - W + ell) + "]");
    const int num = L - r - W;
    const int e = (num >= 0 ? num / ell : -((-num + ell - 1) / ell)) - 1;
    return std::pow(q, e);
}

struct DescentReport {
    bool holds = false;       // both checks below
    bool steps_ok = false;    // M' >= (L - r - W)/ell - 1
    bool bound_ok = false;    // max_{C_r}|f| <= q^{M'} max_{C_L}|f| and <= closed-form factor * max
    int L = 0, r = 0, ell = 0;
    int M_prime = 0;
    std::vector<int> sequence;                 // r_0 = L, r_1, ..., r_{M'}
    std::vector<std::pair<int, int>> gaps;     // nonempty J_n = [r_n + 1, r_{n-1} - ell] of skipped radii
    int skipped = 0;                           // total length of the gaps
    int W_S2 = 0;                              // number of radii of S'' in [0, L]
    int W_A = 0;
    double max_inner = 0.0, max_all = 0.0;
    double factor = 1.0;        // q^{M'}
    double closed_form_factor = 1.0;  // q^{floor((L-r-W_A)/ell) - 1}
    double slack = 0.0;         // closed_form_factor * max_all - max_inner

    nlohmann::json to_json() const {
        return {{"holds", holds},   {"steps_ok", steps_ok}, {"bound_ok", bound_ok}, {"L", L},         {"r", r},
                {"ell", ell},       {"M_prime", M_prime},   {"sequence", sequence}, {"gaps", gaps},   {"W_S2", W_S2},
                {"W_A", W_A},       {"max_inner", max_inner}, {"max_all", max_all}, {"factor", factor},
                {"closed_form_factor", closed_form_factor}, {"slack", slack}};
    }
};

/// Rebuilds the descent objects (S'', admissible radii, r_n, J_n, M') and checks the bound.
inline DescentReport verify_descent(const PointTable& f, const SubharmonicSpec& spec, const AnnulusCover& cover, int r) {
    spec.validate();
    detail::require_table(f, spec.domain);
    if (!check_subharmonic(f, spec).ok) throw DomainError("verify_descent: function is not subharmonic");
    if (!cover_is_valid(cover, spec)) throw DomainError("verify_descent: cover does not cover the neighbourhood of S");
    const int L = spec.domain.L;
    if (!descent_admissible(L, r, spec.ell, cover.total_width)) throw DomainError("verify_descent: r outside the admissible range");

    DescentReport rep;
    rep.L = L;
    rep.r = r;
    rep.ell = spec.ell;
    rep.W_A = cover.total_width;

    // S'': spheres rho .. rho + c*ell for every radius rho met by S.
    std::vector<bool> in_s2(static_cast<std::size_t>(L) + 1, false);
    for (const auto& s : spec.S) {
        const int rho = max_dist(s, spec.domain.center);
        for (int j = 0; j <= spec.c_ell() && rho + j <= L; ++j) in_s2[static_cast<std::size_t>(rho + j)] = true;
    }
    rep.W_S2 = static_cast<int>(std::count(in_s2.begin(), in_s2.end(), true));

    // r_n = max{r' admissible : r' <= r_{n-1} - ell}, stopping once r_{n} < r or none exists.
    rep.sequence.push_back(L);
    while (true) {
        int cand = rep.sequence.back() - spec.ell;
        const int top = cand;
        while (cand >= 0 && in_s2[static_cast<std::size_t>(cand)]) --cand;
        if (cand < 0 || cand < r) break;
        if (cand < top) {
            rep.gaps.emplace_back(cand + 1, top);
            rep.skipped += top - cand;
        }
        rep.sequence.push_back(cand);
    }
    rep.M_prime = static_cast<int>(rep.sequence.size()) - 1;

    const CubeIndexer idx(spec.domain);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const double v = std::abs(f[i]);
        rep.max_all = std::max(rep.max_all, v);
        if (max_dist(idx.point_at(i), spec.domain.center) <= r) rep.max_inner = std::max(rep.max_inner, v);
    }
    rep.factor = std::pow(spec.q, rep.M_prime);
    rep.closed_form_factor = descent_bound(L, r, spec.ell, spec.q, rep.W_A);
    rep.steps_ok = static_cast<double>(rep.M_prime) >= static_cast<double>(L - r - rep.W_A) / spec.ell - 1.0 &&
                   rep.W_S2 <= rep.W_A && rep.skipped <= rep.W_S2;
    const double tol = 1e-12 * rep.max_all;
    rep.bound_ok = rep.max_inner <= rep.factor * rep.max_all + tol && rep.max_inner <= rep.closed_form_factor * rep.max_all + tol;
    rep.slack = rep.closed_form_factor * rep.max_all - rep.max_inner;
    rep.holds = rep.steps_ok && rep.bound_ok;
    return rep;
}

/// Random (ell, q, S, c)-subharmonic function: unconstrained points get values
/// in [0.5, 1]; the rest are filled from the outside in with
/// q * u * (max of the already assigned values in the constraint set), u in (0, 1].
inline PointTable random_subharmonic(const SubharmonicSpec& spec, rng::PhiloxStream& g) {
    spec.validate();
    const CubeIndexer idx(spec.domain);
    const std::size_t n = idx.size();
    PointTable f(n, 0.0);
    std::vector<bool> assigned(n, false);
    std::vector<std::optional<std::vector<std::size_t>>> sets(n);
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < n; ++i) {
        sets[i] = detail::constraint_set(spec, idx, idx.point_at(i));
        if (!sets[i]) {
            f[i] = 0.5 + 0.5 * g.uniform();
            assigned[i] = true;
        } else {
            order.push_back(i);
        }
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return max_dist(idx.point_at(a), spec.domain.center) > max_dist(idx.point_at(b), spec.domain.center);
    });
    for (std::size_t i : order) {
        double m = 0.0;
        for (auto j : *sets[i])
            if (assigned[j]) m = std::max(m, f[j]);
        f[i] = spec.q * g.uniform_open_closed() * m;
        assigned[i] = true;
    }
    return f;
}

struct DescentInstance {
    SubharmonicSpec spec;
    PointTable f;
    AnnulusCover cover;
    int r = 0;
};

/// One random instance: dimension 1 or 2, random ell, q, c, exceptional set and target radius.
inline DescentInstance random_descent_instance(std::uint64_t seed) {
    rng::PhiloxStream g(seed);
    DescentInstance inst;
    auto& spec = inst.spec;
    const int n = 1 + static_cast<int>(g.below(2));
    spec.ell = 1 + static_cast<int>(g.below(3));
    spec.q = 0.2 + 0.8 * g.uniform_open_closed();
    spec.c = 1.0 + g.uniform();
    const int L = n == 1 ? 12 + static_cast<int>(g.below(25)) : 6 + static_cast<int>(g.below(7));
    spec.domain = Cube(Configuration::origin(1, n), L);
    const int ns = static_cast<int>(g.below(4));
    for (int i = 0; i < ns; ++i) {
        std::vector<int> p(static_cast<std::size_t>(n));
        for (auto& v : p) v = static_cast<int>(g.below(static_cast<std::uint64_t>(2 * L + 1))) - L;
        Configuration x(1, n, p);
        if (!spec.exceptional(x)) spec.S.push_back(std::move(x));
    }
    inst.cover = cover_neighborhood(spec.S, spec.c, spec.ell, spec.domain.center, L);
    inst.f = random_subharmonic(spec, g);
    if (g.below(2) == 1) {
        // random signs: the checks only see |f|
        for (auto& v : inst.f)
            if (g.below(2) == 1) v = -v;
    }
    const int W = inst.cover.total_width;
    const int lo = W + spec.ell, hi = std::min(L, L - W + spec.ell);
    inst.r = lo <= hi ? lo + static_cast<int>(g.below(static_cast<std::uint64_t>(hi - lo + 1))) : 0;
    return inst;
}

inline nlohmann::json instance_json(const DescentInstance& inst) {
    nlohmann::json S = nlohmann::json::array();
    for (const auto& s : inst.spec.S) S.push_back(s.coords);
    nlohmann::json annuli = nlohmann::json::array();
    for (const auto& a : inst.cover.annuli) annuli.push_back({{"a", a.a}, {"b", a.b}});
    return {{"ell", inst.spec.ell},
            {"q", inst.spec.q},
            {"c", inst.spec.c},
            {"n", inst.spec.domain.d()},
            {"L", inst.spec.domain.L},
            {"S", S},
            {"cover", annuli},
            {"total_width", inst.cover.total_width},
            {"r", inst.r},
            {"f", inst.f}};
}

} // namespace mpal
