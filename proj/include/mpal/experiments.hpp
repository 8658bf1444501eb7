#pragma once

// Monte-Carlo harness. Every experiment maps (config, master seed) to a fixed
// set of records, curves and a summary; trials are keyed by per-trial seeds and
// folded in trial order, so the worker count never changes the output.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

#include "json.hpp"

#include "mpal/errors.hpp"
#include "mpal/hamiltonian.hpp"
#include "mpal/io.hpp"
#include "mpal/lattice.hpp"
#include "mpal/msa.hpp"
#include "mpal/parallel.hpp"
#include "mpal/radial_descent.hpp"
#include "mpal/random_field.hpp"
#include "mpal/rng.hpp"
#include "mpal/spectral.hpp"
#include "mpal/stats.hpp"
#include "mpal/version.hpp"

namespace mpal {

/// Every key understood by the experiment configs.
inline const std::vector<std::string>& known_config_keys() {
    static const std::vector<std::string> keys = {
        // model
        "N", "d", "g", "disorder", "disorder.mean", "disorder.variance", "disorder.lo", "disorder.hi", "U2", "r0", "pair_norm",
        "hopping",
        // ladder
        "L0", "alpha", "m", "p", "I", "k_max", "beta", "grid_spacing", "s",
        // run
        "trials", "seed", "workers", "out",
        // experiments
        "wegner.L1", "wegner.L2", "wegner.separation", "wegner.s_min", "wegner.s_max", "wegner.s_points", "ds.k", "ds.n",
        "ds.g_list", "ds.separation", "events.k", "trace.L_list", "trace.kappa", "trace.C", "decay.L", "decay.floor",
        "decay.center_radii", "decay.bootstrap", "dyn.L_list", "dyn.s", "dyn.eta", "dyn.eta_interval", "dyn.K",
        "dyn.boundary_tol", "cm.q_sizes", "cm.draws", "cm.sites", "descent.instances", "gri.instances"};
    return keys;
}

struct ExperimentConfig {
    ModelSpec spec;
    ScaleLadder ladder;
    std::size_t trials = 1000;
    std::uint64_t master_seed = 1;
    unsigned workers = 1;
    Config raw;

    static ExperimentConfig from_config(const Config& c) {
        const auto unknown = c.unknown_keys(known_config_keys());
        if (!unknown.empty()) throw ConfigError("unknown config key '" + unknown.front() + "'");
        ExperimentConfig e;
        e.raw = c;
        auto& s = e.spec;
        s.N = static_cast<int>(c.get_int("N", 2));
        s.d = static_cast<int>(c.get_int("d", 1));
        s.g = c.get_double("g", 1.0);
        const std::string dis = c.get_string("disorder", "gaussian");
        if (dis == "gaussian")
            s.distribution = FieldDistribution::gaussian(c.get_double("disorder.mean", 0.0), c.get_double("disorder.variance", 1.0));
        else if (dis == "uniform")
            s.distribution = FieldDistribution::uniform(c.get_double("disorder.lo", 0.0), c.get_double("disorder.hi", 1.0));
        else
            throw ConfigError("disorder must be gaussian or uniform, got '" + dis + "'");
        s.U2 = c.get_list("U2", {});
        s.r0 = static_cast<int>(c.get_int("r0", s.U2.empty() ? 0 : static_cast<long long>(s.U2.size()) - 1));
        const std::string pn = c.get_string("pair_norm", "max");
        if (pn == "max")
            s.pair_norm = PairNorm::max_norm;
        else if (pn == "l1")
            s.pair_norm = PairNorm::l1_norm;
        else
            throw ConfigError("pair_norm must be max or l1, got '" + pn + "'");
        s.hopping = c.get_bool("hopping", true);
        if (s.N > 8) throw ConfigError("N must be <= 8");
        try {
            s.validate();
        } catch (const DomainError& err) {
            throw ConfigError(err.what());
        }

        auto& l = e.ladder;
        l.L0 = static_cast<int>(c.get_int("L0", l.L0));
        l.alpha = c.get_double("alpha", l.alpha);
        l.m = c.get_double("m", l.m);
        l.p = c.get_double("p", l.p);
        const auto I = c.get_list("I", {l.I.lo, l.I.hi});
        if (I.size() != 2) throw ConfigError("I must be given as lo,hi");
        l.I = {I[0], I[1]};
        l.k_max = static_cast<int>(c.get_int("k_max", l.k_max));
        l.beta = c.get_double("beta", l.beta);
        l.grid_spacing = c.get_double("grid_spacing", l.grid_spacing);
        l.s = c.get_double("s", l.s);
        l.validate();

        const auto trials = c.get_int("trials", 1000);
        if (trials < 1) throw ConfigError("trials must be >= 1");
        e.trials = static_cast<std::size_t>(trials);
        e.master_seed = c.get_u64("seed", 1);
        const auto w = c.get_int("workers", 1);
        if (w < 1) throw ConfigError("workers must be >= 1");
        e.workers = static_cast<unsigned>(w);
        return e;
    }

    /// Configuration echo that determines the output (no worker count or output path).
    Config echo() const {
        Config c = raw;
        c.erase("workers");
        c.erase("out");
        return c;
    }
};

struct ExperimentOutput {
    std::string name;
    std::map<std::string, EmpiricalCurve> curves;
    std::vector<nlohmann::json> records;
    nlohmann::json summary = nlohmann::json::object();
    std::vector<std::string> failures;  // violated invariants

    bool ok() const { return failures.empty(); }
};

namespace detail {

inline std::shared_ptr<const FieldSample> field_for(const std::vector<Cube>& cubes, const ModelSpec& spec, std::uint64_t seed) {
    return std::make_shared<const FieldSample>(sample_field_for(cubes, spec.distribution, seed));
}

inline void require_feasible(const Cube& c) {
    if (c.cardinality() > kDenseCap)
        throw GeometryError("cube of radius " + std::to_string(c.L) + " has dimension " + std::to_string(c.cardinality()) +
                            ", above the dense limit " + std::to_string(kDenseCap));
}

inline nlohmann::json num(double v) {
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

/// Mean with a normal-approximation 95% interval.
inline stats::Interval mean_ci(const std::vector<double>& v) {
    const double m = stats::mean(v);
    const double h = v.size() > 1 ? 1.959963984540054 * stats::stddev(v) / std::sqrt(static_cast<double>(v.size())) : 0.0;
    return {m - h, m + h};
}

inline void push_binomial(EmpiricalCurve& c, double x, std::uint64_t k, std::uint64_t n, double bound) {
    const auto ci = stats::clopper_pearson(k, n);
    c.push(x, static_cast<double>(k) / static_cast<double>(n), ci.lo, ci.hi, bound, k, n);
}

inline void push_mean(EmpiricalCurve& c, double x, const std::vector<double>& v, double bound, std::uint64_t hits = 0) {
    const auto ci = mean_ci(v);
    c.push(x, stats::mean(v), ci.lo, ci.hi, bound, hits, v.size());
}

} // namespace detail

// ---------------------------------------------------------------- Wegner

struct WegnerParams {
    int L1 = 2, L2 = 2;
    int separation = 0;  // d_S between the centres; 0 picks 2NL + 1
    double s_min = 1e-3, s_max = 1.0;
    int s_points = 20;

    static WegnerParams from_config(const Config& c) {
        WegnerParams p;
        p.L1 = static_cast<int>(c.get_int("wegner.L1", p.L1));
        p.L2 = static_cast<int>(c.get_int("wegner.L2", p.L2));
        p.separation = static_cast<int>(c.get_int("wegner.separation", 0));
        p.s_min = c.get_double("wegner.s_min", p.s_min);
        p.s_max = c.get_double("wegner.s_max", p.s_max);
        p.s_points = static_cast<int>(c.get_int("wegner.s_points", p.s_points));
        if (p.L1 < 0 || p.L2 < 0) throw ConfigError("wegner: radii must be >= 0");
        if (!(p.s_min > 0 && p.s_max >= p.s_min) || p.s_points < 1) throw ConfigError("wegner: need 0 < s_min <= s_max, s_points >= 1");
        return p;
    }

    std::vector<double> s_grid() const {
        std::vector<double> out;
        for (int i = 0; i < s_points; ++i)
            out.push_back(s_points == 1 ? s_min : s_min * std::pow(s_max / s_min, static_cast<double>(i) / (s_points - 1)));
        return out;
    }
};

/// |C'| |C''| nu_L(2s / |g|): the modulus of g V is that of V at 1/|g| times the argument.
inline double wegner_bound(const ModelSpec& spec, int L, std::size_t n1, std::size_t n2, double s) {
    if (!spec.distribution.modulus || spec.g == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(n1) * static_cast<double>(n2) * spec.distribution.modulus(L, spec.d, 2.0 * s / std::abs(spec.g));
}

inline ExperimentOutput wegner_experiment(const ExperimentConfig& cfg, const WegnerParams& p) {
    const auto& spec = cfg.spec;
    const int L = std::max(p.L1, p.L2);
    const int sep = p.separation > 0 ? p.separation : 2 * spec.N * L + 1;
    const Cube c1(Configuration::origin(spec.N, spec.d), p.L1);
    const Cube c2(Configuration::filled(spec.N, spec.d, sep), p.L2);
    if (!(sym_dist(c1.center, c2.center) > 2 * spec.N * L))
        throw GeometryError("wegner: centres must satisfy d_S > 2NL = " + std::to_string(2 * spec.N * L));
    detail::require_feasible(c1);
    detail::require_feasible(c2);

    struct Trial {
        std::uint64_t seed = 0;
        double dist = 0.0;
    };
    const auto trials = run_trials(cfg.trials, cfg.workers, [&](std::size_t t) {
        const auto seed = rng::trial_seed(cfg.master_seed, t);
        const auto f = detail::field_for({c1, c2}, spec, seed);
        const auto a = eigendecompose(assemble(c1, f, spec), false);
        const auto b = eigendecompose(assemble(c2, f, spec), false);
        return Trial{seed, spectral_distance(a, b)};
    });

    ExperimentOutput out;
    out.name = "wegner";
    for (std::size_t t = 0; t < trials.size(); ++t)
        out.records.push_back({{"trial", t}, {"seed", trials[t].seed}, {"dist", trials[t].dist}});

    EmpiricalCurve curve;
    nlohmann::json dominance = nlohmann::json::array();
    bool all_ok = true;
    for (double s : p.s_grid()) {
        std::uint64_t k = 0;
        for (const auto& tr : trials) k += tr.dist <= s;
        const double b = wegner_bound(spec, L, c1.cardinality(), c2.cardinality(), s);
        detail::push_binomial(curve, s, k, trials.size(), b);
        const bool ok = !(curve.ci_hi.back() > b);
        dominance.push_back(ok);
        if (!ok) {
            all_ok = false;
            std::vector<std::uint64_t> seeds;
            for (const auto& tr : trials)
                if (tr.dist <= s && seeds.size() < 50) seeds.push_back(tr.seed);
            out.failures.push_back("wegner: upper CI above the bound at s = " + io::format_double(s));
            out.summary["offending_seeds"][io::format_double(s)] = seeds;
        }
    }
    out.curves["wegner"] = std::move(curve);
    out.summary["L1"] = p.L1;
    out.summary["L2"] = p.L2;
    out.summary["separation"] = sep;
    out.summary["dominance"] = dominance;
    out.summary["dominance_all"] = all_ok;
    return out;
}

// ---------------------------------------------------------------- DS(k, n)

struct DsParams {
    int k = 0;
    int n = 0;  // 0 picks N
    std::vector<double> g_list{1, 2, 4, 8, 16};
    int separation = 0;  // 0 picks 2 n L_k + 1

    static DsParams from_config(const Config& c) {
        DsParams p;
        p.k = static_cast<int>(c.get_int("ds.k", 0));
        p.n = static_cast<int>(c.get_int("ds.n", 0));
        p.g_list = c.get_list("ds.g_list", p.g_list);
        p.separation = static_cast<int>(c.get_int("ds.separation", 0));
        if (p.k < 0) throw ConfigError("ds.k must be >= 0");
        if (p.g_list.empty()) throw ConfigError("ds.g_list must not be empty");
        return p;
    }
};

/// Both cubes (E,m)-S for some E in the grid (plus eigenvalues in I).
inline ExperimentOutput ds_experiment(const ExperimentConfig& cfg, const DsParams& p) {
    const int N = cfg.spec.N;
    const int n = p.n > 0 ? p.n : N;
    if (n > N) throw ConfigError("ds: n must not exceed N");
    if (p.k > cfg.ladder.k_max) throw ConfigError("ds: k exceeds k_max");
    const int L = cfg.ladder.L(p.k);
    const int sep = p.separation > 0 ? p.separation : 2 * n * L + 1;
    const Cube c1(Configuration::origin(n, cfg.spec.d), L);
    const Cube c2(Configuration::filled(n, cfg.spec.d, sep), L);
    if (!are_distant(c1.center, c2.center, 2.0 * n * L)) throw GeometryError("ds: cubes must be 2nL_k-distant");
    detail::require_feasible(c1);
    const EnergyGrid grid(cfg.ladder.I, cfg.ladder.spacing(L, N));

    struct Trial {
        std::uint64_t seed = 0;
        bool found = false;
        double energy = 0.0;
        long long candidates = 0;
    };
    ExperimentOutput out;
    out.name = "ds";
    EmpiricalCurve curve;
    const double bound = ds_bound(L, cfg.ladder.p, n, N);
    std::vector<std::uint64_t> ks, ns;
    for (std::size_t gi = 0; gi < p.g_list.size(); ++gi) {
        ModelSpec spec = cfg.spec;
        spec.g = p.g_list[gi];
        const auto trials = run_trials(cfg.trials, cfg.workers, [&](std::size_t t) {
            const auto seed = rng::trial_seed(cfg.master_seed, gi * cfg.trials + t);
            const auto f = detail::field_for({c1, c2}, spec, seed);
            const SingularityProbe a(assemble(c1, f, spec), cfg.ladder.m, cfg.ladder.alpha, N);
            const SingularityProbe b(assemble(c2, f, spec), cfg.ladder.m, cfg.ladder.alpha, N);
            const auto r = find_common_singular_energy(a, b, grid);
            return Trial{seed, r.found, r.energy, r.stats.candidates};
        });
        std::uint64_t hits = 0;
        for (std::size_t t = 0; t < trials.size(); ++t) {
            hits += trials[t].found;
            out.records.push_back({{"g", spec.g},
                                   {"trial", t},
                                   {"seed", trials[t].seed},
                                   {"both_singular", trials[t].found},
                                   {"energy", trials[t].found ? nlohmann::json(trials[t].energy) : nlohmann::json(nullptr)},
                                   {"candidates", trials[t].candidates}});
        }
        detail::push_binomial(curve, spec.g, hits, trials.size(), bound);
        ks.push_back(hits);
        ns.push_back(trials.size());
    }

    // Monotonicity in |g|: no significant increase between consecutive values, and the trend statistic.
    bool increase = false;
    nlohmann::json pairwise = nlohmann::json::array();
    for (std::size_t i = 1; i < ks.size(); ++i) {
        const double pv = stats::proportion_greater_pvalue(ks[i], ns[i], ks[i - 1], ns[i - 1]);
        pairwise.push_back(pv);
        increase = increase || pv < 0.05;
    }
    if (increase) out.failures.push_back("ds: significant increase of the double-singularity frequency with |g|");
    if (ks.size() >= 2) {
        std::vector<double> scores;
        for (double g : p.g_list) scores.push_back(std::log2(std::abs(g)));
        const auto tr = stats::cochran_armitage(ks, ns, scores);
        out.summary["trend_z"] = tr.z;
        out.summary["trend_p_decreasing"] = tr.p_decreasing;
    }
    // exponent ordering across n on the bound curves
    nlohmann::json bounds = nlohmann::json::array();
    for (int nn = 1; nn <= N; ++nn) bounds.push_back(ds_bound(L, cfg.ladder.p, nn, N));
    bool ordered = true;
    for (int nn = 1; nn < N; ++nn) ordered = ordered && ds_bound(L, cfg.ladder.p, nn, N) < ds_bound(L, cfg.ladder.p, nn + 1, N);
    if (!ordered) out.failures.push_back("ds: bound exponents not ordered in n");
    bool dominated = true;
    for (std::size_t i = 0; i < curve.size(); ++i) dominated = dominated && curve.ci_hi[i] <= curve.bound[i];

    out.summary["k"] = p.k;
    out.summary["n"] = n;
    out.summary["L"] = L;
    out.summary["separation"] = sep;
    out.summary["grid_points"] = grid.size();
    out.summary["grid_spacing"] = grid.spacing();
    out.summary["bound"] = bound;
    out.summary["bounds_by_n"] = bounds;
    out.summary["pairwise_increase_p"] = pairwise;
    out.summary["significant_increase"] = increase;
    out.summary["bound_dominance"] = dominated;
    out.curves["ds"] = std::move(curve);
    return out;
}

// ---------------------------------------------------------------- named MSA events

struct EventsParams {
    int k = 0;
    static EventsParams from_config(const Config& c) {
        EventsParams p;
        p.k = static_cast<int>(c.get_int("events.k", 0));
        if (p.k < 0) throw ConfigError("events.k must be >= 0");
        return p;
    }
};

/// Some E in I with dist(E, s1) < delta and dist(E, s2) < delta.
inline bool double_resonance(const Eigen::VectorXd& s1, const Eigen::VectorXd& s2, double delta, const Interval& I) {
    if (I.empty()) return false;
    for (Eigen::Index i = 0; i < s1.size(); ++i)
        for (Eigen::Index j = 0; j < s2.size(); ++j) {
            const double lo = std::max(s1[i], s2[j]) - delta, hi = std::min(s1[i], s2[j]) + delta;
            if (lo < hi && lo < I.hi && hi > I.lo) return true;
        }
    return false;
}

/// Frequencies of the events excluded in the inductive step for a pair of
/// distant radius-L_{k+1} cubes: (1) double resonance, (2) K^FI >= 4 or
/// K^PI >= 2 at scale k, (3) tunneling; against L_{k+1}^{-2p} / 4.
inline ExperimentOutput events_experiment(const ExperimentConfig& cfg, const EventsParams& p) {
    const auto& spec = cfg.spec;
    const auto& ladder = cfg.ladder;
    if (p.k + 1 > ladder.k_max) throw ConfigError("events: k + 1 exceeds k_max");
    const int L = ladder.L(p.k + 1);
    const Cube c1(Configuration::origin(spec.N, spec.d), L);
    const Cube c2(Configuration::filled(spec.N, spec.d, 2 * spec.N * L + 1), L);
    detail::require_feasible(c1);
    const double delta = std::exp(-std::pow(static_cast<double>(L), ladder.beta));

    struct Trial {
        std::uint64_t seed = 0;
        bool e1 = false, e2 = false, e3 = false;
    };
    const auto trials = run_trials(cfg.trials, cfg.workers, [&](std::size_t t) {
        Trial r;
        r.seed = rng::trial_seed(cfg.master_seed, t);
        const auto f = detail::field_for({c1, c2}, spec, r.seed);
        const auto a = eigendecompose(assemble(c1, f, spec), false);
        const auto b = eigendecompose(assemble(c2, f, spec), false);
        r.e1 = double_resonance(a.values, b.values, delta, ladder.I);
        for (const Cube* c : {&c1, &c2}) {
            if (!r.e2)
                r.e2 = count_K(*c, f, spec, ladder, p.k, InteractiveFilter::FI, 4).count >= 4 ||
                       count_K(*c, f, spec, ladder, p.k, InteractiveFilter::PI, 2).count >= 2;
            if (!r.e3) r.e3 = is_tunneling(*c, f, spec, ladder, p.k + 1).tunneling;
        }
        return r;
    });
    ExperimentOutput out;
    out.name = "events";
    std::uint64_t h1 = 0, h2 = 0, h3 = 0;
    for (std::size_t t = 0; t < trials.size(); ++t) {
        const auto& r = trials[t];
        h1 += r.e1;
        h2 += r.e2;
        h3 += r.e3;
        out.records.push_back({{"trial", t}, {"seed", r.seed}, {"double_resonance", r.e1}, {"many_singular", r.e2}, {"tunneling", r.e3}});
    }
    const double budget = 0.25 * std::pow(static_cast<double>(L), -2.0 * ladder.p);
    EmpiricalCurve curve;
    detail::push_binomial(curve, 1, h1, trials.size(), budget);
    detail::push_binomial(curve, 2, h2, trials.size(), budget);
    detail::push_binomial(curve, 3, h3, trials.size(), budget);
    out.curves["events"] = std::move(curve);
    out.summary["k"] = p.k;
    out.summary["L"] = L;
    out.summary["L_sub"] = ladder.L(p.k);
    out.summary["delta"] = delta;
    out.summary["budget"] = budget;
    out.summary["events"] = {"double_resonance", "K_FI>=4 or K_PI>=2", "tunneling"};
    out.summary["frequencies"] = {h1, h2, h3};
    // geometric room for the counted configurations inside one cube
    const int r = ladder.L(p.k);
    const auto centers = subcube_centers(c1, r);
    int spread = 0;
    for (const auto& a : centers) spread = std::max(spread, sym_dist(a, centers.front()));
    out.summary["max_subcube_separation"] = spread;
    out.summary["required_separation"] = 2 * spec.N * r;
    return out;
}

// ---------------------------------------------------------------- trace growth

struct TraceParams {
    std::vector<int> L_list{2, 4, 6, 8};
    double kappa = 1.0;
    double C = 1.0;

    static TraceParams from_config(const Config& c) {
        TraceParams p;
        p.L_list = c.get_int_list("trace.L_list", p.L_list);
        p.kappa = c.get_double("trace.kappa", p.kappa);
        p.C = c.get_double("trace.C", p.C);
        if (p.L_list.empty()) throw ConfigError("trace.L_list must not be empty");
        for (int L : p.L_list)
            if (L < 1) throw ConfigError("trace.L_list entries must be >= 1");
        return p;
    }
};

inline ExperimentOutput trace_growth_experiment(const ExperimentConfig& cfg, const TraceParams& p) {
    const auto& spec = cfg.spec;
    const int nd = spec.N * spec.d;
    ExperimentOutput out;
    out.name = "trace";
    EmpiricalCurve exceed, mean;
    std::vector<double> sides, means;
    for (std::size_t li = 0; li < p.L_list.size(); ++li) {
        const int L = p.L_list[li];
        const Cube c(Configuration::origin(spec.N, spec.d), L);
        detail::require_feasible(c);
        const double dim = static_cast<double>(c.cardinality());
        const double threshold = p.C * std::pow(static_cast<double>(L), p.kappa * nd);
        const auto tr = run_trials(cfg.trials, cfg.workers, [&](std::size_t t) {
            const auto seed = rng::trial_seed(cfg.master_seed, li * cfg.trials + t);
            const auto sd = eigendecompose(assemble(c, *detail::field_for({c}, spec, seed), spec), false);
            return std::pair<std::uint64_t, long long>(seed, projection_trace(sd, cfg.ladder.I));
        });
        std::uint64_t hits = 0;
        std::vector<double> v;
        for (std::size_t t = 0; t < tr.size(); ++t) {
            const auto [seed, trace] = tr[t];
            hits += static_cast<double>(trace) > threshold;
            v.push_back(static_cast<double>(trace));
            if (static_cast<double>(trace) > dim) out.failures.push_back("trace: trace above the dimension");
            out.records.push_back({{"L", L}, {"trial", t}, {"seed", seed}, {"trace", trace}});
        }
        detail::push_binomial(exceed, L, hits, tr.size(), std::numeric_limits<double>::quiet_NaN());
        detail::push_mean(mean, L, v, dim);
        sides.push_back(2.0 * L + 1.0);
        means.push_back(stats::mean(v));
    }
    out.curves["exceedance"] = std::move(exceed);
    out.curves["trace_mean"] = std::move(mean);
    bool positive = true;
    for (double m : means) positive = positive && m > 0;
    if (positive && means.size() >= 2) {
        const auto fit = stats::loglog_fit(sides, means);
        out.summary["volume_exponent"] = fit.slope;
        out.summary["volume_exponent_se"] = fit.slope_se;
    } else {
        out.summary["volume_exponent"] = nullptr;
    }
    out.summary["Nd"] = nd;
    out.summary["kappa"] = p.kappa;
    out.summary["C"] = p.C;
    return out;
}

// ---------------------------------------------------------------- eigenfunction decay

struct DecayParams {
    int L = 12;
    double floor = 1e-12;
    std::vector<int> center_radii{1, 2, 4, 8, 12};
    int bootstrap = 2000;

    static DecayParams from_config(const Config& c) {
        DecayParams p;
        p.L = static_cast<int>(c.get_int("decay.L", p.L));
        p.floor = c.get_double("decay.floor", p.floor);
        p.center_radii = c.get_int_list("decay.center_radii", p.center_radii);
        p.bootstrap = static_cast<int>(c.get_int("decay.bootstrap", p.bootstrap));
        if (p.L < 0) throw ConfigError("decay.L must be >= 0");
        if (!(p.floor > 0 && p.floor < 1)) throw ConfigError("decay.floor must lie in (0, 1)");
        if (p.bootstrap < 1) throw ConfigError("decay.bootstrap must be >= 1");
        std::sort(p.center_radii.begin(), p.center_radii.end());
        return p;
    }
};

struct EigenfunctionRecord {
    double E = 0.0;
    Configuration center;
    double m_hat = 0.0;  // +inf when no tail is left above the floor
    double max_abs = 0.0;
};

/// Centre of localisation: among the maximisers of |psi|, the one closest to
/// the cube centre (ties broken by enumeration order).
inline std::size_t localization_center(const Eigen::VectorXd& psi, const CubeIndexer& idx, const Configuration& origin) {
    const double m = psi.cwiseAbs().maxCoeff();
    std::size_t best = 0;
    int best_r = std::numeric_limits<int>::max();
    for (Eigen::Index i = 0; i < psi.size(); ++i) {
        if (std::abs(psi[i]) < m * (1.0 - 1e-9)) continue;
        const int r = max_dist(idx.point_at(static_cast<std::size_t>(i)), origin);
        if (r < best_r) {
            best_r = r;
            best = static_cast<std::size_t>(i);
        }
    }
    return best;
}

/// Decay rate from the tail envelope T(r) = max_{|x - c| >= r} |psi(x)|: least
/// squares slope of log T(r) over the radii where T(r) > floor * T(0).
inline double fit_decay_rate(const Eigen::VectorXd& psi, const CubeIndexer& idx, const Configuration& c, double floor) {
    std::vector<double> shell;
    for (Eigen::Index i = 0; i < psi.size(); ++i) {
        const auto r = static_cast<std::size_t>(max_dist(idx.point_at(static_cast<std::size_t>(i)), c));
        if (shell.size() <= r) shell.resize(r + 1, 0.0);
        shell[r] = std::max(shell[r], std::abs(psi[i]));
    }
    for (std::size_t r = shell.size(); r-- > 1;) shell[r - 1] = std::max(shell[r - 1], shell[r]);
    std::vector<double> xs, ys;
    for (std::size_t r = 0; r < shell.size(); ++r) {
        if (!(shell[r] > floor * shell[0])) break;
        xs.push_back(static_cast<double>(r));
        ys.push_back(std::log(shell[r]));
    }
    if (xs.size() < 2) return std::numeric_limits<double>::infinity();
    return -stats::least_squares(xs, ys).slope;
}

inline std::vector<EigenfunctionRecord> decay_records(const FiniteVolumeOperator& op, const Interval& I, double floor) {
    const auto sd = eigendecompose(op);
    std::vector<EigenfunctionRecord> out;
    for (Eigen::Index n = 0; n < sd.size(); ++n) {
        if (!I.contains(sd.values[n])) continue;
        const Eigen::VectorXd psi = sd.vectors.col(n);
        EigenfunctionRecord r;
        r.E = sd.values[n];
        r.center = op.point_at(localization_center(psi, op.indexer(), op.cube().center));
        r.m_hat = fit_decay_rate(psi, op.indexer(), r.center, floor);
        r.max_abs = psi.cwiseAbs().maxCoeff();
        out.push_back(std::move(r));
    }
    return out;
}

/// Number of records centred in C_R(origin) for each R.
inline std::vector<long long> center_counts(const std::vector<EigenfunctionRecord>& recs, const Configuration& origin,
                                            const std::vector<int>& radii) {
    std::vector<long long> out;
    for (int R : radii) {
        long long n = 0;
        for (const auto& r : recs) n += max_dist(r.center, origin) <= R;
        out.push_back(n);
    }
    return out;
}

inline ExperimentOutput decay_experiment(const ExperimentConfig& cfg, const DecayParams& p) {
    const auto& spec = cfg.spec;
    const Cube c(Configuration::origin(spec.N, spec.d), p.L);
    detail::require_feasible(c);
    struct Trial {
        std::uint64_t seed = 0;
        std::vector<EigenfunctionRecord> recs;
        bool covers_spectrum = false;
    };
    const auto trials = run_trials(cfg.trials, cfg.workers, [&](std::size_t t) {
        Trial r;
        r.seed = rng::trial_seed(cfg.master_seed, t);
        const auto op = assemble(c, *detail::field_for({c}, spec, r.seed), spec);
        r.recs = decay_records(op, cfg.ladder.I, p.floor);
        r.covers_spectrum = r.recs.size() == op.dim();
        return r;
    });

    ExperimentOutput out;
    out.name = "decay";
    std::vector<double> rates;
    std::vector<std::vector<double>> counts(p.center_radii.size());
    bool monotone = true, full_ok = true;
    const double dim = static_cast<double>(c.cardinality());
    for (std::size_t t = 0; t < trials.size(); ++t) {
        const auto& tr = trials[t];
        for (const auto& r : tr.recs) {
            rates.push_back(r.m_hat);
            out.records.push_back({{"trial", t},
                                   {"seed", tr.seed},
                                   {"E", r.E},
                                   {"center", r.center.coords},
                                   {"m_hat", detail::num(r.m_hat)},
                                   {"max_abs", r.max_abs}});
        }
        const auto cc = center_counts(tr.recs, c.center, p.center_radii);
        for (std::size_t j = 0; j < cc.size(); ++j) {
            counts[j].push_back(static_cast<double>(cc[j]));
            if (j > 0 && cc[j] < cc[j - 1]) monotone = false;
            if (tr.covers_spectrum && p.center_radii[j] >= p.L && static_cast<double>(cc[j]) != dim) full_ok = false;
        }
    }
    if (!monotone) out.failures.push_back("decay: centre counts not monotone in the radius");
    if (!full_ok) out.failures.push_back("decay: full-spectrum centre count differs from the dimension");

    EmpiricalCurve centers;
    for (std::size_t j = 0; j < p.center_radii.size(); ++j) {
        std::uint64_t total = 0;
        for (double v : counts[j]) total += static_cast<std::uint64_t>(v);
        detail::push_mean(centers, p.center_radii[j], counts[j], dim, total);
    }
    out.curves["centers"] = std::move(centers);
    out.summary["L"] = p.L;
    out.summary["eigenfunctions"] = rates.size();
    out.summary["center_counts_monotone"] = monotone;
    out.summary["full_spectrum_count_ok"] = full_ok;
    if (!rates.empty()) {
        const auto med = [](const std::vector<double>& v) { return stats::median(v); };
        const double m = stats::median(rates);
        const auto ci = stats::bootstrap_ci(rates, med, rng::stream_seed(cfg.master_seed, 0xDECA7), p.bootstrap);
        double max_finite = -std::numeric_limits<double>::infinity();
        std::size_t n_inf = 0;
        for (double r : rates) {
            if (std::isinf(r))
                ++n_inf;
            else
                max_finite = std::max(max_finite, r);
        }
        out.summary["median_m_hat"] = detail::num(m);
        out.summary["median_ci"] = {detail::num(ci.lo), detail::num(ci.hi)};
        out.summary["max_m_hat"] = detail::num(n_inf ? std::numeric_limits<double>::infinity() : max_finite);
        out.summary["max_finite_m_hat"] = detail::num(max_finite);
        out.summary["delta_like"] = n_inf;
    }
    // growth shape of the counts against R^{alpha kappa d} (shape only)
    std::vector<double> rs, ms;
    for (std::size_t j = 0; j < p.center_radii.size(); ++j)
        if (p.center_radii[j] > 0 && !counts[j].empty() && stats::mean(counts[j]) > 0) {
            rs.push_back(p.center_radii[j]);
            ms.push_back(stats::mean(counts[j]));
        }
    if (rs.size() >= 2) out.summary["center_count_exponent"] = stats::loglog_fit(rs, ms).slope;
    return out;
}

// ---------------------------------------------------------------- dynamics

struct DynamicsParams {
    std::vector<int> L_list{6, 12};
    double s = 2.0;
    bool eta_zero = false;
    Interval eta{-2.0, 2.0};
    std::vector<std::vector<int>> K;  // empty: the origin
    double boundary_tol = 1e-6;

    static DynamicsParams from_config(const Config& c) {
        DynamicsParams p;
        p.L_list = c.get_int_list("dyn.L_list", p.L_list);
        p.s = c.get_double("dyn.s", p.s);
        const std::string eta = c.get_string("dyn.eta", "indicator");
        if (eta == "zero")
            p.eta_zero = true;
        else if (eta != "indicator")
            throw ConfigError("dyn.eta must be indicator or zero");
        const auto iv = c.get_list("dyn.eta_interval", {p.eta.lo, p.eta.hi});
        if (iv.size() != 2) throw ConfigError("dyn.eta_interval must be lo,hi");
        p.eta = {iv[0], iv[1]};
        if (c.has("dyn.K"))
            for (const auto& part : io::split(c.get_string("dyn.K", ""), ';')) {
                std::vector<int> pt;
                for (const auto& v : io::split(part, ',')) {
                    const double x = io::parse_double(v);
                    if (x != std::floor(x)) throw ConfigError("dyn.K: coordinates must be integers");
                    pt.push_back(static_cast<int>(x));
                }
                p.K.push_back(std::move(pt));
            }
        p.boundary_tol = c.get_double("dyn.boundary_tol", p.boundary_tol);
        if (p.L_list.empty()) throw ConfigError("dyn.L_list must not be empty");
        if (p.s < 0) throw ConfigError("dyn.s must be >= 0");
        return p;
    }
};

struct MomentSample {
    double norm = 0.0;
    double boundary_weight = 0.0;
    std::vector<double> annuli;  // contribution of each shell |x| = j; sums to norm
};

/// ||X^s eta(H) 1_K|| on one finite-volume realisation, with its shell decomposition.
inline MomentSample moment_sample(const FiniteVolumeOperator& op, const std::function<double(double)>& eta,
                                  const std::vector<Configuration>& K, double s) {
    const auto sd = eigendecompose(op);
    const auto n = static_cast<Eigen::Index>(op.dim());
    Eigen::VectorXd w(sd.size());
    for (Eigen::Index k = 0; k < sd.size(); ++k) w[k] = eta(sd.values[k]);
    Eigen::MatrixXd rowsK(static_cast<Eigen::Index>(K.size()), sd.size());
    for (std::size_t j = 0; j < K.size(); ++j) {
        const auto i = op.index_of(K[j]);
        if (i < 0) throw GeometryError("dynamics: K must lie inside the cube");
        rowsK.row(static_cast<Eigen::Index>(j)) = sd.vectors.row(i);
    }
    // B(x, k) = eta(H)(x, k)
    const Eigen::MatrixXd B = sd.vectors * w.asDiagonal() * rowsK.transpose();
    Eigen::VectorXd xs(n);
    std::vector<int> radius(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        radius[static_cast<std::size_t>(i)] = max_dist(op.point_at(static_cast<std::size_t>(i)), Configuration::origin(op.cube().N(), op.cube().d()));
        xs[i] = s == 0.0 ? 1.0 : std::pow(static_cast<double>(radius[static_cast<std::size_t>(i)]), s);
    }
    const Eigen::MatrixXd A = xs.asDiagonal() * B;
    Eigen::VectorXd v;
    MomentSample out;
    if (K.size() == 1) {
        v = A.col(0);
    } else {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinV);
        v = A * svd.matrixV().col(0);
    }
    out.norm = v.norm();
    int rmax = 0;
    for (int r : radius) rmax = std::max(rmax, r);
    out.annuli.assign(static_cast<std::size_t>(rmax) + 1, 0.0);
    if (out.norm > 0)
        for (Eigen::Index i = 0; i < n; ++i) out.annuli[static_cast<std::size_t>(radius[static_cast<std::size_t>(i)])] += v[i] * v[i] / out.norm;
    double bw = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        if (max_dist(op.point_at(static_cast<std::size_t>(i)), op.cube().center) == op.cube().L) bw += B.row(i).squaredNorm();
    out.boundary_weight = std::sqrt(bw);
    return out;
}

inline ExperimentOutput dynamics_experiment(const ExperimentConfig& cfg, const DynamicsParams& p) {
    const auto& spec = cfg.spec;
    if (!p.eta_zero && !p.eta.empty() && !(p.eta.lo >= cfg.ladder.I.lo && p.eta.hi <= cfg.ladder.I.hi))
        throw ConfigError("dynamics: supp eta must lie inside I");
    std::vector<Configuration> K;
    if (p.K.empty())
        K.push_back(Configuration::origin(spec.N, spec.d));
    else
        for (const auto& k : p.K) K.emplace_back(spec.N, spec.d, k);
    const Interval eta_iv = p.eta;
    const bool zero = p.eta_zero;
    const std::function<double(double)> eta = [eta_iv, zero](double e) { return zero ? 0.0 : (eta_iv.contains(e) ? 1.0 : 0.0); };

    ExperimentOutput out;
    out.name = "dynamics";
    EmpiricalCurve curve;
    std::vector<double> estimates;
    double identity_residual = 0.0;
    for (int L : p.L_list) {
        const Cube c(Configuration::origin(spec.N, spec.d), L);
        detail::require_feasible(c);
        for (const auto& k : K)
            if (!c.contains(k)) throw GeometryError("dynamics: K must lie inside the cube of radius " + std::to_string(L));
        // one realisation per trial, shared by all cube sizes (the field is keyed by site)
        const auto samples = run_trials(cfg.trials, cfg.workers, [&](std::size_t t) {
            const auto seed = rng::trial_seed(cfg.master_seed, t);
            return moment_sample(assemble(c, *detail::field_for({c}, spec, seed), spec), eta, K, p.s);
        });
        std::vector<double> norms;
        std::uint64_t flagged = 0;
        double bw_max = 0.0;
        std::vector<std::vector<double>> shells(static_cast<std::size_t>(samples.front().annuli.size()));
        for (std::size_t t = 0; t < samples.size(); ++t) {
            const auto& sm = samples[t];
            norms.push_back(sm.norm);
            flagged += sm.boundary_weight >= p.boundary_tol;
            bw_max = std::max(bw_max, sm.boundary_weight);
            for (std::size_t j = 0; j < sm.annuli.size(); ++j) shells[j].push_back(sm.annuli[j]);
            nlohmann::json rec{{"L", L},
                               {"trial", t},
                               {"seed", rng::trial_seed(cfg.master_seed, t)},
                               {"norm", sm.norm},
                               {"boundary_weight", sm.boundary_weight},
                               {"annuli", sm.annuli}};
            out.records.push_back(std::move(rec));
        }
        const double est = stats::mean(norms);
        double shell_sum = 0.0;
        EmpiricalCurve ann;
        for (std::size_t j = 0; j < shells.size(); ++j) {
            detail::push_mean(ann, static_cast<double>(j), shells[j], std::numeric_limits<double>::quiet_NaN());
            shell_sum += ann.estimate.back();
        }
        identity_residual = std::max(identity_residual, std::abs(shell_sum - est) / std::max(1.0, est));
        out.curves["annuli_L" + std::to_string(L)] = std::move(ann);
        detail::push_mean(curve, L, norms, std::numeric_limits<double>::quiet_NaN(), flagged);
        estimates.push_back(est);
        double bw_mean = 0.0;
        for (const auto& sm : samples) bw_mean += sm.boundary_weight;
        bw_mean /= static_cast<double>(samples.size());
        out.summary["boundary"][std::to_string(L)] = {{"mean", bw_mean}, {"max", bw_max}, {"flagged_trials", flagged}};
        if (bw_mean >= p.boundary_tol) out.summary["boundary_flagged"].push_back(L);
    }
    if (identity_residual > 1e-10) out.failures.push_back("dynamics: shell decomposition does not sum to the estimate");
    out.curves["dynamics"] = std::move(curve);
    nlohmann::json changes = nlohmann::json::array();
    for (std::size_t i = 1; i < estimates.size(); ++i)
        changes.push_back(estimates[i - 1] > 0 ? std::abs(estimates[i] - estimates[i - 1]) / estimates[i - 1] : 0.0);
    out.summary["estimates"] = estimates;
    out.summary["relative_changes"] = changes;
    out.summary["identity_residual"] = identity_residual;
    out.summary["s"] = p.s;
    out.summary["boundary_tol"] = p.boundary_tol;
    if (!out.summary.contains("boundary_flagged")) out.summary["boundary_flagged"] = nlohmann::json::array();
    return out;
}

// ---------------------------------------------------------------- mean/fluctuation structure

struct CmParams {
    std::vector<int> q_sizes{4, 25, 100};
    std::size_t draws = 100000;
    int sites = 10;

    static CmParams from_config(const Config& c) {
        CmParams p;
        p.q_sizes = c.get_int_list("cm.q_sizes", p.q_sizes);
        p.draws = static_cast<std::size_t>(c.get_int("cm.draws", static_cast<long long>(p.draws)));
        p.sites = static_cast<int>(c.get_int("cm.sites", p.sites));
        if (p.draws < 2 || p.sites < 1) throw ConfigError("cm: need draws >= 2 and sites >= 1");
        for (int q : p.q_sizes)
            if (q < 1) throw ConfigError("cm.q_sizes must be positive");
        return p;
    }
};

/// Q: a square block in Z^2 when |Q| is a perfect square and d = 2, else a segment along the first axis.
inline std::vector<Site> block_sites(int q, int d) {
    std::vector<Site> out;
    const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(q))));
    if (d >= 2 && side * side == q) {
        for (int i = 0; i < side; ++i)
            for (int j = 0; j < side; ++j) {
                Site s(static_cast<std::size_t>(d), 0);
                s[0] = i;
                s[1] = j;
                out.push_back(s);
            }
    } else {
        for (int i = 0; i < q; ++i) {
            Site s(static_cast<std::size_t>(d), 0);
            s[0] = i;
            out.push_back(s);
        }
    }
    return out;
}

inline ExperimentOutput cm_experiment(const ExperimentConfig& cfg, const CmParams& p) {
    const auto& dist = cfg.spec.distribution;
    const double var = dist.is_gaussian() ? dist.variance : (dist.hi - dist.lo) * (dist.hi - dist.lo) / 12.0;
    ExperimentOutput out;
    out.name = "cm";
    EmpiricalCurve curve;
    const double corr_tol = 4.0 / std::sqrt(static_cast<double>(p.draws));
    nlohmann::json corr = nlohmann::json::object();
    for (std::size_t qi = 0; qi < p.q_sizes.size(); ++qi) {
        const int q = p.q_sizes[qi];
        const auto Q = block_sites(q, std::max(cfg.spec.d, 2));
        rng::PhiloxStream pick(rng::stream_seed(cfg.master_seed, 0xC0FFEE + qi));
        // distinct sites while |Q| allows it (partial Fisher-Yates)
        std::vector<std::size_t> perm(Q.size()), chosen;
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        for (int i = 0; i < p.sites; ++i) {
            const std::size_t j = static_cast<std::size_t>(i) % perm.size();
            if (static_cast<std::size_t>(i) < perm.size()) std::swap(perm[j], perm[j + pick.below(perm.size() - j)]);
            chosen.push_back(perm[j]);
        }
        const auto draws = run_trials(p.draws, cfg.workers, [&](std::size_t t) {
            const auto seed = rng::trial_seed(cfg.master_seed, qi * p.draws + t);
            std::vector<double> v;
            v.reserve(Q.size());
            double sum = 0.0;
            for (const auto& s : Q) {
                v.push_back(field_value(dist, seed, s));
                sum += v.back();
            }
            const double xi = sum / static_cast<double>(Q.size());
            std::vector<double> row{xi};
            for (auto i : chosen) row.push_back(v[i] - xi);
            return row;
        });
        std::vector<double> xis;
        for (const auto& r : draws) xis.push_back(r[0]);
        const double sv = stats::stddev(xis) * stats::stddev(xis);
        const double n1 = static_cast<double>(p.draws - 1);
        const boost::math::chi_squared chi(n1);
        const double lo = sv * n1 / boost::math::quantile(chi, 0.975), hi = sv * n1 / boost::math::quantile(chi, 0.025);
        const double expect = var / q;
        curve.push(q, sv, lo, hi, expect, 0, p.draws);
        const double rel = std::abs(sv - expect) / expect;
        if (rel > 0.05) out.failures.push_back("cm: variance of xi_Q off by " + io::format_double(rel) + " at |Q| = " + std::to_string(q));
        nlohmann::json cs = nlohmann::json::array();
        const double mx = stats::mean(xis), sx = stats::stddev(xis);
        for (std::size_t k = 0; k < chosen.size(); ++k) {
            std::vector<double> eta;
            for (const auto& r : draws) eta.push_back(r[k + 1]);
            const double me = stats::mean(eta), se = stats::stddev(eta);
            double cov = 0.0;
            for (std::size_t t = 0; t < draws.size(); ++t) cov += (xis[t] - mx) * (eta[t] - me);
            cov /= n1;
            const double c = (sx > 0 && se > 0) ? cov / (sx * se) : 0.0;
            cs.push_back({{"site", Q[chosen[k]]}, {"corr", c}});
            if (!(std::abs(c) < corr_tol))
                out.failures.push_back("cm: |corr(xi_Q, eta_x)| = " + io::format_double(std::abs(c)) + " at |Q| = " + std::to_string(q));
        }
        corr[std::to_string(q)] = cs;
        out.records.push_back({{"Q", q}, {"sample_variance", sv}, {"expected", expect}, {"relative_error", rel}});
    }
    out.curves["xi_variance"] = std::move(curve);
    out.summary["correlations"] = corr;
    out.summary["correlation_tolerance"] = corr_tol;
    out.summary["draws"] = p.draws;
    return out;
}

// ---------------------------------------------------------------- self-tests

/// Random instances of the geometric resolvent identities plus Green-function
/// and free-spectrum checks; residuals are relative to max(1, term scale).
inline ExperimentOutput gri_selftest(const ExperimentConfig& cfg, std::size_t instances) {
    struct Result {
        std::uint64_t seed = 0;
        double gri = 0.0, ef = 0.0, green = 0.0;
        int N = 0, d = 0, L = 0, l = 0;
    };
    const auto res = run_trials(instances, cfg.workers, [&](std::size_t t) {
        Result r;
        r.seed = rng::trial_seed(cfg.master_seed, t);
        rng::PhiloxStream g(r.seed);
        ModelSpec spec;
        r.N = 1 + static_cast<int>(g.below(2));
        r.d = r.N == 1 ? 1 + static_cast<int>(g.below(2)) : 1;
        spec.N = r.N;
        spec.d = r.d;
        spec.g = 0.5 + 2.5 * g.uniform();
        if (r.N == 2 && g.below(2) == 1) {
            spec.r0 = 1;
            spec.U2 = {0.5 + g.uniform(), 0.5 * g.uniform()};
        }
        r.L = r.N * r.d == 1 ? 4 + static_cast<int>(g.below(5)) : 3 + static_cast<int>(g.below(2));
        const Cube outer(Configuration::origin(r.N, r.d), r.L);
        const auto f = detail::field_for({outer}, spec, r.seed);
        const auto op = assemble(outer, f, spec);
        const auto sd = eigendecompose(op);
        // inner cube with C_{l+1}(w) inside the outer cube
        r.l = static_cast<int>(g.below(static_cast<std::uint64_t>(r.L - 1)));
        const int slack = r.L - r.l - 1;
        std::vector<int> w(static_cast<std::size_t>(r.N * r.d));
        for (auto& v : w) v = static_cast<int>(g.below(static_cast<std::uint64_t>(2 * slack + 1))) - slack;
        const Cube inner(Configuration(r.N, r.d, w), r.l);
        const auto in_pts = cube_points(inner);
        const auto x = in_pts[g.below(in_pts.size())];
        Configuration y = x;
        while (inner.contains(y)) y = op.point_at(g.below(op.dim()));
        const auto inner_op = assemble(inner, f, spec);
        const auto in_sd = eigendecompose(inner_op, false);
        double e = 0.0;
        do e = -3.0 + 6.0 * g.uniform();
        while (sd.distance_to_spectrum(e) < 1e-6 || in_sd.distance_to_spectrum(e) < 1e-6);
        const auto gr = gri_residual(op, inner, e, x, y);
        r.gri = gr.residual / std::max(1.0, gr.scale);
        Eigen::Index n = 0;
        do n = static_cast<Eigen::Index>(g.below(static_cast<std::uint64_t>(sd.size())));
        while (in_sd.distance_to_spectrum(sd.values[n]) < 1e-6);
        const auto ef = gri_ef_residual(op, sd, n, inner, x);
        r.ef = ef.residual / std::max(1.0, ef.scale);
        const Eigen::MatrixXd inv = green_matrix_direct(op.matrix(), e);
        double err = 0.0;
        for (std::size_t i = 0; i < op.dim(); ++i)
            for (std::size_t j = 0; j < op.dim(); ++j)
                err = std::max(err, std::abs(green_entry(sd, e, i, j) - inv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
        r.green = err / std::max(1.0, inv.cwiseAbs().maxCoeff());
        return r;
    });
    ExperimentOutput out;
    out.name = "gri-selftest";
    double worst_gri = 0, worst_ef = 0, worst_green = 0;
    for (std::size_t t = 0; t < res.size(); ++t) {
        const auto& r = res[t];
        worst_gri = std::max(worst_gri, r.gri);
        worst_ef = std::max(worst_ef, r.ef);
        worst_green = std::max(worst_green, r.green);
        out.records.push_back({{"instance", t}, {"seed", r.seed}, {"N", r.N}, {"d", r.d}, {"L", r.L}, {"l", r.l},
                               {"gri_residual", r.gri}, {"ef_residual", r.ef}, {"green_error", r.green}});
        if (!(r.gri < 1e-8 && r.ef < 1e-8 && r.green < 1e-8))
            out.failures.push_back("gri-selftest: instance " + std::to_string(t) + " (seed " + std::to_string(r.seed) + ") above 1e-8");
    }
    // free path: eigenvalues 2 cos(pi k / (n + 1))
    double worst_free = 0.0;
    ModelSpec free;
    free.N = 1;
    free.d = 1;
    free.g = 0.0;
    for (int L = 0; L <= 10; ++L) {
        const Cube c(Configuration::origin(1, 1), L);
        const int n = 2 * L + 1;
        const auto sd = eigendecompose(assemble(c, *detail::field_for({c}, free, 1), free), false);
        for (int k = 1; k <= n; ++k)
            worst_free = std::max(worst_free, std::abs(sd.values[k - 1] - 2.0 * std::cos(std::acos(-1.0) * (n + 1 - k) / (n + 1))));
    }
    if (!(worst_free < 1e-10)) out.failures.push_back("gri-selftest: free path spectrum off by " + io::format_double(worst_free));
    out.summary["instances"] = instances;
    out.summary["max_gri_residual"] = worst_gri;
    out.summary["max_ef_residual"] = worst_ef;
    out.summary["max_green_error"] = worst_green;
    out.summary["max_free_spectrum_error"] = worst_free;
    return out;
}

inline ExperimentOutput descent_selftest(const ExperimentConfig& cfg, std::size_t instances) {
    const auto reps = run_trials(instances, cfg.workers, [&](std::size_t t) {
        const auto inst = random_descent_instance(rng::trial_seed(cfg.master_seed, t));
        return std::make_pair(verify_descent(inst.f, inst.spec, inst.cover, inst.r), inst);
    });
    ExperimentOutput out;
    out.name = "descent-selftest";
    std::size_t bound_fail = 0, step_fail = 0;
    for (std::size_t t = 0; t < reps.size(); ++t) {
        const auto& [rep, inst] = reps[t];
        nlohmann::json rec = rep.to_json();
        rec["instance"] = t;
        rec["seed"] = rng::trial_seed(cfg.master_seed, t);
        rec["n"] = inst.spec.domain.d();
        rec["exceptional_points"] = inst.spec.S.size();
        if (!rep.holds) rec["counterexample"] = instance_json(inst);
        out.records.push_back(std::move(rec));
        bound_fail += !rep.bound_ok;
        step_fail += !rep.steps_ok;
    }
    if (bound_fail) out.failures.push_back("descent-selftest: " + std::to_string(bound_fail) + " bound violations");
    if (step_fail) out.failures.push_back("descent-selftest: " + std::to_string(step_fail) + " step-count violations");
    out.summary["instances"] = instances;
    out.summary["bound_violations"] = bound_fail;
    out.summary["step_violations"] = step_fail;
    return out;
}

// ---------------------------------------------------------------- dispatch and artefacts

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {"wegner", "ds", "events", "trace", "decay", "dynamics", "cm", "descent-selftest", "gri-selftest"};
    return names;
}

inline ExperimentOutput run_experiment(const std::string& name, const ExperimentConfig& cfg) {
    const auto& c = cfg.raw;
    if (name == "wegner") return wegner_experiment(cfg, WegnerParams::from_config(c));
    if (name == "ds") return ds_experiment(cfg, DsParams::from_config(c));
    if (name == "events") return events_experiment(cfg, EventsParams::from_config(c));
    if (name == "trace") return trace_growth_experiment(cfg, TraceParams::from_config(c));
    if (name == "decay") return decay_experiment(cfg, DecayParams::from_config(c));
    if (name == "dynamics") return dynamics_experiment(cfg, DynamicsParams::from_config(c));
    if (name == "cm") return cm_experiment(cfg, CmParams::from_config(c));
    if (name == "descent-selftest") return descent_selftest(cfg, static_cast<std::size_t>(c.get_int("descent.instances", 1000)));
    if (name == "gri-selftest") return gri_selftest(cfg, static_cast<std::size_t>(c.get_int("gri.instances", 200)));
    throw ConfigError("unknown experiment '" + name + "'");
}

inline nlohmann::json metadata_json(const ExperimentOutput& out, const ExperimentConfig& cfg) {
    nlohmann::json m;
    m["experiment"] = out.name;
    m["version"] = kVersion;
    m["config"] = cfg.echo().to_json();
    m["master_seed"] = cfg.master_seed;
    m["trials"] = cfg.trials;
    m["scales"] = cfg.ladder.scales();
    m["seed_scheme"] = "trial seed = mix64(master + (index + 1) * 0x9E3779B97F4A7C15)";
    m["energy_events"] = "existence over I is decided on a uniform grid plus the eigenvalues in I (a lower bound on the continuum event)";
    return m;
}

/// Writes trials.jsonl, one CSV per curve, summary.json, metadata.json and
/// config.conf into `dir`; returns the written paths (relative to dir).
inline std::vector<std::string> write_outputs(const ExperimentOutput& out, const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    std::vector<std::string> files;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    std::string lines;
    for (const auto& r : out.records) lines += r.dump() + "\n";
    write_text_file(dir / "trials.jsonl", lines);
    files.push_back("trials.jsonl");
    for (const auto& [name, curve] : out.curves) {
        std::ostringstream os;
        write_curve_csv(os, curve);
        write_text_file(dir / (name + ".csv"), os.str());
        files.push_back(name + ".csv");
    }
    nlohmann::json summary = out.summary;
    summary["failures"] = out.failures;
    summary["ok"] = out.ok();
    write_text_file(dir / "summary.json", summary.dump(2) + "\n");
    files.push_back("summary.json");
    write_text_file(dir / "metadata.json", metadata_json(out, cfg).dump(2) + "\n");
    files.push_back("metadata.json");
    write_text_file(dir / "config.conf", cfg.echo().dump());
    files.push_back("config.conf");
    return files;
}

/// Run manifest: enough to re-run the experiment bit-identically.
inline nlohmann::json manifest_json(const ExperimentOutput& out, const ExperimentConfig& cfg, const std::vector<std::string>& files,
                                    const std::string& started, const std::string& finished) {
    nlohmann::json m;
    m["experiment"] = out.name;
    m["version"] = kVersion;
    m["master_seed"] = cfg.master_seed;
    m["workers"] = cfg.workers;
    m["config"] = cfg.echo().to_json();
    m["outputs"] = files;
    m["started"] = started;
    m["finished"] = finished;
    m["replay"] = "mpal " + (out.name == "events" ? std::string("ds --events") : out.name) + " --config config.conf";
    return m;
}

/// Config recorded in a manifest.
inline Config config_from_manifest(const nlohmann::json& manifest) {
    if (!manifest.contains("config")) throw ConfigError("manifest has no config");
    return Config::from_json(manifest.at("config"));
}

} // namespace mpal
