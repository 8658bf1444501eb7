#pragma once

// Small statistics toolbox for the experiment harness.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "mpal/errors.hpp"
#include "mpal/rng.hpp"

namespace mpal::stats {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double half_width() const { return 0.5 * (hi - lo); }
};

/// Exact (Clopper-Pearson) two-sided binomial interval at the given level.
inline Interval clopper_pearson(std::uint64_t k, std::uint64_t n, double level = 0.95) {
    if (n == 0) throw DomainError("clopper_pearson: n must be positive");
    if (k > n) throw DomainError("clopper_pearson: k > n");
    const double a = 1.0 - level;
    const double kd = static_cast<double>(k), nd = static_cast<double>(n);
    Interval out;
    out.lo = k == 0 ? 0.0 : boost::math::ibeta_inv(kd, nd - kd + 1.0, a / 2);
    out.hi = k == n ? 1.0 : boost::math::ibeta_inv(kd + 1.0, nd - kd, 1.0 - a / 2);
    return out;
}

inline double normal_sf(double z) { return boost::math::cdf(boost::math::complement(boost::math::normal(), z)); }

/// One-sided two-proportion z-test of H1: p_a > p_b (pooled variance). Returns the p-value.
inline double proportion_greater_pvalue(std::uint64_t ka, std::uint64_t na, std::uint64_t kb, std::uint64_t nb) {
    const double pa = static_cast<double>(ka) / static_cast<double>(na);
    const double pb = static_cast<double>(kb) / static_cast<double>(nb);
    const double p = static_cast<double>(ka + kb) / static_cast<double>(na + nb);
    const double se = std::sqrt(p * (1.0 - p) * (1.0 / static_cast<double>(na) + 1.0 / static_cast<double>(nb)));
    if (se == 0.0) return pa > pb ? 0.0 : 1.0;
    return normal_sf((pa - pb) / se);
}

struct TrendTest {
    double z = 0.0;
    double p_decreasing = 1.0;  // one-sided p-value for a decreasing trend
};

/// Cochran-Armitage test for trend in proportions k_i / n_i against scores x_i.
inline TrendTest cochran_armitage(const std::vector<std::uint64_t>& k, const std::vector<std::uint64_t>& n,
                                  const std::vector<double>& x) {
    if (k.size() != n.size() || k.size() != x.size() || k.size() < 2) throw DomainError("cochran_armitage: size mismatch");
    double N = 0, K = 0;
    for (std::size_t i = 0; i < k.size(); ++i) {
        N += static_cast<double>(n[i]);
        K += static_cast<double>(k[i]);
    }
    const double pbar = K / N;
    double xbar = 0;
    for (std::size_t i = 0; i < k.size(); ++i) xbar += static_cast<double>(n[i]) * x[i];
    xbar /= N;
    double t = 0, sxx = 0;
    for (std::size_t i = 0; i < k.size(); ++i) {
        t += (x[i] - xbar) * static_cast<double>(k[i]);
        sxx += static_cast<double>(n[i]) * (x[i] - xbar) * (x[i] - xbar);
    }
    TrendTest out;
    const double var = pbar * (1.0 - pbar) * sxx;
    if (var == 0.0) return out;
    out.z = t / std::sqrt(var);
    out.p_decreasing = 1.0 - normal_sf(out.z);
    return out;
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw DomainError("median of empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline double mean(const std::vector<double>& v) {
    if (v.empty()) throw DomainError("mean of empty sample");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1 denominator).
inline double stddev(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

/// Percentile bootstrap interval for a statistic.
template <class Stat>
Interval bootstrap_ci(const std::vector<double>& sample, Stat&& stat, std::uint64_t seed, int resamples = 2000,
                      double level = 0.95) {
    if (sample.empty()) throw DomainError("bootstrap_ci: empty sample");
    rng::PhiloxStream g(seed);
    std::vector<double> stats;
    stats.reserve(static_cast<std::size_t>(resamples));
    std::vector<double> buf(sample.size());
    for (int b = 0; b < resamples; ++b) {
        for (auto& x : buf) x = sample[g.below(sample.size())];
        stats.push_back(stat(buf));
    }
    std::sort(stats.begin(), stats.end());
    const double a = (1.0 - level) / 2;
    const auto at = [&](double p) {
        const auto i = static_cast<std::size_t>(std::clamp(std::floor(p * (resamples - 1) + 0.5), 0.0, resamples - 1.0));
        return stats[i];
    };
    return {at(a), at(1.0 - a)};
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    double slope_se = 0.0;
};

/// Ordinary least squares y = intercept + slope * x.
inline LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw DomainError("least_squares: need at least two paired points");
    const double n = static_cast<double>(x.size());
    const double mx = mean(x), my = mean(y);
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw DomainError("least_squares: degenerate abscissae");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double rss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - f.intercept - f.slope * x[i];
        rss += e * e;
    }
    f.r2 = syy > 0 ? 1.0 - rss / syy : 1.0;
    f.slope_se = x.size() > 2 ? std::sqrt(rss / (n - 2) / sxx) : 0.0;
    return f;
}

inline LinearFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0 && y[i] > 0)) throw DomainError("loglog_fit: values must be positive");
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
    }
    return least_squares(lx, ly);
}

} // namespace mpal::stats
