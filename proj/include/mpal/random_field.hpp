#pragma once

// IID random potential V(x; omega) on single-particle sites, and the
// sample-mean / fluctuation decomposition V = xi_Q + eta on a site set Q.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "mpal/errors.hpp"
#include "mpal/lattice.hpp"
#include "mpal/rng.hpp"

namespace mpal {

/// Continuity modulus nu_R(t) of the conditional law of xi_Q over sets of
/// diameter <= R in Z^d.
using ModulusFn = std::function<double(int R, int d, double t)>;

struct FieldDistribution {
    enum class Kind { gaussian, uniform };

    Kind kind = Kind::gaussian;
    double mean = 0.0;
    double variance = 1.0;
    double lo = 0.0;
    double hi = 1.0;
    ModulusFn modulus;  // empty when no closed form is known

    static FieldDistribution gaussian(double mean = 0.0, double variance = 1.0);
    static FieldDistribution uniform(double lo, double hi);

    bool is_gaussian() const noexcept { return kind == Kind::gaussian; }

    void validate() const {
        if (kind == Kind::gaussian && !(variance > 0.0)) throw DomainError("gaussian field needs variance > 0");
        if (kind == Kind::uniform && !(lo < hi)) throw DomainError("uniform field needs lo < hi");
    }

    /// Draw from a Philox block.
    double draw(const rng::Counter& block) const {
        if (kind == Kind::gaussian) return mean + std::sqrt(variance) * rng::normal_from_block(block);
        return lo + (hi - lo) * rng::to_unit_closed_open(block[0], block[1]);
    }
};

/// Uniform bound on the density of xi_Q for an IID Gaussian field:
/// |Q|^{1/2} / (sigma sqrt(2 pi)). Non-Gaussian laws have no closed form here.
inline double xi_density_bound(const FieldDistribution& dist, long long q_size) {
    if (!dist.is_gaussian()) throw DomainError("xi_density_bound: only available for gaussian fields");
    if (q_size <= 0) throw DomainError("xi_density_bound: |Q| must be positive");
    return std::sqrt(static_cast<double>(q_size)) / (std::sqrt(dist.variance) * std::sqrt(2.0 * std::numbers::pi));
}

/// Lipschitz modulus of the Gaussian instance: the largest set of diameter
/// <= R in Z^d has (R+1)^d sites, so nu_R(t) = xi_density_bound((R+1)^d) * t.
inline ModulusFn gaussian_modulus(double variance) {
    return [variance](int R, int d, double t) {
        const double q = std::pow(static_cast<double>(R + 1), d);
        return std::sqrt(q) / (std::sqrt(variance) * std::sqrt(2.0 * std::numbers::pi)) * t;
    };
}

inline FieldDistribution FieldDistribution::gaussian(double mean, double variance) {
    FieldDistribution f;
    f.kind = Kind::gaussian;
    f.mean = mean;
    f.variance = variance;
    f.validate();
    f.modulus = gaussian_modulus(variance);
    return f;
}

inline FieldDistribution FieldDistribution::uniform(double lo, double hi) {
    FieldDistribution f;
    f.kind = Kind::uniform;
    f.lo = lo;
    f.hi = hi;
    f.validate();
    return f;
}

/// Philox counter for a site: coordinates in words 0..d-1, dimension in word 3.
inline rng::Counter site_counter(std::span<const int> site) {
    if (site.empty() || site.size() > 3) throw DomainError("random field: site dimension must be 1, 2 or 3");
    rng::Counter c{0u, 0u, 0u, static_cast<std::uint32_t>(site.size())};
    for (std::size_t i = 0; i < site.size(); ++i) c[i] = static_cast<std::uint32_t>(site[i]);
    return c;
}

/// Value of the field at one site for a given seed. Depends only on (site, seed).
inline double field_value(const FieldDistribution& dist, std::uint64_t seed, std::span<const int> site) {
    return dist.draw(rng::philox4x32(site_counter(site), rng::key_from_seed(seed)));
}

/// Realisation of V on a finite set of sites.
class FieldSample {
public:
    FieldSample() = default;

    FieldSample(int d, std::vector<Site> sites, std::vector<double> values, std::uint64_t seed, FieldDistribution dist)
        : d_(d), sites_(std::move(sites)), values_(std::move(values)), seed_(seed), dist_(std::move(dist)) {
        if (sites_.size() != values_.size()) throw DomainError("FieldSample: sites/values size mismatch");
        for (const auto& s : sites_)
            if (static_cast<int>(s.size()) != d_) throw DomainError("FieldSample: site of wrong dimension");
        std::vector<std::size_t> order(sites_.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return sites_[a] < sites_[b]; });
        std::vector<Site> s2;
        std::vector<double> v2;
        for (auto i : order) {
            if (!s2.empty() && s2.back() == sites_[i]) throw DomainError("FieldSample: duplicate site");
            s2.push_back(sites_[i]);
            v2.push_back(values_[i]);
        }
        sites_ = std::move(s2);
        values_ = std::move(v2);
    }

    int d() const noexcept { return d_; }
    std::uint64_t seed() const noexcept { return seed_; }
    const FieldDistribution& distribution() const noexcept { return dist_; }
    const std::vector<Site>& sites() const noexcept { return sites_; }
    const std::vector<double>& values() const noexcept { return values_; }
    std::size_t size() const noexcept { return sites_.size(); }

    bool contains(std::span<const int> site) const { return find(site) >= 0; }

    double value_at(std::span<const int> site) const {
        const auto i = find(site);
        if (i < 0) throw DomainError("FieldSample: site not in sampled region");
        return values_[static_cast<std::size_t>(i)];
    }

    /// Copy with every value shifted by c (used for coupling/monotonicity checks).
    FieldSample shifted(double c) const {
        FieldSample out = *this;
        for (auto& v : out.values_) v += c;
        return out;
    }

    /// Copy with explicitly overridden values at some sites (constructed instances).
    FieldSample with_values(const std::vector<std::pair<Site, double>>& overrides) const {
        FieldSample out = *this;
        for (const auto& [s, v] : overrides) {
            const auto i = out.find(s);
            if (i < 0) throw DomainError("FieldSample: override site not in region");
            out.values_[static_cast<std::size_t>(i)] = v;
        }
        return out;
    }

private:
    std::ptrdiff_t find(std::span<const int> site) const {
        const Site key(site.begin(), site.end());
        auto it = std::lower_bound(sites_.begin(), sites_.end(), key);
        if (it == sites_.end() || *it != key) return -1;
        return it - sites_.begin();
    }

    int d_ = 1;
    std::vector<Site> sites_;
    std::vector<double> values_;
    std::uint64_t seed_ = 0;
    FieldDistribution dist_;
};

/// IID draw over a finite nonempty region; deterministic in (region, seed).
inline FieldSample sample_field(const std::vector<Site>& region, const FieldDistribution& dist, std::uint64_t seed) {
    if (region.empty()) throw DomainError("sample_field: empty region");
    dist.validate();
    const int d = static_cast<int>(region.front().size());
    std::vector<double> values;
    values.reserve(region.size());
    for (const auto& s : region) {
        if (static_cast<int>(s.size()) != d) throw DomainError("sample_field: mixed site dimensions");
        values.push_back(field_value(dist, seed, s));
    }
    return FieldSample(d, region, std::move(values), seed, dist);
}

/// Field covering the single-particle projections of the given cubes.
inline FieldSample sample_field_for(const std::vector<Cube>& cubes, const FieldDistribution& dist, std::uint64_t seed) {
    return sample_field(single_particle_region(cubes), dist, seed);
}

/// V = xi_Q + eta on Q, with xi_Q the sample mean.
struct MeanFluctuationDecomposition {
    std::vector<Site> Q;
    double xi = 0.0;
    std::vector<double> eta;  // aligned with Q
};

inline MeanFluctuationDecomposition decompose(const FieldSample& sample, const std::vector<Site>& Q) {
    if (Q.empty()) throw DomainError("decompose: empty Q");
    MeanFluctuationDecomposition out;
    out.Q = Q;
    std::vector<double> v;
    v.reserve(Q.size());
    for (const auto& s : Q) {
        if (!sample.contains(s)) throw DomainError("decompose: Q is not contained in the sampled region");
        v.push_back(sample.value_at(s));
    }
    double sum = 0.0;
    for (double x : v) sum += x;
    out.xi = sum / static_cast<double>(v.size());
    out.eta.reserve(v.size());
    for (double x : v) out.eta.push_back(x - out.xi);
    return out;
}

// JSON form used for experiment replay. The modulus is re-attached on load.

inline void to_json(nlohmann::json& j, const FieldDistribution& f) {
    if (f.is_gaussian())
        j = {{"kind", "gaussian"}, {"mean", f.mean}, {"variance", f.variance}};
    else
        j = {{"kind", "uniform"}, {"lo", f.lo}, {"hi", f.hi}};
}

inline void from_json(const nlohmann::json& j, FieldDistribution& f) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "gaussian")
        f = FieldDistribution::gaussian(j.at("mean").get<double>(), j.at("variance").get<double>());
    else if (kind == "uniform")
        f = FieldDistribution::uniform(j.at("lo").get<double>(), j.at("hi").get<double>());
    else
        throw ConfigError("unknown field distribution kind '" + kind + "'");
}

inline void to_json(nlohmann::json& j, const FieldSample& s) {
    j = {{"d", s.d()}, {"seed", s.seed()}, {"distribution", s.distribution()}, {"sites", s.sites()}, {"values", s.values()}};
}

inline void from_json(const nlohmann::json& j, FieldSample& s) {
    s = FieldSample(j.at("d").get<int>(), j.at("sites").get<std::vector<Site>>(), j.at("values").get<std::vector<double>>(),
                    j.at("seed").get<std::uint64_t>(), j.at("distribution").get<FieldDistribution>());
}

} // namespace mpal
