#pragma once

// Flat key = value configuration files, curve CSVs and run artefacts.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "mpal/errors.hpp"

namespace mpal {

/// File-system failure while reading or writing artefacts.
class IoError : public Error {
public:
    using Error::Error;
};

namespace io {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s) {
    const std::string t = trim(s);
    if (t == "nan") return std::nan("");
    if (t == "inf") return HUGE_VAL;
    if (t == "-inf") return -HUGE_VAL;
    double v = 0.0;
    const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    if (r.ec != std::errc() || r.ptr != t.data() + t.size()) throw ConfigError("not a number: '" + t + "'");
    return v;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

} // namespace io

/// Flat configuration: one `key = value` per line, `#` starts a comment.
/// Lists are comma separated. Later `set` calls override file values.
class Config {
public:
    Config() = default;

    static Config parse(std::istream& in, const std::string& origin = "<config>") {
        Config c;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string t = io::trim(line);
            if (t.empty()) continue;
            const auto eq = t.find('=');
            if (eq == std::string::npos) throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
            const std::string key = io::trim(std::string_view(t).substr(0, eq));
            const std::string value = io::trim(std::string_view(t).substr(eq + 1));
            if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
            if (c.values_.count(key)) throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
            c.values_[key] = value;
        }
        return c;
    }

    static Config parse_string(const std::string& text) {
        std::istringstream in(text);
        return parse(in);
    }

    static Config load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
        return parse(in, path.string());
    }

    /// Applies `key=value`.
    void apply_override(const std::string& assignment) {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos) throw ConfigError("override must have the form key=value: '" + assignment + "'");
        const std::string key = io::trim(std::string_view(assignment).substr(0, eq));
        if (key.empty()) throw ConfigError("override with empty key");
        values_[key] = io::trim(std::string_view(assignment).substr(eq + 1));
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    void set(const std::string& key, double value) { values_[key] = io::format_double(value); }
    void erase(const std::string& key) { values_.erase(key); }
    bool has(const std::string& key) const { return values_.count(key) > 0; }
    const std::map<std::string, std::string>& entries() const noexcept { return values_; }

    std::string get_string(const std::string& key, const std::string& def) const {
        const auto it = values_.find(key);
        return it == values_.end() ? def : it->second;
    }

    double get_double(const std::string& key, double def) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return def;
        try {
            return io::parse_double(it->second);
        } catch (const ConfigError&) {
            throw ConfigError("key '" + key + "': expected a number, got '" + it->second + "'");
        }
    }

    long long get_int(const std::string& key, long long def) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return def;
        long long v = 0;
        const auto& s = it->second;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ConfigError("key '" + key + "': expected an integer, got '" + s + "'");
        return v;
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t def) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return def;
        std::uint64_t v = 0;
        const auto& s = it->second;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (r.ec != std::errc() || r.ptr != s.data() + s.size())
            throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + s + "'");
        return v;
    }

    bool get_bool(const std::string& key, bool def) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return def;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw ConfigError("key '" + key + "': expected true or false, got '" + it->second + "'");
    }

    std::vector<double> get_list(const std::string& key, const std::vector<double>& def) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return def;
        std::vector<double> out;
        for (const auto& part : io::split(it->second, ',')) {
            try {
                out.push_back(io::parse_double(part));
            } catch (const ConfigError&) {
                throw ConfigError("key '" + key + "': expected a comma separated list of numbers, got '" + it->second + "'");
            }
        }
        return out;
    }

    std::vector<int> get_int_list(const std::string& key, const std::vector<int>& def) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return def;
        std::vector<int> out;
        for (double v : get_list(key, {})) {
            if (v != std::floor(v)) throw ConfigError("key '" + key + "': expected integers");
            out.push_back(static_cast<int>(v));
        }
        return out;
    }

    /// Keys not in `known`, for typo detection.
    std::vector<std::string> unknown_keys(const std::vector<std::string>& known) const {
        std::vector<std::string> out;
        for (const auto& [k, v] : values_)
            if (std::find(known.begin(), known.end(), k) == known.end()) out.push_back(k);
        return out;
    }

    /// Canonical text form (sorted keys), parseable by `parse`.
    std::string dump() const {
        std::string s;
        for (const auto& [k, v] : values_) s += k + " = " + v + "\n";
        return s;
    }

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [k, v] : values_) j[k] = v;
        return j;
    }

    static Config from_json(const nlohmann::json& j) {
        Config c;
        for (auto it = j.begin(); it != j.end(); ++it) c.values_[it.key()] = it.value().get<std::string>();
        return c;
    }

private:
    std::map<std::string, std::string> values_;
};

/// A probability (or mean) curve with 95% intervals and its theoretical counterpart.
struct EmpiricalCurve {
    std::vector<double> x;
    std::vector<double> estimate;
    std::vector<double> ci_lo;
    std::vector<double> ci_hi;
    std::vector<double> bound;  // nan where no closed form applies
    std::vector<std::uint64_t> hits;
    std::vector<std::uint64_t> trials;

    std::size_t size() const noexcept { return x.size(); }

    void push(double xv, double est, double lo, double hi, double b, std::uint64_t k, std::uint64_t n) {
        x.push_back(xv);
        estimate.push_back(est);
        ci_lo.push_back(lo);
        ci_hi.push_back(hi);
        bound.push_back(b);
        hits.push_back(k);
        trials.push_back(n);
    }

    double ci_half_width(std::size_t i) const { return 0.5 * (ci_hi[i] - ci_lo[i]); }

    bool well_formed() const {
        const std::size_t n = x.size();
        if (estimate.size() != n || ci_lo.size() != n || ci_hi.size() != n || bound.size() != n || hits.size() != n || trials.size() != n)
            return false;
        for (std::size_t i = 0; i < n; ++i)
            if (!(ci_lo[i] <= estimate[i] && estimate[i] <= ci_hi[i])) return false;
        return true;
    }

    bool operator==(const EmpiricalCurve& o) const {
        const auto same = [](const std::vector<double>& a, const std::vector<double>& b) {
            if (a.size() != b.size()) return false;
            for (std::size_t i = 0; i < a.size(); ++i)
                if (!(a[i] == b[i] || (std::isnan(a[i]) && std::isnan(b[i])))) return false;
            return true;
        };
        return same(x, o.x) && same(estimate, o.estimate) && same(ci_lo, o.ci_lo) && same(ci_hi, o.ci_hi) &&
               same(bound, o.bound) && hits == o.hits && trials == o.trials;
    }
};

inline constexpr const char* kCurveHeader = "x,estimate,ci_lo,ci_hi,ci_half_width,bound,hits,trials";

inline void write_curve_csv(std::ostream& os, const EmpiricalCurve& c) {
    os << kCurveHeader << '\n';
    for (std::size_t i = 0; i < c.size(); ++i) {
        os << io::format_double(c.x[i]) << ',' << io::format_double(c.estimate[i]) << ',' << io::format_double(c.ci_lo[i]) << ','
           << io::format_double(c.ci_hi[i]) << ',' << io::format_double(c.ci_half_width(i)) << ',' << io::format_double(c.bound[i])
           << ',' << c.hits[i] << ',' << c.trials[i] << '\n';
    }
}

inline EmpiricalCurve read_curve_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || io::trim(line) != kCurveHeader) throw IoError("curve csv: unexpected header");
    EmpiricalCurve c;
    while (std::getline(is, line)) {
        if (io::trim(line).empty()) continue;
        const auto f = io::split(line, ',');
        if (f.size() != 8) throw IoError("curve csv: expected 8 fields, got " + std::to_string(f.size()));
        try {
            c.push(io::parse_double(f[0]), io::parse_double(f[1]), io::parse_double(f[2]), io::parse_double(f[3]),
                   io::parse_double(f[5]), std::stoull(f[6]), std::stoull(f[7]));
        } catch (const std::exception& e) {
            throw IoError(std::string("curve csv: ") + e.what());
        }
    }
    return c;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace mpal
