// mpal: command-line front end for the experiment harness.
//
// Exit codes: 0 success, 1 unexpected error, 2 bad config / usage / missing
// file, 3 infeasible geometry, 4 invariant failure, 5 output I/O failure.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mpal/experiments.hpp"

namespace {

enum Exit { kOk = 0, kGeneric = 1, kConfig = 2, kGeometry = 3, kInvariant = 4, kIo = 5 };

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<long long> trials;
    std::optional<unsigned> workers;
    std::string out;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, CommonOptions& o) {
    sub->add_option("-c,--config", o.config, "Config file (key = value lines)");
    sub->add_option("--seed", o.seed, "Master seed");
    sub->add_option("--trials", o.trials, "Number of Monte-Carlo trials");
    sub->add_option("--workers", o.workers, "Worker threads (results do not depend on it)");
    sub->add_option("--out", o.out, "Output directory (default: $MPAL_OUT_DIR/<experiment>, else runs/<experiment>)");
    sub->add_option("--set", o.overrides, "Override a config key: --set key=value (repeatable)");
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + mpal::io::format_double(v[i]);
    return s;
}

int run(const std::string& name, const CommonOptions& o, const mpal::Config& flags) {
    mpal::Config cfg;
    if (!o.config.empty()) cfg = mpal::Config::load(o.config);
    for (const auto& a : o.overrides) cfg.apply_override(a);
    for (const auto& [k, v] : flags.entries()) cfg.set(k, v);
    if (o.seed) cfg.set("seed", std::to_string(*o.seed));
    if (o.trials) cfg.set("trials", std::to_string(*o.trials));
    if (o.workers) cfg.set("workers", std::to_string(*o.workers));
    if (!cfg.has("workers")) cfg.set("workers", std::to_string(mpal::default_workers()));

    const auto ec = mpal::ExperimentConfig::from_config(cfg);
    if (!ec.ladder.p_valid(ec.spec.N, ec.spec.d))
        std::cerr << "warning: p = " << ec.ladder.p << " is below the validity threshold "
                  << ec.ladder.p_threshold(ec.spec.N, ec.spec.d) << " for N = " << ec.spec.N << ", d = " << ec.spec.d << "\n";

    std::filesystem::path dir;
    if (!o.out.empty())
        dir = o.out;
    else if (cfg.has("out"))
        dir = cfg.get_string("out", "");
    else if (const char* env = std::getenv("MPAL_OUT_DIR"); env && *env)
        dir = std::filesystem::path(env) / name;
    else
        dir = std::filesystem::path("runs") / name;

    const std::string started = utc_now();
    const auto out = mpal::run_experiment(name, ec);
    const auto files = mpal::write_outputs(out, ec, dir);
    const auto manifest = mpal::manifest_json(out, ec, files, started, utc_now());
    mpal::write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");

    std::cout << out.name << ": " << (out.ok() ? "ok" : "FAILED") << " (" << out.records.size() << " records) -> " << dir.string()
              << "\n";
    std::cout << out.summary.dump() << "\n";
    if (out.summary.contains("boundary_flagged") && !out.summary["boundary_flagged"].empty())
        std::cerr << "warning: boundary weight not below " << out.summary["boundary_tol"].dump() << " at L = "
                  << out.summary["boundary_flagged"].dump() << "\n";
    for (const auto& f : out.failures) std::cerr << "invariant: " << f << "\n";
    return out.ok() ? kOk : kInvariant;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-particle Anderson model: finite-volume experiments", "mpal"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(mpal::kVersion));

    struct Sub {
        CLI::App* app;
        CommonOptions opts;
    };
    std::vector<std::unique_ptr<Sub>> subs;
    const auto make = [&](const std::string& name, const std::string& help) {
        auto s = std::make_unique<Sub>();
        s->app = app.add_subcommand(name, help);
        add_common(s->app, s->opts);
        subs.push_back(std::move(s));
        return subs.back().get();
    };

    make("wegner", "Two-volume eigenvalue-spacing frequencies against the bound");
    auto* ds = make("ds", "Double-singularity frequencies over |g| (or the named scale-step events)");
    bool events = false;
    std::optional<int> ds_n, ds_k;
    std::vector<double> ds_g;
    ds->app->add_flag("--events", events, "Frequencies of the events excluded in the inductive step");
    ds->app->add_option("--n", ds_n, "Particles per cube (default N)");
    ds->app->add_option("--k", ds_k, "Scale index");
    ds->app->add_option("--g", ds_g, "Disorder strengths")->delimiter(',');
    make("trace", "Growth of the spectral projection trace with the cube size");
    make("decay", "Eigenfunction decay rates and localisation-centre counts");
    make("dynamics", "Moment of the eigenfunction correlator");
    make("cm", "Sample-mean / fluctuation structure of the random field");
    auto* descent = make("descent-selftest", "Radial descent bound on random subharmonic instances");
    std::optional<long long> descent_n;
    descent->app->add_option("--instances", descent_n, "Number of instances");
    auto* gri = make("gri-selftest", "Resolvent identities, Green functions and the free spectrum");
    std::optional<long long> gri_n;
    gri->app->add_option("--instances", gri_n, "Number of instances");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    try {
        for (const auto& s : subs) {
            if (!s->app->parsed()) continue;
            std::string name = s->app->get_name();
            mpal::Config extra;
            if (s.get() == ds) {
                if (events) {
                    name = "events";
                    if (ds_n || !ds_g.empty()) throw mpal::ConfigError("--events does not take --n or --g");
                    if (ds_k) extra.set("events.k", std::to_string(*ds_k));
                } else {
                    if (ds_n) extra.set("ds.n", std::to_string(*ds_n));
                    if (ds_k) extra.set("ds.k", std::to_string(*ds_k));
                    if (!ds_g.empty()) extra.set("ds.g_list", join(ds_g));
                }
            }
            if (s.get() == descent && descent_n) extra.set("descent.instances", std::to_string(*descent_n));
            if (s.get() == gri && gri_n) extra.set("gri.instances", std::to_string(*gri_n));
            return run(name, s->opts, extra);
        }
    } catch (const mpal::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const mpal::DomainError& e) {
        std::cerr << "invalid parameters: " << e.what() << "\n";
        return kConfig;
    } catch (const mpal::GeometryError& e) {
        std::cerr << "geometry error: " << e.what() << "\n";
        return kGeometry;
    } catch (const mpal::InvariantError& e) {
        std::cerr << "invariant violated: " << e.what() << "\n";
        return kInvariant;
    } catch (const mpal::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kGeneric;
    }
    return kGeneric;
}
