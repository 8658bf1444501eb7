#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "mpal/experiments.hpp"

using namespace mpal;

namespace {

ExperimentConfig make(const std::string& text) { return ExperimentConfig::from_config(Config::parse_string(text)); }

std::string slurp_dir(const std::filesystem::path& dir, const std::vector<std::string>& files) {
    std::string s;
    for (const auto& f : files) s += f + "\n" + read_text_file(dir / f);
    return s;
}

} // namespace

TEST(ExperimentConfig, DefaultsAndUnknownKeys) {
    const auto c = make("N = 2\nd = 1\n");
    EXPECT_EQ(c.spec.N, 2);
    EXPECT_EQ(c.trials, 1000u);
    EXPECT_THROW(make("N = 2\nbogus = 1\n"), ConfigError);
    EXPECT_THROW(make("disorder = cauchy\n"), ConfigError);
    EXPECT_THROW(make("trials = 0\n"), ConfigError);
    EXPECT_THROW(make("I = 1\n"), ConfigError);
    EXPECT_THROW(make("U2 = 1,2\nr0 = 3\n"), ConfigError);
    EXPECT_THROW(run_experiment("nope", make("")), ConfigError);
}

TEST(ExperimentConfig, EchoDropsRunOnlyKeys) {
    const auto c = make("N = 1\nworkers = 3\nout = /tmp/x\nseed = 5\n");
    EXPECT_EQ(c.workers, 3u);
    EXPECT_FALSE(c.echo().has("workers"));
    EXPECT_FALSE(c.echo().has("out"));
    EXPECT_TRUE(c.echo().has("seed"));
}

TEST(Wegner, BoundAndCurve) {
    const auto c = make("N = 1\nd = 1\ng = 1\ntrials = 200\nwegner.s_points = 5\n");
    const auto out = run_experiment("wegner", c);
    const auto& curve = out.curves.at("wegner");
    ASSERT_EQ(curve.size(), 5u);
    EXPECT_TRUE(curve.well_formed());
    for (std::size_t i = 1; i < curve.size(); ++i) EXPECT_GE(curve.hits[i], curve.hits[i - 1]);
    EXPECT_EQ(out.records.size(), 200u);
    EXPECT_TRUE(out.ok());
    // a bound without a modulus is nan
    ModelSpec s;
    s.distribution.modulus = nullptr;
    EXPECT_TRUE(std::isnan(wegner_bound(s, 2, 5, 5, 0.1)));
}

TEST(Wegner, TooCloseIsGeometryError) {
    EXPECT_THROW(run_experiment("wegner", make("N = 1\ntrials = 2\nwegner.separation = 4\n")), GeometryError);
}

TEST(Ds, StrongDisorderSuppresses) {
    const auto c = make("N = 1\nd = 1\nL0 = 4\nm = 0.5\nI = -0.5,0.5\ntrials = 40\nds.g_list = 0.5,50\n");
    const auto out = run_experiment("ds", c);
    const auto& curve = out.curves.at("ds");
    ASSERT_EQ(curve.size(), 2u);
    EXPECT_EQ(curve.hits[1], 0u);
    EXPECT_GT(curve.hits[0], 0u);
    EXPECT_TRUE(out.summary.contains("trend_p_decreasing"));
    EXPECT_EQ(out.records.size(), 80u);
}

TEST(Events, DoubleResonanceExact) {
    Eigen::VectorXd a(2), b(2);
    a << -1.0, 0.3;
    b << 0.30005, 2.0;
    EXPECT_TRUE(double_resonance(a, b, 1e-4, {-1, 1}));
    EXPECT_FALSE(double_resonance(a, b, 2e-5, {-1, 1}));
    EXPECT_FALSE(double_resonance(a, b, 1e-4, {0.5, 1}));
}

TEST(Events, RunsAtSmallScale) {
    const auto c = make("N = 2\nd = 1\nL0 = 3\nalpha = 1.5\nm = 0.01\nI = -0.1,0.1\ntrials = 3\n");
    const auto out = run_experiment("events", c);
    const auto& curve = out.curves.at("events");
    ASSERT_EQ(curve.size(), 3u);
    EXPECT_TRUE(curve.well_formed());
}

TEST(Trace, BoundedByDimension) {
    const auto c = make("N = 1\nd = 1\nI = -1,1\ntrials = 20\ntrace.L_list = 2,4,8\n");
    const auto out = run_experiment("trace", c);
    EXPECT_TRUE(out.ok());
    const auto& m = out.curves.at("trace_mean");
    for (std::size_t i = 0; i < m.size(); ++i) EXPECT_LE(m.estimate[i], m.bound[i]);
    EXPECT_GT(out.summary["volume_exponent"].get<double>(), 0.5);
}

TEST(Decay, FitRecoversExponential) {
    const Cube c(Configuration::origin(1, 1), 10);
    const CubeIndexer idx(c);
    Eigen::VectorXd psi(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) psi[static_cast<Eigen::Index>(i)] = std::exp(-0.7 * max_norm(idx.point_at(i)));
    EXPECT_NEAR(fit_decay_rate(psi, idx, Configuration::origin(1, 1), 1e-12), 0.7, 1e-12);
    EXPECT_EQ(localization_center(psi, idx, c.center), static_cast<std::size_t>(idx.index_of(c.center)));
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(psi.size());
    delta[3] = 1.0;
    EXPECT_TRUE(std::isinf(fit_decay_rate(delta, idx, idx.point_at(3), 1e-12)));
}

TEST(Decay, CenterCountsFullSpectrum) {
    const auto c = make("N = 1\nd = 1\ng = 3\nI = -100,100\ntrials = 4\ndecay.L = 6\ndecay.center_radii = 0,2,6\ndecay.bootstrap = 50\n");
    const auto out = run_experiment("decay", c);
    EXPECT_TRUE(out.ok()) << out.failures.front();
    const auto& cc = out.curves.at("centers");
    EXPECT_EQ(cc.estimate.back(), 13.0);
    EXPECT_TRUE(out.summary["full_spectrum_count_ok"].get<bool>());
}

TEST(Dynamics, ShellIdentityAndZeroEta) {
    const auto c = make("N = 1\nd = 1\ng = 8\nI = -20,20\ntrials = 10\ndyn.L_list = 6,12\n");
    const auto out = run_experiment("dynamics", c);
    EXPECT_LT(out.summary["identity_residual"].get<double>(), 1e-10);
    const auto z = make("N = 1\nd = 1\nI = -20,20\ntrials = 3\ndyn.L_list = 4\ndyn.eta = zero\n");
    const auto zo = run_experiment("dynamics", z);
    EXPECT_EQ(zo.curves.at("dynamics").estimate[0], 0.0);
    EXPECT_THROW(run_experiment("dynamics", make("I = -1,1\ntrials = 2\n")), ConfigError);
}

TEST(Dynamics, MultiPointK) {
    const Cube c(Configuration::origin(1, 1), 5);
    ModelSpec s;
    s.N = 1;
    s.d = 1;
    const auto op = assemble(c, sample_field_for({c}, s.distribution, 3), s);
    const auto all = [](double) { return 1.0; };
    const auto m = moment_sample(op, all, {Configuration(1, 1, {0}), Configuration(1, 1, {1})}, 0.0);
    // eta = 1 gives the identity, so the top singular value of 1_K is 1
    EXPECT_NEAR(m.norm, 1.0, 1e-10);
    double sum = 0;
    for (double a : m.annuli) sum += a;
    EXPECT_NEAR(sum, m.norm, 1e-12);
}

TEST(Cm, VarianceAndDecorrelation) {
    const auto c = make("N = 1\nd = 2\ncm.q_sizes = 4,9\ncm.draws = 20000\n");
    const auto out = run_experiment("cm", c);
    EXPECT_TRUE(out.ok()) << out.failures.front();
    const auto& v = out.curves.at("xi_variance");
    EXPECT_NEAR(v.estimate[0], 0.25, 0.0125);
    EXPECT_EQ(block_sites(9, 2).size(), 9u);
}

TEST(SelfTests, GriAndDescent) {
    const auto c = make("seed = 3\n");
    const auto gri = gri_selftest(c, 30);
    EXPECT_TRUE(gri.ok()) << gri.failures.front();
    EXPECT_LT(gri.summary["max_free_spectrum_error"].get<double>(), 1e-10);
    const auto ds = descent_selftest(c, 100);
    EXPECT_TRUE(ds.ok());
    EXPECT_EQ(ds.records.size(), 100u);
}

TEST(Outputs, IndependentOfWorkerCount) {
    const auto dir = std::filesystem::temp_directory_path() / "mpal_test_outputs";
    std::filesystem::remove_all(dir);
    std::string first;
    for (unsigned w : {1u, 3u}) {
        auto cfg = make("N = 1\nd = 1\ntrials = 60\ntrace.L_list = 2,3\nseed = 11\n");
        cfg.workers = w;
        const auto out = run_experiment("trace", cfg);
        const auto files = write_outputs(out, cfg, dir / std::to_string(w));
        const auto text = slurp_dir(dir / std::to_string(w), files);
        if (first.empty())
            first = text;
        else
            EXPECT_EQ(text, first);
        const auto manifest = manifest_json(out, cfg, files, "t0", "t1");
        EXPECT_EQ(config_from_manifest(manifest).dump(), cfg.echo().dump());
        std::ifstream csv(dir / std::to_string(w) / "exceedance.csv");
        EXPECT_TRUE(read_curve_csv(csv) == out.curves.at("exceedance"));
    }
    std::filesystem::remove_all(dir);
}
