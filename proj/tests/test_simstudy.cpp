#include <gtest/gtest.h>

#include <cmath>

#include "attrib/simstudy.hpp"
#include "attrib/synthetic.hpp"
#include "oracles.hpp"

using namespace attrib;

namespace {

struct World {
    RegionSet regions;
    EofBasis truth_f, truth_c;
};

const World& world()
{
    static const World w = [] {
        World x;
        x.regions = make_synthetic_regions(SyntheticRegionOptions{});
        x.truth_f = compute_eofs(empirical_logit_cov(make_synthetic_history(x.regions, 56, 1)), 56);
        x.truth_c = compute_eofs(empirical_logit_cov(make_synthetic_history(x.regions, 56, 2)), 56);
        return x;
    }();
    return w;
}

StudyCell cell_for(TrueState st, int scheme, int n_ens = 100)
{
    const World& w = world();
    return make_study_cell(TrueStateSpec::make(st, scheme, n_ens), w.regions, &w.truth_f, &w.truth_c, 5);
}

const std::vector<TrueState> kStates{TrueState::g_re, TrueState::ng_re, TrueState::gp_s,
                                     TrueState::gp_l, TrueState::eof_g, TrueState::eof_ng};

} // namespace

TEST(Score, Examples)
{
    auto s = score({0, 0, 1}, {true, false, true}, 9);
    EXPECT_DOUBLE_EQ(s.fdp, 0.5);
    ASSERT_TRUE(s.power);
    EXPECT_DOUBLE_EQ(*s.power, 1.0);

    s = score({0, 1, 1}, {false, false, false}, 9);
    EXPECT_EQ(s.fdp, 0.0);
    EXPECT_EQ(*s.power, 0.0);

    s = score({0, 1}, {true, false}, 9);
    EXPECT_DOUBLE_EQ(s.loss, 5.0);

    s = score({0, 0}, {true, false}, 9);
    EXPECT_FALSE(s.power.has_value());
    EXPECT_DOUBLE_EQ(s.fdp, 1.0);

    EXPECT_THROW(score({0}, {true, false}, 9), DimensionError);
}

TEST(Score, MatchesConfusionEnumeration)
{
    Rng rng = make_rng(17);
    for (int k = 0; k < 300; ++k) {
        const std::size_t m = 1 + static_cast<std::size_t>(draw_uniform(rng) * 40);
        std::vector<int> theta(m);
        std::vector<bool> delta(m);
        for (std::size_t i = 0; i < m; ++i) {
            theta[i] = draw_uniform(rng) < 0.4;
            delta[i] = draw_uniform(rng) < 0.5;
        }
        const auto s = score(theta, delta, 9);
        const auto c = oracle::confusion(theta, delta);
        EXPECT_EQ(s.fd, c.fp);
        EXPECT_EQ(s.fn, c.fn);
        EXPECT_EQ(s.true_discoveries, c.tp);
        EXPECT_DOUBLE_EQ(s.fdp, c.fp + c.tp > 0 ? static_cast<double>(c.fp) / (c.fp + c.tp) : 0.0);
        if (c.tp + c.fn > 0)
            EXPECT_DOUBLE_EQ(*s.power, static_cast<double>(c.tp) / (c.tp + c.fn));
        else
            EXPECT_FALSE(s.power);
        EXPECT_DOUBLE_EQ(s.loss, (9.0 * c.fp + c.fn) / static_cast<double>(m));
        EXPECT_GE(s.fdp, 0.0);
        EXPECT_LE(s.fdp, 1.0);
    }
}

TEST(Score, PerfectInformation)
{
    Rng rng = make_rng(3);
    std::vector<int> theta(50);
    std::vector<double> pi(50);
    for (std::size_t i = 0; i < theta.size(); ++i) {
        theta[i] = draw_uniform(rng) < 0.5;
        pi[i] = theta[i] ? 0.0 : 1.0;
    }
    // R1 and R3 spend their budget on pi = 1 nulls once the non-nulls are in,
    // so zero FDP needs alpha < 1/M and gamma < 1; R2 is exact at any level.
    for (double alpha : {0.1, 0.01}) {
        const auto s = score(theta, rule_r1(pi, alpha).delta, 9);
        EXPECT_EQ(*s.power, 1.0);
        EXPECT_LE(s.fdp, alpha);
        if (alpha < 1.0 / 50)
            EXPECT_EQ(s.fdp, 0.0);
    }
    for (double gamma : {5.0, 0.5}) {
        const auto s = score(theta, rule_r3(pi, gamma).delta, 9);
        EXPECT_EQ(*s.power, 1.0);
        EXPECT_EQ(s.fd, static_cast<int>(std::floor(gamma)));
    }
    const auto s = score(theta, rule_r2(pi, 9).delta, 9);
    EXPECT_EQ(s.fdp, 0.0);
    EXPECT_EQ(*s.power, 1.0);
    EXPECT_EQ(s.loss, 0.0);
}

TEST(TrueStates, TableValues)
{
    auto s = TrueStateSpec::make(TrueState::g_re, 2, 100);
    EXPECT_DOUBLE_EQ(s.mean_f, logit(0.08));
    EXPECT_DOUBLE_EQ(s.mean_c, logit(0.08));
    EXPECT_DOUBLE_EQ(s.re_sd * s.re_sd, 0.74 * 0.74);
    s = TrueStateSpec::make(TrueState::ng_re, 1, 100);
    EXPECT_EQ(s.gamma_shape, 4.0);
    EXPECT_EQ(s.gamma_scale, 0.375);
    EXPECT_EQ(s.gamma_shift, 1.5);
    s = TrueStateSpec::make(TrueState::gp_l, 2, 100);
    EXPECT_EQ(s.gp_range, 0.10);
    EXPECT_EQ(s.gp_variance, 0.6);
    EXPECT_EQ(s.gp_smoothness, 2.0);
    EXPECT_DOUBLE_EQ(TrueStateSpec::make(TrueState::ng_re, 3, 100).mean_c, logit(0.18));
    EXPECT_DOUBLE_EQ(TrueStateSpec::make(TrueState::eof_g, 3, 100).mean_c, logit(0.19));
    EXPECT_THROW(TrueStateSpec::make(TrueState::g_re, 4, 100), ConfigError);
}

TEST(TrueStates, NonNullFractionsPerScheme)
{
    const double target[3] = {0.85, 0.5, 0.15};
    for (TrueState st : kStates)
        for (int scheme : {1, 2, 3}) {
            const StudyCell cell = cell_for(st, scheme);
            Rng rng = make_rng(100 + static_cast<std::uint64_t>(scheme));
            double nonnull = 0, total = 0;
            for (int rep = 0; rep < 2000; ++rep) {
                const auto d = generate_dataset(cell, rng);
                for (int t : d.theta)
                    nonnull += t;
                total += static_cast<double>(d.theta.size());
            }
            EXPECT_NEAR(nonnull / total, target[scheme - 1], 0.1) << state_name(st) << " scheme " << scheme;
        }
}

TEST(TrueStates, LogRiskRatioVariance)
{
    for (TrueState st : kStates) {
        if (is_eof_state(st))
            continue;
        for (int scheme : {1, 2, 3}) {
            const StudyCell cell = cell_for(st, scheme);
            Rng rng = make_rng(200 + static_cast<std::uint64_t>(scheme));
            double s = 0, s2 = 0, n = 0;
            for (int rep = 0; rep < 2000; ++rep) {
                const auto d = generate_dataset(cell, rng);
                for (Eigen::Index i = 0; i < d.p_f.size(); ++i) {
                    const double x = std::log(d.p_f(i) / d.p_c(i));
                    s += x;
                    s2 += x * x;
                    n += 1;
                }
            }
            const double var = s2 / n - (s / n) * (s / n);
            EXPECT_NEAR(var, 0.9, 0.15) << state_name(st) << " scheme " << scheme;
        }
    }
}

TEST(TrueStates, DatasetWellFormed)
{
    for (TrueState st : kStates) {
        const StudyCell cell = cell_for(st, 2, 50);
        Rng rng = make_rng(1);
        const auto d = generate_dataset(cell, rng);
        EXPECT_NO_THROW(d.counts.validate());
        EXPECT_EQ(d.counts.region_ids, world().regions.ids);
        for (std::size_t i = 0; i < d.theta.size(); ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            EXPECT_EQ(d.theta[i], d.p_f(ii) / d.p_c(ii) > 1.0 ? 1 : 0);
            EXPECT_EQ(d.counts.n_f[i], 50);
        }
    }
    EXPECT_THROW(make_study_cell(TrueStateSpec::make(TrueState::eof_g, 1, 50), world().regions, nullptr, nullptr, 1),
                 DataError);
    const auto small = world().truth_f.truncated(10);
    EXPECT_THROW(make_study_cell(TrueStateSpec::make(TrueState::eof_g, 1, 50), world().regions, &small, &small, 1),
                 DimensionError);
}

TEST(TrueStates, GpStateIsCentred)
{
    const StudyCell cell = cell_for(TrueState::gp_s, 2);
    Rng rng = make_rng(4);
    for (int rep = 0; rep < 5; ++rep) {
        const auto d = generate_dataset(cell, rng);
        const Eigen::VectorXd x = d.p_f.unaryExpr([](double p) { return logit(p); });
        EXPECT_NEAR(x.mean(), logit(0.08), 1e-9);
    }
}

TEST(Study, DeterministicAcrossJobs)
{
    StudyConfig cfg;
    cfg.states = {TrueState::g_re, TrueState::gp_s};
    cfg.schemes = {2};
    cfg.ensemble_sizes = {50};
    cfg.methods = {parse_method("lrt-bh"), parse_method("lrt-fwer"), parse_method("m1"), parse_method("m2")};
    cfg.reps = 3;
    cfg.chain.iterations = 600;
    cfg.chain.burn_in = 200;
    cfg.chain.thin = 2;
    cfg.seed = 8;
    const World& w = world();
    const auto a = run_study(cfg, w.regions, &w.truth_f, &w.truth_c);
    cfg.jobs = 3;
    const auto b = run_study(cfg, w.regions, &w.truth_f, &w.truth_c);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    // 2 cells x 3 reps x (2 classical + 2 models x 3 rules)
    EXPECT_EQ(a.rows.size(), 2u * 3u * 8u);
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        EXPECT_EQ(a.rows[i].method, b.rows[i].method);
        EXPECT_EQ(a.rows[i].rule, b.rows[i].rule);
        EXPECT_EQ(a.rows[i].metrics.fdp, b.rows[i].metrics.fdp);
        EXPECT_EQ(a.rows[i].metrics.fd, b.rows[i].metrics.fd);
        EXPECT_EQ(a.rows[i].metrics.fn, b.rows[i].metrics.fn);
    }
    EXPECT_TRUE(a.failures.empty());
    for (const auto& r : a.summary) {
        EXPECT_EQ(r.reps, 3);
        EXPECT_EQ(r.failed, 0);
    }
    cfg.seed = 9;
    const auto c = run_study(cfg, w.regions, &w.truth_f, &w.truth_c);
    bool differs = false;
    for (std::size_t i = 0; i < a.rows.size(); ++i)
        differs = differs || a.rows[i].metrics.fd != c.rows[i].metrics.fd || a.rows[i].metrics.fn != c.rows[i].metrics.fn;
    EXPECT_TRUE(differs);
}

TEST(Study, FailuresAreRecorded)
{
    // A region set without centroids cannot fit M6; the failure is counted, not dropped.
    RegionSet rs = world().regions;
    rs.centroids.clear();
    StudyConfig cfg;
    cfg.methods = {parse_method("m6"), parse_method("lrt-bh")};
    cfg.reps = 2;
    cfg.chain.iterations = 300;
    cfg.chain.burn_in = 100;
    const auto r = run_study(cfg, rs, nullptr, nullptr);
    EXPECT_EQ(r.failures.size(), 2u);
    bool seen = false;
    for (const auto& s : r.summary)
        if (s.method == "m6") {
            seen = true;
            EXPECT_EQ(s.failed, 2);
        }
    EXPECT_TRUE(seen);
    EXPECT_EQ(r.rows.size(), 2u);

    cfg.methods.clear();
    EXPECT_THROW(run_study(cfg, rs, nullptr, nullptr), ConfigError);
}

TEST(Study, AggregateMeans)
{
    std::vector<StudyRow> rows(2);
    for (auto& r : rows) {
        r.state = "g-re";
        r.method = "m1";
        r.rule = "r1";
    }
    rows[0].metrics = score({0, 1}, {true, true}, 9);
    rows[1].metrics = score({0, 0}, {false, false}, 9);
    const auto s = aggregate(rows, {});
    ASSERT_EQ(s.size(), 1u);
    EXPECT_DOUBLE_EQ(s[0].fdr, 0.25);
    EXPECT_DOUBLE_EQ(*s[0].power, 1.0); // NA replicate excluded
    EXPECT_DOUBLE_EQ(s[0].fd, 0.5);
}
