#include <gtest/gtest.h>

#include <cmath>

#include "attrib/decision_rules.hpp"
#include "attrib/random.hpp"
#include "oracles.hpp"

using namespace attrib;

namespace {

std::vector<double> random_pi(Rng& rng, std::size_t m)
{
    std::vector<double> pi(m);
    const double mix = draw_uniform(rng);
    for (auto& v : pi) {
        const double u = draw_uniform(rng);
        if (u < 0.1)
            v = 0.0;
        else if (u < 0.2)
            v = 1.0;
        else if (u < mix)
            v = std::pow(draw_uniform(rng), 4.0);
        else
            v = std::round(draw_uniform(rng) * 40) / 40; // ties
    }
    return pi;
}

bool is_threshold_rule(const std::vector<bool>& delta, const std::vector<double>& pi)
{
    for (std::size_t i = 0; i < pi.size(); ++i)
        for (std::size_t j = 0; j < pi.size(); ++j)
            if (delta[i] && !delta[j] && pi[j] < pi[i])
                return false;
    return true;
}

} // namespace

TEST(NullProbs, Fractions)
{
    using Draws = std::vector<std::vector<double>>;
    EXPECT_DOUBLE_EQ(posterior_null_probs(Draws{{0.5, 1.5, 2.0, 3.0}}, HypothesisSpec::leq(1))[0], 0.25);
    EXPECT_DOUBLE_EQ(posterior_null_probs(Draws{{0.1, 0.2}}, HypothesisSpec::leq(1))[0], 1.0);
    EXPECT_DOUBLE_EQ(posterior_null_probs(Draws{{0.4, 1.0, 2.5, 1.5}}, HypothesisSpec::outside(0.5, 2))[0], 0.5);
    EXPECT_THROW(posterior_null_probs(std::vector<std::vector<double>>{}, HypothesisSpec::leq(1)), DataError);
    EXPECT_THROW(posterior_null_probs(Eigen::MatrixXd(0, 3), HypothesisSpec::leq(1)), DataError);

    Eigen::MatrixXd d(4, 1);
    d << 0.5, 1.5, 2.0, 3.0;
    EXPECT_DOUBLE_EQ(posterior_null_probs(d, HypothesisSpec::leq(1))[0], 0.25);
}

TEST(R1, Examples)
{
    const auto o = rule_r1({0.02, 0.06, 0.20, 0.95}, 0.1);
    EXPECT_EQ(o.rejections, 3u);
    EXPECT_EQ(o.delta, (std::vector<bool>{true, true, true, false}));
    EXPECT_DOUBLE_EQ(o.threshold, 0.95);
    EXPECT_EQ(rule_r1(std::vector<double>(5, 1.0), 0.9).rejections, 0u);
    EXPECT_EQ(rule_r1(std::vector<double>(5, 0.0), 0.1).rejections, 5u);
    EXPECT_THROW(rule_r1({0.5}, 1.0), DomainError);
    EXPECT_THROW(rule_r1({1.5}, 0.1), DomainError);
}

TEST(R2, Examples)
{
    EXPECT_DOUBLE_EQ(rule_r2({0.5}, 9).threshold, 0.1);
    EXPECT_DOUBLE_EQ(rule_r2({0.5}, 4).threshold, 0.2);
    EXPECT_EQ(rule_r2({0.05, 0.1, 0.2}, 9).delta, (std::vector<bool>{true, false, false}));
}

TEST(R3, Examples)
{
    EXPECT_EQ(rule_r3(std::vector<double>(100, 1.0), 20).rejections, 20u);
    EXPECT_EQ(rule_r3({0.02, 0.06, 0.20, 0.95}, 0.4).rejections, 3u);
    EXPECT_EQ(rule_r3({0.3, 0.3, 0.3}, 0.9).rejections, 3u);
}

TEST(Summaries, Examples)
{
    auto s = posterior_summaries({true, true, false}, {0.1, 0.3, 0.8});
    EXPECT_NEAR(s.fdr, 0.2, 1e-12);
    EXPECT_NEAR(s.fd, 0.4, 1e-12);
    EXPECT_NEAR(s.fn, 0.2, 1e-12);
    EXPECT_NEAR(s.fnr, 0.2, 1e-12);
    s = posterior_summaries({false, false}, {0.3, 0.6});
    EXPECT_EQ(s.fdr, 0.0);
    EXPECT_EQ(s.fd, 0.0);
    s = posterior_summaries({true, true}, {0.0, 0.0});
    EXPECT_EQ(s.fdr, 0.0);
    EXPECT_EQ(s.fnr, 0.0);
}

TEST(Rules, MatchEnumerationOnRandomVectors)
{
    Rng rng = make_rng(77);
    for (int k = 0; k < 200; ++k) {
        const auto pi = random_pi(rng, 1 + static_cast<std::size_t>(draw_uniform(rng) * 120));
        const double alpha = 0.01 + 0.5 * draw_uniform(rng);
        const double gamma = 0.05 + 10 * draw_uniform(rng);
        const double lambda2 = 1.0 / alpha - 1.0;

        const auto r1 = rule_r1(pi, alpha);
        const auto r2 = rule_r2(pi, lambda2);
        const auto r3 = rule_r3(pi, gamma);
        EXPECT_EQ(r1.delta, oracle::r1(pi, alpha));
        EXPECT_EQ(r3.delta, oracle::r3(pi, gamma));
        for (std::size_t i = 0; i < pi.size(); ++i)
            EXPECT_EQ(r2.delta[i], pi[i] < 1.0 / (lambda2 + 1.0));

        for (const auto* o : {&r1, &r2, &r3})
            EXPECT_TRUE(is_threshold_rule(o->delta, pi));
        EXPECT_LE(r1.summary.fdr, alpha + 1e-12);
        EXPECT_GE(r3.rejections, std::min(pi.size(), static_cast<std::size_t>(std::floor(gamma))));
        for (std::size_t i = 0; i < pi.size(); ++i)
            EXPECT_TRUE(!r2.delta[i] || r1.delta[i]);

        std::vector<bool> delta = r1.delta;
        double fd = 0, fn = 0, rej = 0;
        for (std::size_t i = 0; i < pi.size(); ++i) {
            if (delta[i]) {
                fd += pi[i];
                rej += 1;
            } else {
                fn += 1 - pi[i];
            }
        }
        EXPECT_NEAR(r1.summary.fd, fd, 1e-12);
        EXPECT_NEAR(r1.summary.fn, fn, 1e-12);
        EXPECT_NEAR(r1.summary.fdr, rej > 0 ? fd / rej : 0.0, 1e-12);
        EXPECT_NEAR(r1.summary.fnr, rej < pi.size() ? fn / (pi.size() - rej) : 0.0, 1e-12);
    }
}

TEST(Rules, NestedHypothesesConsistent)
{
    Rng rng = make_rng(31);
    for (int k = 0; k < 50; ++k) {
        const Eigen::Index m = 30, s = 400;
        Eigen::MatrixXd rr(s, m);
        for (Eigen::Index j = 0; j < m; ++j) {
            const double centre = 1.5 * draw_normal(rng);
            for (Eigen::Index t = 0; t < s; ++t)
                rr(t, j) = std::exp(centre + 0.4 * draw_normal(rng));
        }
        const auto p1 = posterior_null_probs(rr, HypothesisSpec::leq(1.0));
        const auto p2 = posterior_null_probs(rr, HypothesisSpec::leq(2.0));
        for (Eigen::Index j = 0; j < m; ++j)
            EXPECT_LE(p1[static_cast<std::size_t>(j)], p2[static_cast<std::size_t>(j)]);
        const auto d1 = rule_r1(p1, 0.1), d2 = rule_r1(p2, 0.1);
        for (std::size_t j = 0; j < p1.size(); ++j)
            EXPECT_TRUE(!d2.delta[j] || d1.delta[j]) << j;
    }
}

TEST(Rules, Dispatch)
{
    EXPECT_EQ(parse_rule("R2"), Rule::r2);
    EXPECT_THROW(parse_rule("r4"), ConfigError);
    EXPECT_EQ(apply_rule(Rule::r3, {0.1, 0.2}, 0.35).rejections, 2u);
    EXPECT_EQ(rule_name(Rule::r1), "r1");
}

TEST(MultiCategory, Precedence)
{
    EXPECT_EQ(categorize({false, false, false, true, true}, 0.5, 2).category, Category::inc2x);
    EXPECT_EQ(categorize({true, false, false, true, false}, 0.5, 2).category, Category::no_change_some_inc);
    EXPECT_EQ(categorize({true, false, true, false, false}, 0.5, 2).category, Category::no_change_some_dec);
    EXPECT_EQ(categorize({false, false, false, false, false}, 0.5, 2).category, Category::inconclusive);
    EXPECT_EQ(categorize({true, false, false, false, false}, 0.5, 2).category, Category::no_change);
    EXPECT_EQ(categorize({false, true, true, false, false}, 0.5, 2).category, Category::dec2x);
    EXPECT_EQ(categorize({false, false, false, true, false}, 0.5, 2).category, Category::inc);
    EXPECT_EQ(categorize({false, false, true, false, false}, 0.5, 2).category, Category::dec);
    const auto bad = categorize({false, false, true, true, false}, 0.5, 2);
    EXPECT_TRUE(bad.contradictory);
    EXPECT_EQ(bad.category, Category::inconclusive);
    EXPECT_EQ(category_name(Category::no_change_some_inc), "no-change-some-inc");
}

TEST(MultiCategory, EndToEnd)
{
    // Region 0 is far above 2, region 1 sits at 1, region 2 is diffuse.
    Rng rng = make_rng(9);
    Eigen::MatrixXd rr(2000, 3);
    for (Eigen::Index t = 0; t < rr.rows(); ++t) {
        rr(t, 0) = std::exp(std::log(5.0) + 0.1 * draw_normal(rng));
        rr(t, 1) = std::exp(0.02 * draw_normal(rng));
        rr(t, 2) = std::exp(2.0 * draw_normal(rng));
    }
    const auto r = multi_category(rr, 0.8, 1.25, 0.1);
    EXPECT_EQ(r.categories[0].category, Category::inc2x);
    EXPECT_EQ(r.categories[1].category, Category::no_change);
    EXPECT_EQ(r.categories[2].category, Category::inconclusive);
    EXPECT_THROW(multi_category(rr, 1.2, 2, 0.1), DomainError);
}
