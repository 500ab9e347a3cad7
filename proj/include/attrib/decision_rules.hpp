#pragma once

// Bayesian decision rules on posterior null probabilities.
//
//   R1: reject the r smallest pi with cumulative mean <= alpha (posterior FDR)
//   R2: reject pi < 1 / (lambda2 + 1)                          (weighted loss)
//   R3: reject the r smallest pi with cumulative sum <= gamma  (posterior FD)
//
// All three are threshold rules on pi. Ties in pi are ordered by region index.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "attrib/core.hpp"
#include "attrib/errors.hpp"

namespace attrib {

enum class Rule { r1, r2, r3 };

inline std::string rule_name(Rule r)
{
    switch (r) {
    case Rule::r1:
        return "r1";
    case Rule::r2:
        return "r2";
    case Rule::r3:
        return "r3";
    }
    return {};
}

inline Rule parse_rule(const std::string& s)
{
    if (s == "r1" || s == "R1")
        return Rule::r1;
    if (s == "r2" || s == "R2")
        return Rule::r2;
    if (s == "r3" || s == "R3")
        return Rule::r3;
    throw ConfigError("unknown rule '" + s + "' (expected r1, r2 or r3)");
}

struct PosteriorSummaries {
    double fdr = 0.0;
    double fnr = 0.0;
    double fd = 0.0;
    double fn = 0.0;
};

struct DecisionOutcome {
    std::vector<bool> delta;
    Rule rule = Rule::r1;
    double threshold = 0.0; // pi_(r+1), or 1/(lambda2+1) for R2
    std::size_t rejections = 0;
    PosteriorSummaries summary;
};

inline void validate_pi(const std::vector<double>& pi)
{
    for (double v : pi)
        if (!(v >= 0.0 && v <= 1.0))
            throw DomainError("posterior null probability outside [0, 1]");
}

// pi_i = fraction of draws of RR_i inside the null. `rr_draws` is S x M.
inline std::vector<double> posterior_null_probs(const Eigen::MatrixXd& rr_draws, const HypothesisSpec& spec)
{
    if (rr_draws.rows() == 0 || rr_draws.cols() == 0)
        throw DataError("no posterior draws");
    spec.validate();
    std::vector<double> pi(static_cast<std::size_t>(rr_draws.cols()), 0.0);
    for (Eigen::Index j = 0; j < rr_draws.cols(); ++j) {
        long hits = 0;
        for (Eigen::Index s = 0; s < rr_draws.rows(); ++s)
            hits += null_indicator(spec, rr_draws(s, j));
        pi[static_cast<std::size_t>(j)] = static_cast<double>(hits) / static_cast<double>(rr_draws.rows());
    }
    return pi;
}

inline std::vector<double> posterior_null_probs(const std::vector<std::vector<double>>& rr_draws,
                                                const HypothesisSpec& spec)
{
    if (rr_draws.empty())
        throw DataError("no posterior draws");
    const std::size_t s = rr_draws.front().size();
    if (s == 0)
        throw DataError("region with no posterior draws");
    std::vector<double> pi;
    pi.reserve(rr_draws.size());
    for (const auto& region : rr_draws) {
        if (region.size() != s)
            throw DimensionError("regions have different draw counts");
        long hits = 0;
        for (double rr : region)
            hits += null_indicator(spec, rr);
        pi.push_back(static_cast<double>(hits) / static_cast<double>(s));
    }
    return pi;
}

inline PosteriorSummaries posterior_summaries(const std::vector<bool>& delta, const std::vector<double>& pi)
{
    if (delta.size() != pi.size())
        throw DimensionError("decision and probability vectors differ in length");
    double fd = 0.0, fn = 0.0, rejected = 0.0;
    for (std::size_t i = 0; i < pi.size(); ++i) {
        if (delta[i]) {
            fd += pi[i];
            rejected += 1.0;
        } else {
            fn += 1.0 - pi[i];
        }
    }
    const double m = static_cast<double>(pi.size());
    PosteriorSummaries s;
    s.fd = fd;
    s.fn = fn;
    s.fdr = fd / std::max(1.0, rejected);
    s.fnr = fn / std::max(1.0, m - rejected);
    return s;
}

// Indices sorted by ascending pi, ties by index.
inline std::vector<std::size_t> ascending_order(const std::vector<double>& pi)
{
    std::vector<std::size_t> order(pi.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pi[a] < pi[b]; });
    return order;
}

namespace detail {

inline DecisionOutcome reject_prefix(const std::vector<double>& pi, const std::vector<std::size_t>& order,
                                     std::size_t r, Rule rule)
{
    DecisionOutcome out;
    out.rule = rule;
    out.delta.assign(pi.size(), false);
    for (std::size_t j = 0; j < r; ++j)
        out.delta[order[j]] = true;
    out.rejections = r;
    out.threshold = r < pi.size() ? pi[order[r]] : 1.0;
    out.summary = posterior_summaries(out.delta, pi);
    return out;
}

} // namespace detail

inline DecisionOutcome rule_r1(const std::vector<double>& pi, double alpha)
{
    validate_pi(pi);
    if (!(alpha > 0.0 && alpha < 1.0))
        throw DomainError("alpha must lie in (0, 1)");
    const auto order = ascending_order(pi);
    std::size_t r = 0;
    double cumulative = 0.0;
    for (std::size_t j = 1; j <= order.size(); ++j) {
        cumulative += pi[order[j - 1]];
        if (cumulative / static_cast<double>(j) <= alpha)
            r = j;
    }
    return detail::reject_prefix(pi, order, r, Rule::r1);
}

inline DecisionOutcome rule_r2(const std::vector<double>& pi, double lambda2)
{
    validate_pi(pi);
    if (!(lambda2 > 0.0))
        throw DomainError("lambda2 must be positive");
    const double t = 1.0 / (lambda2 + 1.0);
    DecisionOutcome out;
    out.rule = Rule::r2;
    out.threshold = t;
    out.delta.assign(pi.size(), false);
    for (std::size_t i = 0; i < pi.size(); ++i)
        if (pi[i] < t) {
            out.delta[i] = true;
            ++out.rejections;
        }
    out.summary = posterior_summaries(out.delta, pi);
    return out;
}

inline DecisionOutcome rule_r3(const std::vector<double>& pi, double gamma)
{
    validate_pi(pi);
    if (!(gamma > 0.0))
        throw DomainError("gamma must be positive");
    const auto order = ascending_order(pi);
    std::size_t r = 0;
    double cumulative = 0.0;
    for (std::size_t j = 1; j <= order.size(); ++j) {
        cumulative += pi[order[j - 1]];
        if (cumulative <= gamma)
            r = j;
    }
    return detail::reject_prefix(pi, order, r, Rule::r3);
}

// Dispatch on rule; `level` is alpha, lambda2 or gamma respectively.
inline DecisionOutcome apply_rule(Rule rule, const std::vector<double>& pi, double level)
{
    switch (rule) {
    case Rule::r1:
        return rule_r1(pi, level);
    case Rule::r2:
        return rule_r2(pi, level);
    case Rule::r3:
        return rule_r3(pi, level);
    }
    throw ConfigError("unknown rule");
}

// ============================================================================
// MULTI-CATEGORY CLASSIFICATION
// ============================================================================

enum class Category {
    dec2x,
    dec,
    no_change,
    no_change_some_dec,
    no_change_some_inc,
    inc,
    inc2x,
    inconclusive,
};

inline std::string category_name(Category c)
{
    switch (c) {
    case Category::dec2x:
        return "dec2x";
    case Category::dec:
        return "dec";
    case Category::no_change:
        return "no-change";
    case Category::no_change_some_dec:
        return "no-change-some-dec";
    case Category::no_change_some_inc:
        return "no-change-some-inc";
    case Category::inc:
        return "inc";
    case Category::inc2x:
        return "inc2x";
    case Category::inconclusive:
        return "inconclusive";
    }
    return {};
}

// The five null families:
//   h1: RR <= l or RR >= u   (rejecting it: no change)
//   h2: RR >= 1/2            (decrease by a factor of two)
//   h3: RR >= 1              (decrease)
//   h4: RR <= 1              (increase)
//   h5: RR <= 2              (increase by a factor of two)
inline std::array<HypothesisSpec, 5> multi_category_hypotheses(double l_absence, double u_absence)
{
    return {HypothesisSpec::outside(l_absence, u_absence), HypothesisSpec::geq(0.5), HypothesisSpec::geq(1.0),
            HypothesisSpec::leq(1.0), HypothesisSpec::leq(2.0)};
}

struct CategoryDecision {
    Category category = Category::inconclusive;
    bool contradictory = false;
};

// Maps one region's rejection pattern to a category. Precedence:
// factor-of-two statements, then no-change combinations, then direction.
inline CategoryDecision categorize(const std::array<bool, 5>& rejected, double l_absence, double u_absence)
{
    const bool h1 = rejected[0], h2 = rejected[1], h3 = rejected[2], h4 = rejected[3], h5 = rejected[4];
    CategoryDecision out;
    const bool decrease = h2 || h3;
    const bool increase = h4 || h5;
    const bool disjoint_2x = (h1 && h5 && u_absence <= 2.0) || (h1 && h2 && l_absence >= 0.5);
    if ((decrease && increase) || disjoint_2x) {
        out.contradictory = true;
        return out;
    }
    if (h5)
        out.category = Category::inc2x;
    else if (h2)
        out.category = Category::dec2x;
    else if (h1 && h4)
        out.category = Category::no_change_some_inc;
    else if (h1 && h3)
        out.category = Category::no_change_some_dec;
    else if (h1)
        out.category = Category::no_change;
    else if (h4)
        out.category = Category::inc;
    else if (h3)
        out.category = Category::dec;
    return out;
}

struct MultiCategoryResult {
    std::array<std::vector<double>, 5> pi;      // per family, per region
    std::array<DecisionOutcome, 5> decisions;   // R1 per family
    std::vector<CategoryDecision> categories;   // per region
};

// Runs R1 separately per hypothesis family, then categorizes each region.
inline MultiCategoryResult multi_category(const Eigen::MatrixXd& rr_draws, double l_absence, double u_absence,
                                          double alpha)
{
    if (!(l_absence > 0.0 && l_absence < 1.0 && u_absence > 1.0))
        throw DomainError("multi-category classification needs 0 < l < 1 < u");
    const auto hyps = multi_category_hypotheses(l_absence, u_absence);
    MultiCategoryResult out;
    for (std::size_t h = 0; h < 5; ++h) {
        out.pi[h] = posterior_null_probs(rr_draws, hyps[h]);
        out.decisions[h] = rule_r1(out.pi[h], alpha);
    }
    const std::size_t m = out.pi[0].size();
    out.categories.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        std::array<bool, 5> rejected{};
        for (std::size_t h = 0; h < 5; ++h)
            rejected[h] = out.decisions[h].delta[i];
        out.categories[i] = categorize(rejected, l_absence, u_absence);
    }
    return out;
}

} // namespace attrib
