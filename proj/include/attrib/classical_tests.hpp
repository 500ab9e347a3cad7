#pragma once

// Frequentist baselines: likelihood-ratio test for H: p_F / p_C <= c and the
// Benjamini-Hochberg / Bonferroni multiplicity procedures.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "attrib/errors.hpp"

namespace attrib {

namespace detail {

inline double xlogy(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); }

// Two-binomial log likelihood (without binomial coefficients).
inline double two_binomial_loglik(int z_f, int n_f, int z_c, int n_c, double p_f, double p_c)
{
    return xlogy(z_f, p_f) + xlogy(n_f - z_f, 1.0 - p_f) + xlogy(z_c, p_c) + xlogy(n_c - z_c, 1.0 - p_c);
}

} // namespace detail

// Restricted MLE of p_C on the boundary p_F = c p_C. Roots of
//   c N p^2 - [c (n_F + z_C) + n_C + z_F] p + (z_F + z_C) = 0.
inline double lrt_boundary_pc(int z_f, int n_f, int z_c, int n_c, double c)
{
    const double big_n = n_f + n_c;
    const double qa = c * big_n;
    const double qb = -(c * (n_f + z_c) + n_c + z_f);
    const double qc = z_f + z_c;
    const double disc = std::max(0.0, qb * qb - 4.0 * qa * qc);
    const double sq = std::sqrt(disc);
    // Numerically stable pair of roots.
    const double q = -0.5 * (qb - sq); // qb < 0, so q > 0
    const double upper = std::min(1.0, 1.0 / c);
    // The endpoint p_C = min(1, 1/c) is the optimum when z_F = n_F (c > 1) or
    // z_C = n_C (c <= 1); rounding can push that root just past it.
    const double roots[3] = {qc / q, q / qa, upper};
    double best = std::numeric_limits<double>::quiet_NaN();
    double best_ll = -std::numeric_limits<double>::infinity();
    for (double r : roots) {
        if (!(r > 0.0 && r <= upper))
            continue;
        const double ll = detail::two_binomial_loglik(z_f, n_f, z_c, n_c, c * r, r);
        if (ll > best_ll) {
            best = r;
            best_ll = ll;
        }
    }
    if (std::isnan(best))
        throw NumericalError("no admissible restricted MLE root");
    return best;
}

// -2 log lambda for H: p_F <= c p_C. Zero when the unrestricted MLE is
// already inside the null.
inline double lrt_statistic(int z_f, int n_f, int z_c, int n_c, double c)
{
    if (n_f <= 0 || n_c <= 0 || z_f < 0 || z_c < 0 || z_f > n_f || z_c > n_c)
        throw DomainError("invalid count table");
    if (!(c > 0.0))
        throw DomainError("ratio threshold must be positive");
    const double pf_hat = static_cast<double>(z_f) / n_f;
    const double pc_hat = static_cast<double>(z_c) / n_c;
    if (pf_hat <= c * pc_hat)
        return 0.0;
    const double pc_tilde = lrt_boundary_pc(z_f, n_f, z_c, n_c, c);
    const double ll_full = detail::two_binomial_loglik(z_f, n_f, z_c, n_c, pf_hat, pc_hat);
    const double ll_null = detail::two_binomial_loglik(z_f, n_f, z_c, n_c, c * pc_tilde, pc_tilde);
    return std::max(0.0, 2.0 * (ll_full - ll_null));
}

// Upper-tail chi-square(1) probability.
inline double lrt_pvalue(double stat)
{
    if (!(stat >= 0.0))
        throw DomainError("LRT statistic must be non-negative");
    return std::erfc(std::sqrt(0.5 * stat));
}

inline void validate_pvalues(const std::vector<double>& p)
{
    for (double v : p)
        if (!(v >= 0.0 && v <= 1.0))
            throw DomainError("p-value outside [0, 1]");
}

// Benjamini-Hochberg step-up. Ties are ordered by region index.
inline std::vector<bool> bh_procedure(const std::vector<double>& p, double alpha)
{
    validate_pvalues(p);
    const std::size_t m = p.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    std::size_t k = 0;
    for (std::size_t j = 1; j <= m; ++j)
        if (p[order[j - 1]] <= static_cast<double>(j) * alpha / static_cast<double>(m))
            k = j;
    std::vector<bool> reject(m, false);
    for (std::size_t j = 0; j < k; ++j)
        reject[order[j]] = true;
    return reject;
}

inline std::vector<bool> bonferroni_procedure(const std::vector<double>& p, double alpha)
{
    validate_pvalues(p);
    std::vector<bool> reject(p.size(), false);
    const double cut = alpha / static_cast<double>(p.size());
    for (std::size_t i = 0; i < p.size(); ++i)
        reject[i] = p[i] <= cut;
    return reject;
}

} // namespace attrib
