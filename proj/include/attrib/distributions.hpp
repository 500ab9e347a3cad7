#pragma once

// Density and sampling kernels: skew-t in the centered parameterization,
// generalized double Pareto, Matern correlation and beta-binomial updates.

#include <cmath>
#include <limits>
#include <utility>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/bessel.hpp>

#include "attrib/errors.hpp"
#include "attrib/random.hpp"

namespace attrib {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

// ============================================================================
// SKEW-T
// ============================================================================

// Centered parameters: location, scale, skewness in (-1, 1), degrees of freedom.
struct SkewTParams {
    double mu = 0.0;
    double sigma = 1.0;
    double delta = 0.0;
    double nu = 5.0;
};

// Direct (Azzalini) parameters.
struct SkewTDirect {
    double xi = 0.0;
    double omega = 1.0;
    double alpha = 0.0;
    double nu = 5.0;
};

inline SkewTDirect skewt_centered_to_direct(const SkewTParams& p)
{
    if (!(std::abs(p.delta) < 1.0))
        throw DomainError("skew-t skewness must lie in (-1, 1)");
    if (!(p.sigma > 0.0))
        throw DomainError("skew-t scale must be positive");
    if (!(p.nu > 0.0))
        throw DomainError("skew-t degrees of freedom must be positive");
    const double b = std::sqrt(2.0 / kPi);
    const double omega = p.sigma / std::sqrt(1.0 - (2.0 / kPi) * p.delta * p.delta);
    SkewTDirect d;
    d.omega = omega;
    d.xi = p.mu - omega * b * p.delta;
    d.alpha = p.delta / std::sqrt(1.0 - p.delta * p.delta);
    d.nu = p.nu;
    return d;
}

namespace detail {

using FastPolicy = boost::math::policies::policy<boost::math::policies::promote_double<false>>;
using StudentT = boost::math::students_t_distribution<double, FastPolicy>;

inline double student_t_logpdf_std(double x, double nu, double log_norm)
{
    return log_norm - 0.5 * (nu + 1.0) * std::log1p(x * x / nu);
}

inline double student_t_log_norm(double nu)
{
    return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * kPi);
}

// log T_nu(w) that stays finite deep in the lower tail.
inline double student_t_log_cdf(double w, double nu, const StudentT& dist)
{
    if (w >= 0.0)
        return std::log1p(-boost::math::cdf(boost::math::complement(dist, w)));
    const double tail = boost::math::cdf(dist, w);
    if (tail > 1e-290)
        return std::log(tail);
    // Leading-order tail asymptotic: T(w) ~ t(w) (nu + w^2) / ((nu + 1)|w|).
    const double log_t = student_t_logpdf_std(w, nu, student_t_log_norm(nu));
    return log_t + std::log(nu + w * w) - std::log((nu + 1.0) * std::abs(w));
}

} // namespace detail

// Skew-t log density with constants precomputed for repeated evaluation at
// fixed parameters.
class SkewTKernel {
public:
    explicit SkewTKernel(const SkewTParams& p)
        : direct_(skewt_centered_to_direct(p)), cdf_dist_(p.nu + 1.0)
    {
        log_norm_ = detail::student_t_log_norm(direct_.nu);
        log_two_over_omega_ = std::log(2.0 / direct_.omega);
    }

    double logpdf(double x) const
    {
        const double z = (x - direct_.xi) / direct_.omega;
        const double nu = direct_.nu;
        const double w = direct_.alpha * z * std::sqrt((nu + 1.0) / (nu + z * z));
        return log_two_over_omega_ + detail::student_t_logpdf_std(z, nu, log_norm_) +
               detail::student_t_log_cdf(w, nu + 1.0, cdf_dist_);
    }

    const SkewTDirect& direct() const { return direct_; }

private:
    SkewTDirect direct_;
    detail::StudentT cdf_dist_;
    double log_norm_ = 0.0;
    double log_two_over_omega_ = 0.0;
};

inline double skewt_logpdf(double x, const SkewTParams& p)
{
    return SkewTKernel(p).logpdf(x);
}

// Scaled skew-normal over sqrt(chi^2_nu / nu).
inline double sample_skewt(Rng& rng, const SkewTParams& p)
{
    const SkewTDirect d = skewt_centered_to_direct(p);
    const double delta = d.alpha / std::sqrt(1.0 + d.alpha * d.alpha);
    const double u0 = draw_normal(rng);
    const double u1 = draw_normal(rng);
    const double sn = delta * std::abs(u0) + std::sqrt(1.0 - delta * delta) * u1;
    const double w = draw_chi_squared(rng, d.nu) / d.nu;
    return d.xi + d.omega * sn / std::sqrt(w);
}

// Exact mean of the skew-t; requires nu > 1.
inline double skewt_mean(const SkewTParams& p)
{
    const SkewTDirect d = skewt_centered_to_direct(p);
    if (!(d.nu > 1.0))
        return std::numeric_limits<double>::quiet_NaN();
    const double b_nu =
        std::sqrt(d.nu / kPi) * std::exp(std::lgamma(0.5 * (d.nu - 1.0)) - std::lgamma(0.5 * d.nu));
    return d.xi + d.omega * p.delta * b_nu;
}

// ============================================================================
// GENERALIZED DOUBLE PARETO
// ============================================================================

struct GdpParams {
    double s = 1.0; // shape
    double r = 1.0; // rate
};

// Normalized density (s / 2r) (1 + |x|/r)^-(s+1).
inline double gdp_logpdf(double x, const GdpParams& p)
{
    return std::log(p.s / (2.0 * p.r)) - (p.s + 1.0) * std::log1p(std::abs(x) / p.r);
}

// Gamma-Exponential-Normal scale mixture: U ~ Gamma(s, rate r),
// V ~ Exp(rate U^2 / 2), X ~ N(0, V).
inline double sample_gdp(Rng& rng, const GdpParams& p)
{
    const double u = draw_gamma(rng, p.s, 1.0 / p.r);
    std::exponential_distribution<double> expo(0.5 * u * u);
    const double v = expo(rng);
    return std::sqrt(v) * draw_normal(rng);
}

// ============================================================================
// MATERN
// ============================================================================

// Matern correlation 2^(1-nu)/Gamma(nu) x^nu K_nu(x), x = d / phi.
inline double matern_correlation(double d, double phi, double nu_smooth)
{
    if (d < 0.0)
        throw DomainError("distance must be non-negative");
    if (!(phi > 0.0) || !(nu_smooth > 0.0))
        throw DomainError("Matern range and smoothness must be positive");
    const double x = d / phi;
    if (x == 0.0)
        return 1.0;
    if (nu_smooth == 0.5)
        return std::exp(-x);
    if (nu_smooth == 1.5)
        return (1.0 + x) * std::exp(-x);
    if (nu_smooth == 2.5)
        return (1.0 + x + x * x / 3.0) * std::exp(-x);
    if (x < 1e-12)
        return 1.0;
    if (x > 700.0)
        return 0.0;
    // log-space keeps x^nu K_nu(x) stable for small x.
    const double log_val = (1.0 - nu_smooth) * std::log(2.0) - std::lgamma(nu_smooth) + nu_smooth * std::log(x) +
                           std::log(boost::math::cyl_bessel_k(nu_smooth, x));
    return std::min(1.0, std::exp(log_val));
}

// ============================================================================
// BETA-BINOMIAL
// ============================================================================

struct BetaParams {
    double a = 1.0;
    double b = 1.0;
    double mean() const { return a / (a + b); }
};

inline BetaParams beta_binomial_posterior(int z, int n, double a, double b)
{
    if (z < 0 || z > n)
        throw DomainError("beta-binomial update needs 0 <= z <= n");
    if (!(a > 0.0) || !(b > 0.0))
        throw DomainError("beta prior parameters must be positive");
    return {z + a, n - z + b};
}

// Binomial log pmf with the convention 0 * log 0 = 0.
inline double binomial_logpmf(int z, int n, double p)
{
    const double coef = std::lgamma(n + 1.0) - std::lgamma(z + 1.0) - std::lgamma(n - z + 1.0);
    const double a = z == 0 ? 0.0 : z * std::log(p);
    const double b = z == n ? 0.0 : (n - z) * std::log1p(-p);
    return coef + a + b;
}

inline double normal_logpdf(double x, double mean, double sd)
{
    const double z = (x - mean) / sd;
    return -kLogSqrt2Pi - std::log(sd) - 0.5 * z * z;
}

} // namespace attrib
