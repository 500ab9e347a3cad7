#pragma once

// Reference computations used by the tests. Each one avoids the code path it
// checks: brute-force enumeration, direct quadrature, golden-section search,
// explicit mixture sampling and integral representations.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>

namespace oracle {

inline constexpr double kPi = 3.14159265358979323846;

// Integral of f over the real line. Each half-line is mapped through
// x = e^t - 1 so polynomial tails become exponential ones.
inline double integrate_real_line(const std::function<double(double)>& f)
{
    boost::math::quadrature::gauss_kronrod<double, 61> gk;
    const double inf = std::numeric_limits<double>::infinity();
    auto half = [&](double sign) {
        return gk.integrate(
            [&](double t) { return t > 700.0 ? 0.0 : f(sign * std::expm1(t)) * std::exp(t); }, 0.0, inf, 20, 1e-13);
    };
    return half(-1.0) + half(1.0);
}

inline double integrate(const std::function<double(double)>& f, double a, double b)
{
    boost::math::quadrature::tanh_sinh<double> ts;
    return ts.integrate(f, a, b);
}

// ---------------------------------------------------------------------------
// Step-up rules by enumeration of every prefix length.
// ---------------------------------------------------------------------------

inline std::vector<std::size_t> sorted_index(const std::vector<double>& v)
{
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        idx[i] = i;
    // insertion sort: stable, independent of std::stable_sort
    for (std::size_t i = 1; i < idx.size(); ++i)
        for (std::size_t j = i; j > 0 && v[idx[j]] < v[idx[j - 1]]; --j)
            std::swap(idx[j], idx[j - 1]);
    return idx;
}

// Largest j whose prefix statistic passes; the statistic is recomputed from
// scratch for every j.
inline std::vector<bool> step_up(const std::vector<double>& v,
                                 const std::function<bool(const std::vector<double>&)>& passes)
{
    const auto idx = sorted_index(v);
    std::size_t best = 0;
    for (std::size_t j = 1; j <= v.size(); ++j) {
        std::vector<double> prefix;
        for (std::size_t i = 0; i < j; ++i)
            prefix.push_back(v[idx[i]]);
        if (passes(prefix))
            best = j;
    }
    std::vector<bool> out(v.size(), false);
    for (std::size_t i = 0; i < best; ++i)
        out[idx[i]] = true;
    return out;
}

inline std::vector<bool> r1(const std::vector<double>& pi, double alpha)
{
    return step_up(pi, [&](const std::vector<double>& p) {
        long double s = 0;
        for (double x : p)
            s += x;
        return static_cast<double>(s) / static_cast<double>(p.size()) <= alpha;
    });
}

inline std::vector<bool> r3(const std::vector<double>& pi, double gamma)
{
    return step_up(pi, [&](const std::vector<double>& p) {
        double s = 0;
        for (double x : p)
            s += x;
        return s <= gamma;
    });
}

inline std::vector<bool> bh(const std::vector<double>& p, double alpha)
{
    const double m = static_cast<double>(p.size());
    return step_up(p, [&](const std::vector<double>& pre) {
        return pre.back() <= static_cast<double>(pre.size()) * alpha / m;
    });
}

// ---------------------------------------------------------------------------
// Binomial likelihood and LRT by golden-section search on the boundary.
// ---------------------------------------------------------------------------

inline double binom_ll(int z, int n, double p)
{
    double v = 0.0;
    if (z > 0)
        v += z * std::log(p);
    if (n - z > 0)
        v += (n - z) * std::log(1.0 - p);
    return v;
}

inline double golden_max(const std::function<double(double)>& f, double lo, double hi)
{
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double x1 = b - g * (b - a), x2 = a + g * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 300 && b - a > 1e-15; ++it) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        }
    }
    return 0.5 * (a + b);
}

inline double lrt(int zf, int nf, int zc, int nc, double c)
{
    const double pf = static_cast<double>(zf) / nf, pc = static_cast<double>(zc) / nc;
    if (pf <= c * pc)
        return 0.0;
    auto ll = [&](double q) { return binom_ll(zf, nf, c * q) + binom_ll(zc, nc, q); };
    const double hi = std::min(1.0, 1.0 / c);
    const double q = golden_max(ll, 1e-300, hi * (1.0 - 1e-15));
    const double full = binom_ll(zf, nf, pf) + binom_ll(zc, nc, pc);
    return std::max(0.0, 2.0 * (full - ll(q)));
}

// log C(n, z) p^z (1-p)^(n-z) by explicit products in long double.
inline double binom_logpmf(int z, int n, double p)
{
    long double logc = 0.0L;
    for (int i = 1; i <= z; ++i)
        logc += std::log(static_cast<long double>(n - z + i)) - std::log(static_cast<long double>(i));
    return static_cast<double>(logc) + binom_ll(z, n, p);
}

// ---------------------------------------------------------------------------
// Distributions
// ---------------------------------------------------------------------------

// Skew-t density straight from the Azzalini formula with direct parameters.
inline double skewt_pdf_direct(double x, double xi, double omega, double alpha, double nu)
{
    const double z = (x - xi) / omega;
    const double t = std::tgamma((nu + 1) / 2) / (std::tgamma(nu / 2) * std::sqrt(nu * kPi)) *
                     std::pow(1 + z * z / nu, -(nu + 1) / 2);
    const double w = alpha * z * std::sqrt((nu + 1) / (nu + z * z));
    // Student-t(nu + 1) CDF through the regularized incomplete beta.
    const double nu1 = nu + 1;
    const double ib = boost::math::ibeta(nu1 / 2, 0.5, nu1 / (nu1 + w * w));
    const double cdf = w >= 0 ? 1.0 - 0.5 * ib : 0.5 * ib;
    return 2.0 / omega * t * cdf;
}

// GDP(s, r) draws by the Gamma-Exponential-Normal construction.
inline std::vector<double> gdp_mixture_sample(double s, double r, std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::gamma_distribution<double> gam(s, 1.0 / r);
    std::normal_distribution<double> norm(0.0, 1.0);
    std::vector<double> out(n);
    for (auto& x : out) {
        const double u = gam(rng);
        std::exponential_distribution<double> ex(u * u / 2.0);
        x = std::sqrt(ex(rng)) * norm(rng);
    }
    return out;
}

// Gaussian kernel density estimate at x.
inline double kde(const std::vector<double>& sorted, double x, double h)
{
    const auto lo = std::lower_bound(sorted.begin(), sorted.end(), x - 8 * h);
    const auto hi = std::upper_bound(sorted.begin(), sorted.end(), x + 8 * h);
    double s = 0.0;
    for (auto it = lo; it != hi; ++it) {
        const double u = (x - *it) / h;
        s += std::exp(-0.5 * u * u);
    }
    return s / (static_cast<double>(sorted.size()) * h * std::sqrt(2 * kPi));
}

// K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt.
inline double bessel_k(double nu, double x)
{
    return integrate([&](double t) { return std::exp(-x * std::cosh(t)) * std::cosh(nu * t); }, 0.0, 40.0);
}

inline double matern(double d, double phi, double nu)
{
    if (d == 0.0)
        return 1.0;
    const double x = d / phi;
    return std::pow(2.0, 1 - nu) / std::tgamma(nu) * std::pow(x, nu) * bessel_k(nu, x);
}

// Two-sided KS distance between a sample and a CDF.
inline double ks_distance(std::vector<double> x, const std::function<double(double)>& cdf)
{
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf(x[i]);
        d = std::max({d, std::abs(f - i / n), std::abs((i + 1) / n - f)});
    }
    return d;
}

inline double beta_cdf(double x, double a, double b) { return boost::math::ibeta(a, b, x); }

// ---------------------------------------------------------------------------
// Scoring by confusion-matrix enumeration.
// ---------------------------------------------------------------------------

struct Confusion {
    int tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Confusion confusion(const std::vector<int>& theta, const std::vector<bool>& delta)
{
    Confusion c;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        if (theta[i] && delta[i])
            ++c.tp;
        else if (!theta[i] && delta[i])
            ++c.fp;
        else if (theta[i] && !delta[i])
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

} // namespace oracle
