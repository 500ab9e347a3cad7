#pragma once

// Hierarchical binomial models M1-M9 and RNB:
//
//   z_ki ~ binomial(n_ki, p_ki),  logit p_ki = mu_k + beta_ki,  k in {F, C}
//
// with scenario-specific effect priors
//
//   M1   independent Beta(1, 1) on p_ki (closed form)
//   M2   beta_ki ~ N(0, tau_k^2)
//   M3   beta_ki ~ ST(0, sigma_k, delta_k, nu_k)
//   M4   intrinsic CAR(tau_k^2), mu_k fixed at 0
//   M5   Leroux precision tau_k^-2 [(1 - lambda_k) I + lambda_k Q]
//   M6   GP with exponential correlation, range phi_k
//   M7-9 beta_k = H_k alpha_k + xi_k, alpha ~ N(0, sigma_alpha^2), p = 30/10/50
//   RNB  beta_k = H_k alpha_k + xi_k, alpha ~ GDP(1, r), p = all EOFs
//
// EOF residuals xi_ki ~ ST(0, sigma_k, delta_k, nu_k). Hyperpriors are proper
// and diffuse: N(0, 10^2) means, U(0, 100) scales, U(-1, 1) skewness,
// U(0, 1) on 1/nu and lambda, U(0, c_phi) range, U(0, 100) GDP rate.

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "attrib/core.hpp"
#include "attrib/distributions.hpp"
#include "attrib/eof_basis.hpp"
#include "attrib/errors.hpp"

namespace attrib {

enum class ModelId { m1, m2, m3, m4, m5, m6, m7, m8, m9, rnb };

enum class EffectPrior { beta_binomial, gaussian, skew_t, car, leroux, gp, eof_gaussian, eof_gdp };

struct ModelSpec {
    ModelId id = ModelId::rnb;
    int eof_truncation = 0;        // 0 = all available EOFs
    double matern_smoothness = 0.5;
    double gdp_shape = 1.0;

    static ModelSpec make(ModelId id)
    {
        ModelSpec s;
        s.id = id;
        switch (id) {
        case ModelId::m7:
            s.eof_truncation = 30;
            break;
        case ModelId::m8:
            s.eof_truncation = 10;
            break;
        case ModelId::m9:
            s.eof_truncation = 50;
            break;
        default:
            break;
        }
        return s;
    }

    EffectPrior effect_prior() const
    {
        switch (id) {
        case ModelId::m1:
            return EffectPrior::beta_binomial;
        case ModelId::m2:
            return EffectPrior::gaussian;
        case ModelId::m3:
            return EffectPrior::skew_t;
        case ModelId::m4:
            return EffectPrior::car;
        case ModelId::m5:
            return EffectPrior::leroux;
        case ModelId::m6:
            return EffectPrior::gp;
        case ModelId::m7:
        case ModelId::m8:
        case ModelId::m9:
            return EffectPrior::eof_gaussian;
        case ModelId::rnb:
            return EffectPrior::eof_gdp;
        }
        return EffectPrior::gaussian;
    }

    bool uses_eof() const
    {
        const auto e = effect_prior();
        return e == EffectPrior::eof_gaussian || e == EffectPrior::eof_gdp;
    }
    bool uses_adjacency() const
    {
        const auto e = effect_prior();
        return e == EffectPrior::car || e == EffectPrior::leroux;
    }
    bool uses_centroids() const { return effect_prior() == EffectPrior::gp; }
    bool fixes_mean() const { return id == ModelId::m4; }
    bool uses_skewt() const
    {
        const auto e = effect_prior();
        return e == EffectPrior::skew_t || uses_eof();
    }

    void validate() const
    {
        if (id == ModelId::m6 && matern_smoothness != 0.5)
            throw ConfigError("M6 is fitted with Matern smoothness 0.5");
        if (id == ModelId::rnb && gdp_shape != 1.0)
            throw ConfigError("RNB fixes the GDP shape at s = 1");
        if ((id == ModelId::m7 || id == ModelId::m8 || id == ModelId::m9) && eof_truncation <= 0)
            throw ConfigError("EOF truncation must be positive for M7-M9");
        if (!uses_eof() && eof_truncation != 0)
            throw ConfigError("EOF truncation only applies to EOF models");
    }
};

inline std::string model_name(ModelId id)
{
    static const char* names[] = {"m1", "m2", "m3", "m4", "m5", "m6", "m7", "m8", "m9", "rnb"};
    return names[static_cast<int>(id)];
}

inline ModelId parse_model(std::string s)
{
    for (auto& ch : s)
        ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    for (int i = 0; i <= static_cast<int>(ModelId::rnb); ++i)
        if (model_name(static_cast<ModelId>(i)) == s)
            return static_cast<ModelId>(i);
    throw ConfigError("unknown model '" + s + "' (expected m1..m9 or rnb)");
}

enum Scenario : int { kFactual = 0, kCounterfactual = 1 };

// Per-scenario parameter block; only the fields the model uses are read.
struct ScenarioParams {
    double mu = 0.0;
    Eigen::VectorXd beta;  // region effects (M2-M6)
    Eigen::VectorXd alpha; // EOF coefficients (M7-M9, RNB)
    Eigen::VectorXd xi;    // EOF residuals (M7-M9, RNB)
    double tau = 0.5;
    double lambda = 0.5;
    double phi = 0.1;
    double sigma = 0.5;
    double delta = 0.0;
    double inv_nu = 0.25;
    double sigma_alpha = 0.5;

    SkewTParams skewt() const { return {0.0, sigma, delta, 1.0 / inv_nu}; }
};

struct ParamVector {
    std::array<ScenarioParams, 2> scenario;
    double r = 1.0; // GDP rate, shared by both scenarios
};

// ============================================================================
// PRECISION / COVARIANCE BUILDERS
// ============================================================================

// Intrinsic CAR structure Q = D - A.
inline Eigen::MatrixXd car_structure(const RegionSet& regions)
{
    const auto m = static_cast<Eigen::Index>(regions.size());
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& nb = regions.adjacency.at(static_cast<std::size_t>(i));
        q(i, i) = static_cast<double>(nb.size());
        for (std::size_t j : nb)
            q(i, static_cast<Eigen::Index>(j)) = -1.0;
    }
    return q;
}

// Nonzero eigenvalues of an intrinsic CAR structure matrix (M - 1 of them).
// Throws when the graph is disconnected.
inline Eigen::VectorXd car_nonzero_eigenvalues(const Eigen::MatrixXd& q)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(q, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
        throw NumericalError("CAR eigen-decomposition failed");
    const Eigen::VectorXd ev = solver.eigenvalues(); // ascending
    const double tol = 1e-9 * std::max(1.0, ev.cwiseAbs().maxCoeff());
    Eigen::Index zeros = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (std::abs(ev(i)) <= tol)
            ++zeros;
    if (zeros != 1)
        throw DataError("CAR prior needs a connected adjacency graph (found " + std::to_string(zeros) +
                        " components)");
    return ev.tail(ev.size() - 1);
}

// Intrinsic CAR log density on the (M-1)-dimensional contrast space:
//   -(M-1)/2 log(2 pi tau2) + 1/2 sum log lambda_i - beta' Q beta / (2 tau2)
inline double car_log_density(const Eigen::VectorXd& beta, double tau2, const Eigen::MatrixXd& q,
                              const Eigen::VectorXd& nonzero_eigenvalues)
{
    const double m1 = static_cast<double>(beta.size() - 1);
    return -0.5 * m1 * std::log(2.0 * kPi * tau2) + 0.5 * nonzero_eigenvalues.array().log().sum() -
           beta.dot(q * beta) / (2.0 * tau2);
}

inline double car_log_density(const Eigen::VectorXd& beta, double tau2, const Eigen::MatrixXd& q)
{
    return car_log_density(beta, tau2, q, car_nonzero_eigenvalues(q));
}

inline Eigen::MatrixXd leroux_precision(double lambda, double tau2, const Eigen::MatrixXd& q)
{
    if (!(lambda >= 0.0 && lambda < 1.0))
        throw DomainError("Leroux lambda must lie in [0, 1)");
    if (!(tau2 > 0.0))
        throw DomainError("tau^2 must be positive");
    const auto m = q.rows();
    return ((1.0 - lambda) * Eigen::MatrixXd::Identity(m, m) + lambda * q) / tau2;
}

// tau2 * Matern(d_ij / phi). No jitter: callers add it before factorizing.
inline Eigen::MatrixXd gp_covariance(const Eigen::MatrixXd& distances, double tau2, double phi,
                                     double nu_smooth = 0.5)
{
    const auto m = distances.rows();
    Eigen::MatrixXd s(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        s(i, i) = tau2;
        for (Eigen::Index j = i + 1; j < m; ++j) {
            const double v = tau2 * matern_correlation(distances(i, j), phi, nu_smooth);
            s(i, j) = v;
            s(j, i) = v;
        }
    }
    return s;
}

inline Eigen::MatrixXd gp_covariance(const std::vector<Eigen::Vector3d>& centroids, double tau2, double phi,
                                     double nu_smooth = 0.5)
{
    RegionSet tmp;
    tmp.centroids = centroids;
    return gp_covariance(tmp.chord_distances(), tau2, phi, nu_smooth);
}

// Cholesky factor of a covariance after adding 1e-8 * scale to the diagonal.
inline Eigen::LLT<Eigen::MatrixXd> jittered_cholesky(const Eigen::MatrixXd& cov, double scale)
{
    Eigen::MatrixXd c = cov;
    c.diagonal().array() += 1e-8 * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() != Eigen::Success)
        throw NumericalError("covariance is not positive definite after jitter");
    return llt;
}

// ============================================================================
// MODEL CONTEXT
// ============================================================================

// Fixed inputs derived from regions and bases, shared across iterations.
struct ModelContext {
    std::size_t regions = 0;
    std::vector<std::vector<std::size_t>> neighbors;
    Eigen::MatrixXd car_q;
    Eigen::VectorXd car_eigenvalues;  // all eigenvalues of Q, ascending
    Eigen::VectorXd car_nonzero;      // the M - 1 nonzero ones
    Eigen::MatrixXd distances;
    double c_phi = 0.0;
    std::array<Eigen::MatrixXd, 2> basis; // per scenario, M x p
};

inline ModelContext make_context(const ModelSpec& spec, const RegionSet* regions, const EofBasis* basis_f,
                                 const EofBasis* basis_c, std::size_t m)
{
    spec.validate();
    ModelContext ctx;
    ctx.regions = m;
    if (spec.uses_adjacency()) {
        if (regions == nullptr || !regions->has_adjacency())
            throw DataError("model " + model_name(spec.id) + " requires an adjacency graph");
        if (regions->size() != m)
            throw DimensionError("region file has " + std::to_string(regions->size()) + " regions, counts have " +
                                 std::to_string(m));
        regions->validate(true);
        ctx.neighbors = regions->adjacency;
        ctx.car_q = car_structure(*regions);
        ctx.car_nonzero = car_nonzero_eigenvalues(ctx.car_q);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(ctx.car_q, Eigen::EigenvaluesOnly);
        ctx.car_eigenvalues = solver.eigenvalues().cwiseMax(0.0);
    }
    if (spec.uses_centroids()) {
        if (regions == nullptr || !regions->has_centroids())
            throw DataError("model " + model_name(spec.id) + " requires region centroids");
        if (regions->size() != m)
            throw DimensionError("region file has " + std::to_string(regions->size()) + " regions, counts have " +
                                 std::to_string(m));
        regions->validate();
        ctx.distances = regions->chord_distances();
        ctx.c_phi = 0.5 * ctx.distances.maxCoeff();
        if (!(ctx.c_phi > 0.0))
            throw DataError("region centroids are all identical");
    }
    if (spec.uses_eof()) {
        if (basis_f == nullptr || basis_c == nullptr)
            throw DataError("model " + model_name(spec.id) + " requires factual and counterfactual EOF bases");
        const EofBasis* bases[2] = {basis_f, basis_c};
        for (int k = 0; k < 2; ++k) {
            if (static_cast<std::size_t>(bases[k]->regions()) != m)
                throw DimensionError("EOF basis has " + std::to_string(bases[k]->regions()) +
                                     " rows, counts have " + std::to_string(m) + " regions");
            const Eigen::Index p = spec.eof_truncation > 0 ? spec.eof_truncation : bases[k]->count();
            ctx.basis[k] = bases[k]->truncated(p).vectors;
        }
    }
    return ctx;
}

// ============================================================================
// PARAMETERS -> PROBABILITIES
// ============================================================================

inline Eigen::VectorXd scenario_effects(const ModelSpec& spec, const ModelContext& ctx, const ParamVector& params,
                                        int k)
{
    const ScenarioParams& sp = params.scenario[k];
    if (spec.uses_eof())
        return ctx.basis[k] * sp.alpha + sp.xi;
    return sp.beta;
}

inline Eigen::VectorXd scenario_logits(const ModelSpec& spec, const ModelContext& ctx, const ParamVector& params,
                                       int k)
{
    const double mu = spec.fixes_mean() ? 0.0 : params.scenario[k].mu;
    return (scenario_effects(spec, ctx, params, k).array() + mu).matrix();
}

struct RegionProbs {
    Eigen::VectorXd p_f, p_c, rr;
};

inline RegionProbs build_region_probs(const ParamVector& params, const ModelSpec& spec, const ModelContext& ctx)
{
    if (spec.effect_prior() == EffectPrior::beta_binomial)
        throw ConfigError("M1 has no hierarchical parameters");
    RegionProbs out;
    out.p_f = scenario_logits(spec, ctx, params, kFactual).unaryExpr([](double x) { return inv_logit(x); });
    out.p_c = scenario_logits(spec, ctx, params, kCounterfactual).unaryExpr([](double x) { return inv_logit(x); });
    out.rr = out.p_f.cwiseQuotient(out.p_c);
    return out;
}

// ============================================================================
// LIKELIHOOD AND PRIOR
// ============================================================================

// Binomial log likelihood per region for logit eta: z eta - n log(1 + e^eta).
inline double logit_binomial_kernel(int z, int n, double eta)
{
    const double softplus = eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
    return z * eta - n * softplus;
}

// Sum of binomial log pmfs (with coefficients) over regions and scenarios.
inline double log_likelihood(const ScenarioCounts& counts, const Eigen::VectorXd& logit_f,
                             const Eigen::VectorXd& logit_c)
{
    if (static_cast<std::size_t>(logit_f.size()) != counts.size() ||
        static_cast<std::size_t>(logit_c.size()) != counts.size())
        throw DimensionError("parameter and count dimensions differ");
    double total = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const double coef_f =
            std::lgamma(counts.n_f[i] + 1.0) - std::lgamma(counts.z_f[i] + 1.0) - std::lgamma(counts.n_f[i] - counts.z_f[i] + 1.0);
        const double coef_c =
            std::lgamma(counts.n_c[i] + 1.0) - std::lgamma(counts.z_c[i] + 1.0) - std::lgamma(counts.n_c[i] - counts.z_c[i] + 1.0);
        total += coef_f + logit_binomial_kernel(counts.z_f[i], counts.n_f[i], logit_f(ii));
        total += coef_c + logit_binomial_kernel(counts.z_c[i], counts.n_c[i], logit_c(ii));
    }
    return total;
}

inline double log_likelihood(const ScenarioCounts& counts, const ParamVector& params, const ModelSpec& spec,
                             const ModelContext& ctx)
{
    return log_likelihood(counts, scenario_logits(spec, ctx, params, kFactual),
                          scenario_logits(spec, ctx, params, kCounterfactual));
}

namespace detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_uniform(double x, double lo, double hi)
{
    return (x > lo && x < hi) ? -std::log(hi - lo) : kNegInf;
}

} // namespace detail

inline constexpr double kMeanPriorSd = 10.0;
inline constexpr double kScalePriorUpper = 100.0;

// Leroux log density of beta given lambda and tau, using the eigenvalues of Q.
inline double leroux_log_density(const Eigen::VectorXd& beta, double lambda, double tau, const ModelContext& ctx)
{
    const auto m = static_cast<double>(beta.size());
    const double logdet =
        (1.0 - lambda + lambda * ctx.car_eigenvalues.array()).log().sum() - 2.0 * m * std::log(tau);
    const double quad = (1.0 - lambda) * beta.squaredNorm() + lambda * beta.dot(ctx.car_q * beta);
    return -0.5 * m * std::log(2.0 * kPi) + 0.5 * logdet - quad / (2.0 * tau * tau);
}

inline double gp_log_density(const Eigen::VectorXd& beta, double tau, double phi, const ModelContext& ctx,
                             double nu_smooth = 0.5)
{
    const Eigen::MatrixXd corr = gp_covariance(ctx.distances, 1.0, phi, nu_smooth);
    const auto llt = jittered_cholesky(corr, 1.0);
    const Eigen::MatrixXd l = llt.matrixL();
    const double logdet_corr = 2.0 * l.diagonal().array().log().sum();
    const auto m = static_cast<double>(beta.size());
    const double quad = beta.dot(llt.solve(beta));
    return -0.5 * m * std::log(2.0 * kPi) - m * std::log(tau) - 0.5 * logdet_corr - quad / (2.0 * tau * tau);
}

inline double skewt_sum_logpdf(const Eigen::VectorXd& x, const ScenarioParams& sp)
{
    const SkewTKernel kernel(sp.skewt());
    double total = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i)
        total += kernel.logpdf(x(i));
    return total;
}

// Sum of prior log densities; -inf outside the support.
inline double log_prior(const ModelSpec& spec, const ModelContext& ctx, const ParamVector& params)
{
    using detail::kNegInf;
    using detail::log_uniform;
    const EffectPrior prior = spec.effect_prior();
    if (prior == EffectPrior::beta_binomial)
        return 0.0; // Beta(1, 1) on each probability
    double total = 0.0;
    for (int k = 0; k < 2; ++k) {
        const ScenarioParams& sp = params.scenario[k];
        if (!spec.fixes_mean())
            total += normal_logpdf(sp.mu, 0.0, kMeanPriorSd);
        switch (prior) {
        case EffectPrior::gaussian: {
            total += log_uniform(sp.tau, 0.0, kScalePriorUpper);
            if (total == kNegInf)
                return kNegInf;
            for (Eigen::Index i = 0; i < sp.beta.size(); ++i)
                total += normal_logpdf(sp.beta(i), 0.0, sp.tau);
            break;
        }
        case EffectPrior::skew_t: {
            total += log_uniform(sp.sigma, 0.0, kScalePriorUpper) + log_uniform(sp.delta, -1.0, 1.0) +
                     log_uniform(sp.inv_nu, 0.0, 1.0);
            if (total == kNegInf)
                return kNegInf;
            total += skewt_sum_logpdf(sp.beta, sp);
            break;
        }
        case EffectPrior::car: {
            total += log_uniform(sp.tau, 0.0, kScalePriorUpper);
            if (total == kNegInf)
                return kNegInf;
            total += car_log_density(sp.beta, sp.tau * sp.tau, ctx.car_q, ctx.car_nonzero);
            break;
        }
        case EffectPrior::leroux: {
            total += log_uniform(sp.tau, 0.0, kScalePriorUpper);
            if (!(sp.lambda >= 0.0 && sp.lambda < 1.0)) // [0, 1): lambda = 0 is M2
                return kNegInf;
            if (total == kNegInf)
                return kNegInf;
            total += leroux_log_density(sp.beta, sp.lambda, sp.tau, ctx);
            break;
        }
        case EffectPrior::gp: {
            total += log_uniform(sp.tau, 0.0, kScalePriorUpper) + log_uniform(sp.phi, 0.0, ctx.c_phi);
            if (total == kNegInf)
                return kNegInf;
            total += gp_log_density(sp.beta, sp.tau, sp.phi, ctx, spec.matern_smoothness);
            break;
        }
        case EffectPrior::eof_gaussian: {
            total += log_uniform(sp.sigma_alpha, 0.0, kScalePriorUpper) +
                     log_uniform(sp.sigma, 0.0, kScalePriorUpper) + log_uniform(sp.delta, -1.0, 1.0) +
                     log_uniform(sp.inv_nu, 0.0, 1.0);
            if (total == kNegInf)
                return kNegInf;
            for (Eigen::Index l = 0; l < sp.alpha.size(); ++l)
                total += normal_logpdf(sp.alpha(l), 0.0, sp.sigma_alpha);
            total += skewt_sum_logpdf(sp.xi, sp);
            break;
        }
        case EffectPrior::eof_gdp: {
            total += log_uniform(sp.sigma, 0.0, kScalePriorUpper) + log_uniform(sp.delta, -1.0, 1.0) +
                     log_uniform(sp.inv_nu, 0.0, 1.0);
            if (total == kNegInf)
                return kNegInf;
            const GdpParams gdp{spec.gdp_shape, params.r};
            for (Eigen::Index l = 0; l < sp.alpha.size(); ++l)
                total += gdp_logpdf(sp.alpha(l), gdp);
            total += skewt_sum_logpdf(sp.xi, sp);
            break;
        }
        case EffectPrior::beta_binomial:
            break;
        }
    }
    if (prior == EffectPrior::eof_gdp)
        total += detail::log_uniform(params.r, 0.0, kScalePriorUpper);
    return total;
}

inline double log_posterior(const ScenarioCounts& counts, const ModelSpec& spec, const ModelContext& ctx,
                            const ParamVector& params)
{
    const double prior = log_prior(spec, ctx, params);
    if (!std::isfinite(prior))
        return prior;
    return prior + log_likelihood(counts, params, spec, ctx);
}

} // namespace attrib
