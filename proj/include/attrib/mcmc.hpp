#pragma once

// Adaptive Metropolis-within-Gibbs sampler for the hierarchical binomial
// models. Blocks: mu_k (scalar), effects beta_k / residuals xi_k (per
// element), EOF coefficients alpha_k (per element), then scale-type
// hyperparameters; the skew-t (sigma, delta, 1/nu) triple moves jointly.
// Positive parameters move on the log scale, bounded ones on logit / atanh.
// Proposal scales adapt toward 0.44 acceptance during burn-in only.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "attrib/core.hpp"
#include "attrib/distributions.hpp"
#include "attrib/errors.hpp"
#include "attrib/models.hpp"
#include "attrib/random.hpp"

namespace attrib {

struct ProposalScales {
    double mu = 0.1;
    double effect = 0.5;
    double coefficient = 0.5;
    double log_scale = 0.3;   // tau, sigma_alpha, r
    double skewt_sigma = 0.2; // on log sigma
    double skewt_delta = 0.3; // on atanh delta
    double skewt_inv_nu = 0.5; // on logit(1/nu)
    double lambda = 0.5;      // on logit lambda
    double phi = 0.5;         // on logit(phi / c_phi)
};

struct ChainConfig {
    int iterations = 21000;
    int burn_in = 5000;
    int thin = 4;
    int adapt_interval = 50;
    double target_acceptance = 0.44;
    ProposalScales scales;
    std::uint64_t seed = 1;
    std::uint64_t chain_id = 0;
    bool keep_traces = true;

    int stored_draws() const { return (iterations - burn_in) / thin; }

    void validate() const
    {
        if (iterations <= 0)
            throw ConfigError("iterations must be positive");
        if (burn_in < 0 || burn_in >= iterations)
            throw ConfigError("burn-in must lie in [0, iterations)");
        if (thin < 1)
            throw ConfigError("thinning must be at least 1");
        if (adapt_interval < 1)
            throw ConfigError("adaptation interval must be at least 1");
        if (stored_draws() < 1)
            throw ConfigError("configuration stores no draws");
    }
};

struct PosteriorDraws {
    std::vector<std::string> region_ids;
    Eigen::MatrixXd p_f; // S x M
    Eigen::MatrixXd p_c;
    Eigen::MatrixXd rr;
    std::map<std::string, double> acceptance;            // post-burn-in rate per block
    std::map<std::string, std::vector<double>> traces;   // post-burn-in scalar traces
    std::map<std::string, double> ess;
    std::map<std::string, double> geweke;
    std::vector<std::string> warnings;

    Eigen::Index samples() const { return p_f.rows(); }
    Eigen::Index regions() const { return p_f.cols(); }
};

// ============================================================================
// DIAGNOSTICS
// ============================================================================

// Initial positive sequence estimator (Geyer). Constant series -> length.
inline double effective_sample_size(const std::vector<double>& x)
{
    const std::size_t n = x.size();
    if (n < 10)
        throw DataError("ESS needs at least 10 values");
    double mean = 0.0;
    for (double v : x)
        mean += v;
    mean /= static_cast<double>(n);
    auto autocov = [&](std::size_t lag) {
        double s = 0.0;
        for (std::size_t t = 0; t + lag < n; ++t)
            s += (x[t] - mean) * (x[t + lag] - mean);
        return s / static_cast<double>(n);
    };
    const double g0 = autocov(0);
    if (!(g0 > 0.0))
        return static_cast<double>(n);
    double sum = 0.0; // sum of pair sums Gamma_m = g(2m) + g(2m+1)
    for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
        const double pair = autocov(2 * m) + autocov(2 * m + 1);
        if (pair <= 0.0)
            break;
        sum += pair;
    }
    const double tau = std::max(1.0 / static_cast<double>(n), (2.0 * sum - g0) / g0);
    return std::min(static_cast<double>(n), static_cast<double>(n) / tau);
}

// z-score of first-10% vs last-50% means with ESS-based standard errors.
inline double geweke_z(const std::vector<double>& x)
{
    const std::size_t n = x.size();
    if (n < 100)
        return 0.0;
    const std::vector<double> a(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n / 10));
    const std::vector<double> b(x.begin() + static_cast<std::ptrdiff_t>(n / 2), x.end());
    auto stats = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double t : v)
            m += t;
        m /= static_cast<double>(v.size());
        double s2 = 0.0;
        for (double t : v)
            s2 += (t - m) * (t - m);
        s2 /= static_cast<double>(v.size() - 1);
        return std::pair<double, double>{m, s2 / effective_sample_size(v)};
    };
    const auto [ma, va] = stats(a);
    const auto [mb, vb] = stats(b);
    const double se = std::sqrt(va + vb);
    return se > 0.0 ? (ma - mb) / se : 0.0;
}

// ============================================================================
// SAMPLER
// ============================================================================

namespace detail {

inline double clamp_prob(double p)
{
    constexpr double lo = std::numeric_limits<double>::min();
    constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    return std::clamp(p, lo, hi);
}

inline double logit_bounded(double x, double lo, double hi) { return std::log((x - lo) / (hi - x)); }
inline double inv_logit_bounded(double y, double lo, double hi) { return lo + (hi - lo) * inv_logit(y); }
// log |dx/dy| for x = lo + (hi - lo) inv_logit(y), up to a constant.
inline double log_jac_bounded(double x, double lo, double hi) { return std::log(x - lo) + std::log(hi - x); }

struct AdaptiveBlock {
    double base = 1.0;
    double log_factor = 0.0;
    long accepted = 0, tried = 0;             // post-burn-in
    long batch_accepted = 0, batch_tried = 0; // current adaptation batch

    double scale() const { return base * std::exp(log_factor); }

    void record(bool ok, bool burning)
    {
        if (burning) {
            ++batch_tried;
            batch_accepted += ok;
        } else {
            ++tried;
            accepted += ok;
        }
    }

    void adapt(long batch_index, double target)
    {
        if (batch_tried == 0)
            return;
        const double rate = static_cast<double>(batch_accepted) / static_cast<double>(batch_tried);
        const double step = std::min(0.1, 1.0 / std::sqrt(static_cast<double>(batch_index)));
        log_factor += rate > target ? step : -step;
        batch_accepted = batch_tried = 0;
    }
};

struct ScenarioState {
    std::vector<int> z, n;
    Eigen::VectorXd eta; // logits
    Eigen::VectorXd ll;  // per-region binomial kernel
    // effect caches
    std::optional<SkewTKernel> st;
    Eigen::VectorXd st_logp;  // skew-t log density per effect / residual
    Eigen::MatrixXd gp_prec;  // R(phi)^-1
    Eigen::VectorXd gp_w;     // R^-1 beta
    double gp_logdet = 0.0;
    // adaptive blocks
    AdaptiveBlock mu;
    std::vector<AdaptiveBlock> effect;
    std::vector<AdaptiveBlock> coef;
    AdaptiveBlock tau, lambda, phi, skewt, sigma_alpha;
};

class Sampler {
public:
    Sampler(const ModelSpec& spec, const ScenarioCounts& counts, const ModelContext& ctx, const ChainConfig& cfg)
        : spec_(spec), ctx_(ctx), cfg_(cfg), prior_(spec.effect_prior()),
          rng_(make_rng(cfg.seed, cfg.chain_id)), m_(static_cast<Eigen::Index>(counts.size()))
    {
        st_[0].z = counts.z_f;
        st_[0].n = counts.n_f;
        st_[1].z = counts.z_c;
        st_[1].n = counts.n_c;
        r_block_.base = cfg.scales.log_scale;
    }

    PosteriorDraws run(const std::vector<std::string>& region_ids)
    {
        initialize();
        PosteriorDraws out;
        out.region_ids = region_ids;
        const int s_total = cfg_.stored_draws();
        out.p_f.resize(s_total, m_);
        out.p_c.resize(s_total, m_);
        std::map<std::string, std::vector<double>> traces;
        long batch = 0;
        int stored = 0;
        for (int it = 0; it < cfg_.iterations; ++it) {
            const bool burning = it < cfg_.burn_in;
            for (int k = 0; k < 2; ++k)
                sweep(k, burning);
            if (prior_ == EffectPrior::eof_gdp)
                update_r(burning);
            if (burning && (it + 1) % cfg_.adapt_interval == 0)
                adapt(++batch);
            if (!burning) {
                if (cfg_.keep_traces)
                    record_traces(traces);
                if ((it - cfg_.burn_in + 1) % cfg_.thin == 0 && stored < s_total) {
                    for (Eigen::Index i = 0; i < m_; ++i) {
                        out.p_f(stored, i) = clamp_prob(inv_logit(st_[0].eta(i)));
                        out.p_c(stored, i) = clamp_prob(inv_logit(st_[1].eta(i)));
                    }
                    ++stored;
                }
            }
        }
        out.rr = out.p_f.cwiseQuotient(out.p_c);
        collect_acceptance(out);
        out.traces = std::move(traces);
        for (const auto& [name, series] : out.traces) {
            if (series.size() < 10)
                continue;
            out.ess[name] = effective_sample_size(series);
            if (name.rfind("mu_", 0) == 0) {
                const double z = geweke_z(series);
                out.geweke[name] = z;
                if (std::abs(z) >= 3.0)
                    out.warnings.push_back("Geweke |z| >= 3 for " + name);
            }
        }
        return out;
    }

private:
    const ModelSpec& spec_;
    const ModelContext& ctx_;
    const ChainConfig& cfg_;
    EffectPrior prior_;
    Rng rng_;
    Eigen::Index m_;
    ParamVector params_;
    std::array<ScenarioState, 2> st_;
    AdaptiveBlock r_block_;

    static constexpr const char* kSuffix[2] = {"_f", "_c"};

    bool accept(double log_ratio) { return std::isfinite(log_ratio) && std::log(draw_uniform(rng_)) < log_ratio; }

    // ------------------------------------------------------------------
    // initialization
    // ------------------------------------------------------------------

    void initialize()
    {
        const ProposalScales& sc = cfg_.scales;
        for (int k = 0; k < 2; ++k) {
            ScenarioState& s = st_[k];
            ScenarioParams& p = params_.scenario[k];
            double zs = 0.0, ns = 0.0;
            for (Eigen::Index i = 0; i < m_; ++i) {
                zs += s.z[static_cast<std::size_t>(i)];
                ns += s.n[static_cast<std::size_t>(i)];
            }
            const double pooled = logit((zs + 0.5) / (ns + 1.0));
            p.mu = spec_.fixes_mean() ? 0.0 : pooled;
            p.tau = 0.5;
            p.sigma = 0.5;
            p.sigma_alpha = 0.5;
            p.lambda = 0.5;
            p.phi = ctx_.c_phi > 0.0 ? ctx_.c_phi / 4.0 : 0.1;
            p.delta = 0.0;
            p.inv_nu = 0.25;
            if (spec_.uses_eof()) {
                p.alpha = Eigen::VectorXd::Zero(ctx_.basis[k].cols());
                p.xi = Eigen::VectorXd::Zero(m_);
            } else {
                // the CAR density is flat along constants, so M4 starts at the pooled rate
                p.beta = Eigen::VectorXd::Constant(m_, spec_.fixes_mean() ? pooled : 0.0);
            }
            s.mu.base = sc.mu;
            s.effect.assign(static_cast<std::size_t>(m_), AdaptiveBlock{sc.effect});
            s.coef.assign(static_cast<std::size_t>(p.alpha.size()), AdaptiveBlock{sc.coefficient});
            s.tau.base = sc.log_scale;
            s.sigma_alpha.base = sc.log_scale;
            s.lambda.base = sc.lambda;
            s.phi.base = sc.phi;
            s.skewt.base = 1.0;
        }
        params_.r = 1.0;

        for (int attempt = 0; attempt <= 100; ++attempt) {
            if (attempt > 0)
                jitter();
            refresh_caches();
            const double lp = log_prior(spec_, ctx_, params_) + total_loglik();
            if (std::isfinite(lp))
                return;
        }
        throw NumericalError("non-finite log posterior after 100 initialization attempts");
    }

    void jitter()
    {
        for (int k = 0; k < 2; ++k) {
            ScenarioParams& p = params_.scenario[k];
            if (!spec_.fixes_mean())
                p.mu += 0.1 * draw_normal(rng_);
            for (Eigen::Index i = 0; i < p.beta.size(); ++i)
                p.beta(i) += 0.1 * draw_normal(rng_);
            for (Eigen::Index i = 0; i < p.xi.size(); ++i)
                p.xi(i) += 0.1 * draw_normal(rng_);
            p.tau *= std::exp(0.1 * draw_normal(rng_));
            p.sigma *= std::exp(0.1 * draw_normal(rng_));
        }
    }

    double total_loglik() const { return st_[0].ll.sum() + st_[1].ll.sum(); }

    Eigen::VectorXd& effects_vec(int k)
    {
        ScenarioParams& p = params_.scenario[k];
        return spec_.uses_eof() ? p.xi : p.beta;
    }

    void refresh_caches()
    {
        for (int k = 0; k < 2; ++k) {
            ScenarioState& s = st_[k];
            const ScenarioParams& p = params_.scenario[k];
            s.eta = scenario_logits(spec_, ctx_, params_, k);
            s.ll.resize(m_);
            for (Eigen::Index i = 0; i < m_; ++i)
                s.ll(i) = kernel(k, i, s.eta(i));
            if (spec_.uses_skewt() && std::abs(p.delta) < 1.0 && p.sigma > 0.0 && p.inv_nu > 0.0) {
                s.st.emplace(p.skewt());
                const Eigen::VectorXd& x = spec_.uses_eof() ? p.xi : p.beta;
                s.st_logp.resize(m_);
                for (Eigen::Index i = 0; i < m_; ++i)
                    s.st_logp(i) = s.st->logpdf(x(i));
            }
            if (prior_ == EffectPrior::gp && p.phi > 0.0)
                set_gp(k, p.phi);
        }
    }

    double kernel(int k, Eigen::Index i, double eta) const
    {
        const auto ii = static_cast<std::size_t>(i);
        return logit_binomial_kernel(st_[k].z[ii], st_[k].n[ii], eta);
    }

    struct GpFactor {
        Eigen::MatrixXd prec;
        double logdet = 0.0;
    };

    GpFactor gp_factor(double phi) const
    {
        const Eigen::MatrixXd corr = gp_covariance(ctx_.distances, 1.0, phi, spec_.matern_smoothness);
        const auto llt = jittered_cholesky(corr, 1.0);
        GpFactor f;
        const Eigen::MatrixXd l = llt.matrixL();
        f.logdet = 2.0 * l.diagonal().array().log().sum();
        f.prec = llt.solve(Eigen::MatrixXd::Identity(m_, m_));
        return f;
    }

    void set_gp(int k, double phi)
    {
        GpFactor f = gp_factor(phi);
        st_[k].gp_prec = std::move(f.prec);
        st_[k].gp_logdet = f.logdet;
        st_[k].gp_w = st_[k].gp_prec * params_.scenario[k].beta;
    }

    // ------------------------------------------------------------------
    // sweep
    // ------------------------------------------------------------------

    void sweep(int k, bool burning)
    {
        if (!spec_.fixes_mean())
            update_mu(k, burning);
        update_effects(k, burning);
        if (spec_.uses_eof())
            update_coefficients(k, burning);
        switch (prior_) {
        case EffectPrior::gaussian:
        case EffectPrior::car:
        case EffectPrior::gp:
            update_tau(k, burning);
            break;
        case EffectPrior::leroux:
            update_tau(k, burning);
            update_lambda(k, burning);
            break;
        case EffectPrior::eof_gaussian:
            update_sigma_alpha(k, burning);
            break;
        default:
            break;
        }
        if (prior_ == EffectPrior::gp)
            update_phi(k, burning);
        if (spec_.uses_skewt())
            update_skewt(k, burning);
    }

    void update_mu(int k, bool burning)
    {
        ScenarioState& s = st_[k];
        ScenarioParams& p = params_.scenario[k];
        const double d = s.mu.scale() * draw_normal(rng_);
        Eigen::VectorXd ll_new(m_);
        for (Eigen::Index i = 0; i < m_; ++i)
            ll_new(i) = kernel(k, i, s.eta(i) + d);
        const double lr = ll_new.sum() - s.ll.sum() + normal_logpdf(p.mu + d, 0.0, kMeanPriorSd) -
                          normal_logpdf(p.mu, 0.0, kMeanPriorSd);
        const bool ok = accept(lr);
        if (ok) {
            p.mu += d;
            s.eta.array() += d;
            s.ll = ll_new;
        }
        s.mu.record(ok, burning);
    }

    // Change in the effect prior log density when element i moves by d.
    double effect_prior_delta(int k, Eigen::Index i, double old_v, double new_v, double& st_new)
    {
        const ScenarioState& s = st_[k];
        const ScenarioParams& p = params_.scenario[k];
        const double d = new_v - old_v;
        const double tau2 = p.tau * p.tau;
        switch (prior_) {
        case EffectPrior::gaussian:
            return -(new_v * new_v - old_v * old_v) / (2.0 * tau2);
        case EffectPrior::skew_t:
        case EffectPrior::eof_gaussian:
        case EffectPrior::eof_gdp:
            st_new = s.st->logpdf(new_v);
            return st_new - s.st_logp(i);
        case EffectPrior::car:
        case EffectPrior::leroux: {
            const double lam = prior_ == EffectPrior::car ? 1.0 : p.lambda;
            const auto& nb = ctx_.neighbors[static_cast<std::size_t>(i)];
            double nb_sum = 0.0;
            for (std::size_t j : nb)
                nb_sum += p.beta(static_cast<Eigen::Index>(j));
            const double diag = (1.0 - lam) + lam * static_cast<double>(nb.size());
            const double pb = diag * old_v - lam * nb_sum; // (P beta)_i
            return -(2.0 * d * pb + d * d * diag) / (2.0 * tau2);
        }
        case EffectPrior::gp: {
            const double a_ii = s.gp_prec(i, i);
            return -(2.0 * d * s.gp_w(i) + d * d * a_ii) / (2.0 * tau2);
        }
        case EffectPrior::beta_binomial:
            break;
        }
        return 0.0;
    }

    void update_effects(int k, bool burning)
    {
        ScenarioState& s = st_[k];
        Eigen::VectorXd& x = effects_vec(k);
        for (Eigen::Index i = 0; i < m_; ++i) {
            AdaptiveBlock& blk = s.effect[static_cast<std::size_t>(i)];
            const double d = blk.scale() * draw_normal(rng_);
            const double old_v = x(i);
            const double new_v = old_v + d;
            double st_new = 0.0;
            const double dprior = effect_prior_delta(k, i, old_v, new_v, st_new);
            const double ll_new = kernel(k, i, s.eta(i) + d);
            const bool ok = accept(ll_new - s.ll(i) + dprior);
            if (ok) {
                x(i) = new_v;
                s.eta(i) += d;
                s.ll(i) = ll_new;
                if (s.st)
                    s.st_logp(i) = st_new;
                if (prior_ == EffectPrior::gp)
                    s.gp_w += d * s.gp_prec.col(i);
            }
            blk.record(ok, burning);
        }
    }

    double coef_log_prior(int k, double a) const
    {
        if (prior_ == EffectPrior::eof_gdp)
            return gdp_logpdf(a, {spec_.gdp_shape, params_.r});
        return normal_logpdf(a, 0.0, params_.scenario[k].sigma_alpha);
    }

    void update_coefficients(int k, bool burning)
    {
        ScenarioState& s = st_[k];
        ScenarioParams& p = params_.scenario[k];
        const Eigen::MatrixXd& h = ctx_.basis[k];
        Eigen::VectorXd ll_new(m_);
        for (Eigen::Index l = 0; l < p.alpha.size(); ++l) {
            AdaptiveBlock& blk = s.coef[static_cast<std::size_t>(l)];
            const double d = blk.scale() * draw_normal(rng_);
            double lr = coef_log_prior(k, p.alpha(l) + d) - coef_log_prior(k, p.alpha(l));
            for (Eigen::Index i = 0; i < m_; ++i) {
                ll_new(i) = kernel(k, i, s.eta(i) + d * h(i, l));
                lr += ll_new(i) - s.ll(i);
            }
            const bool ok = accept(lr);
            if (ok) {
                p.alpha(l) += d;
                s.eta += d * h.col(l);
                s.ll = ll_new;
            }
            blk.record(ok, burning);
        }
    }

    // Effect prior terms that depend on tau, for the current beta.
    double tau_terms(int k, double tau) const
    {
        const ScenarioParams& p = params_.scenario[k];
        const ScenarioState& s = st_[k];
        const double m = static_cast<double>(m_);
        const double tau2 = tau * tau;
        switch (prior_) {
        case EffectPrior::gaussian:
            return -m * std::log(tau) - p.beta.squaredNorm() / (2.0 * tau2);
        case EffectPrior::car:
            return -(m - 1.0) * std::log(tau) - p.beta.dot(ctx_.car_q * p.beta) / (2.0 * tau2);
        case EffectPrior::leroux:
            return -m * std::log(tau) - leroux_quad(p.beta, p.lambda) / (2.0 * tau2);
        case EffectPrior::gp:
            return -m * std::log(tau) - p.beta.dot(s.gp_w) / (2.0 * tau2);
        default:
            return 0.0;
        }
    }

    double leroux_quad(const Eigen::VectorXd& beta, double lambda) const
    {
        return (1.0 - lambda) * beta.squaredNorm() + lambda * beta.dot(ctx_.car_q * beta);
    }

    void update_tau(int k, bool burning)
    {
        ScenarioState& s = st_[k];
        ScenarioParams& p = params_.scenario[k];
        const double t_new = p.tau * std::exp(s.tau.scale() * draw_normal(rng_));
        bool ok = false;
        if (t_new < kScalePriorUpper) {
            const double lr = tau_terms(k, t_new) - tau_terms(k, p.tau) + std::log(t_new) - std::log(p.tau);
            ok = accept(lr);
        }
        if (ok)
            p.tau = t_new;
        s.tau.record(ok, burning);
    }

    void update_lambda(int k, bool burning)
    {
        ScenarioState& s = st_[k];
        ScenarioParams& p = params_.scenario[k];
        const double y = logit_bounded(p.lambda, 0.0, 1.0) + s.lambda.scale() * draw_normal(rng_);
        const double l_new = inv_logit_bounded(y, 0.0, 1.0);
        bool ok = false;
        if (l_new > 0.0 && l_new < 1.0) {
            auto terms = [&](double lam) {
                return 0.5 * (1.0 - lam + lam * ctx_.car_eigenvalues.array()).log().sum() -
                       leroux_quad(p.beta, lam) / (2.0 * p.tau * p.tau) + log_jac_bounded(lam, 0.0, 1.0);
            };
            ok = accept(terms(l_new) - terms(p.lambda));
        }
        if (ok)
            p.lambda = l_new;
        s.lambda.record(ok, burning);
    }

    void update_phi(int k, bool burning)
    {
        ScenarioState& s = st_[k];
        ScenarioParams& p = params_.scenario[k];
        const double c = ctx_.c_phi;
        const double y = logit_bounded(p.phi, 0.0, c) + s.phi.scale() * draw_normal(rng_);
        const double f_new = inv_logit_bounded(y, 0.0, c);
        bool ok = false;
        GpFactor g;
        if (f_new > 0.0 && f_new < c) {
            g = gp_factor(f_new);
            const double tau2 = p.tau * p.tau;
            const double q_new = p.beta.dot(g.prec * p.beta);
            const double q_old = p.beta.dot(s.gp_w);
            const double lr = -0.5 * (g.logdet - s.gp_logdet) - (q_new - q_old) / (2.0 * tau2) +
                              log_jac_bounded(f_new, 0.0, c) - log_jac_bounded(p.phi, 0.0, c);
            ok = accept(lr);
        }
        if (ok) {
            p.phi = f_new;
            s.gp_prec = std::move(g.prec);
            s.gp_logdet = g.logdet;
            s.gp_w = s.gp_prec * p.beta;
        }
        s.phi.record(ok, burning);
    }

    void update_sigma_alpha(int k, bool burning)
    {
        ScenarioState& s = st_[k];
        ScenarioParams& p = params_.scenario[k];
        const double v_new = p.sigma_alpha * std::exp(s.sigma_alpha.scale() * draw_normal(rng_));
        bool ok = false;
        if (v_new < kScalePriorUpper) {
            const double ss = p.alpha.squaredNorm();
            const double pl = static_cast<double>(p.alpha.size());
            auto terms = [&](double v) { return -pl * std::log(v) - ss / (2.0 * v * v) + std::log(v); };
            ok = accept(terms(v_new) - terms(p.sigma_alpha));
        }
        if (ok)
            p.sigma_alpha = v_new;
        s.sigma_alpha.record(ok, burning);
    }

    void update_skewt(int k, bool burning)
    {
        ScenarioState& s = st_[k];
        ScenarioParams& p = params_.scenario[k];
        const ProposalScales& sc = cfg_.scales;
        const double f = s.skewt.scale();
        const double sigma_new = p.sigma * std::exp(f * sc.skewt_sigma * draw_normal(rng_));
        const double delta_new = std::tanh(std::atanh(p.delta) + f * sc.skewt_delta * draw_normal(rng_));
        const double inv_nu_new =
            inv_logit_bounded(logit_bounded(p.inv_nu, 0.0, 1.0) + f * sc.skewt_inv_nu * draw_normal(rng_), 0.0, 1.0);
        bool ok = false;
        std::optional<SkewTKernel> kern;
        Eigen::VectorXd logp_new(m_);
        if (sigma_new < kScalePriorUpper && std::abs(delta_new) < 1.0 && inv_nu_new > 0.0 && inv_nu_new < 1.0) {
            kern.emplace(SkewTParams{0.0, sigma_new, delta_new, 1.0 / inv_nu_new});
            const Eigen::VectorXd& x = spec_.uses_eof() ? p.xi : p.beta;
            for (Eigen::Index i = 0; i < m_; ++i)
                logp_new(i) = kern->logpdf(x(i));
            auto jac = [](double sg, double dl, double iv) {
                return std::log(sg) + std::log1p(-dl * dl) + log_jac_bounded(iv, 0.0, 1.0);
            };
            const double lr = logp_new.sum() - s.st_logp.sum() + jac(sigma_new, delta_new, inv_nu_new) -
                              jac(p.sigma, p.delta, p.inv_nu);
            ok = accept(lr);
        }
        if (ok) {
            p.sigma = sigma_new;
            p.delta = delta_new;
            p.inv_nu = inv_nu_new;
            s.st = std::move(kern);
            s.st_logp = logp_new;
        }
        s.skewt.record(ok, burning);
    }

    void update_r(bool burning)
    {
        const double r_new = params_.r * std::exp(r_block_.scale() * draw_normal(rng_));
        bool ok = false;
        if (r_new < kScalePriorUpper) {
            auto terms = [&](double r) {
                double t = std::log(r);
                for (int k = 0; k < 2; ++k) {
                    const auto& a = params_.scenario[k].alpha;
                    for (Eigen::Index l = 0; l < a.size(); ++l)
                        t += gdp_logpdf(a(l), {spec_.gdp_shape, r});
                }
                return t;
            };
            ok = accept(terms(r_new) - terms(params_.r));
        }
        if (ok)
            params_.r = r_new;
        r_block_.record(ok, burning);
    }

    // ------------------------------------------------------------------
    // adaptation and bookkeeping
    // ------------------------------------------------------------------

    void adapt(long batch)
    {
        const double t = cfg_.target_acceptance;
        for (auto& s : st_) {
            for (AdaptiveBlock* b : {&s.mu, &s.tau, &s.lambda, &s.phi, &s.skewt, &s.sigma_alpha})
                b->adapt(batch, t);
            for (auto& b : s.effect)
                b.adapt(batch, t);
            for (auto& b : s.coef)
                b.adapt(batch, t);
        }
        r_block_.adapt(batch, t);
    }

    void record_traces(std::map<std::string, std::vector<double>>& traces) const
    {
        for (int k = 0; k < 2; ++k) {
            const ScenarioParams& p = params_.scenario[k];
            const std::string sfx = kSuffix[k];
            if (!spec_.fixes_mean())
                traces["mu" + sfx].push_back(p.mu);
            switch (prior_) {
            case EffectPrior::gaussian:
            case EffectPrior::car:
                traces["tau" + sfx].push_back(p.tau);
                break;
            case EffectPrior::leroux:
                traces["tau" + sfx].push_back(p.tau);
                traces["lambda" + sfx].push_back(p.lambda);
                break;
            case EffectPrior::gp:
                traces["tau" + sfx].push_back(p.tau);
                traces["phi" + sfx].push_back(p.phi);
                break;
            case EffectPrior::eof_gaussian:
                traces["sigma_alpha" + sfx].push_back(p.sigma_alpha);
                break;
            default:
                break;
            }
            if (spec_.uses_skewt()) {
                traces["sigma" + sfx].push_back(p.sigma);
                traces["delta" + sfx].push_back(p.delta);
                traces["inv_nu" + sfx].push_back(p.inv_nu);
            }
            traces["mean_logit" + sfx].push_back(st_[k].eta.mean());
        }
        if (prior_ == EffectPrior::eof_gdp)
            traces["r"].push_back(params_.r);
    }

    static void add_rate(std::map<std::string, double>& out, const std::string& name, long acc, long tried)
    {
        if (tried > 0)
            out[name] = static_cast<double>(acc) / static_cast<double>(tried);
    }

    void collect_acceptance(PosteriorDraws& out) const
    {
        for (int k = 0; k < 2; ++k) {
            const ScenarioState& s = st_[k];
            const std::string sfx = kSuffix[k];
            add_rate(out.acceptance, "mu" + sfx, s.mu.accepted, s.mu.tried);
            long a = 0, t = 0;
            for (const auto& b : s.effect) {
                a += b.accepted;
                t += b.tried;
            }
            add_rate(out.acceptance, (spec_.uses_eof() ? "xi" : "beta") + sfx, a, t);
            a = t = 0;
            for (const auto& b : s.coef) {
                a += b.accepted;
                t += b.tried;
            }
            add_rate(out.acceptance, "alpha" + sfx, a, t);
            add_rate(out.acceptance, "tau" + sfx, s.tau.accepted, s.tau.tried);
            add_rate(out.acceptance, "lambda" + sfx, s.lambda.accepted, s.lambda.tried);
            add_rate(out.acceptance, "phi" + sfx, s.phi.accepted, s.phi.tried);
            add_rate(out.acceptance, "skewt" + sfx, s.skewt.accepted, s.skewt.tried);
            add_rate(out.acceptance, "sigma_alpha" + sfx, s.sigma_alpha.accepted, s.sigma_alpha.tried);
        }
        add_rate(out.acceptance, "r", r_block_.accepted, r_block_.tried);
    }
};

} // namespace detail

// Independent Beta(z + 1, n - z + 1) draws per region and scenario.
inline PosteriorDraws sample_m1(const ScenarioCounts& counts, int draws, std::uint64_t seed,
                                std::uint64_t chain_id = 0)
{
    counts.validate();
    if (draws < 1)
        throw ConfigError("M1 needs at least one draw");
    Rng rng = make_rng(seed, chain_id);
    const auto m = static_cast<Eigen::Index>(counts.size());
    PosteriorDraws out;
    out.region_ids = counts.region_ids;
    out.p_f.resize(draws, m);
    out.p_c.resize(draws, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        const BetaParams bf = beta_binomial_posterior(counts.z_f[ii], counts.n_f[ii], 1.0, 1.0);
        const BetaParams bc = beta_binomial_posterior(counts.z_c[ii], counts.n_c[ii], 1.0, 1.0);
        for (int s = 0; s < draws; ++s) {
            out.p_f(s, i) = detail::clamp_prob(draw_beta(rng, bf.a, bf.b));
            out.p_c(s, i) = detail::clamp_prob(draw_beta(rng, bc.a, bc.b));
        }
    }
    out.rr = out.p_f.cwiseQuotient(out.p_c);
    return out;
}

inline PosteriorDraws run_chain(const ModelSpec& spec, const ScenarioCounts& counts, const ModelContext& ctx,
                                const ChainConfig& cfg)
{
    cfg.validate();
    counts.validate();
    if (spec.effect_prior() == EffectPrior::beta_binomial)
        return sample_m1(counts, cfg.stored_draws(), cfg.seed, cfg.chain_id);
    if (ctx.regions != counts.size())
        throw DimensionError("model context built for " + std::to_string(ctx.regions) + " regions, counts have " +
                             std::to_string(counts.size()));
    detail::Sampler sampler(spec, counts, ctx, cfg);
    return sampler.run(counts.region_ids);
}

// Builds the model context, then runs the chain. `basis_f` / `basis_c` are
// required iff the model is an EOF model.
inline PosteriorDraws run_chain(const ModelSpec& spec, const ScenarioCounts& counts, const RegionSet* regions,
                                const EofBasis* basis_f, const EofBasis* basis_c, const ChainConfig& cfg)
{
    if (!spec.uses_eof() && (basis_f != nullptr || basis_c != nullptr))
        throw ConfigError("EOF bases given for non-EOF model " + model_name(spec.id));
    if (spec.effect_prior() == EffectPrior::beta_binomial) {
        cfg.validate();
        return sample_m1(counts, cfg.stored_draws(), cfg.seed, cfg.chain_id);
    }
    const ModelContext ctx = make_context(spec, regions, basis_f, basis_c, counts.size());
    return run_chain(spec, counts, ctx, cfg);
}

} // namespace attrib
