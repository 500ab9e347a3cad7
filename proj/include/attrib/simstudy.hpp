#pragma once

// Simulation study: six true states x three schemes x ensemble sizes,
// scored for realized FDP, power, loss, FD and FN.
//
// Scheme means: the factual mean is logit(0.08) throughout and the
// counterfactual mean carries the scheme-dependent value, so that schemes
// 1-3 have roughly 85%, 50% and 15% true non-nulls for H: RR <= 1.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "attrib/classical_tests.hpp"
#include "attrib/core.hpp"
#include "attrib/decision_rules.hpp"
#include "attrib/distributions.hpp"
#include "attrib/eof_basis.hpp"
#include "attrib/errors.hpp"
#include "attrib/mcmc.hpp"
#include "attrib/models.hpp"
#include "attrib/random.hpp"

namespace attrib {

enum class TrueState { g_re, ng_re, gp_s, gp_l, eof_g, eof_ng };

inline std::string state_name(TrueState s)
{
    static const char* names[] = {"g-re", "ng-re", "gp-s", "gp-l", "eof-g", "eof-ng"};
    return names[static_cast<int>(s)];
}

inline TrueState parse_state(std::string s)
{
    for (auto& ch : s)
        ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    std::replace(s.begin(), s.end(), '_', '-');
    for (int i = 0; i < 6; ++i)
        if (state_name(static_cast<TrueState>(i)) == s)
            return static_cast<TrueState>(i);
    throw ConfigError("unknown true state '" + s + "'");
}

inline bool is_eof_state(TrueState s) { return s == TrueState::eof_g || s == TrueState::eof_ng; }

struct TrueStateSpec {
    TrueState state = TrueState::g_re;
    int scheme = 2;
    int n_ens = 100;
    double mean_f = 0.0; // logit scale
    double mean_c = 0.0;
    // G-RE
    double re_sd = 0.74;
    // NG-RE: Gamma(shape, scale) - shift
    double gamma_shape = 3.75;
    double gamma_scale = 0.4;
    double gamma_shift = 1.5;
    // GP-S / GP-L on distances rescaled to max 1
    double gp_variance = 0.6;
    double gp_range = 0.06;
    double gp_smoothness = 2.0;
    // EOF-G / EOF-NG
    std::vector<double> eof_coef_sd;
    double eof_discrepancy_sd = 0.01;
    double eof_ng_k = 0.02;
    double eof_ng_shape = 5.0;
    double eof_ng_scale = 0.4;
    double eof_ng_shift = 2.0;
    // hypothesis tested
    double c = 1.0;

    static TrueStateSpec make(TrueState state, int scheme, int n_ens)
    {
        if (scheme < 1 || scheme > 3)
            throw ConfigError("scheme must be 1, 2 or 3");
        if (n_ens < 1)
            throw ConfigError("ensemble size must be positive");
        TrueStateSpec s;
        s.state = state;
        s.scheme = scheme;
        s.n_ens = n_ens;
        const int k = scheme - 1;
        // Scheme 3 counterfactual mean: 0.19 for G-RE and EOF states, 0.18 for NG-RE and GP.
        const bool uses_018 = state == TrueState::ng_re || state == TrueState::gp_s || state == TrueState::gp_l;
        const double cf[3] = {0.03, 0.08, uses_018 ? 0.18 : 0.19};
        s.mean_f = logit(0.08);
        s.mean_c = logit(cf[k]);
        const double re_sd[3] = {0.72, 0.74, 0.775};
        s.re_sd = re_sd[k];
        const double shape[3] = {4.0, 3.75, 3.5};
        const double scale[3] = {0.375, 0.4, 0.4286};
        s.gamma_shape = shape[k];
        s.gamma_scale = scale[k];
        s.gamma_shift = 1.5;
        s.gp_variance = 0.6;
        s.gp_range = state == TrueState::gp_l ? 0.10 : 0.06;
        s.gp_smoothness = 2.0;
        s.eof_coef_sd.assign(30, 0.05);
        for (int j = 0; j < 10; ++j)
            s.eof_coef_sd[static_cast<std::size_t>(j)] = j < 5 ? 3.5 : 1.0;
        return s;
    }
};

struct SimDataset {
    Eigen::VectorXd p_f, p_c;
    std::vector<int> theta; // 1 = non-null
    ScenarioCounts counts;
};

// Per-cell fixed inputs: regions, GP factors and bases.
struct StudyCell {
    TrueStateSpec spec;
    const RegionSet* regions = nullptr;
    Eigen::MatrixXd gp_chol;            // lower Cholesky factor of the GP covariance
    std::array<EofBasis, 2> truth;      // EOF states: generating basis
    std::array<EofBasis, 2> fit_basis;  // basis handed to EOF models
};

namespace detail {

inline Eigen::VectorXd draw_state_logits(const StudyCell& cell, int k, Rng& rng)
{
    const TrueStateSpec& s = cell.spec;
    const auto m = static_cast<Eigen::Index>(cell.regions->size());
    const double mean = k == kFactual ? s.mean_f : s.mean_c;
    Eigen::VectorXd x(m);
    switch (s.state) {
    case TrueState::g_re:
        for (Eigen::Index i = 0; i < m; ++i)
            x(i) = mean + s.re_sd * draw_normal(rng);
        break;
    case TrueState::ng_re:
        for (Eigen::Index i = 0; i < m; ++i)
            x(i) = mean + draw_gamma(rng, s.gamma_shape, s.gamma_scale) - s.gamma_shift;
        break;
    case TrueState::gp_s:
    case TrueState::gp_l: {
        Eigen::VectorXd e(m);
        for (Eigen::Index i = 0; i < m; ++i)
            e(i) = draw_normal(rng);
        Eigen::VectorXd g = cell.gp_chol * e;
        g.array() -= g.mean();
        x = (g.array() + mean).matrix();
        break;
    }
    case TrueState::eof_g:
    case TrueState::eof_ng: {
        const Eigen::MatrixXd& h = cell.truth[static_cast<std::size_t>(k)].vectors;
        const auto p = static_cast<Eigen::Index>(s.eof_coef_sd.size());
        Eigen::VectorXd a(p);
        for (Eigen::Index j = 0; j < p; ++j)
            a(j) = s.eof_coef_sd[static_cast<std::size_t>(j)] * draw_normal(rng);
        x = h.leftCols(p) * a;
        for (Eigen::Index i = 0; i < m; ++i) {
            const double disc = s.state == TrueState::eof_g
                                    ? s.eof_discrepancy_sd * draw_normal(rng)
                                    : s.eof_ng_k * (draw_gamma(rng, s.eof_ng_shape, s.eof_ng_scale) - s.eof_ng_shift);
            x(i) += mean + disc;
        }
        break;
    }
    }
    return x;
}

} // namespace detail

// Builds the per-cell inputs. `truth_basis` is required for EOF states and
// must have at least 30 columns; for other states the fitting basis comes
// from 56 replicate draws of the true state.
inline StudyCell make_study_cell(const TrueStateSpec& spec, const RegionSet& regions,
                                 const EofBasis* truth_f, const EofBasis* truth_c, std::uint64_t seed,
                                 int basis_years = 56)
{
    StudyCell cell;
    cell.spec = spec;
    cell.regions = &regions;
    const auto m = static_cast<Eigen::Index>(regions.size());
    if (spec.state == TrueState::gp_s || spec.state == TrueState::gp_l) {
        if (!regions.has_centroids())
            throw DataError("GP true states need region centroids");
        Eigen::MatrixXd d = regions.chord_distances();
        const double dmax = d.maxCoeff();
        if (!(dmax > 0.0))
            throw DataError("region centroids are all identical");
        d /= dmax;
        const Eigen::MatrixXd cov = gp_covariance(d, spec.gp_variance, spec.gp_range, spec.gp_smoothness);
        cell.gp_chol = jittered_cholesky(cov, spec.gp_variance).matrixL();
    }
    if (is_eof_state(spec.state)) {
        if (truth_f == nullptr || truth_c == nullptr)
            throw DataError("EOF true states need a generating basis");
        for (const EofBasis* b : {truth_f, truth_c}) {
            if (b->regions() != m)
                throw DimensionError("truth basis rows differ from region count");
            if (b->count() < static_cast<Eigen::Index>(spec.eof_coef_sd.size()))
                throw DimensionError("truth basis needs at least " + std::to_string(spec.eof_coef_sd.size()) +
                                     " EOFs");
        }
        cell.truth = {*truth_f, *truth_c};
        cell.fit_basis = cell.truth;
    } else {
        Rng rng = make_rng(seed, 0xb451500ULL);
        for (int k = 0; k < 2; ++k) {
            HistoricalProbMatrix hist;
            hist.values.resize(m, basis_years);
            for (int t = 0; t < basis_years; ++t)
                hist.values.col(t) = detail::draw_state_logits(cell, k, rng);
            const Eigen::Index p = std::min<Eigen::Index>(basis_years, m);
            cell.fit_basis[static_cast<std::size_t>(k)] = compute_eofs(empirical_logit_cov(hist), p);
        }
    }
    return cell;
}

inline SimDataset generate_dataset(const StudyCell& cell, Rng& rng)
{
    const TrueStateSpec& s = cell.spec;
    const std::size_t m = cell.regions->size();
    SimDataset d;
    const Eigen::VectorXd xf = detail::draw_state_logits(cell, kFactual, rng);
    const Eigen::VectorXd xc = detail::draw_state_logits(cell, kCounterfactual, rng);
    d.p_f = xf.unaryExpr([](double v) { return inv_logit(v); });
    d.p_c = xc.unaryExpr([](double v) { return inv_logit(v); });
    const HypothesisSpec h = HypothesisSpec::leq(s.c);
    d.theta.resize(m);
    d.counts.region_ids = cell.regions->ids;
    for (std::size_t i = 0; i < m; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        d.theta[i] = 1 - null_indicator(h, d.p_f(ii) / d.p_c(ii));
        d.counts.n_f.push_back(s.n_ens);
        d.counts.n_c.push_back(s.n_ens);
        d.counts.z_f.push_back(draw_binomial(rng, s.n_ens, d.p_f(ii)));
        d.counts.z_c.push_back(draw_binomial(rng, s.n_ens, d.p_c(ii)));
    }
    return d;
}

// ============================================================================
// SCORING
// ============================================================================

struct StudyMetrics {
    double fdp = 0.0;
    std::optional<double> power; // empty when there are no non-nulls
    double loss = 0.0;
    int fd = 0;
    int fn = 0;
    int true_discoveries = 0;
};

// theta: 1 = non-null. loss = (1/M) sum [lambda2 (1 - theta) delta + theta (1 - delta)].
inline StudyMetrics score(const std::vector<int>& theta, const std::vector<bool>& delta, double lambda2)
{
    if (theta.size() != delta.size())
        throw DimensionError("truth and decision vectors differ in length");
    if (theta.empty())
        throw DataError("nothing to score");
    StudyMetrics s;
    int rejections = 0, nonnull = 0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const bool d = delta[i];
        const bool t = theta[i] != 0;
        rejections += d;
        nonnull += t;
        if (d && !t)
            ++s.fd;
        if (!d && t)
            ++s.fn;
        if (d && t)
            ++s.true_discoveries;
    }
    s.fdp = static_cast<double>(s.fd) / std::max(1, rejections);
    if (nonnull > 0)
        s.power = static_cast<double>(s.true_discoveries) / nonnull;
    s.loss = (lambda2 * s.fd + s.fn) / static_cast<double>(theta.size());
    return s;
}

// ============================================================================
// STUDY
// ============================================================================

enum class Method { lrt_bh, lrt_fwer, model };

struct MethodSpec {
    Method kind = Method::model;
    ModelId model = ModelId::rnb;

    std::string name() const
    {
        if (kind == Method::lrt_bh)
            return "lrt-bh";
        if (kind == Method::lrt_fwer)
            return "lrt-fwer";
        return model_name(model);
    }
};

inline MethodSpec parse_method(std::string s)
{
    for (auto& ch : s)
        ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (s == "lrt-bh" || s == "bh")
        return {Method::lrt_bh, ModelId::m1};
    if (s == "lrt-fwer" || s == "fwer" || s == "bonferroni")
        return {Method::lrt_fwer, ModelId::m1};
    return {Method::model, parse_model(s)};
}

struct StudyConfig {
    std::vector<TrueState> states{TrueState::g_re};
    std::vector<int> schemes{2};
    std::vector<int> ensemble_sizes{100};
    std::vector<MethodSpec> methods;
    std::vector<Rule> rules{Rule::r1, Rule::r2, Rule::r3};
    int reps = 20;
    double alpha = 0.10;
    double lambda2 = 9.0;
    double gamma_fraction = 0.10; // gamma = fraction * M
    double eof_discrepancy_sd = 0.01;
    ChainConfig chain;
    std::uint64_t seed = 1;
    unsigned jobs = 1;
};

struct StudyRow {
    std::string state;
    int scheme = 0;
    int n_ens = 0;
    std::string method;
    std::string rule;
    int rep = 0;
    StudyMetrics metrics;
};

struct StudyFailure {
    std::string state;
    int scheme = 0;
    int n_ens = 0;
    std::string method;
    int rep = 0;
    std::string message;
};

struct StudySummaryRow {
    std::string state;
    int scheme = 0;
    int n_ens = 0;
    std::string method;
    std::string rule;
    int reps = 0;
    int failed = 0;
    double fdr = 0.0;
    std::optional<double> power;
    double loss = 0.0;
    double fd = 0.0;
    double fn = 0.0;
};

struct StudyResult {
    std::vector<StudyRow> rows;
    std::vector<StudyFailure> failures;
    std::vector<StudySummaryRow> summary;
};

// Deterministic key for a (state, scheme, n_ens) cell, independent of grid order.
inline std::uint64_t cell_key(TrueState state, int scheme, int n_ens)
{
    return (static_cast<std::uint64_t>(state) + 1) * 1000003ULL + static_cast<std::uint64_t>(scheme) * 7919ULL +
           static_cast<std::uint64_t>(n_ens);
}

inline std::uint64_t method_key(const MethodSpec& m)
{
    return m.kind == Method::model ? 100 + static_cast<std::uint64_t>(m.model) : static_cast<std::uint64_t>(m.kind);
}

// Runs one replicate of one cell for all methods; appends rows and failures.
inline void run_replicate(const StudyCell& cell, const StudyConfig& cfg, int rep, std::vector<StudyRow>& rows,
                          std::vector<StudyFailure>& failures)
{
    const TrueStateSpec& ts = cell.spec;
    const std::uint64_t rep_seed = stream_seed(cfg.seed, cell_key(ts.state, ts.scheme, ts.n_ens), rep);
    Rng rng = make_rng(rep_seed, 0);
    const SimDataset data = generate_dataset(cell, rng);
    const double m = static_cast<double>(data.theta.size());
    const HypothesisSpec h = HypothesisSpec::leq(ts.c);

    auto push = [&](const MethodSpec& ms, const std::string& rule, const std::vector<bool>& delta) {
        StudyRow row;
        row.state = state_name(ts.state);
        row.scheme = ts.scheme;
        row.n_ens = ts.n_ens;
        row.method = ms.name();
        row.rule = rule;
        row.rep = rep;
        row.metrics = score(data.theta, delta, cfg.lambda2);
        rows.push_back(row);
    };

    for (const MethodSpec& ms : cfg.methods) {
        try {
            if (ms.kind != Method::model) {
                std::vector<double> pv(data.theta.size());
                for (std::size_t i = 0; i < pv.size(); ++i)
                    pv[i] = lrt_pvalue(lrt_statistic(data.counts.z_f[i], data.counts.n_f[i], data.counts.z_c[i],
                                                      data.counts.n_c[i], ts.c));
                const auto delta = ms.kind == Method::lrt_bh ? bh_procedure(pv, cfg.alpha)
                                                             : bonferroni_procedure(pv, cfg.alpha);
                push(ms, "classical", delta);
                continue;
            }
            ChainConfig chain = cfg.chain;
            chain.seed = stream_seed(rep_seed, method_key(ms));
            chain.chain_id = 0;
            chain.keep_traces = false;
            const ModelSpec spec = ModelSpec::make(ms.model);
            const PosteriorDraws draws =
                spec.uses_eof()
                    ? run_chain(spec, data.counts, cell.regions, &cell.fit_basis[0], &cell.fit_basis[1], chain)
                    : run_chain(spec, data.counts, cell.regions, nullptr, nullptr, chain);
            const auto pi = posterior_null_probs(draws.rr, h);
            for (Rule r : cfg.rules) {
                const double level = r == Rule::r1 ? cfg.alpha : r == Rule::r2 ? cfg.lambda2 : cfg.gamma_fraction * m;
                push(ms, rule_name(r), apply_rule(r, pi, level).delta);
            }
        } catch (const std::exception& e) {
            failures.push_back({state_name(ts.state), ts.scheme, ts.n_ens, ms.name(), rep, e.what()});
        }
    }
}

inline std::vector<StudySummaryRow> aggregate(const std::vector<StudyRow>& rows,
                                              const std::vector<StudyFailure>& failures)
{
    struct Acc {
        StudySummaryRow row;
        double power_sum = 0.0;
        int power_n = 0;
    };
    std::vector<Acc> accs;
    std::map<std::tuple<std::string, int, int, std::string, std::string>, std::size_t> index;
    for (const StudyRow& r : rows) {
        const auto key = std::make_tuple(r.state, r.scheme, r.n_ens, r.method, r.rule);
        auto it = index.find(key);
        if (it == index.end()) {
            it = index.emplace(key, accs.size()).first;
            Acc a;
            a.row.state = r.state;
            a.row.scheme = r.scheme;
            a.row.n_ens = r.n_ens;
            a.row.method = r.method;
            a.row.rule = r.rule;
            accs.push_back(a);
        }
        Acc& a = accs[it->second];
        ++a.row.reps;
        a.row.fdr += r.metrics.fdp;
        a.row.loss += r.metrics.loss;
        a.row.fd += r.metrics.fd;
        a.row.fn += r.metrics.fn;
        if (r.metrics.power) {
            a.power_sum += *r.metrics.power;
            ++a.power_n;
        }
    }
    std::vector<StudySummaryRow> out;
    for (Acc& a : accs) {
        const double n = a.row.reps;
        a.row.fdr /= n;
        a.row.loss /= n;
        a.row.fd /= n;
        a.row.fn /= n;
        if (a.power_n > 0)
            a.row.power = a.power_sum / a.power_n;
        for (const StudyFailure& f : failures)
            if (f.state == a.row.state && f.scheme == a.row.scheme && f.n_ens == a.row.n_ens &&
                f.method == a.row.method)
                ++a.row.failed;
        out.push_back(a.row);
    }
    // Methods that failed on every replicate still get a line.
    for (const StudyFailure& f : failures) {
        const bool present = std::any_of(out.begin(), out.end(), [&](const StudySummaryRow& r) {
            return r.state == f.state && r.scheme == f.scheme && r.n_ens == f.n_ens && r.method == f.method;
        });
        if (!present) {
            StudySummaryRow r;
            r.state = f.state;
            r.scheme = f.scheme;
            r.n_ens = f.n_ens;
            r.method = f.method;
            r.rule = "none";
            r.fdr = std::numeric_limits<double>::quiet_NaN();
            r.loss = r.fd = r.fn = r.fdr;
            for (const StudyFailure& g : failures)
                if (g.state == f.state && g.scheme == f.scheme && g.n_ens == f.n_ens && g.method == f.method)
                    ++r.failed;
            out.push_back(r);
        }
    }
    return out;
}

// Runs the whole grid. Work items are (cell, replicate) pairs; results are
// merged in grid order so output does not depend on `jobs`.
inline StudyResult run_study(const StudyConfig& cfg, const RegionSet& regions, const EofBasis* truth_f,
                             const EofBasis* truth_c)
{
    if (cfg.reps < 1)
        throw ConfigError("reps must be positive");
    if (cfg.methods.empty())
        throw ConfigError("no methods selected");
    cfg.chain.validate();
    std::vector<StudyCell> cells;
    for (TrueState st : cfg.states)
        for (int scheme : cfg.schemes)
            for (int n_ens : cfg.ensemble_sizes) {
                TrueStateSpec ts = TrueStateSpec::make(st, scheme, n_ens);
                ts.eof_discrepancy_sd = cfg.eof_discrepancy_sd;
                cells.push_back(make_study_cell(ts, regions, truth_f, truth_c,
                                                stream_seed(cfg.seed, cell_key(st, scheme, n_ens))));
            }

    const std::size_t items = cells.size() * static_cast<std::size_t>(cfg.reps);
    std::vector<std::vector<StudyRow>> rows(items);
    std::vector<std::vector<StudyFailure>> fails(items);
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t w = next++; w < items; w = next++) {
            const std::size_t c = w / static_cast<std::size_t>(cfg.reps);
            const int rep = static_cast<int>(w % static_cast<std::size_t>(cfg.reps));
            try {
                run_replicate(cells[c], cfg, rep, rows[w], fails[w]);
            } catch (const std::exception& e) {
                const TrueStateSpec& ts = cells[c].spec;
                fails[w].push_back({state_name(ts.state), ts.scheme, ts.n_ens, "*", rep, e.what()});
            }
        }
    };
    const unsigned jobs = std::max(1u, std::min<unsigned>(cfg.jobs, static_cast<unsigned>(items)));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned j = 0; j < jobs; ++j)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }

    StudyResult out;
    for (std::size_t w = 0; w < items; ++w) {
        out.rows.insert(out.rows.end(), rows[w].begin(), rows[w].end());
        out.failures.insert(out.failures.end(), fails[w].begin(), fails[w].end());
    }
    out.summary = aggregate(out.rows, out.failures);
    return out;
}

} // namespace attrib
