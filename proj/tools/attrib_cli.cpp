// attrib: command-line front end.
//
//   attrib make-regions   synthetic region + adjacency files
//   attrib make-history   synthetic historical counts
//   attrib simulate       one dataset from a true state
//   attrib eof            EOF basis from historical counts
//   attrib fit            posterior draws for a model
//   attrib classify       decisions from draws (or LRT from counts)
//   attrib study          simulation study grid
//
// Option values come from flags, then ATTRIB_* environment variables, then
// the JSON file given by --config.

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "attrib/attrib.hpp"

namespace fs = std::filesystem;
using namespace attrib;
using io::ordered_json;

namespace {

struct Globals {
    std::uint64_t seed = 1;
    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
    std::string out_dir = ".";
    std::string config;
};

std::string out_path(const Globals& g, const std::string& name)
{
    const fs::path p(name);
    if (p.is_absolute())
        return name;
    fs::create_directories(g.out_dir);
    return (fs::path(g.out_dir) / p).string();
}

void write_out(const Globals& g, const std::string& name, const std::string& content)
{
    const std::string path = out_path(g, name);
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty())
        fs::create_directories(parent);
    io::write_text(path, content);
}

std::vector<std::string> split_list(const std::vector<std::string>& items)
{
    std::vector<std::string> out;
    for (const auto& item : items) {
        std::string cur;
        for (char ch : item) {
            if (ch == ',') {
                if (!cur.empty())
                    out.push_back(cur);
                cur.clear();
            } else if (!std::isspace(static_cast<unsigned char>(ch))) {
                cur.push_back(ch);
            }
        }
        if (!cur.empty())
            out.push_back(cur);
    }
    return out;
}

int parse_int(const std::string& s, const std::string& what)
{
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used == s.size())
            return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(what + ": '" + s + "' is not an integer");
}

std::string env_name(const std::string& command, const std::string& option)
{
    std::string s = "ATTRIB_";
    if (!command.empty())
        s += command + "_";
    s += option;
    for (auto& ch : s)
        ch = ch == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return s;
}

// Long option name without dashes.
std::string long_name(const CLI::Option* opt)
{
    const auto& names = opt->get_lnames();
    return names.empty() ? std::string() : names.front();
}

void attach_env(CLI::App& app, const std::string& command)
{
    for (CLI::Option* opt : app.get_options()) {
        const std::string name = long_name(opt);
        if (name.empty() || name == "help" || name == "version" || name == "config")
            continue;
        opt->envname(env_name(command, name));
    }
}

std::string json_scalar(const nlohmann::json& v, const std::string& key)
{
    if (v.is_string())
        return v.get<std::string>();
    if (v.is_boolean())
        return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer())
        return std::to_string(v.get<long long>());
    if (v.is_number_unsigned())
        return std::to_string(v.get<unsigned long long>());
    if (v.is_number_float())
        return io::fmt(v.get<double>());
    throw ConfigError("config key '" + key + "' has an unsupported value type");
}

// Fills options still unset after flags and environment from a JSON object.
void apply_config(CLI::App& app, const nlohmann::json& obj, const std::string& where,
                  const std::vector<std::string>& skip_keys, bool check_only = false)
{
    if (!obj.is_object())
        throw ConfigError("config section '" + where + "' must be an object");
    for (const auto& [key, value] : obj.items()) {
        if (std::find(skip_keys.begin(), skip_keys.end(), key) != skip_keys.end())
            continue;
        std::string name = key;
        std::replace(name.begin(), name.end(), '_', '-');
        CLI::Option* opt = nullptr;
        for (CLI::Option* o : app.get_options())
            if (long_name(o) == name)
                opt = o;
        if (opt == nullptr || name == "help" || name == "config")
            throw ConfigError("unknown config key '" + key + "' in " + where);
        if (check_only || opt->count() > 0)
            continue;
        if (value.is_array()) {
            std::vector<std::string> vals;
            for (const auto& v : value)
                vals.push_back(json_scalar(v, key));
            if (opt->get_expected_max() <= 1) {
                std::string joined;
                for (std::size_t i = 0; i < vals.size(); ++i)
                    joined += (i ? "," : "") + vals[i];
                opt->add_result(joined);
            } else {
                opt->add_result(vals);
            }
        } else {
            opt->add_result(json_scalar(value, key));
        }
        opt->run_callback();
    }
}

ChainConfig chain_from(int iterations, int burn_in, int thin, std::uint64_t seed)
{
    ChainConfig c;
    c.iterations = iterations;
    c.burn_in = burn_in;
    c.thin = thin;
    c.seed = seed;
    c.validate();
    return c;
}

// ============================================================================
// COMMANDS
// ============================================================================

struct MakeRegionsArgs {
    std::size_t regions = 68;
    std::size_t continents = 4;
    std::size_t neighbors = 4;
    std::string out = "regions.csv";
    std::string adjacency_out = "adjacency.csv";
};

int cmd_make_regions(const Globals& g, const MakeRegionsArgs& a)
{
    SyntheticRegionOptions opt;
    opt.regions = a.regions;
    opt.continents = a.continents;
    opt.neighbors = a.neighbors;
    opt.seed = g.seed;
    const RegionSet rs = make_synthetic_regions(opt);
    write_out(g, a.out, io::regions_csv(rs));
    write_out(g, a.adjacency_out, io::adjacency_csv(rs));
    return 0;
}

struct MakeHistoryArgs {
    std::string regions;
    int years = 56;
    int nens = 100;
    int month = 1;
    std::string out = "historical.csv";
};

int cmd_make_history(const Globals& g, const MakeHistoryArgs& a)
{
    if (a.regions.empty())
        throw ConfigError("make-history needs --regions");
    if (a.nens < 1)
        throw ConfigError("--nens must be positive");
    const RegionSet rs = io::read_regions(a.regions, std::nullopt);
    if (!rs.has_centroids())
        throw DataError(a.regions + ": make-history needs centroids");
    std::vector<int> years(static_cast<std::size_t>(a.years));
    for (int t = 0; t < a.years; ++t)
        years[static_cast<std::size_t>(t)] = 1959 + t;
    std::string text;
    const char* scen[2] = {"factual", "counterfactual"};
    const double base[2] = {logit(0.10), logit(0.08)};
    Rng rng = make_rng(g.seed, 0x4157ULL);
    for (int k = 0; k < 2; ++k) {
        const HistoricalProbMatrix h = make_synthetic_history(rs, a.years, stream_seed(g.seed, k + 1), base[k]);
        Eigen::MatrixXi z(h.values.rows(), h.values.cols()), n(h.values.rows(), h.values.cols());
        for (Eigen::Index i = 0; i < z.rows(); ++i)
            for (Eigen::Index t = 0; t < z.cols(); ++t) {
                n(i, t) = a.nens;
                z(i, t) = draw_binomial(rng, a.nens, inv_logit(h.values(i, t)));
            }
        text += io::historical_csv(rs.ids, years, a.month, scen[k], z, n, k == 0);
    }
    write_out(g, a.out, text);
    return 0;
}

struct SimulateArgs {
    std::string state = "g-re";
    int scheme = 2;
    int nens = 100;
    std::string regions;
    std::string adjacency;
    std::string truth_eof_f;
    std::string truth_eof_c;
    double eof_discrepancy_sd = 0.01;
    std::string out = "counts.csv";
    std::string truth_out = "truth.csv";
};

int cmd_simulate(const Globals& g, const SimulateArgs& a)
{
    if (a.regions.empty())
        throw ConfigError("simulate needs --regions");
    const RegionSet rs = io::read_regions(
        a.regions, a.adjacency.empty() ? std::nullopt : std::optional<std::string>(a.adjacency));
    TrueStateSpec ts = TrueStateSpec::make(parse_state(a.state), a.scheme, a.nens);
    ts.eof_discrepancy_sd = a.eof_discrepancy_sd;
    std::optional<EofBasis> tf, tc;
    if (is_eof_state(ts.state)) {
        if (a.truth_eof_f.empty() || a.truth_eof_c.empty())
            throw ConfigError("EOF true states need --truth-eof-f and --truth-eof-c");
        tf = io::read_eof(a.truth_eof_f, rs.ids);
        tc = io::read_eof(a.truth_eof_c, rs.ids);
    }
    const StudyCell cell = make_study_cell(ts, rs, tf ? &*tf : nullptr, tc ? &*tc : nullptr,
                                           stream_seed(g.seed, cell_key(ts.state, ts.scheme, ts.n_ens)));
    Rng rng = make_rng(g.seed, 0x51317ULL);
    const SimDataset d = generate_dataset(cell, rng);
    write_out(g, a.out, io::counts_csv(d.counts));
    std::ostringstream o;
    o << "region_id,p_f,p_c,rr,theta\n";
    for (std::size_t i = 0; i < d.theta.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        o << rs.ids[i] << ',' << io::fmt(d.p_f(ii)) << ',' << io::fmt(d.p_c(ii)) << ','
          << io::fmt(d.p_f(ii) / d.p_c(ii)) << ',' << d.theta[i] << '\n';
    }
    write_out(g, a.truth_out, o.str());
    return 0;
}

struct EofArgs {
    std::string historical;
    int month = 1;
    std::string scenario;
    std::string out;
    int count = 0;
    bool center_anomalies = false;
    double prior_a = 1.0;
    double prior_b = 1.0;
    std::string regions;
};

int cmd_eof(const Globals& g, const EofArgs& a)
{
    if (a.historical.empty() || a.scenario.empty() || a.out.empty())
        throw ConfigError("eof needs --historical, --scenario and --out");
    std::vector<std::string> order;
    if (!a.regions.empty())
        order = io::read_regions(a.regions, std::nullopt).ids;
    const io::HistoricalCounts hc = io::read_historical(a.historical, a.month, a.scenario, order);
    HistoricalProbMatrix h = estimate_historical_probs(hc.z, hc.n, a.prior_a, a.prior_b);
    h.scenario = a.scenario;
    h.month = a.month;
    if (a.center_anomalies)
        remove_yearly_means(h);
    const Eigen::MatrixXd s = empirical_logit_cov(h);
    const Eigen::Index m = s.rows();
    const Eigen::Index p = a.count > 0 ? a.count : std::min<Eigen::Index>(m, h.values.cols());
    const EofBasis b = compute_eofs(s, p);
    write_out(g, a.out, io::eof_csv(hc.region_ids, b));
    write_out(g, io::eigenvalue_path(a.out), io::eigenvalues_csv(b));
    return 0;
}

struct FitArgs {
    std::string model;
    std::string counts;
    std::string regions;
    std::string adjacency;
    std::string eof_f;
    std::string eof_c;
    int iterations = 21000;
    int burn_in = 5000;
    int thin = 4;
    std::string out;
    std::string diagnostics;
};

int cmd_fit(const Globals& g, const FitArgs& a)
{
    if (a.model.empty() || a.counts.empty())
        throw ConfigError("fit needs --model and --counts");
    const ModelSpec spec = ModelSpec::make(parse_model(a.model));
    const ScenarioCounts counts = io::read_counts(a.counts);
    std::optional<RegionSet> regions;
    if (!a.regions.empty()) {
        RegionSet rs = io::read_regions(
            a.regions, a.adjacency.empty() ? std::nullopt : std::optional<std::string>(a.adjacency));
        // reorder to the count file's region order
        if (rs.size() != counts.size())
            throw DimensionError("region file has " + std::to_string(rs.size()) + " regions, counts have " +
                                 std::to_string(counts.size()));
        RegionSet ordered;
        std::vector<std::size_t> pos(rs.size());
        for (std::size_t i = 0; i < counts.size(); ++i) {
            const auto j = rs.index_of(counts.region_ids[i]);
            if (!j)
                throw DimensionError("region '" + counts.region_ids[i] + "' missing from " + a.regions);
            pos[*j] = i;
            ordered.ids.push_back(rs.ids[*j]);
            if (rs.has_centroids())
                ordered.centroids.push_back(rs.centroids[*j]);
        }
        if (rs.has_adjacency()) {
            ordered.adjacency.assign(rs.size(), {});
            for (std::size_t j = 0; j < rs.size(); ++j)
                for (std::size_t k : rs.adjacency[j])
                    if (j < k)
                        add_edge(ordered, pos[j], pos[k]);
        }
        regions = std::move(ordered);
    }
    if (spec.uses_adjacency() && (!regions || !regions->has_adjacency()))
        throw DataError("model " + model_name(spec.id) + " requires --regions and --adjacency");
    if (spec.uses_centroids() && (!regions || !regions->has_centroids()))
        throw DataError("model " + model_name(spec.id) + " requires --regions with centroids");
    std::optional<EofBasis> bf, bc;
    if (spec.uses_eof()) {
        if (a.eof_f.empty() || a.eof_c.empty())
            throw DataError("model " + model_name(spec.id) + " requires --eof-f and --eof-c");
        bf = io::read_eof(a.eof_f, counts.region_ids);
        bc = io::read_eof(a.eof_c, counts.region_ids);
    } else if (!a.eof_f.empty() || !a.eof_c.empty()) {
        throw ConfigError("EOF bases only apply to m7, m8, m9 and rnb");
    }
    const ChainConfig cfg = chain_from(a.iterations, a.burn_in, a.thin, g.seed);
    const PosteriorDraws d = run_chain(spec, counts, regions ? &*regions : nullptr, bf ? &*bf : nullptr,
                                       bc ? &*bc : nullptr, cfg);
    const std::string name = model_name(spec.id);
    write_out(g, a.out.empty() ? "draws_" + name + ".csv" : a.out, io::draws_csv(d));
    write_out(g, a.diagnostics.empty() ? "diagnostics_" + name + ".json" : a.diagnostics,
              io::diagnostics_json(d, name, cfg).dump(2) + "\n");
    for (const auto& w : d.warnings)
        std::cerr << "warning: " << w << '\n';
    return 0;
}

struct ClassifyArgs {
    std::string draws;
    std::string counts;
    std::string method;
    std::string hypothesis = "rr<=1";
    std::string rule = "r1";
    double alpha = 0.1;
    double lambda2 = 9.0;
    double gamma = -1.0;
    bool multi = false;
    double l = 0.5;
    double u = 2.0;
    std::string out = "decisions.json";
    std::string csv = "decisions.csv";
};

int cmd_classify(const Globals& g, const ClassifyArgs& a)
{
    ordered_json j;
    std::ostringstream csv;
    if (!a.method.empty()) {
        const MethodSpec ms = parse_method(a.method);
        if (ms.kind == Method::model)
            throw ConfigError("--method takes lrt-bh or lrt-fwer");
        if (a.counts.empty())
            throw ConfigError("classical classification needs --counts");
        const HypothesisSpec h = parse_hypothesis(a.hypothesis);
        if (h.kind != HypothesisKind::ratio_leq)
            throw ConfigError("the LRT supports one-sided nulls rr<=c only");
        const ScenarioCounts c = io::read_counts(a.counts);
        std::vector<double> stat(c.size()), pv(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) {
            stat[i] = lrt_statistic(c.z_f[i], c.n_f[i], c.z_c[i], c.n_c[i], h.c);
            pv[i] = lrt_pvalue(stat[i]);
        }
        const auto delta = ms.kind == Method::lrt_bh ? bh_procedure(pv, a.alpha) : bonferroni_procedure(pv, a.alpha);
        j["method"] = ms.name();
        j["hypothesis"] = h.to_string();
        j["alpha"] = a.alpha;
        j["rejections"] = std::count(delta.begin(), delta.end(), true);
        j["regions"] = ordered_json::array();
        csv << "region_id,statistic,p_value,delta\n";
        for (std::size_t i = 0; i < c.size(); ++i) {
            j["regions"].push_back(
                {{"region_id", c.region_ids[i]}, {"statistic", stat[i]}, {"p_value", pv[i]}, {"delta", bool(delta[i])}});
            csv << c.region_ids[i] << ',' << io::fmt(stat[i]) << ',' << io::fmt(pv[i]) << ',' << int(delta[i]) << '\n';
        }
    } else {
        if (a.draws.empty())
            throw ConfigError("classify needs --draws (or --method with --counts)");
        const PosteriorDraws d = io::read_draws(a.draws);
        if (a.multi) {
            const MultiCategoryResult r = multi_category(d.rr, a.l, a.u, a.alpha);
            const auto hyps = multi_category_hypotheses(a.l, a.u);
            j["mode"] = "multi";
            j["l"] = a.l;
            j["u"] = a.u;
            j["alpha"] = a.alpha;
            j["families"] = ordered_json::array();
            for (std::size_t h = 0; h < 5; ++h)
                j["families"].push_back({{"hypothesis", hyps[h].to_string()},
                                         {"rejections", r.decisions[h].rejections},
                                         {"threshold", r.decisions[h].threshold},
                                         {"fdr", r.decisions[h].summary.fdr}});
            j["regions"] = ordered_json::array();
            csv << "region_id,pi_h1,pi_h2,pi_h3,pi_h4,pi_h5,category,contradictory\n";
            for (std::size_t i = 0; i < d.region_ids.size(); ++i) {
                ordered_json reg;
                reg["region_id"] = d.region_ids[i];
                std::vector<double> pis;
                std::vector<bool> rej;
                csv << d.region_ids[i];
                for (std::size_t h = 0; h < 5; ++h) {
                    pis.push_back(r.pi[h][i]);
                    rej.push_back(r.decisions[h].delta[i]);
                    csv << ',' << io::fmt(r.pi[h][i]);
                }
                reg["pi"] = pis;
                reg["rejected"] = rej;
                reg["category"] = category_name(r.categories[i].category);
                reg["contradictory"] = r.categories[i].contradictory;
                csv << ',' << category_name(r.categories[i].category) << ',' << int(r.categories[i].contradictory)
                    << '\n';
                j["regions"].push_back(reg);
            }
        } else {
            const HypothesisSpec h = parse_hypothesis(a.hypothesis);
            const Rule rule = parse_rule(a.rule);
            const double m = static_cast<double>(d.region_ids.size());
            const double level = rule == Rule::r1 ? a.alpha : rule == Rule::r2 ? a.lambda2 : (a.gamma > 0 ? a.gamma : 0.1 * m);
            const auto pi = posterior_null_probs(d.rr, h);
            const DecisionOutcome out = apply_rule(rule, pi, level);
            j["hypothesis"] = h.to_string();
            j["rule"] = rule_name(rule);
            j["level"] = level;
            j["threshold"] = out.threshold;
            j["rejections"] = out.rejections;
            j["summary"] = {{"fdr", out.summary.fdr}, {"fnr", out.summary.fnr}, {"fd", out.summary.fd}, {"fn", out.summary.fn}};
            j["regions"] = ordered_json::array();
            csv << "region_id,pi,delta\n";
            for (std::size_t i = 0; i < pi.size(); ++i) {
                j["regions"].push_back({{"region_id", d.region_ids[i]}, {"pi", pi[i]}, {"delta", bool(out.delta[i])}});
                csv << d.region_ids[i] << ',' << io::fmt(pi[i]) << ',' << int(out.delta[i]) << '\n';
            }
        }
    }
    write_out(g, a.out, j.dump(2) + "\n");
    if (!a.csv.empty())
        write_out(g, a.csv, csv.str());
    return 0;
}

struct StudyArgs {
    std::vector<std::string> states{"g-re"};
    std::vector<std::string> schemes{"2"};
    std::vector<std::string> nens{"100"};
    std::vector<std::string> methods{"lrt-bh", "lrt-fwer", "m1", "rnb"};
    std::vector<std::string> rules{"r1", "r2", "r3"};
    int reps = 20;
    bool full = false;
    std::string regions;
    std::string adjacency;
    std::string truth_eof_f;
    std::string truth_eof_c;
    int iterations = 21000;
    int burn_in = 5000;
    int thin = 4;
    double eof_discrepancy_sd = 0.01;
    std::string metrics_out = "study_metrics.csv";
    std::string summary_out = "study_summary.csv";
    std::string failures_out = "study_failures.csv";
};

int cmd_study(const Globals& g, const StudyArgs& a)
{
    StudyConfig cfg;
    cfg.reps = a.reps;
    cfg.seed = g.seed;
    cfg.jobs = g.jobs;
    cfg.eof_discrepancy_sd = a.eof_discrepancy_sd;
    cfg.chain = chain_from(a.iterations, a.burn_in, a.thin, g.seed);
    cfg.states.clear();
    cfg.schemes.clear();
    cfg.ensemble_sizes.clear();
    if (a.full) {
        for (int s = 0; s < 6; ++s)
            cfg.states.push_back(static_cast<TrueState>(s));
        cfg.schemes = {1, 2, 3};
        cfg.ensemble_sizes = {50, 100, 400};
    } else {
        for (const auto& s : split_list(a.states))
            cfg.states.push_back(parse_state(s));
        for (const auto& s : split_list(a.schemes))
            cfg.schemes.push_back(parse_int(s, "--scheme"));
        for (const auto& s : split_list(a.nens))
            cfg.ensemble_sizes.push_back(parse_int(s, "--nens"));
    }
    for (const auto& m : split_list(a.methods))
        cfg.methods.push_back(parse_method(m));
    cfg.rules.clear();
    for (const auto& r : split_list(a.rules))
        cfg.rules.push_back(parse_rule(r));

    RegionSet rs;
    if (a.regions.empty()) {
        SyntheticRegionOptions opt;
        opt.seed = g.seed;
        rs = make_synthetic_regions(opt);
    } else {
        rs = io::read_regions(a.regions, a.adjacency.empty() ? std::nullopt : std::optional<std::string>(a.adjacency));
    }
    std::optional<EofBasis> tf, tc;
    if (!a.truth_eof_f.empty() || !a.truth_eof_c.empty()) {
        if (a.truth_eof_f.empty() || a.truth_eof_c.empty())
            throw ConfigError("give both --truth-eof-f and --truth-eof-c");
        tf = io::read_eof(a.truth_eof_f, rs.ids);
        tc = io::read_eof(a.truth_eof_c, rs.ids);
    } else {
        const Eigen::Index years = 56;
        const Eigen::Index p = std::min<Eigen::Index>(years, static_cast<Eigen::Index>(rs.size()));
        tf = compute_eofs(empirical_logit_cov(make_synthetic_history(rs, years, stream_seed(g.seed, 1))), p);
        tc = compute_eofs(empirical_logit_cov(make_synthetic_history(rs, years, stream_seed(g.seed, 2))), p);
    }
    const StudyResult res = run_study(cfg, rs, &*tf, &*tc);
    write_out(g, a.metrics_out, io::metrics_csv(res.rows));
    write_out(g, a.summary_out, io::summary_csv(res.summary));
    write_out(g, a.failures_out, io::failures_csv(res.failures));
    for (const StudyFailure& f : res.failures)
        std::cerr << "replicate failed: " << f.state << " scheme " << f.scheme << " n_ens " << f.n_ens << " "
                  << f.method << " rep " << f.rep << ": " << f.message << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Bayesian multiple testing for event attribution"};
    app.set_version_flag("--version", std::string("attrib ") + kVersion);
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "random seed");
    app.add_option("--jobs", g.jobs, "worker threads for the study queue")->check(CLI::PositiveNumber);
    app.add_option("--out-dir", g.out_dir, "directory for relative output paths");
    app.add_option("--config", g.config, "JSON run configuration");

    MakeRegionsArgs mr;
    auto* c_mr = app.add_subcommand("make-regions", "write a synthetic region set");
    c_mr->add_option("--regions", mr.regions, "number of regions");
    c_mr->add_option("--continents", mr.continents, "number of region clusters");
    c_mr->add_option("--neighbors", mr.neighbors, "nearest neighbours per region");
    c_mr->add_option("--out", mr.out, "region file");
    c_mr->add_option("--adjacency-out", mr.adjacency_out, "adjacency file");

    MakeHistoryArgs mh;
    auto* c_mh = app.add_subcommand("make-history", "write synthetic historical counts");
    c_mh->add_option("--regions", mh.regions, "region file with centroids");
    c_mh->add_option("--years", mh.years, "number of years");
    c_mh->add_option("--nens", mh.nens, "ensemble size");
    c_mh->add_option("--month", mh.month, "month label");
    c_mh->add_option("--out", mh.out, "historical count file");

    SimulateArgs sm;
    auto* c_sm = app.add_subcommand("simulate", "draw one dataset from a true state");
    c_sm->add_option("--state", sm.state, "g-re, ng-re, gp-s, gp-l, eof-g or eof-ng");
    c_sm->add_option("--scheme", sm.scheme, "1, 2 or 3");
    c_sm->add_option("--nens", sm.nens, "ensemble size");
    c_sm->add_option("--regions", sm.regions, "region file");
    c_sm->add_option("--adjacency", sm.adjacency, "adjacency file");
    c_sm->add_option("--truth-eof-f", sm.truth_eof_f, "generating EOFs (factual)");
    c_sm->add_option("--truth-eof-c", sm.truth_eof_c, "generating EOFs (counterfactual)");
    c_sm->add_option("--eof-discrepancy-sd", sm.eof_discrepancy_sd, "EOF-G discrepancy sd");
    c_sm->add_option("--out", sm.out, "count file");
    c_sm->add_option("--truth-out", sm.truth_out, "true probabilities file");

    EofArgs eo;
    auto* c_eof = app.add_subcommand("eof", "EOF basis from historical counts");
    c_eof->add_option("--historical", eo.historical, "historical count file");
    c_eof->add_option("--month", eo.month, "month to use");
    c_eof->add_option("--scenario", eo.scenario, "scenario label");
    c_eof->add_option("--out", eo.out, "EOF matrix file");
    c_eof->add_option("--count", eo.count, "number of EOFs (default min(M, T))");
    c_eof->add_flag("--center-anomalies", eo.center_anomalies, "remove each year's cross-region mean");
    c_eof->add_option("--prior-a", eo.prior_a, "beta prior a");
    c_eof->add_option("--prior-b", eo.prior_b, "beta prior b");
    c_eof->add_option("--regions", eo.regions, "region file fixing row order");

    FitArgs ft;
    auto* c_fit = app.add_subcommand("fit", "posterior draws for a model");
    c_fit->add_option("--model", ft.model, "m1..m9 or rnb");
    c_fit->add_option("--counts", ft.counts, "count file");
    c_fit->add_option("--regions", ft.regions, "region file");
    c_fit->add_option("--adjacency", ft.adjacency, "adjacency file");
    c_fit->add_option("--eof-f", ft.eof_f, "factual EOF file");
    c_fit->add_option("--eof-c", ft.eof_c, "counterfactual EOF file");
    c_fit->add_option("--iterations", ft.iterations, "MCMC iterations");
    c_fit->add_option("--burn-in", ft.burn_in, "burn-in iterations");
    c_fit->add_option("--thin", ft.thin, "thinning interval");
    c_fit->add_option("--out", ft.out, "draws file");
    c_fit->add_option("--diagnostics", ft.diagnostics, "diagnostics JSON");

    ClassifyArgs cl;
    auto* c_cl = app.add_subcommand("classify", "decisions from posterior draws");
    c_cl->add_option("--draws", cl.draws, "draws file");
    c_cl->add_option("--counts", cl.counts, "count file (classical methods)");
    c_cl->add_option("--method", cl.method, "lrt-bh or lrt-fwer");
    c_cl->add_option("--hypothesis", cl.hypothesis, "rr<=c, rr>=c or rr<=l|rr>=u");
    c_cl->add_option("--rule", cl.rule, "r1, r2 or r3");
    c_cl->add_option("--alpha", cl.alpha, "R1 / multiplicity level");
    c_cl->add_option("--lambda2", cl.lambda2, "R2 loss weight");
    c_cl->add_option("--gamma", cl.gamma, "R3 bound (default 0.1 M)");
    c_cl->add_flag("--multi", cl.multi, "multi-category classification");
    c_cl->add_option("--l", cl.l, "lower no-change bound");
    c_cl->add_option("--u", cl.u, "upper no-change bound");
    c_cl->add_option("--out", cl.out, "decisions JSON");
    c_cl->add_option("--csv", cl.csv, "decisions CSV");

    StudyArgs sa;
    auto* c_st = app.add_subcommand("study", "simulation study");
    c_st->add_option("--state", sa.states, "true states (comma list)");
    c_st->add_option("--scheme", sa.schemes, "schemes (comma list)");
    c_st->add_option("--nens", sa.nens, "ensemble sizes (comma list)");
    c_st->add_option("--methods", sa.methods, "lrt-bh, lrt-fwer, m1..m9, rnb");
    c_st->add_option("--rules", sa.rules, "r1, r2, r3");
    c_st->add_option("--reps", sa.reps, "replicates per cell");
    c_st->add_flag("--full", sa.full, "all states, schemes and ensemble sizes");
    c_st->add_option("--regions", sa.regions, "region file (default: synthetic 68)");
    c_st->add_option("--adjacency", sa.adjacency, "adjacency file");
    c_st->add_option("--truth-eof-f", sa.truth_eof_f, "generating EOFs (factual)");
    c_st->add_option("--truth-eof-c", sa.truth_eof_c, "generating EOFs (counterfactual)");
    c_st->add_option("--iterations", sa.iterations, "MCMC iterations");
    c_st->add_option("--burn-in", sa.burn_in, "burn-in iterations");
    c_st->add_option("--thin", sa.thin, "thinning interval");
    c_st->add_option("--eof-discrepancy-sd", sa.eof_discrepancy_sd, "EOF-G discrepancy sd");
    c_st->add_option("--metrics-out", sa.metrics_out, "per-replicate metrics file");
    c_st->add_option("--summary-out", sa.summary_out, "aggregated metrics file");
    c_st->add_option("--failures-out", sa.failures_out, "failed replicate log");

    attach_env(app, "");
    const std::vector<std::pair<CLI::App*, std::string>> commands{
        {c_mr, "make-regions"}, {c_mh, "make-history"}, {c_sm, "simulate"}, {c_eof, "eof"},
        {c_fit, "fit"},         {c_cl, "classify"},     {c_st, "study"}};
    for (auto& [cmd, name] : commands)
        attach_env(*cmd, name);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (!g.config.empty()) {
            std::ifstream in(g.config);
            if (!in)
                throw ConfigError("cannot open config '" + g.config + "'");
            nlohmann::json cfg;
            try {
                cfg = nlohmann::json::parse(in);
            } catch (const nlohmann::json::parse_error& e) {
                throw ConfigError(g.config + ": " + e.what());
            }
            std::vector<std::string> names;
            for (auto& [cmd, name] : commands)
                names.push_back(name);
            apply_config(app, cfg, "top level", names);
            for (auto& [cmd, name] : commands)
                if (cfg.contains(name))
                    apply_config(*cmd, cfg[name], name, {}, !cmd->parsed());
        }
        if (c_mr->parsed())
            return cmd_make_regions(g, mr);
        if (c_mh->parsed())
            return cmd_make_history(g, mh);
        if (c_sm->parsed())
            return cmd_simulate(g, sm);
        if (c_eof->parsed())
            return cmd_eof(g, eo);
        if (c_fit->parsed())
            return cmd_fit(g, ft);
        if (c_cl->parsed())
            return cmd_classify(g, cl);
        if (c_st->parsed())
            return cmd_study(g, sa);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 4;
    } catch (const DomainError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
    return 0;
}
