#pragma once

// CSV / JSON readers and writers for regions, counts, historical counts,
// EOF bases, posterior draws, decisions and study metrics. Doubles are
// written with %.17g so files round-trip byte for byte.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "attrib/core.hpp"
#include "attrib/decision_rules.hpp"
#include "attrib/eof_basis.hpp"
#include "attrib/errors.hpp"
#include "attrib/mcmc.hpp"
#include "attrib/simstudy.hpp"

namespace attrib::io {

using ordered_json = nlohmann::ordered_json;

inline std::string fmt(double v)
{
    if (std::isnan(v))
        return "NA";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ============================================================================
// CSV PRIMITIVES
// ============================================================================

struct CsvTable {
    std::string path;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line; // source line per row

    std::size_t column(const std::string& name) const
    {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw DataError(path + ": missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    }

    [[noreturn]] void fail(std::size_t row, const std::string& msg) const
    {
        throw DataError(path + ":" + std::to_string(line[row]) + ": " + msg);
    }

    const std::string& cell(std::size_t row, std::size_t col) const { return rows[row][col]; }

    double number(std::size_t row, std::size_t col) const
    {
        const std::string& s = rows[row][col];
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size())
                throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            fail(row, "'" + s + "' is not a number (column " + header[col] + ")");
        }
    }

    int integer(std::size_t row, std::size_t col) const
    {
        const std::string& s = rows[row][col];
        try {
            std::size_t used = 0;
            const long v = std::stol(s, &used);
            if (used != s.size())
                throw std::invalid_argument(s);
            return static_cast<int>(v);
        } catch (const std::exception&) {
            fail(row, "'" + s + "' is not an integer (column " + header[col] + ")");
        }
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    for (auto& s : out) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    }
    return out;
}

inline CsvTable read_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open '" + path + "'");
    CsvTable t;
    t.path = path;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r" || line[0] == '#')
            continue;
        auto fields = split_csv_line(line);
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size())
            throw DataError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                            " fields, found " + std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
        t.line.push_back(lineno);
    }
    if (t.header.empty())
        throw DataError(path + ": empty file");
    return t;
}

inline void write_text(const std::string& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot write '" + path + "'");
    out << content;
    if (!out)
        throw DataError("write failed for '" + path + "'");
}

// ============================================================================
// REGIONS
// ============================================================================

inline RegionSet read_regions(const std::string& path, const std::optional<std::string>& adjacency_path)
{
    const CsvTable t = read_csv(path);
    const std::size_t id = t.column("region_id");
    const bool has_xyz = std::find(t.header.begin(), t.header.end(), "x") != t.header.end();
    RegionSet rs;
    std::set<std::string> seen;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string& rid = t.cell(r, id);
        if (rid.empty())
            t.fail(r, "empty region id");
        if (!seen.insert(rid).second)
            t.fail(r, "duplicate region id '" + rid + "'");
        rs.ids.push_back(rid);
        if (has_xyz)
            rs.centroids.emplace_back(t.number(r, t.column("x")), t.number(r, t.column("y")),
                                      t.number(r, t.column("z")));
    }
    if (adjacency_path) {
        const CsvTable a = read_csv(*adjacency_path);
        const std::size_t ci = a.column("region_id");
        const std::size_t cj = a.column("neighbor_id");
        rs.adjacency.assign(rs.size(), {});
        for (std::size_t r = 0; r < a.rows.size(); ++r) {
            const auto i = rs.index_of(a.cell(r, ci));
            const auto j = rs.index_of(a.cell(r, cj));
            if (!i || !j)
                a.fail(r, "unknown region id");
            if (*i == *j)
                a.fail(r, "self-adjacency for '" + a.cell(r, ci) + "'");
            add_edge(rs, *i, *j);
        }
    }
    rs.validate();
    return rs;
}

inline std::string regions_csv(const RegionSet& rs)
{
    std::ostringstream o;
    o << (rs.has_centroids() ? "region_id,x,y,z\n" : "region_id\n");
    for (std::size_t i = 0; i < rs.size(); ++i) {
        o << rs.ids[i];
        if (rs.has_centroids())
            o << ',' << fmt(rs.centroids[i].x()) << ',' << fmt(rs.centroids[i].y()) << ','
              << fmt(rs.centroids[i].z());
        o << '\n';
    }
    return o.str();
}

// Each undirected edge once, smaller index first.
inline std::string adjacency_csv(const RegionSet& rs)
{
    std::ostringstream o;
    o << "region_id,neighbor_id\n";
    for (std::size_t i = 0; i < rs.adjacency.size(); ++i)
        for (std::size_t j : rs.adjacency[i])
            if (i < j)
                o << rs.ids[i] << ',' << rs.ids[j] << '\n';
    return o.str();
}

// ============================================================================
// COUNTS
// ============================================================================

inline ScenarioCounts read_counts(const std::string& path)
{
    const CsvTable t = read_csv(path);
    const std::size_t id = t.column("region_id"), zf = t.column("z_f"), nf = t.column("n_f"),
                      zc = t.column("z_c"), nc = t.column("n_c");
    ScenarioCounts c;
    std::set<std::string> seen;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        if (!seen.insert(t.cell(r, id)).second)
            t.fail(r, "duplicate region id '" + t.cell(r, id) + "'");
        c.region_ids.push_back(t.cell(r, id));
        c.z_f.push_back(t.integer(r, zf));
        c.n_f.push_back(t.integer(r, nf));
        c.z_c.push_back(t.integer(r, zc));
        c.n_c.push_back(t.integer(r, nc));
        const std::size_t i = c.z_f.size() - 1;
        if (c.n_f[i] <= 0 || c.n_c[i] <= 0)
            t.fail(r, "ensemble size must be positive");
        if (c.z_f[i] < 0 || c.z_f[i] > c.n_f[i] || c.z_c[i] < 0 || c.z_c[i] > c.n_c[i])
            t.fail(r, "count outside [0, n]");
    }
    if (c.size() == 0)
        throw DataError(path + ": no regions");
    return c;
}

inline std::string counts_csv(const ScenarioCounts& c)
{
    std::ostringstream o;
    o << "region_id,z_f,n_f,z_c,n_c\n";
    for (std::size_t i = 0; i < c.size(); ++i)
        o << c.region_ids[i] << ',' << c.z_f[i] << ',' << c.n_f[i] << ',' << c.z_c[i] << ',' << c.n_c[i] << '\n';
    return o.str();
}

// ============================================================================
// HISTORICAL COUNTS
// ============================================================================

struct HistoricalCounts {
    std::vector<std::string> region_ids;
    std::vector<int> years;
    Eigen::MatrixXi z, n; // region x year
};

// Rows of historical.csv for one month and scenario, arranged region x year.
// Region order follows `region_order` when given, else first appearance.
inline HistoricalCounts read_historical(const std::string& path, int month, const std::string& scenario,
                                        const std::vector<std::string>& region_order = {})
{
    const CsvTable t = read_csv(path);
    const std::size_t cid = t.column("region_id"), cy = t.column("year"), cm = t.column("month"),
                      cs = t.column("scenario"), cz = t.column("z"), cn = t.column("n");
    std::map<std::pair<std::string, int>, std::pair<int, int>> cells;
    std::vector<std::string> regions = region_order;
    std::set<std::string> known(regions.begin(), regions.end());
    std::set<int> years;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        if (t.cell(r, cs) != scenario || t.integer(r, cm) != month)
            continue;
        const std::string& rid = t.cell(r, cid);
        if (region_order.empty() && known.insert(rid).second)
            regions.push_back(rid);
        else if (!region_order.empty() && !known.count(rid))
            t.fail(r, "region '" + rid + "' not in the region list");
        const int year = t.integer(r, cy);
        const int z = t.integer(r, cz), n = t.integer(r, cn);
        if (n <= 0 || z < 0 || z > n)
            t.fail(r, "count outside [0, n]");
        if (!cells.emplace(std::make_pair(rid, year), std::make_pair(z, n)).second)
            t.fail(r, "duplicate row for region '" + rid + "' year " + std::to_string(year));
        years.insert(year);
    }
    if (cells.empty())
        throw DataError(path + ": no rows for scenario '" + scenario + "' month " + std::to_string(month));
    HistoricalCounts h;
    h.region_ids = regions;
    h.years.assign(years.begin(), years.end());
    const auto m = static_cast<Eigen::Index>(regions.size());
    const auto ny = static_cast<Eigen::Index>(h.years.size());
    h.z.resize(m, ny);
    h.n.resize(m, ny);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index y = 0; y < ny; ++y) {
            const auto it = cells.find({regions[static_cast<std::size_t>(i)], h.years[static_cast<std::size_t>(y)]});
            if (it == cells.end())
                throw DataError(path + ": scenario '" + scenario + "' has no row for region '" +
                                regions[static_cast<std::size_t>(i)] + "' year " +
                                std::to_string(h.years[static_cast<std::size_t>(y)]));
            h.z(i, y) = it->second.first;
            h.n(i, y) = it->second.second;
        }
    return h;
}

inline std::string historical_csv(const std::vector<std::string>& region_ids, const std::vector<int>& years,
                                  int month, const std::string& scenario, const Eigen::MatrixXi& z,
                                  const Eigen::MatrixXi& n, bool header = true)
{
    std::ostringstream o;
    if (header)
        o << "region_id,year,month,scenario,z,n\n";
    for (std::size_t y = 0; y < years.size(); ++y)
        for (std::size_t i = 0; i < region_ids.size(); ++i)
            o << region_ids[i] << ',' << years[y] << ',' << month << ',' << scenario << ','
              << z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(y)) << ','
              << n(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(y)) << '\n';
    return o.str();
}

// ============================================================================
// EOF BASIS
// ============================================================================

inline std::string eof_csv(const std::vector<std::string>& region_ids, const EofBasis& b)
{
    std::ostringstream o;
    o << "region_id";
    for (Eigen::Index j = 0; j < b.count(); ++j)
        o << ",eof_" << (j + 1);
    o << '\n';
    for (Eigen::Index i = 0; i < b.regions(); ++i) {
        o << region_ids[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < b.count(); ++j)
            o << ',' << fmt(b.vectors(i, j));
        o << '\n';
    }
    return o.str();
}

inline std::string eigenvalues_csv(const EofBasis& b)
{
    std::ostringstream o;
    o << "component,eigenvalue\n";
    for (Eigen::Index j = 0; j < b.count(); ++j)
        o << (j + 1) << ',' << fmt(b.eigenvalues(j)) << '\n';
    return o.str();
}

// Companion eigenvalue file: "eof_f.csv" -> "eof_f.eigenvalues.csv".
inline std::string eigenvalue_path(const std::string& eof_path)
{
    const auto dot = eof_path.rfind('.');
    const auto slash = eof_path.find_last_of("/\\");
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
        return eof_path + ".eigenvalues.csv";
    return eof_path.substr(0, dot) + ".eigenvalues" + eof_path.substr(dot);
}

// Reads an EOF matrix with rows reordered to `region_order`. Eigenvalues are
// read from the companion file when present, else set to NaN.
inline EofBasis read_eof(const std::string& path, const std::vector<std::string>& region_order)
{
    const CsvTable t = read_csv(path);
    const std::size_t id = t.column("region_id");
    const auto p = static_cast<Eigen::Index>(t.header.size()) - 1;
    if (p < 1)
        throw DataError(path + ": no EOF columns");
    std::map<std::string, std::size_t> row_of;
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        if (!row_of.emplace(t.cell(r, id), r).second)
            t.fail(r, "duplicate region id '" + t.cell(r, id) + "'");
    if (row_of.size() != region_order.size())
        throw DimensionError(path + ": basis has " + std::to_string(row_of.size()) + " regions, expected " +
                             std::to_string(region_order.size()));
    EofBasis b;
    b.vectors.resize(static_cast<Eigen::Index>(region_order.size()), p);
    for (std::size_t i = 0; i < region_order.size(); ++i) {
        const auto it = row_of.find(region_order[i]);
        if (it == row_of.end())
            throw DimensionError(path + ": basis has no row for region '" + region_order[i] + "'");
        Eigen::Index col = 0;
        for (std::size_t c = 0; c < t.header.size(); ++c)
            if (c != id)
                b.vectors(static_cast<Eigen::Index>(i), col++) = t.number(it->second, c);
    }
    b.eigenvalues = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
    const std::string ev_path = eigenvalue_path(path);
    if (std::ifstream(ev_path)) {
        const CsvTable e = read_csv(ev_path);
        const std::size_t ce = e.column("eigenvalue");
        if (static_cast<Eigen::Index>(e.rows.size()) != p)
            throw DimensionError(ev_path + ": expected " + std::to_string(p) + " eigenvalues");
        for (std::size_t r = 0; r < e.rows.size(); ++r)
            b.eigenvalues(static_cast<Eigen::Index>(r)) = e.number(r, ce);
    }
    return b;
}

// ============================================================================
// DRAWS
// ============================================================================

inline std::string draws_csv(const PosteriorDraws& d)
{
    std::ostringstream o;
    o << "sample,region_id,p_f,p_c,rr\n";
    for (Eigen::Index s = 0; s < d.samples(); ++s)
        for (Eigen::Index i = 0; i < d.regions(); ++i)
            o << (s + 1) << ',' << d.region_ids[static_cast<std::size_t>(i)] << ',' << fmt(d.p_f(s, i)) << ','
              << fmt(d.p_c(s, i)) << ',' << fmt(d.rr(s, i)) << '\n';
    return o.str();
}

inline PosteriorDraws read_draws(const std::string& path)
{
    const CsvTable t = read_csv(path);
    const std::size_t cs = t.column("sample"), cid = t.column("region_id"), cf = t.column("p_f"),
                      cc = t.column("p_c"), cr = t.column("rr");
    std::vector<std::string> regions;
    std::map<std::string, std::size_t> index;
    int max_sample = 0;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        if (index.emplace(t.cell(r, cid), regions.size()).second)
            regions.push_back(t.cell(r, cid));
        const int s = t.integer(r, cs);
        if (s < 1)
            t.fail(r, "sample index must be >= 1");
        max_sample = std::max(max_sample, s);
    }
    if (regions.empty())
        throw DataError(path + ": no draws");
    if (t.rows.size() != static_cast<std::size_t>(max_sample) * regions.size())
        throw DimensionError(path + ": expected " + std::to_string(max_sample) + " draws for each of " +
                             std::to_string(regions.size()) + " regions");
    PosteriorDraws d;
    d.region_ids = regions;
    d.p_f = Eigen::MatrixXd::Constant(max_sample, static_cast<Eigen::Index>(regions.size()),
                                      std::numeric_limits<double>::quiet_NaN());
    d.p_c = d.p_f;
    d.rr = d.p_f;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const Eigen::Index s = t.integer(r, cs) - 1;
        const auto i = static_cast<Eigen::Index>(index.at(t.cell(r, cid)));
        if (!std::isnan(d.rr(s, i)))
            t.fail(r, "duplicate draw");
        d.p_f(s, i) = t.number(r, cf);
        d.p_c(s, i) = t.number(r, cc);
        d.rr(s, i) = t.number(r, cr);
        if (!(d.p_f(s, i) > 0.0 && d.p_f(s, i) < 1.0 && d.p_c(s, i) > 0.0 && d.p_c(s, i) < 1.0))
            t.fail(r, "probability outside (0, 1)");
    }
    return d;
}

inline ordered_json diagnostics_json(const PosteriorDraws& d, const std::string& model, const ChainConfig& cfg)
{
    ordered_json j;
    j["model"] = model;
    j["seed"] = cfg.seed;
    j["iterations"] = cfg.iterations;
    j["burn_in"] = cfg.burn_in;
    j["thin"] = cfg.thin;
    j["samples"] = d.samples();
    j["regions"] = d.regions();
    j["acceptance"] = ordered_json::object();
    for (const auto& [k, v] : d.acceptance)
        j["acceptance"][k] = v;
    j["ess"] = ordered_json::object();
    for (const auto& [k, v] : d.ess)
        j["ess"][k] = v;
    j["geweke_z"] = ordered_json::object();
    for (const auto& [k, v] : d.geweke)
        j["geweke_z"][k] = v;
    j["warnings"] = d.warnings;
    return j;
}

// ============================================================================
// STUDY OUTPUT
// ============================================================================

inline std::string metrics_csv(const std::vector<StudyRow>& rows)
{
    std::ostringstream o;
    o << "state,scheme,n_ens,method,rule,rep,fdp,power,loss,fd,fn\n";
    for (const StudyRow& r : rows)
        o << r.state << ',' << r.scheme << ',' << r.n_ens << ',' << r.method << ',' << r.rule << ',' << r.rep << ','
          << fmt(r.metrics.fdp) << ',' << (r.metrics.power ? fmt(*r.metrics.power) : std::string("NA")) << ','
          << fmt(r.metrics.loss) << ',' << r.metrics.fd << ',' << r.metrics.fn << '\n';
    return o.str();
}

inline std::string summary_csv(const std::vector<StudySummaryRow>& rows)
{
    std::ostringstream o;
    o << "state,scheme,n_ens,method,rule,reps,failed,fdr,power,loss,fd,fn\n";
    for (const StudySummaryRow& r : rows)
        o << r.state << ',' << r.scheme << ',' << r.n_ens << ',' << r.method << ',' << r.rule << ',' << r.reps << ','
          << r.failed << ',' << fmt(r.fdr) << ',' << (r.power ? fmt(*r.power) : std::string("NA")) << ','
          << fmt(r.loss) << ',' << fmt(r.fd) << ',' << fmt(r.fn) << '\n';
    return o.str();
}

inline std::string failures_csv(const std::vector<StudyFailure>& rows)
{
    std::ostringstream o;
    o << "state,scheme,n_ens,method,rep,message\n";
    for (const StudyFailure& f : rows) {
        std::string msg = f.message;
        std::replace(msg.begin(), msg.end(), ',', ';');
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        o << f.state << ',' << f.scheme << ',' << f.n_ens << ',' << f.method << ',' << f.rep << ',' << msg << '\n';
    }
    return o.str();
}

} // namespace attrib::io
