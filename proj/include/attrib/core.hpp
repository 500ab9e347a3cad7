#pragma once

// Domain types shared by every module: regions, counts, hypotheses and
// the event-count construction from ensemble members.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "attrib/errors.hpp"

namespace attrib {

// ============================================================================
// REGIONS
// ============================================================================

struct RegionSet {
    std::vector<std::string> ids;
    std::vector<Eigen::Vector3d> centroids;       // unit sphere
    std::vector<std::vector<std::size_t>> adjacency; // symmetric, sorted

    std::size_t size() const { return ids.size(); }

    std::optional<std::size_t> index_of(const std::string& id) const
    {
        for (std::size_t i = 0; i < ids.size(); ++i)
            if (ids[i] == id)
                return i;
        return std::nullopt;
    }

    bool has_centroids() const { return !centroids.empty(); }
    bool has_adjacency() const { return !adjacency.empty(); }

    std::size_t edge_count() const
    {
        std::size_t n = 0;
        for (const auto& nb : adjacency)
            n += nb.size();
        return n / 2;
    }

    // Throws DataError when an invariant is broken.
    void validate(bool require_neighbors = false) const
    {
        const std::size_t m = ids.size();
        if (m == 0)
            throw DataError("region set is empty");
        {
            std::vector<std::string> sorted = ids;
            std::sort(sorted.begin(), sorted.end());
            if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
                throw DataError("duplicate region id");
        }
        if (!centroids.empty()) {
            if (centroids.size() != m)
                throw DimensionError("centroid count does not match region count");
            for (std::size_t i = 0; i < m; ++i)
                if (std::abs(centroids[i].norm() - 1.0) > 1e-9)
                    throw DataError("centroid of region '" + ids[i] + "' is not on the unit sphere");
        }
        if (!adjacency.empty()) {
            if (adjacency.size() != m)
                throw DimensionError("adjacency list count does not match region count");
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j : adjacency[i]) {
                    if (j >= m)
                        throw DataError("adjacency index out of range");
                    if (j == i)
                        throw DataError("region '" + ids[i] + "' lists itself as a neighbor");
                    const auto& back = adjacency[j];
                    if (std::find(back.begin(), back.end(), i) == back.end())
                        throw DataError("adjacency is not symmetric at '" + ids[i] + "'");
                }
                if (require_neighbors && adjacency[i].empty())
                    throw DataError("region '" + ids[i] + "' has no neighbors");
            }
        }
    }

    // Number of connected components of the adjacency graph.
    std::size_t component_count() const
    {
        const std::size_t m = size();
        std::vector<bool> seen(m, false);
        std::size_t components = 0;
        for (std::size_t s = 0; s < m; ++s) {
            if (seen[s])
                continue;
            ++components;
            std::queue<std::size_t> q;
            q.push(s);
            seen[s] = true;
            while (!q.empty()) {
                const std::size_t i = q.front();
                q.pop();
                if (i < adjacency.size())
                    for (std::size_t j : adjacency[i])
                        if (!seen[j]) {
                            seen[j] = true;
                            q.push(j);
                        }
            }
        }
        return components;
    }

    double max_chord_distance() const
    {
        double best = 0.0;
        for (std::size_t i = 0; i < centroids.size(); ++i)
            for (std::size_t j = i + 1; j < centroids.size(); ++j)
                best = std::max(best, (centroids[i] - centroids[j]).norm());
        return best;
    }

    Eigen::MatrixXd chord_distances() const
    {
        const auto m = static_cast<Eigen::Index>(centroids.size());
        Eigen::MatrixXd d(m, m);
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = 0; j < m; ++j)
                d(i, j) = (centroids[i] - centroids[j]).norm();
        return d;
    }
};

// Adds an undirected edge, keeping neighbor lists sorted and unique.
inline void add_edge(RegionSet& regions, std::size_t a, std::size_t b)
{
    if (regions.adjacency.size() < regions.size())
        regions.adjacency.resize(regions.size());
    auto insert = [](std::vector<std::size_t>& v, std::size_t x) {
        auto it = std::lower_bound(v.begin(), v.end(), x);
        if (it == v.end() || *it != x)
            v.insert(it, x);
    };
    insert(regions.adjacency[a], b);
    insert(regions.adjacency[b], a);
}

// ============================================================================
// COUNTS
// ============================================================================

struct ScenarioCounts {
    std::vector<std::string> region_ids;
    std::vector<int> z_f, n_f, z_c, n_c;

    std::size_t size() const { return z_f.size(); }

    void validate() const
    {
        const std::size_t m = z_f.size();
        if (n_f.size() != m || z_c.size() != m || n_c.size() != m ||
            (!region_ids.empty() && region_ids.size() != m))
            throw DimensionError("count vectors have different lengths");
        for (std::size_t i = 0; i < m; ++i) {
            if (n_f[i] <= 0 || n_c[i] <= 0)
                throw DataError("ensemble size must be positive");
            if (z_f[i] < 0 || z_f[i] > n_f[i] || z_c[i] < 0 || z_c[i] > n_c[i])
                throw DataError("count outside [0, n_ens]");
        }
    }
};

enum class EventDirection { exceed, fall_below };

// Ensemble members per region for one scenario-month.
struct EnsembleField {
    std::vector<std::vector<double>> members;
    EventDirection direction = EventDirection::exceed;
};

// Number of members strictly beyond the region threshold.
inline std::vector<int> compute_counts(const EnsembleField& field, const std::vector<double>& thresholds)
{
    if (thresholds.size() != field.members.size())
        throw DimensionError("threshold count (" + std::to_string(thresholds.size()) +
                             ") does not match region count (" + std::to_string(field.members.size()) + ")");
    if (!field.members.empty()) {
        const std::size_t n = field.members.front().size();
        for (const auto& m : field.members)
            if (m.size() != n)
                throw DimensionError("ensemble size differs between regions");
    }
    std::vector<int> counts(thresholds.size(), 0);
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        const double y = thresholds[i];
        const auto& members = field.members[i];
        counts[i] = static_cast<int>(std::count_if(members.begin(), members.end(), [&](double v) {
            return field.direction == EventDirection::exceed ? v > y : v < y;
        }));
    }
    return counts;
}

// Type-7 sample quantile (linear interpolation between order statistics).
inline double quantile_type7(std::vector<double> values, double q)
{
    if (values.empty())
        throw DataError("quantile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0))
        throw DomainError("quantile probability outside [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

// Per-region q-quantile over all pooled member-years of the history.
inline std::vector<double> event_thresholds(const std::vector<std::vector<double>>& history, double q)
{
    if (history.empty())
        throw DataError("empty history");
    if (!(q > 0.0 && q < 1.0))
        throw DomainError("q must lie in (0, 1)");
    std::vector<double> out;
    out.reserve(history.size());
    for (const auto& region : history) {
        if (region.size() < 2)
            throw DataError("event thresholds need at least two values per region");
        out.push_back(quantile_type7(region, q));
    }
    return out;
}

// ============================================================================
// HYPOTHESES
// ============================================================================

enum class HypothesisKind { ratio_leq, ratio_geq, ratio_outside_interval };

// Null region on the risk ratio RR = p_F / p_C.
struct HypothesisSpec {
    HypothesisKind kind = HypothesisKind::ratio_leq;
    double c = 1.0;
    double lower = 0.5;
    double upper = 2.0;

    static HypothesisSpec leq(double c)
    {
        HypothesisSpec h;
        h.kind = HypothesisKind::ratio_leq;
        h.c = c;
        h.validate();
        return h;
    }
    static HypothesisSpec geq(double c)
    {
        HypothesisSpec h;
        h.kind = HypothesisKind::ratio_geq;
        h.c = c;
        h.validate();
        return h;
    }
    static HypothesisSpec outside(double lower, double upper)
    {
        HypothesisSpec h;
        h.kind = HypothesisKind::ratio_outside_interval;
        h.lower = lower;
        h.upper = upper;
        h.validate();
        return h;
    }

    void validate() const
    {
        if (kind == HypothesisKind::ratio_outside_interval) {
            if (!(lower > 0.0 && lower < upper))
                throw DomainError("interval null needs 0 < l < u");
        } else if (!(c > 0.0) || !std::isfinite(c)) {
            throw DomainError("ratio threshold must be positive");
        }
    }

    std::string to_string() const
    {
        auto fmt = [](double v) {
            std::string s = std::to_string(v);
            s.erase(s.find_last_not_of('0') + 1);
            if (!s.empty() && s.back() == '.')
                s.pop_back();
            return s;
        };
        switch (kind) {
        case HypothesisKind::ratio_leq:
            return "rr<=" + fmt(c);
        case HypothesisKind::ratio_geq:
            return "rr>=" + fmt(c);
        case HypothesisKind::ratio_outside_interval:
            return "rr<=" + fmt(lower) + "|rr>=" + fmt(upper);
        }
        return {};
    }
};

// 1 when rr lies in the null region.
inline int null_indicator(const HypothesisSpec& spec, double rr)
{
    switch (spec.kind) {
    case HypothesisKind::ratio_leq:
        return rr <= spec.c ? 1 : 0;
    case HypothesisKind::ratio_geq:
        return rr >= spec.c ? 1 : 0;
    case HypothesisKind::ratio_outside_interval:
        return (rr <= spec.lower || rr >= spec.upper) ? 1 : 0;
    }
    return 0;
}

namespace detail {

inline std::string strip_spaces(const std::string& s)
{
    std::string out;
    for (char ch : s)
        if (ch != ' ' && ch != '\t')
            out.push_back(ch);
    return out;
}

inline double parse_positive(const std::string& text, const std::string& whole)
{
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw ConfigError("cannot parse hypothesis '" + whole + "'");
    }
    if (used != text.size())
        throw ConfigError("cannot parse hypothesis '" + whole + "'");
    return v;
}

} // namespace detail

// Accepts "rr<=c", "rr>=c" and "rr<=l|rr>=u" (spaces ignored, case-insensitive
// prefix).
inline HypothesisSpec parse_hypothesis(const std::string& text)
{
    std::string s = detail::strip_spaces(text);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    try {
        const auto bar = s.find('|');
        if (bar != std::string::npos) {
            const std::string a = s.substr(0, bar);
            const std::string b = s.substr(bar + 1);
            if (a.rfind("rr<=", 0) != 0 || b.rfind("rr>=", 0) != 0)
                throw ConfigError("cannot parse hypothesis '" + text + "'");
            return HypothesisSpec::outside(detail::parse_positive(a.substr(4), text),
                                           detail::parse_positive(b.substr(4), text));
        }
        if (s.rfind("rr<=", 0) == 0)
            return HypothesisSpec::leq(detail::parse_positive(s.substr(4), text));
        if (s.rfind("rr>=", 0) == 0)
            return HypothesisSpec::geq(detail::parse_positive(s.substr(4), text));
    } catch (const DomainError& e) {
        throw ConfigError(std::string("invalid hypothesis: ") + e.what());
    }
    throw ConfigError("cannot parse hypothesis '" + text + "' (expected rr<=c, rr>=c or rr<=l|rr>=u)");
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

inline double inv_logit(double x)
{
    if (x >= 0.0)
        return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace attrib
