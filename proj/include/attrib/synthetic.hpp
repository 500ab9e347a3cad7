#pragma once

// Synthetic region sets and historical fields for tests, the simulation
// study and the CLI `make-regions` command. Regions are clustered into
// continent-like spherical caps; adjacency is symmetric k-nearest-neighbour
// within a cap plus one bridge between consecutive caps.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "attrib/core.hpp"
#include "attrib/distributions.hpp"
#include "attrib/eof_basis.hpp"
#include "attrib/errors.hpp"
#include "attrib/random.hpp"

namespace attrib {

struct SyntheticRegionOptions {
    std::size_t regions = 68;
    std::size_t continents = 4;
    double cap_radius = 0.52; // radians
    std::size_t neighbors = 4;
    std::uint64_t seed = 2017;
};

namespace detail {

inline Eigen::Vector3d unit_from_angles(double lat, double lon)
{
    return {std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat)};
}

} // namespace detail

inline RegionSet make_synthetic_regions(const SyntheticRegionOptions& opt)
{
    if (opt.regions < 2)
        throw ConfigError("need at least two regions");
    if (opt.continents < 1 || opt.continents > opt.regions)
        throw ConfigError("continent count must lie in [1, regions]");
    Rng rng = make_rng(opt.seed, 0x5e610e5ULL);

    // Split regions across continents with decreasing sizes (weights 4:3:2:1...).
    std::vector<double> weight(opt.continents);
    for (std::size_t c = 0; c < opt.continents; ++c)
        weight[c] = 1.0 + 0.5 * static_cast<double>(opt.continents - 1 - c);
    const double wsum = std::accumulate(weight.begin(), weight.end(), 0.0);
    std::vector<std::size_t> sizes(opt.continents, 1);
    std::size_t assigned = opt.continents;
    for (std::size_t c = 0; c < opt.continents && assigned < opt.regions; ++c) {
        const auto extra = static_cast<std::size_t>(
            std::floor(weight[c] / wsum * static_cast<double>(opt.regions - opt.continents)));
        sizes[c] += extra;
        assigned += extra;
    }
    for (std::size_t c = 0; assigned < opt.regions; c = (c + 1) % opt.continents, ++assigned)
        ++sizes[c];

    RegionSet rs;
    std::vector<std::size_t> continent_of;
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (std::size_t c = 0; c < opt.continents; ++c) {
        // Cap centres spread in longitude, alternating hemispheres.
        const double lon = 2.0 * kPi * static_cast<double>(c) / static_cast<double>(opt.continents) +
                           0.3 * (draw_uniform(rng) - 0.5);
        const double lat = (c % 2 == 0 ? 0.45 : -0.35) + 0.2 * (draw_uniform(rng) - 0.5);
        const Eigen::Vector3d centre = detail::unit_from_angles(lat, lon);
        Eigen::Vector3d e1 = centre.cross(Eigen::Vector3d::UnitZ());
        if (e1.norm() < 1e-8)
            e1 = centre.cross(Eigen::Vector3d::UnitX());
        e1.normalize();
        const Eigen::Vector3d e2 = centre.cross(e1);
        const std::size_t n = sizes[c];
        for (std::size_t j = 0; j < n; ++j) {
            const double r = opt.cap_radius * std::sqrt((static_cast<double>(j) + 0.5) / static_cast<double>(n));
            const double th = golden * static_cast<double>(j);
            Eigen::Vector3d p = std::cos(r) * centre + std::sin(r) * (std::cos(th) * e1 + std::sin(th) * e2);
            rs.centroids.push_back(p.normalized());
            continent_of.push_back(c);
        }
    }
    const std::size_t m = rs.centroids.size();
    for (std::size_t i = 0; i < m; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "R%03zu", i + 1);
        rs.ids.emplace_back(buf);
    }
    rs.adjacency.assign(m, {});
    const Eigen::MatrixXd d = rs.chord_distances();

    for (std::size_t i = 0; i < m; ++i) {
        std::vector<std::size_t> same;
        for (std::size_t j = 0; j < m; ++j)
            if (j != i && continent_of[j] == continent_of[i])
                same.push_back(j);
        std::stable_sort(same.begin(), same.end(), [&](std::size_t a, std::size_t b) {
            return d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)) <
                   d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b));
        });
        for (std::size_t q = 0; q < std::min(opt.neighbors, same.size()); ++q)
            add_edge(rs, i, same[q]);
    }
    // Bridges between consecutive continents.
    for (std::size_t c = 0; c + 1 < opt.continents; ++c) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                if (continent_of[i] == c && continent_of[j] == c + 1) {
                    const double v = d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                    if (v < best) {
                        best = v;
                        bi = i;
                        bj = j;
                    }
                }
        add_edge(rs, bi, bj);
    }
    // Any remaining split inside a continent: link nearest pairs across components.
    while (rs.component_count() > 1) {
        std::vector<int> comp(m, -1);
        std::vector<std::size_t> stack{0};
        comp[0] = 0;
        while (!stack.empty()) {
            const std::size_t v = stack.back();
            stack.pop_back();
            for (std::size_t w : rs.adjacency[v])
                if (comp[w] < 0) {
                    comp[w] = 0;
                    stack.push_back(w);
                }
        }
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                if (comp[i] == 0 && comp[j] < 0 &&
                    d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) < best) {
                    best = d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                    bi = i;
                    bj = j;
                }
        add_edge(rs, bi, bj);
    }
    rs.validate(true);
    return rs;
}

// T years of region logit anomalies with large-scale spatial structure:
// a few smooth patterns with decaying amplitude plus independent noise.
inline HistoricalProbMatrix make_synthetic_history(const RegionSet& regions, int years, std::uint64_t seed,
                                                   double base_logit = -2.44)
{
    if (years < 2)
        throw ConfigError("need at least two historical years");
    const auto m = static_cast<Eigen::Index>(regions.size());
    Rng rng = make_rng(seed, 0x415707ULL);
    const int modes = 12;
    Eigen::MatrixXd patterns(m, modes);
    for (int j = 0; j < modes; ++j) {
        const Eigen::Vector3d a = Eigen::Vector3d(draw_normal(rng), draw_normal(rng), draw_normal(rng)).normalized();
        const double freq = 1.0 + 0.5 * j;
        const double phase = 2.0 * kPi * draw_uniform(rng);
        for (Eigen::Index i = 0; i < m; ++i)
            patterns(i, j) = std::cos(freq * 3.0 * regions.centroids[static_cast<std::size_t>(i)].dot(a) + phase);
    }
    HistoricalProbMatrix out;
    out.values.resize(m, years);
    for (int t = 0; t < years; ++t) {
        Eigen::VectorXd x = Eigen::VectorXd::Constant(m, base_logit);
        for (int j = 0; j < modes; ++j)
            x += (1.0 / (1.0 + j)) * draw_normal(rng) * patterns.col(j);
        for (Eigen::Index i = 0; i < m; ++i)
            x(i) += 0.15 * draw_normal(rng);
        out.values.col(t) = x;
    }
    return out;
}

} // namespace attrib
