#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace attrib {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seed for stream `stream` of run `seed`. Streams with different ids are
// decorrelated, and the result does not depend on scheduling order.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream)
{
    return mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b)
{
    return stream_seed(stream_seed(seed, a), b);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0)
{
    return Rng(stream_seed(seed, stream));
}

inline double draw_uniform(Rng& rng)
{
    // 53 random bits in (0, 1); never returns exactly 0.
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double draw_normal(Rng& rng)
{
    std::normal_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

// Gamma with shape/scale.
inline double draw_gamma(Rng& rng, double shape, double scale)
{
    std::gamma_distribution<double> dist(shape, scale);
    return dist(rng);
}

inline double draw_beta(Rng& rng, double a, double b)
{
    const double x = draw_gamma(rng, a, 1.0);
    const double y = draw_gamma(rng, b, 1.0);
    return x / (x + y);
}

inline double draw_chi_squared(Rng& rng, double df)
{
    return draw_gamma(rng, 0.5 * df, 2.0);
}

inline int draw_binomial(Rng& rng, int n, double p)
{
    std::binomial_distribution<int> dist(n, p);
    return dist(rng);
}

} // namespace attrib
