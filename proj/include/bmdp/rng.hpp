#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace bmdp {

/// Counter-seeded random stream (xoshiro256++ state built with splitmix64).
///
/// Streams are keyed by (master seed, purpose label, replicate index), so
/// independent work items can draw from disjoint substreams regardless of
/// scheduling order. Construction is cheap enough to make one stream per
/// episode.
class RngStream {
public:
    RngStream(std::uint64_t master, std::string_view purpose, std::uint64_t index);

    std::uint64_t next_u64();

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01();

    /// Uniform integer in [0, n); n must be positive.
    int uniform_int(int n);

    /// Inverse-CDF draw from an unnormalized nonnegative weight vector.
    int categorical(std::span<const double> weights);

    /// Box-Muller normal draw.
    double normal(double mean, double stddev);

private:
    std::uint64_t s_[4];
    bool have_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

/// FNV-1a hash used to mix purpose labels into stream keys.
std::uint64_t hash_label(std::string_view label);

} // namespace bmdp
