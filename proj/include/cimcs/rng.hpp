#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

namespace cimcs {

/// SplitMix64 finaliser; used for seeding and stream derivation.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Derives an independent sub-stream seed from a parent seed and a path of
/// tags. The mapping is fixed: each tag is folded in with a SplitMix64 round,
/// so derive_seed(s, {a, b}) never depends on how many other streams exist.
std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> tags) noexcept;

/// xoshiro256** (Blackman & Vigna) seeded through SplitMix64.
///
/// Normal variates come from the Marsaglia polar method on 53-bit uniforms,
/// so a given seed produces the same stream on every conforming platform
/// (std::normal_distribution does not give that guarantee).
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept { return next(); }
    result_type next() noexcept;

    /// Uniform in [0, 1).
    double uniform() noexcept;
    /// Standard normal.
    double normal() noexcept;
    /// Uniform integer in [0, bound), bound > 0 (Lemire's method).
    std::uint64_t below(std::uint64_t bound) noexcept;

private:
    std::array<std::uint64_t, 4> s_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace cimcs
