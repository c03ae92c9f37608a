#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace rds {

/// Seeded xoshiro256** generator with purpose-labelled sub-streams.
///
/// `derive(label, index)` is a pure function of the seed this generator was
/// constructed with, so consumers drawing from one stream never perturb
/// another. Distributions are implemented here rather than through
/// <random> so outputs are identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    std::uint64_t next_u64();
    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform();
    /// Standard normal (Box-Muller).
    double normal();
    /// Uniform integer in [0, n). n must be positive.
    std::size_t below(std::size_t n);
    bool bernoulli(double p) { return uniform() < p; }

    std::uint64_t seed() const { return seed_; }
    Rng derive(std::string_view label, std::uint64_t index = 0) const;
    static std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t index = 0);

private:
    std::uint64_t seed_;
    std::uint64_t s_[4];
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace rds
