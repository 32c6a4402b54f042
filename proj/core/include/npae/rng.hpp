#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace npae {

/// Deterministic 64-bit PRNG (splitmix64). All randomness in the library
/// flows through this generator so that results are reproducible across
/// platforms and standard-library versions: std::* distributions are
/// implementation-defined, the mappings below are not.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();

    /// Uniform in [0, 1). 53-bit resolution.
    double next_double();

    /// Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t next_below(std::uint64_t bound);

    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t next_int(std::int64_t lo, std::int64_t hi);

    /// Uniform real in [lo, hi).
    double next_uniform(double lo, double hi);

    /// Standard normal deviate (Box-Muller).
    double next_normal();

    /// In-place Fisher-Yates shuffle of an index vector.
    void shuffle(std::vector<std::size_t>& items);

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// FNV-1a hash of a label, used to fan a master seed out into
/// independent per-stage / per-trial streams.
std::uint64_t hash_label(std::string_view label);

/// Derive a child seed from (master, label). Distinct labels give
/// decorrelated streams; the derivation is counter-free and order
/// independent, so derived streams can be consumed in parallel.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);

/// Derive a child seed from (master, label, index), e.g. one stream
/// per trial or per image.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index);

}  // namespace npae
