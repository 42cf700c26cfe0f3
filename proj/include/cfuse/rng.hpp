#pragma once

#include <cstdint>
#include <limits>

namespace cfuse {

/// Counter-based 64-bit generator (SplitMix64 output function over a Weyl
/// sequence). The starting counter is a hash of (seed, stream_id), so any
/// (seed, stream) pair reproduces its sequence independently of what other
/// streams have drawn or which thread owns them.
class SeededRng {
public:
    using result_type = std::uint64_t;

    SeededRng(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_; }

    /// Independent child stream, deterministic in (seed, stream_id, key).
    SeededRng substream(std::uint64_t key) const;

    std::uint64_t next_u64();
    result_type operator()() { return next_u64(); }
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    /// Uniform on (0, 1).
    double uniform_open();
    /// Standard normal (Marsaglia polar method).
    double normal();
    bool bernoulli(double p);
    /// Uniform integer on [0, n), unbiased (Lemire).
    std::uint64_t below(std::uint64_t n);

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

std::uint64_t mix64(std::uint64_t z);

}  // namespace cfuse
