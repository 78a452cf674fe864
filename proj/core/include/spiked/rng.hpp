#pragma once

#include <cstdint>
#include <random>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace spiked {

/// Seeded 64-bit generator. Independent streams are derived with
/// `Rng::child(master_seed, index)`; the derivation is a fixed function of
/// both arguments, so a trial's draws do not depend on scheduling order.
///
/// Distributions come from Boost.Random, whose algorithms are specified
/// independently of the standard library implementation, so a given seed
/// produces the same bits on every platform.
class Rng {
public:
    using result_type = std::mt19937_64::result_type;

    explicit Rng(std::uint64_t seed);

    static Rng child(std::uint64_t master_seed, std::uint64_t index);

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    /// +1 or -1 with equal probability.
    double sign() { return (engine_() >> 63) != 0 ? 1.0 : -1.0; }

private:
    std::mt19937_64 engine_;
    boost::random::normal_distribution<double> normal_{0.0, 1.0};
    boost::random::uniform_01<double> uniform_;
};

/// Mixes a tuple of indices into one stream index (grid point, hypothesis, trial).
std::uint64_t stream_index(std::uint64_t a, std::uint64_t b, std::uint64_t c);

}  // namespace spiked
