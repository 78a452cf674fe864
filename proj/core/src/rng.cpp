#include "spiked/rng.hpp"

namespace spiked {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::seed_seq make_seed_seq(std::uint64_t seed) {
    std::uint64_t state = seed;
    std::uint64_t a = splitmix64(state);
    std::uint64_t b = splitmix64(state);
    return std::seed_seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                         static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
}

}  // namespace

Rng::Rng(std::uint64_t seed) {
    auto seq = make_seed_seq(seed);
    engine_.seed(seq);
}

Rng Rng::child(std::uint64_t master_seed, std::uint64_t index) {
    std::uint64_t state = master_seed;
    std::uint64_t base = splitmix64(state);
    state = base ^ (index * 0xD1B54A32D192ED03ULL);
    return Rng(splitmix64(state) ^ index);
}

std::uint64_t stream_index(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t state = a;
    std::uint64_t h = splitmix64(state);
    state = h ^ b;
    h = splitmix64(state);
    state = h ^ c;
    return splitmix64(state);
}

}  // namespace spiked
