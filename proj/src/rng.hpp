#pragma once

#include <cstdint>
#include <string_view>

namespace agentsim {

// Deterministic splitmix64 generator with named sub-streams.
//
// Every random draw in a run flows from the single config seed through a
// sub-stream named by purpose ("workload/len/3/cold", "stagger", ...), so
// adding a new sub-stream never perturbs the draws of existing ones and
// results are reproducible across platforms (no std::distribution use).
class Rng {
public:
    static constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
    static constexpr std::uint64_t kFnvPrime = 0x00000100000001b3ull;

    static std::uint64_t hash_name(std::string_view name) {
        std::uint64_t h = kFnvOffset;
        for (char c : name) {
            h ^= static_cast<std::uint8_t>(c);
            h *= kFnvPrime;
        }
        return h;
    }

    static Rng substream(std::uint64_t seed, std::string_view name) {
        Rng r;
        r.state_ = mix(seed ^ hash_name(name));
        return r;
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        return mix(state_);
    }

    // Uniform in [0, 1). 53-bit mantissa.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform integer in [0, n) via 128-bit multiply-shift.
    std::uint64_t uniform_int(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t state_ = 0;
};

}  // namespace agentsim
