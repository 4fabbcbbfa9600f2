#pragma once

// Deterministic per-round random streams. Each (seed, round, lane) triple is
// mixed into an independent mt19937_64 seed, so rounds can run on any thread
// (or in another process) and still draw identical values. Lane 0 is used for
// sampling inputs, lane 1 for measurement outcomes.

#include <cstdint>
#include <random>

namespace mr {

constexpr uint64_t kInputLane = 0;
constexpr uint64_t kMeasureLane = 1;

class RngStream {
public:
    RngStream(uint64_t seed, uint64_t round, uint64_t lane)
        : gen_(mix(seed, round, lane)) {}

    // Uniform in [0,1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0,bound), bias-free by rejection.
    uint64_t integer(uint64_t bound) {
        const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        uint64_t v;
        do {
            v = gen_();
        } while (v >= limit);
        return v % bound;
    }

private:
    static uint64_t splitmix(uint64_t v) {
        v += 0x9E3779B97F4A7C15ull;
        v = (v ^ (v >> 30)) * 0xBF58476D1CE4E5B9ull;
        v = (v ^ (v >> 27)) * 0x94D049BB133111EBull;
        return v ^ (v >> 31);
    }

    static uint64_t mix(uint64_t seed, uint64_t round, uint64_t lane) {
        uint64_t v = splitmix(seed);
        v = splitmix(v ^ (round * 0xD1342543DE82EF95ull + 1));
        v = splitmix(v ^ (lane * 0xAF251AF3B0F025B5ull + 1));
        return v;
    }

    std::mt19937_64 gen_;
};

}  // namespace mr
