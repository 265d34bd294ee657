#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace cascon {

// Deterministic random source. Raw mt19937_64 output is pinned by the
// standard, so all mappings to floats/ints are done by hand here instead of
// going through std distributions (whose algorithms vary across stdlibs).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double uniform() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Multiply-shift mapping; bias is O(n/2^64).
    int uniform_int(int n) {
        return static_cast<int>((static_cast<unsigned __int128>(next()) *
                                 static_cast<unsigned __int128>(n)) >> 64);
    }

    // Inverse-CDF exponential draw; -log1p(-u) keeps u=0 finite.
    double exponential(double rate = 1.0) {
        return -std::log1p(-uniform()) / rate;
    }

    // Derive an independent stream seed from (seed, stream) via splitmix64.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace cascon
