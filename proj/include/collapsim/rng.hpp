// Counter-seeded random streams. One stream per trajectory, derived from
// (master seed, trajectory index) with no cross-stream coordination, so
// ensembles aggregate identically for any worker count. Distributions are
// implemented here rather than taken from <random> to keep output
// independent of the standard-library version.
#pragma once

#include <array>
#include <cstdint>

namespace collapsim {

// Advances `state` and returns the next splitmix64 output.
std::uint64_t splitmix64_next(std::uint64_t& state);

// Stream seed for trajectory `index` under `master`.
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index);

class Xoshiro256pp {
public:
    explicit Xoshiro256pp(std::uint64_t seed);
    std::uint64_t next();

private:
    std::array<std::uint64_t, 4> s_;
};

class RandomStream {
public:
    RandomStream(std::uint64_t master, std::uint64_t index)
        : eng_(stream_seed(master, index)) {}

    std::uint64_t next() { return eng_.next(); }

    // 53-bit uniform in [0, 1)
    double uniform01() { return double(eng_.next() >> 11) * 0x1.0p-53; }

    // standard normal via Box-Muller; one spare value cached
    double normal();

private:
    Xoshiro256pp eng_;
    double spare_ = 0;
    bool have_spare_ = false;
};

} // namespace collapsim
