#include "collapsim/rng.hpp"

#include <cmath>

namespace collapsim {

std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t state = master + 0x9E3779B97F4A7C15ull * (index + 1);
    return splitmix64_next(state);
}

static inline std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
}

Xoshiro256pp::Xoshiro256pp(std::uint64_t seed) {
    for (auto& w : s_) w = splitmix64_next(seed);
}

std::uint64_t Xoshiro256pp::next() {
    std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double RandomStream::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    // u1 in (0,1] so the log is finite
    double u1 = double((eng_.next() >> 11) + 1) * 0x1.0p-53;
    double u2 = double(eng_.next() >> 11) * 0x1.0p-53;
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
}

} // namespace collapsim
