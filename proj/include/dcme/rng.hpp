#pragma once
#include <cstdint>
#include <cmath>

namespace dcme {

// splitmix64 finalizer (Steele/Lea/Flood). Bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t x) {
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Per-trial seed = chained mix64 over (master, point, trial). Each stage is a
// bijection of the running hash, so distinct (point, trial) pairs cannot
// collide for a fixed master seed unless mix64 itself collides (it cannot).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t point, std::uint64_t trial) {
    std::uint64_t h = mix64(master + 0x9e3779b97f4a7c15ULL);
    h = mix64(h ^ (point + 0x9e3779b97f4a7c15ULL));
    h = mix64(h ^ (trial + 0xbf58476d1ce4e5b9ULL));
    return h;
}

// Counter-based generator: draw i of stream (seed, stream) is the pure value
// mix64(key + i * golden), i.e. splitmix64 started at a keyed state. No state
// is shared between instances, so parallel trials each own one cheaply.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : key_(mix64(seed + 0x9e3779b97f4a7c15ULL) ^ mix64(~stream)), ctr_(0) {}

    std::uint64_t next_u64() {
        return mix64(key_ + (++ctr_) * 0x9e3779b97f4a7c15ULL);
    }

    // uniform on [0, 1), 53-bit mantissa
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform on (0, 1], safe to feed to log()
    double uniform_pos() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // Box-Muller without caching: every call consumes exactly two words, so a
    // column of d normals always advances the counter by 2d regardless of use.
    double normal() {
        const double u1 = uniform_pos();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double rademacher() {
        return (next_u64() >> 63) ? 1.0 : -1.0;
    }

private:
    std::uint64_t key_;
    std::uint64_t ctr_;
};

} // namespace dcme
