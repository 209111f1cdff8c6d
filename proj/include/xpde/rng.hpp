#ifndef XPDE_RNG_HPP
#define XPDE_RNG_HPP

#include <cstdint>

namespace xpde {

// splitmix64, used to expand seeds and derive child streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256++ with splitmix64 seeding. All sampling in the project goes
// through this generator so runs reproduce bit-exactly across platforms;
// the C++ <random> distributions are implementation-defined and are not used.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : origin_(seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    // Derives an independent stream keyed on (origin seed, tag). Derivation
    // depends only on the origin seed, not on how many values were drawn.
    RandomStream child(std::uint64_t tag) const {
        std::uint64_t sm = origin_ ^ (0x9e3779b97f4a7c15ULL + tag);
        std::uint64_t mixed = splitmix64(sm);
        return RandomStream(mixed ^ (tag << 1));
    }
    RandomStream child(std::uint64_t a, std::uint64_t b) const { return child(a).child(b); }
    RandomStream child(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
        return child(a).child(b).child(c);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Unbiased integer in [0, n) by rejection.
    std::uint64_t bounded(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    std::uint64_t origin_seed() const { return origin_; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t origin_;
    std::uint64_t s_[4];
};

}  // namespace xpde

#endif
