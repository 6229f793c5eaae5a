#ifndef OPPLAB_RNG_HPP
#define OPPLAB_RNG_HPP

#include <cstdint>

namespace opplab {

// Counter-based generator: the n-th draw of stream (seed, key) is a pure
// function of (seed, key, n). Mixing is splitmix64 applied twice.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t key) noexcept
        : base_(mix(seed ^ mix(key + 0x632be59bd9b4e019ULL))) {}

    std::uint64_t next_u64() noexcept { return mix(base_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    std::uint64_t counter() const noexcept { return counter_; }

    static std::uint64_t mix(std::uint64_t z) noexcept {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t base_;
    std::uint64_t counter_ = 0;
};

}  // namespace opplab

#endif
