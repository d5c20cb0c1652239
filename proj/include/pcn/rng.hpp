#ifndef PCN_RNG_HPP
#define PCN_RNG_HPP

#include <cmath>
#include <cstdint>

namespace pcn {

// Counter-based pseudorandom generator (SplitMix64 output function applied
// to seed + counter * golden-gamma). The integer stream depends only on
// (seed, counter), so identical seeds reproduce identical draws on every
// platform; no hidden global state.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed), counter_(0) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

    std::uint64_t next_u64() {
        std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n). Rejection-sampled, so the result is
    // unbiased and reproducible for any n.
    std::uint64_t uniform_below(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    // Standard normal via Box-Muller; the second variate of each pair is
    // cached so consecutive calls consume the integer stream predictably.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] keeps the log finite.
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.28318530717958647692 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // Derives an independent stream, e.g. one per epoch or per worker.
    Rng fork(std::uint64_t stream) const {
        std::uint64_t z = seed_ ^ (0xD6E8FEB86659FD93ULL * (stream + 1));
        z = (z ^ (z >> 32)) * 0xD6E8FEB86659FD93ULL;
        return Rng(z ^ (z >> 32));
    }

private:
    std::uint64_t seed_;
    std::uint64_t counter_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace pcn

#endif  // PCN_RNG_HPP
