#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace spinecho {

/// splitmix64 step; also used as a mixing function for seed derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based seed derivation: (master, stream, counter) -> child seed.
/// Workers can derive seeds in any order; the result depends only on the
/// three inputs, so parallel schedules cannot change downstream streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t counter) {
    std::uint64_t s = master;
    std::uint64_t a = splitmix64(s);
    s ^= stream * 0x9e3779b97f4a7c15ULL;
    std::uint64_t b = splitmix64(s);
    s ^= counter * 0xd1b54a32d192ed03ULL;
    std::uint64_t c = splitmix64(s);
    return a ^ (b << 1) ^ c;
}

/// mt19937_64 with hand-rolled distributions. std::*_distribution output is
/// implementation-defined, which would break the bit-reproducibility
/// contract across standard libraries; these helpers are fully specified.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n) by rejection (unbiased). Requires n > 0.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = n * (UINT64_MAX / n);
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    /// Fair coin mapped to a spin-1/2 z projection.
    double half_spin_projection() { return (next_u64() & 1u) ? 0.5 : -0.5; }

  private:
    std::mt19937_64 engine_;
};

/// Exact Binomial(n, p) sample in O(np) expected time via geometric gaps
/// between successes. Suitable for huge n with small p.
inline std::int64_t binomial_count(Rng& rng, std::int64_t n_trials, double p) {
    if (n_trials <= 0 || p <= 0.0) return 0;
    if (p >= 1.0) return n_trials;
    const double log_q = std::log1p(-p);
    std::int64_t count = 0;
    std::int64_t pos = 0;
    while (true) {
        double u = rng.next_double();
        while (u <= 0.0) u = rng.next_double();
        const auto gap = static_cast<std::int64_t>(std::log(u) / log_q);
        pos += gap + 1;
        if (pos > n_trials) break;
        ++count;
    }
    return count;
}

} // namespace spinecho
