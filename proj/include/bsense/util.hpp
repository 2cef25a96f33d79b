#ifndef BSENSE_UTIL_HPP
#define BSENSE_UTIL_HPP

#include <cmath>
#include <cstdint>
#include <cstddef>
#include <random>
#include <string>
#include <string_view>

namespace bsense {

// Deterministic RNG with explicitly-coded samplers so generated data is
// reproducible across standard library versions (std::*_distribution is
// implementation defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1), 53-bit resolution
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive range
    int uniform_int(int lo, int hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(next_u64() % span);
    }

    // standard normal via Box-Muller
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925 * u2);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    // Independent substream keyed by `stream`; forking with the same key
    // always yields the same sequence.
    Rng fork(std::uint64_t stream) const;

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

std::uint64_t fnv1a64(const void* data, std::size_t n);
std::uint64_t fnv1a64(std::string_view s);

std::string to_hex(std::uint64_t v);
std::uint64_t from_hex(std::string_view s);

} // namespace bsense

#endif
