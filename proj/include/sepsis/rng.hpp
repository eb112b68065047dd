#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace sepsis {

/// splitmix64 finaliser; used to derive independent child seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return mix_seed(mix_seed(master) ^ (index * 0xd1b54a32d192ed03ULL + 1));
}

/// Deterministic random source. The engine is mt19937_64 (bit-exact across
/// standard libraries); the distributions below are written out so that
/// sequences do not depend on the library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n);

    /// Uniform integer in [lo, hi] (inclusive).
    long long between(long long lo, long long hi) {
        return lo + static_cast<long long>(below(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    bool bernoulli(double p) { return uniform() < p; }

    double normal();
    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// Poisson draw by inversion; fine for the small means used here.
    int poisson(double mean);

    /// k distinct indices from [0, n), in selection order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace sepsis
