#include "sepsis/rng.hpp"

#include <cmath>
#include <numeric>
#include <unordered_map>

namespace sepsis {

std::uint64_t Rng::below(std::uint64_t n) {
    // Rejection sampling removes the modulo bias.
    const std::uint64_t limit = n * (UINT64_MAX / n);
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

int Rng::poisson(double mean) {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    double p = uniform();
    int k = 0;
    double term = limit;
    double cdf = limit;
    while (p > cdf && k < 1000) {
        ++k;
        term *= mean / k;
        cdf += term;
    }
    return k;
}

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n, std::size_t k) {
    if (k > n) k = n;
    // Partial Fisher-Yates over a sparse permutation.
    std::unordered_map<std::size_t, std::size_t> swapped;
    auto get = [&](std::size_t i) {
        auto it = swapped.find(i);
        return it == swapped.end() ? i : it->second;
    };
    std::vector<std::size_t> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + below(n - i);
        const std::size_t vi = get(i);
        const std::size_t vj = get(j);
        out.push_back(vj);
        swapped[j] = vi;
        swapped[i] = vj;
    }
    return out;
}

} // namespace sepsis
