#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Dense>

namespace simlab {

using Rng = std::mt19937_64;

// splitmix64 finalizer.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Order-sensitive hash of a key tuple: h <- splitmix64(h ^ k) per key.
inline std::uint64_t hash_keys(std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = 0x5ad1ab5eedULL;
    for (std::uint64_t k : keys) h = splitmix64(h ^ k);
    return h;
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::uint64_t h = hash_keys({seed, stream});
    std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                      static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(stream)};
    return Rng(seq);
}

inline Eigen::VectorXd random_unit(int d, Rng& rng) {
    std::normal_distribution<double> g;
    Eigen::VectorXd v(d);
    double s;
    do {
        for (int i = 0; i < d; ++i) v(i) = g(rng);
        s = v.norm();
    } while (s == 0.0);
    return v / s;
}

// r ~ chi_d via r^2/2 ~ Gamma(d/2).
inline double sample_chi(int d, Rng& rng) {
    std::gamma_distribution<double> g(d / 2.0, 1.0);
    return std::sqrt(2.0 * g(rng));
}

}  // namespace simlab
