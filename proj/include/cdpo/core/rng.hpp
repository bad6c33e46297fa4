#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace cdpo {

/// Deterministic random stream. All stochastic components draw from an
/// explicitly passed Rng so that runs are reproducible from a seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    bool bernoulli(double p) { return uniform() < p; }
    int uniform_int(int lo, int hi_inclusive) {
        return std::uniform_int_distribution<int>(lo, hi_inclusive)(engine_);
    }
    void fill_normal(std::span<double> out) {
        for (double& v : out) v = normal();
    }
    /// Independent child stream; used to give every stage/cell its own RNG.
    Rng split() { return Rng(engine_() ^ 0x9E3779B97F4A7C15ULL); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Mixes a base seed with stream tags into a new seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag1, std::uint64_t tag2 = 0);

}  // namespace cdpo
