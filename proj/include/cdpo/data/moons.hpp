#pragma once

#include <array>
#include <cstdint>

#include "cdpo/data/dataset.hpp"

namespace cdpo::data {

/// Parameters of the rotated noisy-moons benchmark.
///
/// Covariates follow the two-moons pattern with Gaussian jitter. Given x, the
/// potential outcome Y[a] is a freshly jittered copy of x rotated by an angle
/// phi ~ N(angle_mean[a], angle_std[a]^2). Treatment is assigned with
/// P(A=1|x) = eps + (1 - 2 eps) * sigmoid(b0 + b1 x0 + b2 x1).
struct MoonsConfig {
    int n_train = 2000;
    int n_test = 1000;
    double noise_scale = 0.1;
    std::array<double, 2> angle_mean{0.4, -1.0};
    std::array<double, 2> angle_std{0.15, 0.3};
    double propensity_intercept = -0.75;
    std::array<double, 2> propensity_coef{1.5, -1.0};
    double overlap_eps = 0.05;
    std::uint64_t seed = 0;

    void validate() const;
};

struct MoonsSplit {
    PODataset train;
    PODataset test;
};

/// Generates train and test sets with joint potential outcomes and the
/// ground-truth CDPO sampler attached. Deterministic in cfg.seed.
MoonsSplit generate_moons_dataset(const MoonsConfig& cfg);

/// Analytic assignment rule P(A=1 | x).
double moons_propensity(const MoonsConfig& cfg, const Vector& x);

/// Ground-truth draws of Y[a] given x.
Matrix moons_sample_cdpo(const MoonsConfig& cfg, const Vector& x, int a, int count, Rng& rng);

/// Variant used for the restricted-target study: stronger confounding so that
/// the treated and untreated covariate populations differ markedly.
MoonsConfig moons_confounded_variant(int n_train, int n_test, std::uint64_t seed);

}  // namespace cdpo::data
