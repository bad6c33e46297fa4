#pragma once

#include <functional>
#include <vector>

#include "cdpo/data/dataset.hpp"
#include "cdpo/train/config.hpp"

namespace cdpo::train {

/// Candidate values for the stage-1 hyperparameters. Empty lists keep the
/// base value; the family-specific lists only apply to their family.
struct SearchSpace {
    std::vector<double> lr;
    std::vector<int> batch_size;
    std::vector<double> noise_x_var;
    std::vector<double> noise_y_var;
    std::vector<int> n_knots;
    std::vector<int> gan_hidden;
    std::vector<int> latent_dim;
    std::vector<int> vae_hidden;
    std::vector<int> diffusion_steps;
    std::vector<int> eps_hidden;

    /// Ranges of the published tuning table.
    static SearchSpace defaults(Family family);
    /// Number of distinct configurations.
    long size(Family family) const;
};

/// Draws `runs` configurations uniformly from the grid (without repetition
/// while the grid allows it). Target knots and covariate noise follow stage 1.
std::vector<TrainConfig> sample_grid(const TrainConfig& base, const SearchSpace& space, int runs, Rng& rng);

struct SearchTrial {
    TrainConfig config;
    double score = 0.0;  // lower is better; +inf when fitting failed
};

struct SearchResult {
    std::vector<SearchTrial> trials;
    int best = -1;
};

/// Stage-1 random grid search scored by the mean negative log-generative term
/// of factual validation rows (the exact negative log-likelihood for CNFs).
SearchResult random_grid_search(const data::PODataset& train, const data::PODataset& validation,
                                const TrainConfig& base, const SearchSpace& space, int runs = 50,
                                const std::function<void(const SearchTrial&)>& on_trial = {});

}  // namespace cdpo::train
