#pragma once

#include <cstdint>
#include <functional>
#include <memory>

#include <nlohmann/json.hpp>

#include "cdpo/core/optim.hpp"
#include "cdpo/data/dataset.hpp"
#include "cdpo/genmodels/model.hpp"
#include "cdpo/nuisance/propensity.hpp"

namespace cdpo::nuis {

inline constexpr double kDefaultClipFloor = 0.1;

/// Frozen stage-1 pair: conditional outcome model on (full x, a) and a
/// propensity classifier. Either component may be absent.
struct NuisanceEstimates {
    std::shared_ptr<const gen::GenerativeModel> outcome_model;
    std::shared_ptr<const PropensityModel> propensity_model;
    double clip_floor = kDefaultClipFloor;

    bool has_outcome() const { return outcome_model != nullptr; }
    bool has_propensity() const { return propensity_model != nullptr; }

    /// pi_a(x) before clipping; pi_0 = 1 - pi_1.
    Vector raw_propensity(const Matrix& x, const IntVector& arm) const;
    double raw_propensity(const Vector& x, int arm) const;
    /// max(pi_a(x), clip_floor).
    Vector predict_propensity(const Matrix& x, const IntVector& arm) const;
    double predict_propensity(const Vector& x, int arm) const;

    /// `count` i.i.d. draws from the fitted outcome law at x (count 0 gives an empty matrix).
    Matrix sample_pseudo_outcome(const Vector& x, int arm, int count, Rng& rng) const;
};

struct NuisanceConfig {
    gen::NeuralModelConfig model;  // cond_dim and outcome_dim are taken from the data
    OptimizerConfig optimizer{OptimizerKind::SGD, 0.005, 0.9};
    int batch_size = 64;
    int epochs = 100;
    int n_latent = 1;
    double clip_floor = kDefaultClipFloor;
    bool fit_outcome = true;
    bool fit_propensity = true;
    bool standardize = true;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Called after every epoch with the live outcome model (null when only the
/// propensity is fitted) and the mean training objective of the epoch.
using EpochHook = std::function<void(int epoch, const gen::GenerativeModel* model, double objective)>;

/// Stage 1: the outcome model maximises the plug-in objective over both arms
/// while a logistic propensity head on the same conditioner trunk minimises
/// binary cross-entropy. Returns frozen estimates. Non-finite objectives
/// raise NumericalError naming the epoch.
NuisanceEstimates fit_nuisance(const data::PODataset& ds, const NuisanceConfig& cfg, const EpochHook& hook = {});

/// Empirical-frequency estimates for index-valued toy data. Outcome cells
/// get `smoothing` pseudo-counts (strictly positive tables); (x, a) cells
/// without data fall back to uniform. Covariate levels without data get
/// propensity 0.5.
NuisanceEstimates fit_tabular_nuisance(const data::PODataset& ds, int nx, int ny, double smoothing = 1e-9);

/// Checkpoint with the outcome model (genmodels format) and the propensity block.
nlohmann::json nuisance_to_json(const NuisanceEstimates& est);
NuisanceEstimates nuisance_from_json(const nlohmann::json& j);

}  // namespace cdpo::nuis
