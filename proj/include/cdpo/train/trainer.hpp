#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "cdpo/data/dataset.hpp"
#include "cdpo/genmodels/model.hpp"
#include "cdpo/losses/losses.hpp"
#include "cdpo/nuisance/nuisance.hpp"
#include "cdpo/train/config.hpp"

namespace cdpo::train {

struct EpochRecord {
    int stage = 1;  // 1 for nuisance fitting, 2 for the learner's model
    loss::LossKind learner = loss::LossKind::GDR;
    int epoch = 0;
    double objective = 0.0;
};

/// Receives every finished epoch with the live model being trained (null for
/// a propensity-only stage 1).
using TrainHook = std::function<void(const EpochRecord&, const gen::GenerativeModel*)>;

struct LearnerResult {
    loss::LossKind learner = loss::LossKind::GDR;
    /// Frozen model with evaluation weights (the EMA shadow when EMA is used).
    std::shared_ptr<const gen::GenerativeModel> model;
    std::optional<Vector> live;  // final raw weights when EMA replaced them
    std::vector<double> history; // mean objective per epoch
};

struct TrainResult {
    nuis::NuisanceEstimates nuisance;
    LearnerResult learner;
};

struct MultiTrainResult {
    nuis::NuisanceEstimates nuisance;
    std::vector<LearnerResult> learners;
};

/// Marks a model read-only and hands it out as a shared const handle.
std::shared_ptr<const gen::GenerativeModel> freeze(std::shared_ptr<gen::GenerativeModel> model);

/// Architecture of a trained target model: stage-2 settings for every
/// learner, with the LINEAR restriction applied.
gen::NeuralModelConfig learner_model_config(const TrainConfig& cfg, int cond_dim, int outcome_dim);

/// Structural check that the target class sits inside the nuisance class:
/// same family, no larger head, and a linear or no wider conditioner.
bool structurally_nested(const gen::NeuralModelConfig& target, const gen::NeuralModelConfig& nuisance);

nuis::NuisanceConfig nuisance_config(const TrainConfig& cfg, bool fit_outcome);

/// Trains a fresh model on the loss of `learner` against frozen nuisances.
/// The stage settings supply optimizer, batch size and epochs; `ema_decay`
/// enables the moving average when set. Non-finite losses raise
/// NumericalError naming the epoch.
LearnerResult fit_learner(const data::ConditioningView& view, loss::LossKind learner,
                          const nuis::NuisanceEstimates& nuisance, const gen::NeuralModelConfig& model_cfg,
                          const StageConfig& stage, std::optional<double> ema_decay, int n_mc, std::uint64_t seed,
                          const TrainHook& hook = {});

/// Stage 1 then the configured learner. Stage 1 is always the joint
/// outcome-plus-propensity fit, so a learner trained alone matches the same
/// learner trained alongside others. It is skipped only for a plug-in learner
/// that is not the stage-1 model (restricted class or coarse V). RA and GDR
/// train the target with EMA.
TrainResult train_two_stage(const data::PODataset& ds, const TrainConfig& cfg, const TrainHook& hook = {});

/// The stage-1 fit shared by `learners` (empty estimates when none needs it).
nuis::NuisanceEstimates fit_stage1(const data::PODataset& ds, const TrainConfig& cfg,
                                   const std::vector<loss::LossKind>& learners, const TrainHook& hook = {});

/// One learner against an existing stage-1 fit.
LearnerResult train_learner(const data::PODataset& ds, const TrainConfig& cfg, const nuis::NuisanceEstimates& nuisance,
                            loss::LossKind learner, const TrainHook& hook = {});

/// Several learners sharing one stage-1 fit. With V = X and no restriction
/// the plug-in learner is the stage-1 outcome model itself.
MultiTrainResult train_learners(const data::PODataset& ds, const TrainConfig& cfg,
                                const std::vector<loss::LossKind>& learners, const TrainHook& hook = {});

}  // namespace cdpo::train
