#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cdpo/core/optim.hpp"
#include "cdpo/genmodels/model.hpp"
#include "cdpo/losses/losses.hpp"
#include "cdpo/train/ema.hpp"

namespace cdpo::train {

enum class Restriction { Full, Linear };

const char* to_string(Restriction r);
Restriction restriction_from_string(const std::string& s);

struct StageConfig {
    OptimizerConfig optimizer;
    int batch_size = 64;
    int epochs = 100;
    gen::NeuralModelConfig model;  // cond_dim and outcome_dim are taken from the data
};

/// Two-stage training settings. Stage 1 also configures the single-stage
/// plug-in and IPTW learners; stage 2 configures the RA and GDR targets.
struct TrainConfig {
    Family family = Family::CNF;
    loss::LossKind learner = loss::LossKind::GDR;
    Restriction restriction = Restriction::Full;
    StageConfig stage1;
    StageConfig stage2;
    double ema_decay = kDefaultEmaDecay;
    int n_mc = 1;
    double clip_floor = 0.1;
    std::vector<int> v_mask;  // covariates seen by the target; empty means all
    std::uint64_t seed = 0;

    /// Per-family defaults from the published hyperparameter table.
    static TrainConfig defaults(Family family);
    void validate() const;
};

/// Reads a YAML document. Missing keys keep the family defaults; unknown
/// keys raise SchemaError.
TrainConfig train_config_from_yaml(const std::string& text);
TrainConfig load_train_config(const std::filesystem::path& path);
std::string train_config_to_yaml(const TrainConfig& cfg);

}  // namespace cdpo::train
