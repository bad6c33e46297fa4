#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdpo/eval/metrics.hpp"
#include "cdpo/train/trainer.hpp"

namespace cdpo::cli {

enum class DatasetKind { Moons, MoonsConfounded, File };
const char* to_string(DatasetKind k);
DatasetKind dataset_kind_from_string(const std::string& s);

struct DatasetSpec {
    DatasetKind kind = DatasetKind::Moons;
    std::vector<int> n_train{2000};
    int n_test = 1000;
    std::filesystem::path train_path;  // File datasets only
    std::filesystem::path test_path;
};

struct EvalSpec {
    std::vector<eval::MetricKind> metrics{eval::MetricKind::W2};
    int p = eval::kDefaultW2Samples;
    int n_eval_points = 100;
    eval::Convention convention = eval::Convention::MeanSe;
};

/// One benchmark grid: families x learners x n_train x seeds.
struct ExperimentConfig {
    std::string name = "experiment";
    DatasetSpec dataset;
    std::vector<Family> families{Family::CNF};
    std::vector<loss::LossKind> learners{loss::LossKind::PlugIn, loss::LossKind::RA, loss::LossKind::IPTW,
                                         loss::LossKind::GDR};
    std::vector<std::uint64_t> seeds{0};
    train::Restriction restriction = train::Restriction::Full;
    std::string train_overrides;  // YAML map applied over the family defaults
    EvalSpec eval;
    bool save_checkpoints = true;

    /// Nonempty grid axes, existing dataset files, parsable overrides.
    void validate() const;
};

/// YAML document; unknown keys raise SchemaError. `seeds` is either a list
/// or a count k meaning 0..k-1.
ExperimentConfig experiment_from_yaml(const std::string& text);
ExperimentConfig load_experiment(const std::filesystem::path& path);
std::string experiment_to_yaml(const ExperimentConfig& cfg);

struct Cell {
    Family family = Family::CNF;
    loss::LossKind learner = loss::LossKind::GDR;
    int n_train = 0;
    std::uint64_t seed = 0;
};

/// Every cell in grid order (family, n_train, seed, learner).
std::vector<Cell> expand_grid(const ExperimentConfig& cfg);

/// Effective training settings of a cell: family defaults, then the
/// experiment overrides, then the cell's learner, restriction and seed.
train::TrainConfig cell_train_config(const ExperimentConfig& cfg, const Cell& cell);

/// Snapshot of everything that determines a cell's outcome.
nlohmann::json cell_config_json(const ExperimentConfig& cfg, const Cell& cell);
/// 16 hex digits of FNV-1a over the snapshot.
std::string cell_hash(const ExperimentConfig& cfg, const Cell& cell);

struct DataSplit {
    data::PODataset train;
    data::PODataset test;
};

/// Train/test data of a cell; moons variants are generated from a seed
/// derived from (seed, n_train).
DataSplit make_datasets(const ExperimentConfig& cfg, int n_train, std::uint64_t seed);

/// W2 on both arms and/or log-probability on both arms. With `strict` an
/// inapplicable metric throws (CapabilityError, InvalidArgument); otherwise
/// it is skipped.
std::vector<eval::EvalResult> evaluate_model(const gen::GenerativeModel& model, const data::PODataset& test,
                                             const std::vector<int>& v_mask, const EvalSpec& spec,
                                             std::uint64_t seed, bool strict);

/// Mean over arms of each metric's aggregate center, keyed by metric name.
nlohmann::json metric_scores(const std::vector<eval::EvalResult>& results);

/// Checkpoint with the live weights as parameters and the EMA shadow, if any.
nlohmann::json learner_checkpoint_json(const train::LearnerResult& result);
/// Model from a checkpoint with evaluation weights (the EMA shadow when present).
std::unique_ptr<gen::GenerativeModel> evaluation_model(const nlohmann::json& checkpoint);

std::string version_stamp();

/// --out flag, else $CDPO_LAB_OUT, else "cdpo_out".
std::filesystem::path output_root(const std::optional<std::filesystem::path>& flag);

struct BenchmarkOptions {
    int jobs = 1;
    std::function<void(const std::string&)> log;  // called from worker threads under a lock
};

struct BenchmarkSummary {
    int cells = 0;
    int skipped = 0;    // already completed
    int completed = 0;  // trained and evaluated in this run
    int failed = 0;
    std::vector<std::filesystem::path> records;  // completed records, grid order
};

inline constexpr int kRecordSchemaVersion = 1;

/// Runs every cell without a completed record under out_dir/records. Cells
/// sharing (family, n_train, seed) share one stage-1 fit. A failing cell
/// writes <hash>.error.json and the grid continues. Records and checkpoints
/// are written atomically.
BenchmarkSummary run_benchmark(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                               const BenchmarkOptions& opt = {});

std::filesystem::path record_path(const std::filesystem::path& out_dir, const std::string& hash);

/// Completed run records (status "ok") found under dir/records, sorted by name.
std::vector<nlohmann::json> load_records(const std::filesystem::path& dir);

}  // namespace cdpo::cli
