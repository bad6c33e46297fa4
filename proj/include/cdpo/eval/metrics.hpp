#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdpo/data/dataset.hpp"
#include "cdpo/genmodels/model.hpp"

namespace cdpo::eval {

enum class MetricKind { W2, LogProb };
enum class Convention { MeanSe, MedianStd };

const char* to_string(MetricKind m);
const char* to_string(Convention c);
MetricKind metric_from_string(const std::string& s);
Convention convention_from_string(const std::string& s);

/// Summary of a set of values. `center` is the mean or median, `spread` the
/// standard error or sample standard deviation. Non-finite values are
/// excluded and counted.
struct Summary {
    Convention convention = Convention::MeanSe;
    double center = 0.0;
    double spread = 0.0;
    int n_finite = 0;
    int n_nonfinite = 0;
};

/// mean +- std/sqrt(k) or median +- std, with the sample (k - 1) standard
/// deviation (0 for a single value). Throws InvalidArgument on empty input.
/// With no finite values both center and spread are NaN.
Summary aggregate_runs(const std::vector<double>& values, Convention convention = Convention::MeanSe);

struct EvalResult {
    MetricKind metric = MetricKind::W2;
    int arm = 1;
    std::vector<double> values;  // one per test point (W2) or test row (log-prob)
    Summary aggregate;
    int p = 0;  // samples per side for W2
    std::uint64_t seed = 0;
};

nlohmann::json to_json(const Summary& s);
Summary summary_from_json(const nlohmann::json& j);
/// Non-finite values serialise as null.
nlohmann::json to_json(const EvalResult& r);
EvalResult eval_result_from_json(const nlohmann::json& j);

inline constexpr int kDefaultW2Samples = 200;

struct W2Options {
    int p = kDefaultW2Samples;
    int n_eval_points = 0;       // 0 evaluates every test row
    std::vector<int> v_mask;     // conditioning columns of the model; empty selects all
    std::uint64_t seed = 0;
    int jobs = 1;                // test points evaluated concurrently
    Convention convention = Convention::MeanSe;
};

/// For each evaluated test covariate x_i, draws p ground-truth outcomes of
/// Y[arm] | x_i and p model samples at v_i and records their empirical W2.
/// Each point uses its own RNG stream, so results do not depend on `jobs`.
/// Throws InvalidArgument when the dataset has no ground-truth sampler.
EvalResult evaluate_w2(const gen::GenerativeModel& model, const data::PODataset& test, int arm,
                       const W2Options& opt = {});

/// Paired control: W2 between two independent p-samples of the ground truth
/// at each evaluated point.
EvalResult self_distance_baseline(const data::PODataset& test, int arm, const W2Options& opt = {});

/// Mean over test rows of log p_hat(y[arm]_i | v_i) on the joint potential
/// outcome columns. Throws CapabilityError for implicit-density models and
/// InvalidArgument when the dataset has no joint potential outcomes.
EvalResult avg_log_prob(const gen::GenerativeModel& model, const data::PODataset& test, int arm,
                        const std::vector<int>& v_mask = {}, Convention convention = Convention::MeanSe);

}  // namespace cdpo::eval
