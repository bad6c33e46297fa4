#include "cdpo/eval/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "cdpo/core/error.hpp"
#include "cdpo/eval/w2.hpp"

namespace cdpo::eval {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
double number_from(const nlohmann::json& j) { return j.is_null() ? kNaN : j.get<double>(); }

int eval_points(const data::PODataset& test, int requested) {
    require(test.size() > 0, "test set is empty");
    require(requested >= 0, "n_eval_points must be nonnegative");
    return requested == 0 ? test.size() : std::min(requested, test.size());
}

void check_arm(int arm) { require(arm == 0 || arm == 1, "arm must be 0 or 1"); }

/// Runs body(i) for i in [0, n) on up to `jobs` threads.
template <class Body>
void parallel_for(int n, int jobs, Body body) {
    jobs = std::max(1, std::min(jobs, n));
    if (jobs == 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t)
        pool.emplace_back([&] {
            for (int i = next++; i < n && !failed; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    if (!failed.exchange(true)) failure = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

Rng truth_stream(std::uint64_t seed, int point, int arm) {
    return Rng(derive_seed(seed, static_cast<std::uint64_t>(point), static_cast<std::uint64_t>(2 * arm)));
}
Rng model_stream(std::uint64_t seed, int point, int arm) {
    return Rng(derive_seed(seed, static_cast<std::uint64_t>(point), static_cast<std::uint64_t>(2 * arm + 1)));
}

double w2_or_nan(const Matrix& a, const Matrix& b) {
    if (!a.allFinite() || !b.allFinite()) return kNaN;
    return empirical_w2(a, b);
}

}  // namespace

const char* to_string(MetricKind m) { return m == MetricKind::W2 ? "w2" : "log_prob"; }
const char* to_string(Convention c) { return c == Convention::MeanSe ? "mean_se" : "median_std"; }

MetricKind metric_from_string(const std::string& s) {
    if (s == "w2") return MetricKind::W2;
    if (s == "log_prob") return MetricKind::LogProb;
    throw InvalidArgument("unknown metric '" + s + "'");
}

Convention convention_from_string(const std::string& s) {
    if (s == "mean_se") return Convention::MeanSe;
    if (s == "median_std") return Convention::MedianStd;
    throw InvalidArgument("unknown aggregation convention '" + s + "'");
}

Summary aggregate_runs(const std::vector<double>& values, Convention convention) {
    require(!values.empty(), "cannot aggregate an empty set of runs");
    Summary s;
    s.convention = convention;
    std::vector<double> finite;
    for (double v : values) {
        if (std::isfinite(v))
            finite.push_back(v);
        else
            ++s.n_nonfinite;
    }
    s.n_finite = static_cast<int>(finite.size());
    if (finite.empty()) {
        s.center = s.spread = kNaN;
        return s;
    }
    const double k = static_cast<double>(finite.size());
    double mean = 0.0;
    for (double v : finite) mean += v;
    mean /= k;
    double ss = 0.0;
    for (double v : finite) ss += (v - mean) * (v - mean);
    const double sd = finite.size() > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
    if (convention == Convention::MeanSe) {
        s.center = mean;
        s.spread = sd / std::sqrt(k);
    } else {
        std::sort(finite.begin(), finite.end());
        const std::size_t mid = finite.size() / 2;
        s.center = finite.size() % 2 ? finite[mid] : 0.5 * (finite[mid - 1] + finite[mid]);
        s.spread = sd;
    }
    return s;
}

nlohmann::json to_json(const Summary& s) {
    return {{"convention", to_string(s.convention)},
            {"center", number_or_null(s.center)},
            {"spread", number_or_null(s.spread)},
            {"n_finite", s.n_finite},
            {"n_nonfinite", s.n_nonfinite}};
}

Summary summary_from_json(const nlohmann::json& j) {
    try {
        Summary s;
        s.convention = convention_from_string(j.at("convention").get<std::string>());
        s.center = number_from(j.at("center"));
        s.spread = number_from(j.at("spread"));
        s.n_finite = j.at("n_finite").get<int>();
        s.n_nonfinite = j.at("n_nonfinite").get<int>();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed summary record: ") + e.what());
    }
}

nlohmann::json to_json(const EvalResult& r) {
    nlohmann::json values = nlohmann::json::array();
    for (double v : r.values) values.push_back(number_or_null(v));
    return {{"metric", to_string(r.metric)}, {"arm", r.arm},   {"values", std::move(values)},
            {"aggregate", to_json(r.aggregate)}, {"p", r.p}, {"seed", r.seed}};
}

EvalResult eval_result_from_json(const nlohmann::json& j) {
    try {
        EvalResult r;
        r.metric = metric_from_string(j.at("metric").get<std::string>());
        r.arm = j.at("arm").get<int>();
        for (const auto& v : j.at("values")) r.values.push_back(number_from(v));
        r.aggregate = summary_from_json(j.at("aggregate"));
        r.p = j.at("p").get<int>();
        r.seed = j.at("seed").get<std::uint64_t>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed evaluation record: ") + e.what());
    }
}

EvalResult evaluate_w2(const gen::GenerativeModel& model, const data::PODataset& test, int arm, const W2Options& opt) {
    check_arm(arm);
    require(test.has_ground_truth(), "W2 evaluation needs a ground-truth CDPO sampler");
    require(opt.p > 0, "p must be positive");
    const data::ConditioningView view = data::apply_v_mask(test, opt.v_mask);
    require(view.dim() == model.cond_dim(), "model conditioning dimension does not match the view");
    const int n = eval_points(test, opt.n_eval_points);

    EvalResult r;
    r.metric = MetricKind::W2;
    r.arm = arm;
    r.p = opt.p;
    r.seed = opt.seed;
    r.values.assign(static_cast<std::size_t>(n), kNaN);
    const IntVector arms = IntVector::Constant(opt.p, arm);
    parallel_for(n, opt.jobs, [&](int i) {
        Rng truth_rng = truth_stream(opt.seed, i, arm);
        Rng model_rng = model_stream(opt.seed, i, arm);
        const Matrix truth = test.ground_truth(test.x.row(i).transpose(), arm, opt.p, truth_rng);
        const Matrix cond = view.v(i).transpose().replicate(opt.p, 1);
        const Matrix draws = model.sample_batch(cond, arms, model_rng);
        r.values[static_cast<std::size_t>(i)] = w2_or_nan(truth, draws);
    });
    r.aggregate = aggregate_runs(r.values, opt.convention);
    return r;
}

EvalResult self_distance_baseline(const data::PODataset& test, int arm, const W2Options& opt) {
    check_arm(arm);
    require(test.has_ground_truth(), "W2 evaluation needs a ground-truth CDPO sampler");
    require(opt.p > 0, "p must be positive");
    const int n = eval_points(test, opt.n_eval_points);
    EvalResult r;
    r.metric = MetricKind::W2;
    r.arm = arm;
    r.p = opt.p;
    r.seed = opt.seed;
    r.values.assign(static_cast<std::size_t>(n), kNaN);
    parallel_for(n, opt.jobs, [&](int i) {
        Rng truth_rng = truth_stream(opt.seed, i, arm);
        Rng control_rng = model_stream(opt.seed, i, arm);
        const Vector x = test.x.row(i).transpose();
        const Matrix first = test.ground_truth(x, arm, opt.p, truth_rng);
        const Matrix second = test.ground_truth(x, arm, opt.p, control_rng);
        r.values[static_cast<std::size_t>(i)] = w2_or_nan(first, second);
    });
    r.aggregate = aggregate_runs(r.values, opt.convention);
    return r;
}

EvalResult avg_log_prob(const gen::GenerativeModel& model, const data::PODataset& test, int arm,
                        const std::vector<int>& v_mask, Convention convention) {
    check_arm(arm);
    if (!model.exact_density())
        throw CapabilityError(std::string("log-probability needs an explicit density, but the ") +
                              cdpo::to_string(model.family()) + " family only provides samples; use a CNF model");
    require(test.has_joint_po(), "log-probability needs joint potential outcomes in the test set");
    require(test.size() > 0, "test set is empty");
    const data::ConditioningView view = data::apply_v_mask(test, v_mask);
    require(view.dim() == model.cond_dim(), "model conditioning dimension does not match the view");
    const std::vector<int> rows = data::all_indices(test.size());
    const Vector lp = model.log_density(view.v_rows(rows), IntVector::Constant(test.size(), arm),
                                        test.potential_outcomes(arm));
    EvalResult r;
    r.metric = MetricKind::LogProb;
    r.arm = arm;
    r.values.assign(lp.data(), lp.data() + lp.size());
    r.aggregate = aggregate_runs(r.values, convention);
    return r;
}

}  // namespace cdpo::eval
