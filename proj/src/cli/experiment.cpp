#include "cdpo/cli/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <yaml-cpp/yaml.h>

#include "cdpo/core/error.hpp"
#include "cdpo/data/moons.hpp"
#include "cdpo/data/tabular_io.hpp"
#include "cdpo/genmodels/checkpoint.hpp"

#ifndef CDPO_VERSION
#define CDPO_VERSION "0.0.0"
#endif
#ifndef CDPO_GIT_STAMP
#define CDPO_GIT_STAMP "unknown"
#endif

namespace cdpo::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kDataTag = 0xDA7A;
constexpr std::uint64_t kTrainTag = 0x7EA1;
constexpr std::uint64_t kEvalTag = 0xE7A1;

void check_keys(const YAML::Node& node, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!node.IsMap()) throw SchemaError(where + " must be a mapping");
    for (const auto& kv : node) {
        const std::string key = kv.first.as<std::string>();
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end())
            throw SchemaError("unknown key '" + key + "' in " + where);
    }
}

template <class T>
std::vector<T> scalar_or_list(const YAML::Node& n, const std::string& where) {
    try {
        if (n.IsSequence()) return n.as<std::vector<T>>();
        return {n.as<T>()};
    } catch (const YAML::Exception& e) {
        throw SchemaError("bad value for " + where + ": " + e.what());
    }
}

template <class T>
T scalar(const YAML::Node& n, const std::string& where) {
    try {
        return n.as<T>();
    } catch (const YAML::Exception& e) {
        throw SchemaError("bad value for " + where + ": " + e.what());
    }
}

std::string hex64(std::uint64_t h) {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

}  // namespace

const char* to_string(DatasetKind k) {
    switch (k) {
        case DatasetKind::Moons: return "moons";
        case DatasetKind::MoonsConfounded: return "moons_confounded";
        case DatasetKind::File: return "file";
    }
    return "?";
}

DatasetKind dataset_kind_from_string(const std::string& s) {
    if (s == "moons") return DatasetKind::Moons;
    if (s == "moons_confounded") return DatasetKind::MoonsConfounded;
    if (s == "file") return DatasetKind::File;
    throw InvalidArgument("unknown dataset kind '" + s + "' (expected moons, moons_confounded or file)");
}

void ExperimentConfig::validate() const {
    require(!families.empty(), "experiment lists no model family");
    require(!learners.empty(), "experiment lists no learner");
    require(!seeds.empty(), "experiment seed list is empty");
    require(!eval.metrics.empty(), "experiment lists no metric");
    require(eval.p > 0 && eval.n_eval_points >= 0, "invalid evaluation settings");
    if (dataset.kind == DatasetKind::File) {
        require(!dataset.train_path.empty() && fs::exists(dataset.train_path),
                "training data file '" + dataset.train_path.string() + "' does not exist");
        require(!dataset.test_path.empty() && fs::exists(dataset.test_path),
                "test data file '" + dataset.test_path.string() + "' does not exist");
    } else {
        require(!dataset.n_train.empty(), "experiment lists no training size");
        for (int n : dataset.n_train) require(n > 0, "training sizes must be positive");
        require(dataset.n_test > 0, "test size must be positive");
    }
    for (Family f : families) {
        require(f != Family::Tabular, "the tabular family is not a benchmark family");
        cell_train_config(*this, {f, learners.front(), 1, seeds.front()});
    }
}

ExperimentConfig experiment_from_yaml(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw SchemaError(std::string("malformed YAML experiment: ") + e.what());
    }
    ExperimentConfig c;
    if (root.IsNull()) return c;
    check_keys(root,
               {"name", "dataset", "families", "learners", "seeds", "restriction", "train", "eval",
                "save_checkpoints"},
               "experiment");
    if (root["name"]) c.name = scalar<std::string>(root["name"], "name");
    if (const YAML::Node d = root["dataset"]) {
        check_keys(d, {"kind", "n_train", "n_test", "train_path", "test_path"}, "dataset");
        if (d["kind"]) c.dataset.kind = dataset_kind_from_string(scalar<std::string>(d["kind"], "dataset.kind"));
        if (d["n_train"]) c.dataset.n_train = scalar_or_list<int>(d["n_train"], "dataset.n_train");
        if (d["n_test"]) c.dataset.n_test = scalar<int>(d["n_test"], "dataset.n_test");
        if (d["train_path"]) c.dataset.train_path = scalar<std::string>(d["train_path"], "dataset.train_path");
        if (d["test_path"]) c.dataset.test_path = scalar<std::string>(d["test_path"], "dataset.test_path");
    }
    if (root["families"]) {
        c.families.clear();
        for (const auto& s : scalar_or_list<std::string>(root["families"], "families"))
            c.families.push_back(family_from_string(s));
    }
    if (root["learners"]) {
        c.learners.clear();
        for (const auto& s : scalar_or_list<std::string>(root["learners"], "learners"))
            c.learners.push_back(loss::loss_from_string(s));
    }
    if (const YAML::Node s = root["seeds"]) {
        if (s.IsSequence()) {
            c.seeds = scalar_or_list<std::uint64_t>(s, "seeds");
        } else {
            const int k = scalar<int>(s, "seeds");
            require(k > 0, "seed count must be positive");
            c.seeds.clear();
            for (int i = 0; i < k; ++i) c.seeds.push_back(static_cast<std::uint64_t>(i));
        }
    }
    if (root["restriction"])
        c.restriction = train::restriction_from_string(scalar<std::string>(root["restriction"], "restriction"));
    if (const YAML::Node t = root["train"]) {
        if (!t.IsNull()) {
            if (!t.IsMap()) throw SchemaError("train must be a mapping");
            for (const char* fixed : {"family", "learner", "seed", "restriction"})
                if (t[fixed]) throw SchemaError(std::string("train.") + fixed + " is set by the experiment grid");
            YAML::Emitter em;
            em << t;
            c.train_overrides = em.c_str();
        }
    }
    if (const YAML::Node e = root["eval"]) {
        check_keys(e, {"metrics", "p", "n_eval_points", "convention"}, "eval");
        if (e["metrics"]) {
            c.eval.metrics.clear();
            for (const auto& s : scalar_or_list<std::string>(e["metrics"], "eval.metrics"))
                c.eval.metrics.push_back(eval::metric_from_string(s));
        }
        if (e["p"]) c.eval.p = scalar<int>(e["p"], "eval.p");
        if (e["n_eval_points"]) c.eval.n_eval_points = scalar<int>(e["n_eval_points"], "eval.n_eval_points");
        if (e["convention"])
            c.eval.convention = eval::convention_from_string(scalar<std::string>(e["convention"], "eval.convention"));
    }
    if (root["save_checkpoints"]) c.save_checkpoints = scalar<bool>(root["save_checkpoints"], "save_checkpoints");
    return c;
}

ExperimentConfig load_experiment(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open experiment file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return experiment_from_yaml(ss.str());
}

std::string experiment_to_yaml(const ExperimentConfig& c) {
    YAML::Emitter em;
    em << YAML::BeginMap;
    em << YAML::Key << "name" << YAML::Value << c.name;
    em << YAML::Key << "dataset" << YAML::Value << YAML::BeginMap;
    em << YAML::Key << "kind" << YAML::Value << to_string(c.dataset.kind);
    em << YAML::Key << "n_train" << YAML::Value << YAML::Flow << c.dataset.n_train;
    em << YAML::Key << "n_test" << YAML::Value << c.dataset.n_test;
    if (!c.dataset.train_path.empty()) em << YAML::Key << "train_path" << YAML::Value << c.dataset.train_path.string();
    if (!c.dataset.test_path.empty()) em << YAML::Key << "test_path" << YAML::Value << c.dataset.test_path.string();
    em << YAML::EndMap;
    std::vector<std::string> fam, lrn, met;
    for (Family f : c.families) fam.emplace_back(to_string(f));
    for (loss::LossKind l : c.learners) lrn.emplace_back(loss::to_string(l));
    for (eval::MetricKind m : c.eval.metrics) met.emplace_back(eval::to_string(m));
    em << YAML::Key << "families" << YAML::Value << YAML::Flow << fam;
    em << YAML::Key << "learners" << YAML::Value << YAML::Flow << lrn;
    em << YAML::Key << "seeds" << YAML::Value << YAML::Flow << c.seeds;
    em << YAML::Key << "restriction" << YAML::Value << train::to_string(c.restriction);
    if (!c.train_overrides.empty()) em << YAML::Key << "train" << YAML::Value << YAML::Load(c.train_overrides);
    em << YAML::Key << "eval" << YAML::Value << YAML::BeginMap;
    em << YAML::Key << "metrics" << YAML::Value << YAML::Flow << met;
    em << YAML::Key << "p" << YAML::Value << c.eval.p;
    em << YAML::Key << "n_eval_points" << YAML::Value << c.eval.n_eval_points;
    em << YAML::Key << "convention" << YAML::Value << eval::to_string(c.eval.convention);
    em << YAML::EndMap;
    em << YAML::Key << "save_checkpoints" << YAML::Value << c.save_checkpoints;
    em << YAML::EndMap;
    return std::string(em.c_str()) + "\n";
}

std::vector<Cell> expand_grid(const ExperimentConfig& cfg) {
    std::vector<Cell> cells;
    const std::vector<int> sizes = cfg.dataset.kind == DatasetKind::File ? std::vector<int>{0} : cfg.dataset.n_train;
    for (Family f : cfg.families)
        for (int n : sizes)
            for (std::uint64_t s : cfg.seeds)
                for (loss::LossKind l : cfg.learners) cells.push_back({f, l, n, s});
    return cells;
}

train::TrainConfig cell_train_config(const ExperimentConfig& cfg, const Cell& cell) {
    YAML::Node node = cfg.train_overrides.empty() ? YAML::Node(YAML::NodeType::Map) : YAML::Load(cfg.train_overrides);
    node["family"] = to_string(cell.family);
    node["learner"] = loss::to_string(cell.learner);
    node["restriction"] = train::to_string(cfg.restriction);
    node["seed"] = derive_seed(cell.seed, kTrainTag, static_cast<std::uint64_t>(cell.n_train));
    YAML::Emitter em;
    em << node;
    return train::train_config_from_yaml(em.c_str());
}

nlohmann::json cell_config_json(const ExperimentConfig& cfg, const Cell& cell) {
    nlohmann::json dataset{{"kind", to_string(cfg.dataset.kind)}, {"n_train", cell.n_train}};
    if (cfg.dataset.kind == DatasetKind::File) {
        dataset["train_path"] = cfg.dataset.train_path.string();
        dataset["test_path"] = cfg.dataset.test_path.string();
    } else {
        dataset["n_test"] = cfg.dataset.n_test;
    }
    std::vector<std::string> metrics;
    for (eval::MetricKind m : cfg.eval.metrics) metrics.emplace_back(eval::to_string(m));
    return {{"dataset", dataset},
            {"family", to_string(cell.family)},
            {"learner", loss::to_string(cell.learner)},
            {"seed", cell.seed},
            {"restriction", train::to_string(cfg.restriction)},
            {"train", train::train_config_to_yaml(cell_train_config(cfg, cell))},
            {"eval",
             {{"metrics", metrics},
              {"p", cfg.eval.p},
              {"n_eval_points", cfg.eval.n_eval_points},
              {"convention", eval::to_string(cfg.eval.convention)}}}};
}

std::string cell_hash(const ExperimentConfig& cfg, const Cell& cell) {
    return hex64(fnv1a(cell_config_json(cfg, cell).dump()));
}

DataSplit make_datasets(const ExperimentConfig& cfg, int n_train, std::uint64_t seed) {
    if (cfg.dataset.kind == DatasetKind::File)
        return {data::load_tabular_dataset(cfg.dataset.train_path), data::load_tabular_dataset(cfg.dataset.test_path)};
    const std::uint64_t data_seed = derive_seed(seed, kDataTag, static_cast<std::uint64_t>(n_train));
    data::MoonsConfig mc;
    if (cfg.dataset.kind == DatasetKind::MoonsConfounded) {
        mc = data::moons_confounded_variant(n_train, cfg.dataset.n_test, data_seed);
    } else {
        mc.n_train = n_train;
        mc.n_test = cfg.dataset.n_test;
        mc.seed = data_seed;
    }
    data::MoonsSplit split = data::generate_moons_dataset(mc);
    return {std::move(split.train), std::move(split.test)};
}

std::vector<eval::EvalResult> evaluate_model(const gen::GenerativeModel& model, const data::PODataset& test,
                                             const std::vector<int>& v_mask, const EvalSpec& spec,
                                             std::uint64_t seed, bool strict) {
    std::vector<eval::EvalResult> out;
    for (eval::MetricKind m : spec.metrics) {
        if (m == eval::MetricKind::W2) {
            if (!test.has_ground_truth()) {
                if (strict) throw InvalidArgument("W2 needs a dataset with a ground-truth CDPO sampler");
                continue;
            }
            eval::W2Options opt;
            opt.p = spec.p;
            opt.n_eval_points = spec.n_eval_points;
            opt.v_mask = v_mask;
            opt.seed = derive_seed(seed, kEvalTag);
            opt.convention = spec.convention;
            for (int arm : {0, 1}) out.push_back(eval::evaluate_w2(model, test, arm, opt));
        } else {
            if (!strict && (!model.exact_density() || !test.has_joint_po())) continue;
            for (int arm : {0, 1}) out.push_back(eval::avg_log_prob(model, test, arm, v_mask, spec.convention));
        }
    }
    return out;
}

nlohmann::json metric_scores(const std::vector<eval::EvalResult>& results) {
    std::map<std::string, std::pair<double, int>> acc;
    for (const eval::EvalResult& r : results) {
        auto& [sum, k] = acc[eval::to_string(r.metric)];
        sum += r.aggregate.center;
        ++k;
    }
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, v] : acc) {
        const double mean = v.first / v.second;
        j[name] = std::isfinite(mean) ? nlohmann::json(mean) : nlohmann::json(nullptr);
    }
    return j;
}

nlohmann::json learner_checkpoint_json(const train::LearnerResult& result) {
    require(result.model != nullptr, "learner result has no model");
    if (!result.live) return gen::checkpoint_to_json(*result.model);
    nlohmann::json j = gen::checkpoint_to_json(*result.model, result.model->parameters());
    j["params"] = std::vector<double>(result.live->data(), result.live->data() + result.live->size());
    return j;
}

std::unique_ptr<gen::GenerativeModel> evaluation_model(const nlohmann::json& checkpoint) {
    gen::Checkpoint ck = gen::checkpoint_from_json(checkpoint);
    if (ck.ema) ck.model->set_parameters(*ck.ema);
    ck.model->freeze();
    return std::move(ck.model);
}

std::string version_stamp() { return std::string(CDPO_VERSION) + "+" + CDPO_GIT_STAMP; }

fs::path output_root(const std::optional<fs::path>& flag) {
    if (flag) return *flag;
    if (const char* env = std::getenv("CDPO_LAB_OUT"); env && *env) return env;
    return "cdpo_out";
}

fs::path record_path(const fs::path& out_dir, const std::string& hash) {
    return out_dir / "records" / (hash + ".json");
}

std::vector<nlohmann::json> load_records(const fs::path& dir) {
    std::vector<fs::path> files;
    const fs::path records = dir / "records";
    if (fs::is_directory(records))
        for (const auto& e : fs::directory_iterator(records)) {
            const std::string name = e.path().filename().string();
            if (e.is_regular_file() && e.path().extension() == ".json" && name.find(".error.") == std::string::npos)
                files.push_back(e.path());
        }
    std::sort(files.begin(), files.end());
    std::vector<nlohmann::json> out;
    for (const fs::path& f : files) {
        nlohmann::json j = gen::read_json(f);
        if (j.value("status", "") == "ok") {
            j["_file"] = f.string();
            out.push_back(std::move(j));
        }
    }
    return out;
}

namespace {

struct Group {
    Family family;
    int n_train;
    std::uint64_t seed;
    std::vector<Cell> pending;
};

nlohmann::json record_header(const ExperimentConfig& cfg, const Cell& cell, const std::string& hash) {
    return {{"schema_version", kRecordSchemaVersion},
            {"kind", "benchmark_cell"},
            {"experiment", cfg.name},
            {"config_hash", hash},
            {"cell",
             {{"family", to_string(cell.family)},
              {"learner", loss::to_string(cell.learner)},
              {"n_train", cell.n_train},
              {"seed", cell.seed},
              {"restriction", train::to_string(cfg.restriction)}}},
            {"config", cell_config_json(cfg, cell)},
            {"version", version_stamp()}};
}

void write_error(const ExperimentConfig& cfg, const Cell& cell, const fs::path& out_dir, const std::string& what,
                 double seconds) {
    const std::string hash = cell_hash(cfg, cell);
    nlohmann::json rec = record_header(cfg, cell, hash);
    rec["status"] = "error";
    rec["error"] = what;
    rec["wall_clock_seconds"] = seconds;
    gen::write_json_atomic(rec, out_dir / "records" / (hash + ".error.json"));
}

}  // namespace

BenchmarkSummary run_benchmark(const ExperimentConfig& cfg, const fs::path& out_dir, const BenchmarkOptions& opt) {
    cfg.validate();
    fs::create_directories(out_dir / "records");
    std::mutex mu;
    const auto log = [&](const std::string& msg) {
        if (!opt.log) return;
        std::lock_guard<std::mutex> lock(mu);
        opt.log(msg);
    };

    BenchmarkSummary summary;
    std::vector<Group> groups;
    for (const Cell& cell : expand_grid(cfg)) {
        ++summary.cells;
        if (fs::exists(record_path(out_dir, cell_hash(cfg, cell)))) {
            ++summary.skipped;
            continue;
        }
        if (groups.empty() || groups.back().family != cell.family || groups.back().n_train != cell.n_train ||
            groups.back().seed != cell.seed)
            groups.push_back({cell.family, cell.n_train, cell.seed, {}});
        groups.back().pending.push_back(cell);
    }

    int completed = 0, failed = 0;
    const auto run_group = [&](const Group& g) {
        const double start = now_seconds();
        std::vector<loss::LossKind> learners;
        for (const Cell& c : g.pending) learners.push_back(c.learner);
        DataSplit data;
        nuis::NuisanceEstimates nuisance;
        train::TrainConfig base;
        try {
            data = make_datasets(cfg, g.n_train, g.seed);
            base = cell_train_config(cfg, g.pending.front());
            nuisance = train::fit_stage1(data.train, base, learners);
        } catch (const std::exception& e) {
            for (const Cell& c : g.pending) write_error(cfg, c, out_dir, e.what(), now_seconds() - start);
            std::lock_guard<std::mutex> lock(mu);
            failed += static_cast<int>(g.pending.size());
            if (opt.log) opt.log(std::string("stage 1 failed for ") + to_string(g.family) + " n=" +
                                 std::to_string(g.n_train) + " seed=" + std::to_string(g.seed) + ": " + e.what());
            return;
        }
        const double stage1_seconds = now_seconds() - start;
        for (const Cell& cell : g.pending) {
            const double t0 = now_seconds();
            const std::string hash = cell_hash(cfg, cell);
            const std::string label = std::string(to_string(cell.family)) + "/" + loss::to_string(cell.learner) +
                                      " n=" + std::to_string(cell.n_train) + " seed=" + std::to_string(cell.seed);
            try {
                const train::TrainConfig tc = cell_train_config(cfg, cell);
                const train::LearnerResult res = train::train_learner(data.train, tc, nuisance, cell.learner);
                const std::vector<eval::EvalResult> results =
                    evaluate_model(*res.model, data.test, tc.v_mask, cfg.eval, tc.seed, false);
                nlohmann::json rec = record_header(cfg, cell, hash);
                rec["status"] = "ok";
                if (cfg.save_checkpoints) {
                    const fs::path ck = fs::path("checkpoints") / (hash + ".json");
                    gen::write_json_atomic(learner_checkpoint_json(res), out_dir / ck);
                    rec["checkpoint"] = ck.string();
                }
                nlohmann::json rs = nlohmann::json::array();
                for (const eval::EvalResult& r : results) rs.push_back(eval::to_json(r));
                rec["results"] = std::move(rs);
                rec["scores"] = metric_scores(results);
                rec["history"] = res.history;
                rec["stage1_seconds"] = stage1_seconds;
                rec["wall_clock_seconds"] = now_seconds() - t0;
                gen::write_json_atomic(rec, record_path(out_dir, hash));
                std::lock_guard<std::mutex> lock(mu);
                ++completed;
                if (opt.log) opt.log("done " + label + " " + rec["scores"].dump());
            } catch (const std::exception& e) {
                write_error(cfg, cell, out_dir, e.what(), now_seconds() - t0);
                std::lock_guard<std::mutex> lock(mu);
                ++failed;
                if (opt.log) opt.log("FAILED " + label + ": " + e.what());
            }
        }
    };

    const int jobs = std::max(1, std::min(opt.jobs, static_cast<int>(groups.size())));
    if (jobs <= 1) {
        for (const Group& g : groups) run_group(g);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < groups.size(); i = next++) run_group(groups[i]);
            });
        for (auto& th : pool) th.join();
    }
    log("benchmark finished: " + std::to_string(completed) + " trained, " + std::to_string(summary.skipped) +
        " skipped, " + std::to_string(failed) + " failed");

    summary.completed = completed;
    summary.failed = failed;
    for (const Cell& cell : expand_grid(cfg)) {
        const fs::path p = record_path(out_dir, cell_hash(cfg, cell));
        if (fs::exists(p)) summary.records.push_back(p);
    }
    return summary;
}

}  // namespace cdpo::cli
