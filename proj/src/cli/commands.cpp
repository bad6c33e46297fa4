#include "cdpo/cli/commands.hpp"

#include <chrono>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <yaml-cpp/yaml.h>

#include "cdpo/cli/experiment.hpp"
#include "cdpo/cli/plot.hpp"
#include "cdpo/core/error.hpp"
#include "cdpo/data/tabular_io.hpp"
#include "cdpo/genmodels/checkpoint.hpp"

namespace cdpo::cli {

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string learner;
    std::string family;
    std::string restriction;
    int jobs = 1;
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

fs::path out_dir(const CommonFlags& f) {
    return output_root(f.out.empty() ? std::nullopt : std::optional<fs::path>(f.out));
}

/// Config file (or defaults) with the command-line flags applied on top.
ExperimentConfig effective_config(const CommonFlags& f, const fs::path& fallback = {}) {
    ExperimentConfig cfg;
    if (!f.config.empty())
        cfg = load_experiment(f.config);
    else if (!fallback.empty() && fs::exists(fallback))
        cfg = load_experiment(fallback);
    if (!f.family.empty()) cfg.families = {family_from_string(f.family)};
    if (!f.learner.empty()) cfg.learners = {loss::loss_from_string(f.learner)};
    if (!f.restriction.empty()) cfg.restriction = train::restriction_from_string(f.restriction);
    if (f.seed) cfg.seeds = {*f.seed};
    cfg.validate();
    return cfg;
}

Cell single_cell(const ExperimentConfig& cfg) {
    const int n = cfg.dataset.kind == DatasetKind::File ? 0 : cfg.dataset.n_train.front();
    return {cfg.families.front(), cfg.learners.front(), n, cfg.seeds.front()};
}

/// The experiment narrowed to one cell, as written next to single-run outputs.
ExperimentConfig single_cell_config(ExperimentConfig cfg, const Cell& cell) {
    cfg.families = {cell.family};
    cfg.learners = {cell.learner};
    cfg.seeds = {cell.seed};
    if (cfg.dataset.kind != DatasetKind::File) cfg.dataset.n_train = {cell.n_train};
    return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp);
        if (!f) throw InvalidArgument("cannot write " + path.string());
        f << text;
    }
    fs::rename(tmp, path);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string cell_label(const Cell& c) {
    return std::string(to_string(c.family)) + "/" + loss::to_string(c.learner) + " n_train=" +
           std::to_string(c.n_train) + " seed=" + std::to_string(c.seed);
}

int cmd_generate(const CommonFlags& f, std::ostream& out) {
    const ExperimentConfig cfg = effective_config(f);
    if (cfg.dataset.kind == DatasetKind::File) throw UsageError("generate needs a moons dataset, not a file dataset");
    const Cell cell = single_cell(cfg);
    const DataSplit split = make_datasets(cfg, cell.n_train, cell.seed);
    const fs::path dir = out_dir(f);
    fs::create_directories(dir);
    data::save_tabular_dataset(split.train, dir / "train.csv");
    data::save_tabular_dataset(split.test, dir / "test.csv");
    write_text(dir / "experiment.yaml", experiment_to_yaml(single_cell_config(cfg, cell)));
    out << "wrote " << (dir / "train.csv").string() << " (" << split.train.x.rows() << " rows) and "
        << (dir / "test.csv").string() << " (" << split.test.x.rows() << " rows)\n";
    return kExitOk;
}

int cmd_train(const CommonFlags& f, std::ostream& out, std::ostream& err) {
    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentConfig cfg = effective_config(f);
    const Cell cell = single_cell(cfg);
    const train::TrainConfig tc = cell_train_config(cfg, cell);
    const DataSplit data = make_datasets(cfg, cell.n_train, cell.seed);
    const fs::path dir = out_dir(f);
    fs::create_directories(dir);

    err << "training " << cell_label(cell) << "\n";
    const train::TrainHook hook = [&](const train::EpochRecord& r, const gen::GenerativeModel*) {
        const int total = r.stage == 1 ? tc.stage1.epochs : tc.stage2.epochs;
        if (r.epoch == 1 || r.epoch % 10 == 0 || r.epoch == total)
            err << "  stage " << r.stage << " epoch " << r.epoch << " objective " << r.objective << "\n";
    };
    const train::TrainResult res = train::train_two_stage(data.train, tc, hook);

    const nlohmann::json model_json = learner_checkpoint_json(res.learner);
    gen::write_json_atomic(model_json, dir / "model.json");
    if (res.nuisance.has_outcome() || res.nuisance.has_propensity())
        gen::write_json_atomic(nuis::nuisance_to_json(res.nuisance), dir / "nuisance.json");
    write_text(dir / "experiment.yaml", experiment_to_yaml(single_cell_config(cfg, cell)));
    const nlohmann::json record{{"schema_version", kRecordSchemaVersion},
                                {"kind", "train"},
                                {"config_hash", cell_hash(cfg, cell)},
                                {"config", cell_config_json(cfg, cell)},
                                {"version", version_stamp()},
                                {"checkpoint", "model.json"},
                                {"history", res.learner.history},
                                {"wall_clock_seconds", seconds_since(t0)}};
    gen::write_json_atomic(record, dir / "train_record.json");
    out << "wrote " << (dir / "model.json").string() << "\n";
    return kExitOk;
}

int cmd_evaluate(const CommonFlags& f, const std::string& checkpoint_flag, std::ostream& out) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir = out_dir(f);
    const fs::path checkpoint = checkpoint_flag.empty() ? dir / "model.json" : fs::path(checkpoint_flag);
    if (!fs::exists(checkpoint)) throw UsageError("checkpoint " + checkpoint.string() + " does not exist");
    const ExperimentConfig cfg = effective_config(f, checkpoint.parent_path() / "experiment.yaml");
    const Cell cell = single_cell(cfg);
    const train::TrainConfig tc = cell_train_config(cfg, cell);
    const std::unique_ptr<gen::GenerativeModel> model = evaluation_model(gen::read_json(checkpoint));
    const DataSplit data = make_datasets(cfg, cell.n_train, cell.seed);
    const std::vector<eval::EvalResult> results = evaluate_model(*model, data.test, tc.v_mask, cfg.eval, tc.seed, true);

    nlohmann::json rs = nlohmann::json::array();
    for (const eval::EvalResult& r : results) rs.push_back(eval::to_json(r));
    const nlohmann::json scores = metric_scores(results);
    const nlohmann::json record{{"schema_version", kRecordSchemaVersion},
                                {"kind", "evaluation"},
                                {"checkpoint", fs::absolute(checkpoint).string()},
                                {"config", cell_config_json(cfg, cell)},
                                {"version", version_stamp()},
                                {"results", rs},
                                {"scores", scores},
                                {"wall_clock_seconds", seconds_since(t0)}};
    fs::create_directories(dir);
    gen::write_json_atomic(record, dir / "eval.json");
    for (const eval::EvalResult& r : results)
        out << eval::to_string(r.metric) << " arm " << r.arm << ": " << r.aggregate.center << " ("
            << eval::to_string(r.aggregate.convention) << " spread " << r.aggregate.spread << ")\n";
    out << "wrote " << (dir / "eval.json").string() << "\n";
    return kExitOk;
}

int cmd_benchmark(const CommonFlags& f, std::ostream& out, std::ostream& err) {
    const ExperimentConfig cfg = effective_config(f);
    const fs::path dir = out_dir(f);
    fs::create_directories(dir);
    write_text(dir / "experiment.yaml", experiment_to_yaml(cfg));
    BenchmarkOptions opt;
    opt.jobs = f.jobs;
    opt.log = [&](const std::string& msg) { err << msg << "\n"; };
    const BenchmarkSummary s = run_benchmark(cfg, dir, opt);
    out << s.cells << " cells: " << s.completed << " trained, " << s.skipped << " already complete, " << s.failed
        << " failed\n";
    return s.failed == 0 ? kExitOk : kExitFailure;
}

int cmd_orthocheck(const CommonFlags& f, bool inject_fault, std::ostream& out) {
    ortho::SuiteConfig sc;
    if (!f.config.empty()) {
        std::ifstream in(f.config);
        if (!in) throw UsageError("cannot open " + f.config);
        std::stringstream ss;
        ss << in.rdbuf();
        sc = suite_config_from_yaml(ss.str());
    }
    if (f.seed) sc.seed = *f.seed;
    sc.flip_correction = inject_fault;
    const ortho::SuiteReport report = ortho::run_theory_suite(sc);
    const fs::path dir = out_dir(f);
    fs::create_directories(dir);
    nlohmann::json j = report.to_json();
    j["version"] = version_stamp();
    gen::write_json_atomic(j, dir / "orthocheck_report.json");
    out << report.to_text();
    out << "wrote " << (dir / "orthocheck_report.json").string() << "\n";
    return report.passed() ? kExitOk : kExitFailure;
}

int cmd_plot(const CommonFlags& f, const std::string& results_flag, std::ostream& out, std::ostream& err) {
    const fs::path results = results_flag.empty() ? out_dir(f) : fs::path(results_flag);
    const fs::path dest = f.out.empty() ? results / "plots" : fs::path(f.out);
    const PlotOutput po = plot_results(results, dest);
    for (const std::string& p : po.problems) err << "skipped " << p << "\n";
    for (const fs::path& p : po.files) out << "wrote " << p.string() << "\n";
    return po.problems.empty() ? kExitOk : kExitFailure;
}

}  // namespace

ortho::SuiteConfig suite_config_from_yaml(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw SchemaError(std::string("malformed YAML: ") + e.what());
    }
    ortho::SuiteConfig c;
    if (root.IsNull()) return c;
    if (!root.IsMap()) throw SchemaError("orthocheck config must be a mapping");
    try {
        for (const auto& kv : root) {
            const std::string key = kv.first.as<std::string>();
            const YAML::Node& v = kv.second;
            if (key == "n_dgps") c.n_dgps = v.as<int>();
            else if (key == "nx") c.nx = v.as<int>();
            else if (key == "ny") c.ny = v.as<int>();
            else if (key == "nv") c.nv = v.as<int>();
            else if (key == "seed") c.seed = v.as<std::uint64_t>();
            else if (key == "step") c.step = v.as<double>();
            else if (key == "epsilons") c.epsilons = v.as<std::vector<double>>();
            else throw SchemaError("unknown key '" + key + "' in orthocheck config");
        }
    } catch (const YAML::Exception& e) {
        throw SchemaError(std::string("bad value in orthocheck config: ") + e.what());
    }
    c.validate();
    return c;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Doubly robust conditional-distribution learners: training, evaluation and theory checks",
                 "cdpo_lab"};
    app.require_subcommand(1);
    CommonFlags flags;
    std::string checkpoint, results;
    bool inject_fault = false;

    const auto add_common = [&](CLI::App* cmd, bool grid_flags) {
        cmd->add_option("--config", flags.config, "YAML configuration file")->check(CLI::ExistingFile);
        cmd->add_option("--seed", flags.seed, "Seed (replaces the configured seed list)");
        cmd->add_option("--out", flags.out, "Output directory (default $CDPO_LAB_OUT or ./cdpo_out)");
        if (!grid_flags) return;
        cmd->add_option("--learner", flags.learner, "Meta-learner")
            ->check(CLI::IsMember({"plugin", "ra", "iptw", "gdr"}));
        cmd->add_option("--family", flags.family, "Generative model family")
            ->check(CLI::IsMember({"cnf", "cgan", "cvae", "cdm"}));
        cmd->add_option("--restriction", flags.restriction, "Target model class")
            ->check(CLI::IsMember({"full", "linear"}));
        cmd->add_option("--jobs", flags.jobs, "Worker threads")->check(CLI::PositiveNumber);
    };

    CLI::App* gen_cmd = app.add_subcommand("generate", "Write moons train/test data in the tabular format");
    add_common(gen_cmd, true);
    CLI::App* train_cmd = app.add_subcommand("train", "Fit one learner (stage 1 and stage 2)");
    add_common(train_cmd, true);
    CLI::App* eval_cmd = app.add_subcommand("evaluate", "Score a checkpoint on the test split");
    add_common(eval_cmd, true);
    eval_cmd->add_option("--checkpoint", checkpoint, "Model checkpoint (default <out>/model.json)");
    CLI::App* bench_cmd = app.add_subcommand("benchmark", "Run a family x learner x n_train x seed grid");
    add_common(bench_cmd, true);
    CLI::App* ortho_cmd = app.add_subcommand("orthocheck", "Run the numerical theory suite");
    add_common(ortho_cmd, false);
    ortho_cmd->add_flag("--inject-fault", inject_fault, "Negate the GDR correction term")->group("");
    CLI::App* plot_cmd = app.add_subcommand("plot", "Render SVG figures from benchmark records");
    add_common(plot_cmd, false);
    plot_cmd->add_option("--results", results, "Results directory (default: output root)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gen_cmd->parsed()) return cmd_generate(flags, out);
        if (train_cmd->parsed()) return cmd_train(flags, out, err);
        if (eval_cmd->parsed()) return cmd_evaluate(flags, checkpoint, out);
        if (bench_cmd->parsed()) return cmd_benchmark(flags, out, err);
        if (ortho_cmd->parsed()) return cmd_orthocheck(flags, inject_fault, out);
        if (plot_cmd->parsed()) return cmd_plot(flags, results, out, err);
    } catch (const CapabilityError& e) {
        err << e.what() << "\n";
        return kExitFailure;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const SchemaError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv;
    for (const std::string& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace cdpo::cli
