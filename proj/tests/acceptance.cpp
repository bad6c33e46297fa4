// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--criterion N ...] [--work-dir DIR] [--jobs N]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "cdpo/cli/experiment.hpp"
#include "cdpo/cli/plot.hpp"
#include "cdpo/core/error.hpp"
#include "cdpo/data/moons.hpp"
#include "cdpo/eval/w2.hpp"
#include "cdpo/genmodels/model.hpp"
#include "cdpo/losses/losses.hpp"
#include "cdpo/nuisance/nuisance.hpp"
#include "cdpo/orthocheck/suite.hpp"
#include "cdpo/train/ema.hpp"
#include "cdpo/train/trainer.hpp"

#ifndef CDPO_SOURCE_DIR
#define CDPO_SOURCE_DIR "."
#endif

using namespace cdpo;
namespace fs = std::filesystem;

namespace {

struct Context {
    fs::path work_dir;
    int jobs = 1;
};

struct Outcome {
    bool passed = false;
    std::string detail;
};

std::string fmt(double v, int precision = 4) {
    std::ostringstream os;
    os.precision(precision);
    os << v;
    return os.str();
}

double max_value(const ortho::SuiteReport& r, const std::string& prefix) {
    double m = 0.0;
    for (const ortho::CheckResult& c : r.checks)
        if (c.name.rfind(prefix, 0) == 0) m = std::max(m, c.value);
    return m;
}

std::pair<double, double> value_range(const ortho::SuiteReport& r, const std::string& name) {
    double lo = INFINITY, hi = -INFINITY;
    for (const ortho::CheckResult& c : r.checks)
        if (c.name == name) lo = std::min(lo, c.value), hi = std::max(hi, c.value);
    return {lo, hi};
}

// ---------------------------------------------------------------- 1 and 2

Outcome theory_suite(const Context&) {
    const ortho::SuiteReport r = ortho::run_theory_suite();
    const bool ok = r.config.n_dgps >= 5 && r.passed("identification") && r.passed("eif_mean_zero") &&
                    r.passed("orthogonality_gdr") && r.passed("orthogonality_ra_contrast") &&
                    r.passed("double_robustness") && r.seconds < 120.0;
    const auto contrast = value_range(r, "orthogonality_ra_contrast");
    return {ok, std::to_string(r.config.n_dgps) + " DGPs; identification " + fmt(max_value(r, "identification")) +
                    ", EIF mean " + fmt(max_value(r, "eif_mean_zero")) + ", GDR derivative/error <= " +
                    fmt(max_value(r, "orthogonality_gdr")) + ", RA contrast >= " + fmt(contrast.first) +
                    ", double robustness " + fmt(max_value(r, "double_robustness")) + "; " + fmt(r.seconds, 3) +
                    " s"};
}

Outcome remainder_scaling(const Context&) {
    const ortho::SuiteReport r = ortho::run_theory_suite();
    const auto gdr = value_range(r, "remainder_slope_gdr");
    const auto ra = value_range(r, "remainder_slope_ra");
    const bool ok = r.passed("remainder_slope_gdr") && r.passed("remainder_slope_ra") && r.seconds < 300.0;
    return {ok, "GDR slopes [" + fmt(gdr.first) + ", " + fmt(gdr.second) + "] (need [3.5, 4.5]), RA slopes [" +
                    fmt(ra.first) + ", " + fmt(ra.second) + "] (need [1.5, 2.5]); " + fmt(r.seconds, 3) + " s"};
}

// ---------------------------------------------------------------- 3 and 4

cli::BenchmarkSummary fresh_benchmark(const Context& ctx, const std::string& config_name, cli::ExperimentConfig& cfg,
                                      fs::path& out) {
    cfg = cli::load_experiment(fs::path(CDPO_SOURCE_DIR) / "configs" / (config_name + ".yaml"));
    out = ctx.work_dir / config_name;
    fs::remove_all(out);
    cli::BenchmarkOptions opt;
    opt.jobs = ctx.jobs;
    opt.log = [](const std::string& msg) { std::cerr << msg << std::endl; };
    return cli::run_benchmark(cfg, out, opt);
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
    int count = 0;
};

MeanSe mean_se(const std::vector<double>& v) {
    MeanSe m;
    m.count = static_cast<int>(v.size());
    if (v.empty()) return m;
    m.mean = std::accumulate(v.begin(), v.end(), 0.0) / m.count;
    if (m.count > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - m.mean) * (x - m.mean);
        m.se = std::sqrt(ss / (m.count - 1) / m.count);
    }
    return m;
}

Outcome moons_trend(const Context& ctx) {
    const auto t0 = std::chrono::steady_clock::now();
    cli::ExperimentConfig cfg;
    fs::path out;
    const cli::BenchmarkSummary s = fresh_benchmark(ctx, "moons_cnf_scaling", cfg, out);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    // learner -> n_train -> arm-averaged W2 per seed
    std::map<std::string, std::map<int, std::vector<double>>> w2;
    for (const nlohmann::json& r : cli::load_records(out))
        if (r["scores"].contains("w2") && r["scores"]["w2"].is_number())
            w2[r["cell"]["learner"].get<std::string>()][r["cell"]["n_train"].get<int>()].push_back(
                r["scores"]["w2"].get<double>());
    try {
        cli::plot_results(out, out / "plots");
    } catch (const std::exception& e) {
        std::cerr << "plotting failed: " << e.what() << std::endl;
    }

    const int n_small = *std::min_element(cfg.dataset.n_train.begin(), cfg.dataset.n_train.end());
    const int n_large = *std::max_element(cfg.dataset.n_train.begin(), cfg.dataset.n_train.end());
    bool ok = s.failed == 0 && cfg.seeds.size() >= 10 && seconds < 7200.0;
    std::ostringstream detail;
    detail << "mean W2 at n=" << n_small << " -> n=" << n_large << ":";
    for (const std::string learner : {"plugin", "ra", "iptw", "gdr"}) {
        const MeanSe small = mean_se(w2[learner][n_small]);
        const MeanSe large = mean_se(w2[learner][n_large]);
        const bool complete = small.count == static_cast<int>(cfg.seeds.size()) &&
                              large.count == static_cast<int>(cfg.seeds.size());
        ok = ok && complete && large.mean <= small.mean;
        detail << " " << learner << " " << fmt(small.mean) << "->" << fmt(large.mean);
    }
    const MeanSe gdr = mean_se(w2["gdr"][n_large]);
    const MeanSe plugin = mean_se(w2["plugin"][n_large]);
    const double pooled = std::sqrt(gdr.se * gdr.se + plugin.se * plugin.se);
    ok = ok && gdr.mean <= plugin.mean + pooled;
    detail << "; at n=" << n_large << " GDR " << fmt(gdr.mean) << " vs plug-in " << fmt(plugin.mean)
           << " + pooled se " << fmt(pooled) << "; " << s.failed << " failed cells; " << fmt(seconds, 4) << " s";
    return {ok, detail.str()};
}

Outcome restricted_target(const Context& ctx) {
    const auto t0 = std::chrono::steady_clock::now();
    cli::ExperimentConfig cfg;
    fs::path out;
    const cli::BenchmarkSummary s = fresh_benchmark(ctx, "confounded_linear", cfg, out);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    // seed -> learner -> arm-averaged held-out log-probability
    std::map<std::uint64_t, std::map<std::string, double>> lp;
    for (const nlohmann::json& r : cli::load_records(out))
        if (r["scores"].contains("log_prob") && r["scores"]["log_prob"].is_number())
            lp[r["cell"]["seed"].get<std::uint64_t>()][r["cell"]["learner"].get<std::string>()] =
                r["scores"]["log_prob"].get<double>();
    int runs = 0, beats_iptw = 0, beats_plugin = 0;
    for (const auto& [seed, by_learner] : lp) {
        if (!by_learner.count("gdr") || !by_learner.count("iptw") || !by_learner.count("plugin")) continue;
        ++runs;
        beats_iptw += by_learner.at("gdr") > by_learner.at("iptw");
        beats_plugin += by_learner.at("gdr") > by_learner.at("plugin");
    }
    const bool ok = s.failed == 0 && runs >= 10 && 2 * beats_iptw > runs && 2 * beats_plugin > runs &&
                    seconds < 3600.0;
    return {ok, "GDR beats IPTW in " + std::to_string(beats_iptw) + "/" + std::to_string(runs) +
                    " runs and plug-in in " + std::to_string(beats_plugin) + "/" + std::to_string(runs) +
                    " runs (need > 50% each); " + std::to_string(s.failed) + " failed cells; " + fmt(seconds, 4) +
                    " s"};
}

// ---------------------------------------------------------------- 5

Outcome iptw_equivalence(const Context&) {
    data::MoonsConfig mc;
    mc.n_train = 1000;
    mc.n_test = 10;
    mc.seed = 5;
    data::PODataset ds = data::generate_moons_dataset(mc).train;
    ds.y.conservativeResize(Eigen::NoChange, 1);
    ds.y0.reset();
    ds.y1.reset();
    nuis::NuisanceConfig nc = train::nuisance_config(train::TrainConfig::defaults(Family::CNF), true);
    nc.epochs = 20;
    nc.seed = 17;
    const nuis::NuisanceEstimates est = nuis::fit_nuisance(ds, nc);
    const std::unique_ptr<gen::GenerativeModel> target = est.outcome_model->clone();

    Rng rng(23);
    int batches = 0, agree = 0;
    double worst = 0.0;
    while (batches < 100) {
        std::vector<int> rows(64);
        for (int& r : rows) r = rng.uniform_int(0, ds.size() - 1);
        const loss::LossBatch b = loss::make_loss_batch(ds, rows);
        const int arm = batches % 2;
        if ((b.a.array() == arm).count() == 0) continue;
        const loss::EquivalenceReport r = loss::iptw_equivalence_check(*target, est, b, arm, rng);
        ++batches;
        agree += r.equivalent && r.relative_difference <= 1e-6;
        worst = std::max(worst, r.relative_difference);
    }
    return {agree == batches, std::to_string(agree) + "/" + std::to_string(batches) +
                                  " batches agree; worst relative difference " + fmt(worst) + " (need <= 1e-06)"};
}

// ---------------------------------------------------------------- 6

double brute_force_min(const Matrix& cost) {
    std::vector<int> perm(static_cast<std::size_t>(cost.rows()));
    std::iota(perm.begin(), perm.end(), 0);
    double best = INFINITY;
    do {
        double c = 0.0;
        for (int i = 0; i < cost.rows(); ++i) c += cost(i, perm[static_cast<std::size_t>(i)]);
        best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

Matrix random_points(int n, int d, Rng& rng, double scale) {
    Matrix m(n, d);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
    return m;
}

Outcome metric_oracle(const Context&) {
    Rng rng(606);
    // Gaussian pairs N(m1, s1^2), N(m2, s2^2): W2 = sqrt((m1 - m2)^2 + (s1 - s2)^2).
    double worst_gauss = 0.0;
    for (int pair = 0; pair < 5; ++pair) {
        const double m1 = 2 * rng.normal(), m2 = 2 * rng.normal();
        const double s1 = 0.5 + 2 * rng.uniform(), s2 = 0.5 + 2 * rng.uniform();
        Matrix a(10000, 1), b(10000, 1);
        for (int i = 0; i < 10000; ++i) {
            a(i, 0) = m1 + s1 * rng.normal();
            b(i, 0) = m2 + s2 * rng.normal();
        }
        const double exact = std::sqrt((m1 - m2) * (m1 - m2) + (s1 - s2) * (s1 - s2));
        worst_gauss = std::max(worst_gauss, std::abs(eval::empirical_w2(a, b) - exact));
    }

    int assignment_mismatch = 0;
    for (int trial = 0; trial < 140; ++trial) {
        const int n = 1 + trial % 7;
        Matrix integer(n, n), real(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                integer(i, j) = rng.uniform_int(0, 20);
                real(i, j) = 10 * rng.uniform();
            }
        assignment_mismatch += eval::assignment_cost(integer, eval::solve_assignment(integer)) != brute_force_min(integer);
        assignment_mismatch += eval::assignment_cost(real, eval::solve_assignment(real)) != brute_force_min(real);
    }

    int axiom_failures = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + trial % 12, d = 1 + trial % 3;
        const Matrix a = random_points(n, d, rng, 1.0), b = random_points(n, d, rng, 1.0),
                     c = random_points(n, d, rng, 1.5);
        const double ab = eval::empirical_w2(a, b), bc = eval::empirical_w2(b, c), ac = eval::empirical_w2(a, c);
        const bool ok = eval::empirical_w2(a, a) == 0.0 && ab > 0.0 && ab == eval::empirical_w2(b, a) &&
                        ac <= ab + bc + 1e-12;
        axiom_failures += !ok;
    }
    return {worst_gauss <= 0.05 && assignment_mismatch == 0 && axiom_failures == 0,
            "Gaussian W2 error " + fmt(worst_gauss) + " (need <= 0.05 at 1e4 samples), " +
                std::to_string(assignment_mismatch) + " assignment mismatches in 280 problems (p <= 7), " +
                std::to_string(axiom_failures) + " axiom failures in 100 triples"};
}

// ---------------------------------------------------------------- 7

loss::LossBatch single_row(double x, int a, double y) {
    loss::LossBatch b;
    b.x = Matrix::Constant(1, 1, x);
    b.v = b.x;
    b.a = IntVector::Constant(1, a);
    b.y = Matrix::Constant(1, 1, y);
    return b;
}

loss::LossBatch rows_of(std::vector<int> arms, std::vector<double> ys) {
    loss::LossBatch b;
    const int n = static_cast<int>(arms.size());
    b.x = Matrix::Zero(n, 1);
    b.v = b.x;
    b.a.resize(n);
    b.y.resize(n, 1);
    for (int i = 0; i < n; ++i) {
        b.a(i) = arms[static_cast<std::size_t>(i)];
        b.y(i, 0) = ys[static_cast<std::size_t>(i)];
    }
    return b;
}

std::shared_ptr<gen::TabularModel> two_point(double log_p0) {
    const double p = std::exp(log_p0);
    return std::make_shared<gen::TabularModel>(gen::TabularModel::from_probabilities(1, 2, {p, 1 - p, p, 1 - p}));
}

Outcome unit_identities(const Context&) {
    std::vector<std::string> failed;
    const auto expect = [&](bool ok, const std::string& what) {
        if (!ok) failed.push_back(what);
    };

    train::EMAState half(Vector::Zero(1), 0.5);
    train::ema_update(half, Vector::Ones(1));
    expect(half.shadow(0) == 0.5, "EMA half step");
    train::EMAState none(Vector::Constant(1, 3.0), 0.0);
    train::ema_update(none, Vector::Constant(1, -2.0));
    expect(none.shadow(0) == -2.0, "EMA zero decay");
    train::EMAState geo(Vector::Zero(1), 0.995);
    const double c = 1.7;
    for (int k = 0; k < 100; ++k) train::ema_update(geo, Vector::Constant(1, c));
    expect(std::abs(geo.shadow(0) - c * (1 - std::pow(0.995, 100))) <= 1e-12, "EMA geometric series");

    nuis::NuisanceEstimates clip;
    const Vector x0 = Vector::Zero(1);
    clip.propensity_model = std::make_shared<nuis::ConstantPropensity>(0.05);
    expect(clip.predict_propensity(x0, 1) == 0.1, "clip 0.05");
    clip.propensity_model = std::make_shared<nuis::ConstantPropensity>(0.5);
    expect(clip.predict_propensity(x0, 1) == 0.5 && clip.predict_propensity(x0, 0) == 0.5, "clip 0.5");
    clip.propensity_model = std::make_shared<nuis::ConstantPropensity>(0.97);
    expect(clip.raw_propensity(x0, 0) == 1.0 - 0.97 && clip.predict_propensity(x0, 0) == 0.1, "clip complement");

    Rng rng(7);
    loss::LossOptions arm1;
    arm1.arm = 1;
    const auto g = two_point(-1.3);
    expect(loss::plugin_loss(*g, rows_of({0, 0}, {0, 1}), rng, arm1).value == 0.0, "plug-in without factual rows");
    // The model's own per-row log terms are the oracle for the batch values.
    const auto log_term = [&](const gen::GenerativeModel& m, const loss::LossBatch& b, int row) {
        return m.log_terms(b.v.row(row), b.a.segment(row, 1), b.y.row(row), rng, 1)(0);
    };
    const loss::LossBatch one = single_row(0, 1, 0);
    expect(loss::plugin_loss(*g, one, rng, arm1).value == log_term(*g, one, 0), "plug-in single row");
    const loss::LossBatch treated = rows_of({1, 1, 1}, {0, 1, 1});
    double total = 0.0;
    for (int i = 0; i < treated.rows(); ++i) total += log_term(*g, treated, i);
    expect(loss::plugin_loss(*g, treated, rng, arm1).value == total / treated.rows(),
           "plug-in sums every row when A = a");

    nuis::NuisanceEstimates unit;
    unit.propensity_model = std::make_shared<nuis::ConstantPropensity>(1.0);
    expect(loss::iptw_loss(*g, unit, treated, rng, arm1).value == loss::plugin_loss(*g, treated, rng, arm1).value,
           "IPTW with unit propensity");
    const auto g1 = two_point(-1.0);
    nuis::NuisanceEstimates half_p;
    half_p.propensity_model = std::make_shared<nuis::ConstantPropensity>(0.5);
    expect(loss::iptw_loss(*g1, half_p, single_row(0, 1, 0), rng, arm1).value == -2.0, "IPTW one row at 0.5");

    nuis::NuisanceEstimates point;
    point.outcome_model = std::make_shared<gen::TabularModel>(
        gen::TabularModel::from_probabilities(1, 2, {1 - 1e-300, 1e-300, 1 - 1e-300, 1e-300}));
    point.propensity_model = std::make_shared<nuis::ConstantPropensity>(0.3);
    const auto g7 = two_point(-0.7);
    expect(loss::ra_loss(*g7, point, treated, rng, arm1).value == loss::plugin_loss(*g7, treated, rng, arm1).value,
           "RA factual-only batch");
    const loss::LossBatch y0_row = single_row(0, 1, 0);
    expect(loss::ra_loss(*g7, point, single_row(0, 0, 1), rng, arm1).value == log_term(*g7, y0_row, 0),
           "RA point-mass pseudo-outcome");

    const nuis::ExactTabularRule exact;
    loss::LossOptions exact1 = arm1;
    exact1.rule = &exact;
    nuis::NuisanceEstimates both = point;
    both.outcome_model = std::make_shared<gen::TabularModel>(gen::TabularModel::from_probabilities(1, 2, {0.2, 0.8, 0.35, 0.65}));
    both.propensity_model = std::make_shared<nuis::ConstantPropensity>(1.0);
    expect(loss::gdr_loss(*g, both, treated, rng, exact1).value == loss::plugin_loss(*g, treated, rng, exact1).value,
           "GDR with unit propensity and A = a");
    both.propensity_model = std::make_shared<nuis::ConstantPropensity>(0.3);
    const loss::LossBatch controls = rows_of({0, 0, 0}, {1, 0, 1});
    expect(loss::gdr_loss(*g, both, controls, rng, exact1).value == loss::ra_loss(*g, both, controls, rng, exact1).value,
           "GDR with A != a is the pseudo-outcome term");

    const loss::LossBatch mixed = rows_of({1, 0, 1, 0}, {0, 1, 1, 0});
    const loss::BatchLossValue terms = loss::build_loss_terms(loss::LossKind::GDR, both, mixed, rng);
    bool weights_ok = true;
    for (int i = 0; i < mixed.rows(); ++i)
        for (int a = 0; a < 2; ++a) weights_ok = weights_ok && terms.weight(i, a) + terms.complement(i, a) == 1.0;
    expect(weights_ok, "w + (1 - w) = 1");

    std::string detail = failed.empty() ? "EMA examples, clipping table and loss-reduction identities all exact" : "failed:";
    for (const std::string& f : failed) detail += " [" + f + "]";
    return {failed.empty(), detail};
}

// ---------------------------------------------------------------- 8

Outcome gradient_checks(const Context&) {
    Rng rng(808);
    std::ostringstream detail;
    bool ok = true;
    for (Family f : {Family::CNF, Family::CGAN, Family::CVAE, Family::CDM}) {
        double worst = 0.0;
        for (int instance = 0; instance < 20; ++instance) {
            gen::NeuralModelConfig cfg;
            cfg.family = f;
            cfg.cond_dim = 1 + rng.uniform_int(0, 2);
            cfg.outcome_dim = 1 + rng.uniform_int(0, 1);
            cfg.hidden_width = 3 + rng.uniform_int(0, 3);
            cfg.hidden_layers = 1;
            cfg.linear = instance % 4 == 3;
            cfg.output_scale = 0.5;
            cfg.cnf.n_knots = 3 + rng.uniform_int(0, 3);
            cfg.cnf.ar_hidden = 3;
            cfg.cgan.hidden = 3;
            cfg.cvae.latent_dim = 1 + rng.uniform_int(0, 1);
            cfg.cvae.hidden = 3;
            cfg.cdm.steps = 5 + rng.uniform_int(0, 10);
            cfg.cdm.hidden = 3;
            cfg.cdm.time_dim = 4;
            gen::NeuralGenerativeModel model(cfg, rng);
            const int n = 3 + rng.uniform_int(0, 4);
            gen::TermBatch batch;
            batch.resize(n, cfg.cond_dim, cfg.outcome_dim);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < cfg.cond_dim; ++j) batch.cond(i, j) = rng.normal();
                for (int j = 0; j < cfg.outcome_dim; ++j) batch.y(i, j) = rng.normal();
                batch.arm(i) = rng.uniform_int(0, 1);
                batch.weight(i) = 0.5 + rng.uniform();
            }
            gen::ObjectiveOptions opt;
            const std::uint64_t noise_seed = rng.engine()();
            Rng r0(noise_seed);
            const Vector grad = model.objective(batch, n, r0, opt).grad;
            opt.need_grad = false;
            const Vector p0 = model.parameters();
            Vector fd(p0.size());
            const double h = 1e-6;
            for (Eigen::Index k = 0; k < p0.size(); ++k) {
                Vector p = p0;
                p(k) += h;
                model.set_parameters(p);
                Rng ru(noise_seed);
                const double up = model.objective(batch, n, ru, opt).value;
                p(k) -= 2 * h;
                model.set_parameters(p);
                Rng rd(noise_seed);
                const double dn = model.objective(batch, n, rd, opt).value;
                fd(k) = (up - dn) / (2 * h);
            }
            model.set_parameters(p0);
            worst = std::max(worst, (grad - fd).norm() / std::max(fd.norm(), 1e-8));
        }
        ok = ok && worst <= 1e-3;
        detail << to_string(f) << " " << fmt(worst, 2) << " ";
    }
    detail << "(worst relative error over 20 instances each, need <= 1e-3)";
    return {ok, detail.str()};
}

struct Criterion {
    int id;
    const char* title;
    std::function<Outcome(const Context&)> run;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::vector<int> selected;
    Context ctx;
    std::string work_dir = "acceptance_out";
    ctx.jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    app.add_option("--criterion", selected, "Criteria to run (default: all)")->check(CLI::Range(1, 8));
    app.add_option("--work-dir", work_dir, "Scratch directory for benchmark outputs");
    app.add_option("--jobs", ctx.jobs, "Worker threads for benchmark criteria")->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);
    ctx.work_dir = work_dir;

    const std::vector<Criterion> criteria{
        {1, "theory suite", theory_suite},
        {2, "remainder scaling", remainder_scaling},
        {3, "moons W2 trend over training size", moons_trend},
        {4, "restricted target class on confounded moons", restricted_target},
        {5, "IPTW equivalence of GDR gradients", iptw_equivalence},
        {6, "metric oracle", metric_oracle},
        {7, "unit identities", unit_identities},
        {8, "gradient checks", gradient_checks},
    };
    if (selected.empty())
        for (const Criterion& c : criteria) selected.push_back(c.id);

    bool all = true;
    for (int id : selected) {
        const Criterion& c = criteria[static_cast<std::size_t>(id - 1)];
        Outcome o;
        try {
            o = c.run(ctx);
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        all = all && o.passed;
        std::cout << (o.passed ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.title << "): " << o.detail
                  << std::endl;
    }
    return all ? 0 : 1;
}
