#include <cmath>
#include <numeric>

#include "cdpo/core/error.hpp"
#include "cdpo/data/moons.hpp"
#include "cdpo/data/toy_dgp.hpp"
#include "cdpo/genmodels/model_optimizer.hpp"
#include "cdpo/nuisance/nuisance.hpp"
#include "cdpo/nuisance/pseudo_outcome.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cdpo;
using namespace cdpo::nuis;
using cdpo::testing::small_config;

namespace {

data::PODataset small_moons(int n, std::uint64_t seed) {
    data::MoonsConfig mc;
    mc.n_train = n;
    mc.n_test = 10;
    mc.seed = seed;
    return data::generate_moons_dataset(mc).train;
}

// Central-difference gradient of a scalar function of a vector.
template <class F>
Vector numeric_gradient(F f, Vector p, double h = 1e-6) {
    Vector g(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double keep = p(i);
        p(i) = keep + h;
        const double up = f(p);
        p(i) = keep - h;
        const double dn = f(p);
        p(i) = keep;
        g(i) = (up - dn) / (2 * h);
    }
    return g;
}

}  // namespace

TEST_CASE("propensity clipping examples") {
    NuisanceEstimates est;
    est.propensity_model = std::make_shared<ConstantPropensity>(0.05);
    const Vector x = Vector::Zero(2);
    CHECK(est.raw_propensity(x, 1) == doctest::Approx(0.05));
    CHECK(est.predict_propensity(x, 1) == 0.1);
    est.propensity_model = std::make_shared<ConstantPropensity>(0.5);
    CHECK(est.predict_propensity(x, 1) == 0.5);
    CHECK(est.predict_propensity(x, 0) == 0.5);
    est.propensity_model = std::make_shared<ConstantPropensity>(0.97);
    CHECK(est.raw_propensity(x, 0) == doctest::Approx(0.03).epsilon(1e-12));
    CHECK(est.predict_propensity(x, 0) == 0.1);
    CHECK(est.predict_propensity(x, 1) == 0.97);
}

TEST_CASE("clipping is idempotent and keeps values above the floor") {
    Rng rng(3);
    for (int k = 0; k < 1000; ++k) {
        const double p = rng.uniform();
        const double floor = 0.3 * rng.uniform() + 1e-3;
        const double c = clip_propensity(p, floor);
        CHECK(clip_propensity(c, floor) == c);
        CHECK(c >= floor);
        if (p >= floor) CHECK(c == p);
    }
}

TEST_CASE("arm propensities are complements before clipping") {
    Rng rng(4);
    NuisanceEstimates est;
    est.propensity_model = std::make_shared<NeuralPropensity>(2, 5, 1, rng);
    Matrix x(200, 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = 2 * rng.normal();
    const Vector p1 = est.raw_propensity(x, IntVector::Ones(200));
    const Vector p0 = est.raw_propensity(x, IntVector::Zero(200));
    for (int i = 0; i < 200; ++i) {
        CHECK(p0(i) == 1.0 - p1(i));
        CHECK(p0(i) + p1(i) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(est.predict_propensity(Vector(x.row(i).transpose()), 0) >= est.clip_floor);
    }
}

TEST_CASE("binary cross-entropy examples and numerical guard") {
    const std::vector<double> half{0.5, 0.5, 0.5};
    const std::vector<int> labels{1, 0, 1};
    CHECK(bce_loss(half, labels) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

    const std::vector<double> hard{1 - 1e-6, 1e-6, 1 - 1e-6};
    CHECK(bce_loss(hard, labels) == doctest::Approx(0.0).epsilon(1e-5).scale(1.0));
    CHECK(bce_loss(hard, labels) < 2e-6);

    const std::vector<double> p{0.9, 0.1};
    const std::vector<int> y{1, 0};
    CHECK(bce_loss(p, y) == doctest::Approx(0.10536).epsilon(1e-4));
    CHECK(bce_loss(p, y) == doctest::Approx(-std::log(0.9)).epsilon(1e-15));

    const std::vector<double> zero{0.0};
    const std::vector<int> one{1};
    CHECK_THROWS_AS(bce_loss(zero, one), NumericalError);
    const std::vector<double> unit{1.0};
    const std::vector<int> nil{0};
    CHECK_THROWS_AS(bce_loss(unit, nil), NumericalError);
    CHECK(bce_loss(unit, one) == 0.0);
}

TEST_CASE("neural propensity gradient matches finite differences") {
    Rng rng(11);
    Matrix x(7, 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    IntVector a(7);
    a << 1, 0, 0, 1, 1, 0, 1;
    auto bce = [&](const NeuralPropensity& p) {
        const Vector q = p.prob_treated(x);
        std::vector<double> qs(q.data(), q.data() + q.size());
        std::vector<int> ls(a.data(), a.data() + a.size());
        return bce_loss(qs, ls);
    };

    SUBCASE("standalone feature network") {
        NeuralPropensity prop(2, 4, 2, rng);
        const auto g = prop.bce_gradient(x, a);
        CHECK(g.loss == doctest::Approx(bce(prop)).epsilon(1e-12));
        const Vector fd = numeric_gradient(
            [&](const Vector& p) {
                NeuralPropensity c = prop;
                c.set_parameters(p);
                return bce(c);
            },
            prop.parameters());
        CHECK(cdpo::testing::relative_error(g.own, fd) < 1e-6);
    }
    SUBCASE("trunk shared with the outcome model") {
        auto model = std::make_shared<gen::NeuralGenerativeModel>(small_config(Family::CNF, 2, 1), rng);
        NeuralPropensity prop(model, rng);
        const auto g = prop.bce_gradient(x, a);
        const Vector fd_trunk = numeric_gradient(
            [&](const Vector& p) {
                auto m = std::make_shared<gen::NeuralGenerativeModel>(*model);
                m->set_parameters(p);
                NeuralPropensity c(m, rng);
                c.set_parameters(prop.parameters());
                return bce(c);
            },
            model->parameters());
        CHECK(cdpo::testing::relative_error(g.trunk, fd_trunk) < 1e-6);
        // Only the first conditioner trunk is touched.
        const int trunk_end = model->conditioner_offset(0) + model->conditioner(0).fc1_params();
        CHECK(g.trunk.tail(g.trunk.size() - trunk_end).norm() == 0.0);
    }
}

TEST_CASE("stage-1 fitting rejects a single-arm dataset") {
    data::PODataset ds = small_moons(50, 1);
    ds.a.setOnes();
    ds.y0.reset();
    ds.y1.reset();
    NuisanceConfig cfg;
    cfg.epochs = 1;
    CHECK_THROWS_AS(fit_nuisance(ds, cfg), InvalidArgument);
    Rng rng(1);
    const data::PODataset toy = data::sample_toy_dataset(data::random_toy_dgp(3, 3, rng), 100, rng);
    data::PODataset one_arm = toy;
    one_arm.a.setZero();
    CHECK_THROWS_AS(fit_tabular_nuisance(one_arm, 3, 3), InvalidArgument);
}

TEST_CASE("tabular propensity equals empirical frequencies and both nuisances converge") {
    Rng rng(21);
    const int nx = 4, ny = 3;
    double tv_small = 0.0, tv_large = 0.0, pi_small = 0.0, pi_large = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
        const data::DiscreteToyDGP dgp = data::random_toy_dgp(nx, ny, rng);
        const data::EnumeratedToy truth = data::enumerate_toy_dgp(dgp);
        for (int n : {1000, 10000}) {
            const data::PODataset ds = data::sample_toy_dataset(dgp, n, rng);
            const NuisanceEstimates est = fit_tabular_nuisance(ds, nx, ny);
            std::vector<double> treated(nx, 0.0), total(nx, 0.0);
            for (int i = 0; i < n; ++i) {
                const int x = static_cast<int>(ds.x(i, 0));
                total[x] += 1;
                treated[x] += ds.a(i);
            }
            double tv = 0.0, pe = 0.0;
            const auto& tab = dynamic_cast<const gen::TabularModel&>(*est.outcome_model);
            for (int x = 0; x < nx; ++x) {
                const double p1 = est.raw_propensity(Vector::Constant(1, x), 1);
                CHECK(p1 == treated[x] / total[x]);
                pe += std::abs(p1 - truth.tables.propensity(x, 1));
                for (int a = 0; a < 2; ++a) {
                    double cell = 0.0;
                    for (int y = 0; y < ny; ++y) cell += std::abs(tab.probability(x, a, y) - truth.tables.outcome(x, a, y));
                    tv += 0.5 * cell;
                }
            }
            (n == 1000 ? tv_small : tv_large) += tv;
            (n == 1000 ? pi_small : pi_large) += pe;
        }
    }
    CHECK(tv_large < tv_small);
    CHECK(pi_large < pi_small);
    CHECK(tv_large < 0.6 * tv_small);
}

TEST_CASE("estimates are frozen after fitting") {
    const data::PODataset ds = small_moons(64, 2);
    NuisanceConfig cfg;
    cfg.model = small_config(Family::CNF, 2, 2);
    cfg.epochs = 1;
    const NuisanceEstimates est = fit_nuisance(ds, cfg);
    REQUIRE(est.has_outcome());
    REQUIRE(est.has_propensity());
    CHECK(est.outcome_model->frozen());
    auto copy = std::const_pointer_cast<gen::GenerativeModel>(est.outcome_model);
    CHECK_THROWS_AS(copy->set_parameters(copy->parameters()), ContractViolation);
    CHECK(dynamic_cast<const NeuralPropensity&>(*est.propensity_model).shares_trunk());
}

TEST_CASE("stage-1 fitting runs for every family") {
    const data::PODataset ds = small_moons(96, 3);
    for (Family f : {Family::CNF, Family::CGAN, Family::CVAE, Family::CDM}) {
        CAPTURE(to_string(f));
        NuisanceConfig cfg;
        cfg.model = small_config(f, 2, 2);
        cfg.epochs = 2;
        cfg.batch_size = 32;
        int calls = 0;
        const NuisanceEstimates est = fit_nuisance(ds, cfg, [&](int epoch, const gen::GenerativeModel* m, double v) {
            CHECK(epoch == ++calls);
            CHECK(m != nullptr);
            CHECK(std::isfinite(v));
        });
        CHECK(calls == 2);
        Rng rng(1);
        const Matrix draws = est.sample_pseudo_outcome(Vector(ds.x.row(0).transpose()), 1, 5, rng);
        CHECK(draws.rows() == 5);
        CHECK(draws.allFinite());
        const Vector p = est.predict_propensity(ds.x, ds.a);
        CHECK((p.array() >= 0.1).all());
        CHECK((p.array() <= 1.0).all());
    }
}

TEST_CASE("propensity-only fitting uses a standalone network and learns the direction of confounding") {
    data::MoonsConfig mc;
    mc.n_train = 2000;
    mc.n_test = 10;
    const data::PODataset ds = data::generate_moons_dataset(mc).train;
    NuisanceConfig cfg;
    cfg.fit_outcome = false;
    cfg.epochs = 20;
    cfg.optimizer.lr = 0.05;
    double first = 0.0, last = 0.0;
    const NuisanceEstimates est = fit_nuisance(ds, cfg, [&](int e, const gen::GenerativeModel* m, double v) {
        CHECK(m == nullptr);
        if (e == 1) first = v;
        last = v;
    });
    CHECK_FALSE(est.has_outcome());
    CHECK(last < first);
    const Vector truth = [&] {
        Vector t(ds.size());
        for (int i = 0; i < ds.size(); ++i) t(i) = data::moons_propensity(mc, ds.x.row(i).transpose());
        return t;
    }();
    const Vector fit = est.propensity_model->prob_treated(ds.x);
    CHECK((fit - truth).cwiseAbs().mean() < 0.1);
}

TEST_CASE("CNF outcome model concentrates on a constant outcome") {
    Rng rng(5);
    data::PODataset ds;
    const int n = 256;
    ds.x.resize(n, 1);
    ds.a.resize(n);
    ds.y = Matrix::Constant(n, 1, 1.5);
    for (int i = 0; i < n; ++i) {
        ds.x(i, 0) = rng.normal();
        ds.a(i) = i % 2;
    }
    NuisanceConfig cfg;
    cfg.model = small_config(Family::CNF, 1, 1);
    cfg.epochs = 12;
    cfg.optimizer.lr = 0.001;
    Matrix held_x(20, 1);
    for (int i = 0; i < 20; ++i) held_x(i, 0) = rng.normal();
    IntVector held_a(20);
    for (int i = 0; i < 20; ++i) held_a(i) = i % 2;
    const Matrix held_y = Matrix::Constant(20, 1, 1.5);
    std::vector<double> curve;
    fit_nuisance(ds, cfg, [&](int e, const gen::GenerativeModel* m, double) {
        if (e % 4 == 0) curve.push_back(m->log_density(held_x, held_a, held_y).mean());
    });
    REQUIRE(curve.size() == 3);
    CHECK(curve[1] > curve[0]);
    CHECK(curve[2] > curve[1]);
}

TEST_CASE("pseudo-outcome draws") {
    Rng rng(8);
    SUBCASE("point-mass outcome model gives identical draws") {
        NuisanceEstimates est;
        est.outcome_model = std::make_shared<gen::TabularModel>(2, 1);
        const Matrix d = est.sample_pseudo_outcome(Vector::Constant(1, 1.0), 0, 50, rng);
        CHECK((d.array() == d(0, 0)).all());
    }
    SUBCASE("zero count gives an empty set") {
        NuisanceEstimates est;
        est.outcome_model = std::make_shared<gen::NeuralGenerativeModel>(small_config(Family::CVAE, 2, 2), rng);
        const Matrix d = est.sample_pseudo_outcome(Vector::Zero(2), 1, 0, rng);
        CHECK(d.rows() == 0);
        CHECK(d.cols() == 2);
    }
    SUBCASE("CNF draws pass a chi-square test against the model density") {
        gen::NeuralModelConfig mc = small_config(Family::CNF, 1, 1);
        mc.output_scale = 1.0;
        auto model = std::make_shared<gen::NeuralGenerativeModel>(mc, rng);
        NuisanceEstimates est;
        est.outcome_model = model;
        const Vector x = Vector::Constant(1, 0.3);
        const int n = 20000;
        const Matrix draws = est.sample_pseudo_outcome(x, 1, n, rng);
        std::vector<double> sorted(draws.data(), draws.data() + n);
        std::sort(sorted.begin(), sorted.end());
        const int bins = 20;
        std::vector<double> edges;
        for (int b = 1; b < bins; ++b) edges.push_back(sorted[static_cast<std::size_t>(b * n / bins)]);
        auto bin_of = [&](double v) {
            return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
        };
        // Expected bin masses: Gauss-Legendre on the union of bin edges, spline
        // breakpoints and wide tails, so every piece is smooth.
        std::vector<double> cuts = model->density_breakpoints(x, 1);
        const double first = cuts.front(), last = cuts.back(), span = last - first;
        for (int k = 1; k <= 8; ++k) {
            cuts.push_back(first - 2.0 * span * k / 8);
            cuts.push_back(last + 2.0 * span * k / 8);
        }
        cuts.insert(cuts.end(), edges.begin(), edges.end());
        std::sort(cuts.begin(), cuts.end());
        std::vector<double> gz, gw;
        gauss_legendre(16, gz, gw);
        std::vector<double> expected(bins, 0.0), observed(bins, 0.0);
        for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
            const double a = cuts[c], b = cuts[c + 1];
            if (!(b > a)) continue;
            Matrix ys(16, 1);
            for (int k = 0; k < 16; ++k) ys(k, 0) = 0.5 * (a + b) + 0.5 * (b - a) * gz[k];
            const Vector lp = model->log_density(Matrix::Constant(16, 1, x(0)), IntVector::Ones(16), ys);
            double mass = 0.0;
            for (int k = 0; k < 16; ++k) mass += 0.5 * (b - a) * gw[k] * std::exp(lp(k));
            expected[bin_of(0.5 * (a + b))] += mass * n;
        }
        // Edges come from one sample, counts from a fresh one.
        const Matrix fresh = est.sample_pseudo_outcome(x, 1, n, rng);
        for (int i = 0; i < n; ++i) observed[bin_of(fresh(i, 0))] += 1;
        double chi2 = 0.0;
        for (int b = 0; b < bins; ++b) chi2 += (observed[b] - expected[b]) * (observed[b] - expected[b]) / expected[b];
        CHECK(chi2 < 36.19);  // 0.99 quantile with 19 degrees of freedom
    }
}

TEST_CASE("Gauss-Legendre rule integrates polynomials exactly") {
    for (int n : {1, 2, 5, 16}) {
        std::vector<double> z, w;
        gauss_legendre(n, z, w);
        for (int deg = 0; deg <= 2 * n - 1; ++deg) {
            double s = 0.0;
            for (int k = 0; k < n; ++k) s += w[k] * std::pow(z[k], deg);
            const double exact = deg % 2 ? 0.0 : 2.0 / (deg + 1);
            CHECK(s == doctest::Approx(exact).epsilon(1e-13).scale(1.0));
        }
    }
}

TEST_CASE("pseudo-outcome rules produce normalised weights per source row") {
    Rng rng(9);
    Matrix x(3, 1);
    x << 0.0, 1.0, 2.0;
    IntVector arm(3);
    arm << 0, 1, 1;
    auto check_normalised = [&](const PseudoOutcomeSet& s) {
        Vector mass = Vector::Zero(3);
        for (int k = 0; k < s.size(); ++k) mass(s.source[k]) += s.weight(k);
        for (int i = 0; i < 3; ++i) CHECK(mass(i) == doctest::Approx(1.0).epsilon(1e-12));
    };
    SUBCASE("Monte Carlo") {
        NuisanceEstimates est;
        est.outcome_model = std::make_shared<gen::NeuralGenerativeModel>(small_config(Family::CDM, 1, 1), rng);
        const PseudoOutcomeSet s = MonteCarloRule(4).expand(est, x, arm, rng);
        CHECK(s.size() == 12);
        check_normalised(s);
    }
    SUBCASE("exact tabular") {
        NuisanceEstimates est;
        const data::DiscreteToyDGP dgp = data::random_toy_dgp(3, 4, rng);
        const data::EnumeratedToy toy = data::enumerate_toy_dgp(dgp);
        est.outcome_model = std::make_shared<gen::TabularModel>(gen::TabularModel::from_probabilities(3, 4, toy.tables.xi));
        const PseudoOutcomeSet s = ExactTabularRule().expand(est, x, arm, rng);
        CHECK(s.size() == 12);
        check_normalised(s);
        for (int k = 0; k < s.size(); ++k)
            CHECK(s.weight(k) == doctest::Approx(toy.tables.outcome(static_cast<int>(x(s.source[k], 0)), arm(s.source[k]),
                                                                    static_cast<int>(s.y(k, 0)))));
    }
    SUBCASE("quadrature mean agrees with sampling") {
        NuisanceEstimates est;
        est.outcome_model = std::make_shared<gen::NeuralGenerativeModel>(small_config(Family::CNF, 1, 1), rng);
        const PseudoOutcomeSet s = QuadratureRule().expand(est, x, arm, rng);
        check_normalised(s);
        for (int i = 0; i < 3; ++i) {
            double qmean = 0.0;
            for (int k = 0; k < s.size(); ++k)
                if (s.source[k] == i) qmean += s.weight(k) * s.y(k, 0);
            const Matrix d = est.sample_pseudo_outcome(Vector(x.row(i).transpose()), arm(i), 20000, rng);
            const double mean = d.mean();
            const double sd = std::sqrt((d.array() - mean).square().mean());
            CHECK(std::abs(qmean - mean) < 4 * sd / std::sqrt(20000.0));
        }
    }
}

TEST_CASE("nuisance checkpoint round trip keeps predictions") {
    const data::PODataset ds = small_moons(64, 4);
    NuisanceConfig cfg;
    cfg.model = small_config(Family::CNF, 2, 2);
    cfg.epochs = 1;
    const NuisanceEstimates est = fit_nuisance(ds, cfg);
    const NuisanceEstimates back = nuisance_from_json(nlohmann::json::parse(nuisance_to_json(est).dump()));
    CHECK(back.clip_floor == est.clip_floor);
    CHECK(back.outcome_model->parameter_hash() == est.outcome_model->parameter_hash());
    CHECK(back.outcome_model->frozen());
    const Vector p0 = est.predict_propensity(ds.x, ds.a), p1 = back.predict_propensity(ds.x, ds.a);
    CHECK((p0 - p1).cwiseAbs().maxCoeff() == 0.0);
    const Vector l0 = est.outcome_model->log_density(ds.x, ds.a, ds.y);
    const Vector l1 = back.outcome_model->log_density(ds.x, ds.a, ds.y);
    CHECK((l0 - l1).cwiseAbs().maxCoeff() == 0.0);

    NuisanceConfig only_prop = cfg;
    only_prop.fit_outcome = false;
    const NuisanceEstimates pe = fit_nuisance(ds, only_prop);
    const NuisanceEstimates pb = nuisance_from_json(nuisance_to_json(pe));
    CHECK_FALSE(pb.has_outcome());
    CHECK((pe.predict_propensity(ds.x, ds.a) - pb.predict_propensity(ds.x, ds.a)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adversarial update alternates discriminator ascent and generator descent") {
    Rng rng(12);
    auto model = std::make_unique<gen::NeuralGenerativeModel>(small_config(Family::CGAN, 1, 1), rng);
    gen::ModelOptimizer opt(*model, OptimizerConfig{OptimizerKind::SGD, 0.01, 0.0});
    gen::TermBatch tb;
    tb.resize(8, 1, 1);
    for (int i = 0; i < 8; ++i) {
        tb.cond(i, 0) = rng.normal();
        tb.arm(i) = i % 2;
        tb.y(i, 0) = rng.normal();
        tb.weight(i) = 1.0;
    }
    int evaluations = 0;
    std::vector<Vector> seen;
    const Vector before = model->parameters();
    opt.update(*model, [&](const gen::GenerativeModel& m) {
        ++evaluations;
        seen.push_back(m.parameters());
        Rng fixed(1);
        return m.objective(tb, 8.0, fixed, {});
    });
    CHECK(evaluations == 2);
    const auto blocks = model->blocks();
    const Vector after = model->parameters();
    for (const auto& b : blocks) {
        const bool moved_first = (seen[1] - before).segment(b.offset, b.size).norm() > 0;
        CHECK(moved_first == (b.direction == gen::Direction::Maximize));
        CHECK((after - before).segment(b.offset, b.size).norm() > 0);
    }
}
