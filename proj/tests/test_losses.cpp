#include <cmath>

#include "cdpo/core/error.hpp"
#include "cdpo/data/moons.hpp"
#include "cdpo/data/toy_dgp.hpp"
#include "cdpo/losses/losses.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cdpo;
using namespace cdpo::loss;
using cdpo::testing::small_config;

namespace {

// Single-row tabular model on {0, 1} whose log-probability of y = 0 is `log_p`.
std::shared_ptr<gen::TabularModel> two_point_model(int nx, double log_p) {
    std::vector<double> t;
    for (int k = 0; k < nx * 2; ++k) {
        t.push_back(std::exp(log_p));
        t.push_back(1.0 - std::exp(log_p));
    }
    return std::make_shared<gen::TabularModel>(gen::TabularModel::from_probabilities(nx, 2, t));
}

LossBatch one_row(double x, int a, double y) {
    LossBatch b;
    b.x = Matrix::Constant(1, 1, x);
    b.v = b.x;
    b.a = IntVector::Constant(1, a);
    b.y = Matrix::Constant(1, 1, y);
    return b;
}

// Toy with covariate columns (x, x / 2): nuisances read column 0, targets
// condition on the coarse column 1.
struct CoarseToy {
    data::DiscreteToyDGP dgp;
    data::EnumeratedToy toy;
    nuis::NuisanceEstimates truth;
    int nv;
};

CoarseToy make_coarse_toy(Rng& rng, int nx, int ny) {
    CoarseToy c{data::random_toy_dgp(nx, ny, rng), {}, {}, (nx + 1) / 2};
    c.toy = data::enumerate_toy_dgp(c.dgp);
    c.truth.outcome_model =
        std::make_shared<gen::TabularModel>(gen::TabularModel::from_probabilities(nx, ny, c.toy.tables.xi));
    std::vector<double> pi1(static_cast<std::size_t>(nx));
    for (int x = 0; x < nx; ++x) pi1[static_cast<std::size_t>(x)] = c.toy.tables.propensity(x, 1);
    c.truth.propensity_model = std::make_shared<nuis::TablePropensity>(pi1);
    c.truth.clip_floor = 1e-3;
    return c;
}

LossBatch coarse_row(int x, int a, int y) {
    LossBatch b;
    b.x.resize(1, 2);
    b.x << x, x / 2;
    b.v = Matrix::Constant(1, 1, x / 2);
    b.a = IntVector::Constant(1, a);
    b.y = Matrix::Constant(1, 1, y);
    return b;
}

// Exact expectation over the observational law of a single-row loss.
double expected_loss(LossKind kind, const gen::GenerativeModel& g, const CoarseToy& c, int arm) {
    const nuis::ExactTabularRule exact;
    LossOptions opt;
    opt.arm = arm;
    opt.rule = &exact;
    Rng rng(0);
    double total = 0.0;
    for (const auto& t : c.toy.triples) total += t.prob * evaluate_loss(kind, g, c.truth, coarse_row(t.x, t.a, t.y), rng, opt).value;
    return total;
}

// Target risk sum_x p(x) sum_y xi_a(y | x) log g(y | v(x)).
double target_risk(const gen::TabularModel& g, const CoarseToy& c, int arm) {
    double r = 0.0;
    for (int x = 0; x < c.dgp.nx; ++x)
        for (int y = 0; y < c.dgp.ny; ++y)
            r += c.toy.tables.px[static_cast<std::size_t>(x)] * c.toy.tables.outcome(x, arm, y) *
                 std::log(g.probability(x / 2, arm, y));
    return r;
}

gen::TabularModel random_tabular(int nx, int ny, Rng& rng) {
    gen::TabularModel g(nx, ny);
    Vector p(g.num_params());
    for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = rng.normal();
    g.set_parameters(p);
    return g;
}

}  // namespace

TEST_CASE("learner names round trip") {
    for (LossKind k : {LossKind::PlugIn, LossKind::RA, LossKind::IPTW, LossKind::GDR})
        CHECK(loss_from_string(to_string(k)) == k);
    CHECK_THROWS_AS(loss_from_string("dr"), InvalidArgument);
    CHECK(needs_outcome_nuisance(LossKind::GDR));
    CHECK(needs_outcome_nuisance(LossKind::RA));
    CHECK_FALSE(needs_outcome_nuisance(LossKind::IPTW));
    CHECK(needs_propensity_nuisance(LossKind::IPTW));
    CHECK_FALSE(needs_propensity_nuisance(LossKind::PlugIn));
}

TEST_CASE("missing nuisances are rejected") {
    Rng rng(1);
    auto g = two_point_model(1, -1.0);
    nuis::NuisanceEstimates none;
    CHECK_THROWS_AS(gdr_loss(*g, none, one_row(0, 1, 0), rng), ContractViolation);
    CHECK_THROWS_AS(ra_loss(*g, none, one_row(0, 1, 0), rng), ContractViolation);
    CHECK_THROWS_AS(iptw_loss(*g, none, one_row(0, 1, 0), rng), ContractViolation);
    CHECK_NOTHROW(plugin_loss(*g, one_row(0, 1, 0), rng));
}

TEST_CASE("plug-in loss examples") {
    Rng rng(2);
    auto g = two_point_model(1, -1.3);
    LossOptions arm1;
    arm1.arm = 1;
    CHECK(plugin_loss(*g, one_row(0, 0, 0), rng, arm1).value == 0.0);
    CHECK(plugin_loss(*g, one_row(0, 1, 0), rng, arm1).value == doctest::Approx(-1.3).epsilon(1e-14));
    // Both arms: every row contributes through its own arm.
    CHECK(plugin_loss(*g, one_row(0, 0, 0), rng).value == doctest::Approx(-1.3).epsilon(1e-14));
}

TEST_CASE("plug-in loss expectation by enumeration") {
    Rng rng(3);
    for (int rep = 0; rep < 5; ++rep) {
        const data::DiscreteToyDGP dgp = data::random_toy_dgp(3, 4, rng);
        const gen::TabularModel g = random_tabular(3, 4, rng);
        for (int a = 0; a < 2; ++a) {
            LossOptions opt;
            opt.arm = a;
            double expect = 0.0, oracle = 0.0;
            for (int x = 0; x < 3; ++x)
                for (int aa = 0; aa < 2; ++aa)
                    for (int y = 0; y < 4; ++y) {
                        expect += dgp.p(x, aa, y) * plugin_loss(g, one_row(x, aa, y), rng, opt).value;
                        if (aa == a) oracle += dgp.p(x, a, y) * std::log(g.probability(x, a, y));
                    }
            CHECK(expect == doctest::Approx(oracle).epsilon(1e-13));
        }
    }
}

TEST_CASE("IPTW loss examples") {
    Rng rng(4);
    auto g = two_point_model(1, -1.0);
    nuis::NuisanceEstimates est;
    est.propensity_model = std::make_shared<nuis::ConstantPropensity>(0.5);
    LossOptions arm1;
    arm1.arm = 1;
    CHECK(iptw_loss(*g, est, one_row(0, 1, 0), rng, arm1).value == doctest::Approx(-2.0).epsilon(1e-14));

    est.propensity_model = std::make_shared<nuis::ConstantPropensity>(1.0);
    LossBatch b;
    b.x = Matrix::Zero(4, 1);
    b.v = b.x;
    b.a = IntVector::Ones(4);
    b.y.resize(4, 1);
    b.y << 0, 1, 1, 0;
    CHECK(iptw_loss(*g, est, b, rng, arm1).value == plugin_loss(*g, b, rng, arm1).value);
}

TEST_CASE("RA loss examples") {
    Rng rng(5);
    auto g = two_point_model(1, -0.7);
    nuis::NuisanceEstimates est;
    // Point-mass nuisance at y = 0.
    est.outcome_model = std::make_shared<gen::TabularModel>(gen::TabularModel::from_probabilities(1, 2, {1 - 1e-300, 1e-300, 1 - 1e-300, 1e-300}));
    LossOptions arm1;
    arm1.arm = 1;
    arm1.n_mc = 3;
    const BatchLossValue counterfactual = ra_loss(*g, est, one_row(0, 0, 1), rng, arm1);
    CHECK(counterfactual.value == doctest::Approx(-0.7).epsilon(1e-14));
    CHECK(counterfactual.pseudo[1].size() == 3);

    LossBatch b;
    b.x = Matrix::Zero(3, 1);
    b.v = b.x;
    b.a = IntVector::Ones(3);
    b.y.resize(3, 1);
    b.y << 0, 1, 0;
    const BatchLossValue factual = ra_loss(*g, est, b, rng, arm1);
    CHECK(factual.value == plugin_loss(*g, b, rng, arm1).value);
    CHECK(factual.pseudo[1].size() == 0);
}

TEST_CASE("GDR loss degenerate reductions") {
    Rng rng(6);
    const gen::TabularModel g = random_tabular(2, 3, rng);
    nuis::NuisanceEstimates est;
    est.outcome_model = std::make_shared<gen::TabularModel>(random_tabular(2, 3, rng));
    est.propensity_model = std::make_shared<nuis::ConstantPropensity>(1.0);
    const nuis::ExactTabularRule exact;
    LossOptions opt;
    opt.arm = 1;
    opt.rule = &exact;
    LossBatch b;
    b.x.resize(4, 1);
    b.x << 0, 1, 1, 0;
    b.v = b.x;
    b.a = IntVector::Ones(4);
    b.y.resize(4, 1);
    b.y << 0, 2, 1, 1;
    CHECK(gdr_loss(g, est, b, rng, opt).value == plugin_loss(g, b, rng, opt).value);

    b.a.setZero();
    est.propensity_model = std::make_shared<nuis::ConstantPropensity>(0.3);
    CHECK(gdr_loss(g, est, b, rng, opt).value == ra_loss(g, est, b, rng, opt).value);
}

TEST_CASE("risk functionals are unbiased at the truth with coarsened conditioning") {
    Rng rng(7);
    for (int rep = 0; rep < 6; ++rep) {
        const CoarseToy c = make_coarse_toy(rng, 4 + rep % 2, 3);
        const gen::TabularModel g = random_tabular(c.nv, 3, rng);
        for (int a = 0; a < 2; ++a) {
            const double risk = target_risk(g, c, a);
            CHECK(expected_loss(LossKind::RA, g, c, a) == doctest::Approx(risk).epsilon(1e-12));
            CHECK(expected_loss(LossKind::IPTW, g, c, a) == doctest::Approx(risk).epsilon(1e-12));
            CHECK(expected_loss(LossKind::GDR, g, c, a) == doctest::Approx(risk).epsilon(1e-12));
        }
    }
}

TEST_CASE("weights: w + (1 - w) = 1 and w lies in {0} or [1, 1 / floor]") {
    Rng rng(8);
    data::MoonsConfig mc;
    mc.n_train = 300;
    mc.n_test = 10;
    const data::PODataset ds = data::generate_moons_dataset(mc).train;
    nuis::NuisanceEstimates est;
    est.outcome_model = std::make_shared<gen::NeuralGenerativeModel>(small_config(Family::CVAE, 2, 2), rng);
    for (int trial = 0; trial < 20; ++trial) {
        est.propensity_model = std::make_shared<nuis::NeuralPropensity>(2, 6, 1, rng);
        est.clip_floor = 0.05 + 0.3 * rng.uniform();
        std::vector<int> rows;
        for (int k = 0; k < 40; ++k) rows.push_back(rng.uniform_int(0, ds.size() - 1));
        const LossBatch b = make_loss_batch(ds, rows);
        const BatchLossValue v = build_loss_terms(LossKind::GDR, est, b, rng);
        for (int i = 0; i < b.rows(); ++i) {
            for (int a = 0; a < 2; ++a) {
                const double w = v.weight(i, a);
                CHECK(w + v.complement(i, a) == 1.0);
                CHECK((w == 0.0 || (w >= 1.0 && w <= 1.0 / est.clip_floor + 1e-12)));
                CHECK((w == 0.0) == (b.a(i) != a));
            }
        }
    }
}

TEST_CASE("fault hook flips the GDR correction") {
    Rng rng(9);
    const gen::TabularModel g = random_tabular(2, 3, rng);
    nuis::NuisanceEstimates est;
    est.outcome_model = std::make_shared<gen::TabularModel>(random_tabular(2, 3, rng));
    est.propensity_model = std::make_shared<nuis::ConstantPropensity>(0.4);
    const nuis::ExactTabularRule exact;
    LossOptions opt;
    opt.rule = &exact;
    LossBatch b;
    b.x.resize(2, 1);
    b.x << 0, 1;
    b.v = b.x;
    b.a.resize(2);
    b.a << 1, 0;
    b.y.resize(2, 1);
    b.y << 2, 0;
    const double honest = gdr_loss(g, est, b, rng, opt).value;
    const double factual = iptw_loss(g, est, b, rng, opt).value;
    opt.flip_correction = true;
    const double flipped = gdr_loss(g, est, b, rng, opt).value;
    CHECK(flipped - factual == doctest::Approx(-(honest - factual)).epsilon(1e-12));
}

TEST_CASE("loss gradients match finite differences") {
    Rng rng(10);
    data::MoonsConfig mc;
    mc.n_train = 50;
    mc.n_test = 10;
    const data::PODataset ds = data::generate_moons_dataset(mc).train;
    nuis::NuisanceEstimates est;
    est.outcome_model = std::make_shared<gen::NeuralGenerativeModel>(small_config(Family::CNF, 2, 2), rng);
    est.propensity_model = std::make_shared<nuis::NeuralPropensity>(2, 4, 1, rng);
    gen::NeuralGenerativeModel target(small_config(Family::CNF, 2, 2), rng);
    const LossBatch b = make_loss_batch(ds, data::all_indices(12));
    for (LossKind k : {LossKind::PlugIn, LossKind::RA, LossKind::IPTW, LossKind::GDR}) {
        CAPTURE(to_string(k));
        LossOptions opt;
        opt.need_grad = true;
        Rng r0(77);
        const Vector grad = evaluate_loss(k, target, est, b, r0, opt).grad;
        opt.need_grad = false;
        Vector p = target.parameters();
        Vector fd(p.size());
        for (Eigen::Index i = 0; i < p.size(); ++i) {
            const double keep = p(i);
            auto at = [&](double v) {
                p(i) = v;
                gen::NeuralGenerativeModel m = target;
                m.set_parameters(p);
                Rng r(77);
                return evaluate_loss(k, m, est, b, r, opt).value;
            };
            fd(i) = (at(keep + 1e-6) - at(keep - 1e-6)) / 2e-6;
            p(i) = keep;
        }
        CHECK(cdpo::testing::relative_error(grad, fd) < 1e-5);
    }
}

TEST_CASE("IPTW equivalence at a target equal to the outcome nuisance") {
    Rng rng(11);
    data::MoonsConfig mc;
    mc.n_train = 200;
    mc.n_test = 10;
    data::PODataset ds = data::generate_moons_dataset(mc).train;
    ds.y.conservativeResize(Eigen::NoChange, 1);
    ds.y0.reset();
    ds.y1.reset();
    gen::NeuralModelConfig cfg = small_config(Family::CNF, 2, 1);
    auto nuisance = std::make_shared<gen::NeuralGenerativeModel>(cfg, rng);
    nuis::NuisanceEstimates est;
    est.outcome_model = nuisance;
    est.propensity_model = std::make_shared<nuis::NeuralPropensity>(2, 4, 1, rng);
    std::vector<int> rows;
    for (int k = 0; k < 32; ++k) rows.push_back(k);
    const LossBatch b = make_loss_batch(ds, rows);

    gen::NeuralGenerativeModel same = *nuisance;
    for (int arm = 0; arm < 2; ++arm) {
        const EquivalenceReport r = iptw_equivalence_check(same, est, b, arm, rng);
        CAPTURE(r.relative_difference);
        CHECK(r.equivalent);
        CHECK(r.relative_difference <= 1e-6);
    }

    gen::NeuralGenerativeModel other(cfg, rng);
    CHECK_FALSE(iptw_equivalence_check(other, est, b, 1, rng).equivalent);

    LossBatch controls = b;
    controls.a.setZero();
    const EquivalenceReport none = iptw_equivalence_check(same, est, controls, 1, rng);
    CHECK_FALSE(none.equivalent);
    CHECK(none.grad_iptw.norm() == 0.0);

    LossBatch coarse = b;
    coarse.v = b.x.leftCols(1);
    CHECK_THROWS_AS(iptw_equivalence_check(same, est, coarse, 1, rng), InvalidArgument);
}
