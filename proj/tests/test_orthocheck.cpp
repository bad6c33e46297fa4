#include <cmath>

#include "cdpo/core/error.hpp"
#include "cdpo/orthocheck/checks.hpp"
#include "cdpo/orthocheck/suite.hpp"
#include "doctest.h"

using namespace cdpo;
using namespace cdpo::ortho;
using loss::LossKind;

namespace {

struct Instance {
    data::DiscreteToyDGP dgp;
    data::EnumeratedToy truth;
    TabularNuisance eta;
    TargetClass cls;
};

Instance make_instance(std::uint64_t seed, bool restricted = true, int nx = 5, int ny = 3) {
    Rng rng(seed);
    Instance in;
    in.dgp = data::random_toy_dgp(nx, ny, rng);
    in.truth = data::enumerate_toy_dgp(in.dgp);
    in.eta = TabularNuisance::from_tables(in.truth.tables);
    in.cls = restricted ? TargetClass::random_coarsening(nx, 2, rng) : TargetClass::identity(nx);
    return in;
}

// Closed-form population pseudo-mass: sum over x in v of p(x) times
//   plug-in: pi xi;  IPTW: (pi / pi_hat) xi;  RA: pi xi + (1 - pi) xi_hat;
//   GDR: (pi / pi_hat) xi + (1 - pi / pi_hat) xi_hat.
std::vector<double> oracle_mass(const Instance& in, LossKind kind, const TabularNuisance& est) {
    const data::ToyTables& tb = in.truth.tables;
    std::vector<double> c(static_cast<std::size_t>(in.cls.nv * 2 * tb.ny), 0.0);
    for (int x = 0; x < tb.nx; ++x)
        for (int a = 0; a < 2; ++a) {
            const double pi = tb.propensity(x, a), ratio = pi / est.propensity(x, a);
            for (int y = 0; y < tb.ny; ++y) {
                const double xi = tb.outcome(x, a, y), xh = est.outcome(x, a, y);
                double m = 0.0;
                switch (kind) {
                    case LossKind::PlugIn: m = pi * xi; break;
                    case LossKind::IPTW: m = ratio * xi; break;
                    case LossKind::RA: m = pi * xi + (1 - pi) * xh; break;
                    case LossKind::GDR: m = ratio * xi + (1 - ratio) * xh; break;
                }
                c[static_cast<std::size_t>((in.cls.v_of_x[x] * 2 + a) * tb.ny + y)] += tb.px[x] * m;
            }
        }
    return c;
}

TabularNuisance estimate_near(const Instance& in, Rng& rng, double eps) {
    return perturbed(in.eta, random_nuisance_direction(in.eta, rng), eps);
}

}  // namespace

TEST_CASE("Newton maximiser matches the normalised pseudo-mass") {
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const int nv = 1 + trial % 3, ny = 2 + trial % 5;
        std::vector<double> c(static_cast<std::size_t>(nv * 2 * ny));
        for (double& v : c) v = 0.01 + rng.uniform() * (trial % 2 ? 1.0 : 40.0);
        const TabularDensity g = maximize_risk(c, nv, ny);
        for (int r = 0; r < nv * 2; ++r) {
            double s = 0.0;
            for (int y = 0; y < ny; ++y) s += c[r * ny + y];
            for (int y = 0; y < ny; ++y) CHECK(std::abs(g.prob[r * ny + y] - c[r * ny + y] / s) <= 1e-14);
        }
        // The maximiser beats random tables.
        const TabularDensity other = TabularDensity::random(nv, ny, rng);
        CHECK(risk_value(c, g) >= risk_value(c, other));
    }
    std::vector<double> zero_row{0, 0, 1, 3};
    const TabularDensity g = maximize_risk(zero_row, 1, 2);
    CHECK(g.prob[0] == 0.5);
    CHECK(g.prob[3] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK_THROWS_AS(maximize_risk({1.0, -0.1, 1.0, 1.0}, 1, 2), InvalidArgument);
    CHECK_THROWS_AS(maximize_risk({1.0, 1.0}, 1, 2), InvalidArgument);
}

TEST_CASE("risk pseudo-mass matches closed-form population expressions") {
    Rng rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        const Instance in = make_instance(100 + trial, trial % 2 == 0);
        const TabularNuisance est = estimate_near(in, rng, 0.3);
        for (LossKind kind : {LossKind::PlugIn, LossKind::IPTW, LossKind::RA, LossKind::GDR}) {
            const std::vector<double> got = risk_coefficients(in.truth, in.cls, kind, est);
            const std::vector<double> want = oracle_mass(in, kind, est);
            for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-14);
        }
        // Single arm leaves the other arm's rows empty.
        const std::vector<double> one = risk_coefficients(in.truth, in.cls, LossKind::GDR, est, 1);
        const std::vector<double> both = risk_coefficients(in.truth, in.cls, LossKind::GDR, est);
        for (int r = 0; r < in.cls.nv * 2; ++r)
            for (int y = 0; y < 3; ++y) {
                const std::size_t i = static_cast<std::size_t>(r * 3 + y);
                CHECK(one[i] == (r % 2 == 1 ? both[i] : 0.0));
            }
    }
}

TEST_CASE("unit propensity estimates reduce IPTW to the plug-in mass termwise") {
    const Instance in = make_instance(7);
    TabularNuisance est = in.eta;
    for (double& p : est.pi1) p = 1.0;
    CHECK(risk_coefficients(in.truth, in.cls, LossKind::IPTW, est, 1) ==
          risk_coefficients(in.truth, in.cls, LossKind::PlugIn, est, 1));
}

TEST_CASE("target risk identification: three forms agree") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const Instance in = make_instance(200 + trial, trial % 2 == 0, 4 + trial % 3, 2 + trial % 3);
        const TabularDensity g = TabularDensity::random(in.cls.nv, in.truth.tables.ny, rng);
        for (int arm : {0, 1, loss::kBothArms}) {
            const IdentificationReport r = risk_identification_check(in.dgp, in.cls, g, arm);
            CHECK(r.max_difference <= 1e-12);
            CHECK(r.definition < 0.0);
        }
    }

    // g = xi_a on an unrestricted class: the risk is minus the conditional entropy.
    const Instance in = make_instance(9, false);
    const data::ToyTables& tb = in.truth.tables;
    TabularDensity g;
    g.nv = tb.nx;
    g.ny = tb.ny;
    g.prob = tb.xi;
    double neg_entropy = 0.0;
    for (int x = 0; x < tb.nx; ++x)
        for (int y = 0; y < tb.ny; ++y) neg_entropy += tb.px[x] * tb.outcome(x, 1, y) * std::log(tb.outcome(x, 1, y));
    CHECK(std::abs(risk_identification_check(in.dgp, in.cls, g, 1).regression - neg_entropy) <= 1e-12);

    data::DiscreteToyDGP bare = in.dgp;
    bare.structural.reset();
    CHECK_THROWS_AS(risk_identification_check(bare, in.cls, g), InvalidArgument);
}

TEST_CASE("influence function is mean zero at the truth, remainder is second order") {
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const Instance in = make_instance(300 + trial, trial % 2 == 0);
        const TabularDensity g = TabularDensity::random(in.cls.nv, in.truth.tables.ny, rng);
        CHECK(eif_mean_zero_check(in.truth, in.cls, g) <= 1e-12);
        CHECK(eif_mean_zero_check(in.truth, in.cls, TabularDensity::uniform(in.cls.nv, in.truth.tables.ny)) <= 1e-12);
        // The correction has mean zero at the truth whatever its sign.
        CHECK(eif_mean_zero_check(in.truth, in.cls, g, loss::kBothArms, true) <= 1e-12);

        // Oracle: sum_x p(x) sum_a (pi / pi_hat - 1) sum_y (xi - xi_hat) log g.
        const TabularNuisance est = estimate_near(in, rng, 0.4);
        const data::ToyTables& tb = in.truth.tables;
        double want = 0.0;
        for (int x = 0; x < tb.nx; ++x)
            for (int a = 0; a < 2; ++a)
                for (int y = 0; y < tb.ny; ++y)
                    want += tb.px[x] * (tb.propensity(x, a) / est.propensity(x, a) - 1.0) *
                            (tb.outcome(x, a, y) - est.outcome(x, a, y)) * std::log(g(in.cls.v_of_x[x], a, y));
        const double got = one_step_remainder(in.truth, in.cls, g, est);
        CHECK(std::abs(got - want) <= 1e-13);
        CHECK(std::abs(got) > 1e-8);
    }
}

TEST_CASE("DR pseudo-distribution identities") {
    Rng rng(5);
    const Instance in = make_instance(11);
    const data::ToyTables& tb = in.truth.tables;
    for (int arm : {0, 1}) {
        const DRPseudoDistribution exact = dr_pseudo_distribution(tb, in.eta, arm);
        for (int x = 0; x < tb.nx; ++x)
            for (int a_obs = 0; a_obs < 2; ++a_obs)
                for (int y = 0; y < tb.ny; ++y) CHECK(exact(x, a_obs, y) == doctest::Approx(tb.outcome(x, arm, y)).epsilon(1e-14));

        const TabularNuisance est = estimate_near(in, rng, 0.5);
        const DRPseudoDistribution d = dr_pseudo_distribution(tb, est, arm);
        for (int x = 0; x < tb.nx; ++x)
            for (int a_obs = 0; a_obs < 2; ++a_obs) {
                double s = 0.0;
                for (int y = 0; y < tb.ny; ++y) s += d(x, a_obs, y);
                CHECK(s == doctest::Approx(1.0).epsilon(1e-13));
            }
        // Averaged within v it is the GDR pseudo-mass.
        const std::vector<double> mass = risk_coefficients(in.truth, in.cls, LossKind::GDR, est, arm);
        std::vector<double> rebuilt(mass.size(), 0.0);
        for (int x = 0; x < tb.nx; ++x)
            for (int y = 0; y < tb.ny; ++y)
                rebuilt[(in.cls.v_of_x[x] * 2 + arm) * tb.ny + y] += tb.px[x] * d.expected(tb, x, y);
        for (std::size_t i = 0; i < mass.size(); ++i) CHECK(std::abs(mass[i] - rebuilt[i]) <= 1e-14);
    }
    CHECK_THROWS_AS(dr_pseudo_distribution(tb, in.eta, loss::kBothArms), InvalidArgument);
}

TEST_CASE("GDR cross-derivative vanishes; RA does not") {
    Rng rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        const Instance in = make_instance(400 + trial);
        const TabularDensity g_star =
            maximize_risk(target_coefficients(in.truth, in.cls), in.cls.nv, in.truth.tables.ny);
        const PerturbationSpec joint = random_perturbation(in.eta, g_star, rng);
        const DerivativeEstimate gdr = pathwise_cross_derivative(in.truth, in.cls, g_star, joint, LossKind::GDR);
        CHECK(std::abs(gdr.richardson) <= 10.0 * gdr.error());
        CHECK(gdr.error() >= 0.0);

        // Away from cancellation, step halving shrinks the central estimate by about four.
        PerturbationSpec coarse = joint;
        coarse.t = coarse.s = 1e-2;
        const DerivativeEstimate wide = pathwise_cross_derivative(in.truth, in.cls, g_star, coarse, LossKind::GDR);
        CHECK_FALSE(wide.cancellation_dominated());
        const double ratio = wide.central / wide.central_half;
        CHECK(ratio >= 3.0);
        CHECK(ratio <= 5.0);
        PerturbationSpec fine = joint;
        fine.t = fine.s = 1e-5;
        CHECK(pathwise_cross_derivative(in.truth, in.cls, g_star, fine, LossKind::GDR).cancellation_dominated());

        PerturbationSpec outcome = joint;
        outcome.propensity = false;
        const DerivativeEstimate ra = pathwise_cross_derivative(in.truth, in.cls, g_star, outcome, LossKind::RA);
        CHECK(std::abs(ra.richardson) > 10.0 * std::max(std::abs(gdr.richardson), gdr.error()));

        // Oracle: d2/dt ds of the RA risk = sum_x p(x) sum_a (1 - pi_a) sum_y dxi * dg / g*.
        const data::ToyTables& tb = in.truth.tables;
        double want = 0.0;
        for (int x = 0; x < tb.nx; ++x)
            for (int a = 0; a < 2; ++a)
                for (int y = 0; y < tb.ny; ++y) {
                    const int v = in.cls.v_of_x[x];
                    const std::size_t gi = static_cast<std::size_t>((v * 2 + a) * tb.ny + y);
                    want += tb.px[x] * (1.0 - tb.propensity(x, a)) * joint.direction_eta.outcome(x, a, y) *
                            joint.direction_g.prob[gi] / g_star.prob[gi];
                }
        CHECK(std::abs(ra.richardson - want) <= 1e-6 * std::max(1.0, std::abs(want)));
    }
}

TEST_CASE("IPTW is orthogonal in the propensity direction only when the class contains xi") {
    Rng rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        for (bool restricted : {false, true}) {
            const Instance in = make_instance(500 + trial, restricted);
            const TabularDensity g_star =
                maximize_risk(target_coefficients(in.truth, in.cls), in.cls.nv, in.truth.tables.ny);
            PerturbationSpec spec = random_perturbation(in.eta, g_star, rng, false, true);
            const DerivativeEstimate d = pathwise_cross_derivative(in.truth, in.cls, g_star, spec, LossKind::IPTW);
            if (restricted)
                CHECK(std::abs(d.richardson) > 10.0 * d.error());
            else
                CHECK(std::abs(d.richardson) <= 10.0 * d.error());
        }
    }
}

TEST_CASE("cross-derivative rejects invalid steps") {
    const Instance in = make_instance(12);
    const TabularDensity g_star = maximize_risk(target_coefficients(in.truth, in.cls), in.cls.nv, 3);
    Rng rng(8);
    PerturbationSpec spec = random_perturbation(in.eta, g_star, rng);
    spec.t = 0.0;
    CHECK_THROWS_AS(pathwise_cross_derivative(in.truth, in.cls, g_star, spec, LossKind::GDR), InvalidArgument);
}

TEST_CASE("remainder scaling: double robustness and product rate") {
    Rng rng(9);
    const std::vector<double> grid{0.02, 0.04, 0.08, 0.16};
    for (int trial = 0; trial < 10; ++trial) {
        const Instance in = make_instance(600 + trial, trial % 2 == 0);
        const TabularNuisance dir = random_nuisance_direction(in.eta, rng);
        for (auto [outcome, propensity] : {std::pair{false, true}, std::pair{true, false}}) {
            const ScalingReport s = remainder_scaling_study(in.truth, in.cls, LossKind::GDR, grid, dir, outcome, propensity);
            for (double e : s.squared_error) CHECK(e <= 1e-10);
            for (double e : s.max_abs_error) CHECK(e <= 1e-8);
        }
        const ScalingReport gdr = remainder_scaling_study(in.truth, in.cls, LossKind::GDR, grid, dir);
        const ScalingReport ra = remainder_scaling_study(in.truth, in.cls, LossKind::RA, grid, dir);
        CHECK(gdr.slope >= 3.5);
        CHECK(gdr.slope <= 4.5);
        CHECK(ra.slope >= 1.5);
        CHECK(ra.slope <= 2.5);
    }
    const Instance in = make_instance(13);
    const TabularNuisance dir = random_nuisance_direction(in.eta, rng);
    CHECK_THROWS_AS(remainder_scaling_study(in.truth, in.cls, LossKind::GDR, {0.1, 0.2}, dir), InvalidArgument);
    CHECK_THROWS_AS(remainder_scaling_study(in.truth, in.cls, LossKind::GDR, {0.1, 0.1, 0.2}, dir), InvalidArgument);
    CHECK_THROWS_AS(remainder_scaling_study(in.truth, in.cls, LossKind::GDR, {0.0, 0.1, 0.2}, dir), InvalidArgument);
}

TEST_CASE("theory suite passes by default and fails under the fault hook") {
    const SuiteReport ok = run_theory_suite();
    INFO(ok.to_text());
    CHECK(ok.passed());
    CHECK(ok.checks.size() == 5 * 8);
    CHECK(ok.seconds < 120.0);
    const nlohmann::json j = ok.to_json();
    CHECK(j["passed"] == true);
    CHECK(j["checks"].size() == 40);
    CHECK(j["checks"][0].contains("upper"));

    SuiteConfig faulty;
    faulty.flip_correction = true;
    const SuiteReport bad = run_theory_suite(faulty);
    CHECK_FALSE(bad.passed());
    CHECK(bad.passed("eif_mean_zero"));
    CHECK_FALSE(bad.passed("double_robustness_exact_outcome"));
    CHECK_FALSE(bad.passed("orthogonality_gdr"));
    CHECK(bad.passed("identification"));
    CHECK(bad.to_text().find("FAIL") != std::string::npos);

    SuiteConfig invalid;
    invalid.nv = invalid.nx;
    CHECK_THROWS_AS(run_theory_suite(invalid), InvalidArgument);
}
