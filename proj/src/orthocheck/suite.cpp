#include "cdpo/orthocheck/suite.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "cdpo/core/error.hpp"
#include "cdpo/orthocheck/checks.hpp"

namespace cdpo::ortho {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

CheckResult make_check(std::string name, int instance, double value, double lower, double upper,
                       std::string detail = {}) {
    CheckResult c{std::move(name), instance, value, lower, upper, false, std::move(detail)};
    c.passed = std::isfinite(value) && value >= lower && value <= upper;
    return c;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

}  // namespace

void SuiteConfig::validate() const {
    require(n_dgps >= 1, "n_dgps must be positive");
    require(nx >= 2 && ny >= 2, "DGP needs nx >= 2 and ny >= 2");
    require(nv >= 1 && nv < nx, "restricted class needs 1 <= nv < nx");
    require(step > 0.0, "finite-difference step must be positive");
    require(epsilons.size() >= 3, "remainder study needs at least three grid points");
}

bool SuiteReport::passed() const { return passed(""); }

bool SuiteReport::passed(const std::string& prefix) const {
    bool any = false;
    for (const CheckResult& c : checks) {
        if (c.name.rfind(prefix, 0) != 0) continue;
        any = true;
        if (!c.passed) return false;
    }
    return any;
}

nlohmann::json SuiteReport::to_json() const {
    nlohmann::json checks_json = nlohmann::json::array();
    for (const CheckResult& c : checks) {
        nlohmann::json j{{"name", c.name}, {"instance", c.instance}, {"value", c.value}, {"passed", c.passed}};
        j["lower"] = std::isfinite(c.lower) ? nlohmann::json(c.lower) : nlohmann::json(nullptr);
        j["upper"] = std::isfinite(c.upper) ? nlohmann::json(c.upper) : nlohmann::json(nullptr);
        if (!c.detail.empty()) j["detail"] = c.detail;
        checks_json.push_back(std::move(j));
    }
    nlohmann::json scaling_json = nlohmann::json::array();
    for (const ScalingSeries& s : scaling) {
        nlohmann::json j{{"learner", s.learner}, {"instance", s.instance}, {"epsilon", s.epsilon}};
        nlohmann::json err = nlohmann::json::array();
        for (double e : s.squared_error) err.push_back(std::isfinite(e) ? nlohmann::json(e) : nlohmann::json(nullptr));
        j["squared_error"] = std::move(err);
        j["slope"] = std::isfinite(s.slope) ? nlohmann::json(s.slope) : nlohmann::json(nullptr);
        scaling_json.push_back(std::move(j));
    }
    return {{"passed", passed()},
            {"seconds", seconds},
            {"config",
             {{"n_dgps", config.n_dgps},
              {"nx", config.nx},
              {"ny", config.ny},
              {"nv", config.nv},
              {"seed", config.seed},
              {"step", config.step},
              {"epsilons", config.epsilons},
              {"flip_correction", config.flip_correction}}},
            {"checks", std::move(checks_json)},
            {"scaling", std::move(scaling_json)}};
}

std::string SuiteReport::to_text() const {
    std::ostringstream os;
    for (const CheckResult& c : checks) {
        os << (c.passed ? "PASS " : "FAIL ") << c.name << "[" << c.instance << "] value=" << fmt(c.value);
        if (std::isfinite(c.lower)) os << " >= " << fmt(c.lower);
        if (std::isfinite(c.upper)) os << " <= " << fmt(c.upper);
        if (!c.detail.empty()) os << " (" << c.detail << ")";
        os << '\n';
    }
    os << (passed() ? "all checks passed" : "some checks FAILED") << " in " << fmt(seconds) << " s\n";
    return os.str();
}

SuiteReport run_theory_suite(const SuiteConfig& config) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    SuiteReport report;
    report.config = config;
    const bool flip = config.flip_correction;
    using loss::LossKind;

    for (int i = 0; i < config.n_dgps; ++i) {
        Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(i)));
        const data::DiscreteToyDGP dgp = data::random_toy_dgp(config.nx, config.ny, rng);
        const data::EnumeratedToy truth = data::enumerate_toy_dgp(dgp);
        const TabularNuisance eta = TabularNuisance::from_tables(truth.tables);
        const TargetClass cls = TargetClass::random_coarsening(config.nx, config.nv, rng);
        auto& out = report.checks;

        const TabularDensity g = TabularDensity::random(cls.nv, config.ny, rng);
        out.push_back(make_check("identification", i, risk_identification_check(dgp, cls, g).max_difference, -kInf,
                                 1e-12));
        out.push_back(make_check("eif_mean_zero", i, eif_mean_zero_check(truth, cls, g, loss::kBothArms, flip), -kInf,
                                 1e-12));

        const TabularDensity g_star = maximize_risk(target_coefficients(truth, cls), cls.nv, config.ny);
        PerturbationSpec joint = random_perturbation(eta, g_star, rng);
        joint.t = joint.s = config.step;
        const DerivativeEstimate gdr = pathwise_cross_derivative(truth, cls, g_star, joint, LossKind::GDR,
                                                                 loss::kBothArms, flip);
        out.push_back(make_check("orthogonality_gdr", i, std::abs(gdr.richardson) / gdr.error(), -kInf, 10.0,
                                 "derivative " + fmt(gdr.richardson) + ", error bound " + fmt(gdr.error())));

        PerturbationSpec outcome_only = joint;
        outcome_only.propensity = false;
        const DerivativeEstimate gdr_out = pathwise_cross_derivative(truth, cls, g_star, outcome_only, LossKind::GDR,
                                                                     loss::kBothArms, flip);
        const DerivativeEstimate ra_out =
            pathwise_cross_derivative(truth, cls, g_star, outcome_only, LossKind::RA);
        const double gdr_scale = std::max({std::abs(gdr.richardson), gdr.error(), std::abs(gdr_out.richardson),
                                           gdr_out.error()});
        out.push_back(make_check("orthogonality_ra_contrast", i, std::abs(ra_out.richardson) / gdr_scale, 10.0, kInf,
                                 "RA derivative " + fmt(ra_out.richardson) + ", GDR scale " + fmt(gdr_scale)));

        const TabularNuisance dir = random_nuisance_direction(eta, rng);
        const auto dr_error = [&](bool outcome, bool propensity) {
            const ScalingReport s = remainder_scaling_study(truth, cls, LossKind::GDR, config.epsilons, dir, outcome,
                                                            propensity, loss::kBothArms, flip);
            double worst = 0.0;
            for (double e : s.max_abs_error) worst = std::max(worst, e);
            return worst;
        };
        out.push_back(make_check("double_robustness_exact_outcome", i, dr_error(false, true), -kInf, 1e-8));
        out.push_back(make_check("double_robustness_exact_propensity", i, dr_error(true, false), -kInf, 1e-8));

        const ScalingReport gdr_scaling =
            remainder_scaling_study(truth, cls, LossKind::GDR, config.epsilons, dir, true, true, loss::kBothArms, flip);
        const ScalingReport ra_scaling = remainder_scaling_study(truth, cls, LossKind::RA, config.epsilons, dir);
        out.push_back(make_check("remainder_slope_gdr", i, gdr_scaling.slope, 3.5, 4.5));
        out.push_back(make_check("remainder_slope_ra", i, ra_scaling.slope, 1.5, 2.5));
        report.scaling.push_back({"gdr", i, gdr_scaling.epsilon, gdr_scaling.squared_error, gdr_scaling.slope});
        report.scaling.push_back({"ra", i, ra_scaling.epsilon, ra_scaling.squared_error, ra_scaling.slope});
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

}  // namespace cdpo::ortho
