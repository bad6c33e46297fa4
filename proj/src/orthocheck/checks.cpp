#include "cdpo/orthocheck/checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "cdpo/core/error.hpp"

namespace cdpo::ortho {

namespace {

std::vector<int> arms_of(int arm) {
    if (arm == loss::kBothArms) return {0, 1};
    require(arm == 0 || arm == 1, "arm must be 0, 1 or both");
    return {arm};
}

double log_g(const TabularDensity& g, const TargetClass& cls, int x, int a, int y) {
    return std::log(g(cls.v_of_x[static_cast<std::size_t>(x)], a, y));
}

void check_shapes(const data::ToyTables& tb, const TargetClass& cls, const TabularDensity& g) {
    require(cls.nx == tb.nx && static_cast<int>(cls.v_of_x.size()) == tb.nx, "target class does not match the DGP");
    require(g.nv == cls.nv && g.ny == tb.ny, "density table does not match the target class");
    g.validate();
}

double absolute_mass(const std::vector<double>& c, const TabularDensity& g) {
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) s += std::abs(c[i] * std::log(g.prob[i]));
    return s;
}

TabularDensity shifted(const TabularDensity& g, const TabularDensity& direction, double t) {
    TabularDensity out = g;
    for (std::size_t i = 0; i < out.prob.size(); ++i) out.prob[i] += t * direction.prob[i];
    return out;
}

}  // namespace

IdentificationReport risk_identification_check(const data::DiscreteToyDGP& dgp, const TargetClass& cls,
                                               const TabularDensity& g, int arm) {
    require(dgp.structural.has_value(), "identification check needs a DGP with structural potential outcomes");
    const data::EnumeratedToy truth = data::enumerate_toy_dgp(dgp);
    const data::ToyTables& tb = truth.tables;
    check_shapes(tb, cls, g);
    const auto& st = *dgp.structural;
    const std::vector<int> arms = arms_of(arm);
    const int ny = tb.ny;

    IdentificationReport r;
    for (int x = 0; x < tb.nx; ++x)
        for (int y0 = 0; y0 < ny; ++y0)
            for (int y1 = 0; y1 < ny; ++y1) {
                const double q = st.px[static_cast<std::size_t>(x)] *
                                 st.po_joint[static_cast<std::size_t>((x * ny + y0) * ny + y1)];
                for (int a : arms) r.definition += q * log_g(g, cls, x, a, a == 1 ? y1 : y0);
            }
    for (int x = 0; x < tb.nx; ++x)
        for (int a : arms)
            for (int y = 0; y < ny; ++y)
                r.regression += tb.px[static_cast<std::size_t>(x)] * tb.outcome(x, a, y) * log_g(g, cls, x, a, y);
    for (const data::ToyTriple& t : truth.triples)
        for (int a : arms)
            if (t.a == a) r.weighted += t.prob / tb.propensity(t.x, a) * log_g(g, cls, t.x, a, t.y);
    r.max_difference = std::max({std::abs(r.definition - r.regression), std::abs(r.definition - r.weighted),
                                 std::abs(r.regression - r.weighted)});
    return r;
}

double eif_mean_zero_check(const data::EnumeratedToy& truth, const TargetClass& cls, const TabularDensity& g, int arm,
                           bool flip_correction) {
    check_shapes(truth.tables, cls, g);
    const TabularNuisance eta = TabularNuisance::from_tables(truth.tables);
    const double corrected =
        risk_value(risk_coefficients(truth, cls, loss::LossKind::GDR, eta, arm, flip_correction), g);
    return std::abs(corrected - risk_value(target_coefficients(truth, cls, arm), g));
}

double one_step_remainder(const data::EnumeratedToy& truth, const TargetClass& cls, const TabularDensity& g,
                          const TabularNuisance& estimate, int arm) {
    check_shapes(truth.tables, cls, g);
    return risk_value(risk_coefficients(truth, cls, loss::LossKind::GDR, estimate, arm), g) -
           risk_value(target_coefficients(truth, cls, arm), g);
}

double DRPseudoDistribution::expected(const data::ToyTables& truth, int x, int y) const {
    return truth.propensity(x, 0) * (*this)(x, 0, y) + truth.propensity(x, 1) * (*this)(x, 1, y);
}

DRPseudoDistribution dr_pseudo_distribution(const data::ToyTables& truth, const TabularNuisance& estimate, int arm,
                                            bool flip_correction) {
    require(arm == 0 || arm == 1, "pseudo-distribution is defined per arm");
    require(estimate.nx == truth.nx && estimate.ny == truth.ny, "nuisance estimate has the wrong shape");
    DRPseudoDistribution d;
    d.nx = truth.nx;
    d.ny = truth.ny;
    d.arm = arm;
    d.table.resize(static_cast<std::size_t>(d.nx * 2 * d.ny));
    const double sign = flip_correction ? -1.0 : 1.0;
    for (int x = 0; x < d.nx; ++x)
        for (int a_obs = 0; a_obs < 2; ++a_obs) {
            const double w = a_obs == arm ? 1.0 / estimate.propensity(x, arm) : 0.0;
            for (int y = 0; y < d.ny; ++y)
                d.table[static_cast<std::size_t>((x * 2 + a_obs) * d.ny + y)] =
                    w * truth.outcome(x, arm, y) + sign * (1.0 - w) * estimate.outcome(x, arm, y);
        }
    return d;
}

TabularNuisance random_nuisance_direction(const TabularNuisance& eta, Rng& rng) {
    TabularNuisance d = eta;
    for (std::size_t x = 0; x < d.pi1.size(); ++x) d.pi1[x] = 0.2 + 0.6 * rng.uniform() - eta.pi1[x];
    for (int r = 0; r < eta.nx * 2; ++r) {
        std::vector<double> row(static_cast<std::size_t>(eta.ny));
        double s = 0.0;
        for (double& v : row) s += (v = 0.3 + rng.uniform());
        for (int y = 0; y < eta.ny; ++y) {
            const std::size_t i = static_cast<std::size_t>(r * eta.ny + y);
            d.xi[i] = row[static_cast<std::size_t>(y)] / s - eta.xi[i];
        }
    }
    return d;
}

PerturbationSpec random_perturbation(const TabularNuisance& eta, const TabularDensity& g_star, Rng& rng, bool outcome,
                                     bool propensity) {
    PerturbationSpec spec;
    spec.direction_g = TabularDensity::random(g_star.nv, g_star.ny, rng);
    for (std::size_t i = 0; i < g_star.prob.size(); ++i) spec.direction_g.prob[i] -= g_star.prob[i];
    spec.direction_eta = random_nuisance_direction(eta, rng);
    spec.outcome = outcome;
    spec.propensity = propensity;
    return spec;
}

DerivativeEstimate pathwise_cross_derivative(const data::EnumeratedToy& truth, const TargetClass& cls,
                                             const TabularDensity& g_star, const PerturbationSpec& spec,
                                             loss::LossKind kind, int arm, bool flip_correction) {
    check_shapes(truth.tables, cls, g_star);
    require(spec.t > 0.0 && spec.s > 0.0, "finite-difference steps must be positive");
    require(spec.direction_g.prob.size() == g_star.prob.size(), "target direction has the wrong shape");
    const TabularNuisance eta = TabularNuisance::from_tables(truth.tables);

    const auto risk = [&](double t, double s) {
        const TabularNuisance est = perturbed(eta, spec.direction_eta, s, spec.outcome, spec.propensity);
        est.validate();
        const TabularDensity g = shifted(g_star, spec.direction_g, t);
        for (double p : g.prob) require(p > 0.0, "target step leaves the simplex; reduce t");
        return risk_value(risk_coefficients(truth, cls, kind, est, arm, flip_correction), g);
    };
    const auto mixed = [&](double t, double s) {
        return (risk(t, s) - risk(t, -s) - risk(-t, s) + risk(-t, -s)) / (4.0 * t * s);
    };

    DerivativeEstimate d;
    d.step_t = spec.t;
    d.step_s = spec.s;
    d.central = mixed(spec.t, spec.s);
    d.central_half = mixed(spec.t / 2, spec.s / 2);
    d.richardson = (4.0 * d.central_half - d.central) / 3.0;
    d.truncation_error = std::abs(d.central - d.central_half) / 3.0;
    // Four risk evaluations, each accurate to about one ulp of its absolute mass,
    // divided by the half-step denominator and amplified by the extrapolation.
    const double mass = absolute_mass(risk_coefficients(truth, cls, kind, eta, arm, flip_correction), g_star);
    const double ulp = std::numeric_limits<double>::epsilon();
    d.rounding_error = (5.0 / 3.0) * 4.0 * ulp * mass / (spec.t * spec.s);
    return d;
}

ScalingReport remainder_scaling_study(const data::EnumeratedToy& truth, const TargetClass& cls, loss::LossKind kind,
                                      const std::vector<double>& epsilon_grid, const TabularNuisance& direction,
                                      bool outcome, bool propensity, int arm, bool flip_correction) {
    const std::set<double> distinct(epsilon_grid.begin(), epsilon_grid.end());
    require(distinct.size() >= 3, "a slope fit needs at least three distinct grid points");
    for (double e : epsilon_grid) require(e > 0.0, "grid points must be positive");
    const TabularNuisance eta = TabularNuisance::from_tables(truth.tables);
    const int ny = truth.tables.ny;
    const TabularDensity g_star = maximize_risk(target_coefficients(truth, cls, arm), cls.nv, ny);

    ScalingReport r;
    r.epsilon = epsilon_grid;
    bool vanished = false;
    for (double e : epsilon_grid) {
        const TabularNuisance est = perturbed(eta, direction, e, outcome, propensity);
        est.validate();
        const TabularDensity g_hat =
            maximize_risk(risk_coefficients(truth, cls, kind, est, arm, flip_correction), cls.nv, ny);
        double sq = 0.0, mx = 0.0;
        for (std::size_t i = 0; i < g_hat.prob.size(); ++i) {
            const double diff = g_hat.prob[i] - g_star.prob[i];
            sq += diff * diff;
            mx = std::max(mx, std::abs(diff));
        }
        r.squared_error.push_back(sq);
        r.max_abs_error.push_back(mx);
        vanished = vanished || sq <= 0.0;
    }
    if (vanished) {
        r.slope = r.intercept = std::numeric_limits<double>::quiet_NaN();
        return r;
    }
    const double k = static_cast<double>(epsilon_grid.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < epsilon_grid.size(); ++i) {
        const double lx = std::log(epsilon_grid[i]), ly = std::log(r.squared_error[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    r.slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    r.intercept = (sy - r.slope * sx) / k;
    return r;
}

}  // namespace cdpo::ortho
