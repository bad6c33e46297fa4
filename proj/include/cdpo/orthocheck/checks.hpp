#pragma once

#include <vector>

#include "cdpo/orthocheck/tabular_risk.hpp"

namespace cdpo::ortho {

/// Target risk of g computed three ways by exact summation.
struct IdentificationReport {
    double definition = 0.0;  // over joint potential outcomes
    double regression = 0.0;  // E[ sum_y xi_a(y | X) log g ]
    double weighted = 0.0;    // E[ 1{A = a} / pi_a(X) log g(Y) ]
    double max_difference = 0.0;
};

/// Requires a DGP built from structural pieces; throws InvalidArgument otherwise.
IdentificationReport risk_identification_check(const data::DiscreteToyDGP& dgp, const TargetClass& cls,
                                               const TabularDensity& g, int arm = loss::kBothArms);

/// |E[influence function]| of the target risk at the true nuisances.
double eif_mean_zero_check(const data::EnumeratedToy& truth, const TargetClass& cls, const TabularDensity& g,
                           int arm = loss::kBothArms, bool flip_correction = false);

/// E[GDR integrand at the estimate] - L(g): the second-order remainder.
double one_step_remainder(const data::EnumeratedToy& truth, const TargetClass& cls, const TabularDensity& g,
                          const TabularNuisance& estimate, int arm = loss::kBothArms);

/// Per-observation pseudo-distribution w_hat * xi + (1 - w_hat) * xi_hat for
/// one arm, with w_hat = 1{a_obs = a} / pi_hat_a(x).
struct DRPseudoDistribution {
    int nx = 0;
    int ny = 0;
    int arm = 1;
    std::vector<double> table;  // (x * 2 + a_obs) * ny + y

    double operator()(int x, int a_obs, int y) const {
        return table[static_cast<std::size_t>((x * 2 + a_obs) * ny + y)];
    }
    /// Sum over a_obs weighted by the true propensity.
    double expected(const data::ToyTables& truth, int x, int y) const;
};

DRPseudoDistribution dr_pseudo_distribution(const data::ToyTables& truth, const TabularNuisance& estimate, int arm,
                                            bool flip_correction = false);

/// Tangent directions: g - g* in target space and eta_hat - eta in nuisance
/// space, with the finite-difference steps used along each.
struct PerturbationSpec {
    TabularDensity direction_g;
    TabularNuisance direction_eta;
    bool outcome = true;
    bool propensity = true;
    double t = 1e-3;
    double s = 1e-3;
};

/// Directions as differences of valid tables: g' - g_star and eta' - eta.
PerturbationSpec random_perturbation(const TabularNuisance& eta, const TabularDensity& g_star, Rng& rng,
                                     bool outcome = true, bool propensity = true);

/// eta' - eta for a random valid eta' with propensities in [0.2, 0.8].
TabularNuisance random_nuisance_direction(const TabularNuisance& eta, Rng& rng);

struct DerivativeEstimate {
    double central = 0.0;       // at steps (t, s)
    double central_half = 0.0;  // at steps (t/2, s/2)
    double step_t = 0.0;
    double step_s = 0.0;
    double richardson = 0.0;
    double truncation_error = 0.0;
    double rounding_error = 0.0;

    double error() const { return truncation_error + rounding_error; }
    bool cancellation_dominated() const { return rounding_error > truncation_error; }
};

/// Mixed central difference of (t, s) -> L(g* + t dg, eta + s deta) for the
/// learner's population risk, Richardson-extrapolated over {h, h/2}.
DerivativeEstimate pathwise_cross_derivative(const data::EnumeratedToy& truth, const TargetClass& cls,
                                             const TabularDensity& g_star, const PerturbationSpec& spec,
                                             loss::LossKind kind, int arm = loss::kBothArms,
                                             bool flip_correction = false);

struct ScalingReport {
    std::vector<double> epsilon;
    std::vector<double> squared_error;  // ||g_hat - g*||^2 over all table entries
    std::vector<double> max_abs_error;
    double slope = 0.0;  // NaN when some error is exactly zero
    double intercept = 0.0;
};

/// Re-solves the learner's risk at eta + eps * direction for every eps and
/// fits log ||g_hat - g*||^2 against log eps. Needs at least three distinct
/// positive grid points.
ScalingReport remainder_scaling_study(const data::EnumeratedToy& truth, const TargetClass& cls, loss::LossKind kind,
                                      const std::vector<double>& epsilon_grid, const TabularNuisance& direction,
                                      bool outcome = true, bool propensity = true, int arm = loss::kBothArms,
                                      bool flip_correction = false);

}  // namespace cdpo::ortho
