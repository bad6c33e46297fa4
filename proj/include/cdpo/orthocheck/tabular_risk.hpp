#pragma once

// Exact risks of tabular target densities on enumerable DGPs.
//
// Every risk here has the form  L(g) = sum_{v,a,y} C(v,a,y) log g(y | v, a)
// for a "pseudo-mass" table C that depends on the loss, the true law and the
// nuisance estimate. Risks are values to maximise (expected log-likelihood).

#include <vector>

#include "cdpo/core/rng.hpp"
#include "cdpo/data/toy_dgp.hpp"
#include "cdpo/losses/losses.hpp"

namespace cdpo::ortho {

/// Tabular nuisance (pi_1(x), xi_a(y | x)); pi_0 = 1 - pi_1.
/// Also used for nuisance *directions*, in which case entries are differences.
struct TabularNuisance {
    int nx = 0;
    int ny = 0;
    std::vector<double> pi1;  // nx
    std::vector<double> xi;   // (x * 2 + a) * ny + y

    double propensity(int x, int a) const {
        const double p = pi1[static_cast<std::size_t>(x)];
        return a == 1 ? p : 1.0 - p;
    }
    double outcome(int x, int a, int y) const { return xi[static_cast<std::size_t>((x * 2 + a) * ny + y)]; }

    static TabularNuisance from_tables(const data::ToyTables& t);
    /// Propensities strictly inside (0, 1), outcome rows nonnegative summing to 1.
    void validate() const;
};

/// this + step * direction, entrywise.
TabularNuisance perturbed(const TabularNuisance& base, const TabularNuisance& direction, double step,
                          bool outcome = true, bool propensity = true);

/// Coarsening V = v(X) that defines the tabular target class g(y | v, a).
/// The class contains xi_a only when the map is injective.
struct TargetClass {
    int nx = 0;
    int nv = 0;
    std::vector<int> v_of_x;

    static TargetClass identity(int nx);
    /// Surjective map onto nv < nx groups, at least one group merging two x.
    static TargetClass random_coarsening(int nx, int nv, Rng& rng);
    bool restricted() const { return nv < nx; }
};

/// g(y | v, a) table, index (v * 2 + a) * ny + y.
struct TabularDensity {
    int nv = 0;
    int ny = 0;
    std::vector<double> prob;

    double operator()(int v, int a, int y) const { return prob[static_cast<std::size_t>((v * 2 + a) * ny + y)]; }
    static TabularDensity uniform(int nv, int ny);
    /// Random strictly positive table (rows bounded away from zero).
    static TabularDensity random(int nv, int ny, Rng& rng);
    void validate() const;
};

/// Pseudo-mass of a learner's population risk under the true law with the
/// given nuisance estimate. Computed by summing the per-observation loss
/// integrand over every support triple (x, a_obs, y_obs).
/// `flip_correction` negates the GDR correction term (fault injection).
std::vector<double> risk_coefficients(const data::EnumeratedToy& truth, const TargetClass& cls,
                                      loss::LossKind kind, const TabularNuisance& estimate,
                                      int arm = loss::kBothArms, bool flip_correction = false);

/// Pseudo-mass of the target risk E[log g(Y[a] | V)] (xi_a averaged within v).
std::vector<double> target_coefficients(const data::EnumeratedToy& truth, const TargetClass& cls,
                                        int arm = loss::kBothArms);

/// sum C log g. Terms with C = 0 contribute 0.
double risk_value(const std::vector<double>& coefficients, const TabularDensity& g);

/// Maximiser of sum C log g over the tabular class, by Newton's method on
/// per-(v, a) softmax logits started from the uniform table. Rows with no mass
/// stay uniform. Throws InvalidArgument when a row mixes positive and
/// nonpositive mass (the optimum lies on the boundary or is unbounded).
TabularDensity maximize_risk(const std::vector<double>& coefficients, int nv, int ny, double tol = 1e-10);

}  // namespace cdpo::ortho
