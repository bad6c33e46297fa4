#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cdpo/nuisance/nuisance.hpp"

namespace cdpo::nuis {

/// Weighted outcome points standing in for the integral over the fitted
/// outcome law at each source row. Weights of one source sum to 1.
struct PseudoOutcomeSet {
    std::vector<int> source;
    Matrix y;
    Vector weight;

    int size() const { return static_cast<int>(source.size()); }
};

class PseudoOutcomeRule {
public:
    virtual ~PseudoOutcomeRule() = default;
    virtual std::string name() const = 0;
    /// One set of points per row of x, for the arm given per row.
    virtual PseudoOutcomeSet expand(const NuisanceEstimates& est, const Matrix& x, const IntVector& arm,
                                    Rng& rng) const = 0;
};

/// Fresh draws from the fitted outcome model, each weighted 1 / n_draws.
class MonteCarloRule : public PseudoOutcomeRule {
public:
    explicit MonteCarloRule(int n_draws = 1);
    std::string name() const override { return "monte_carlo"; }
    PseudoOutcomeSet expand(const NuisanceEstimates& est, const Matrix& x, const IntVector& arm,
                            Rng& rng) const override;

private:
    int n_draws_;
};

/// Whole support of a tabular outcome model with its probabilities.
class ExactTabularRule : public PseudoOutcomeRule {
public:
    std::string name() const override { return "exact_tabular"; }
    PseudoOutcomeSet expand(const NuisanceEstimates& est, const Matrix& x, const IntVector& arm,
                            Rng& rng) const override;
};

/// Gauss-Legendre quadrature against the density of a 1-D CNF outcome model:
/// `nodes` points on every spline bin and on `tail_panels` panels per tail,
/// each tail spanning `tail_span` times the spline range.
class QuadratureRule : public PseudoOutcomeRule {
public:
    explicit QuadratureRule(int nodes = 16, int tail_panels = 8, double tail_span = 2.0);
    std::string name() const override { return "quadrature"; }
    PseudoOutcomeSet expand(const NuisanceEstimates& est, const Matrix& x, const IntVector& arm,
                            Rng& rng) const override;

private:
    std::vector<double> abscissa_;  // on [-1, 1]
    std::vector<double> weight_;
    int tail_panels_;
    double tail_span_;
};

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace cdpo::nuis
