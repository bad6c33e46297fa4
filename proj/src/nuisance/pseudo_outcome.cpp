#include "cdpo/nuisance/pseudo_outcome.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cdpo/core/error.hpp"

namespace cdpo::nuis {

namespace {

void check_rows(const NuisanceEstimates& est, const Matrix& x, const IntVector& arm) {
    if (!est.outcome_model) throw ContractViolation("outcome nuisance is not fitted");
    require(arm.size() == x.rows(), "arm vector length must match the batch");
}

}  // namespace

MonteCarloRule::MonteCarloRule(int n_draws) : n_draws_(n_draws) { require(n_draws >= 1, "n_mc must be at least 1"); }

PseudoOutcomeSet MonteCarloRule::expand(const NuisanceEstimates& est, const Matrix& x, const IntVector& arm,
                                        Rng& rng) const {
    check_rows(est, x, arm);
    const Eigen::Index total = x.rows() * n_draws_;
    Matrix cond(total, x.cols());
    IntVector arms(total);
    PseudoOutcomeSet out;
    out.source.resize(static_cast<std::size_t>(total));
    for (Eigen::Index i = 0, k = 0; i < x.rows(); ++i) {
        for (int m = 0; m < n_draws_; ++m, ++k) {
            cond.row(k) = x.row(i);
            arms(k) = arm(i);
            out.source[static_cast<std::size_t>(k)] = static_cast<int>(i);
        }
    }
    out.y = total > 0 ? est.outcome_model->sample_batch(cond, arms, rng) : Matrix(0, est.outcome_model->outcome_dim());
    out.weight = Vector::Constant(total, 1.0 / n_draws_);
    return out;
}

PseudoOutcomeSet ExactTabularRule::expand(const NuisanceEstimates& est, const Matrix& x, const IntVector& arm,
                                          Rng&) const {
    check_rows(est, x, arm);
    const auto* tab = dynamic_cast<const gen::TabularModel*>(est.outcome_model.get());
    if (!tab) throw CapabilityError("exact pseudo-outcome sums need a tabular outcome model");
    const int ny = tab->ny();
    PseudoOutcomeSet out;
    out.y.resize(x.rows() * ny, 1);
    out.weight.resize(x.rows() * ny);
    for (Eigen::Index i = 0, k = 0; i < x.rows(); ++i) {
        const int xi = static_cast<int>(std::lround(x(i, 0)));
        for (int y = 0; y < ny; ++y, ++k) {
            out.source.push_back(static_cast<int>(i));
            out.y(k, 0) = y;
            out.weight(k) = tab->probability(xi, arm(i), y);
        }
    }
    return out;
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    require(n >= 1, "quadrature needs at least one node");
    nodes.assign(static_cast<std::size_t>(n), 0.0);
    weights.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int k = 1; k <= n; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double step = p0 / dp;
            z -= step;
            if (std::abs(step) < 1e-16) break;
        }
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[static_cast<std::size_t>(i)] = -z;
        nodes[static_cast<std::size_t>(n - 1 - i)] = z;
        weights[static_cast<std::size_t>(i)] = w;
        weights[static_cast<std::size_t>(n - 1 - i)] = w;
    }
}

QuadratureRule::QuadratureRule(int nodes, int tail_panels, double tail_span)
    : tail_panels_(tail_panels), tail_span_(tail_span) {
    require(tail_panels >= 1 && tail_span > 0.0, "invalid quadrature tail settings");
    gauss_legendre(nodes, abscissa_, weight_);
}

PseudoOutcomeSet QuadratureRule::expand(const NuisanceEstimates& est, const Matrix& x, const IntVector& arm,
                                        Rng&) const {
    check_rows(est, x, arm);
    const auto* model = dynamic_cast<const gen::NeuralGenerativeModel*>(est.outcome_model.get());
    if (!model || model->family() != Family::CNF || model->outcome_dim() != 1)
        throw CapabilityError("quadrature pseudo-outcomes need a 1-D CNF outcome model");
    PseudoOutcomeSet out;
    std::vector<double> ys, gl;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const std::vector<double> bp = model->density_breakpoints(x.row(i).transpose(), arm(i));
        const double span = bp.back() - bp.front();
        std::vector<double> edges;
        const double tail = tail_span_ * span / tail_panels_;
        for (int k = tail_panels_; k >= 1; --k) edges.push_back(bp.front() - k * tail);
        edges.insert(edges.end(), bp.begin(), bp.end());
        for (int k = 1; k <= tail_panels_; ++k) edges.push_back(bp.back() + k * tail);
        for (std::size_t e = 0; e + 1 < edges.size(); ++e) {
            const double lo = edges[e], hi = edges[e + 1];
            if (!(hi > lo)) continue;
            const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
            for (std::size_t q = 0; q < abscissa_.size(); ++q) {
                out.source.push_back(static_cast<int>(i));
                ys.push_back(mid + half * abscissa_[q]);
                gl.push_back(half * weight_[q]);
            }
        }
    }
    const Eigen::Index total = static_cast<Eigen::Index>(ys.size());
    Matrix cond(total, x.cols());
    IntVector arms(total);
    out.y.resize(total, 1);
    for (Eigen::Index k = 0; k < total; ++k) {
        const int src = out.source[static_cast<std::size_t>(k)];
        cond.row(k) = x.row(src);
        arms(k) = arm(src);
        out.y(k, 0) = ys[static_cast<std::size_t>(k)];
    }
    const Vector logp = total > 0 ? model->log_density(cond, arms, out.y) : Vector();
    out.weight.resize(total);
    Vector mass = Vector::Zero(x.rows());
    for (Eigen::Index k = 0; k < total; ++k) {
        out.weight(k) = std::exp(logp(k)) * gl[static_cast<std::size_t>(k)];
        mass(out.source[static_cast<std::size_t>(k)]) += out.weight(k);
    }
    for (Eigen::Index k = 0; k < total; ++k) out.weight(k) /= mass(out.source[static_cast<std::size_t>(k)]);
    return out;
}

}  // namespace cdpo::nuis
