#include "cdpo/orthocheck/tabular_risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "cdpo/core/error.hpp"

namespace cdpo::ortho {

namespace {

std::vector<int> arms_of(int arm) {
    if (arm == loss::kBothArms) return {0, 1};
    require(arm == 0 || arm == 1, "arm must be 0, 1 or both");
    return {arm};
}

std::vector<double> random_row(int n, Rng& rng) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (double& v : w) v = 0.3 + rng.uniform();
    const double s = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& v : w) v /= s;
    return w;
}

double log_sum_exp(const Eigen::VectorXd& t) {
    const double m = t.maxCoeff();
    return m + std::log((t.array() - m).exp().sum());
}

}  // namespace

TabularNuisance TabularNuisance::from_tables(const data::ToyTables& t) {
    TabularNuisance n;
    n.nx = t.nx;
    n.ny = t.ny;
    n.pi1.resize(static_cast<std::size_t>(t.nx));
    for (int x = 0; x < t.nx; ++x) n.pi1[static_cast<std::size_t>(x)] = t.propensity(x, 1);
    n.xi = t.xi;
    return n;
}

void TabularNuisance::validate() const {
    require(nx > 0 && ny > 0, "nuisance table is empty");
    require(static_cast<int>(pi1.size()) == nx && static_cast<int>(xi.size()) == nx * 2 * ny,
            "nuisance table has the wrong size");
    for (double p : pi1) require(p > 0.0 && p < 1.0, "perturbed propensity left (0, 1)");
    for (int r = 0; r < nx * 2; ++r) {
        double s = 0.0;
        for (int y = 0; y < ny; ++y) {
            const double q = xi[static_cast<std::size_t>(r * ny + y)];
            require(q >= 0.0, "outcome table has a negative entry");
            s += q;
        }
        require(std::abs(s - 1.0) <= 1e-12, "outcome table row does not sum to 1");
    }
}

TabularNuisance perturbed(const TabularNuisance& base, const TabularNuisance& direction, double step,
                          bool outcome, bool propensity) {
    require(base.nx == direction.nx && base.ny == direction.ny, "direction shape mismatch");
    TabularNuisance out = base;
    if (propensity)
        for (std::size_t i = 0; i < out.pi1.size(); ++i) out.pi1[i] += step * direction.pi1[i];
    if (outcome)
        for (std::size_t i = 0; i < out.xi.size(); ++i) out.xi[i] += step * direction.xi[i];
    return out;
}

TargetClass TargetClass::identity(int nx) {
    TargetClass c;
    c.nx = c.nv = nx;
    c.v_of_x.resize(static_cast<std::size_t>(nx));
    std::iota(c.v_of_x.begin(), c.v_of_x.end(), 0);
    return c;
}

TargetClass TargetClass::random_coarsening(int nx, int nv, Rng& rng) {
    require(nv >= 1 && nv < nx, "coarsening needs 1 <= nv < nx");
    TargetClass c;
    c.nx = nx;
    c.nv = nv;
    std::vector<int> order(static_cast<std::size_t>(nx));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    c.v_of_x.assign(static_cast<std::size_t>(nx), 0);
    for (int i = 0; i < nx; ++i) {
        const int group = i < nv ? i : rng.uniform_int(0, nv - 1);
        c.v_of_x[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = group;
    }
    return c;
}

TabularDensity TabularDensity::uniform(int nv, int ny) {
    TabularDensity g;
    g.nv = nv;
    g.ny = ny;
    g.prob.assign(static_cast<std::size_t>(nv * 2 * ny), 1.0 / ny);
    return g;
}

TabularDensity TabularDensity::random(int nv, int ny, Rng& rng) {
    TabularDensity g;
    g.nv = nv;
    g.ny = ny;
    for (int r = 0; r < nv * 2; ++r) {
        const std::vector<double> row = random_row(ny, rng);
        g.prob.insert(g.prob.end(), row.begin(), row.end());
    }
    return g;
}

void TabularDensity::validate() const {
    require(static_cast<int>(prob.size()) == nv * 2 * ny, "density table has the wrong size");
    for (int r = 0; r < nv * 2; ++r) {
        double s = 0.0;
        for (int y = 0; y < ny; ++y) {
            const double q = prob[static_cast<std::size_t>(r * ny + y)];
            require(q > 0.0, "density table has a nonpositive entry");
            s += q;
        }
        require(std::abs(s - 1.0) <= 1e-9, "density table row does not sum to 1");
    }
}

std::vector<double> risk_coefficients(const data::EnumeratedToy& truth, const TargetClass& cls,
                                      loss::LossKind kind, const TabularNuisance& estimate, int arm,
                                      bool flip_correction) {
    const int ny = truth.tables.ny;
    require(cls.nx == truth.tables.nx, "target class and DGP disagree on nx");
    require(estimate.nx == truth.tables.nx && estimate.ny == ny, "nuisance estimate has the wrong shape");
    std::vector<double> c(static_cast<std::size_t>(cls.nv * 2 * ny), 0.0);
    const std::vector<int> arms = arms_of(arm);
    const double sign = flip_correction ? -1.0 : 1.0;
    for (const data::ToyTriple& t : truth.triples) {
        const int v = cls.v_of_x[static_cast<std::size_t>(t.x)];
        for (int a : arms) {
            double* row = &c[static_cast<std::size_t>((v * 2 + a) * ny)];
            const bool factual = t.a == a;
            double direct = 0.0;      // weight on log g(y_obs)
            double integrated = 0.0;  // weight on E_{xi_hat} log g
            switch (kind) {
                case loss::LossKind::PlugIn:
                    direct = factual ? 1.0 : 0.0;
                    break;
                case loss::LossKind::IPTW:
                    direct = factual ? 1.0 / estimate.propensity(t.x, a) : 0.0;
                    break;
                case loss::LossKind::RA:
                    direct = factual ? 1.0 : 0.0;
                    integrated = factual ? 0.0 : 1.0;
                    break;
                case loss::LossKind::GDR: {
                    const double w = factual ? 1.0 / estimate.propensity(t.x, a) : 0.0;
                    direct = w;
                    integrated = sign * (1.0 - w);
                    break;
                }
            }
            row[t.y] += t.prob * direct;
            if (integrated != 0.0)
                for (int y = 0; y < ny; ++y) row[y] += t.prob * integrated * estimate.outcome(t.x, a, y);
        }
    }
    return c;
}

std::vector<double> target_coefficients(const data::EnumeratedToy& truth, const TargetClass& cls, int arm) {
    const data::ToyTables& tb = truth.tables;
    require(cls.nx == tb.nx, "target class and DGP disagree on nx");
    std::vector<double> c(static_cast<std::size_t>(cls.nv * 2 * tb.ny), 0.0);
    for (int x = 0; x < tb.nx; ++x) {
        const int v = cls.v_of_x[static_cast<std::size_t>(x)];
        for (int a : arms_of(arm))
            for (int y = 0; y < tb.ny; ++y)
                c[static_cast<std::size_t>((v * 2 + a) * tb.ny + y)] += tb.px[static_cast<std::size_t>(x)] * tb.outcome(x, a, y);
    }
    return c;
}

double risk_value(const std::vector<double>& coefficients, const TabularDensity& g) {
    require(coefficients.size() == g.prob.size(), "coefficient and density tables differ in size");
    double total = 0.0;
    for (std::size_t i = 0; i < coefficients.size(); ++i)
        if (coefficients[i] != 0.0) total += coefficients[i] * std::log(g.prob[i]);
    return total;
}

TabularDensity maximize_risk(const std::vector<double>& coefficients, int nv, int ny, double tol) {
    require(static_cast<int>(coefficients.size()) == nv * 2 * ny, "coefficient table has the wrong size");
    require(ny >= 2, "outcome space needs at least two values");
    TabularDensity g = TabularDensity::uniform(nv, ny);
    const int m = ny - 1;  // logit 0 is pinned to zero
    for (int r = 0; r < nv * 2; ++r) {
        const Eigen::Map<const Eigen::VectorXd> mass(&coefficients[static_cast<std::size_t>(r * ny)], ny);
        if ((mass.array() == 0.0).all()) continue;
        if ((mass.array() <= 0.0).any())
            throw InvalidArgument("pseudo-mass row is not strictly positive; the maximiser is not interior");
        const double total = mass.sum();
        const auto value = [&](const Eigen::VectorXd& t) { return mass.dot(t) - total * log_sum_exp(t); };
        Eigen::VectorXd theta = Eigen::VectorXd::Zero(ny);
        bool converged = false;
        for (int it = 0; it < 200; ++it) {
            const Eigen::VectorXd p = (theta.array() - log_sum_exp(theta)).exp().matrix();
            const Eigen::VectorXd grad = (mass - total * p).tail(m);
            const Eigen::VectorXd q = p.tail(m);
            const Eigen::MatrixXd hess = total * (Eigen::MatrixXd(q.asDiagonal()) - q * q.transpose());
            const Eigen::VectorXd dir = hess.ldlt().solve(grad);
            if (grad.cwiseAbs().maxCoeff() <= tol * total) {
                theta.tail(m) += dir;  // one polishing step in the quadratic regime
                converged = true;
                break;
            }
            const double f0 = value(theta);
            const double slack = 64.0 * std::numeric_limits<double>::epsilon() * (std::abs(f0) + total);
            double step = 1.0;
            Eigen::VectorXd next = theta;
            for (int k = 0; k < 60; ++k) {
                next.tail(m) = theta.tail(m) + step * dir;
                if (value(next) >= f0 + 1e-4 * step * grad.dot(dir) - slack) break;
                step *= 0.5;
            }
            theta = next;
        }
        if (!converged) throw NumericalError("Newton solver did not converge on a tabular risk");
        const Eigen::VectorXd p = (theta.array() - log_sum_exp(theta)).exp().matrix();
        std::copy(p.data(), p.data() + ny, g.prob.begin() + r * ny);
    }
    return g;
}

}  // namespace cdpo::ortho
