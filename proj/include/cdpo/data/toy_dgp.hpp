#pragma once

#include <optional>
#include <vector>

#include "cdpo/core/rng.hpp"
#include "cdpo/data/dataset.hpp"

namespace cdpo::data {

/// Finite joint law P(X = x, A = a, Y = y) on {0..nx-1} x {0,1} x {0..ny-1}.
///
/// When built from a structural description (p(x), pi_1(x), joint potential
/// outcome table P(Y[0], Y[1] | x)), the structural pieces are retained so the
/// target risk can be computed from its definition over potential outcomes.
struct DiscreteToyDGP {
    int nx = 0;
    int ny = 0;
    std::vector<double> joint;  // index (x * 2 + a) * ny + y

    struct Structural {
        std::vector<double> px;        // nx
        std::vector<double> pi1;       // nx
        std::vector<double> po_joint;  // index (x * ny + y0) * ny + y1, conditional on x
    };
    std::optional<Structural> structural;

    double p(int x, int a, int y) const {
        return joint[static_cast<std::size_t>((x * 2 + a) * ny + y)];
    }
};

/// Exact marginal/conditional tables derived from a DiscreteToyDGP.
struct ToyTables {
    int nx = 0;
    int ny = 0;
    std::vector<double> px;                 // P(X = x)
    std::vector<double> pxa;                // P(X = x, A = a), index x * 2 + a
    std::vector<double> pi;                 // pi_a(x), index x * 2 + a
    std::vector<double> xi;                 // xi_a(y | x), index (x * 2 + a) * ny + y

    double propensity(int x, int a) const { return pi[static_cast<std::size_t>(x * 2 + a)]; }
    double outcome(int x, int a, int y) const {
        return xi[static_cast<std::size_t>((x * 2 + a) * ny + y)];
    }
};

struct ToyTriple {
    int x;
    int a;
    int y;
    double prob;
};

struct EnumeratedToy {
    std::vector<ToyTriple> triples;  // all support points, lexicographic order
    ToyTables tables;
};

/// Enumerates all (x, a, y) with exact probabilities and derives pi_a, xi_a.
/// Throws InvalidArgument if the joint table is negative or does not sum to 1
/// within 1e-12, or if some P(X = x, A = a) is zero.
EnumeratedToy enumerate_toy_dgp(const DiscreteToyDGP& dgp);

/// Builds the observational joint from structural pieces (unconfounded
/// assignment; Y = Y[A]).
DiscreteToyDGP make_structural_toy(int nx, int ny, std::vector<double> px, std::vector<double> pi1,
                                   std::vector<double> po_joint);

/// Random structural toy with every probability bounded away from zero and
/// pi_1(x) in [overlap, 1 - overlap].
DiscreteToyDGP random_toy_dgp(int nx, int ny, Rng& rng, double overlap = 0.2);

/// n i.i.d. draws as a dataset with 1-D index-valued covariates and outcomes.
PODataset sample_toy_dataset(const DiscreteToyDGP& dgp, int n, Rng& rng);

}  // namespace cdpo::data
