#pragma once

#include <span>
#include <string>

#include "cdpo/data/dataset.hpp"
#include "cdpo/genmodels/model.hpp"
#include "cdpo/nuisance/nuisance.hpp"
#include "cdpo/nuisance/pseudo_outcome.hpp"

namespace cdpo::loss {

enum class LossKind { PlugIn, RA, IPTW, GDR };

const char* to_string(LossKind k);
/// Accepts plugin, ra, iptw and gdr.
LossKind loss_from_string(const std::string& s);
bool needs_outcome_nuisance(LossKind k);
bool needs_propensity_nuisance(LossKind k);

/// Rows of one loss evaluation: full covariates x (seen by the nuisances) and
/// the target model's conditioning input v.
struct LossBatch {
    Matrix x;
    Matrix v;
    IntVector a;
    Matrix y;

    int rows() const { return static_cast<int>(x.rows()); }
};

LossBatch make_loss_batch(const data::ConditioningView& view, std::span<const int> rows);
/// v = x.
LossBatch make_loss_batch(const data::PODataset& ds, std::span<const int> rows);

inline constexpr int kBothArms = -1;

struct LossOptions {
    int arm = kBothArms;                             // 0, 1, or both arms summed
    int n_mc = 1;                                    // draws for the default Monte Carlo rule
    const nuis::PseudoOutcomeRule* rule = nullptr;   // overrides the Monte Carlo rule
    bool need_grad = false;
    bool train = false;                              // target-model noise regularisation
    int n_latent = 1;
    bool flip_correction = false;                    // fault hook: negates the GDR correction term
};

/// Loss terms of one batch. Column a of `weight` holds the factual
/// coefficient of every row for arm a (1{A=a}, or 1{A=a}/pi_a(X) with the
/// clipped propensity for IPTW and GDR) and column a of `complement` the
/// coefficient of the pseudo-outcome term (1{A!=a} for RA, 1 - w for GDR,
/// 0 otherwise).
struct BatchLossValue {
    double value = 0.0;
    Matrix weight;      // rows x 2
    Matrix complement;  // rows x 2
    nuis::PseudoOutcomeSet pseudo[2];
    gen::TermBatch terms;
    Vector grad;        // d value / d target parameters when requested
};

/// Weighted term rows for `kind` without evaluating the target model.
BatchLossValue build_loss_terms(LossKind kind, const nuis::NuisanceEstimates& nuis, const LossBatch& batch, Rng& rng,
                                const LossOptions& opt = {});

/// Builds the terms and evaluates them under `model` (value normalised by the batch size).
BatchLossValue evaluate_loss(LossKind kind, const gen::GenerativeModel& model, const nuis::NuisanceEstimates& nuis,
                             const LossBatch& batch, Rng& rng, const LossOptions& opt = {});

/// P_n{1{A=a} term(Y | V)}.
BatchLossValue plugin_loss(const gen::GenerativeModel& model, const LossBatch& batch, Rng& rng,
                           const LossOptions& opt = {});
/// P_n{1{A=a}/pi_a(X) term(Y | V)}.
BatchLossValue iptw_loss(const gen::GenerativeModel& model, const nuis::NuisanceEstimates& nuis,
                         const LossBatch& batch, Rng& rng, const LossOptions& opt = {});
/// P_n{1{A=a} term(Y | V) + 1{A!=a} E_xi[term(Y~ | V)]}.
BatchLossValue ra_loss(const gen::GenerativeModel& model, const nuis::NuisanceEstimates& nuis, const LossBatch& batch,
                       Rng& rng, const LossOptions& opt = {});
/// P_n{w term(Y | V) + (1 - w) E_xi[term(Y~ | V)]}, w = 1{A=a}/pi_a(X).
BatchLossValue gdr_loss(const gen::GenerativeModel& model, const nuis::NuisanceEstimates& nuis, const LossBatch& batch,
                        Rng& rng, const LossOptions& opt = {});

struct EquivalenceReport {
    bool equivalent = false;
    double relative_difference = 0.0;
    double tolerance = 0.0;
    Vector grad_gdr;
    Vector grad_iptw;
};

/// Compares target-parameter gradients of the GDR and IPTW losses. Requires
/// v = x. The pseudo-outcome integral uses `rule`, by default Gauss-Legendre
/// quadrature against a 1-D CNF outcome nuisance. A batch without factual
/// rows for the arm never counts as equivalent.
EquivalenceReport iptw_equivalence_check(const gen::GenerativeModel& target, const nuis::NuisanceEstimates& nuis,
                                         const LossBatch& batch, int arm, Rng& rng, double rel_tol = 1e-6,
                                         const nuis::PseudoOutcomeRule* rule = nullptr);

}  // namespace cdpo::loss
