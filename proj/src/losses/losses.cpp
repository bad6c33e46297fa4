#include "cdpo/losses/losses.hpp"

#include <vector>

#include "cdpo/core/error.hpp"

namespace cdpo::loss {

const char* to_string(LossKind k) {
    switch (k) {
        case LossKind::PlugIn: return "plugin";
        case LossKind::RA: return "ra";
        case LossKind::IPTW: return "iptw";
        case LossKind::GDR: return "gdr";
    }
    return "unknown";
}

LossKind loss_from_string(const std::string& s) {
    if (s == "plugin") return LossKind::PlugIn;
    if (s == "ra") return LossKind::RA;
    if (s == "iptw") return LossKind::IPTW;
    if (s == "gdr") return LossKind::GDR;
    throw InvalidArgument("unknown learner '" + s + "' (expected plugin, ra, iptw or gdr)");
}

bool needs_outcome_nuisance(LossKind k) { return k == LossKind::RA || k == LossKind::GDR; }
bool needs_propensity_nuisance(LossKind k) { return k == LossKind::IPTW || k == LossKind::GDR; }

LossBatch make_loss_batch(const data::ConditioningView& view, std::span<const int> rows) {
    const data::PODataset& ds = view.dataset();
    LossBatch b;
    const auto n = static_cast<Eigen::Index>(rows.size());
    b.x.resize(n, ds.dx());
    b.a.resize(n);
    b.y.resize(n, ds.dy());
    for (Eigen::Index k = 0; k < n; ++k) {
        const int i = rows[static_cast<std::size_t>(k)];
        require(i >= 0 && i < ds.size(), "batch row " + std::to_string(i) + " outside the dataset");
        b.x.row(k) = ds.x.row(i);
        b.a(k) = ds.a(i);
        b.y.row(k) = ds.y.row(i);
    }
    b.v = view.v_rows(rows);
    return b;
}

LossBatch make_loss_batch(const data::PODataset& ds, std::span<const int> rows) {
    return make_loss_batch(data::apply_v_mask(ds, {}), rows);
}

namespace {

void append_row(std::vector<double>& cond, std::vector<int>& arm, std::vector<double>& y, std::vector<double>& w,
                const Eigen::Ref<const Vector>& v, int a, const Eigen::Ref<const Vector>& yy, double weight) {
    cond.insert(cond.end(), v.data(), v.data() + v.size());
    arm.push_back(a);
    y.insert(y.end(), yy.data(), yy.data() + yy.size());
    w.push_back(weight);
}

}  // namespace

BatchLossValue build_loss_terms(LossKind kind, const nuis::NuisanceEstimates& nuis, const LossBatch& batch, Rng& rng,
                                const LossOptions& opt) {
    const int n = batch.rows();
    require(n > 0, "loss batch is empty");
    require(batch.v.rows() == n && batch.a.size() == n && batch.y.rows() == n, "loss batch has inconsistent shapes");
    require(opt.arm == kBothArms || opt.arm == 0 || opt.arm == 1, "arm must be 0, 1 or both");
    if (needs_outcome_nuisance(kind) && !nuis.has_outcome())
        throw ContractViolation(std::string(to_string(kind)) + " loss needs a fitted outcome nuisance");
    if (needs_propensity_nuisance(kind) && !nuis.has_propensity())
        throw ContractViolation(std::string(to_string(kind)) + " loss needs a fitted propensity nuisance");

    BatchLossValue out;
    out.weight = Matrix::Zero(n, 2);
    out.complement = Matrix::Zero(n, 2);
    const int dv = static_cast<int>(batch.v.cols()), dy = static_cast<int>(batch.y.cols());
    std::vector<double> cond, ys, ws;
    std::vector<int> arms;
    const nuis::MonteCarloRule mc(opt.n_mc);
    const nuis::PseudoOutcomeRule& rule = opt.rule ? *opt.rule : static_cast<const nuis::PseudoOutcomeRule&>(mc);

    for (int a = 0; a < 2; ++a) {
        if (opt.arm != kBothArms && opt.arm != a) continue;
        const IntVector arm_vec = IntVector::Constant(n, a);
        Vector inv_pi;
        if (needs_propensity_nuisance(kind)) inv_pi = nuis.predict_propensity(batch.x, arm_vec).cwiseInverse();
        std::vector<int> need_pseudo;
        for (int i = 0; i < n; ++i) {
            const bool factual = batch.a(i) == a;
            double w = factual ? 1.0 : 0.0;
            if (needs_propensity_nuisance(kind) && factual) w = inv_pi(i);
            double c = 0.0;
            if (kind == LossKind::RA) c = factual ? 0.0 : 1.0;
            if (kind == LossKind::GDR) c = 1.0 - w;
            if (opt.flip_correction && kind == LossKind::GDR) c = -c;
            out.weight(i, a) = w;
            out.complement(i, a) = c;
            if (w != 0.0) append_row(cond, arms, ys, ws, batch.v.row(i).transpose(), a,
                                     batch.y.row(i).transpose(), w);
            if (c != 0.0) need_pseudo.push_back(i);
        }
        if (need_pseudo.empty()) continue;
        Matrix px(static_cast<Eigen::Index>(need_pseudo.size()), batch.x.cols());
        for (std::size_t k = 0; k < need_pseudo.size(); ++k) px.row(static_cast<Eigen::Index>(k)) = batch.x.row(need_pseudo[k]);
        nuis::PseudoOutcomeSet set =
            rule.expand(nuis, px, IntVector::Constant(static_cast<Eigen::Index>(need_pseudo.size()), a), rng);
        for (int& s : set.source) s = need_pseudo[static_cast<std::size_t>(s)];
        for (int k = 0; k < set.size(); ++k) {
            const int i = set.source[static_cast<std::size_t>(k)];
            const double c = out.complement(i, a);
            append_row(cond, arms, ys, ws, batch.v.row(i).transpose(), a, set.y.row(k).transpose(),
                       c * set.weight(k));
        }
        out.pseudo[a] = std::move(set);
    }

    const auto rows = static_cast<int>(arms.size());
    out.terms.resize(rows, dv, dy);
    for (int r = 0; r < rows; ++r) {
        for (int j = 0; j < dv; ++j) out.terms.cond(r, j) = cond[static_cast<std::size_t>(r * dv + j)];
        for (int j = 0; j < dy; ++j) out.terms.y(r, j) = ys[static_cast<std::size_t>(r * dy + j)];
        out.terms.arm(r) = arms[static_cast<std::size_t>(r)];
        out.terms.weight(r) = ws[static_cast<std::size_t>(r)];
    }
    return out;
}

BatchLossValue evaluate_loss(LossKind kind, const gen::GenerativeModel& model, const nuis::NuisanceEstimates& nuis,
                             const LossBatch& batch, Rng& rng, const LossOptions& opt) {
    require(batch.v.cols() == model.cond_dim(), "target conditioning dimension does not match the batch");
    BatchLossValue out = build_loss_terms(kind, nuis, batch, rng, opt);
    gen::ObjectiveOptions oo;
    oo.train = opt.train;
    oo.need_grad = opt.need_grad;
    oo.n_latent = opt.n_latent;
    gen::ObjectiveResult r = model.objective(out.terms, static_cast<double>(batch.rows()), rng, oo);
    if (!std::isfinite(r.value))
        throw NumericalError(std::string("non-finite ") + to_string(kind) + " loss value");
    out.value = r.value;
    out.grad = std::move(r.grad);
    return out;
}

BatchLossValue plugin_loss(const gen::GenerativeModel& model, const LossBatch& batch, Rng& rng,
                           const LossOptions& opt) {
    return evaluate_loss(LossKind::PlugIn, model, nuis::NuisanceEstimates{}, batch, rng, opt);
}

BatchLossValue iptw_loss(const gen::GenerativeModel& model, const nuis::NuisanceEstimates& nuis,
                         const LossBatch& batch, Rng& rng, const LossOptions& opt) {
    return evaluate_loss(LossKind::IPTW, model, nuis, batch, rng, opt);
}

BatchLossValue ra_loss(const gen::GenerativeModel& model, const nuis::NuisanceEstimates& nuis, const LossBatch& batch,
                       Rng& rng, const LossOptions& opt) {
    return evaluate_loss(LossKind::RA, model, nuis, batch, rng, opt);
}

BatchLossValue gdr_loss(const gen::GenerativeModel& model, const nuis::NuisanceEstimates& nuis, const LossBatch& batch,
                        Rng& rng, const LossOptions& opt) {
    return evaluate_loss(LossKind::GDR, model, nuis, batch, rng, opt);
}

EquivalenceReport iptw_equivalence_check(const gen::GenerativeModel& target, const nuis::NuisanceEstimates& nuis,
                                         const LossBatch& batch, int arm, Rng& rng, double rel_tol,
                                         const nuis::PseudoOutcomeRule* rule) {
    if (batch.v.cols() != batch.x.cols() || batch.v != batch.x)
        throw InvalidArgument("IPTW equivalence needs the conditioning input to be the full covariates");
    require(arm == 0 || arm == 1, "arm must be 0 or 1");
    const nuis::QuadratureRule quadrature;
    LossOptions opt;
    opt.arm = arm;
    opt.need_grad = true;
    opt.rule = rule ? rule : &quadrature;
    EquivalenceReport rep;
    rep.tolerance = rel_tol;
    rep.grad_gdr = gdr_loss(target, nuis, batch, rng, opt).grad;
    rep.grad_iptw = iptw_loss(target, nuis, batch, rng, opt).grad;
    const double scale = rep.grad_iptw.norm();
    const double diff = (rep.grad_gdr - rep.grad_iptw).norm();
    rep.relative_difference = scale > 0.0 ? diff / scale : std::numeric_limits<double>::infinity();
    rep.equivalent = scale > 0.0 && rep.relative_difference <= rel_tol;
    return rep;
}

}  // namespace cdpo::loss
