#include "cdpo/train/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "cdpo/core/error.hpp"
#include "cdpo/genmodels/model_optimizer.hpp"

namespace cdpo::train {

namespace {

void require_both_arms(const data::PODataset& ds) {
    const int treated = ds.count_arm(1);
    if (ds.size() == 0 || treated == 0 || treated == ds.size())
        throw InvalidArgument("training needs both treatment arms in the dataset");
}

}  // namespace

std::shared_ptr<const gen::GenerativeModel> freeze(std::shared_ptr<gen::GenerativeModel> model) {
    require(model != nullptr, "cannot freeze a null model");
    model->freeze();
    return model;
}

gen::NeuralModelConfig learner_model_config(const TrainConfig& cfg, int cond_dim, int outcome_dim) {
    gen::NeuralModelConfig m = cfg.stage2.model;
    m.family = cfg.family;
    m.cond_dim = cond_dim;
    m.outcome_dim = outcome_dim;
    m.linear = cfg.restriction == Restriction::Linear;
    return m;
}

bool structurally_nested(const gen::NeuralModelConfig& t, const gen::NeuralModelConfig& n) {
    if (t.family != n.family || t.outcome_dim != n.outcome_dim || n.linear) return false;
    if (!t.linear && (t.hidden_width > n.hidden_width || t.hidden_layers > n.hidden_layers)) return false;
    switch (t.family) {
        case Family::CNF: return t.cnf.n_knots <= n.cnf.n_knots && t.cnf.ar_hidden <= n.cnf.ar_hidden;
        case Family::CGAN: return t.cgan.hidden <= n.cgan.hidden;
        case Family::CVAE: return t.cvae.latent_dim <= n.cvae.latent_dim && t.cvae.hidden <= n.cvae.hidden;
        case Family::CDM: return t.cdm.steps == n.cdm.steps && t.cdm.hidden <= n.cdm.hidden;
        case Family::Tabular: return true;
    }
    return false;
}

nuis::NuisanceConfig nuisance_config(const TrainConfig& cfg, bool fit_outcome) {
    nuis::NuisanceConfig n;
    n.model = cfg.stage1.model;
    n.model.family = cfg.family;
    n.model.linear = false;
    n.optimizer = cfg.stage1.optimizer;
    n.batch_size = cfg.stage1.batch_size;
    n.epochs = cfg.stage1.epochs;
    n.clip_floor = cfg.clip_floor;
    n.fit_outcome = fit_outcome;
    n.fit_propensity = true;
    n.seed = derive_seed(cfg.seed, 1);
    return n;
}

LearnerResult fit_learner(const data::ConditioningView& view, loss::LossKind learner,
                          const nuis::NuisanceEstimates& nuisance, const gen::NeuralModelConfig& model_cfg,
                          const StageConfig& stage, std::optional<double> ema_decay, int n_mc, std::uint64_t seed,
                          const TrainHook& hook) {
    const data::PODataset& ds = view.dataset();
    require(model_cfg.cond_dim == view.dim(), "model conditioning dimension differs from the view");
    require(stage.epochs > 0 && stage.batch_size > 0, "invalid stage settings");
    Rng rng(seed);
    auto model = std::make_shared<gen::NeuralGenerativeModel>(model_cfg, rng);
    model->set_scalers(gen::Scalers::fit(view.v_rows(data::all_indices(ds.size())), ds.y));
    gen::ModelOptimizer opt(*model, stage.optimizer);
    std::optional<EMAState> ema;
    if (ema_decay) ema.emplace(model->parameters(), *ema_decay);

    loss::LossOptions lo;
    lo.n_mc = n_mc;
    gen::ObjectiveOptions oo;
    oo.train = true;
    LearnerResult res;
    res.learner = learner;
    for (int epoch = 1; epoch <= stage.epochs; ++epoch) {
        double total = 0.0;
        for (const std::vector<int>& rows : minibatches(ds.size(), stage.batch_size, rng)) {
            const loss::LossBatch batch = loss::make_loss_batch(view, rows);
            const double norm = static_cast<double>(rows.size());
            try {
                const loss::BatchLossValue terms = loss::build_loss_terms(learner, nuisance, batch, rng, lo);
                const double value = opt.update(*model, [&](const gen::GenerativeModel& m) {
                    return m.objective(terms.terms, norm, rng, oo);
                });
                if (!std::isfinite(value) || !model->parameters().allFinite())
                    throw NumericalError("non-finite loss");
                total += value * norm;
            } catch (const NumericalError& e) {
                throw NumericalError(std::string(loss::to_string(learner)) + " training diverged at epoch " +
                                     std::to_string(epoch) + ": " + e.what());
            }
            if (ema) ema_update(*ema, model->parameters());
        }
        res.history.push_back(total / ds.size());
        if (hook) hook({2, learner, epoch, res.history.back()}, model.get());
    }
    if (ema) {
        res.live = model->parameters();
        model->set_parameters(ema->shadow);
    }
    res.model = freeze(model);
    return res;
}

TrainResult train_two_stage(const data::PODataset& ds, const TrainConfig& cfg, const TrainHook& hook) {
    MultiTrainResult m = train_learners(ds, cfg, {cfg.learner}, hook);
    return {std::move(m.nuisance), std::move(m.learners.front())};
}

nuis::NuisanceEstimates fit_stage1(const data::PODataset& ds, const TrainConfig& cfg,
                                   const std::vector<loss::LossKind>& learners, const TrainHook& hook) {
    cfg.validate();
    ds.validate();
    require(!learners.empty(), "no learner requested");
    require_both_arms(ds);
    const data::ConditioningView view = data::apply_v_mask(ds, cfg.v_mask);
    const bool plugin_is_nuisance = view.is_identity() && cfg.restriction == Restriction::Full;
    bool needed = false;
    for (loss::LossKind k : learners)
        needed = needed || loss::needs_outcome_nuisance(k) || loss::needs_propensity_nuisance(k) ||
                 (k == loss::LossKind::PlugIn && plugin_is_nuisance);
    if (!needed) return {};
    nuis::EpochHook stage1_hook;
    if (hook)
        stage1_hook = [&](int epoch, const gen::GenerativeModel* m, double v) {
            hook({1, loss::LossKind::PlugIn, epoch, v}, m);
        };
    return nuis::fit_nuisance(ds, nuisance_config(cfg, true), stage1_hook);
}

LearnerResult train_learner(const data::PODataset& ds, const TrainConfig& cfg, const nuis::NuisanceEstimates& nuisance,
                            loss::LossKind learner, const TrainHook& hook) {
    const data::ConditioningView view = data::apply_v_mask(ds, cfg.v_mask);
    if (learner == loss::LossKind::PlugIn && view.is_identity() && cfg.restriction == Restriction::Full) {
        require(nuisance.has_outcome(), "the plug-in learner with V = X is the stage-1 outcome model");
        LearnerResult r;
        r.learner = learner;
        r.model = nuisance.outcome_model;
        return r;
    }
    const gen::NeuralModelConfig mc = learner_model_config(cfg, view.dim(), ds.dy());
    return fit_learner(view, learner, nuisance, mc, cfg.stage2, cfg.ema_decay, cfg.n_mc,
                       derive_seed(cfg.seed, 2, static_cast<std::uint64_t>(learner)), hook);
}

MultiTrainResult train_learners(const data::PODataset& ds, const TrainConfig& cfg,
                                const std::vector<loss::LossKind>& learners, const TrainHook& hook) {
    MultiTrainResult out;
    out.nuisance = fit_stage1(ds, cfg, learners, hook);
    for (loss::LossKind learner : learners) out.learners.push_back(train_learner(ds, cfg, out.nuisance, learner, hook));
    return out;
}

}  // namespace cdpo::train
