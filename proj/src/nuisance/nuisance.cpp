#include "cdpo/nuisance/nuisance.hpp"

#include <cmath>
#include <string>

#include "cdpo/core/error.hpp"
#include "cdpo/genmodels/checkpoint.hpp"
#include "cdpo/genmodels/model_optimizer.hpp"

namespace cdpo::nuis {

Vector NuisanceEstimates::raw_propensity(const Matrix& x, const IntVector& arm) const {
    if (!propensity_model) throw ContractViolation("propensity nuisance is not fitted");
    require(arm.size() == x.rows(), "arm vector length must match the batch");
    Vector p = propensity_model->prob_treated(x);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        require(arm(i) == 0 || arm(i) == 1, "treatment must be 0 or 1");
        if (arm(i) == 0) p(i) = 1.0 - p(i);
    }
    return p;
}

double NuisanceEstimates::raw_propensity(const Vector& x, int arm) const {
    return raw_propensity(Matrix(x.transpose()), IntVector::Constant(1, arm))(0);
}

Vector NuisanceEstimates::predict_propensity(const Matrix& x, const IntVector& arm) const {
    Vector p = raw_propensity(x, arm);
    for (double& v : p) v = clip_propensity(v, clip_floor);
    return p;
}

double NuisanceEstimates::predict_propensity(const Vector& x, int arm) const {
    return clip_propensity(raw_propensity(x, arm), clip_floor);
}

Matrix NuisanceEstimates::sample_pseudo_outcome(const Vector& x, int arm, int count, Rng& rng) const {
    if (!outcome_model) throw ContractViolation("outcome nuisance is not fitted");
    require(count >= 0, "draw count must be nonnegative");
    if (count == 0) return Matrix(0, outcome_model->outcome_dim());
    return outcome_model->sample(x, arm, count, rng);
}

void NuisanceConfig::validate() const {
    require(epochs >= 1, "stage-1 epochs must be positive");
    require(batch_size >= 1, "stage-1 batch size must be positive");
    require(n_latent >= 1, "n_latent must be at least 1");
    require(clip_floor > 0.0 && clip_floor <= 1.0, "clip floor must lie in (0, 1]");
    require(fit_outcome || fit_propensity, "nothing to fit");
}

namespace {

void require_both_arms(const data::PODataset& ds) {
    require(ds.size() > 0, "nuisance fitting needs a nonempty dataset");
    const int treated = ds.count_arm(1);
    if (treated == 0 || treated == ds.size())
        throw InvalidArgument("nuisance fitting needs both treatment arms (found only arm " +
                              std::to_string(treated == 0 ? 0 : 1) + ")");
}

Matrix gather(const Matrix& m, const std::vector<int>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(rows[k]);
    return out;
}

IntVector gather(const IntVector& v, const std::vector<int>& rows) {
    IntVector out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) out(static_cast<Eigen::Index>(k)) = v(rows[k]);
    return out;
}

[[noreturn]] void diverged(int epoch, const std::string& what) {
    throw NumericalError("stage-1 training diverged at epoch " + std::to_string(epoch) + ": " + what);
}

}  // namespace

NuisanceEstimates fit_nuisance(const data::PODataset& ds, const NuisanceConfig& cfg, const EpochHook& hook) {
    cfg.validate();
    ds.validate();
    require_both_arms(ds);
    Rng rng(derive_seed(cfg.seed, 0x5174));
    const gen::Scalers scalers = cfg.standardize ? gen::Scalers::fit(ds.x, ds.y)
                                            : gen::Scalers::identity(ds.dx(), ds.dy());

    std::shared_ptr<gen::NeuralGenerativeModel> model;
    std::unique_ptr<gen::ModelOptimizer> model_opt;
    if (cfg.fit_outcome) {
        gen::NeuralModelConfig mc = cfg.model;
        mc.cond_dim = ds.dx();
        mc.outcome_dim = ds.dy();
        model = std::make_shared<gen::NeuralGenerativeModel>(mc, rng);
        model->set_scalers(scalers);
        model_opt = std::make_unique<gen::ModelOptimizer>(*model, cfg.optimizer);
    }
    std::shared_ptr<NeuralPropensity> prop;
    std::unique_ptr<Optimizer> prop_opt;
    if (cfg.fit_propensity) {
        if (model) {
            prop = std::make_shared<NeuralPropensity>(model, rng);
        } else {
            prop = std::make_shared<NeuralPropensity>(ds.dx(), cfg.model.hidden_width, cfg.model.hidden_layers, rng);
            prop->set_standardizer(scalers.cond_shift, scalers.cond_scale);
        }
        prop_opt = std::make_unique<Optimizer>(cfg.optimizer, static_cast<int>(prop->parameters().size()));
    }

    gen::ObjectiveOptions opt;
    opt.train = true;
    opt.n_latent = cfg.n_latent;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double total = 0.0;
        int seen = 0;
        for (const std::vector<int>& rows : minibatches(ds.size(), cfg.batch_size, rng)) {
            const Matrix xb = gather(ds.x, rows);
            const IntVector ab = gather(ds.a, rows);
            Vector trunk_grad;
            if (prop) {
                NeuralPropensity::Gradient g = prop->bce_gradient(xb, ab);
                if (!std::isfinite(g.loss)) diverged(epoch, "non-finite propensity loss");
                Vector p = prop->parameters();
                prop_opt->step(p, g.own);
                prop->set_parameters(p);
                trunk_grad = std::move(g.trunk);
                if (!model) total += g.loss * static_cast<double>(rows.size());
            }
            if (model) {
                gen::TermBatch tb;
                tb.cond = xb;
                tb.arm = ab;
                tb.y = gather(ds.y, rows);
                tb.weight = Vector::Ones(static_cast<Eigen::Index>(rows.size()));
                const double norm = static_cast<double>(rows.size());
                auto eval = [&](const gen::GenerativeModel& m) { return m.objective(tb, norm, rng, opt); };
                double value = 0.0;
                try {
                    value = model_opt->update(*model, eval, trunk_grad.size() > 0 ? &trunk_grad : nullptr);
                } catch (const NumericalError& e) {
                    diverged(epoch, e.what());
                }
                if (!std::isfinite(value) || !model->parameters().allFinite())
                    diverged(epoch, "non-finite plug-in objective");
                total += value * norm;
            }
            seen += static_cast<int>(rows.size());
        }
        if (hook) hook(epoch, model.get(), total / seen);
    }

    NuisanceEstimates est;
    est.clip_floor = cfg.clip_floor;
    if (model) {
        model->freeze();
        est.outcome_model = model;
    }
    est.propensity_model = prop;
    return est;
}

NuisanceEstimates fit_tabular_nuisance(const data::PODataset& ds, int nx, int ny, double smoothing) {
    require(ds.dx() == 1 && ds.dy() == 1, "tabular nuisances need index-valued x and y");
    require(smoothing > 0.0, "smoothing must be positive");
    require_both_arms(ds);
    std::vector<double> counts(static_cast<std::size_t>(nx * 2 * ny), 0.0);
    std::vector<double> xa(static_cast<std::size_t>(nx * 2), 0.0);
    for (int i = 0; i < ds.size(); ++i) {
        const int x = static_cast<int>(std::lround(ds.x(i, 0)));
        const int y = static_cast<int>(std::lround(ds.y(i, 0)));
        const int a = ds.a(i);
        require(x >= 0 && x < nx && y >= 0 && y < ny, "toy sample outside the declared support at row " +
                                                          std::to_string(i));
        counts[static_cast<std::size_t>((x * 2 + a) * ny + y)] += 1.0;
        xa[static_cast<std::size_t>(x * 2 + a)] += 1.0;
    }
    std::vector<double> table(counts.size());
    for (int c = 0; c < nx * 2; ++c) {
        const double total = xa[static_cast<std::size_t>(c)];
        for (int y = 0; y < ny; ++y) {
            const std::size_t k = static_cast<std::size_t>(c * ny + y);
            table[k] = total > 0.0 ? (counts[k] + smoothing) / (total + ny * smoothing) : 1.0 / ny;
        }
    }
    std::vector<double> pi1(static_cast<std::size_t>(nx));
    for (int x = 0; x < nx; ++x) {
        const double n0 = xa[static_cast<std::size_t>(x * 2)], n1 = xa[static_cast<std::size_t>(x * 2 + 1)];
        pi1[static_cast<std::size_t>(x)] = n0 + n1 > 0.0 ? n1 / (n0 + n1) : 0.5;
    }
    auto model = std::make_shared<gen::TabularModel>(gen::TabularModel::from_probabilities(nx, ny, table));
    model->freeze();
    NuisanceEstimates est;
    est.outcome_model = model;
    est.propensity_model = std::make_shared<TablePropensity>(std::move(pi1));
    return est;
}

nlohmann::json nuisance_to_json(const NuisanceEstimates& est) {
    nlohmann::json j = {{"schema_version", gen::kCheckpointSchemaVersion}, {"clip_floor", est.clip_floor}};
    j["outcome"] = est.outcome_model ? gen::checkpoint_to_json(*est.outcome_model) : nlohmann::json(nullptr);
    j["propensity"] = est.propensity_model ? est.propensity_model->to_json() : nlohmann::json(nullptr);
    return j;
}

NuisanceEstimates nuisance_from_json(const nlohmann::json& j) {
    if (!j.contains("schema_version") || j.at("schema_version") != gen::kCheckpointSchemaVersion)
        throw SchemaError("unsupported nuisance checkpoint version");
    NuisanceEstimates est;
    est.clip_floor = j.at("clip_floor").get<double>();
    std::shared_ptr<gen::GenerativeModel> outcome;
    if (!j.at("outcome").is_null()) {
        outcome = std::shared_ptr<gen::GenerativeModel>(gen::checkpoint_from_json(j.at("outcome")).model.release());
        outcome->freeze();
        est.outcome_model = outcome;
    }
    const nlohmann::json& p = j.at("propensity");
    if (!p.is_null()) {
        const std::string kind = p.at("kind");
        if (kind == "constant") {
            est.propensity_model = std::make_shared<ConstantPropensity>(p.at("p_treated").get<double>());
        } else if (kind == "table") {
            est.propensity_model = std::make_shared<TablePropensity>(p.at("p_treated").get<std::vector<double>>());
        } else if (kind == "neural") {
            auto neural = std::dynamic_pointer_cast<const gen::NeuralGenerativeModel>(est.outcome_model);
            est.propensity_model = NeuralPropensity::from_json(p, neural);
        } else {
            throw SchemaError("unknown propensity kind '" + kind + "'");
        }
    }
    return est;
}

}  // namespace cdpo::nuis
