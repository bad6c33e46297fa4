#include <atomic>
#include <cmath>
#include <cstring>

#include <spdlog/spdlog.h>

#include "cdpo/core/error.hpp"
#include "cdpo/genmodels/model.hpp"

namespace cdpo::gen {

void TermBatch::resize(int n, int cond_dim, int outcome_dim) {
    cond.resize(n, cond_dim);
    arm.resize(n);
    y.resize(n, outcome_dim);
    weight.resize(n);
}

void GenerativeModel::set_parameters(const Vector& p) {
    if (frozen_) throw ContractViolation("parameter write on a frozen model");
    require(p.size() == params_.size(), "parameter vector has wrong size");
    params_ = p;
}

std::uint64_t GenerativeModel::parameter_hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    const auto* bytes = reinterpret_cast<const unsigned char*>(params_.data());
    for (std::size_t i = 0; i < static_cast<std::size_t>(params_.size()) * sizeof(double); ++i) {
        h ^= bytes[i];
        h *= 1099511628211ULL;
    }
    return h;
}

Vector GenerativeModel::log_density(const Matrix&, const IntVector&, const Matrix&) const {
    throw CapabilityError(std::string("the ") + to_string(family()) +
                          " family has no explicit density; log-probability is only available for CNF models");
}

Matrix GenerativeModel::sample(const Vector& cond, int arm, int count, Rng& rng) const {
    require(count > 0, "sample count must be positive");
    require(cond.size() == cond_dim(), "conditioning input has wrong dimension");
    Matrix c(count, cond_dim());
    for (int i = 0; i < count; ++i) c.row(i) = cond.transpose();
    return sample_batch(c, IntVector::Constant(count, arm), rng);
}

// ---------------------------------------------------------------- config

nlohmann::json NeuralModelConfig::to_json() const {
    nlohmann::json heads;
    heads["cnf"] = CnfHead(cnf).config_json();
    heads["cgan"] = CganHead(cgan).config_json();
    heads["cvae"] = CvaeHead(cvae).config_json();
    heads["cdm"] = CdmHead(cdm).config_json();
    return {{"family", to_string(family)},
            {"cond_dim", cond_dim},
            {"outcome_dim", outcome_dim},
            {"hidden_width", hidden_width},
            {"hidden_layers", hidden_layers},
            {"noise_x_var", noise_x_var},
            {"noise_y_var", noise_y_var},
            {"linear", linear},
            {"output_scale", output_scale},
            {"heads", heads}};
}

NeuralModelConfig NeuralModelConfig::from_json(const nlohmann::json& j) {
    NeuralModelConfig c;
    c.family = family_from_string(j.at("family").get<std::string>());
    c.cond_dim = j.at("cond_dim");
    c.outcome_dim = j.at("outcome_dim");
    c.hidden_width = j.at("hidden_width");
    c.hidden_layers = j.at("hidden_layers");
    c.noise_x_var = j.at("noise_x_var");
    c.noise_y_var = j.at("noise_y_var");
    c.linear = j.at("linear");
    c.output_scale = j.at("output_scale");
    const auto& h = j.at("heads");
    const auto& cnf = h.at("cnf");
    c.cnf = {cnf.at("outcome_dim"), cnf.at("n_knots"), cnf.at("bound"), cnf.at("ar_hidden"), cnf.at("min_bin"),
             cnf.at("min_derivative")};
    c.cgan = {h.at("cgan").at("outcome_dim"), h.at("cgan").at("hidden")};
    const auto& cv = h.at("cvae");
    c.cvae = {cv.at("outcome_dim"), cv.at("latent_dim"), cv.at("hidden"), cv.at("sample_decoder_noise")};
    const auto& cd = h.at("cdm");
    c.cdm.outcome_dim = cd.at("outcome_dim");
    c.cdm.steps = cd.at("steps");
    c.cdm.hidden = cd.at("hidden");
    c.cdm.time_dim = cd.at("time_dim");
    c.cdm.schedule = cd.at("schedule").get<std::string>() == "linear" ? NoiseSchedule::Linear : NoiseSchedule::Cosine;
    c.cdm.beta_start = cd.at("beta_start");
    c.cdm.beta_end = cd.at("beta_end");
    c.cdm.clip_box = cd.at("clip_box");
    return c;
}

Scalers Scalers::identity(int cond_dim, int outcome_dim) {
    return {Vector::Zero(cond_dim), Vector::Ones(cond_dim), Vector::Zero(outcome_dim), Vector::Ones(outcome_dim)};
}

Scalers Scalers::fit(const Matrix& cond, const Matrix& y) {
    require(cond.rows() >= 1 && y.rows() >= 1, "cannot fit scalers on an empty sample");
    auto stats = [](const Matrix& m, Vector& mean, Vector& sd) {
        mean = m.colwise().mean().transpose();
        sd.resize(m.cols());
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double var = (m.col(j).array() - mean(j)).square().mean();
            sd(j) = var > 0.0 ? std::sqrt(var) : 1.0;
        }
    };
    Scalers s;
    stats(cond, s.cond_shift, s.cond_scale);
    stats(y, s.y_shift, s.y_scale);
    return s;
}

// ---------------------------------------------------------------- neural model

namespace {

std::unique_ptr<Head> make_head(const NeuralModelConfig& cfg) {
    switch (cfg.family) {
        case Family::CNF: {
            CnfHeadConfig c = cfg.cnf;
            c.outcome_dim = cfg.outcome_dim;
            return std::make_unique<CnfHead>(c);
        }
        case Family::CGAN: {
            CganHeadConfig c = cfg.cgan;
            c.outcome_dim = cfg.outcome_dim;
            return std::make_unique<CganHead>(c);
        }
        case Family::CVAE: {
            CvaeHeadConfig c = cfg.cvae;
            c.outcome_dim = cfg.outcome_dim;
            return std::make_unique<CvaeHead>(c);
        }
        case Family::CDM: {
            CdmHeadConfig c = cfg.cdm;
            c.outcome_dim = cfg.outcome_dim;
            return std::make_unique<CdmHead>(c);
        }
        case Family::Tabular: break;
    }
    throw InvalidArgument("neural models support the cnf, cgan, cvae and cdm families");
}

std::atomic<long> g_saturation_warnings{0};

}  // namespace

NeuralGenerativeModel::NeuralGenerativeModel(const NeuralModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    require(cfg.cond_dim >= 1 && cfg.outcome_dim >= 1, "model dimensions must be positive");
    head_ = make_head(cfg);
    const Vector default_theta = head_->default_theta(rng);
    int off = 0;
    int theta_off = 0;
    for (int size : head_->theta_sizes()) {
        ConditionerConfig cc;
        cc.input_dim = cfg.cond_dim;
        cc.output_dim = size;
        cc.hidden_width = cfg.hidden_width;
        cc.hidden_layers = cfg.hidden_layers;
        cc.noise_var = cfg.noise_x_var;
        cc.linear = cfg.linear;
        conditioners_.emplace_back(cc);
        offsets_.push_back(off);
        off += conditioners_.back().num_params();
    }
    offsets_.push_back(off);
    params_ = Vector::Zero(off + head_->global_size());
    for (std::size_t c = 0; c < conditioners_.size(); ++c) {
        const int size = conditioners_[c].config().output_dim;
        conditioners_[c].init(params_.data() + offsets_[c], rng, default_theta.segment(theta_off, size),
                              cfg.output_scale);
        theta_off += size;
    }
    head_->init_globals(std::span<double>(params_.data() + globals_offset(), head_->global_size()), rng);
    scalers_ = Scalers::identity(cfg.cond_dim, cfg.outcome_dim);
}

NeuralGenerativeModel::NeuralGenerativeModel(const NeuralGenerativeModel& other)
    : GenerativeModel(other),
      cfg_(other.cfg_),
      head_(other.head_->clone()),
      conditioners_(other.conditioners_),
      offsets_(other.offsets_),
      scalers_(other.scalers_) {}

std::unique_ptr<GenerativeModel> NeuralGenerativeModel::clone() const {
    auto copy = std::make_unique<NeuralGenerativeModel>(*this);
    return copy;
}

void NeuralGenerativeModel::set_scalers(const Scalers& s) {
    if (frozen_) throw ContractViolation("scaler write on a frozen model");
    require(s.cond_shift.size() == cfg_.cond_dim && s.cond_scale.size() == cfg_.cond_dim,
            "conditioning scaler has wrong dimension");
    require(s.y_shift.size() == cfg_.outcome_dim && s.y_scale.size() == cfg_.outcome_dim,
            "outcome scaler has wrong dimension");
    require((s.cond_scale.array() > 0.0).all() && (s.y_scale.array() > 0.0).all(), "scales must be positive");
    scalers_ = s;
}

std::vector<ParamBlock> NeuralGenerativeModel::blocks() const {
    std::vector<ParamBlock> out;
    const std::vector<Direction> dirs = head_->theta_directions();
    for (int c = 0; c < num_conditioners(); ++c) {
        std::string name = "conditioner";
        if (cfg_.family == Family::CGAN) name = c == 0 ? "generator" : "discriminator";
        out.push_back({name, offsets_[static_cast<std::size_t>(c)], conditioner(c).num_params(),
                       dirs[static_cast<std::size_t>(c)]});
    }
    if (head_->global_size() > 0)
        out.push_back({"coupling", globals_offset(), head_->global_size(), head_->global_direction()});
    return out;
}

Matrix NeuralGenerativeModel::standardize_cond(const Matrix& cond) const {
    if (cond.cols() != cfg_.cond_dim)
        throw InvalidArgument("conditioning input has dimension " + std::to_string(cond.cols()) + ", expected " +
                              std::to_string(cfg_.cond_dim));
    Matrix out = cond;
    for (Eigen::Index j = 0; j < out.cols(); ++j)
        out.col(j) = (out.col(j).array() - scalers_.cond_shift(j)) / scalers_.cond_scale(j);
    return out;
}

double NeuralGenerativeModel::log_jacobian() const {
    if (cfg_.family != Family::CNF && cfg_.family != Family::CVAE) return 0.0;
    return scalers_.y_scale.array().log().sum();
}

Matrix NeuralGenerativeModel::condition(const Matrix& cond, const IntVector& arm, bool train, Rng* rng) const {
    const Matrix input = standardize_cond(cond);
    Matrix theta(cond.rows(), head_->theta_size());
    int col = 0;
    for (int c = 0; c < num_conditioners(); ++c) {
        const Conditioner& cd = conditioner(c);
        const Matrix part = cd.forward(params_.data() + conditioner_offset(c), input, arm, train, rng);
        theta.middleCols(col, part.cols()) = part;
        col += static_cast<int>(part.cols());
    }
    return theta;
}

Matrix NeuralGenerativeModel::trunk_features(const Matrix& cond, Mlp::Cache* cache) const {
    return conditioner(0).trunk(params_.data() + conditioner_offset(0), standardize_cond(cond), cache);
}

void NeuralGenerativeModel::trunk_backward(const Mlp::Cache& cache, const Matrix& grad_h, Vector& grad) const {
    require(grad.size() == params_.size(), "gradient buffer has wrong size");
    conditioner(0).trunk_backward(params_.data() + conditioner_offset(0), cache, grad_h,
                                  grad.data() + conditioner_offset(0));
}

Vector NeuralGenerativeModel::log_terms(const Matrix& cond, const IntVector& arm, const Matrix& y, Rng& rng,
                                        int n_latent) const {
    require(n_latent >= 1, "n_mc must be at least 1");
    require(y.rows() == cond.rows() && y.cols() == cfg_.outcome_dim, "outcome matrix has wrong shape");
    const Matrix theta = condition(cond, arm);
    const double* globals = params_.data() + globals_offset();
    const double shift = log_jacobian();
    if (head_->noise_size() == 0) n_latent = 1;
    Vector out(cond.rows());
    std::vector<double> ys(static_cast<std::size_t>(cfg_.outcome_dim));
    std::vector<double> noise(static_cast<std::size_t>(head_->noise_size()));
    for (Eigen::Index i = 0; i < cond.rows(); ++i) {
        for (int j = 0; j < cfg_.outcome_dim; ++j)
            ys[static_cast<std::size_t>(j)] = (y(i, j) - scalers_.y_shift(j)) / scalers_.y_scale(j);
        double acc = 0.0;
        for (int m = 0; m < n_latent; ++m) {
            head_->draw_noise(rng, noise);
            acc += head_->term(theta.row(i).data(), globals, ys.data(), noise.data());
        }
        out(i) = acc / n_latent - shift;
        if (!std::isfinite(out(i)))
            throw NumericalError(std::string("non-finite log-generative term in the ") + to_string(cfg_.family) +
                                 " head at row " + std::to_string(i));
    }
    return out;
}

ObjectiveResult NeuralGenerativeModel::objective(const TermBatch& batch, double normalizer, Rng& rng,
                                                 const ObjectiveOptions& opt) const {
    require(normalizer > 0.0, "normalizer must be positive");
    require(opt.n_latent >= 1, "n_mc must be at least 1");
    const int n = batch.rows();
    require(batch.y.rows() == n && batch.y.cols() == cfg_.outcome_dim && batch.weight.size() == n &&
                batch.arm.size() == n,
            "term batch has inconsistent shapes");
    ObjectiveResult res;
    if (opt.need_grad) res.grad = Vector::Zero(params_.size());
    if (n == 0) return res;

    const Matrix input = standardize_cond(batch.cond);
    std::vector<Conditioner::Cache> caches(conditioners_.size());
    Matrix theta(n, head_->theta_size());
    int col = 0;
    for (int c = 0; c < num_conditioners(); ++c) {
        const Matrix part = conditioner(c).forward(params_.data() + conditioner_offset(c), input, batch.arm, opt.train,
                                                   &rng, opt.need_grad ? &caches[static_cast<std::size_t>(c)] : nullptr);
        theta.middleCols(col, part.cols()) = part;
        col += static_cast<int>(part.cols());
    }

    const double* globals = params_.data() + globals_offset();
    Matrix dtheta;
    if (opt.need_grad) dtheta = Matrix::Zero(n, head_->theta_size());
    double* dglobals = opt.need_grad ? res.grad.data() + globals_offset() : nullptr;
    const double y_noise_sd = opt.train ? std::sqrt(cfg_.noise_y_var) : 0.0;
    const auto* cgan = dynamic_cast<const CganHead*>(head_.get());
    const long saturated_before = cgan ? cgan->saturation_count() : 0;

    const int n_latent = head_->noise_size() == 0 ? 1 : opt.n_latent;
    std::vector<double> ys(static_cast<std::size_t>(cfg_.outcome_dim));
    std::vector<double> noise(static_cast<std::size_t>(head_->noise_size()));
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const double w = batch.weight(i);
        if (w == 0.0) continue;
        for (int j = 0; j < cfg_.outcome_dim; ++j) {
            double v = batch.y(i, j);
            if (y_noise_sd > 0.0) v += y_noise_sd * rng.normal();
            ys[static_cast<std::size_t>(j)] = (v - scalers_.y_shift(j)) / scalers_.y_scale(j);
        }
        const double scale = w / (normalizer * n_latent);
        double acc = 0.0;
        for (int m = 0; m < n_latent; ++m) {
            head_->draw_noise(rng, noise);
            if (opt.need_grad) {
                acc += head_->term_grad(theta.row(i).data(), globals, ys.data(), noise.data(), scale,
                                        dtheta.row(i).data(), dglobals);
            } else {
                acc += head_->term(theta.row(i).data(), globals, ys.data(), noise.data());
            }
        }
        const double term = acc / n_latent - log_jacobian();
        if (!std::isfinite(term))
            throw NumericalError(std::string("non-finite log-generative term in the ") + to_string(cfg_.family) +
                                 " head at batch row " + std::to_string(i));
        total += w * term;
    }
    res.value = total / normalizer;

    if (cgan && cgan->saturation_count() > saturated_before) {
        const long k = ++g_saturation_warnings;
        if (k <= 10 || k % 1000 == 0)
            spdlog::warn("discriminator output within 1e-6 of 0 or 1 ({} saturated evaluations so far)",
                         cgan->saturation_count());
    }

    if (opt.need_grad) {
        col = 0;
        for (int c = 0; c < num_conditioners(); ++c) {
            const Conditioner& cd = conditioner(c);
            const int size = cd.config().output_dim;
            const Matrix part = dtheta.middleCols(col, size);
            cd.backward(params_.data() + conditioner_offset(c), caches[static_cast<std::size_t>(c)], part,
                        res.grad.data() + conditioner_offset(c));
            col += size;
        }
    }
    return res;
}

Vector NeuralGenerativeModel::log_density(const Matrix& cond, const IntVector& arm, const Matrix& y) const {
    if (!exact_density()) return GenerativeModel::log_density(cond, arm, y);
    Rng unused(0);
    return log_terms(cond, arm, y, unused, 1);
}

Matrix NeuralGenerativeModel::sample_batch(const Matrix& cond, const IntVector& arm, Rng& rng) const {
    const Matrix theta = condition(cond, arm);
    const double* globals = params_.data() + globals_offset();
    Matrix out(cond.rows(), cfg_.outcome_dim);
    for (Eigen::Index i = 0; i < cond.rows(); ++i) {
        head_->sample(theta.row(i).data(), globals, rng, out.row(i).data());
        for (int j = 0; j < cfg_.outcome_dim; ++j) out(i, j) = scalers_.y_shift(j) + scalers_.y_scale(j) * out(i, j);
    }
    return out;
}

std::vector<double> NeuralGenerativeModel::density_breakpoints(const Vector& cond, int arm) const {
    const auto* cnf = dynamic_cast<const CnfHead*>(head_.get());
    if (!cnf || cfg_.outcome_dim != 1) throw CapabilityError("density breakpoints need a 1-D CNF model");
    const Matrix theta = condition(cond.transpose(), IntVector::Constant(1, arm));
    std::vector<double> pts = cnf->breakpoints(theta.row(0).data());
    for (double& p : pts) p = scalers_.y_shift(0) + scalers_.y_scale(0) * p;
    return pts;
}

nlohmann::json NeuralGenerativeModel::architecture_json() const {
    auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    return {{"kind", "neural"},
            {"config", cfg_.to_json()},
            {"scalers",
             {{"cond_shift", vec(scalers_.cond_shift)},
              {"cond_scale", vec(scalers_.cond_scale)},
              {"y_shift", vec(scalers_.y_shift)},
              {"y_scale", vec(scalers_.y_scale)}}}};
}

}  // namespace cdpo::gen
