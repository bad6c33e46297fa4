#include "cdpo/nuisance/propensity.hpp"

#include <algorithm>
#include <cmath>

#include "cdpo/core/autodiff.hpp"
#include "cdpo/core/error.hpp"

namespace cdpo::nuis {

namespace {

double elu(double v) { return v > 0.0 ? v : std::expm1(v); }
double elu_grad(double v) { return v > 0.0 ? 1.0 : std::exp(v); }

std::vector<double> to_std(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }
Vector from_std(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())); }

}  // namespace

double clip_propensity(double p, double floor) { return std::max(p, floor); }

double bce_loss(std::span<const double> probabilities, std::span<const int> labels) {
    require(probabilities.size() == labels.size(), "probabilities and labels differ in length");
    require(!probabilities.empty(), "bce_loss needs at least one sample");
    double total = 0.0;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        const double p = probabilities[i];
        const int y = labels[i];
        require(p >= 0.0 && p <= 1.0, "probability outside [0, 1] at index " + std::to_string(i));
        require(y == 0 || y == 1, "label must be 0 or 1");
        const double q = y == 1 ? p : 1.0 - p;
        if (q <= 0.0)
            throw NumericalError("binary cross-entropy is infinite at index " + std::to_string(i) +
                                 ": probability " + std::to_string(p) + " with label " + std::to_string(y));
        total -= std::log(q);
    }
    return total / static_cast<double>(probabilities.size());
}

ConstantPropensity::ConstantPropensity(double p_treated) : p_(p_treated) {
    require(p_treated >= 0.0 && p_treated <= 1.0, "propensity must lie in [0, 1]");
}

Vector ConstantPropensity::prob_treated(const Matrix& x) const { return Vector::Constant(x.rows(), p_); }

nlohmann::json ConstantPropensity::to_json() const { return {{"kind", "constant"}, {"p_treated", p_}}; }

FunctionPropensity::FunctionPropensity(std::function<double(const Vector&)> fn) : fn_(std::move(fn)) {
    require(static_cast<bool>(fn_), "propensity function is empty");
}

Vector FunctionPropensity::prob_treated(const Matrix& x) const {
    Vector out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = fn_(x.row(i).transpose());
    return out;
}

nlohmann::json FunctionPropensity::to_json() const {
    throw CapabilityError("a function propensity cannot be serialised");
}

TablePropensity::TablePropensity(std::vector<double> p_treated) : table_(std::move(p_treated)) {
    require(!table_.empty(), "propensity table is empty");
    for (double p : table_) require(p >= 0.0 && p <= 1.0, "propensity must lie in [0, 1]");
}

Vector TablePropensity::prob_treated(const Matrix& x) const {
    Vector out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const int k = static_cast<int>(std::lround(x(i, 0)));
        require(k >= 0 && k < static_cast<int>(table_.size()), "covariate index outside the propensity table");
        out(i) = table_[static_cast<std::size_t>(k)];
    }
    return out;
}

nlohmann::json TablePropensity::to_json() const { return {{"kind", "table"}, {"p_treated", table_}}; }

NeuralPropensity::NeuralPropensity(std::shared_ptr<const gen::NeuralGenerativeModel> outcome, Rng& rng)
    : outcome_(std::move(outcome)) {
    require(outcome_ != nullptr, "shared-trunk propensity needs an outcome model");
    const int f = outcome_->trunk_dim();
    params_ = Vector::Zero(f + 1);
    const double bound = 1.0 / std::sqrt(static_cast<double>(f));
    for (int i = 0; i < f; ++i) params_(i) = bound * (2.0 * rng.uniform() - 1.0);
}

NeuralPropensity::NeuralPropensity(int input_dim, int hidden_width, int hidden_layers, Rng& rng)
    : hidden_width_(hidden_width), hidden_layers_(hidden_layers) {
    require(input_dim >= 1 && hidden_width >= 1 && hidden_layers >= 1, "invalid propensity network shape");
    net_ = gen::Mlp(input_dim, std::vector<int>(static_cast<std::size_t>(hidden_layers - 1), hidden_width), hidden_width);
    params_ = Vector::Zero(net_.num_params() + hidden_width + 1);
    net_.init(params_.data(), rng);
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_width));
    for (int i = 0; i < hidden_width; ++i) params_(head_offset() + i) = bound * (2.0 * rng.uniform() - 1.0);
    shift_ = Vector::Zero(input_dim);
    scale_ = Vector::Ones(input_dim);
}

int NeuralPropensity::feature_dim() const { return outcome_ ? outcome_->trunk_dim() : hidden_width_; }

void NeuralPropensity::set_parameters(const Vector& p) {
    require(p.size() == params_.size(), "propensity parameter vector has wrong size");
    params_ = p;
}

void NeuralPropensity::set_standardizer(const Vector& shift, const Vector& scale) {
    require(!outcome_, "a shared-trunk propensity uses the outcome model's scalers");
    require(shift.size() == shift_.size() && scale.size() == scale_.size(), "standardiser has wrong dimension");
    require((scale.array() > 0.0).all(), "scales must be positive");
    shift_ = shift;
    scale_ = scale;
}

Matrix NeuralPropensity::features(const Matrix& x, gen::Mlp::Cache* cache) const {
    if (outcome_) return outcome_->trunk_features(x, cache);
    if (x.cols() != shift_.size())
        throw InvalidArgument("propensity input has dimension " + std::to_string(x.cols()) + ", expected " +
                              std::to_string(shift_.size()));
    Matrix z = x;
    for (Eigen::Index j = 0; j < z.cols(); ++j) z.col(j) = (z.col(j).array() - shift_(j)) / scale_(j);
    return net_.forward(params_.data(), z, cache).unaryExpr(&elu);
}

Vector NeuralPropensity::logits(const Matrix& x) const {
    const Matrix f = features(x, nullptr);
    const int h = head_offset();
    return f * params_.segment(h, feature_dim()) + Vector::Constant(x.rows(), params_(h + feature_dim()));
}

Vector NeuralPropensity::prob_treated(const Matrix& x) const {
    return logits(x).unaryExpr([](double z) { return math::sigmoid(z); });
}

NeuralPropensity::Gradient NeuralPropensity::bce_gradient(const Matrix& x, const IntVector& labels) const {
    require(labels.size() == x.rows() && x.rows() > 0, "labels must match a nonempty batch");
    gen::Mlp::Cache cache;
    const Matrix f = features(x, &cache);
    const int h = head_offset();
    const int fd = feature_dim();
    const Vector z = f * params_.segment(h, fd) + Vector::Constant(x.rows(), params_(h + fd));
    const double n = static_cast<double>(x.rows());
    Gradient g;
    Vector dz(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        g.loss += math::softplus(z(i)) - labels(i) * z(i);
        dz(i) = (math::sigmoid(z(i)) - labels(i)) / n;
    }
    g.loss /= n;
    g.own = Vector::Zero(params_.size());
    g.own.segment(h, fd) = f.transpose() * dz;
    g.own(h + fd) = dz.sum();
    Matrix df = dz * params_.segment(h, fd).transpose();
    if (outcome_) {
        g.trunk = Vector::Zero(outcome_->num_params());
        outcome_->trunk_backward(cache, df, g.trunk);
    } else {
        df.array() *= cache.pre.back().unaryExpr(&elu_grad).array();
        net_.backward(params_.data(), cache, df, g.own.data());
    }
    return g;
}

nlohmann::json NeuralPropensity::to_json() const {
    nlohmann::json j = {{"kind", "neural"}, {"shared_trunk", shares_trunk()}, {"params", to_std(params_)}};
    if (!outcome_) {
        j["input_dim"] = shift_.size();
        j["hidden_width"] = hidden_width_;
        j["hidden_layers"] = hidden_layers_;
        j["shift"] = to_std(shift_);
        j["scale"] = to_std(scale_);
    }
    return j;
}

std::unique_ptr<NeuralPropensity> NeuralPropensity::from_json(
    const nlohmann::json& j, std::shared_ptr<const gen::NeuralGenerativeModel> outcome) {
    if (j.at("kind") != "neural") throw SchemaError("propensity record is not a neural propensity");
    Rng unused(0);
    std::unique_ptr<NeuralPropensity> p;
    if (j.at("shared_trunk").get<bool>()) {
        if (!outcome) throw SchemaError("shared-trunk propensity record needs its outcome model");
        p = std::make_unique<NeuralPropensity>(std::move(outcome), unused);
    } else {
        p = std::make_unique<NeuralPropensity>(j.at("input_dim").get<int>(), j.at("hidden_width").get<int>(),
                                               j.at("hidden_layers").get<int>(), unused);
        p->set_standardizer(from_std(j.at("shift").get<std::vector<double>>()),
                            from_std(j.at("scale").get<std::vector<double>>()));
    }
    const Vector params = from_std(j.at("params").get<std::vector<double>>());
    if (params.size() != p->params_.size()) throw SchemaError("propensity parameter count mismatch");
    p->params_ = params;
    return p;
}

}  // namespace cdpo::nuis
