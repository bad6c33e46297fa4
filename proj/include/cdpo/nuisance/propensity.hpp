#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdpo/core/rng.hpp"
#include "cdpo/core/types.hpp"
#include "cdpo/genmodels/mlp.hpp"
#include "cdpo/genmodels/model.hpp"

namespace cdpo::nuis {

/// max(p, floor). Idempotent and the identity on values >= floor.
double clip_propensity(double p, double floor);

/// Mean binary cross-entropy. Probabilities must lie in [0, 1]; an exact 0 or
/// 1 paired with the opposite label raises NumericalError.
double bce_loss(std::span<const double> probabilities, std::span<const int> labels);

/// Classifier x -> P(A = 1 | x), before clipping.
class PropensityModel {
public:
    virtual ~PropensityModel() = default;
    virtual std::string kind() const = 0;
    virtual Vector prob_treated(const Matrix& x) const = 0;
    virtual nlohmann::json to_json() const = 0;
    virtual std::unique_ptr<PropensityModel> clone() const = 0;
};

class ConstantPropensity : public PropensityModel {
public:
    explicit ConstantPropensity(double p_treated);
    std::string kind() const override { return "constant"; }
    Vector prob_treated(const Matrix& x) const override;
    nlohmann::json to_json() const override;
    std::unique_ptr<PropensityModel> clone() const override { return std::make_unique<ConstantPropensity>(*this); }

private:
    double p_;
};

/// Wraps a known function (true propensities in tests and oracles). Not serialisable.
class FunctionPropensity : public PropensityModel {
public:
    explicit FunctionPropensity(std::function<double(const Vector&)> fn);
    std::string kind() const override { return "function"; }
    Vector prob_treated(const Matrix& x) const override;
    nlohmann::json to_json() const override;
    std::unique_ptr<PropensityModel> clone() const override { return std::make_unique<FunctionPropensity>(*this); }

private:
    std::function<double(const Vector&)> fn_;
};

/// Lookup table over an index-valued covariate in column 0.
class TablePropensity : public PropensityModel {
public:
    explicit TablePropensity(std::vector<double> p_treated);
    std::string kind() const override { return "table"; }
    const std::vector<double>& table() const { return table_; }
    Vector prob_treated(const Matrix& x) const override;
    nlohmann::json to_json() const override;
    std::unique_ptr<PropensityModel> clone() const override { return std::make_unique<TablePropensity>(*this); }

private:
    std::vector<double> table_;
};

/// Logistic head on a feature map. Features come either from the trunk of a
/// neural outcome model (shared representation) or from an own MLP on
/// standardised covariates. Head parameters: weights then bias.
class NeuralPropensity : public PropensityModel {
public:
    /// Shares the first conditioner trunk of `outcome`.
    NeuralPropensity(std::shared_ptr<const gen::NeuralGenerativeModel> outcome, Rng& rng);
    /// Standalone feature MLP with `hidden_layers` ELU layers of `hidden_width`.
    NeuralPropensity(int input_dim, int hidden_width, int hidden_layers, Rng& rng);

    std::string kind() const override { return "neural"; }
    bool shares_trunk() const { return outcome_ != nullptr; }
    int feature_dim() const;
    /// Own parameters: standalone feature MLP (if any) followed by the head.
    const Vector& parameters() const { return params_; }
    void set_parameters(const Vector& p);
    void set_standardizer(const Vector& shift, const Vector& scale);

    Vector logits(const Matrix& x) const;
    Vector prob_treated(const Matrix& x) const override;

    struct Gradient {
        double loss = 0.0;
        Vector own;    // d BCE / d own parameters
        Vector trunk;  // d BCE / d outcome-model parameters (shared trunk only)
    };
    /// Mean BCE on (x, labels) and its gradients.
    Gradient bce_gradient(const Matrix& x, const IntVector& labels) const;

    nlohmann::json to_json() const override;
    std::unique_ptr<PropensityModel> clone() const override { return std::make_unique<NeuralPropensity>(*this); }
    /// Rebuilds a standalone propensity; shared-trunk models need their outcome model.
    static std::unique_ptr<NeuralPropensity> from_json(const nlohmann::json& j,
                                                       std::shared_ptr<const gen::NeuralGenerativeModel> outcome);

private:
    NeuralPropensity() = default;
    Matrix features(const Matrix& x, gen::Mlp::Cache* cache) const;
    int head_offset() const { return static_cast<int>(params_.size()) - feature_dim() - 1; }

    std::shared_ptr<const gen::NeuralGenerativeModel> outcome_;
    gen::Mlp net_;  // standalone feature map, output already passed through ELU
    int hidden_width_ = 0;
    int hidden_layers_ = 0;
    Vector shift_, scale_;
    Vector params_;
};

}  // namespace cdpo::nuis
