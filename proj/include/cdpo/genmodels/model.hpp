#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdpo/core/rng.hpp"
#include "cdpo/core/types.hpp"
#include "cdpo/genmodels/conditioner.hpp"
#include "cdpo/genmodels/heads.hpp"

namespace cdpo::gen {

struct ParamBlock {
    std::string name;
    int offset = 0;
    int size = 0;
    Direction direction = Direction::Maximize;
};

/// Rows entering a weighted sum of log-generative terms:
/// value = (1 / normalizer) * sum_i weight_i * term(y_i | cond_i, arm_i).
struct TermBatch {
    Matrix cond;
    IntVector arm;
    Matrix y;
    Vector weight;

    int rows() const { return static_cast<int>(cond.rows()); }
    void resize(int n, int cond_dim, int outcome_dim);
};

struct ObjectiveOptions {
    bool train = false;      // enables conditioner and outcome noise regularisation
    bool need_grad = true;
    int n_latent = 1;        // latent draws averaged inside each term
};

struct ObjectiveResult {
    double value = 0.0;
    Vector grad;             // d value / d parameters (empty without need_grad)
};

/// Conditional generative model over outcomes given (conditioning input, arm).
/// One model serves both treatment arms.
class GenerativeModel {
public:
    virtual ~GenerativeModel() = default;

    virtual Family family() const = 0;
    virtual int cond_dim() const = 0;
    virtual int outcome_dim() const = 0;
    virtual bool exact_density() const = 0;
    virtual std::vector<ParamBlock> blocks() const = 0;

    int num_params() const { return static_cast<int>(params_.size()); }
    const Vector& parameters() const { return params_; }
    /// Throws ContractViolation on a frozen model.
    void set_parameters(const Vector& p);
    void freeze() { frozen_ = true; }
    bool frozen() const { return frozen_; }
    /// FNV-1a over the parameter bytes.
    std::uint64_t parameter_hash() const;

    /// Per-row term averaged over n_latent draws, evaluation mode.
    virtual Vector log_terms(const Matrix& cond, const IntVector& arm, const Matrix& y, Rng& rng,
                             int n_latent = 1) const = 0;
    virtual ObjectiveResult objective(const TermBatch& batch, double normalizer, Rng& rng,
                                      const ObjectiveOptions& opt) const = 0;
    /// Exact log-density; throws CapabilityError for implicit-density families.
    virtual Vector log_density(const Matrix& cond, const IntVector& arm, const Matrix& y) const;
    /// One draw per row.
    virtual Matrix sample_batch(const Matrix& cond, const IntVector& arm, Rng& rng) const = 0;
    /// `count` draws at a single conditioning point.
    Matrix sample(const Vector& cond, int arm, int count, Rng& rng) const;

    virtual std::unique_ptr<GenerativeModel> clone() const = 0;
    /// Architecture plus fixed preprocessing, enough to rebuild the model.
    virtual nlohmann::json architecture_json() const = 0;

protected:
    Vector params_;
    bool frozen_ = false;
};

struct NeuralModelConfig {
    Family family = Family::CNF;
    int cond_dim = 1;
    int outcome_dim = 1;
    int hidden_width = 15;
    int hidden_layers = 1;
    double noise_x_var = 0.0;
    double noise_y_var = 0.0;
    bool linear = false;
    double output_scale = 0.1;
    CnfHeadConfig cnf;
    CganHeadConfig cgan;
    CvaeHeadConfig cvae;
    CdmHeadConfig cdm;

    nlohmann::json to_json() const;
    static NeuralModelConfig from_json(const nlohmann::json& j);
};

/// Affine standardisation applied to conditioning inputs and outcomes.
struct Scalers {
    Vector cond_shift, cond_scale, y_shift, y_scale;

    static Scalers identity(int cond_dim, int outcome_dim);
    /// Column means and standard deviations (scale 1 where the std is 0).
    static Scalers fit(const Matrix& cond, const Matrix& y);
};

/// Hypernetwork-conditioned generative head (CNF, CGAN, CVAE or CDM).
/// Parameter layout: one block per conditioner, then the head globals.
class NeuralGenerativeModel : public GenerativeModel {
public:
    NeuralGenerativeModel(const NeuralModelConfig& cfg, Rng& rng);
    NeuralGenerativeModel(const NeuralGenerativeModel& other);
    NeuralGenerativeModel& operator=(const NeuralGenerativeModel&) = delete;

    const NeuralModelConfig& config() const { return cfg_; }
    const Head& head() const { return *head_; }
    int num_conditioners() const { return static_cast<int>(conditioners_.size()); }
    const Conditioner& conditioner(int c) const { return conditioners_[static_cast<std::size_t>(c)]; }
    int conditioner_offset(int c) const { return offsets_[static_cast<std::size_t>(c)]; }
    int globals_offset() const { return offsets_.back(); }
    const Scalers& scalers() const { return scalers_; }
    void set_scalers(const Scalers& s);

    Family family() const override { return cfg_.family; }
    int cond_dim() const override { return cfg_.cond_dim; }
    int outcome_dim() const override { return cfg_.outcome_dim; }
    bool exact_density() const override { return head_->exact_density(); }
    std::vector<ParamBlock> blocks() const override;

    /// Head parameters theta for each row (standardised input inside).
    Matrix condition(const Matrix& cond, const IntVector& arm, bool train = false, Rng* rng = nullptr) const;

    Vector log_terms(const Matrix& cond, const IntVector& arm, const Matrix& y, Rng& rng,
                     int n_latent = 1) const override;
    ObjectiveResult objective(const TermBatch& batch, double normalizer, Rng& rng,
                              const ObjectiveOptions& opt) const override;
    Vector log_density(const Matrix& cond, const IntVector& arm, const Matrix& y) const override;
    Matrix sample_batch(const Matrix& cond, const IntVector& arm, Rng& rng) const override;

    /// Shared trunk features of the first conditioner on standardised input;
    /// lets an auxiliary head (e.g. a propensity classifier) share it.
    int trunk_dim() const { return conditioners_.front().trunk_dim(); }
    Direction trunk_direction() const { return head_->theta_directions().front(); }
    Matrix trunk_features(const Matrix& cond, Mlp::Cache* cache = nullptr) const;
    /// Accumulates d/dparams of sum(grad_h .* features) into grad (full parameter size).
    void trunk_backward(const Mlp::Cache& cache, const Matrix& grad_h, Vector& grad) const;

    /// Outcome-space points between which a 1-D CNF density is smooth.
    std::vector<double> density_breakpoints(const Vector& cond, int arm) const;

    std::unique_ptr<GenerativeModel> clone() const override;
    nlohmann::json architecture_json() const override;

private:
    Matrix standardize_cond(const Matrix& cond) const;
    double log_jacobian() const;

    NeuralModelConfig cfg_;
    std::unique_ptr<Head> head_;
    std::vector<Conditioner> conditioners_;
    std::vector<int> offsets_;  // conditioner offsets followed by the globals offset
    Scalers scalers_;
};

/// Categorical model on index-valued outcomes given an index-valued
/// covariate: parameters are logits per (x, a, y).
class TabularModel : public GenerativeModel {
public:
    TabularModel(int nx, int ny);
    /// Sets logits to log(probabilities); table indexed (x * 2 + a) * ny + y.
    static TabularModel from_probabilities(int nx, int ny, const std::vector<double>& table);

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    double probability(int x, int a, int y) const;

    Family family() const override { return Family::Tabular; }
    int cond_dim() const override { return 1; }
    int outcome_dim() const override { return 1; }
    bool exact_density() const override { return true; }
    std::vector<ParamBlock> blocks() const override;

    Vector log_terms(const Matrix& cond, const IntVector& arm, const Matrix& y, Rng& rng,
                     int n_latent = 1) const override;
    ObjectiveResult objective(const TermBatch& batch, double normalizer, Rng& rng,
                              const ObjectiveOptions& opt) const override;
    Vector log_density(const Matrix& cond, const IntVector& arm, const Matrix& y) const override;
    Matrix sample_batch(const Matrix& cond, const IntVector& arm, Rng& rng) const override;

    std::unique_ptr<GenerativeModel> clone() const override { return std::make_unique<TabularModel>(*this); }
    nlohmann::json architecture_json() const override;

private:
    int index(const Matrix& cond, const IntVector& arm, int row) const;

    int nx_;
    int ny_;
};

/// Builds an untrained model from architecture_json output (parameters are
/// freshly initialised; use set_parameters to restore).
std::unique_ptr<GenerativeModel> model_from_architecture(const nlohmann::json& arch, Rng& rng);

}  // namespace cdpo::gen
