#pragma once

#include "cdpo/genmodels/mlp.hpp"

namespace cdpo::gen {

struct ConditionerConfig {
    int input_dim = 1;
    int output_dim = 1;
    int hidden_width = 15;
    int hidden_layers = 1;
    double noise_var = 0.0;  // variance of the Gaussian noise added after FC1 in train mode
    bool linear = false;     // single affine map [input, a] -> theta
};

/// Hypernetwork mapping (conditioning input, treatment) to head parameters.
///
/// Full form: h = FC1(input), h += noise (train mode), theta = FC2([h, a]).
/// Both FC blocks have `hidden_layers` ELU layers of width `hidden_width`.
/// Linear form: theta = W [input, a] + b.
class Conditioner {
public:
    Conditioner() = default;
    explicit Conditioner(const ConditionerConfig& cfg);

    const ConditionerConfig& config() const { return cfg_; }
    int num_params() const { return fc1_params_ + fc2_.num_params(); }
    int fc1_params() const { return fc1_params_; }
    int fc2_offset() const { return fc1_params_; }
    const Mlp& fc1() const { return fc1_; }
    const Mlp& fc2() const { return fc2_; }
    bool linear() const { return cfg_.linear; }

    struct Cache {
        Mlp::Cache fc1;
        Mlp::Cache fc2;
    };

    /// rng is required when train is true and noise_var > 0.
    Matrix forward(const double* params, const Matrix& input, const IntVector& arm, bool train, Rng* rng,
                   Cache* cache = nullptr) const;
    void backward(const double* params, const Cache& cache, const Matrix& grad_theta, double* grad_params) const;

    /// Noise-free shared representation: ELU(FC1(input)) in the full form,
    /// the input itself in the linear form.
    int trunk_dim() const { return cfg_.linear ? cfg_.input_dim : cfg_.hidden_width; }
    Matrix trunk(const double* params, const Matrix& input, Mlp::Cache* cache = nullptr) const;
    void trunk_backward(const double* params, const Mlp::Cache& cache, const Matrix& grad_h, double* grad_params) const;

    /// Standard initialisation; the output bias is set to `output_bias` and
    /// output weights are scaled by `output_scale`.
    void init(double* params, Rng& rng, const Vector& output_bias, double output_scale) const;

private:
    ConditionerConfig cfg_;
    Mlp fc1_;
    Mlp fc2_;
    int fc1_params_ = 0;
};

}  // namespace cdpo::gen
