#pragma once

#include <vector>

#include "cdpo/core/rng.hpp"
#include "cdpo/core/types.hpp"

namespace cdpo::gen {

/// Batched fully-connected network with ELU hidden layers and a linear output.
/// Parameters live in an external flat buffer; per layer the row-major weight
/// matrix (out x in) is followed by the bias.
class Mlp {
public:
    Mlp() = default;
    Mlp(int input_dim, std::vector<int> hidden, int output_dim);

    int input_dim() const { return dims_.front(); }
    int output_dim() const { return dims_.back(); }
    int num_layers() const { return static_cast<int>(dims_.size()) - 1; }
    int num_params() const { return num_params_; }
    int layer_in(int l) const { return dims_[static_cast<std::size_t>(l)]; }
    int layer_out(int l) const { return dims_[static_cast<std::size_t>(l) + 1]; }
    int weight_offset(int l) const { return offsets_[static_cast<std::size_t>(l)]; }
    int bias_offset(int l) const { return weight_offset(l) + layer_in(l) * layer_out(l); }

    struct Cache {
        std::vector<Matrix> inputs;  // input of every layer
        std::vector<Matrix> pre;     // pre-activation of every layer
    };

    Matrix forward(const double* params, const Matrix& input, Cache* cache = nullptr) const;
    /// Accumulates parameter gradients into grad_params and returns dL/dinput.
    Matrix backward(const double* params, const Cache& cache, const Matrix& grad_output, double* grad_params) const;

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases; the output
    /// layer weights are further multiplied by output_scale.
    void init(double* params, Rng& rng, double output_scale = 1.0) const;

private:
    std::vector<int> dims_;
    std::vector<int> offsets_;
    int num_params_ = 0;
};

}  // namespace cdpo::gen
