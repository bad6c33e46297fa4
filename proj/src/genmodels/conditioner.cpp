#include "cdpo/genmodels/conditioner.hpp"

#include <cmath>

#include "cdpo/core/error.hpp"

namespace cdpo::gen {

Conditioner::Conditioner(const ConditionerConfig& cfg) : cfg_(cfg) {
    require(cfg.input_dim >= 1, "conditioner input dimension must be positive");
    require(cfg.output_dim >= 1, "conditioner output dimension must be positive");
    require(cfg.noise_var >= 0.0, "noise variance must be nonnegative");
    if (cfg.linear) {
        fc2_ = Mlp(cfg.input_dim + 1, {}, cfg.output_dim);
        fc1_params_ = 0;
        return;
    }
    require(cfg.hidden_layers >= 1 && cfg.hidden_width >= 1, "conditioner needs at least one hidden layer");
    std::vector<int> fc1_hidden(static_cast<std::size_t>(cfg.hidden_layers - 1), cfg.hidden_width);
    fc1_ = Mlp(cfg.input_dim, fc1_hidden, cfg.hidden_width);
    fc1_params_ = fc1_.num_params();
    std::vector<int> fc2_hidden(static_cast<std::size_t>(cfg.hidden_layers), cfg.hidden_width);
    fc2_ = Mlp(cfg.hidden_width + 1, fc2_hidden, cfg.output_dim);
}

Matrix Conditioner::forward(const double* params, const Matrix& input, const IntVector& arm, bool train, Rng* rng,
                            Cache* cache) const {
    if (input.cols() != cfg_.input_dim)
        throw InvalidArgument("conditioning input has dimension " + std::to_string(input.cols()) + ", expected " +
                              std::to_string(cfg_.input_dim));
    require(arm.size() == input.rows(), "arm vector length must match the batch");
    const Eigen::Index n = input.rows();
    Matrix fc2_in;
    if (cfg_.linear) {
        fc2_in.resize(n, cfg_.input_dim + 1);
        fc2_in.leftCols(cfg_.input_dim) = input;
    } else {
        Matrix h = trunk(params, input, cache ? &cache->fc1 : nullptr);
        if (train && cfg_.noise_var > 0.0) {
            require(rng != nullptr, "train-mode noise needs an Rng");
            const double sd = std::sqrt(cfg_.noise_var);
            for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] += sd * rng->normal();
        }
        fc2_in.resize(n, cfg_.hidden_width + 1);
        fc2_in.leftCols(cfg_.hidden_width) = h;
    }
    for (Eigen::Index i = 0; i < n; ++i) fc2_in(i, fc2_in.cols() - 1) = static_cast<double>(arm(i));
    return fc2_.forward(params + fc2_offset(), fc2_in, cache ? &cache->fc2 : nullptr);
}

void Conditioner::backward(const double* params, const Cache& cache, const Matrix& grad_theta,
                           double* grad_params) const {
    Matrix g_in = fc2_.backward(params + fc2_offset(), cache.fc2, grad_theta, grad_params + fc2_offset());
    if (cfg_.linear) return;
    trunk_backward(params, cache.fc1, g_in.leftCols(cfg_.hidden_width), grad_params);
}

Matrix Conditioner::trunk(const double* params, const Matrix& input, Mlp::Cache* cache) const {
    if (cfg_.linear) return input;
    // FC1's last layer is linear in Mlp; the block ends with an ELU here.
    return fc1_.forward(params, input, cache).unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
}

void Conditioner::trunk_backward(const double* params, const Mlp::Cache& cache, const Matrix& grad_h,
                                 double* grad_params) const {
    if (cfg_.linear) return;
    Matrix g_h = grad_h;
    g_h.array() *= cache.pre.back().unaryExpr([](double v) { return v > 0.0 ? 1.0 : std::exp(v); }).array();
    fc1_.backward(params, cache, g_h, grad_params);
}

void Conditioner::init(double* params, Rng& rng, const Vector& output_bias, double output_scale) const {
    require(output_bias.size() == cfg_.output_dim, "output bias has wrong dimension");
    if (!cfg_.linear) fc1_.init(params, rng);
    fc2_.init(params + fc2_offset(), rng, output_scale);
    const int last = fc2_.num_layers() - 1;
    for (int i = 0; i < cfg_.output_dim; ++i) params[fc2_offset() + fc2_.bias_offset(last) + i] = output_bias(i);
}

}  // namespace cdpo::gen
