#include "cdpo/genmodels/mlp.hpp"

#include <cmath>

#include "cdpo/core/error.hpp"

namespace cdpo::gen {

using ConstMap = Eigen::Map<const Matrix>;
using MutMap = Eigen::Map<Matrix>;
using ConstVecMap = Eigen::Map<const Eigen::RowVectorXd>;
using MutVecMap = Eigen::Map<Eigen::RowVectorXd>;

Mlp::Mlp(int input_dim, std::vector<int> hidden, int output_dim) {
    require(input_dim >= 1 && output_dim >= 1, "MLP dimensions must be positive");
    dims_.push_back(input_dim);
    for (int h : hidden) {
        require(h >= 1, "MLP hidden width must be positive");
        dims_.push_back(h);
    }
    dims_.push_back(output_dim);
    int off = 0;
    for (int l = 0; l < num_layers(); ++l) {
        offsets_.push_back(off);
        off += layer_in(l) * layer_out(l) + layer_out(l);
    }
    num_params_ = off;
}

Matrix Mlp::forward(const double* params, const Matrix& input, Cache* cache) const {
    require(input.cols() == input_dim(), "MLP input has wrong dimension");
    if (cache) {
        cache->inputs.assign(static_cast<std::size_t>(num_layers()), Matrix());
        cache->pre.assign(static_cast<std::size_t>(num_layers()), Matrix());
    }
    Matrix h = input;
    for (int l = 0; l < num_layers(); ++l) {
        ConstMap w(params + weight_offset(l), layer_out(l), layer_in(l));
        ConstVecMap b(params + bias_offset(l), layer_out(l));
        Matrix pre = h * w.transpose();
        pre.rowwise() += b;
        if (cache) {
            cache->inputs[static_cast<std::size_t>(l)] = h;
            cache->pre[static_cast<std::size_t>(l)] = pre;
        }
        if (l + 1 < num_layers()) {
            h = pre.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
        } else {
            h = std::move(pre);
        }
    }
    return h;
}

Matrix Mlp::backward(const double* params, const Cache& cache, const Matrix& grad_output, double* grad_params) const {
    Matrix g = grad_output;
    for (int l = num_layers() - 1; l >= 0; --l) {
        const auto k = static_cast<std::size_t>(l);
        if (l + 1 < num_layers()) {
            g.array() *= cache.pre[k].unaryExpr([](double v) { return v > 0.0 ? 1.0 : std::exp(v); }).array();
        }
        ConstMap w(params + weight_offset(l), layer_out(l), layer_in(l));
        MutMap gw(grad_params + weight_offset(l), layer_out(l), layer_in(l));
        MutVecMap gb(grad_params + bias_offset(l), layer_out(l));
        gw.noalias() += g.transpose() * cache.inputs[k];
        gb += g.colwise().sum();
        g = g * w;
    }
    return g;
}

void Mlp::init(double* params, Rng& rng, double output_scale) const {
    for (int l = 0; l < num_layers(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer_in(l)));
        const double scale = (l + 1 == num_layers()) ? output_scale : 1.0;
        for (int i = 0; i < layer_in(l) * layer_out(l); ++i)
            params[weight_offset(l) + i] = scale * bound * (2.0 * rng.uniform() - 1.0);
        for (int i = 0; i < layer_out(l); ++i) params[bias_offset(l) + i] = bound * (2.0 * rng.uniform() - 1.0);
    }
}

}  // namespace cdpo::gen
