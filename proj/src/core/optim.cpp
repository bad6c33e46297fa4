#include "cdpo/core/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cdpo/core/error.hpp"

namespace cdpo {

const char* to_string(OptimizerKind k) { return k == OptimizerKind::SGD ? "sgd" : "adamw"; }

OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerKind::SGD;
    if (s == "adamw") return OptimizerKind::AdamW;
    throw InvalidArgument("unknown optimizer '" + s + "' (expected sgd or adamw)");
}

Optimizer::Optimizer(const OptimizerConfig& cfg, int dim) : cfg_(cfg), m_(Vector::Zero(dim)), v_(Vector::Zero(dim)) {
    require(cfg.lr > 0.0, "learning rate must be positive");
    require(cfg.momentum >= 0.0 && cfg.momentum < 1.0, "momentum must lie in [0, 1)");
}

void Optimizer::step(Eigen::Ref<Vector> params, const Eigen::Ref<const Vector>& grad) {
    require(params.size() == m_.size() && grad.size() == m_.size(), "optimizer dimension mismatch");
    ++t_;
    if (cfg_.kind == OptimizerKind::SGD) {
        if (cfg_.momentum > 0.0) {
            m_ = t_ == 1 ? Vector(grad) : Vector(cfg_.momentum * m_ + grad);
            params -= cfg_.lr * m_;
        } else {
            params -= cfg_.lr * grad;
        }
        return;
    }
    params *= 1.0 - cfg_.lr * cfg_.weight_decay;
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
    v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    params.array() -= cfg_.lr * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + cfg_.eps);
}

std::vector<std::vector<int>> minibatches(int n, int batch_size, Rng& rng) {
    require(batch_size >= 1, "batch size must be positive");
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng.engine());
    std::vector<std::vector<int>> out;
    for (int s = 0; s < n; s += batch_size)
        out.emplace_back(idx.begin() + s, idx.begin() + std::min(n, s + batch_size));
    return out;
}

}  // namespace cdpo
