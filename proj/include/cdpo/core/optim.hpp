#pragma once

#include <string>
#include <vector>

#include "cdpo/core/rng.hpp"
#include "cdpo/core/types.hpp"

namespace cdpo {

enum class OptimizerKind { SGD, AdamW };

const char* to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& s);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::SGD;
    double lr = 1e-3;
    double momentum = 0.9;      // SGD
    double weight_decay = 0.01; // AdamW (decoupled)
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// First-order optimiser on a flat vector. Follows the PyTorch update rules:
/// SGD with momentum buffer b <- mu b + g, p <- p - lr b; AdamW with
/// decoupled weight decay and bias-corrected moments.
class Optimizer {
public:
    Optimizer(const OptimizerConfig& cfg, int dim);

    /// Descends along `grad` (the gradient of a quantity to minimise).
    void step(Eigen::Ref<Vector> params, const Eigen::Ref<const Vector>& grad);
    const OptimizerConfig& config() const { return cfg_; }
    long steps() const { return t_; }

private:
    OptimizerConfig cfg_;
    Vector m_;
    Vector v_;
    long t_ = 0;
};

/// Shuffled minibatch index lists covering 0..n-1 once.
std::vector<std::vector<int>> minibatches(int n, int batch_size, Rng& rng);

}  // namespace cdpo
