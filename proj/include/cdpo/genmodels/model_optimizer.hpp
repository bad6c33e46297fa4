#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cdpo/core/optim.hpp"
#include "cdpo/genmodels/model.hpp"

namespace cdpo::gen {

/// One optimiser per parameter block; each block moves along its declared
/// direction (ascent for Maximize blocks, descent for Minimize blocks).
class ModelOptimizer {
public:
    ModelOptimizer(const GenerativeModel& model, const OptimizerConfig& cfg);

    /// Applies one step to every block, or only to the named block. Writes
    /// go through set_parameters, so a frozen model raises ContractViolation.
    void step(GenerativeModel& model, const Vector& objective_grad,
              const std::optional<std::string>& only_block = std::nullopt);

    /// One training update driven by `evaluate`. Maximize blocks step first;
    /// if Minimize blocks exist as well the gradient is re-evaluated before
    /// they step (alternating adversarial update). `extra_descent`, when
    /// given, is the gradient of an auxiliary quantity to minimise and is
    /// folded into every block with the sign that descends it. Returns the
    /// objective value of the first evaluation.
    double update(GenerativeModel& model, const std::function<ObjectiveResult(const GenerativeModel&)>& evaluate,
                  const Vector* extra_descent = nullptr);

    const std::vector<ParamBlock>& blocks() const { return blocks_; }

private:
    std::vector<ParamBlock> blocks_;
    std::vector<Optimizer> optimizers_;
};

}  // namespace cdpo::gen
