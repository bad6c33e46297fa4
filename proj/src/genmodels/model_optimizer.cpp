#include "cdpo/genmodels/model_optimizer.hpp"

#include "cdpo/core/error.hpp"

namespace cdpo::gen {

ModelOptimizer::ModelOptimizer(const GenerativeModel& model, const OptimizerConfig& cfg) : blocks_(model.blocks()) {
    for (const ParamBlock& b : blocks_) optimizers_.emplace_back(cfg, b.size);
}

void ModelOptimizer::step(GenerativeModel& model, const Vector& objective_grad,
                          const std::optional<std::string>& only_block) {
    if (model.frozen()) throw ContractViolation("optimizer step on a frozen model");
    require(objective_grad.size() == model.num_params(), "gradient has wrong size");
    Vector params = model.parameters();
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
        const ParamBlock& b = blocks_[k];
        if (only_block && b.name != *only_block) continue;
        const double sign = b.direction == Direction::Maximize ? -1.0 : 1.0;
        const Vector descent = sign * objective_grad.segment(b.offset, b.size);
        optimizers_[k].step(params.segment(b.offset, b.size), descent);
    }
    model.set_parameters(params);
}

double ModelOptimizer::update(GenerativeModel& model,
                              const std::function<ObjectiveResult(const GenerativeModel&)>& evaluate,
                              const Vector* extra_descent) {
    if (model.frozen()) throw ContractViolation("optimizer step on a frozen model");
    bool has_max = false, has_min = false;
    for (const ParamBlock& b : blocks_) (b.direction == Direction::Maximize ? has_max : has_min) = true;
    auto combined = [&](Vector g) {
        if (!extra_descent) return g;
        require(extra_descent->size() == g.size(), "auxiliary gradient has wrong size");
        for (const ParamBlock& b : blocks_) {
            const double sign = b.direction == Direction::Maximize ? -1.0 : 1.0;
            g.segment(b.offset, b.size) += sign * extra_descent->segment(b.offset, b.size);
        }
        return g;
    };
    ObjectiveResult first = evaluate(model);
    if (!(has_max && has_min)) {
        step(model, combined(std::move(first.grad)));
        return first.value;
    }
    Vector g = combined(std::move(first.grad));
    Vector params = model.parameters();
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
        const ParamBlock& b = blocks_[k];
        if (b.direction != Direction::Maximize) continue;
        optimizers_[k].step(params.segment(b.offset, b.size), -g.segment(b.offset, b.size));
    }
    model.set_parameters(params);
    g = combined(evaluate(model).grad);
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
        const ParamBlock& b = blocks_[k];
        if (b.direction != Direction::Minimize) continue;
        optimizers_[k].step(params.segment(b.offset, b.size), g.segment(b.offset, b.size));
    }
    model.set_parameters(params);
    return first.value;
}

}  // namespace cdpo::gen
