#include "cdpo/core/autodiff.hpp"

#include <stdexcept>

namespace cdpo::ad {

namespace {
thread_local Tape* g_active = nullptr;
}

Tape::Tape() : previous_(g_active), activated_(true) {
    nodes_.reserve(4096);
    g_active = this;
}

Tape::Tape(Detached) : previous_(nullptr), activated_(false) { nodes_.reserve(1 << 15); }

Tape::~Tape() {
    if (activated_) g_active = previous_;
}

Tape& Tape::scratch() {
    thread_local Tape tape{Detached{}};
    return tape;
}

Tape::Scope::Scope(Tape& tape) : previous_(g_active) { g_active = &tape; }

Tape::Scope::~Scope() { g_active = previous_; }

Tape* Tape::active() {
    if (g_active == nullptr) throw std::logic_error("ad::Var operation without an active Tape");
    return g_active;
}

const std::vector<double>& Tape::backward(int output) {
    adjoint_.assign(nodes_.size(), 0.0);
    if (output < 0) return adjoint_;
    adjoint_[static_cast<std::size_t>(output)] = 1.0;
    for (int i = output; i >= 0; --i) {
        const double a = adjoint_[static_cast<std::size_t>(i)];
        if (a == 0.0) continue;
        const Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.parent0 >= 0) adjoint_[static_cast<std::size_t>(n.parent0)] += a * n.partial0;
        if (n.parent1 >= 0) adjoint_[static_cast<std::size_t>(n.parent1)] += a * n.partial1;
    }
    return adjoint_;
}

}  // namespace cdpo::ad
