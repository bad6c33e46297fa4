#pragma once

#include "cdpo/core/types.hpp"

namespace cdpo::train {

inline constexpr double kDefaultEmaDecay = 0.995;

/// Exponential moving average of parameter vectors.
struct EMAState {
    Vector shadow;
    double decay = kDefaultEmaDecay;

    EMAState() = default;
    EMAState(Vector initial, double decay);
};

/// shadow <- decay * shadow + (1 - decay) * live, elementwise.
void ema_update(EMAState& state, const Vector& live);

}  // namespace cdpo::train
