#include "cdpo/train/ema.hpp"

#include "cdpo/core/error.hpp"

namespace cdpo::train {

EMAState::EMAState(Vector initial, double d) : shadow(std::move(initial)), decay(d) {
    require(d >= 0.0 && d < 1.0, "EMA decay must lie in [0, 1)");
}

void ema_update(EMAState& state, const Vector& live) {
    if (live.size() != state.shadow.size())
        throw InvalidArgument("EMA dimension mismatch: shadow has " + std::to_string(state.shadow.size()) +
                              " entries, live has " + std::to_string(live.size()));
    state.shadow = state.decay * state.shadow + (1.0 - state.decay) * live;
}

}  // namespace cdpo::train
