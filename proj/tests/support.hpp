#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "cdpo/genmodels/model.hpp"

namespace cdpo::testing {

inline gen::NeuralModelConfig small_config(Family f, int cond_dim, int outcome_dim) {
    gen::NeuralModelConfig cfg;
    cfg.family = f;
    cfg.cond_dim = cond_dim;
    cfg.outcome_dim = outcome_dim;
    cfg.hidden_width = 4;
    cfg.hidden_layers = 1;
    cfg.output_scale = 0.5;
    cfg.cnf.n_knots = 4;
    cfg.cnf.ar_hidden = 3;
    cfg.cgan.hidden = 3;
    cfg.cvae.latent_dim = 2;
    cfg.cvae.hidden = 3;
    cfg.cdm.steps = 10;
    cfg.cdm.hidden = 3;
    cfg.cdm.time_dim = 4;
    return cfg;
}

inline double relative_error(const Vector& a, const Vector& b) {
    return (a - b).norm() / std::max(b.norm(), 1e-12);
}

}  // namespace cdpo::testing
