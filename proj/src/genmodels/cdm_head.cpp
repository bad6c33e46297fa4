#include <algorithm>
#include <cmath>
#include <numbers>

#include "cdpo/core/error.hpp"
#include "cdpo/genmodels/heads.hpp"

namespace cdpo::gen {

CdmHead::CdmHead(const CdmHeadConfig& cfg)
    : cfg_(cfg), net_{cfg.outcome_dim + cfg.time_dim, cfg.hidden, cfg.outcome_dim} {
    require(cfg.outcome_dim >= 1 && cfg.hidden >= 1, "CDM dimensions must be positive");
    require(cfg.steps >= 1, "CDM needs at least one diffusion step");
    require(cfg.time_dim >= 2 && cfg.time_dim % 2 == 0, "time embedding dimension must be a positive even number");
    require(cfg.clip_box > 0.0, "clip box must be positive");
    const int T = cfg.steps;
    beta_.assign(static_cast<std::size_t>(T + 1), 0.0);
    if (cfg.schedule == NoiseSchedule::Cosine) {
        constexpr double s = 0.008;
        auto f = [&](int t) {
            const double c = std::cos((static_cast<double>(t) / T + s) / (1.0 + s) * std::numbers::pi / 2.0);
            return c * c;
        };
        for (int t = 1; t <= T; ++t) beta_[static_cast<std::size_t>(t)] = std::min(1.0 - f(t) / f(t - 1), 0.999);
    } else {
        require(cfg.beta_start >= 0.0 && cfg.beta_end >= 0.0 && cfg.beta_start < 1.0 && cfg.beta_end < 1.0,
                "linear schedule betas must lie in [0, 1)");
        for (int t = 1; t <= T; ++t) {
            const double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / (T - 1);
            beta_[static_cast<std::size_t>(t)] = cfg.beta_start + (cfg.beta_end - cfg.beta_start) * frac;
        }
    }
    alpha_bar_.assign(static_cast<std::size_t>(T + 1), 1.0);
    for (int t = 1; t <= T; ++t)
        alpha_bar_[static_cast<std::size_t>(t)] =
            alpha_bar_[static_cast<std::size_t>(t - 1)] * (1.0 - beta_[static_cast<std::size_t>(t)]);
}

Vector CdmHead::default_theta(Rng& rng) const {
    Vector theta(theta_size());
    net_.init(theta.data(), rng);
    return theta;
}

void CdmHead::draw_noise(Rng& rng, std::span<double> noise) const {
    noise[0] = rng.uniform();
    rng.fill_normal(noise.subspan(1));
}

void CdmHead::embed_time(int t, double* out) const {
    const int half = cfg_.time_dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / half);
        out[i] = std::sin(t * freq);
        out[i + half] = std::cos(t * freq);
    }
}

void CdmHead::forward_noise(const double* y, int t, const double* eps, double* z) const {
    const double ab = alpha_bar_[static_cast<std::size_t>(t)];
    for (int j = 0; j < cfg_.outcome_dim; ++j) z[j] = std::sqrt(ab) * y[j] + std::sqrt(1.0 - ab) * eps[j];
}

template <class T>
T CdmHead::eval(const T* theta, const T*, const double* y, const double* noise) const {
    const int d = cfg_.outcome_dim;
    const int t = 1 + std::min(cfg_.steps - 1, static_cast<int>(noise[0] * cfg_.steps));
    const double* eps = noise + 1;
    thread_local std::vector<double> input;
    thread_local std::vector<T> eps_hat;
    input.resize(static_cast<std::size_t>(d + cfg_.time_dim));
    eps_hat.resize(static_cast<std::size_t>(d));
    forward_noise(y, t, eps, input.data());
    embed_time(t, input.data() + d);
    net_.forward(theta, input.data(), eps_hat.data());
    T loss(0.0);
    for (int j = 0; j < d; ++j) {
        const T r = T(eps[j]) - eps_hat[static_cast<std::size_t>(j)];
        loss += r * r;
    }
    return T(-0.5) * loss;
}

template double CdmHead::eval<double>(const double*, const double*, const double*, const double*) const;
template ad::Var CdmHead::eval<ad::Var>(const ad::Var*, const ad::Var*, const double*, const double*) const;

void CdmHead::predict_clean(const double* theta, const double* z, int t, double* y0) const {
    const int d = cfg_.outcome_dim;
    std::vector<double> input(static_cast<std::size_t>(d + cfg_.time_dim)), eps_hat(static_cast<std::size_t>(d));
    std::copy(z, z + d, input.begin());
    embed_time(t, input.data() + d);
    net_.forward(theta, input.data(), eps_hat.data());
    const double ab = alpha_bar_[static_cast<std::size_t>(t)];
    for (int j = 0; j < d; ++j) y0[j] = (z[j] - std::sqrt(1.0 - ab) * eps_hat[static_cast<std::size_t>(j)]) / std::sqrt(ab);
}

void CdmHead::sample(const double* theta, const double*, Rng& rng, double* y_out) const {
    const int d = cfg_.outcome_dim;
    std::vector<double> z(static_cast<std::size_t>(d)), y0(static_cast<std::size_t>(d));
    rng.fill_normal(z);
    for (int t = cfg_.steps; t >= 1; --t) {
        predict_clean(theta, z.data(), t, y0.data());
        for (double& v : y0) v = std::clamp(v, -cfg_.clip_box, cfg_.clip_box);
        const double ab = alpha_bar_[static_cast<std::size_t>(t)];
        const double ab_prev = alpha_bar_[static_cast<std::size_t>(t - 1)];
        const double beta = beta_[static_cast<std::size_t>(t)];
        if (t == 1 || 1.0 - ab <= 1e-12) {
            z = y0;
            break;
        }
        const double c_clean = std::sqrt(ab_prev) * beta / (1.0 - ab);
        const double c_noisy = std::sqrt(1.0 - beta) * (1.0 - ab_prev) / (1.0 - ab);
        const double sd = std::sqrt(beta * (1.0 - ab_prev) / (1.0 - ab));
        for (int j = 0; j < d; ++j)
            z[static_cast<std::size_t>(j)] =
                c_clean * y0[static_cast<std::size_t>(j)] + c_noisy * z[static_cast<std::size_t>(j)] + sd * rng.normal();
    }
    std::copy(z.begin(), z.end(), y_out);
}

nlohmann::json CdmHead::config_json() const {
    return {{"family", "cdm"},
            {"outcome_dim", cfg_.outcome_dim},
            {"steps", cfg_.steps},
            {"hidden", cfg_.hidden},
            {"time_dim", cfg_.time_dim},
            {"schedule", cfg_.schedule == NoiseSchedule::Linear ? "linear" : "cosine"},
            {"beta_start", cfg_.beta_start},
            {"beta_end", cfg_.beta_end},
            {"clip_box", cfg_.clip_box}};
}

}  // namespace cdpo::gen
