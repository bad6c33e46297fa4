#include <cmath>

#include "cdpo/core/error.hpp"
#include "cdpo/genmodels/heads.hpp"

namespace cdpo::gen {

CganHead::CganHead(const CganHeadConfig& cfg)
    : cfg_(cfg),
      generator_{cfg.outcome_dim, cfg.hidden, cfg.outcome_dim},
      discriminator_{cfg.outcome_dim, cfg.hidden, 1} {
    require(cfg.outcome_dim >= 1 && cfg.hidden >= 1, "CGAN dimensions must be positive");
}

Vector CganHead::default_theta(Rng& rng) const {
    Vector theta(theta_size());
    generator_.init(theta.data(), rng);
    discriminator_.init(theta.data() + generator_.num_params(), rng);
    return theta;
}

template <class T>
T CganHead::eval(const T* theta, const T*, const double* y, const double* noise) const {
    const int d = cfg_.outcome_dim;
    thread_local std::vector<T> fake;
    fake.resize(static_cast<std::size_t>(d));
    generator_.forward(theta, noise, fake.data());
    const T* td = theta + generator_.num_params();
    T s_real, s_fake;
    discriminator_.forward(td, y, &s_real);
    discriminator_.forward(td, fake.data(), &s_fake);
    constexpr double kEdge = 1e-6;
    const double d_real = math::sigmoid(value(s_real));
    const double d_fake = math::sigmoid(value(s_fake));
    if (d_real < kEdge || d_real > 1.0 - kEdge || d_fake < kEdge || d_fake > 1.0 - kEdge) ++*saturated_;
    return -math::softplus(-s_real) - math::softplus(s_fake);
}

template double CganHead::eval<double>(const double*, const double*, const double*, const double*) const;
template ad::Var CganHead::eval<ad::Var>(const ad::Var*, const ad::Var*, const double*, const double*) const;

void CganHead::sample(const double* theta, const double*, Rng& rng, double* y_out) const {
    std::vector<double> z(static_cast<std::size_t>(cfg_.outcome_dim));
    rng.fill_normal(z);
    generator_.forward(theta, z.data(), y_out);
}

double CganHead::discriminator(const double* theta, const double* y) const {
    double s = 0.0;
    discriminator_.forward(theta + generator_.num_params(), y, &s);
    return math::sigmoid(s);
}

nlohmann::json CganHead::config_json() const {
    return {{"family", "cgan"}, {"outcome_dim", cfg_.outcome_dim}, {"hidden", cfg_.hidden}};
}

}  // namespace cdpo::gen
