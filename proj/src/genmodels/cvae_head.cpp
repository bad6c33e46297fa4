#include <cmath>

#include "cdpo/core/error.hpp"
#include "cdpo/genmodels/heads.hpp"

namespace cdpo::gen {

namespace {

constexpr double kLogStdBound = 5.0;

template <class T>
T bounded(const T& raw) {
    using std::tanh;
    using ad::tanh;
    return T(kLogStdBound) * tanh(raw / T(kLogStdBound));
}

}  // namespace

CvaeHead::CvaeHead(const CvaeHeadConfig& cfg)
    : cfg_(cfg),
      encoder_{cfg.outcome_dim, cfg.hidden, 2 * cfg.latent_dim},
      decoder_{cfg.latent_dim, cfg.hidden, cfg.outcome_dim} {
    require(cfg.outcome_dim >= 1 && cfg.latent_dim >= 1 && cfg.hidden >= 1, "CVAE dimensions must be positive");
}

double CvaeHead::raw_log_std(double log_std) {
    require(std::abs(log_std) < kLogStdBound, "log-std outside the representable range");
    return kLogStdBound * std::atanh(log_std / kLogStdBound);
}

Vector CvaeHead::default_theta(Rng& rng) const {
    Vector theta(theta_size());
    encoder_.init(theta.data(), rng);
    decoder_.init(theta.data() + decoder_offset(), rng);
    for (int j = 0; j < cfg_.outcome_dim; ++j) theta(log_std_offset() + j) = raw_log_std(std::log(0.3));
    return theta;
}

template <class T>
T CvaeHead::eval(const T* theta, const T*, const double* y, const double* noise) const {
    using std::exp;
    using ad::exp;
    const int dz = cfg_.latent_dim;
    thread_local std::vector<T> enc, z, mean;
    enc.resize(static_cast<std::size_t>(2 * dz));
    z.resize(static_cast<std::size_t>(dz));
    mean.resize(static_cast<std::size_t>(cfg_.outcome_dim));
    encoder_.forward(theta, y, enc.data());
    T log_ratio(0.0);
    for (int i = 0; i < dz; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const T ls = bounded(enc[static_cast<std::size_t>(dz + i)]);
        z[k] = enc[k] + exp(ls) * T(noise[i]);
        // log prior(z) - log q(z | y); (z - mu) / sigma equals the drawn noise
        log_ratio += T(-0.5) * z[k] * z[k] + ls + T(0.5 * noise[i] * noise[i]);
    }
    decoder_.forward(theta + decoder_offset(), z.data(), mean.data());
    T log_lik(0.0);
    for (int j = 0; j < cfg_.outcome_dim; ++j)
        log_lik += math::normal_log_pdf(T(y[j]), mean[static_cast<std::size_t>(j)], bounded(theta[log_std_offset() + j]));
    return log_lik + log_ratio;
}

template double CvaeHead::eval<double>(const double*, const double*, const double*, const double*) const;
template ad::Var CvaeHead::eval<ad::Var>(const ad::Var*, const ad::Var*, const double*, const double*) const;

void CvaeHead::sample(const double* theta, const double*, Rng& rng, double* y_out) const {
    std::vector<double> z(static_cast<std::size_t>(cfg_.latent_dim));
    rng.fill_normal(z);
    decoder_.forward(theta + decoder_offset(), z.data(), y_out);
    if (!cfg_.sample_decoder_noise) return;
    for (int j = 0; j < cfg_.outcome_dim; ++j) y_out[j] += std::exp(bounded(theta[log_std_offset() + j])) * rng.normal();
}

nlohmann::json CvaeHead::config_json() const {
    return {{"family", "cvae"},
            {"outcome_dim", cfg_.outcome_dim},
            {"latent_dim", cfg_.latent_dim},
            {"hidden", cfg_.hidden},
            {"sample_decoder_noise", cfg_.sample_decoder_noise}};
}

}  // namespace cdpo::gen
