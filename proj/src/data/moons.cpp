#include "cdpo/data/moons.hpp"

#include <cmath>
#include <numbers>

#include "cdpo/core/autodiff.hpp"
#include "cdpo/core/error.hpp"

namespace cdpo::data {

void MoonsConfig::validate() const {
    require(n_train > 0, "n_train must be positive");
    require(n_test >= 0, "n_test must be nonnegative");
    require(noise_scale >= 0.0, "noise_scale must be nonnegative");
    require(angle_std[0] >= 0.0 && angle_std[1] >= 0.0, "angle std must be nonnegative");
    require(overlap_eps > 0.0 && overlap_eps < 0.5, "overlap_eps must lie in (0, 0.5)");
}

double moons_propensity(const MoonsConfig& cfg, const Vector& x) {
    const double logit =
        cfg.propensity_intercept + cfg.propensity_coef[0] * x(0) + cfg.propensity_coef[1] * x(1);
    return cfg.overlap_eps + (1.0 - 2.0 * cfg.overlap_eps) * math::sigmoid(logit);
}

namespace {

Vector rotate(const Vector& p, double phi) {
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    Vector out(2);
    out << c * p(0) - s * p(1), s * p(0) + c * p(1);
    return out;
}

Vector draw_outcome(const MoonsConfig& cfg, const Vector& x, int a, Rng& rng) {
    const auto arm = static_cast<std::size_t>(a);
    const double phi = cfg.angle_mean[arm] + cfg.angle_std[arm] * rng.normal();
    Vector jittered = x;
    jittered(0) += cfg.noise_scale * rng.normal();
    jittered(1) += cfg.noise_scale * rng.normal();
    return rotate(jittered, phi);
}

Vector draw_covariate(const MoonsConfig& cfg, Rng& rng) {
    const double t = std::numbers::pi * rng.uniform();
    Vector x(2);
    if (rng.bernoulli(0.5)) {
        x << std::cos(t), std::sin(t);
    } else {
        x << 1.0 - std::cos(t), 0.5 - std::sin(t);
    }
    x(0) += cfg.noise_scale * rng.normal();
    x(1) += cfg.noise_scale * rng.normal();
    return x;
}

PODataset draw_split(const MoonsConfig& cfg, int n, Rng& rng) {
    PODataset ds;
    ds.x.resize(n, 2);
    ds.a.resize(n);
    ds.y.resize(n, 2);
    ds.y0 = Matrix(n, 2);
    ds.y1 = Matrix(n, 2);
    for (int i = 0; i < n; ++i) {
        const Vector x = draw_covariate(cfg, rng);
        const int a = rng.bernoulli(moons_propensity(cfg, x)) ? 1 : 0;
        const Vector po0 = draw_outcome(cfg, x, 0, rng);
        const Vector po1 = draw_outcome(cfg, x, 1, rng);
        ds.x.row(i) = x.transpose();
        ds.a(i) = a;
        ds.y0->row(i) = po0.transpose();
        ds.y1->row(i) = po1.transpose();
        ds.y.row(i) = (a == 1 ? po1 : po0).transpose();
    }
    ds.ground_truth = [cfg](const Vector& x, int a, int count, Rng& r) {
        return moons_sample_cdpo(cfg, x, a, count, r);
    };
    return ds;
}

}  // namespace

Matrix moons_sample_cdpo(const MoonsConfig& cfg, const Vector& x, int a, int count, Rng& rng) {
    require(a == 0 || a == 1, "treatment arm must be 0 or 1");
    require(count >= 0, "count must be nonnegative");
    require(x.size() == 2, "moons covariates are 2-dimensional");
    Matrix out(count, 2);
    for (int i = 0; i < count; ++i) out.row(i) = draw_outcome(cfg, x, a, rng).transpose();
    return out;
}

MoonsSplit generate_moons_dataset(const MoonsConfig& cfg) {
    cfg.validate();
    Rng train_rng(derive_seed(cfg.seed, 1));
    Rng test_rng(derive_seed(cfg.seed, 2));
    return {draw_split(cfg, cfg.n_train, train_rng), draw_split(cfg, cfg.n_test, test_rng)};
}

MoonsConfig moons_confounded_variant(int n_train, int n_test, std::uint64_t seed) {
    MoonsConfig cfg;
    cfg.n_train = n_train;
    cfg.n_test = n_test;
    cfg.seed = seed;
    cfg.angle_mean = {0.9, -1.4};
    cfg.angle_std = {0.25, 0.4};
    cfg.propensity_intercept = -2.0;
    cfg.propensity_coef = {4.0, -2.0};
    cfg.overlap_eps = 0.05;
    return cfg;
}

}  // namespace cdpo::data
