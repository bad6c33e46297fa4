#include <cmath>

#include "cdpo/core/error.hpp"
#include "cdpo/genmodels/heads.hpp"

namespace cdpo::gen {

namespace {

constexpr double kLogScaleBound = 5.0;
const double kDerivShift = std::log(std::expm1(1.0));

template <class T>
void build_knots(const T* raw, int K, double B, double min_bin, double min_d, T* xk, T* yk, T* dk) {
    using std::exp;
    using ad::exp;
    auto cumulative = [&](const T* r, T* knots) {
        double m = value(r[0]);
        for (int i = 1; i < K; ++i) m = std::max(m, value(r[i]));
        thread_local std::vector<T> e;
        e.resize(static_cast<std::size_t>(K));
        T sum(0.0);
        for (int i = 0; i < K; ++i) {
            e[static_cast<std::size_t>(i)] = exp(r[i] - T(m));
            sum += e[static_cast<std::size_t>(i)];
        }
        knots[0] = T(-B);
        for (int i = 0; i < K - 1; ++i) {
            const T frac = T(min_bin) + T(1.0 - min_bin * K) * e[static_cast<std::size_t>(i)] / sum;
            knots[i + 1] = knots[i] + T(2.0 * B) * frac;
        }
        knots[K] = T(B);
    };
    cumulative(raw, xk);
    cumulative(raw + K, yk);
    dk[0] = T(1.0);
    dk[K] = T(1.0);
    for (int i = 1; i < K; ++i) dk[i] = T(min_d) + T(1.0 - min_d) * math::softplus(raw[2 * K + i - 1] + T(kDerivShift));
}

template <class T>
T rqs_forward(const T& u, const T* xk, const T* yk, const T* dk, int K, double B, T& logdet) {
    using std::log;
    using ad::log;
    if (value(u) <= -B || value(u) >= B) {
        logdet = T(0.0);
        return u;
    }
    int k = 0;
    while (k + 1 < K && value(xk[k + 1]) <= value(u)) ++k;
    const T w = xk[k + 1] - xk[k];
    const T h = yk[k + 1] - yk[k];
    const T s = h / w;
    const T xi = (u - xk[k]) / w;
    const T t = xi * (T(1.0) - xi);
    const T denom = s + (dk[k + 1] + dk[k] - T(2.0) * s) * t;
    const T z = yk[k] + h * (s * xi * xi + dk[k] * t) / denom;
    const T omx = T(1.0) - xi;
    const T num = s * s * (dk[k + 1] * xi * xi + T(2.0) * s * t + dk[k] * omx * omx);
    logdet = log(num) - T(2.0) * log(denom);
    return z;
}

double rqs_inverse(double z, const double* xk, const double* yk, const double* dk, int K, double B) {
    if (z <= -B || z >= B) return z;
    int k = 0;
    while (k + 1 < K && yk[k + 1] <= z) ++k;
    const double w = xk[k + 1] - xk[k];
    const double h = yk[k + 1] - yk[k];
    const double s = h / w;
    const double dz = z - yk[k];
    const double c1 = dk[k + 1] + dk[k] - 2.0 * s;
    const double a = h * (s - dk[k]) + dz * c1;
    const double b = h * dk[k] - dz * c1;
    const double c = -s * dz;
    const double disc = std::max(b * b - 4.0 * a * c, 0.0);
    const double xi = 2.0 * c / (-b - std::sqrt(disc));
    return xk[k] + xi * w;
}

template <class T>
T bounded_log_scale(const T& raw) {
    using std::tanh;
    using ad::tanh;
    return T(kLogScaleBound) * tanh(raw / T(kLogScaleBound));
}

}  // namespace

CnfHead::CnfHead(const CnfHeadConfig& cfg) : cfg_(cfg) {
    require(cfg.outcome_dim >= 1, "CNF outcome dimension must be positive");
    require(cfg.n_knots >= 2, "CNF spline needs at least 2 bins");
    require(cfg.bound > 0.0, "CNF spline bound must be positive");
    require(cfg.min_bin > 0.0 && cfg.min_bin * cfg.n_knots < 1.0, "degenerate spline: minimum bin size too large");
    require(cfg.min_derivative > 0.0 && cfg.min_derivative < 1.0, "degenerate spline: minimum derivative out of (0, 1)");
    int off = 0;
    for (int j = 1; j < cfg.outcome_dim; ++j) {
        require(cfg.ar_hidden >= 1, "autoregressive coupling needs a positive hidden width");
        ar_nets_.push_back(TinyNet{j, cfg.ar_hidden, params_per_dim()});
        ar_offsets_.push_back(off);
        off += ar_nets_.back().num_params();
    }
}

int CnfHead::global_size() const {
    int n = 0;
    for (const TinyNet& net : ar_nets_) n += net.num_params();
    return n;
}

Vector CnfHead::default_theta(Rng&) const { return Vector::Zero(theta_size()); }

void CnfHead::init_globals(std::span<double> globals, Rng& rng) const {
    for (std::size_t i = 0; i < ar_nets_.size(); ++i) {
        const TinyNet& net = ar_nets_[i];
        double* p = globals.data() + ar_offsets_[i];
        net.init(p, rng);
        for (int k = net.hidden * net.in + net.hidden; k < net.num_params(); ++k) p[k] = 0.0;
    }
}

template <class T>
void CnfHead::dim_params(const T* theta, const T* globals, int j, const double* y_prev, T* out) const {
    const int P = params_per_dim();
    for (int k = 0; k < P; ++k) out[k] = theta[j * P + k];
    if (j == 0) return;
    thread_local std::vector<T> add;
    add.resize(static_cast<std::size_t>(P));
    const auto idx = static_cast<std::size_t>(j - 1);
    ar_nets_[idx].forward(globals + ar_offsets_[idx], y_prev, add.data());
    for (int k = 0; k < P; ++k) out[k] += add[static_cast<std::size_t>(k)];
}

template <class T>
T CnfHead::eval(const T* theta, const T* globals, const double* y, const double*) const {
    using std::exp;
    using ad::exp;
    const int K = cfg_.n_knots;
    thread_local std::vector<T> p, xk, yk, dk;
    p.resize(static_cast<std::size_t>(params_per_dim()));
    xk.resize(static_cast<std::size_t>(K + 1));
    yk.resize(static_cast<std::size_t>(K + 1));
    dk.resize(static_cast<std::size_t>(K + 1));
    T total(0.0);
    for (int j = 0; j < cfg_.outcome_dim; ++j) {
        dim_params(theta, globals, j, y, p.data());
        const T log_scale = bounded_log_scale(p[1]);
        const T u = (T(y[j]) - p[0]) * exp(-log_scale);
        build_knots(p.data() + 2, K, cfg_.bound, cfg_.min_bin, cfg_.min_derivative, xk.data(), yk.data(), dk.data());
        T logdet;
        const T z = rqs_forward(u, xk.data(), yk.data(), dk.data(), K, cfg_.bound, logdet);
        total += T(-0.5 * math::kLogTwoPi) - T(0.5) * z * z + logdet - log_scale;
    }
    return total;
}

template double CnfHead::eval<double>(const double*, const double*, const double*, const double*) const;
template ad::Var CnfHead::eval<ad::Var>(const ad::Var*, const ad::Var*, const double*, const double*) const;

void CnfHead::to_latent(const double* theta, const double* globals, const double* y, double* z) const {
    const int K = cfg_.n_knots;
    std::vector<double> p(static_cast<std::size_t>(params_per_dim())), xk(K + 1), yk(K + 1), dk(K + 1);
    for (int j = 0; j < cfg_.outcome_dim; ++j) {
        dim_params(theta, globals, j, y, p.data());
        const double u = (y[j] - p[0]) * std::exp(-bounded_log_scale(p[1]));
        build_knots(p.data() + 2, K, cfg_.bound, cfg_.min_bin, cfg_.min_derivative, xk.data(), yk.data(), dk.data());
        double logdet = 0.0;
        z[j] = rqs_forward(u, xk.data(), yk.data(), dk.data(), K, cfg_.bound, logdet);
    }
}

void CnfHead::from_latent(const double* theta, const double* globals, const double* z, double* y) const {
    const int K = cfg_.n_knots;
    std::vector<double> p(static_cast<std::size_t>(params_per_dim())), xk(K + 1), yk(K + 1), dk(K + 1);
    for (int j = 0; j < cfg_.outcome_dim; ++j) {
        dim_params(theta, globals, j, y, p.data());
        build_knots(p.data() + 2, K, cfg_.bound, cfg_.min_bin, cfg_.min_derivative, xk.data(), yk.data(), dk.data());
        const double u = rqs_inverse(z[j], xk.data(), yk.data(), dk.data(), K, cfg_.bound);
        y[j] = p[0] + std::exp(bounded_log_scale(p[1])) * u;
    }
}

void CnfHead::sample(const double* theta, const double* globals, Rng& rng, double* y_out) const {
    std::vector<double> z(static_cast<std::size_t>(cfg_.outcome_dim));
    rng.fill_normal(z);
    from_latent(theta, globals, z.data(), y_out);
}

std::vector<double> CnfHead::breakpoints(const double* theta) const {
    require(cfg_.outcome_dim == 1, "breakpoints are defined for 1-D outcomes");
    const int K = cfg_.n_knots;
    std::vector<double> xk(K + 1), yk(K + 1), dk(K + 1);
    build_knots(theta + 2, K, cfg_.bound, cfg_.min_bin, cfg_.min_derivative, xk.data(), yk.data(), dk.data());
    const double scale = std::exp(bounded_log_scale(theta[1]));
    std::vector<double> out;
    for (double x : xk) out.push_back(theta[0] + scale * x);
    return out;
}

double CnfHead::raw_log_scale(double log_scale) {
    require(std::abs(log_scale) < kLogScaleBound, "log-scale outside the representable range");
    return kLogScaleBound * std::atanh(log_scale / kLogScaleBound);
}

nlohmann::json CnfHead::config_json() const {
    return {{"family", "cnf"},          {"outcome_dim", cfg_.outcome_dim}, {"n_knots", cfg_.n_knots},
            {"bound", cfg_.bound},      {"ar_hidden", cfg_.ar_hidden},     {"min_bin", cfg_.min_bin},
            {"min_derivative", cfg_.min_derivative}};
}

}  // namespace cdpo::gen
