#pragma once

#include <atomic>
#include <memory>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdpo/core/autodiff.hpp"
#include "cdpo/core/rng.hpp"
#include "cdpo/core/types.hpp"

namespace cdpo::gen {

using ad::value;

/// Optimisation direction of a parameter block: the learner objective is
/// ascended for Maximize blocks and descended for Minimize blocks.
enum class Direction { Maximize, Minimize };

/// Per-sample generative head. Its parameters come in two parts: `theta`,
/// produced row-wise by one or more conditioners, and `globals`, shared by
/// all rows. `term` returns the single-draw log-generative term for one
/// outcome given pre-drawn latent noise.
class Head {
public:
    virtual ~Head() = default;

    virtual Family family() const = 0;
    virtual int outcome_dim() const = 0;
    /// Theta size contributed by each conditioner, in order.
    virtual std::vector<int> theta_sizes() const = 0;
    virtual std::vector<Direction> theta_directions() const = 0;
    virtual int global_size() const { return 0; }
    virtual Direction global_direction() const { return Direction::Maximize; }
    virtual bool exact_density() const { return false; }

    int theta_size() const;

    /// Head parameters used as the conditioner output bias at initialisation.
    virtual Vector default_theta(Rng& rng) const = 0;
    virtual void init_globals(std::span<double> globals, Rng& rng) const;

    virtual int noise_size() const = 0;
    virtual void draw_noise(Rng& rng, std::span<double> noise) const;

    virtual double term(const double* theta, const double* globals, const double* y, const double* noise) const = 0;
    /// Returns the term; accumulates scale * d term / d theta and d globals.
    virtual double term_grad(const double* theta, const double* globals, const double* y, const double* noise,
                             double scale, double* dtheta, double* dglobals) const = 0;

    virtual void sample(const double* theta, const double* globals, Rng& rng, double* y_out) const = 0;

    virtual nlohmann::json config_json() const = 0;
    virtual std::unique_ptr<Head> clone() const = 0;
};

/// Shared implementation of term_grad for heads whose term is a template
/// `T eval(const T* theta, const T* globals, const double* y, const double* noise)`.
template <class Derived>
class TapedHead : public Head {
public:
    double term(const double* theta, const double* globals, const double* y, const double* noise) const override {
        return static_cast<const Derived*>(this)->template eval<double>(theta, globals, y, noise);
    }

    double term_grad(const double* theta, const double* globals, const double* y, const double* noise, double scale,
                     double* dtheta, double* dglobals) const override {
        ad::Tape& tape = ad::Tape::scratch();
        ad::Tape::Scope scope(tape);
        tape.clear();
        const int nt = theta_size();
        const int ng = global_size();
        thread_local std::vector<ad::Var> vt, vg;
        vt.resize(static_cast<std::size_t>(nt));
        vg.resize(static_cast<std::size_t>(ng));
        for (int i = 0; i < nt; ++i) vt[static_cast<std::size_t>(i)] = ad::Var::input(theta[i]);
        for (int i = 0; i < ng; ++i) vg[static_cast<std::size_t>(i)] = ad::Var::input(globals[i]);
        const ad::Var out =
            static_cast<const Derived*>(this)->template eval<ad::Var>(vt.data(), vg.data(), y, noise);
        if (out.index < 0) return out.val;
        const std::vector<double>& adj = tape.backward(out.index);
        for (int i = 0; i < nt; ++i) dtheta[i] += scale * adj[static_cast<std::size_t>(vt[static_cast<std::size_t>(i)].index)];
        for (int i = 0; i < ng; ++i)
            dglobals[i] += scale * adj[static_cast<std::size_t>(vg[static_cast<std::size_t>(i)].index)];
        return out.val;
    }
};

/// One-hidden-layer ELU network evaluated on a single input, parameters laid
/// out as W1 (hidden x in), b1, W2 (out x hidden), b2.
struct TinyNet {
    int in = 1;
    int hidden = 1;
    int out = 1;

    int num_params() const { return hidden * in + hidden + out * hidden + out; }

    template <class T, class X>
    void forward(const T* p, const X* x, T* y) const {
        thread_local std::vector<T> h;
        h.resize(static_cast<std::size_t>(hidden));
        const T* w1 = p;
        const T* b1 = w1 + hidden * in;
        const T* w2 = b1 + hidden;
        const T* b2 = w2 + out * hidden;
        for (int i = 0; i < hidden; ++i) {
            T s = b1[i];
            for (int j = 0; j < in; ++j) s += w1[i * in + j] * T(x[j]);
            h[static_cast<std::size_t>(i)] = math::elu(s);
        }
        for (int k = 0; k < out; ++k) {
            T s = b2[k];
            for (int i = 0; i < hidden; ++i) s += w2[k * hidden + i] * h[static_cast<std::size_t>(i)];
            y[k] = s;
        }
    }

    /// PyTorch-style uniform initialisation.
    void init(double* p, Rng& rng) const;
};

// ---------------------------------------------------------------- CNF

struct CnfHeadConfig {
    int outcome_dim = 1;
    int n_knots = 10;
    double bound = 4.0;          // spline acts on [-bound, bound]; identity outside
    int ar_hidden = 8;           // hidden width of the autoregressive coupling nets (d_y > 1)
    double min_bin = 1e-3;
    double min_derivative = 1e-3;
};

/// Rational-quadratic spline flow. Per outcome dimension j the parameters are
/// [loc, raw log-scale, K raw widths, K raw heights, K-1 raw interior
/// derivatives]; for j > 0 a coupling net of y_{<j} is added to them.
/// Normalising direction: u = (y - loc) / scale, z = spline(u).
class CnfHead : public TapedHead<CnfHead> {
public:
    explicit CnfHead(const CnfHeadConfig& cfg);

    const CnfHeadConfig& config() const { return cfg_; }
    int params_per_dim() const { return 3 * cfg_.n_knots + 1; }

    Family family() const override { return Family::CNF; }
    int outcome_dim() const override { return cfg_.outcome_dim; }
    std::vector<int> theta_sizes() const override { return {cfg_.outcome_dim * params_per_dim()}; }
    std::vector<Direction> theta_directions() const override { return {Direction::Maximize}; }
    int global_size() const override;
    bool exact_density() const override { return true; }
    Vector default_theta(Rng& rng) const override;
    void init_globals(std::span<double> globals, Rng& rng) const override;
    int noise_size() const override { return 0; }

    template <class T>
    T eval(const T* theta, const T* globals, const double* y, const double* noise) const;

    void sample(const double* theta, const double* globals, Rng& rng, double* y_out) const override;

    /// Latent point z = f^{-1}(y) and the map back, for round-trip checks.
    void to_latent(const double* theta, const double* globals, const double* y, double* z) const;
    void from_latent(const double* theta, const double* globals, const double* z, double* y) const;

    /// Knot positions in outcome space for a 1-D head (where the density is
    /// smooth between consecutive points).
    std::vector<double> breakpoints(const double* theta) const;

    /// Raw log-scale value giving the requested log-scale.
    static double raw_log_scale(double log_scale);

    nlohmann::json config_json() const override;
    std::unique_ptr<Head> clone() const override { return std::make_unique<CnfHead>(*this); }

private:
    template <class T>
    void dim_params(const T* theta, const T* globals, int j, const double* y_prev, T* out) const;

    CnfHeadConfig cfg_;
    std::vector<TinyNet> ar_nets_;
    std::vector<int> ar_offsets_;
};

// ---------------------------------------------------------------- CGAN

struct CganHeadConfig {
    int outcome_dim = 1;
    int hidden = 5;
};

/// Generator f(z) and discriminator d(y) as one-hidden-layer ELU nets whose
/// weights come from two separate conditioners. Latent z ~ N(0, I_{d_y}).
/// term = log d(y) + log(1 - d(f(z))).
class CganHead : public TapedHead<CganHead> {
public:
    explicit CganHead(const CganHeadConfig& cfg);

    Family family() const override { return Family::CGAN; }
    int outcome_dim() const override { return cfg_.outcome_dim; }
    std::vector<int> theta_sizes() const override { return {generator_.num_params(), discriminator_.num_params()}; }
    std::vector<Direction> theta_directions() const override { return {Direction::Minimize, Direction::Maximize}; }
    Vector default_theta(Rng& rng) const override;
    int noise_size() const override { return cfg_.outcome_dim; }

    template <class T>
    T eval(const T* theta, const T* globals, const double* y, const double* noise) const;

    void sample(const double* theta, const double* globals, Rng& rng, double* y_out) const override;

    /// Discriminator probability d(y).
    double discriminator(const double* theta, const double* y) const;
    const TinyNet& generator_net() const { return generator_; }
    const TinyNet& discriminator_net() const { return discriminator_; }

    /// Number of evaluations since construction where d(y) or d(f(z)) was
    /// within 1e-6 of 0 or 1.
    long saturation_count() const { return saturated_->load(); }

    nlohmann::json config_json() const override;
    std::unique_ptr<Head> clone() const override { return std::make_unique<CganHead>(*this); }

private:
    CganHeadConfig cfg_;
    TinyNet generator_;
    TinyNet discriminator_;
    std::shared_ptr<std::atomic<long>> saturated_ = std::make_shared<std::atomic<long>>(0);
};

// ---------------------------------------------------------------- CVAE

struct CvaeHeadConfig {
    int outcome_dim = 1;
    int latent_dim = 3;
    int hidden = 10;
    bool sample_decoder_noise = true;  // false: samples are decoder means
};

/// Gaussian encoder q(z | y) and decoder p(y | z) (one-hidden-layer ELU
/// nets) plus per-dimension decoder log-std; prior N(0, I). The term is the
/// single-draw ELBO log p(y, z) - log q(z | y) with reparameterised z.
class CvaeHead : public TapedHead<CvaeHead> {
public:
    explicit CvaeHead(const CvaeHeadConfig& cfg);

    const CvaeHeadConfig& config() const { return cfg_; }
    Family family() const override { return Family::CVAE; }
    int outcome_dim() const override { return cfg_.outcome_dim; }
    std::vector<int> theta_sizes() const override {
        return {encoder_.num_params() + decoder_.num_params() + cfg_.outcome_dim};
    }
    std::vector<Direction> theta_directions() const override { return {Direction::Maximize}; }
    Vector default_theta(Rng& rng) const override;
    int noise_size() const override { return cfg_.latent_dim; }

    const TinyNet& encoder() const { return encoder_; }
    const TinyNet& decoder() const { return decoder_; }
    int decoder_offset() const { return encoder_.num_params(); }
    int log_std_offset() const { return encoder_.num_params() + decoder_.num_params(); }

    template <class T>
    T eval(const T* theta, const T* globals, const double* y, const double* noise) const;

    void sample(const double* theta, const double* globals, Rng& rng, double* y_out) const override;

    nlohmann::json config_json() const override;
    std::unique_ptr<Head> clone() const override { return std::make_unique<CvaeHead>(*this); }

    static double raw_log_std(double log_std);

private:
    CvaeHeadConfig cfg_;
    TinyNet encoder_;
    TinyNet decoder_;
};

// ---------------------------------------------------------------- CDM

enum class NoiseSchedule { Cosine, Linear };

struct CdmHeadConfig {
    int outcome_dim = 1;
    int steps = 100;
    int hidden = 10;
    int time_dim = 20;
    NoiseSchedule schedule = NoiseSchedule::Cosine;
    double beta_start = 1e-4;  // linear schedule only
    double beta_end = 0.02;
    double clip_box = 5.0;     // predicted clean outcomes are clipped to [-box, box] while sampling
};

/// Denoising diffusion head with an epsilon-predicting one-hidden-layer ELU
/// net on [z_t, time embedding]. The log-generative term is the per-sample
/// denoising objective -0.5 ||eps - eps_hat(z_t, t)||^2 for a uniformly drawn
/// step t.
class CdmHead : public TapedHead<CdmHead> {
public:
    explicit CdmHead(const CdmHeadConfig& cfg);

    const CdmHeadConfig& config() const { return cfg_; }
    Family family() const override { return Family::CDM; }
    int outcome_dim() const override { return cfg_.outcome_dim; }
    std::vector<int> theta_sizes() const override { return {net_.num_params()}; }
    std::vector<Direction> theta_directions() const override { return {Direction::Maximize}; }
    Vector default_theta(Rng& rng) const override;
    int noise_size() const override { return 1 + cfg_.outcome_dim; }
    void draw_noise(Rng& rng, std::span<double> noise) const override;

    /// Cumulative signal fraction alpha_bar_t, t = 0..T (alpha_bar_0 = 1).
    const std::vector<double>& alpha_bar() const { return alpha_bar_; }
    /// Noised outcome z_t = sqrt(alpha_bar_t) y + sqrt(1 - alpha_bar_t) eps.
    void forward_noise(const double* y, int t, const double* eps, double* z) const;
    /// Predicted clean outcome from z_t using the denoiser (unclipped).
    void predict_clean(const double* theta, const double* z, int t, double* y0) const;
    void embed_time(int t, double* out) const;

    template <class T>
    T eval(const T* theta, const T* globals, const double* y, const double* noise) const;

    void sample(const double* theta, const double* globals, Rng& rng, double* y_out) const override;

    nlohmann::json config_json() const override;
    std::unique_ptr<Head> clone() const override { return std::make_unique<CdmHead>(*this); }

private:
    CdmHeadConfig cfg_;
    TinyNet net_;
    std::vector<double> alpha_bar_;
    std::vector<double> beta_;
};

/// Builds a head from its JSON description (config_json output).
std::unique_ptr<Head> head_from_json(const nlohmann::json& j);

}  // namespace cdpo::gen
