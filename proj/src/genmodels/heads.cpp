#include <cmath>
#include <numeric>

#include "cdpo/core/error.hpp"
#include "cdpo/genmodels/heads.hpp"

namespace cdpo::gen {

int Head::theta_size() const {
    const std::vector<int> sizes = theta_sizes();
    return std::accumulate(sizes.begin(), sizes.end(), 0);
}

void Head::init_globals(std::span<double> globals, Rng&) const {
    for (double& g : globals) g = 0.0;
}

void Head::draw_noise(Rng& rng, std::span<double> noise) const { rng.fill_normal(noise); }

void TinyNet::init(double* p, Rng& rng) const {
    const double b1 = 1.0 / std::sqrt(static_cast<double>(in));
    const double b2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    int k = 0;
    for (int i = 0; i < hidden * in + hidden; ++i) p[k++] = b1 * (2.0 * rng.uniform() - 1.0);
    for (int i = 0; i < out * hidden + out; ++i) p[k++] = b2 * (2.0 * rng.uniform() - 1.0);
}

std::unique_ptr<Head> head_from_json(const nlohmann::json& j) {
    const Family family = family_from_string(j.at("family").get<std::string>());
    switch (family) {
        case Family::CNF: {
            CnfHeadConfig c;
            c.outcome_dim = j.at("outcome_dim");
            c.n_knots = j.at("n_knots");
            c.bound = j.at("bound");
            c.ar_hidden = j.at("ar_hidden");
            c.min_bin = j.at("min_bin");
            c.min_derivative = j.at("min_derivative");
            return std::make_unique<CnfHead>(c);
        }
        case Family::CGAN: {
            CganHeadConfig c;
            c.outcome_dim = j.at("outcome_dim");
            c.hidden = j.at("hidden");
            return std::make_unique<CganHead>(c);
        }
        case Family::CVAE: {
            CvaeHeadConfig c;
            c.outcome_dim = j.at("outcome_dim");
            c.latent_dim = j.at("latent_dim");
            c.hidden = j.at("hidden");
            c.sample_decoder_noise = j.at("sample_decoder_noise");
            return std::make_unique<CvaeHead>(c);
        }
        case Family::CDM: {
            CdmHeadConfig c;
            c.outcome_dim = j.at("outcome_dim");
            c.steps = j.at("steps");
            c.hidden = j.at("hidden");
            c.time_dim = j.at("time_dim");
            c.schedule = j.at("schedule").get<std::string>() == "linear" ? NoiseSchedule::Linear : NoiseSchedule::Cosine;
            c.beta_start = j.at("beta_start");
            c.beta_end = j.at("beta_end");
            c.clip_box = j.at("clip_box");
            return std::make_unique<CdmHead>(c);
        }
        case Family::Tabular: break;
    }
    throw SchemaError("no neural head for family '" + std::string(to_string(family)) + "'");
}

}  // namespace cdpo::gen
