#include "cdpo/train/search.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "cdpo/core/error.hpp"
#include "cdpo/nuisance/nuisance.hpp"
#include "cdpo/train/trainer.hpp"

namespace cdpo::train {

SearchSpace SearchSpace::defaults(Family family) {
    SearchSpace s;
    s.batch_size = {32, 64};
    s.noise_x_var = {0.0, 0.01 * 0.01, 0.05 * 0.05, 0.1 * 0.1};
    switch (family) {
        case Family::CNF:
            s.lr = {0.001, 0.005};
            s.noise_y_var = s.noise_x_var;
            s.n_knots = {5, 10, 20};
            break;
        case Family::CGAN:
            s.lr = {0.001, 0.0001, 0.0005};
            s.gan_hidden = {5, 10, 15, 20, 25};
            break;
        case Family::CVAE:
            s.lr = {0.01, 0.001, 0.005, 0.0001, 0.0005};
            s.latent_dim = {3, 5, 7};
            s.vae_hidden = {3, 5, 10};
            break;
        case Family::CDM:
            s.lr = {0.01, 0.001, 0.005, 0.0001, 0.0005};
            s.diffusion_steps = {50, 100};
            s.eps_hidden = {10, 15, 20};
            break;
        case Family::Tabular:
            throw InvalidArgument("no search space for tabular models");
    }
    return s;
}

namespace {

struct Axis {
    std::size_t count;
    std::function<void(TrainConfig&, std::size_t)> apply;
};

template <class T>
void add_axis(std::vector<Axis>& axes, const std::vector<T>& values, std::function<void(TrainConfig&, T)> set) {
    if (values.empty()) return;
    axes.push_back({values.size(), [values, set](TrainConfig& c, std::size_t k) { set(c, values[k]); }});
}

std::vector<Axis> axes_for(const SearchSpace& s, Family f) {
    std::vector<Axis> a;
    add_axis<double>(a, s.lr, [](TrainConfig& c, double v) { c.stage1.optimizer.lr = v; });
    add_axis<int>(a, s.batch_size, [](TrainConfig& c, int v) { c.stage1.batch_size = v; });
    add_axis<double>(a, s.noise_x_var, [](TrainConfig& c, double v) {
        c.stage1.model.noise_x_var = v;
        c.stage2.model.noise_x_var = v;
    });
    if (f == Family::CNF) {
        add_axis<double>(a, s.noise_y_var, [](TrainConfig& c, double v) { c.stage1.model.noise_y_var = v; });
        add_axis<int>(a, s.n_knots, [](TrainConfig& c, int v) {
            c.stage1.model.cnf.n_knots = v;
            c.stage2.model.cnf.n_knots = v;
        });
    }
    if (f == Family::CGAN) add_axis<int>(a, s.gan_hidden, [](TrainConfig& c, int v) { c.stage1.model.cgan.hidden = v; });
    if (f == Family::CVAE) {
        add_axis<int>(a, s.latent_dim, [](TrainConfig& c, int v) { c.stage1.model.cvae.latent_dim = v; });
        add_axis<int>(a, s.vae_hidden, [](TrainConfig& c, int v) { c.stage1.model.cvae.hidden = v; });
    }
    if (f == Family::CDM) {
        add_axis<int>(a, s.diffusion_steps, [](TrainConfig& c, int v) { c.stage1.model.cdm.steps = v; });
        add_axis<int>(a, s.eps_hidden, [](TrainConfig& c, int v) { c.stage1.model.cdm.hidden = v; });
    }
    return a;
}

}  // namespace

long SearchSpace::size(Family family) const {
    long n = 1;
    for (const Axis& a : axes_for(*this, family)) n *= static_cast<long>(a.count);
    return n;
}

std::vector<TrainConfig> sample_grid(const TrainConfig& base, const SearchSpace& space, int runs, Rng& rng) {
    require(runs >= 1, "search needs at least one run");
    const std::vector<Axis> axes = axes_for(space, base.family);
    const long total = space.size(base.family);
    std::set<long> used;
    std::vector<TrainConfig> out;
    for (int r = 0; r < runs; ++r) {
        long code = 0;
        do {
            code = 0;
            for (const Axis& a : axes)
                code = code * static_cast<long>(a.count) + rng.uniform_int(0, static_cast<int>(a.count) - 1);
        } while (static_cast<long>(used.size()) < total && used.count(code));
        used.insert(code);
        TrainConfig c = base;
        long rest = code;
        for (auto it = axes.rbegin(); it != axes.rend(); ++it) {
            it->apply(c, static_cast<std::size_t>(rest % static_cast<long>(it->count)));
            rest /= static_cast<long>(it->count);
        }
        out.push_back(std::move(c));
    }
    return out;
}

SearchResult random_grid_search(const data::PODataset& train, const data::PODataset& validation,
                                const TrainConfig& base, const SearchSpace& space, int runs,
                                const std::function<void(const SearchTrial&)>& on_trial) {
    Rng rng(derive_seed(base.seed, 0x5EA4C));
    SearchResult res;
    double best = std::numeric_limits<double>::infinity();
    for (TrainConfig& cfg : sample_grid(base, space, runs, rng)) {
        SearchTrial t{cfg, std::numeric_limits<double>::infinity()};
        try {
            const nuis::NuisanceEstimates est = nuis::fit_nuisance(train, nuisance_config(cfg, true));
            Rng eval(derive_seed(base.seed, 0xE7A1));
            const Vector terms = est.outcome_model->log_terms(validation.x, validation.a, validation.y, eval, 1);
            t.score = -terms.mean();
            if (!std::isfinite(t.score)) t.score = std::numeric_limits<double>::infinity();
        } catch (const NumericalError&) {
        }
        if (t.score < best) {
            best = t.score;
            res.best = static_cast<int>(res.trials.size());
        }
        if (on_trial) on_trial(t);
        res.trials.push_back(std::move(t));
    }
    return res;
}

}  // namespace cdpo::train
