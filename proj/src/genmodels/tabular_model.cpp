#include <cmath>

#include "cdpo/core/error.hpp"
#include "cdpo/genmodels/model.hpp"

namespace cdpo::gen {

TabularModel::TabularModel(int nx, int ny) : nx_(nx), ny_(ny) {
    require(nx >= 1 && ny >= 1, "tabular supports must be nonempty");
    params_ = Vector::Zero(nx * 2 * ny);
}

TabularModel TabularModel::from_probabilities(int nx, int ny, const std::vector<double>& table) {
    require(table.size() == static_cast<std::size_t>(nx * 2 * ny), "probability table has wrong size");
    TabularModel m(nx, ny);
    for (std::size_t k = 0; k < table.size(); ++k) {
        require(table[k] > 0.0, "tabular probabilities must be positive");
        m.params_(static_cast<Eigen::Index>(k)) = std::log(table[k]);
    }
    return m;
}

double TabularModel::probability(int x, int a, int y) const {
    const int base = (x * 2 + a) * ny_;
    const double m = params_.segment(base, ny_).maxCoeff();
    const double z = (params_.segment(base, ny_).array() - m).exp().sum();
    return std::exp(params_(base + y) - m) / z;
}

std::vector<ParamBlock> TabularModel::blocks() const {
    return {{"logits", 0, num_params(), Direction::Maximize}};
}

int TabularModel::index(const Matrix& cond, const IntVector& arm, int row) const {
    const double xv = cond(row, 0);
    const int x = static_cast<int>(std::lround(xv));
    if (x < 0 || x >= nx_ || static_cast<double>(x) != xv)
        throw InvalidArgument("tabular covariate must be an index in [0, " + std::to_string(nx_) + ")");
    const int a = arm(row);
    require(a == 0 || a == 1, "treatment arm must be 0 or 1");
    return (x * 2 + a) * ny_;
}

Vector TabularModel::log_terms(const Matrix& cond, const IntVector& arm, const Matrix& y, Rng&, int) const {
    return log_density(cond, arm, y);
}

Vector TabularModel::log_density(const Matrix& cond, const IntVector& arm, const Matrix& y) const {
    require(cond.cols() == 1 && y.cols() == 1 && y.rows() == cond.rows(), "tabular model expects 1-D inputs");
    Vector out(cond.rows());
    for (int i = 0; i < cond.rows(); ++i) {
        const int base = index(cond, arm, i);
        const int yy = static_cast<int>(std::lround(y(i, 0)));
        require(yy >= 0 && yy < ny_, "tabular outcome out of range");
        out(i) = std::log(probability(base / (2 * ny_), (base / ny_) % 2, yy));
    }
    return out;
}

ObjectiveResult TabularModel::objective(const TermBatch& batch, double normalizer, Rng& rng,
                                        const ObjectiveOptions& opt) const {
    ObjectiveResult res;
    const Vector terms = log_terms(batch.cond, batch.arm, batch.y, rng);
    res.value = batch.weight.dot(terms) / normalizer;
    if (!opt.need_grad) return res;
    res.grad = Vector::Zero(num_params());
    for (int i = 0; i < batch.rows(); ++i) {
        const double w = batch.weight(i) / normalizer;
        if (w == 0.0) continue;
        const int base = index(batch.cond, batch.arm, i);
        const int x = base / (2 * ny_);
        const int a = (base / ny_) % 2;
        const int yy = static_cast<int>(std::lround(batch.y(i, 0)));
        for (int k = 0; k < ny_; ++k) res.grad(base + k) -= w * probability(x, a, k);
        res.grad(base + yy) += w;
    }
    return res;
}

Matrix TabularModel::sample_batch(const Matrix& cond, const IntVector& arm, Rng& rng) const {
    Matrix out(cond.rows(), 1);
    for (int i = 0; i < cond.rows(); ++i) {
        const int base = index(cond, arm, i);
        const int x = base / (2 * ny_);
        const int a = (base / ny_) % 2;
        double u = rng.uniform();
        int k = 0;
        for (; k < ny_ - 1; ++k) {
            u -= probability(x, a, k);
            if (u < 0.0) break;
        }
        out(i, 0) = k;
    }
    return out;
}

nlohmann::json TabularModel::architecture_json() const {
    return {{"kind", "tabular"}, {"nx", nx_}, {"ny", ny_}};
}

std::unique_ptr<GenerativeModel> model_from_architecture(const nlohmann::json& arch, Rng& rng) {
    const std::string kind = arch.at("kind");
    if (kind == "tabular") return std::make_unique<TabularModel>(arch.at("nx").get<int>(), arch.at("ny").get<int>());
    if (kind != "neural") throw SchemaError("unknown model kind '" + kind + "'");
    auto model = std::make_unique<NeuralGenerativeModel>(NeuralModelConfig::from_json(arch.at("config")), rng);
    const auto& s = arch.at("scalers");
    auto vec = [](const nlohmann::json& j) {
        const std::vector<double> v = j.get<std::vector<double>>();
        return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
    };
    model->set_scalers({vec(s.at("cond_shift")), vec(s.at("cond_scale")), vec(s.at("y_shift")), vec(s.at("y_scale"))});
    return model;
}

}  // namespace cdpo::gen
