#include "cdpo/genmodels/checkpoint.hpp"

#include <fstream>

#include "cdpo/core/error.hpp"

namespace cdpo::gen {

namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector from_std(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json checkpoint_to_json(const GenerativeModel& model, const std::optional<Vector>& ema) {
    nlohmann::json j;
    j["schema_version"] = kCheckpointSchemaVersion;
    j["family"] = to_string(model.family());
    j["architecture"] = model.architecture_json();
    j["params"] = to_std(model.parameters());
    if (ema) {
        require(ema->size() == model.num_params(), "EMA vector has wrong size");
        j["ema_params"] = to_std(*ema);
    }
    return j;
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
    if (!j.contains("schema_version") || j.at("schema_version").get<int>() != kCheckpointSchemaVersion)
        throw SchemaError("checkpoint schema version missing or unsupported");
    Rng rng(0);
    Checkpoint ck;
    ck.model = model_from_architecture(j.at("architecture"), rng);
    if (to_string(ck.model->family()) != j.at("family").get<std::string>())
        throw SchemaError("checkpoint family tag does not match its architecture");
    const Vector params = from_std(j.at("params").get<std::vector<double>>());
    if (params.size() != ck.model->num_params())
        throw SchemaError("checkpoint parameter count does not match its architecture");
    ck.model->set_parameters(params);
    if (j.contains("ema_params")) {
        ck.ema = from_std(j.at("ema_params").get<std::vector<double>>());
        if (ck.ema->size() != params.size()) throw SchemaError("checkpoint EMA vector has wrong size");
    }
    return ck;
}

void write_json_atomic(const nlohmann::json& j, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw SchemaError("cannot open '" + tmp.string() + "' for writing");
        out << j.dump(1) << '\n';
        if (!out) throw SchemaError("write to '" + tmp.string() + "' failed");
    }
    std::filesystem::rename(tmp, path);
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

void save_checkpoint(const GenerativeModel& model, const std::filesystem::path& path, const std::optional<Vector>& ema) {
    write_json_atomic(checkpoint_to_json(model, ema), path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_json(read_json(path)); }

}  // namespace cdpo::gen
