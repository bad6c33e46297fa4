#include "cdpo/train/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "cdpo/core/error.hpp"

namespace cdpo::train {

const char* to_string(Restriction r) { return r == Restriction::Full ? "full" : "linear"; }

Restriction restriction_from_string(const std::string& s) {
    if (s == "full") return Restriction::Full;
    if (s == "linear") return Restriction::Linear;
    throw InvalidArgument("unknown restriction '" + s + "' (expected full or linear)");
}

TrainConfig TrainConfig::defaults(Family family) {
    require(family != Family::Tabular, "training defaults exist for neural families only");
    TrainConfig c;
    c.family = family;
    StageConfig& n = c.stage1;
    StageConfig& t = c.stage2;
    n.optimizer = {OptimizerKind::SGD, 0.005, 0.9};
    n.model.family = family;
    n.model.hidden_width = 15;
    n.model.hidden_layers = 1;
    t = n;
    switch (family) {
        case Family::CNF:
            n.model.cnf.n_knots = 10;
            t.model.cnf.n_knots = 10;
            t.model.noise_y_var = 0.01;
            t.optimizer = {OptimizerKind::AdamW, 0.001};
            break;
        case Family::CGAN:
            n.optimizer.lr = 0.001;
            n.model.cgan.hidden = 15;
            t.model.cgan.hidden = 5;
            t.optimizer = {OptimizerKind::AdamW, 1e-4};
            break;
        case Family::CVAE:
            n.model.cvae.latent_dim = 3;
            n.model.cvae.hidden = 10;
            t.model.cvae.latent_dim = 3;
            t.model.cvae.hidden = 10;
            t.optimizer = {OptimizerKind::SGD, 0.001, 0.9};
            break;
        case Family::CDM:
            n.model.cdm.steps = 100;
            n.model.cdm.hidden = 15;
            t.model.cdm.steps = 100;
            t.model.cdm.hidden = 10;
            t.optimizer = {OptimizerKind::SGD, 0.005, 0.9};
            break;
        case Family::Tabular:
            break;
    }
    return c;
}

void TrainConfig::validate() const {
    require(ema_decay >= 0.0 && ema_decay < 1.0, "ema_decay must lie in [0, 1)");
    require(n_mc >= 1, "n_mc must be at least 1");
    require(clip_floor > 0.0 && clip_floor <= 1.0, "clip_floor must lie in (0, 1]");
    for (const StageConfig* s : {&stage1, &stage2}) {
        require(s->epochs > 0, "epochs must be positive");
        require(s->batch_size > 0, "batch size must be positive");
        require(s->optimizer.lr > 0.0, "learning rate must be positive");
        require(s->model.family == family, "stage model family differs from the configured family");
    }
}

namespace {

void check_keys(const YAML::Node& node, const std::set<std::string>& allowed, const std::string& where) {
    if (!node.IsMap()) throw SchemaError(where + " must be a mapping");
    for (const auto& kv : node) {
        const std::string key = kv.first.as<std::string>();
        if (!allowed.count(key)) throw SchemaError("unknown key '" + key + "' in " + where);
    }
}

template <class T>
void read(const YAML::Node& node, const char* key, T& out, const std::string& where) {
    if (!node[key]) return;
    try {
        out = node[key].as<T>();
    } catch (const YAML::Exception&) {
        throw SchemaError("invalid value for '" + std::string(key) + "' in " + where);
    }
}

void read_model(const YAML::Node& node, gen::NeuralModelConfig& m, const std::string& where) {
    check_keys(node,
               {"hidden_width", "hidden_layers", "noise_x_var", "noise_y_var", "output_scale", "n_knots", "tail_bound",
                "coupling_hidden", "gan_hidden", "latent_dim", "vae_hidden", "diffusion_steps", "eps_hidden",
                "time_dim", "schedule"},
               where);
    read(node, "hidden_width", m.hidden_width, where);
    read(node, "hidden_layers", m.hidden_layers, where);
    read(node, "noise_x_var", m.noise_x_var, where);
    read(node, "noise_y_var", m.noise_y_var, where);
    read(node, "output_scale", m.output_scale, where);
    read(node, "n_knots", m.cnf.n_knots, where);
    read(node, "tail_bound", m.cnf.bound, where);
    read(node, "coupling_hidden", m.cnf.ar_hidden, where);
    read(node, "gan_hidden", m.cgan.hidden, where);
    read(node, "latent_dim", m.cvae.latent_dim, where);
    read(node, "vae_hidden", m.cvae.hidden, where);
    read(node, "diffusion_steps", m.cdm.steps, where);
    read(node, "eps_hidden", m.cdm.hidden, where);
    read(node, "time_dim", m.cdm.time_dim, where);
    if (node["schedule"]) {
        const std::string s = node["schedule"].as<std::string>();
        if (s != "cosine" && s != "linear") throw SchemaError("schedule must be cosine or linear in " + where);
        m.cdm.schedule = s == "linear" ? gen::NoiseSchedule::Linear : gen::NoiseSchedule::Cosine;
    }
}

void read_stage(const YAML::Node& node, StageConfig& s, const std::string& where) {
    check_keys(node, {"optimizer", "lr", "momentum", "weight_decay", "batch_size", "epochs", "model"}, where);
    if (node["optimizer"]) s.optimizer.kind = optimizer_from_string(node["optimizer"].as<std::string>());
    read(node, "lr", s.optimizer.lr, where);
    read(node, "momentum", s.optimizer.momentum, where);
    read(node, "weight_decay", s.optimizer.weight_decay, where);
    read(node, "batch_size", s.batch_size, where);
    read(node, "epochs", s.epochs, where);
    if (node["model"]) read_model(node["model"], s.model, where + ".model");
}

void emit_stage(YAML::Emitter& out, const StageConfig& s) {
    const gen::NeuralModelConfig& m = s.model;
    out << YAML::BeginMap;
    out << YAML::Key << "optimizer" << YAML::Value << to_string(s.optimizer.kind);
    out << YAML::Key << "lr" << YAML::Value << s.optimizer.lr;
    out << YAML::Key << "momentum" << YAML::Value << s.optimizer.momentum;
    out << YAML::Key << "weight_decay" << YAML::Value << s.optimizer.weight_decay;
    out << YAML::Key << "batch_size" << YAML::Value << s.batch_size;
    out << YAML::Key << "epochs" << YAML::Value << s.epochs;
    out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "hidden_width" << YAML::Value << m.hidden_width;
    out << YAML::Key << "hidden_layers" << YAML::Value << m.hidden_layers;
    out << YAML::Key << "noise_x_var" << YAML::Value << m.noise_x_var;
    out << YAML::Key << "noise_y_var" << YAML::Value << m.noise_y_var;
    out << YAML::Key << "output_scale" << YAML::Value << m.output_scale;
    switch (m.family) {
        case Family::CNF:
            out << YAML::Key << "n_knots" << YAML::Value << m.cnf.n_knots;
            out << YAML::Key << "tail_bound" << YAML::Value << m.cnf.bound;
            out << YAML::Key << "coupling_hidden" << YAML::Value << m.cnf.ar_hidden;
            break;
        case Family::CGAN:
            out << YAML::Key << "gan_hidden" << YAML::Value << m.cgan.hidden;
            break;
        case Family::CVAE:
            out << YAML::Key << "latent_dim" << YAML::Value << m.cvae.latent_dim;
            out << YAML::Key << "vae_hidden" << YAML::Value << m.cvae.hidden;
            break;
        case Family::CDM:
            out << YAML::Key << "diffusion_steps" << YAML::Value << m.cdm.steps;
            out << YAML::Key << "eps_hidden" << YAML::Value << m.cdm.hidden;
            out << YAML::Key << "time_dim" << YAML::Value << m.cdm.time_dim;
            out << YAML::Key << "schedule" << YAML::Value
                << (m.cdm.schedule == gen::NoiseSchedule::Linear ? "linear" : "cosine");
            break;
        case Family::Tabular:
            break;
    }
    out << YAML::EndMap << YAML::EndMap;
}

}  // namespace

TrainConfig train_config_from_yaml(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw SchemaError(std::string("malformed YAML config: ") + e.what());
    }
    if (root.IsNull()) return TrainConfig::defaults(Family::CNF);
    check_keys(root,
               {"family", "learner", "restriction", "seed", "ema_decay", "n_mc", "clip_floor", "v_mask", "stage1",
                "stage2"},
               "config");
    Family family = Family::CNF;
    if (root["family"]) family = family_from_string(root["family"].as<std::string>());
    TrainConfig c = TrainConfig::defaults(family);
    if (root["learner"]) c.learner = loss::loss_from_string(root["learner"].as<std::string>());
    if (root["restriction"]) c.restriction = restriction_from_string(root["restriction"].as<std::string>());
    read(root, "seed", c.seed, "config");
    read(root, "ema_decay", c.ema_decay, "config");
    read(root, "n_mc", c.n_mc, "config");
    read(root, "clip_floor", c.clip_floor, "config");
    read(root, "v_mask", c.v_mask, "config");
    if (root["stage1"]) read_stage(root["stage1"], c.stage1, "stage1");
    // Target knots and covariate noise follow the nuisance unless set explicitly.
    const YAML::Node t_model = root["stage2"] && root["stage2"]["model"] ? root["stage2"]["model"] : YAML::Node();
    if (!t_model || !t_model["n_knots"]) c.stage2.model.cnf.n_knots = c.stage1.model.cnf.n_knots;
    if (!t_model || !t_model["noise_x_var"]) c.stage2.model.noise_x_var = c.stage1.model.noise_x_var;
    if (root["stage2"]) read_stage(root["stage2"], c.stage2, "stage2");
    c.validate();
    return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return train_config_from_yaml(ss.str());
}

std::string train_config_to_yaml(const TrainConfig& c) {
    YAML::Emitter out;
    out.SetDoublePrecision(17);
    out << YAML::BeginMap;
    out << YAML::Key << "family" << YAML::Value << to_string(c.family);
    out << YAML::Key << "learner" << YAML::Value << loss::to_string(c.learner);
    out << YAML::Key << "restriction" << YAML::Value << to_string(c.restriction);
    out << YAML::Key << "seed" << YAML::Value << c.seed;
    out << YAML::Key << "ema_decay" << YAML::Value << c.ema_decay;
    out << YAML::Key << "n_mc" << YAML::Value << c.n_mc;
    out << YAML::Key << "clip_floor" << YAML::Value << c.clip_floor;
    out << YAML::Key << "v_mask" << YAML::Value << YAML::Flow << c.v_mask;
    out << YAML::Key << "stage1" << YAML::Value;
    emit_stage(out, c.stage1);
    out << YAML::Key << "stage2" << YAML::Value;
    emit_stage(out, c.stage2);
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

}  // namespace cdpo::train
