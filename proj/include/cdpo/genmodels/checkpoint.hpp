#pragma once

#include <filesystem>
#include <optional>

#include "cdpo/genmodels/model.hpp"

namespace cdpo::gen {

inline constexpr int kCheckpointSchemaVersion = 1;

struct Checkpoint {
    std::unique_ptr<GenerativeModel> model;  // carries the live parameters
    std::optional<Vector> ema;               // shadow parameters of the target model
};

/// Self-describing record: schema version, family tag, architecture, flat
/// parameters and optional EMA parameters.
nlohmann::json checkpoint_to_json(const GenerativeModel& model, const std::optional<Vector>& ema = std::nullopt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

/// Atomic write (temporary file then rename).
void write_json_atomic(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

void save_checkpoint(const GenerativeModel& model, const std::filesystem::path& path,
                     const std::optional<Vector>& ema = std::nullopt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cdpo::gen
