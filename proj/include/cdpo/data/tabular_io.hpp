#pragma once

#include <filesystem>
#include <optional>

#include "cdpo/data/dataset.hpp"

namespace cdpo::data {

/// Optional expectations checked when loading. Unset fields are inferred from
/// the header row.
struct TabularSchema {
    std::optional<int> dx;
    std::optional<int> dy;
    bool require_joint_po = false;
};

/// Comma-separated text with header `x_0..x_{dx-1},a,y_0..y_{dy-1}` and
/// optional `y0_*`, `y1_*` blocks. Floats are written with 17 significant
/// digits so a round trip is bit-exact.
void save_tabular_dataset(const PODataset& ds, const std::filesystem::path& path);

/// Throws SchemaError naming the row (1-based data row) for missing columns,
/// non-binary treatments, unparsable or NaN values.
PODataset load_tabular_dataset(const std::filesystem::path& path, const TabularSchema& schema = {});

}  // namespace cdpo::data
