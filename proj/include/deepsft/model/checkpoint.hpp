#pragma once

#include <filesystem>

#include <json.hpp>

#include "deepsft/geometry/normalization.hpp"
#include "deepsft/model/network.hpp"

namespace deepsft::model {

struct Checkpoint {
    static constexpr int kFormatVersion = 1;

    DeepSfTModel model{nullptr};
    geometry::NormalizationSpec normalization;
    nlohmann::json history = nlohmann::json::array();  // one record per completed training stage
};

/// Writes every parameter and buffer plus a metadata record (format version,
/// init spec, model config, normalization, stage history).
void save_checkpoint(const std::filesystem::path& path, DeepSfTModel& model,
                     const geometry::NormalizationSpec& normalization,
                     const nlohmann::json& history = nlohmann::json::array());

/// Rebuilds the architecture from the metadata, then loads the tensors.
/// Throws IoError for unreadable files and ConfigError for version mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path, torch::Device device = torch::kCPU);

nlohmann::json read_checkpoint_metadata(const std::filesystem::path& path);

}  // namespace deepsft::model
