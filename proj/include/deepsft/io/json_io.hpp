#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "deepsft/geometry/camera.hpp"
#include "deepsft/geometry/normalization.hpp"

namespace deepsft::geometry {

void to_json(nlohmann::json& j, const PerspectiveCamera& camera);
void from_json(const nlohmann::json& j, PerspectiveCamera& camera);
void to_json(nlohmann::json& j, const NormalizationSpec& spec);
void from_json(const nlohmann::json& j, NormalizationSpec& spec);

}  // namespace deepsft::geometry

namespace deepsft::io {

nlohmann::json read_json(const std::filesystem::path& path);
/// Pretty-printed, keys sorted, trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& value);

/// Camera-intrinsics file shared by datagen, ingestion, inference and adaptation.
geometry::PerspectiveCamera read_camera(const std::filesystem::path& path);
void write_camera(const std::filesystem::path& path, const geometry::PerspectiveCamera& camera);

/// 64-bit FNV-1a digest rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace deepsft::io
