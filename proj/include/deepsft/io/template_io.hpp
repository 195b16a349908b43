#pragma once

#include <filesystem>

#include "deepsft/geometry/template.hpp"

namespace deepsft::io {

/// Writes `mesh.obj` (positions + per-vertex texture coordinates), `texture.png`
/// and `template.json` (units, kind, chart packing, optional rig) into dir.
void save_template(const std::filesystem::path& dir, const geometry::Template& tmpl);

/// Loads and validates a template directory written by save_template.
geometry::Template load_template(const std::filesystem::path& dir);

}  // namespace deepsft::io
