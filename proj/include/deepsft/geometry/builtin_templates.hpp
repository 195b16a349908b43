#pragma once

#include <cstdint>

#include "deepsft/geometry/template.hpp"

namespace deepsft::geometry {

/// Flat rectangular sheet in the z = 0 plane, centred at the origin.
struct SheetParams {
    double width_mm = 297.0;   // along x
    double height_mm = 210.0;  // along y
    int columns = 33;          // vertices along x
    int rows = 24;             // vertices along y
    int texture_size = 512;
    std::uint64_t texture_seed = 7;
};

/// Closed capped tube along x with a three-bone chain rig.
struct TubeParams {
    double length_mm = 220.0;
    double radius_mm = 35.0;
    int segments_around = 32;
    int rings_along = 24;
    int texture_size = 512;
    std::uint64_t texture_seed = 11;
    double bend_limit_deg = 50.0;
    double twist_limit_deg = 25.0;
};

Template make_sheet_template(const SheetParams& params = {});
Template make_tube_template(const TubeParams& params = {});

/// Deterministic non-repetitive colour texture: smooth colour field, random discs, and a grid.
Image make_procedural_texture(int size, std::uint64_t seed);

}  // namespace deepsft::geometry
