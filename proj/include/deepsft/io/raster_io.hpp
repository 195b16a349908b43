#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "deepsft/geometry/maps.hpp"
#include "deepsft/grid.hpp"

namespace deepsft::io {

/// 8-bit RGB image file (format from the extension, PNG recommended).
Image read_rgb(const std::filesystem::path& path);
void write_rgb(const std::filesystem::path& path, const Image& image);

/// Single-channel 32-bit float TIFF in mm; 0 marks background.
geometry::DepthMap read_depth(const std::filesystem::path& path);
void write_depth(const std::filesystem::path& path, const geometry::DepthMap& depth);

/// Two-page 32-bit float TIFF (u page, v page); -1 marks background.
geometry::WarpField read_warp(const std::filesystem::path& path);
void write_warp(const std::filesystem::path& path, const geometry::WarpField& warp);

/// Single-channel float raster (TIFF) of arbitrary values, e.g. normalized network output.
Grid<float> read_float_raster(const std::filesystem::path& path);
void write_float_raster(const std::filesystem::path& path, const Grid<float>& grid);

/// 8-bit mask image: 255 foreground, 0 background.
Mask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const Mask& mask);

/// ASCII PLY point cloud with optional per-point RGB in [0,1].
void write_ply(const std::filesystem::path& path, std::span<const Eigen::Vector3d> points,
               std::span<const Eigen::Vector3f> colors = {});
std::vector<Eigen::Vector3d> read_ply_points(const std::filesystem::path& path);

}  // namespace deepsft::io
