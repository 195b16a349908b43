#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "deepsft/geometry/template.hpp"

namespace deepsft::geometry {

using Edge = std::pair<int, int>;

/// Unique undirected edges (i < j), sorted.
std::vector<Edge> mesh_edges(std::span<const std::array<int, 3>> faces);

/// For every interior edge shared by two faces, the two vertices opposite to it.
std::vector<Edge> bending_pairs(std::span<const std::array<int, 3>> faces);

/// Area-weighted unit vertex normals.
std::vector<Eigen::Vector3d> vertex_normals(std::span<const Eigen::Vector3d> vertices,
                                            std::span<const std::array<int, 3>> faces);

/// Vertex positions merged by exact coordinate equality; maps each vertex to a
/// representative index. Seam duplicates of a closed mesh share a representative.
std::vector<int> weld_map(std::span<const Eigen::Vector3d> vertices);

struct EdgeDistortion {
    double mean = 0.0;
    double max = 0.0;
    std::size_t edges = 0;
    std::size_t skipped_degenerate = 0;
};

/// Relative edge length change |len_deformed - len_rest| / len_rest over all mesh
/// edges. Zero-length rest edges are counted and skipped.
EdgeDistortion edge_distortion(const Template& tmpl, std::span<const Eigen::Vector3d> deformed_vertices);

}  // namespace deepsft::geometry
