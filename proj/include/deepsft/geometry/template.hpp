#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "deepsft/grid.hpp"

namespace deepsft::geometry {

enum class TemplateKind { thin_shell, volumetric };

std::string to_string(TemplateKind kind);
TemplateKind template_kind_from_string(const std::string& name);

/// Rectangle of the unit atlas square occupied by one flattened texture chart.
struct Chart {
    std::string name;
    double u0 = 0.0, v0 = 0.0, u1 = 1.0, v1 = 1.0;
};

/// Rotation limits of one joint in degrees, per axis (x, y, z) of the bone's rest frame.
struct JointLimits {
    Eigen::Vector3d min_deg = Eigen::Vector3d::Zero();
    Eigen::Vector3d max_deg = Eigen::Vector3d::Zero();
};

struct Bone {
    std::string name;
    int parent = -1;            // -1 for the root
    Eigen::Vector3d head;       // joint position in the rest pose (mm)
    JointLimits limits;
};

/// Skeleton with per-vertex linear-blend skinning weights (rows sum to 1).
struct Rig {
    std::vector<Bone> bones;
    Eigen::MatrixXd weights;  // vertex_count x bone_count

    void validate(std::size_t vertex_count) const;
};

/// Deformable object model: triangle mesh in mm, per-vertex atlas coordinates,
/// texture raster, chart packing, and an optional skinning rig.
///
/// The atlas-to-surface map is the barycentric interpolation of vertex positions
/// over the face whose atlas triangle contains the query coordinate.
struct Template {
    std::string name = "template";
    TemplateKind kind = TemplateKind::thin_shell;
    std::vector<Eigen::Vector3d> vertices;
    std::vector<std::array<int, 3>> faces;
    std::vector<Eigen::Vector2d> atlas_uv;
    Image texture;  // texture row = v * height, column = u * width
    std::vector<Chart> charts;
    std::optional<Rig> rig;

    /// Checks indices, atlas range, rig shape, and per-chart injectivity of the
    /// atlas map by sampling an n x n grid of atlas points. Throws ConfigError.
    void validate(int injectivity_samples = 256) const;
};

/// Face index plus barycentric weights of an atlas query.
struct AtlasHit {
    int face = -1;
    Eigen::Vector3d barycentric = Eigen::Vector3d::Zero();
};

/// Spatial index over the atlas triangles for point location.
class AtlasLocator {
public:
    explicit AtlasLocator(const Template& tmpl, int bins = 64);

    /// Face containing uv, tolerating points a hair outside chart borders.
    std::optional<AtlasHit> locate(const Eigen::Vector2d& uv) const;

    /// Surface point Δ(uv) on the mesh with the given (possibly deformed) vertex positions.
    std::optional<Eigen::Vector3d> surface_point(const Eigen::Vector2d& uv,
                                                 std::span<const Eigen::Vector3d> vertices) const;

private:
    std::vector<std::array<int, 3>> faces_;
    std::vector<Eigen::Vector2d> uv_;
    int bins_;
    std::vector<std::vector<int>> cells_;
};

/// Barycentric coordinates of p in triangle (a, b, c); nullopt for degenerate triangles.
std::optional<Eigen::Vector3d> barycentric(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                                           const Eigen::Vector2d& b, const Eigen::Vector2d& c);

}  // namespace deepsft::geometry
