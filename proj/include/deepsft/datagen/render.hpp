#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "deepsft/datagen/scene.hpp"
#include "deepsft/geometry/camera.hpp"
#include "deepsft/geometry/maps.hpp"
#include "deepsft/geometry/template.hpp"

namespace deepsft::datagen {

/// One rendered sample with pixel-aligned ground truth.
struct FrameRecord {
    Image rgb;
    geometry::DepthMap depth;
    geometry::WarpField warp;
    geometry::PerspectiveCamera camera;
    std::shared_ptr<const SceneSample> scene;
    std::vector<std::string> warnings;
};

/// Z-buffered rasterization at the camera resolution. Depth and warp come from
/// the front-most fragment with perspective-correct interpolation; the colour is
/// Lambertian + Phong over the atlas texture composited over the background.
FrameRecord rasterize_frame(std::shared_ptr<const SceneSample> scene, const geometry::Template& tmpl,
                            const geometry::PerspectiveCamera& camera);

/// Brute-force ray/triangle intersection against every triangle of the posed mesh.
class RaycastOracle {
public:
    RaycastOracle(const SceneSample& scene, const geometry::Template& tmpl, const geometry::PerspectiveCamera& camera);

    /// Depth (mm) of the nearest positive hit through the centre of (row, col); nullopt for background.
    std::optional<double> depth(int row, int col) const;

private:
    std::vector<Eigen::Vector3d> posed_;
    std::vector<std::array<int, 3>> faces_;
    geometry::PerspectiveCamera camera_;
};

/// Single-pixel convenience wrapper around RaycastOracle.
std::optional<double> raycast_depth_oracle(const SceneSample& scene, const geometry::Template& tmpl,
                                           const geometry::PerspectiveCamera& camera, int row, int col);

/// Agreement statistics between a frame's ground truth and independent recomputation.
struct ConsistencyStats {
    std::size_t foreground = 0;
    std::size_t depth_agree = 0;       // |rasterized - raycast| <= 0.1% relative
    std::size_t reprojection_agree = 0;// warp -> atlas map -> deformed surface -> projection within 0.5 px, depth within 0.1%
    double max_reprojection_px = 0.0;

    double depth_fraction() const { return foreground ? static_cast<double>(depth_agree) / foreground : 1.0; }
    double reprojection_fraction() const {
        return foreground ? static_cast<double>(reprojection_agree) / foreground : 1.0;
    }
};

/// Checks every foreground pixel of a rendered frame against the ray-casting
/// oracle and the warp / atlas-map / projection round trip.
ConsistencyStats check_frame_consistency(const FrameRecord& frame, const geometry::Template& tmpl);

/// Object-frame vertices posed into the camera frame.
std::vector<Eigen::Vector3d> posed_vertices(const SceneSample& scene);

}  // namespace deepsft::datagen
