#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "deepsft/datagen/deformation.hpp"
#include "deepsft/geometry/camera.hpp"
#include "deepsft/geometry/normalization.hpp"
#include "deepsft/geometry/template.hpp"
#include "deepsft/grid.hpp"

namespace deepsft::datagen {

/// Rigid object-to-camera transform: p_cam = rotation * p_obj + translation.
struct Pose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }
};

struct Light {
    enum class Kind { directional, point };
    Kind kind = Kind::directional;
    Eigen::Vector3d vector = -Eigen::Vector3d::UnitZ();  // direction towards the light, or position (camera frame)
    double intensity = 0.8;
    double specular = 0.3;
    double shininess = 32.0;
};

struct SceneSample {
    DeformationSample deformation;
    Pose pose;
    std::vector<Light> lights;
    double ambient = 0.25;
    Image background;        // camera resolution, RGB in [0,1]
    double blur_sigma = 0.0; // optional Gaussian blur of the final image (pixels)
};

/// Ranges for randomized viewpoint and lighting.
struct SceneConfig {
    double max_tilt_deg = 45.0;      // thin shells: tilt of the sheet normal away from the optical axis
    double lateral_fraction = 0.35;  // centroid offset as a fraction of the half field of view
    int min_lights = 1;
    int max_lights = 3;
    double min_intensity = 0.35;
    double max_intensity = 0.9;
    double max_specular = 0.5;
    double min_shininess = 4.0;
    double max_shininess = 96.0;
    double min_ambient = 0.15;
    double max_ambient = 0.35;
    double blur_sigma = 0.0;  // 0 disables blur augmentation
};

/// Procedural background: smooth colour gradient with random soft blobs.
Image procedural_background(int width, int height, std::mt19937_64& rng);

/// Random pose placing every vertex of the deformed object at a depth within
/// [z_min, z_max], with the centroid inside the image. Throws ConfigError if the
/// object cannot fit into the depth range.
Pose sample_pose(const geometry::Template& tmpl, const DeformationSample& deformation,
                 const geometry::PerspectiveCamera& camera, const geometry::NormalizationSpec& range,
                 const SceneConfig& config, std::mt19937_64& rng);

std::vector<Light> sample_lights(const SceneConfig& config, std::mt19937_64& rng);

/// Full scene: pose, lights, ambient level and background (procedural when `backgrounds` is empty).
SceneSample sample_scene(const geometry::Template& tmpl, DeformationSample deformation,
                         const geometry::PerspectiveCamera& camera, const geometry::NormalizationSpec& range,
                         const SceneConfig& config, const std::vector<Image>& backgrounds, std::mt19937_64& rng);

}  // namespace deepsft::datagen
