#pragma once

#include <Eigen/Core>

#include "deepsft/geometry/camera.hpp"
#include "deepsft/grid.hpp"

namespace deepsft::inference {

/// Affine pixel map p = A p' + t from a new camera's image to an image with the
/// training camera's network-resolution intrinsics.
struct CameraAdaptationParams {
    Eigen::Matrix2d A = Eigen::Matrix2d::Identity();
    Eigen::Vector2d t = Eigen::Vector2d::Zero();
    geometry::PerspectiveCamera source;      // training camera at network resolution
    geometry::PerspectiveCamera new_camera;  // intrinsics of the images to adapt

    Eigen::Vector2d apply(const Eigen::Vector2d& p_new) const { return A * p_new + t; }
    Eigen::Vector2d inverse(const Eigen::Vector2d& p) const {
        return {(p.x() - t.x()) / A(0, 0), (p.y() - t.y()) / A(1, 1)};
    }
};

/// `source_native` is rescaled per axis to width x height (1920x1080 -> 480x270
/// divides by 4). Throws ConfigError for non-positive focal lengths.
CameraAdaptationParams compute_adaptation(const geometry::PerspectiveCamera& source_native,
                                          const geometry::PerspectiveCamera& new_camera, int width = 480,
                                          int height = 270);

/// Resamples any-channel image from the new camera onto the source grid with
/// bilinear interpolation; pixels whose pre-image falls outside the input are zero.
Grid<float> adapt_image(const Grid<float>& image, const CameraAdaptationParams& params);

}  // namespace deepsft::inference
