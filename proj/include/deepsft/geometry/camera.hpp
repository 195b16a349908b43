#pragma once

#include <Eigen/Core>

namespace deepsft::geometry {

/// Distortion-free pinhole camera.
///
/// Pixel coordinates are continuous with the centre of pixel (row, col) at
/// (col + 0.5, row + 0.5). With this convention resizing an image by a factor
/// s scales every intrinsic by exactly s.
struct PerspectiveCamera {
    double fu = 1.0;
    double fv = 1.0;
    double cu = 0.0;
    double cv = 0.0;
    int width = 1;
    int height = 1;

    /// Throws ConfigError unless focals and resolution are positive.
    void validate() const;

    /// Intrinsics of the same camera after resampling to width x height.
    PerspectiveCamera resized(int new_width, int new_height) const;

    /// Continuous pixel coordinate of a pixel centre.
    static Eigen::Vector2d pixel_center(int row, int col) { return {col + 0.5, row + 0.5}; }

    /// Retinal (normalized) coordinates of a pixel position.
    Eigen::Vector2d to_retinal(const Eigen::Vector2d& pixel) const {
        return {(pixel.x() - cu) / fu, (pixel.y() - cv) / fv};
    }
    Eigen::Vector2d to_pixel(const Eigen::Vector2d& retinal) const {
        return {fu * retinal.x() + cu, fv * retinal.y() + cv};
    }

    friend bool operator==(const PerspectiveCamera&, const PerspectiveCamera&) = default;
};

/// Kinect V2 colour camera at its native 1920x1080 resolution.
PerspectiveCamera kinect_v2_native();
/// Intel Realsense D435 colour camera at its native 1270x720 resolution.
PerspectiveCamera realsense_d435_native();
/// Network-resolution (480x270) training camera derived from the Kinect V2.
PerspectiveCamera default_training_camera();

/// Perspective projection of a camera-frame point to pixel coordinates.
/// Throws DomainError when p.z() <= 0.
Eigen::Vector2d project_point(const Eigen::Vector3d& p, const PerspectiveCamera& camera);

/// Normalized projection (x/z, y/z). Throws DomainError when p.z() <= 0.
Eigen::Vector2d project_normalized(const Eigen::Vector3d& p);

/// Perspective embedding rho * (u, v, 1) of retinal coordinates.
/// Throws DomainError when rho <= 0.
Eigen::Vector3d embed(double u, double v, double rho);

}  // namespace deepsft::geometry
