#include "deepsft/geometry/camera.hpp"

#include <cmath>
#include <string>

#include "deepsft/error.hpp"

namespace deepsft::geometry {

void PerspectiveCamera::validate() const {
    if (!(fu > 0.0) || !(fv > 0.0)) {
        throw ConfigError("camera focal lengths must be positive");
    }
    if (width <= 0 || height <= 0) {
        throw ConfigError("camera resolution must be positive");
    }
    if (!std::isfinite(cu) || !std::isfinite(cv)) {
        throw ConfigError("camera principal point must be finite");
    }
}

PerspectiveCamera PerspectiveCamera::resized(int new_width, int new_height) const {
    const double sx = static_cast<double>(new_width) / width;
    const double sy = static_cast<double>(new_height) / height;
    return {fu * sx, fv * sy, cu * sx, cv * sy, new_width, new_height};
}

PerspectiveCamera kinect_v2_native() { return {1057.8, 1064.0, 947.64, 530.38, 1920, 1080}; }

PerspectiveCamera realsense_d435_native() { return {915.457, 915.457, 645.511, 366.344, 1270, 720}; }

PerspectiveCamera default_training_camera() { return kinect_v2_native().resized(480, 270); }

Eigen::Vector2d project_normalized(const Eigen::Vector3d& p) {
    if (!(p.z() > 0.0)) {
        throw DomainError("project_point: point behind the camera (z = " + std::to_string(p.z()) + ")");
    }
    return {p.x() / p.z(), p.y() / p.z()};
}

Eigen::Vector2d project_point(const Eigen::Vector3d& p, const PerspectiveCamera& camera) {
    return camera.to_pixel(project_normalized(p));
}

Eigen::Vector3d embed(double u, double v, double rho) {
    if (!(rho > 0.0)) {
        throw DomainError("embed: depth must be positive (rho = " + std::to_string(rho) + ")");
    }
    return {rho * u, rho * v, rho};
}

}  // namespace deepsft::geometry
