#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "deepsft/geometry/template.hpp"

namespace deepsft::datagen {

enum class Provenance { cloth_sim, rig, rest };

std::string to_string(Provenance p);

/// Deformed template vertex positions (mm) in the template's object frame.
struct DeformationSample {
    std::vector<Eigen::Vector3d> vertices;
    Provenance provenance = Provenance::rest;
};

DeformationSample rest_sample(const geometry::Template& tmpl);

/// Position-based dynamics settings. Lengths in mm, time in s.
struct ClothParams {
    double dt = 1.0 / 60.0;
    int solver_iterations = 20;
    double stiffness = 1.0;       // edge distance constraints, (0, 1]
    double bend_stiffness = 0.1;  // distance constraints across adjacent faces, [0, 1]
    double damping = 0.02;        // fraction of velocity removed per step
    Eigen::Vector3d gravity = Eigen::Vector3d::Zero();
    std::vector<int> pinned;      // vertices held at their rest position
    double epsilon = 0.05;        // quasi-isometry bound on mean edge distortion
};

/// Tensile / compressive forces on pairs of contour vertices, redrawn every
/// `change_every` steps in randomized 3D directions.
struct RandomForceConfig {
    bool enabled = false;
    double magnitude = 6000.0;  // mm / s^2 per affected vertex
    int change_every = 30;
    int pairs = 2;
    std::uint64_t seed = 0;
};

/// One sample per step. Throws ConfigError for non-thin-shell templates and
/// NumericalError naming the step if positions become non-finite or the maximum
/// edge distortion exceeds 5 * epsilon.
std::vector<DeformationSample> simulate_cloth(const geometry::Template& tmpl, const RandomForceConfig& forces,
                                              int steps, const ClothParams& params);

/// Joint rotations (degrees about x, y, z of each bone) applied with linear-blend skinning.
std::vector<Eigen::Vector3d> pose_rig(const geometry::Template& tmpl, const std::vector<Eigen::Vector3d>& angles_deg);

/// Joint angles uniform within the rig limits. Throws ConfigError when the template has no rig.
DeformationSample sample_rig_pose(const geometry::Template& tmpl, std::uint64_t seed);

}  // namespace deepsft::datagen
