#include "deepsft/datagen/deformation.hpp"

#include <cmath>
#include <map>
#include <random>

#include <Eigen/Geometry>

#include "deepsft/error.hpp"
#include "deepsft/geometry/mesh.hpp"

namespace deepsft::datagen {

std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::cloth_sim: return "cloth-sim";
        case Provenance::rig: return "rig";
        case Provenance::rest: return "rest";
    }
    return "rest";
}

DeformationSample rest_sample(const geometry::Template& tmpl) { return {tmpl.vertices, Provenance::rest}; }

namespace {

struct DistanceConstraint {
    int a, b;
    double rest;
};

std::vector<int> boundary_vertices(const geometry::Template& tmpl) {
    std::map<geometry::Edge, int> uses;
    for (const auto& f : tmpl.faces) {
        for (int k = 0; k < 3; ++k) {
            const int a = f[k];
            const int b = f[(k + 1) % 3];
            ++uses[{std::min(a, b), std::max(a, b)}];
        }
    }
    std::vector<char> on_boundary(tmpl.vertices.size(), 0);
    for (const auto& [edge, count] : uses) {
        if (count == 1) {
            on_boundary[edge.first] = on_boundary[edge.second] = 1;
        }
    }
    std::vector<int> out;
    for (std::size_t i = 0; i < on_boundary.size(); ++i) {
        if (on_boundary[i]) out.push_back(static_cast<int>(i));
    }
    return out;
}

// per-iteration stiffness so that n iterations reach the requested overall stiffness
double iteration_stiffness(double k, int iterations) {
    return 1.0 - std::pow(1.0 - std::clamp(k, 0.0, 1.0), 1.0 / iterations);
}

}  // namespace

std::vector<DeformationSample> simulate_cloth(const geometry::Template& tmpl, const RandomForceConfig& forces,
                                              int steps, const ClothParams& params) {
    if (tmpl.kind != geometry::TemplateKind::thin_shell) {
        throw ConfigError("simulate_cloth requires a thin-shell template");
    }
    if (steps < 0 || params.solver_iterations <= 0 || !(params.dt > 0.0)) {
        throw ConfigError("simulate_cloth: invalid step count, iteration count or time step");
    }
    const std::size_t n = tmpl.vertices.size();
    std::vector<double> inv_mass(n, 1.0);
    for (int p : params.pinned) {
        if (p < 0 || static_cast<std::size_t>(p) >= n) {
            throw ConfigError("simulate_cloth: pinned vertex index out of range");
        }
        inv_mass[p] = 0.0;
    }

    std::vector<DistanceConstraint> stretch;
    for (const auto& [a, b] : geometry::mesh_edges(tmpl.faces)) {
        stretch.push_back({a, b, (tmpl.vertices[a] - tmpl.vertices[b]).norm()});
    }
    std::vector<DistanceConstraint> bend;
    for (const auto& [a, b] : geometry::bending_pairs(tmpl.faces)) {
        bend.push_back({a, b, (tmpl.vertices[a] - tmpl.vertices[b]).norm()});
    }
    const double k_stretch = iteration_stiffness(params.stiffness, params.solver_iterations);
    const double k_bend = iteration_stiffness(params.bend_stiffness, params.solver_iterations);

    const auto project = [&inv_mass](std::vector<Eigen::Vector3d>& p, const DistanceConstraint& c, double k) {
        const double w = inv_mass[c.a] + inv_mass[c.b];
        if (w == 0.0) return;
        const Eigen::Vector3d d = p[c.a] - p[c.b];
        const double len = d.norm();
        if (len < 1e-12) return;
        const Eigen::Vector3d corr = (k * (len - c.rest) / (len * w)) * d;
        p[c.a] -= inv_mass[c.a] * corr;
        p[c.b] += inv_mass[c.b] * corr;
    };

    const std::vector<int> contour = boundary_vertices(tmpl);
    std::mt19937_64 rng(forces.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<Eigen::Vector3d> external(n, Eigen::Vector3d::Zero());

    std::vector<Eigen::Vector3d> x = tmpl.vertices;
    std::vector<Eigen::Vector3d> v(n, Eigen::Vector3d::Zero());
    std::vector<Eigen::Vector3d> p(n);
    std::vector<DeformationSample> samples;
    samples.reserve(static_cast<std::size_t>(steps));

    for (int step = 0; step < steps; ++step) {
        if (forces.enabled && !contour.empty() && step % std::max(1, forces.change_every) == 0) {
            std::fill(external.begin(), external.end(), Eigen::Vector3d::Zero());
            std::uniform_int_distribution<std::size_t> pick(0, contour.size() - 1);
            for (int k = 0; k < forces.pairs; ++k) {
                const int a = contour[pick(rng)];
                const int b = contour[pick(rng)];
                if (a == b) continue;
                Eigen::Vector3d axis = x[b] - x[a];
                axis = axis.norm() > 1e-9 ? Eigen::Vector3d(axis.normalized()) : Eigen::Vector3d::UnitX();
                const double sign = unit(rng) < 0.0 ? -1.0 : 1.0;  // tensile or compressive
                const Eigen::Vector3d ra(unit(rng), unit(rng), unit(rng));
                const Eigen::Vector3d rb(unit(rng), unit(rng), unit(rng));
                const double mag = forces.magnitude * (0.5 + 0.25 * (unit(rng) + 1.0));
                external[a] += mag * (-sign * axis + ra).normalized();
                external[b] += mag * (sign * axis + rb).normalized();
            }
        }

        for (std::size_t i = 0; i < n; ++i) {
            if (inv_mass[i] > 0.0) {
                v[i] += params.dt * (params.gravity + external[i]);
                v[i] *= 1.0 - params.damping;
            } else {
                v[i].setZero();
            }
            p[i] = x[i] + params.dt * v[i];
        }
        for (int it = 0; it < params.solver_iterations; ++it) {
            for (const auto& c : stretch) project(p, c, k_stretch);
            for (const auto& c : bend) project(p, c, k_bend);
        }
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = (p[i] - x[i]) / params.dt;
            x[i] = p[i];
            if (!x[i].allFinite()) {
                throw NumericalError("cloth simulation diverged at step " + std::to_string(step) +
                                     " (non-finite position)");
            }
        }
        const auto distortion = geometry::edge_distortion(tmpl, x);
        if (distortion.max > 5.0 * params.epsilon) {
            throw NumericalError("cloth simulation diverged at step " + std::to_string(step) +
                                 " (max edge distortion " + std::to_string(distortion.max) + ")");
        }
        samples.push_back({x, Provenance::cloth_sim});
    }
    return samples;
}

std::vector<Eigen::Vector3d> pose_rig(const geometry::Template& tmpl, const std::vector<Eigen::Vector3d>& angles_deg) {
    if (!tmpl.rig) {
        throw ConfigError("unsupported template '" + tmpl.name + "': no rig");
    }
    const auto& rig = *tmpl.rig;
    if (angles_deg.size() != rig.bones.size()) {
        throw ConfigError("pose_rig: one angle triple per bone required");
    }
    constexpr double kDeg = 3.14159265358979323846 / 180.0;
    std::vector<Eigen::Affine3d> global(rig.bones.size());
    for (std::size_t b = 0; b < rig.bones.size(); ++b) {
        const auto& bone = rig.bones[b];
        const Eigen::Vector3d a = angles_deg[b] * kDeg;
        const Eigen::Matrix3d r = (Eigen::AngleAxisd(a.z(), Eigen::Vector3d::UnitZ()) *
                                   Eigen::AngleAxisd(a.y(), Eigen::Vector3d::UnitY()) *
                                   Eigen::AngleAxisd(a.x(), Eigen::Vector3d::UnitX()))
                                      .toRotationMatrix();
        Eigen::Affine3d local = Eigen::Affine3d::Identity();
        local.linear() = r;
        local.translation() = bone.head - r * bone.head;
        global[b] = bone.parent >= 0 ? global[bone.parent] * local : local;
    }
    std::vector<Eigen::Vector3d> out(tmpl.vertices.size());
    for (std::size_t i = 0; i < tmpl.vertices.size(); ++i) {
        const Eigen::Vector3d& rest = tmpl.vertices[i];
        Eigen::Vector3d offset = Eigen::Vector3d::Zero();
        for (std::size_t b = 0; b < rig.bones.size(); ++b) {
            const double w = rig.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b));
            if (w != 0.0) {
                offset += w * (global[b] * rest - rest);
            }
        }
        out[i] = rest + offset;
    }
    return out;
}

DeformationSample sample_rig_pose(const geometry::Template& tmpl, std::uint64_t seed) {
    if (!tmpl.rig) {
        throw ConfigError("unsupported template '" + tmpl.name + "': no rig");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Eigen::Vector3d> angles;
    for (const auto& bone : tmpl.rig->bones) {
        Eigen::Vector3d a;
        for (int k = 0; k < 3; ++k) {
            a[k] = bone.limits.min_deg[k] + unit(rng) * (bone.limits.max_deg[k] - bone.limits.min_deg[k]);
        }
        angles.push_back(a);
    }
    return {pose_rig(tmpl, angles), Provenance::rig};
}

}  // namespace deepsft::datagen
