#include "deepsft/datagen/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "deepsft/error.hpp"

namespace deepsft::datagen {

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::Quaterniond q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
    q.normalize();
    return q.toRotationMatrix();
}

Image resize_bilinear(const Image& src, int width, int height) {
    Image out(height, width, src.channels());
    const double sx = static_cast<double>(src.width()) / width;
    const double sy = static_cast<double>(src.height()) / height;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height() - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, src.height() - 1);
        const double ty = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width() - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, src.width() - 1);
            const double tx = fx - x0;
            for (int c = 0; c < src.channels(); ++c) {
                const double top = (1 - tx) * src.at(y0, x0, c) + tx * src.at(y0, x1, c);
                const double bottom = (1 - tx) * src.at(y1, x0, c) + tx * src.at(y1, x1, c);
                out.at(y, x, c) = static_cast<float>((1 - ty) * top + ty * bottom);
            }
        }
    }
    return out;
}

}  // namespace

Image procedural_background(int width, int height, std::mt19937_64& rng) {
    Image bg(height, width, 3);
    std::array<double, 3> c0{}, c1{};
    for (int c = 0; c < 3; ++c) {
        c0[c] = uniform(rng, 0.05, 0.95);
        c1[c] = uniform(rng, 0.05, 0.95);
    }
    const double angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double ca = std::cos(angle);
    const double sa = std::sin(angle);
    struct Blob {
        double x, y, r;
        std::array<double, 3> color;
    };
    std::vector<Blob> blobs(static_cast<std::size_t>(uniform(rng, 4.0, 12.0)));
    for (auto& b : blobs) {
        b = {uniform(rng, 0.0, width), uniform(rng, 0.0, height), uniform(rng, 10.0, 0.3 * width),
             {uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0)}};
    }
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double t = std::clamp(0.5 + ((x - 0.5 * width) * ca + (y - 0.5 * height) * sa) / width, 0.0, 1.0);
            std::array<double, 3> col{};
            for (int c = 0; c < 3; ++c) col[c] = (1 - t) * c0[c] + t * c1[c];
            for (const auto& b : blobs) {
                const double d2 = ((x - b.x) * (x - b.x) + (y - b.y) * (y - b.y)) / (b.r * b.r);
                const double a = 0.6 * std::exp(-d2);
                for (int c = 0; c < 3; ++c) col[c] = (1 - a) * col[c] + a * b.color[c];
            }
            for (int c = 0; c < 3; ++c) bg.at(y, x, c) = static_cast<float>(std::clamp(col[c], 0.0, 1.0));
        }
    }
    return bg;
}

Pose sample_pose(const geometry::Template& tmpl, const DeformationSample& deformation,
                 const geometry::PerspectiveCamera& camera, const geometry::NormalizationSpec& range,
                 const SceneConfig& config, std::mt19937_64& rng) {
    const auto& verts = deformation.vertices;
    if (verts.empty()) {
        throw ConfigError("sample_pose: empty deformation");
    }
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (const auto& v : verts) centroid += v;
    centroid /= static_cast<double>(verts.size());

    Eigen::Matrix3d rotation;
    if (tmpl.kind == geometry::TemplateKind::thin_shell) {
        // flip so the sheet's front (+z normal, texture upright) faces the camera
        const Eigen::Matrix3d flip = Eigen::AngleAxisd(std::numbers::pi, Eigen::Vector3d::UnitX()).toRotationMatrix();
        const double axis_angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        const Eigen::Vector3d tilt_axis(std::cos(axis_angle), std::sin(axis_angle), 0.0);
        const double tilt = uniform(rng, 0.0, config.max_tilt_deg) * std::numbers::pi / 180.0;
        const double roll = uniform(rng, -std::numbers::pi, std::numbers::pi);
        rotation = Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitZ()).toRotationMatrix() *
                   Eigen::AngleAxisd(tilt, tilt_axis).toRotationMatrix() * flip;
    } else {
        rotation = random_rotation(rng);
    }

    double z_lo = std::numeric_limits<double>::infinity();
    double z_hi = -z_lo;
    for (const auto& v : verts) {
        const double z = (rotation * (v - centroid)).z();
        z_lo = std::min(z_lo, z);
        z_hi = std::max(z_hi, z);
    }
    // centroid depth range keeping every vertex inside [z_min, z_max]
    const double d_min = range.z_min - z_lo;
    const double d_max = range.z_max - z_hi;
    if (d_min > d_max) {
        throw ConfigError("object does not fit into the configured depth range");
    }
    const double margin = 0.02 * (d_max - d_min);
    const double depth = uniform(rng, d_min + margin, d_max - margin);
    const double half_u = 0.5 * camera.width / camera.fu;
    const double half_v = 0.5 * camera.height / camera.fv;
    const double centre_u = (0.5 * camera.width - camera.cu) / camera.fu;
    const double centre_v = (0.5 * camera.height - camera.cv) / camera.fv;
    const double ru = centre_u + uniform(rng, -1.0, 1.0) * config.lateral_fraction * half_u;
    const double rv = centre_v + uniform(rng, -1.0, 1.0) * config.lateral_fraction * half_v;

    Pose pose;
    pose.rotation = rotation;
    pose.translation = Eigen::Vector3d(ru * depth, rv * depth, depth) - rotation * centroid;
    return pose;
}

std::vector<Light> sample_lights(const SceneConfig& config, std::mt19937_64& rng) {
    const int count = std::uniform_int_distribution<int>(config.min_lights, config.max_lights)(rng);
    std::vector<Light> lights;
    for (int i = 0; i < count; ++i) {
        Light l;
        if (uniform(rng, 0.0, 1.0) < 0.7) {
            l.kind = Light::Kind::directional;
            l.vector = Eigen::Vector3d(uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0), -uniform(rng, 0.6, 1.6))
                           .normalized();
        } else {
            l.kind = Light::Kind::point;
            l.vector = Eigen::Vector3d(uniform(rng, -600.0, 600.0), uniform(rng, -600.0, 600.0),
                                       uniform(rng, -300.0, 200.0));
        }
        l.intensity = uniform(rng, config.min_intensity, config.max_intensity) / std::sqrt(static_cast<double>(count));
        l.specular = uniform(rng, 0.0, config.max_specular);
        l.shininess = uniform(rng, config.min_shininess, config.max_shininess);
        lights.push_back(l);
    }
    return lights;
}

SceneSample sample_scene(const geometry::Template& tmpl, DeformationSample deformation,
                         const geometry::PerspectiveCamera& camera, const geometry::NormalizationSpec& range,
                         const SceneConfig& config, const std::vector<Image>& backgrounds, std::mt19937_64& rng) {
    SceneSample scene;
    scene.pose = sample_pose(tmpl, deformation, camera, range, config, rng);
    scene.deformation = std::move(deformation);
    scene.lights = sample_lights(config, rng);
    scene.ambient = uniform(rng, config.min_ambient, config.max_ambient);
    scene.blur_sigma = config.blur_sigma;
    if (backgrounds.empty()) {
        scene.background = procedural_background(camera.width, camera.height, rng);
    } else {
        const auto idx = std::uniform_int_distribution<std::size_t>(0, backgrounds.size() - 1)(rng);
        scene.background = resize_bilinear(backgrounds[idx], camera.width, camera.height);
    }
    return scene;
}

}  // namespace deepsft::datagen
