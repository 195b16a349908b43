#include "deepsft/datagen/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Geometry>
#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "deepsft/error.hpp"
#include "deepsft/geometry/mesh.hpp"

namespace deepsft::datagen {

namespace {

constexpr double kNear = 1e-3;

Eigen::Vector3f sample_texture(const Image& tex, const Eigen::Vector2d& uv) {
    const double fx = std::clamp(uv.x() * tex.width() - 0.5, 0.0, tex.width() - 1.0);
    const double fy = std::clamp(uv.y() * tex.height() - 0.5, 0.0, tex.height() - 1.0);
    const int x0 = static_cast<int>(fx);
    const int y0 = static_cast<int>(fy);
    const int x1 = std::min(x0 + 1, tex.width() - 1);
    const int y1 = std::min(y0 + 1, tex.height() - 1);
    const double tx = fx - x0;
    const double ty = fy - y0;
    Eigen::Vector3f out;
    for (int c = 0; c < 3; ++c) {
        const double top = (1 - tx) * tex.at(y0, x0, c) + tx * tex.at(y0, x1, c);
        const double bottom = (1 - tx) * tex.at(y1, x0, c) + tx * tex.at(y1, x1, c);
        out[c] = static_cast<float>((1 - ty) * top + ty * bottom);
    }
    return out;
}

Eigen::Vector3d shade(const SceneSample& scene, const Eigen::Vector3d& position, Eigen::Vector3d normal,
                      const Eigen::Vector3f& albedo) {
    const Eigen::Vector3d to_eye = (-position).normalized();
    if (normal.dot(to_eye) < 0.0) {
        normal = -normal;  // two-sided surfaces
    }
    Eigen::Vector3d colour = scene.ambient * albedo.cast<double>();
    for (const auto& light : scene.lights) {
        const Eigen::Vector3d to_light = light.kind == Light::Kind::directional
                                             ? Eigen::Vector3d(light.vector.normalized())
                                             : Eigen::Vector3d((light.vector - position).normalized());
        const double diffuse = std::max(0.0, normal.dot(to_light));
        if (diffuse <= 0.0) continue;
        const Eigen::Vector3d reflected = 2.0 * normal.dot(to_light) * normal - to_light;
        const double spec = light.specular * std::pow(std::max(0.0, reflected.dot(to_eye)), light.shininess);
        colour += light.intensity * (diffuse * albedo.cast<double>() + Eigen::Vector3d::Constant(spec));
    }
    return colour.cwiseMax(0.0).cwiseMin(1.0);
}

}  // namespace

std::vector<Eigen::Vector3d> posed_vertices(const SceneSample& scene) {
    std::vector<Eigen::Vector3d> out;
    out.reserve(scene.deformation.vertices.size());
    for (const auto& v : scene.deformation.vertices) {
        out.push_back(scene.pose.apply(v));
    }
    return out;
}

FrameRecord rasterize_frame(std::shared_ptr<const SceneSample> scene_ptr, const geometry::Template& tmpl,
                            const geometry::PerspectiveCamera& camera) {
    if (!scene_ptr) {
        throw ConfigError("rasterize_frame: missing scene");
    }
    camera.validate();
    const SceneSample& scene = *scene_ptr;
    if (scene.deformation.vertices.size() != tmpl.vertices.size()) {
        throw ShapeError("rasterize_frame: deformation does not match the template");
    }
    const int w = camera.width;
    const int h = camera.height;
    const auto posed = posed_vertices(scene);

    // normals are accumulated on welded positions so seam duplicates shade alike
    const auto weld = geometry::weld_map(tmpl.vertices);
    auto normals = geometry::vertex_normals(posed, tmpl.faces);
    {
        std::vector<Eigen::Vector3d> acc(posed.size(), Eigen::Vector3d::Zero());
        for (const auto& f : tmpl.faces) {
            const Eigen::Vector3d n = (posed[f[1]] - posed[f[0]]).cross(posed[f[2]] - posed[f[0]]);
            for (int idx : f) acc[weld[idx]] += n;
        }
        for (std::size_t i = 0; i < posed.size(); ++i) {
            const Eigen::Vector3d& n = acc[weld[i]];
            if (n.norm() > 0.0) normals[i] = n.normalized();
        }
    }

    std::vector<double> zbuf(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::infinity());
    std::vector<int> face_of(static_cast<std::size_t>(w) * h, -1);
    std::vector<Eigen::Vector3d> bary_of(static_cast<std::size_t>(w) * h);

    std::vector<Eigen::Vector2d> screen(posed.size());
    std::vector<char> visible(posed.size(), 0);
    for (std::size_t i = 0; i < posed.size(); ++i) {
        if (posed[i].z() > kNear) {
            screen[i] = geometry::project_point(posed[i], camera);
            visible[i] = 1;
        }
    }

    for (std::size_t fi = 0; fi < tmpl.faces.size(); ++fi) {
        const auto& f = tmpl.faces[fi];
        if (!visible[f[0]] || !visible[f[1]] || !visible[f[2]]) {
            continue;  // no near-plane clipping; depth ranges keep objects far in front
        }
        const Eigen::Vector2d& a = screen[f[0]];
        const Eigen::Vector2d& b = screen[f[1]];
        const Eigen::Vector2d& c = screen[f[2]];
        const double area = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
        if (std::abs(area) < 1e-12) {
            continue;
        }
        const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.x(), b.x(), c.x()}) - 0.5)));
        const int x1 = std::min(w - 1, static_cast<int>(std::ceil(std::max({a.x(), b.x(), c.x()}) - 0.5)));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.y(), b.y(), c.y()}) - 0.5)));
        const int y1 = std::min(h - 1, static_cast<int>(std::ceil(std::max({a.y(), b.y(), c.y()}) - 0.5)));
        const double za = posed[f[0]].z();
        const double zb = posed[f[1]].z();
        const double zc = posed[f[2]].z();
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const Eigen::Vector2d p(x + 0.5, y + 0.5);
                const double wa = ((b - p).x() * (c - p).y() - (b - p).y() * (c - p).x()) / area;
                const double wb = ((c - p).x() * (a - p).y() - (c - p).y() * (a - p).x()) / area;
                const double wc = 1.0 - wa - wb;
                if (wa < 0.0 || wb < 0.0 || wc < 0.0) {
                    continue;
                }
                // perspective-correct weights: screen barycentrics divided by depth
                const double qa = wa / za;
                const double qb = wb / zb;
                const double qc = wc / zc;
                const double inv_z = qa + qb + qc;
                const double z = 1.0 / inv_z;
                const std::size_t idx = static_cast<std::size_t>(y) * w + x;
                if (z < zbuf[idx]) {
                    zbuf[idx] = z;
                    face_of[idx] = static_cast<int>(fi);
                    bary_of[idx] = Eigen::Vector3d(qa, qb, qc) * z;
                }
            }
        }
    }

    FrameRecord frame;
    frame.camera = camera;
    frame.scene = scene_ptr;
    frame.depth = geometry::DepthMap(h, w);
    frame.warp = geometry::WarpField(h, w);
    frame.rgb = scene.background.height() == h && scene.background.width() == w ? scene.background : Image(h, w, 3);

    std::size_t foreground = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * w + x;
            const int fi = face_of[idx];
            if (fi < 0) continue;
            ++foreground;
            const auto& f = tmpl.faces[fi];
            const Eigen::Vector3d& bc = bary_of[idx];
            frame.depth.set(y, x, zbuf[idx]);
            const Eigen::Vector2d uv =
                (bc[0] * tmpl.atlas_uv[f[0]] + bc[1] * tmpl.atlas_uv[f[1]] + bc[2] * tmpl.atlas_uv[f[2]])
                    .cwiseMax(0.0)
                    .cwiseMin(1.0);
            frame.warp.set(y, x, uv.x(), uv.y());
            const Eigen::Vector3d position = bc[0] * posed[f[0]] + bc[1] * posed[f[1]] + bc[2] * posed[f[2]];
            const Eigen::Vector3d normal =
                (bc[0] * normals[f[0]] + bc[1] * normals[f[1]] + bc[2] * normals[f[2]]).normalized();
            const Eigen::Vector3d colour = shade(scene, position, normal, sample_texture(tmpl.texture, uv));
            for (int c = 0; c < 3; ++c) {
                frame.rgb.at(y, x, c) = static_cast<float>(colour[c]);
            }
        }
    }
    if (foreground == 0) {
        frame.warnings.push_back("empty foreground: object outside the view frustum");
    }
    if (scene.blur_sigma > 0.0) {
        cv::Mat m(h, w, CV_32FC3, frame.rgb.data());
        cv::GaussianBlur(m, m, cv::Size(0, 0), scene.blur_sigma);
    }
    return frame;
}

RaycastOracle::RaycastOracle(const SceneSample& scene, const geometry::Template& tmpl,
                             const geometry::PerspectiveCamera& camera)
    : posed_(posed_vertices(scene)), faces_(tmpl.faces), camera_(camera) {}

std::optional<double> RaycastOracle::depth(int row, int col) const {
    const Eigen::Vector2d r = camera_.to_retinal(geometry::PerspectiveCamera::pixel_center(row, col));
    const Eigen::Vector3d dir(r.x(), r.y(), 1.0);  // unit z component: ray parameter equals depth
    std::optional<double> best;
    for (const auto& f : faces_) {
        // Moller-Trumbore
        const Eigen::Vector3d& v0 = posed_[f[0]];
        const Eigen::Vector3d e1 = posed_[f[1]] - v0;
        const Eigen::Vector3d e2 = posed_[f[2]] - v0;
        const Eigen::Vector3d pvec = dir.cross(e2);
        const double det = e1.dot(pvec);
        if (std::abs(det) < 1e-14) continue;
        const double inv_det = 1.0 / det;
        const Eigen::Vector3d tvec = -v0;
        const double u = tvec.dot(pvec) * inv_det;
        if (u < 0.0 || u > 1.0) continue;
        const Eigen::Vector3d qvec = tvec.cross(e1);
        const double v = dir.dot(qvec) * inv_det;
        if (v < 0.0 || u + v > 1.0) continue;
        const double t = e2.dot(qvec) * inv_det;
        if (t > kNear && (!best || t < *best)) {
            best = t;
        }
    }
    return best;
}

std::optional<double> raycast_depth_oracle(const SceneSample& scene, const geometry::Template& tmpl,
                                           const geometry::PerspectiveCamera& camera, int row, int col) {
    return RaycastOracle(scene, tmpl, camera).depth(row, col);
}

ConsistencyStats check_frame_consistency(const FrameRecord& frame, const geometry::Template& tmpl) {
    if (!frame.scene) {
        throw ConfigError("check_frame_consistency: frame carries no scene");
    }
    const SceneSample& scene = *frame.scene;
    const RaycastOracle oracle(scene, tmpl, frame.camera);
    const geometry::AtlasLocator locator(tmpl);
    ConsistencyStats stats;
    for (int y = 0; y < frame.depth.height(); ++y) {
        for (int x = 0; x < frame.depth.width(); ++x) {
            if (!frame.depth.mask(y, x)) continue;
            ++stats.foreground;
            const double z = frame.depth.value(y, x);
            if (const auto ray = oracle.depth(y, x); ray && std::abs(z - *ray) <= 1e-3 * *ray) {
                ++stats.depth_agree;
            }
            if (!frame.warp.mask(y, x)) continue;
            const auto q = locator.surface_point(frame.warp.uv(y, x), scene.deformation.vertices);
            if (!q) continue;
            const Eigen::Vector3d qc = scene.pose.apply(*q);
            if (qc.z() <= 0.0) continue;
            const double err = (geometry::project_point(qc, frame.camera) -
                                geometry::PerspectiveCamera::pixel_center(y, x))
                                   .norm();
            stats.max_reprojection_px = std::max(stats.max_reprojection_px, err);
            if (err <= 0.5 && std::abs(z - qc.z()) < 1e-3 * qc.z()) {
                ++stats.reprojection_agree;
            }
        }
    }
    return stats;
}

}  // namespace deepsft::datagen
