#include "deepsft/geometry/template.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "deepsft/error.hpp"

namespace deepsft::geometry {

std::string to_string(TemplateKind kind) {
    return kind == TemplateKind::thin_shell ? "thin_shell" : "volumetric";
}

TemplateKind template_kind_from_string(const std::string& name) {
    if (name == "thin_shell") return TemplateKind::thin_shell;
    if (name == "volumetric") return TemplateKind::volumetric;
    throw ConfigError("unknown template kind '" + name + "'");
}

void Rig::validate(std::size_t vertex_count) const {
    if (bones.empty()) {
        throw ConfigError("rig has no bones");
    }
    for (std::size_t b = 0; b < bones.size(); ++b) {
        if (bones[b].parent >= static_cast<int>(b)) {
            throw ConfigError("rig bones must be ordered parent-first");
        }
        if ((bones[b].limits.min_deg.array() > bones[b].limits.max_deg.array()).any()) {
            throw ConfigError("rig joint '" + bones[b].name + "' has min limit above max limit");
        }
    }
    if (static_cast<std::size_t>(weights.rows()) != vertex_count ||
        static_cast<std::size_t>(weights.cols()) != bones.size()) {
        throw ConfigError("rig weight matrix shape does not match vertices x bones");
    }
    for (Eigen::Index v = 0; v < weights.rows(); ++v) {
        if ((weights.row(v).array() < 0.0).any() || std::abs(weights.row(v).sum() - 1.0) > 1e-6) {
            throw ConfigError("rig weights must be non-negative and sum to one per vertex");
        }
    }
}

std::optional<Eigen::Vector3d> barycentric(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                                           const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
    const Eigen::Vector2d e0 = b - a;
    const Eigen::Vector2d e1 = c - a;
    const double det = e0.x() * e1.y() - e0.y() * e1.x();
    if (std::abs(det) < 1e-300) {
        return std::nullopt;
    }
    const Eigen::Vector2d d = p - a;
    const double l1 = (d.x() * e1.y() - d.y() * e1.x()) / det;
    const double l2 = (e0.x() * d.y() - e0.y() * d.x()) / det;
    return Eigen::Vector3d(1.0 - l1 - l2, l1, l2);
}

void Template::validate(int injectivity_samples) const {
    if (faces.empty()) {
        throw ConfigError("template '" + name + "' has no faces");
    }
    if (atlas_uv.size() != vertices.size()) {
        throw ConfigError("template '" + name + "' needs one atlas coordinate per vertex");
    }
    const int n = static_cast<int>(vertices.size());
    for (const auto& f : faces) {
        for (int idx : f) {
            if (idx < 0 || idx >= n) {
                throw ConfigError("template '" + name + "' face index out of range");
            }
        }
    }
    for (const auto& uv : atlas_uv) {
        if (!(uv.x() >= 0.0 && uv.x() <= 1.0 && uv.y() >= 0.0 && uv.y() <= 1.0)) {
            throw ConfigError("template '" + name + "' atlas coordinate outside [0,1]^2");
        }
    }
    if (rig) {
        rig->validate(vertices.size());
    }
    if (injectivity_samples <= 0) {
        return;
    }

    // Each interior atlas sample may be claimed by at most one face.
    const int s = injectivity_samples;
    std::vector<unsigned char> claims(static_cast<std::size_t>(s) * s, 0);
    constexpr double kInside = 1e-9;
    for (std::size_t fi = 0; fi < faces.size(); ++fi) {
        const auto& a = atlas_uv[faces[fi][0]];
        const auto& b = atlas_uv[faces[fi][1]];
        const auto& c = atlas_uv[faces[fi][2]];
        const double area = 0.5 * std::abs((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x());
        if (area < 1e-14) {
            throw ConfigError("template '" + name + "' face " + std::to_string(fi) +
                              " has a degenerate atlas triangle");
        }
        const double umin = std::min({a.x(), b.x(), c.x()});
        const double umax = std::max({a.x(), b.x(), c.x()});
        const double vmin = std::min({a.y(), b.y(), c.y()});
        const double vmax = std::max({a.y(), b.y(), c.y()});
        const int i0 = std::max(0, static_cast<int>(std::floor(umin * s - 0.5)));
        const int i1 = std::min(s - 1, static_cast<int>(std::ceil(umax * s - 0.5)));
        const int j0 = std::max(0, static_cast<int>(std::floor(vmin * s - 0.5)));
        const int j1 = std::min(s - 1, static_cast<int>(std::ceil(vmax * s - 0.5)));
        for (int j = j0; j <= j1; ++j) {
            for (int i = i0; i <= i1; ++i) {
                const Eigen::Vector2d p((i + 0.5) / s, (j + 0.5) / s);
                const auto bc = barycentric(p, a, b, c);
                if (!bc || bc->minCoeff() <= kInside) {
                    continue;
                }
                auto& count = claims[static_cast<std::size_t>(j) * s + i];
                if (++count > 1) {
                    throw ConfigError("template '" + name + "' atlas is not injective near (" +
                                      std::to_string(p.x()) + ", " + std::to_string(p.y()) + ")");
                }
            }
        }
    }
}

AtlasLocator::AtlasLocator(const Template& tmpl, int bins)
    : faces_(tmpl.faces), uv_(tmpl.atlas_uv), bins_(bins), cells_(static_cast<std::size_t>(bins) * bins) {
    for (std::size_t fi = 0; fi < faces_.size(); ++fi) {
        const auto& a = uv_[faces_[fi][0]];
        const auto& b = uv_[faces_[fi][1]];
        const auto& c = uv_[faces_[fi][2]];
        const auto cell = [&](double t) { return std::clamp(static_cast<int>(std::floor(t * bins_)), 0, bins_ - 1); };
        // Pad by a small margin so near-border queries still see the face.
        constexpr double kPad = 1e-6;
        const int i0 = cell(std::min({a.x(), b.x(), c.x()}) - kPad);
        const int i1 = cell(std::max({a.x(), b.x(), c.x()}) + kPad);
        const int j0 = cell(std::min({a.y(), b.y(), c.y()}) - kPad);
        const int j1 = cell(std::max({a.y(), b.y(), c.y()}) + kPad);
        for (int j = j0; j <= j1; ++j) {
            for (int i = i0; i <= i1; ++i) {
                cells_[static_cast<std::size_t>(j) * bins_ + i].push_back(static_cast<int>(fi));
            }
        }
    }
}

std::optional<AtlasHit> AtlasLocator::locate(const Eigen::Vector2d& uv) const {
    const int i = std::clamp(static_cast<int>(std::floor(uv.x() * bins_)), 0, bins_ - 1);
    const int j = std::clamp(static_cast<int>(std::floor(uv.y() * bins_)), 0, bins_ - 1);
    std::optional<AtlasHit> best;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int fi : cells_[static_cast<std::size_t>(j) * bins_ + i]) {
        const auto& f = faces_[fi];
        const auto bc = barycentric(uv, uv_[f[0]], uv_[f[1]], uv_[f[2]]);
        if (!bc) {
            continue;
        }
        const double score = bc->minCoeff();
        if (score > best_score) {
            best_score = score;
            best = AtlasHit{fi, *bc};
        }
        if (score >= 0.0) {
            break;
        }
    }
    // float32 storage of warp coordinates can land a hair outside a chart border
    constexpr double kTolerance = 1e-4;
    if (!best || best_score < -kTolerance) {
        return std::nullopt;
    }
    Eigen::Vector3d bc = best->barycentric.cwiseMax(0.0);
    best->barycentric = bc / bc.sum();
    return best;
}

std::optional<Eigen::Vector3d> AtlasLocator::surface_point(const Eigen::Vector2d& uv,
                                                           std::span<const Eigen::Vector3d> vertices) const {
    const auto hit = locate(uv);
    if (!hit) {
        return std::nullopt;
    }
    const auto& f = faces_[hit->face];
    return hit->barycentric[0] * vertices[f[0]] + hit->barycentric[1] * vertices[f[1]] +
           hit->barycentric[2] * vertices[f[2]];
}

}  // namespace deepsft::geometry
