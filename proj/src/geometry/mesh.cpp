#include "deepsft/geometry/mesh.hpp"

#include <algorithm>
#include <map>

#include <Eigen/Geometry>

#include "deepsft/error.hpp"

namespace deepsft::geometry {

std::vector<Edge> mesh_edges(std::span<const std::array<int, 3>> faces) {
    std::vector<Edge> edges;
    edges.reserve(faces.size() * 3);
    for (const auto& f : faces) {
        for (int k = 0; k < 3; ++k) {
            const int a = f[k];
            const int b = f[(k + 1) % 3];
            edges.emplace_back(std::min(a, b), std::max(a, b));
        }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

std::vector<Edge> bending_pairs(std::span<const std::array<int, 3>> faces) {
    std::map<Edge, std::vector<int>> opposite;
    for (const auto& f : faces) {
        for (int k = 0; k < 3; ++k) {
            const int a = f[k];
            const int b = f[(k + 1) % 3];
            opposite[{std::min(a, b), std::max(a, b)}].push_back(f[(k + 2) % 3]);
        }
    }
    std::vector<Edge> pairs;
    for (const auto& [edge, opp] : opposite) {
        if (opp.size() == 2 && opp[0] != opp[1]) {
            pairs.emplace_back(opp[0], opp[1]);
        }
    }
    return pairs;
}

std::vector<Eigen::Vector3d> vertex_normals(std::span<const Eigen::Vector3d> vertices,
                                            std::span<const std::array<int, 3>> faces) {
    std::vector<Eigen::Vector3d> normals(vertices.size(), Eigen::Vector3d::Zero());
    for (const auto& f : faces) {
        const Eigen::Vector3d n = (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]);
        for (int idx : f) {
            normals[idx] += n;
        }
    }
    for (auto& n : normals) {
        const double len = n.norm();
        n = len > 0.0 ? Eigen::Vector3d(n / len) : Eigen::Vector3d::UnitZ();
    }
    return normals;
}

std::vector<int> weld_map(std::span<const Eigen::Vector3d> vertices) {
    std::map<std::array<double, 3>, int> first;
    std::vector<int> rep(vertices.size());
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        const std::array<double, 3> key{vertices[i].x(), vertices[i].y(), vertices[i].z()};
        rep[i] = first.try_emplace(key, static_cast<int>(i)).first->second;
    }
    return rep;
}

EdgeDistortion edge_distortion(const Template& tmpl, std::span<const Eigen::Vector3d> deformed_vertices) {
    if (deformed_vertices.size() != tmpl.vertices.size()) {
        throw ShapeError("edge_distortion: vertex count differs from the template");
    }
    EdgeDistortion out;
    double sum = 0.0;
    for (const auto& [a, b] : mesh_edges(tmpl.faces)) {
        const double rest = (tmpl.vertices[a] - tmpl.vertices[b]).norm();
        if (rest <= 1e-12) {
            ++out.skipped_degenerate;
            continue;
        }
        const double now = (deformed_vertices[a] - deformed_vertices[b]).norm();
        const double d = std::abs(now - rest) / rest;
        sum += d;
        out.max = std::max(out.max, d);
        ++out.edges;
    }
    out.mean = out.edges > 0 ? sum / static_cast<double>(out.edges) : 0.0;
    return out;
}

}  // namespace deepsft::geometry
