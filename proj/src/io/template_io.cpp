#include "deepsft/io/template_io.hpp"

#include <fstream>
#include <sstream>
#include <string>

#include "deepsft/error.hpp"
#include "deepsft/io/json_io.hpp"
#include "deepsft/io/raster_io.hpp"

namespace deepsft::io {

namespace {

using nlohmann::json;

json vec3_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vec3_from(const json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

// OBJ texture coordinates have their origin at the bottom-left; the atlas uses top-left.
void write_obj(const std::filesystem::path& path, const geometry::Template& t) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out.precision(17);
    out << "# " << t.name << " (units: mm)\n";
    for (const auto& v : t.vertices) {
        out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    }
    for (const auto& uv : t.atlas_uv) {
        out << "vt " << uv.x() << ' ' << 1.0 - uv.y() << '\n';
    }
    for (const auto& f : t.faces) {
        out << 'f';
        for (int idx : f) {
            out << ' ' << idx + 1 << '/' << idx + 1;
        }
        out << '\n';
    }
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

void read_obj(const std::filesystem::path& path, geometry::Template& t) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::vector<Eigen::Vector2d> texcoords;
    std::vector<std::array<int, 3>> face_tex;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "v") {
            Eigen::Vector3d p;
            ss >> p.x() >> p.y() >> p.z();
            t.vertices.push_back(p);
        } else if (tag == "vt") {
            Eigen::Vector2d uv;
            ss >> uv.x() >> uv.y();
            texcoords.emplace_back(uv.x(), 1.0 - uv.y());
        } else if (tag == "f") {
            std::array<int, 3> f{};
            std::array<int, 3> ft{-1, -1, -1};
            std::string token;
            int k = 0;
            while (ss >> token) {
                if (k == 3) {
                    throw IoError(path.string() + ": only triangle faces are supported");
                }
                const auto slash = token.find('/');
                f[k] = std::stoi(token.substr(0, slash)) - 1;
                if (slash != std::string::npos && slash + 1 < token.size() && token[slash + 1] != '/') {
                    ft[k] = std::stoi(token.substr(slash + 1)) - 1;
                }
                ++k;
            }
            if (k != 3) {
                throw IoError(path.string() + ": malformed face");
            }
            t.faces.push_back(f);
            face_tex.push_back(ft);
        }
    }
    // per-vertex texture coordinates: vt index must agree with the vertex index
    t.atlas_uv.assign(t.vertices.size(), Eigen::Vector2d::Constant(-1.0));
    for (std::size_t i = 0; i < t.faces.size(); ++i) {
        for (int k = 0; k < 3; ++k) {
            const int vi = t.faces[i][k];
            const int ti = face_tex[i][k];
            if (ti < 0 || ti >= static_cast<int>(texcoords.size()) || vi < 0 ||
                vi >= static_cast<int>(t.vertices.size())) {
                throw IoError(path.string() + ": face references a missing vertex or texture coordinate");
            }
            if (t.atlas_uv[vi].x() >= 0.0 && (t.atlas_uv[vi] - texcoords[ti]).norm() > 1e-12) {
                throw IoError(path.string() + ": vertex " + std::to_string(vi + 1) +
                              " has several texture coordinates; split seam vertices");
            }
            t.atlas_uv[vi] = texcoords[ti];
        }
    }
    for (auto& uv : t.atlas_uv) {
        if (uv.x() < 0.0) {
            uv.setZero();  // unreferenced vertex
        }
    }
}

}  // namespace

void save_template(const std::filesystem::path& dir, const geometry::Template& t) {
    std::filesystem::create_directories(dir);
    write_obj(dir / "mesh.obj", t);
    write_rgb(dir / "texture.png", t.texture);

    json meta;
    meta["format_version"] = 1;
    meta["name"] = t.name;
    meta["kind"] = geometry::to_string(t.kind);
    meta["units"] = "mm";
    meta["mesh"] = "mesh.obj";
    meta["texture"] = "texture.png";
    meta["charts"] = json::array();
    for (const auto& c : t.charts) {
        meta["charts"].push_back({{"name", c.name}, {"u0", c.u0}, {"v0", c.v0}, {"u1", c.u1}, {"v1", c.v1}});
    }
    if (t.rig) {
        json rig;
        for (const auto& b : t.rig->bones) {
            rig["bones"].push_back({{"name", b.name},
                                    {"parent", b.parent},
                                    {"head", vec3_json(b.head)},
                                    {"min_deg", vec3_json(b.limits.min_deg)},
                                    {"max_deg", vec3_json(b.limits.max_deg)}});
        }
        json weights = json::array();
        for (Eigen::Index v = 0; v < t.rig->weights.rows(); ++v) {
            json row = json::array();
            for (Eigen::Index b = 0; b < t.rig->weights.cols(); ++b) {
                row.push_back(t.rig->weights(v, b));
            }
            weights.push_back(std::move(row));
        }
        rig["weights"] = std::move(weights);
        meta["rig"] = std::move(rig);
    }
    write_json(dir / "template.json", meta);
}

geometry::Template load_template(const std::filesystem::path& dir) {
    const auto meta_path = dir / "template.json";
    if (!std::filesystem::exists(meta_path)) {
        throw IoError("not a template directory (missing template.json): " + dir.string());
    }
    const json meta = read_json(meta_path);
    geometry::Template t;
    try {
        if (meta.value("units", "mm") != "mm") {
            throw ConfigError("template units must be mm");
        }
        t.name = meta.value("name", "template");
        t.kind = geometry::template_kind_from_string(meta.value("kind", "thin_shell"));
        read_obj(dir / meta.value("mesh", "mesh.obj"), t);
        t.texture = read_rgb(dir / meta.value("texture", "texture.png"));
        for (const auto& c : meta.value("charts", json::array())) {
            t.charts.push_back({c.at("name").get<std::string>(), c.at("u0").get<double>(), c.at("v0").get<double>(),
                                c.at("u1").get<double>(), c.at("v1").get<double>()});
        }
        if (meta.contains("rig")) {
            geometry::Rig rig;
            for (const auto& b : meta["rig"].at("bones")) {
                rig.bones.push_back({b.at("name").get<std::string>(), b.at("parent").get<int>(),
                                     vec3_from(b.at("head")),
                                     {vec3_from(b.at("min_deg")), vec3_from(b.at("max_deg"))}});
            }
            const auto& w = meta["rig"].at("weights");
            rig.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(w.size()),
                                                static_cast<Eigen::Index>(rig.bones.size()));
            for (std::size_t v = 0; v < w.size(); ++v) {
                for (std::size_t b = 0; b < rig.bones.size(); ++b) {
                    rig.weights(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(b)) = w[v].at(b).get<double>();
                }
            }
            t.rig = std::move(rig);
        }
    } catch (const json::exception& e) {
        throw IoError("invalid template metadata in " + meta_path.string() + ": " + e.what());
    }
    t.validate();
    return t;
}

}  // namespace deepsft::io
