#include "deepsft/geometry/builtin_templates.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "deepsft/error.hpp"

namespace deepsft::geometry {

namespace {

double smoothstep(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

}  // namespace

Image make_procedural_texture(int size, std::uint64_t seed) {
    if (size <= 0) {
        throw ConfigError("texture size must be positive");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    struct Wave {
        double fx, fy, phase, amp;
    };
    std::array<std::vector<Wave>, 3> waves;
    for (auto& channel : waves) {
        for (int k = 0; k < 4; ++k) {
            channel.push_back({unit(rng) * 6.0 - 3.0, unit(rng) * 6.0 - 3.0,
                               unit(rng) * 2.0 * std::numbers::pi, 0.12 + 0.1 * unit(rng)});
        }
    }
    struct Disc {
        double cx, cy, r;
        std::array<double, 3> color;
    };
    std::vector<Disc> discs(60);
    for (auto& d : discs) {
        d = {unit(rng), unit(rng), 0.01 + 0.05 * unit(rng), {unit(rng), unit(rng), unit(rng)}};
    }

    Image tex(size, size, 3);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double u = (x + 0.5) / size;
            const double v = (y + 0.5) / size;
            std::array<double, 3> c{};
            for (int ch = 0; ch < 3; ++ch) {
                double value = 0.5;
                for (const auto& w : waves[ch]) {
                    value += w.amp * std::sin(2.0 * std::numbers::pi * (w.fx * u + w.fy * v) + w.phase);
                }
                c[ch] = value;
            }
            for (const auto& d : discs) {
                const double dist = std::hypot(u - d.cx, v - d.cy);
                if (dist < d.r) {
                    const double a = 0.85 * smoothstep((d.r - dist) / (0.15 * d.r));
                    for (int ch = 0; ch < 3; ++ch) {
                        c[ch] = (1.0 - a) * c[ch] + a * d.color[ch];
                    }
                }
            }
            const double gu = std::abs(u * 16.0 - std::round(u * 16.0));
            const double gv = std::abs(v * 16.0 - std::round(v * 16.0));
            if (gu < 0.03 || gv < 0.03) {
                for (auto& ch : c) ch *= 0.35;
            }
            for (int ch = 0; ch < 3; ++ch) {
                // quantized to 8 bits so the texture survives a PNG round trip unchanged
                const auto level = static_cast<int>(std::lround(std::clamp(c[ch], 0.0, 1.0) * 255.0));
                tex.at(y, x, ch) = static_cast<float>(level) / 255.0f;
            }
        }
    }
    return tex;
}

Template make_sheet_template(const SheetParams& params) {
    if (params.columns < 2 || params.rows < 2 || !(params.width_mm > 0.0) || !(params.height_mm > 0.0)) {
        throw ConfigError("sheet template needs at least 2x2 vertices and positive size");
    }
    Template t;
    t.name = "sheet";
    t.kind = TemplateKind::thin_shell;
    for (int r = 0; r < params.rows; ++r) {
        for (int c = 0; c < params.columns; ++c) {
            const double s = static_cast<double>(c) / (params.columns - 1);
            const double q = static_cast<double>(r) / (params.rows - 1);
            t.vertices.emplace_back((s - 0.5) * params.width_mm, (0.5 - q) * params.height_mm, 0.0);
            t.atlas_uv.emplace_back(s, q);
        }
    }
    const auto id = [&](int r, int c) { return r * params.columns + c; };
    for (int r = 0; r + 1 < params.rows; ++r) {
        for (int c = 0; c + 1 < params.columns; ++c) {
            // alternate diagonals to avoid a directional bias in bending
            if ((r + c) % 2 == 0) {
                t.faces.push_back({id(r, c), id(r + 1, c), id(r + 1, c + 1)});
                t.faces.push_back({id(r, c), id(r + 1, c + 1), id(r, c + 1)});
            } else {
                t.faces.push_back({id(r, c), id(r + 1, c), id(r, c + 1)});
                t.faces.push_back({id(r, c + 1), id(r + 1, c), id(r + 1, c + 1)});
            }
        }
    }
    t.texture = make_procedural_texture(params.texture_size, params.texture_seed);
    t.charts.push_back({"sheet", 0.0, 0.0, 1.0, 1.0});
    return t;
}

Template make_tube_template(const TubeParams& params) {
    if (params.segments_around < 3 || params.rings_along < 1 || !(params.length_mm > 0.0) ||
        !(params.radius_mm > 0.0)) {
        throw ConfigError("tube template needs >= 3 segments, >= 1 ring and positive size");
    }
    Template t;
    t.name = "tube";
    t.kind = TemplateKind::volumetric;
    const int na = params.segments_around;
    const int nl = params.rings_along;
    const double half = 0.5 * params.length_mm;

    const Chart side{"side", 0.01, 0.01, 0.69, 0.99};
    const Chart cap_left{"cap_left", 0.72, 0.03, 0.98, 0.29};
    const Chart cap_right{"cap_right", 0.72, 0.35, 0.98, 0.61};
    t.charts = {side, cap_left, cap_right};

    const auto radius_at = [&](double x) {
        return params.radius_mm * (1.0 + 0.12 * std::cos(std::numbers::pi * x / half));
    };
    const auto ring_point = [&](double x, int k) {
        const double theta = 2.0 * std::numbers::pi * k / na;
        const double r = radius_at(x);
        return Eigen::Vector3d(x, r * std::cos(theta), r * std::sin(theta));
    };

    // side chart with a duplicated seam column
    for (int i = 0; i <= nl; ++i) {
        const double x = -half + params.length_mm * i / nl;
        for (int k = 0; k <= na; ++k) {
            t.vertices.push_back(ring_point(x, k % na));
            t.atlas_uv.emplace_back(side.u0 + (side.u1 - side.u0) * k / na,
                                    side.v0 + (side.v1 - side.v0) * i / nl);
        }
    }
    const auto sid = [&](int i, int k) { return i * (na + 1) + k; };
    for (int i = 0; i < nl; ++i) {
        for (int k = 0; k < na; ++k) {
            t.faces.push_back({sid(i, k), sid(i, k + 1), sid(i + 1, k + 1)});
            t.faces.push_back({sid(i, k), sid(i + 1, k + 1), sid(i + 1, k)});
        }
    }

    const auto add_cap = [&](const Chart& chart, double x, bool flip) {
        const Eigen::Vector2d centre(0.5 * (chart.u0 + chart.u1), 0.5 * (chart.v0 + chart.v1));
        const double r_uv = 0.5 * (chart.u1 - chart.u0);
        const int centre_id = static_cast<int>(t.vertices.size());
        t.vertices.emplace_back(x, 0.0, 0.0);
        t.atlas_uv.push_back(centre);
        const int ring0 = static_cast<int>(t.vertices.size());
        for (int k = 0; k < na; ++k) {
            const double theta = 2.0 * std::numbers::pi * k / na;
            t.vertices.push_back(ring_point(x, k));
            t.atlas_uv.push_back(centre + r_uv * Eigen::Vector2d(std::cos(theta), std::sin(theta)));
        }
        for (int k = 0; k < na; ++k) {
            const int a = ring0 + k;
            const int b = ring0 + (k + 1) % na;
            if (flip) {
                t.faces.push_back({centre_id, b, a});
            } else {
                t.faces.push_back({centre_id, a, b});
            }
        }
    };
    add_cap(cap_left, -half, true);
    add_cap(cap_right, half, false);

    // Three-bone chain; vertices far from a joint follow one bone rigidly.
    Rig rig;
    const double j1 = -params.length_mm / 6.0;
    const double j2 = params.length_mm / 6.0;
    const Eigen::Vector3d bend(params.twist_limit_deg, params.bend_limit_deg, params.bend_limit_deg);
    rig.bones.push_back({"root", -1, Eigen::Vector3d(-half, 0.0, 0.0), {}});
    rig.bones.push_back({"middle", 0, Eigen::Vector3d(j1, 0.0, 0.0), {-bend, bend}});
    rig.bones.push_back({"tip", 1, Eigen::Vector3d(j2, 0.0, 0.0), {-bend, bend}});
    const double blend = params.length_mm / 10.0;
    rig.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(t.vertices.size()), 3);
    for (std::size_t v = 0; v < t.vertices.size(); ++v) {
        const double x = t.vertices[v].x();
        const double a = smoothstep((x - (j1 - 0.5 * blend)) / blend);
        const double b = smoothstep((x - (j2 - 0.5 * blend)) / blend);
        const auto row = static_cast<Eigen::Index>(v);
        rig.weights(row, 0) = 1.0 - a;
        rig.weights(row, 1) = a - b;
        rig.weights(row, 2) = b;
    }
    t.rig = std::move(rig);
    t.texture = make_procedural_texture(params.texture_size, params.texture_seed);
    return t;
}

}  // namespace deepsft::geometry
