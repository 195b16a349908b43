#include "deepsft/geometry/normalization.hpp"

#include <algorithm>
#include <string>

#include "deepsft/error.hpp"

namespace deepsft::geometry {

void NormalizationSpec::validate() const {
    if (!(z_min > 0.0 && z_min < z_max)) {
        throw ConfigError("normalization: require 0 < z_min < z_max");
    }
    if (!(valid_low > -1.0 && valid_low < 1.0)) {
        throw ConfigError("normalization: valid_low must lie in (-1, 1)");
    }
    if (background_value != -1.0 || !(background_value < valid_low)) {
        throw ConfigError("normalization: background value must be -1 and below valid_low");
    }
}

Grid<float> normalize_depth(const DepthMap& depth, const NormalizationSpec& spec) {
    spec.validate();
    Grid<float> out(depth.height(), depth.width(), 1, static_cast<float>(spec.background_value));
    std::size_t out_of_range = 0;
    for (int y = 0; y < depth.height(); ++y) {
        for (int x = 0; x < depth.width(); ++x) {
            if (!depth.mask(y, x)) {
                continue;
            }
            const double z = depth.value(y, x);
            if (z < spec.z_min || z > spec.z_max) {
                ++out_of_range;
                continue;
            }
            out.at(y, x) = static_cast<float>(spec.depth_to_normalized(z));
        }
    }
    if (out_of_range > 0) {
        throw RangeError("normalize_depth: " + std::to_string(out_of_range) +
                         " foreground pixel(s) outside [z_min, z_max]");
    }
    return out;
}

DepthMap denormalize_depth(const Grid<float>& normalized, const NormalizationSpec& spec) {
    spec.validate();
    if (normalized.channels() != 1) {
        throw ShapeError("denormalize_depth expects a single-channel grid");
    }
    const double cut = spec.threshold();
    DepthMap out(normalized.height(), normalized.width());
    for (int y = 0; y < normalized.height(); ++y) {
        for (int x = 0; x < normalized.width(); ++x) {
            const double n = normalized.at(y, x);
            if (n >= cut) {
                out.set(y, x, spec.normalized_to_depth(n));
            }
        }
    }
    return out;
}

Grid<float> normalize_warp(const WarpField& warp, const NormalizationSpec& spec) {
    spec.validate();
    Grid<float> out(warp.height(), warp.width(), 2, static_cast<float>(spec.background_value));
    for (int y = 0; y < warp.height(); ++y) {
        for (int x = 0; x < warp.width(); ++x) {
            if (!warp.mask(y, x)) {
                continue;
            }
            const auto uv = warp.uv(y, x);
            if (uv.x() < 0.0 || uv.x() > 1.0 || uv.y() < 0.0 || uv.y() > 1.0) {
                throw RangeError("normalize_warp: foreground atlas coordinate outside [0,1]");
            }
            out.at(y, x, 0) = static_cast<float>(spec.atlas_to_normalized(uv.x()));
            out.at(y, x, 1) = static_cast<float>(spec.atlas_to_normalized(uv.y()));
        }
    }
    return out;
}

WarpField denormalize_warp(const Grid<float>& normalized, const NormalizationSpec& spec) {
    spec.validate();
    if (normalized.channels() != 2) {
        throw ShapeError("denormalize_warp expects a two-channel grid");
    }
    const double cut = spec.threshold();
    WarpField out(normalized.height(), normalized.width());
    for (int y = 0; y < normalized.height(); ++y) {
        for (int x = 0; x < normalized.width(); ++x) {
            const double nu = normalized.at(y, x, 0);
            const double nv = normalized.at(y, x, 1);
            if (nu >= cut && nv >= cut) {
                out.set(y, x, std::clamp(spec.normalized_to_atlas(nu), 0.0, 1.0),
                        std::clamp(spec.normalized_to_atlas(nv), 0.0, 1.0));
            }
        }
    }
    return out;
}

}  // namespace deepsft::geometry
