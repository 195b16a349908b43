#include "deepsft/geometry/maps.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace deepsft::geometry {

DepthMap DepthMap::from_values(const Grid<float>& values) {
    if (values.channels() != 1) {
        throw ShapeError("DepthMap expects a single-channel grid");
    }
    DepthMap map(values.height(), values.width());
    for (int y = 0; y < values.height(); ++y) {
        for (int x = 0; x < values.width(); ++x) {
            map.set(y, x, values.at(y, x));
        }
    }
    return map;
}

void DepthMap::set(int y, int x, double depth_mm) {
    const auto value = static_cast<float>(depth_mm);
    if (std::isfinite(value) && value > 0.0f) {
        values_.at(y, x) = value;
        mask_.at(y, x) = 1;
    } else {
        clear(y, x);
    }
}

void DepthMap::clear(int y, int x) {
    values_.at(y, x) = kBackground;
    mask_.at(y, x) = 0;
}

std::size_t DepthMap::foreground_count() const {
    return static_cast<std::size_t>(std::count(mask_.values().begin(), mask_.values().end(), 1));
}

void WarpField::set(int y, int x, double u, double v) {
    if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0)) {
        throw RangeError("WarpField: atlas coordinate (" + std::to_string(u) + ", " + std::to_string(v) +
                         ") outside [0,1]^2");
    }
    uv_.at(y, x, 0) = static_cast<float>(u);
    uv_.at(y, x, 1) = static_cast<float>(v);
    mask_.at(y, x) = 1;
}

void WarpField::clear(int y, int x) {
    uv_.at(y, x, 0) = kBackground;
    uv_.at(y, x, 1) = kBackground;
    mask_.at(y, x) = 0;
}

std::size_t WarpField::foreground_count() const {
    return static_cast<std::size_t>(std::count(mask_.values().begin(), mask_.values().end(), 1));
}

}  // namespace deepsft::geometry
