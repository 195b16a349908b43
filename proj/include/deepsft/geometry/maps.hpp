#pragma once

#include <Eigen/Core>

#include "deepsft/grid.hpp"

namespace deepsft::geometry {

/// Per-pixel metric depth (mm). Background pixels hold 0 and are masked out.
///
/// The mask is derived from the value on every write, so `mask(y, x)` holds
/// exactly when the stored depth is finite and positive.
class DepthMap {
public:
    static constexpr float kBackground = 0.0f;

    DepthMap() = default;
    DepthMap(int height, int width) : values_(height, width, 1, kBackground), mask_(height, width, 1, 0) {}

    /// Builds a depth map from raw values; non-finite or non-positive entries become background.
    static DepthMap from_values(const Grid<float>& values);

    int height() const { return values_.height(); }
    int width() const { return values_.width(); }

    void set(int y, int x, double depth_mm);
    void clear(int y, int x);

    float value(int y, int x) const { return values_.at(y, x); }
    bool mask(int y, int x) const { return mask_.at(y, x) != 0; }

    const Grid<float>& values() const { return values_; }
    const Mask& mask() const { return mask_; }
    std::size_t foreground_count() const;

    friend bool operator==(const DepthMap&, const DepthMap&) = default;

private:
    Grid<float> values_;
    Mask mask_;
};

/// Per-pixel texture-atlas coordinates in [0,1]^2; background holds (-1, -1).
class WarpField {
public:
    static constexpr float kBackground = -1.0f;

    WarpField() = default;
    WarpField(int height, int width) : uv_(height, width, 2, kBackground), mask_(height, width, 1, 0) {}

    int height() const { return uv_.height(); }
    int width() const { return uv_.width(); }

    /// Throws RangeError if either coordinate lies outside [0, 1].
    void set(int y, int x, double u, double v);
    void clear(int y, int x);

    Eigen::Vector2d uv(int y, int x) const { return {uv_.at(y, x, 0), uv_.at(y, x, 1)}; }
    bool mask(int y, int x) const { return mask_.at(y, x) != 0; }

    const Grid<float>& values() const { return uv_; }
    const Mask& mask() const { return mask_; }
    std::size_t foreground_count() const;

    friend bool operator==(const WarpField&, const WarpField&) = default;

private:
    Grid<float> uv_;
    Mask mask_;
};

}  // namespace deepsft::geometry
