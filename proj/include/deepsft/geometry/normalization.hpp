#pragma once

#include "deepsft/geometry/maps.hpp"
#include "deepsft/grid.hpp"

namespace deepsft::geometry {

/// Invertible mapping between metric depth / atlas coordinates and the network's
/// output range. Valid values occupy [valid_low, 1]; background_value is reserved
/// for pixels outside the object.
struct NormalizationSpec {
    double z_min = 400.0;  // mm
    double z_max = 1200.0; // mm
    double valid_low = -0.9;
    double background_value = -1.0;

    void validate() const;

    /// Midpoint between the sentinel and the valid range; segmentation cut.
    double threshold() const { return 0.5 * (valid_low + background_value); }

    double depth_to_normalized(double z) const {
        return valid_low + (z - z_min) / (z_max - z_min) * (1.0 - valid_low);
    }
    double normalized_to_depth(double n) const {
        return z_min + (n - valid_low) / (1.0 - valid_low) * (z_max - z_min);
    }
    double atlas_to_normalized(double a) const { return valid_low + a * (1.0 - valid_low); }
    double normalized_to_atlas(double n) const { return (n - valid_low) / (1.0 - valid_low); }

    friend bool operator==(const NormalizationSpec&, const NormalizationSpec&) = default;
};

/// Single-channel grid: foreground depth mapped to [valid_low, 1], background to -1.
/// Throws RangeError (with the offending pixel count) if foreground depth leaves [z_min, z_max].
Grid<float> normalize_depth(const DepthMap& depth, const NormalizationSpec& spec);

/// Values at or above the threshold become foreground depth; the rest background.
/// Values that would map to a non-positive depth are treated as background.
DepthMap denormalize_depth(const Grid<float>& normalized, const NormalizationSpec& spec);

/// Two-channel grid: atlas coordinates mapped per channel to [valid_low, 1], background (-1, -1).
/// Throws RangeError if a foreground coordinate lies outside [0, 1].
Grid<float> normalize_warp(const WarpField& warp, const NormalizationSpec& spec);

/// Foreground requires both channels at or above the threshold; coordinates are clamped to [0, 1].
WarpField denormalize_warp(const Grid<float>& normalized, const NormalizationSpec& spec);

}  // namespace deepsft::geometry
