#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "deepsft/geometry/maps.hpp"
#include "deepsft/grid.hpp"

namespace deepsft::eval {

struct RmseResult {
    double value = 0.0;
    std::size_t count = 0;  // pixels in the mask intersection
};

/// Root mean squared depth difference (mm) over the intersection of both
/// foreground masks. Throws ShapeError on size mismatch, NumericalError when the
/// intersection is empty.
RmseResult rmse_depth_mm(const geometry::DepthMap& pred, const geometry::DepthMap& gt);

/// Root mean squared magnitude of the atlas-coordinate error, scaled by
/// `atlas_to_px` (texture pixels per atlas unit), over the mask intersection.
RmseResult rmse_registration_px(const geometry::WarpField& pred, const geometry::WarpField& gt, double atlas_to_px);

/// |A and B| / |A or B|; 1 when both masks are empty.
double segmentation_iou(const Mask& pred, const Mask& gt);

struct FrameMetrics {
    std::string id;
    std::optional<double> depth_rmse_mm;
    std::optional<double> registration_rmse_px;
    double segmentation_iou = 0.0;
    std::size_t depth_pixels = 0;
    std::size_t registration_pixels = 0;
};

/// Dataset-level metrics: each aggregate is the mean of the per-frame values
/// that exist (frames with an empty mask intersection contribute nothing).
struct MetricReport {
    std::optional<double> depth_rmse_mm;
    std::optional<double> registration_rmse_px;
    double segmentation_iou = 0.0;
    std::size_t frames = 0;
    std::vector<FrameMetrics> per_frame;

    static MetricReport aggregate(std::vector<FrameMetrics> frames);
    nlohmann::json to_json() const;
    static MetricReport from_json(const nlohmann::json& j);
};

/// Metrics for one frame. `pred_warp`/`gt_warp` may be null (depth-only data).
FrameMetrics evaluate_frame(const std::string& id, const geometry::DepthMap& pred_depth, const Mask& pred_mask,
                            const geometry::WarpField* pred_warp, const geometry::DepthMap& gt_depth,
                            const geometry::WarpField* gt_warp, double atlas_to_px);

/// Markdown table with one row per method and columns for the three metrics.
std::string render_comparison_table(const std::vector<std::pair<std::string, MetricReport>>& rows);

}  // namespace deepsft::eval
