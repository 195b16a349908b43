#include "deepsft/eval/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "deepsft/error.hpp"

namespace deepsft::eval {

namespace {

template <class A, class B>
void same_size(const A& a, const B& b, const char* what) {
    if (a.height() != b.height() || a.width() != b.width()) {
        throw ShapeError(std::string(what) + ": maps differ in size");
    }
}

std::optional<double> mean_of(const std::vector<FrameMetrics>& frames, std::optional<double> FrameMetrics::*field) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& f : frames) {
        if (const auto& v = f.*field) {
            sum += *v;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::optional<double> opt_from(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

std::string cell(const std::optional<double>& v, const char* fmt) {
    if (!v) return "n/a";
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, *v);
    return buf;
}

}  // namespace

RmseResult rmse_depth_mm(const geometry::DepthMap& pred, const geometry::DepthMap& gt) {
    same_size(pred, gt, "rmse_depth_mm");
    double sum = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < gt.height(); ++y) {
        for (int x = 0; x < gt.width(); ++x) {
            if (!pred.mask(y, x) || !gt.mask(y, x)) continue;
            const double e = static_cast<double>(pred.value(y, x)) - gt.value(y, x);
            sum += e * e;
            ++n;
        }
    }
    if (n == 0) throw NumericalError("rmse_depth_mm: the foreground masks do not intersect");
    return {std::sqrt(sum / static_cast<double>(n)), n};
}

RmseResult rmse_registration_px(const geometry::WarpField& pred, const geometry::WarpField& gt, double atlas_to_px) {
    same_size(pred, gt, "rmse_registration_px");
    if (!(atlas_to_px > 0.0)) throw ConfigError("atlas_to_px must be positive");
    double sum = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < gt.height(); ++y) {
        for (int x = 0; x < gt.width(); ++x) {
            if (!pred.mask(y, x) || !gt.mask(y, x)) continue;
            sum += (pred.uv(y, x) - gt.uv(y, x)).squaredNorm();
            ++n;
        }
    }
    if (n == 0) throw NumericalError("rmse_registration_px: the foreground masks do not intersect");
    return {atlas_to_px * std::sqrt(sum / static_cast<double>(n)), n};
}

double segmentation_iou(const Mask& pred, const Mask& gt) {
    same_size(pred, gt, "segmentation_iou");
    std::size_t inter = 0, uni = 0;
    for (int y = 0; y < gt.height(); ++y) {
        for (int x = 0; x < gt.width(); ++x) {
            const bool a = pred.at(y, x) != 0;
            const bool b = gt.at(y, x) != 0;
            inter += a && b;
            uni += a || b;
        }
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

FrameMetrics evaluate_frame(const std::string& id, const geometry::DepthMap& pred_depth, const Mask& pred_mask,
                            const geometry::WarpField* pred_warp, const geometry::DepthMap& gt_depth,
                            const geometry::WarpField* gt_warp, double atlas_to_px) {
    FrameMetrics f;
    f.id = id;
    f.segmentation_iou = segmentation_iou(pred_mask, gt_depth.mask());
    try {
        const auto r = rmse_depth_mm(pred_depth, gt_depth);
        f.depth_rmse_mm = r.value;
        f.depth_pixels = r.count;
    } catch (const NumericalError&) {
    }
    if (pred_warp && gt_warp) {
        try {
            const auto r = rmse_registration_px(*pred_warp, *gt_warp, atlas_to_px);
            f.registration_rmse_px = r.value;
            f.registration_pixels = r.count;
        } catch (const NumericalError&) {
        }
    }
    return f;
}

MetricReport MetricReport::aggregate(std::vector<FrameMetrics> frames) {
    MetricReport r;
    r.frames = frames.size();
    r.depth_rmse_mm = mean_of(frames, &FrameMetrics::depth_rmse_mm);
    r.registration_rmse_px = mean_of(frames, &FrameMetrics::registration_rmse_px);
    r.segmentation_iou =
        frames.empty() ? 0.0
                       : std::accumulate(frames.begin(), frames.end(), 0.0,
                                         [](double s, const FrameMetrics& f) { return s + f.segmentation_iou; }) /
                             static_cast<double>(frames.size());
    r.per_frame = std::move(frames);
    return r;
}

nlohmann::json MetricReport::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& f : per_frame) {
        rows.push_back({{"id", f.id},
                        {"depth_rmse_mm", opt(f.depth_rmse_mm)},
                        {"registration_rmse_px", opt(f.registration_rmse_px)},
                        {"segmentation_iou", f.segmentation_iou},
                        {"depth_pixels", f.depth_pixels},
                        {"registration_pixels", f.registration_pixels}});
    }
    return {{"depth_rmse_mm", opt(depth_rmse_mm)},
            {"registration_rmse_px", opt(registration_rmse_px)},
            {"segmentation_iou", segmentation_iou},
            {"frames", frames},
            {"per_frame", rows}};
}

MetricReport MetricReport::from_json(const nlohmann::json& j) {
    std::vector<FrameMetrics> frames;
    for (const auto& e : j.at("per_frame")) {
        FrameMetrics f;
        f.id = e.at("id").get<std::string>();
        f.depth_rmse_mm = opt_from(e, "depth_rmse_mm");
        f.registration_rmse_px = opt_from(e, "registration_rmse_px");
        f.segmentation_iou = e.at("segmentation_iou").get<double>();
        f.depth_pixels = e.value("depth_pixels", std::size_t{0});
        f.registration_pixels = e.value("registration_pixels", std::size_t{0});
        frames.push_back(std::move(f));
    }
    return aggregate(std::move(frames));
}

std::string render_comparison_table(const std::vector<std::pair<std::string, MetricReport>>& rows) {
    std::string out = "| Method | Frames | Depth RMSE (mm) | Registration RMSE (px) | IoU |\n";
    out += "|---|---:|---:|---:|---:|\n";
    for (const auto& [name, r] : rows) {
        out += "| " + name + " | " + std::to_string(r.frames) + " | " + cell(r.depth_rmse_mm, "%.2f") + " | " +
               cell(r.registration_rmse_px, "%.2f") + " | " + cell(r.segmentation_iou, "%.3f") + " |\n";
    }
    return out;
}

}  // namespace deepsft::eval
