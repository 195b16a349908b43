#include "deepsft/inference/reconstruct.hpp"

#include <algorithm>

#include "deepsft/error.hpp"

namespace deepsft::inference {

namespace {

void check_camera(const geometry::PerspectiveCamera& camera, int height, int width) {
    camera.validate();
    if (camera.width != width || camera.height != height) {
        throw ConfigError("camera resolution " + std::to_string(camera.width) + "x" + std::to_string(camera.height) +
                          " does not match the maps (" + std::to_string(width) + "x" + std::to_string(height) + ")");
    }
}

void lift(ReconstructionResult& r, const geometry::PerspectiveCamera& camera) {
    for (int y = 0; y < r.depth.height(); ++y) {
        for (int x = 0; x < r.depth.width(); ++x) {
            if (!r.segmentation.at(y, x)) continue;
            const Eigen::Vector2d ret = camera.to_retinal(geometry::PerspectiveCamera::pixel_center(y, x));
            r.points.push_back(geometry::embed(ret.x(), ret.y(), r.depth.value(y, x)));
            r.pixels.push_back({y, x});
        }
    }
}

}  // namespace

Mask segment(const Grid<float>& rho, const Grid<float>& eta, const geometry::NormalizationSpec& spec) {
    if (rho.channels() != 1 || eta.channels() != 2 || rho.height() != eta.height() || rho.width() != eta.width()) {
        throw ShapeError("segment: expected h x w depth and h x w x 2 warp");
    }
    const auto th = static_cast<float>(spec.threshold());  // compare at the grids' precision
    Mask m(rho.height(), rho.width());
    for (int y = 0; y < rho.height(); ++y) {
        for (int x = 0; x < rho.width(); ++x) {
            m.at(y, x) = rho.at(y, x) > th && eta.at(y, x, 0) > th && eta.at(y, x, 1) > th;
        }
    }
    return m;
}

ReconstructionResult reconstruct(const Grid<float>& rho, const Grid<float>& eta, const geometry::NormalizationSpec& spec,
                                 const geometry::PerspectiveCamera& camera) {
    spec.validate();
    ReconstructionResult r;
    r.segmentation = segment(rho, eta, spec);
    check_camera(camera, rho.height(), rho.width());
    r.depth = geometry::DepthMap(rho.height(), rho.width());
    r.warp = geometry::WarpField(rho.height(), rho.width());
    for (int y = 0; y < rho.height(); ++y) {
        for (int x = 0; x < rho.width(); ++x) {
            if (!r.segmentation.at(y, x)) continue;
            const double z = spec.normalized_to_depth(rho.at(y, x));
            if (!(z > 0.0)) {
                r.segmentation.at(y, x) = 0;
                continue;
            }
            r.depth.set(y, x, z);
            r.warp.set(y, x, std::clamp(spec.normalized_to_atlas(eta.at(y, x, 0)), 0.0, 1.0),
                       std::clamp(spec.normalized_to_atlas(eta.at(y, x, 1)), 0.0, 1.0));
        }
    }
    lift(r, camera);
    return r;
}

ReconstructionResult reconstruct_from_maps(const geometry::DepthMap& depth, const geometry::WarpField& warp,
                                           const geometry::PerspectiveCamera& camera) {
    if (depth.height() != warp.height() || depth.width() != warp.width()) {
        throw ShapeError("reconstruct_from_maps: depth and warp differ in size");
    }
    check_camera(camera, depth.height(), depth.width());
    ReconstructionResult r;
    r.segmentation = Mask(depth.height(), depth.width());
    r.depth = geometry::DepthMap(depth.height(), depth.width());
    r.warp = geometry::WarpField(depth.height(), depth.width());
    for (int y = 0; y < depth.height(); ++y) {
        for (int x = 0; x < depth.width(); ++x) {
            if (!depth.mask(y, x) || !warp.mask(y, x)) continue;
            r.segmentation.at(y, x) = 1;
            r.depth.set(y, x, depth.value(y, x));
            const auto uv = warp.uv(y, x);
            r.warp.set(y, x, uv.x(), uv.y());
        }
    }
    lift(r, camera);
    return r;
}

ReconstructionResult infer(model::DeepSfTModel& model, const Image& image, const geometry::NormalizationSpec& spec,
                           const geometry::PerspectiveCamera& camera) {
    check_camera(camera, model::kInputHeight, model::kInputWidth);
    const auto out = model::forward_image(model, image);
    return reconstruct(out.rho_refined, out.eta_hat, spec, camera);
}

}  // namespace deepsft::inference
