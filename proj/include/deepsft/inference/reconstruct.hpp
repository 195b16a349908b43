#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "deepsft/geometry/camera.hpp"
#include "deepsft/geometry/maps.hpp"
#include "deepsft/geometry/normalization.hpp"
#include "deepsft/grid.hpp"
#include "deepsft/model/network.hpp"

namespace deepsft::inference {

struct ReconstructionResult {
    std::vector<Eigen::Vector3d> points;       // camera frame, mm; one per foreground pixel, row-major order
    std::vector<std::array<int, 2>> pixels;    // (row, col) of each point
    Mask segmentation;
    geometry::WarpField warp;
    geometry::DepthMap depth;
};

/// Foreground where the refined depth and both warp channels exceed the
/// normalization threshold.
Mask segment(const Grid<float>& rho_refined, const Grid<float>& eta_hat, const geometry::NormalizationSpec& spec);

/// Denormalizes network-format maps on the segmented region and lifts every
/// foreground pixel by perspective embedding.
ReconstructionResult reconstruct(const Grid<float>& rho_refined, const Grid<float>& eta_hat,
                                 const geometry::NormalizationSpec& spec, const geometry::PerspectiveCamera& camera);

/// Same lifting from metric maps (e.g. ground truth). Foreground is the
/// intersection of both masks.
ReconstructionResult reconstruct_from_maps(const geometry::DepthMap& depth, const geometry::WarpField& warp,
                                           const geometry::PerspectiveCamera& camera);

/// Forward pass in inference mode followed by reconstruct(). The camera must
/// have the network resolution; images from other cameras go through adapt_image first.
ReconstructionResult infer(model::DeepSfTModel& model, const Image& image, const geometry::NormalizationSpec& spec,
                           const geometry::PerspectiveCamera& camera);

}  // namespace deepsft::inference
