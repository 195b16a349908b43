#pragma once

#include <torch/torch.h>

#include "deepsft/model/network.hpp"

namespace deepsft::training {

/// Scalar loss values of one batch or an aggregate over several.
struct LossReport {
    double l1 = 0.0;        // warp term
    double l2 = 0.0;        // depth term on the refined output
    double total = 0.0;     // l1 + l2 (stage 1) or l2 (stage 2)
    double l2_first = 0.0;  // depth term on the main-block estimate (stage 1 auxiliary)
    std::int64_t samples = 0;
    double weight = 0.0;    // depth elements the means run over; aggregates weight batches by it
};

/// Differentiable terms. `objective` is what the optimizer minimizes.
struct LossTerms {
    torch::Tensor l1, l2, l2_first, total, objective;
    double elements = 0.0;  // depth elements averaged over (valid pixels for real data)

    LossReport report(std::int64_t samples) const;
};

/// Mean squared error over every warp element (l1) and every depth element
/// (l2, refined output). With `supervise_first_depth` the objective also adds
/// the same depth term evaluated on the main block's depth channel.
/// Shapes: main (B,3,H,W), refined (B,1,H,W), depth (B,1,H,W), warp (B,2,H,W).
LossTerms synthetic_loss(const model::ModelOutput& pred, const torch::Tensor& depth, const torch::Tensor& warp,
                         bool supervise_first_depth = true);

/// Mean squared depth error over pixels where `valid` is true. Throws
/// NumericalError when the batch holds no valid pixel.
LossTerms real_loss(const torch::Tensor& refined, const torch::Tensor& depth, const torch::Tensor& valid);

/// Value-only conveniences.
LossReport loss_synthetic(const model::ModelOutput& pred, const torch::Tensor& depth, const torch::Tensor& warp);
LossReport loss_real(const torch::Tensor& refined, const torch::Tensor& depth, const torch::Tensor& valid);

}  // namespace deepsft::training
