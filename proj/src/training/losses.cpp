#include "deepsft/training/losses.hpp"

#include <sstream>

#include "deepsft/error.hpp"

namespace deepsft::training {

namespace {

void expect_shape(const torch::Tensor& t, const torch::Tensor& like, std::int64_t channels, const char* what) {
    if (t.dim() != 4 || t.size(0) != like.size(0) || t.size(1) != channels || t.size(2) != like.size(2) ||
        t.size(3) != like.size(3)) {
        std::ostringstream os;
        os << what << ": expected (" << like.size(0) << ", " << channels << ", " << like.size(2) << ", "
           << like.size(3) << "), got " << t.sizes();
        throw ShapeError(os.str());
    }
}

double value(const torch::Tensor& t) { return t.defined() ? t.detach().to(torch::kDouble).item<double>() : 0.0; }

}  // namespace

LossReport LossTerms::report(std::int64_t samples) const {
    return {value(l1), value(l2), value(total), value(l2_first), samples, elements};
}

LossTerms synthetic_loss(const model::ModelOutput& pred, const torch::Tensor& depth, const torch::Tensor& warp,
                         bool supervise_first_depth) {
    if (pred.main.dim() != 4 || pred.main.size(1) != 3) {
        throw ShapeError("synthetic_loss: main output must be (B, 3, H, W)");
    }
    expect_shape(pred.refined, pred.main, 1, "refined depth");
    expect_shape(depth, pred.main, 1, "target depth");
    expect_shape(warp, pred.main, 2, "target warp");
    LossTerms t;
    t.l1 = (pred.eta_hat() - warp).pow(2).mean();
    t.l2 = (pred.refined - depth).pow(2).mean();
    t.l2_first = (pred.rho_hat() - depth).pow(2).mean();
    t.total = t.l1 + t.l2;
    t.objective = supervise_first_depth ? t.total + t.l2_first : t.total;
    t.elements = static_cast<double>(depth.numel());
    return t;
}

LossTerms real_loss(const torch::Tensor& refined, const torch::Tensor& depth, const torch::Tensor& valid) {
    if (refined.dim() != 4 || refined.size(1) != 1) {
        throw ShapeError("real_loss: refined depth must be (B, 1, H, W)");
    }
    expect_shape(depth, refined, 1, "target depth");
    expect_shape(valid, refined, 1, "valid mask");
    const auto mask = valid.to(refined.dtype());
    const auto count = mask.sum();
    if (count.item<double>() == 0.0) {
        throw NumericalError("real_loss: batch contains no valid depth pixel");
    }
    LossTerms t;
    t.l2 = ((refined - depth).pow(2) * mask).sum() / count;
    t.total = t.l2;
    t.objective = t.l2;
    t.elements = count.item<double>();
    return t;
}

LossReport loss_synthetic(const model::ModelOutput& pred, const torch::Tensor& depth, const torch::Tensor& warp) {
    torch::NoGradGuard guard;
    return synthetic_loss(pred, depth, warp, false).report(pred.main.size(0));
}

LossReport loss_real(const torch::Tensor& refined, const torch::Tensor& depth, const torch::Tensor& valid) {
    torch::NoGradGuard guard;
    return real_loss(refined, depth, valid).report(refined.size(0));
}

}  // namespace deepsft::training
