#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "deepsft/grid.hpp"

namespace deepsft::model {

enum class BlockKind { identity, conv_down, deconv_up };

std::string to_string(BlockKind kind);

/// One residual unit. `channels` are the two inner widths and the output width.
/// conv_down strides its first 1x1 convolution and the shortcut by `stride`
/// (ceil rounding); deconv_up applies nearest upsampling by `stride` to the input
/// of both branches.
struct BlockSpec {
    BlockKind kind = BlockKind::identity;
    int in_channels = 0;
    std::array<int, 3> channels{};
    int kernel = 3;
    int stride = 1;

    /// Throws ConfigError for non-positive sizes or an identity block whose output
    /// width differs from its input width.
    void validate() const;
};

class ResidualBlockImpl : public torch::nn::Module {
public:
    explicit ResidualBlockImpl(const BlockSpec& spec);

    torch::Tensor forward(const torch::Tensor& x);
    const BlockSpec& spec() const { return spec_; }

    /// Zeroes the scale and shift of the branch's last normalization so the
    /// block computes relu(shortcut(x)).
    void zero_main_branch();

private:
    BlockSpec spec_;
    torch::nn::Conv2d conv_a{nullptr}, conv_b{nullptr}, conv_c{nullptr}, conv_s{nullptr};
    torch::nn::BatchNorm2d bn_a{nullptr}, bn_b{nullptr}, bn_c{nullptr}, bn_s{nullptr};
};
TORCH_MODULE(ResidualBlock);

struct ModelConfig {
    int channel_divisor = 1;  // 8 gives the channel-reduced variant of the same topology

    int ch(int c) const { return std::max(1, c / channel_divisor); }
    void validate() const;
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct WeightInitSpec {
    std::string scheme = "glorot_uniform";
    std::uint64_t seed = 0;
    friend bool operator==(const WeightInitSpec&, const WeightInitSpec&) = default;
};

/// Encoder-decoder producing (depth, warp u, warp v) at input resolution.
class MainBlockImpl : public torch::nn::Module {
public:
    explicit MainBlockImpl(const ModelConfig& config);

    torch::Tensor forward(const torch::Tensor& x);
    torch::Tensor stem(const torch::Tensor& x);
    torch::Tensor encode(const torch::Tensor& x);  // bottleneck features

private:
    torch::Tensor decode(torch::Tensor x);

    torch::nn::Conv2d stem_conv{nullptr};
    torch::nn::BatchNorm2d stem_bn{nullptr};
    torch::nn::ModuleList encoder, bridge, decoder1, decoder2;
    torch::nn::Conv2d tail_conv{nullptr};
    torch::nn::BatchNorm2d tail_bn{nullptr};
    torch::nn::Conv2d out_conv{nullptr};
};
TORCH_MODULE(MainBlock);

/// Shallower encoder-decoder mapping image + main output (6 channels) to refined depth.
class AdaptationBlockImpl : public torch::nn::Module {
public:
    explicit AdaptationBlockImpl(const ModelConfig& config);

    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::Conv2d stem_conv{nullptr};
    torch::nn::BatchNorm2d stem_bn{nullptr};
    torch::nn::ModuleList encoder, decoder;
    torch::nn::Conv2d tail_conv{nullptr};
    torch::nn::BatchNorm2d tail_bn{nullptr};
    torch::nn::Conv2d tail_conv2{nullptr};
    torch::nn::Conv2d out_conv{nullptr};
};
TORCH_MODULE(AdaptationBlock);

struct ModelOutput {
    torch::Tensor main;     // (B, 3, H, W): depth estimate, warp u, warp v
    torch::Tensor refined;  // (B, 1, H, W)

    torch::Tensor rho_hat() const { return main.narrow(1, 0, 1); }
    torch::Tensor eta_hat() const { return main.narrow(1, 1, 2); }
};

inline constexpr int kInputHeight = 270;
inline constexpr int kInputWidth = 480;

class DeepSfTModelImpl : public torch::nn::Module {
public:
    DeepSfTModelImpl(const ModelConfig& config, const WeightInitSpec& init);

    /// x: (B, 3, 270, 480) in [0, 1]. Throws ShapeError for any other shape.
    ModelOutput forward(const torch::Tensor& x);
    torch::Tensor bottleneck(const torch::Tensor& x);

    MainBlock main_block{nullptr};
    AdaptationBlock adaptation_block{nullptr};

    const ModelConfig& config() const { return config_; }
    const WeightInitSpec& init() const { return init_; }

private:
    ModelConfig config_;
    WeightInitSpec init_;
};
TORCH_MODULE(DeepSfTModel);

DeepSfTModel build_model(const WeightInitSpec& init = {}, const ModelConfig& config = {});

/// Re-draws every convolution weight (Glorot-uniform) from a generator seeded
/// by init.seed; biases zero; normalization scale one, shift zero.
void initialize_weights(torch::nn::Module& module, const WeightInitSpec& init);

/// Single-image forward in inference mode.
struct ImageOutput {
    Grid<float> rho_hat;      // h x w
    Grid<float> eta_hat;      // h x w x 2
    Grid<float> rho_refined;  // h x w
};
ImageOutput forward_image(DeepSfTModel& model, const Image& image);

torch::Tensor image_to_tensor(const Image& image);                  // (1, 3, h, w)
Grid<float> tensor_to_grid(const torch::Tensor& chw);               // (C, h, w) -> h x w x C

struct ParameterEntry {
    std::string block;  // main | adaptation
    std::string name;
    std::vector<std::int64_t> shape;
    std::int64_t count = 0;
};

struct ParameterSummary {
    std::vector<ParameterEntry> entries;
    std::int64_t main_total = 0;
    std::int64_t adaptation_total = 0;
    std::int64_t total() const { return main_total + adaptation_total; }
    std::string to_text() const;
};

ParameterSummary parameter_summary(DeepSfTModel& model);

/// FNV-1a digest over every parameter and buffer of a module, in name order.
std::string module_hash(const torch::nn::Module& module);

/// Device from DEEPSFT_DEVICE (cpu | cuda[:n]); cpu when unset.
torch::Device default_device();

}  // namespace deepsft::model
