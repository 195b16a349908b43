#include "deepsft/model/network.hpp"

#include <cstdlib>
#include <sstream>

#include "deepsft/error.hpp"
#include "deepsft/io/json_io.hpp"

namespace F = torch::nn::functional;

namespace deepsft::model {

namespace {

torch::nn::Conv2d conv(int in, int out, int kernel, int stride = 1) {
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, kernel).stride(stride).padding(kernel / 2).bias(true));
}

torch::nn::BatchNorm2d bn(int channels) {
    return torch::nn::BatchNorm2d(torch::nn::BatchNorm2dOptions(channels).momentum(0.01).eps(1e-5));
}

torch::Tensor upsample(const torch::Tensor& x, double factor) {
    return F::interpolate(x, F::InterpolateFuncOptions()
                                 .scale_factor(std::vector<double>{factor, factor})
                                 .mode(torch::kNearest));
}

// removes rows/cols from each side; negative amounts zero-pad instead
torch::Tensor crop(const torch::Tensor& x, int top, int bottom, int left, int right) {
    const auto h = x.size(2);
    const auto w = x.size(3);
    return x.narrow(2, top, h - top - bottom).narrow(3, left, w - left - right);
}

torch::Tensor run(torch::nn::ModuleList& blocks, torch::Tensor x) {
    for (const auto& b : *blocks) {
        x = b->as<ResidualBlockImpl>()->forward(x);
    }
    return x;
}

void add_stage(torch::nn::ModuleList& list, BlockKind first, int in, std::array<int, 3> ch, int stride,
               int identities) {
    list->push_back(ResidualBlock(BlockSpec{first, in, ch, 3, stride}));
    for (int i = 0; i < identities; ++i) {
        list->push_back(ResidualBlock(BlockSpec{BlockKind::identity, ch[2], ch, 3, 1}));
    }
}

void check_input(const torch::Tensor& x, int channels) {
    if (x.dim() != 4 || x.size(1) != channels || x.size(2) != kInputHeight || x.size(3) != kInputWidth) {
        std::ostringstream os;
        os << "expected input (B, " << channels << ", " << kInputHeight << ", " << kInputWidth << "), got " << x.sizes();
        throw ShapeError(os.str());
    }
}

}  // namespace

std::string to_string(BlockKind kind) {
    switch (kind) {
        case BlockKind::identity: return "identity";
        case BlockKind::conv_down: return "conv-down";
        case BlockKind::deconv_up: return "deconv-up";
    }
    return "identity";
}

void BlockSpec::validate() const {
    if (in_channels <= 0 || channels[0] <= 0 || channels[1] <= 0 || channels[2] <= 0) {
        throw ConfigError("residual block: channel counts must be positive");
    }
    if (kernel <= 0 || kernel % 2 == 0 || stride <= 0) {
        throw ConfigError("residual block: kernel must be odd and stride positive");
    }
    if (kind == BlockKind::identity && (in_channels != channels[2] || stride != 1)) {
        throw ConfigError("identity block: input has " + std::to_string(in_channels) + " channels but the block emits " +
                          std::to_string(channels[2]));
    }
}

ResidualBlockImpl::ResidualBlockImpl(const BlockSpec& spec) : spec_(spec) {
    spec.validate();
    const int down = spec.kind == BlockKind::conv_down ? spec.stride : 1;
    conv_a = register_module("conv_a", conv(spec.in_channels, spec.channels[0], 1, down));
    bn_a = register_module("bn_a", bn(spec.channels[0]));
    conv_b = register_module("conv_b", conv(spec.channels[0], spec.channels[1], spec.kernel));
    bn_b = register_module("bn_b", bn(spec.channels[1]));
    conv_c = register_module("conv_c", conv(spec.channels[1], spec.channels[2], 1));
    bn_c = register_module("bn_c", bn(spec.channels[2]));
    if (spec.kind != BlockKind::identity) {
        conv_s = register_module("conv_s", conv(spec.in_channels, spec.channels[2], 1, down));
        bn_s = register_module("bn_s", bn(spec.channels[2]));
    }
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& input) {
    torch::Tensor x = input;
    if (spec_.kind == BlockKind::deconv_up) {
        x = upsample(x, spec_.stride);
    }
    torch::Tensor y = torch::relu(bn_a(conv_a(x)));
    y = torch::relu(bn_b(conv_b(y)));
    y = bn_c(conv_c(y));
    const torch::Tensor shortcut = spec_.kind == BlockKind::identity ? x : bn_s(conv_s(x));
    return torch::relu(y + shortcut);
}

void ResidualBlockImpl::zero_main_branch() {
    torch::NoGradGuard guard;
    bn_c->weight.zero_();
    bn_c->bias.zero_();
}

void ModelConfig::validate() const {
    if (channel_divisor <= 0 || 64 % channel_divisor != 0) {
        throw ConfigError("channel_divisor must divide 64");
    }
}

// ---------------------------------------------------------------------------

MainBlockImpl::MainBlockImpl(const ModelConfig& c) {
    stem_conv = register_module("stem_conv", conv(3, c.ch(64), 7, 2));
    stem_bn = register_module("stem_bn", bn(c.ch(64)));

    encoder = register_module("encoder", torch::nn::ModuleList());
    add_stage(encoder, BlockKind::conv_down, c.ch(64), {c.ch(64), c.ch(64), c.ch(256)}, 1, 2);
    add_stage(encoder, BlockKind::conv_down, c.ch(256), {c.ch(128), c.ch(128), c.ch(512)}, 2, 3);
    add_stage(encoder, BlockKind::conv_down, c.ch(512), {c.ch(256), c.ch(256), c.ch(1024)}, 2, 3);

    // 1024 -> 256 at the bottleneck resolution: a projection block then identities
    bridge = register_module("bridge", torch::nn::ModuleList());
    add_stage(bridge, BlockKind::conv_down, c.ch(1024), {c.ch(1024), c.ch(1024), c.ch(256)}, 1, 2);

    decoder1 = register_module("decoder1", torch::nn::ModuleList());
    add_stage(decoder1, BlockKind::deconv_up, c.ch(256), {c.ch(512), c.ch(512), c.ch(128)}, 2, 3);
    decoder2 = register_module("decoder2", torch::nn::ModuleList());
    add_stage(decoder2, BlockKind::deconv_up, c.ch(128), {c.ch(256), c.ch(256), c.ch(64)}, 2, 2);

    tail_conv = register_module("tail_conv", conv(c.ch(64), c.ch(64), 7));
    tail_bn = register_module("tail_bn", bn(c.ch(64)));
    out_conv = register_module("out_conv", conv(c.ch(64), 3, 3));
}

torch::Tensor MainBlockImpl::stem(const torch::Tensor& x) {
    return F::max_pool2d(torch::relu(stem_bn(stem_conv(x))), F::MaxPool2dFuncOptions(3).stride(3));
}

torch::Tensor MainBlockImpl::encode(const torch::Tensor& x) { return run(encoder, stem(x)); }

torch::Tensor MainBlockImpl::decode(torch::Tensor x) {
    x = run(bridge, x);                                    // 12 x 20
    x = decoder1[0]->as<ResidualBlockImpl>()->forward(x);  // 24 x 40
    x = crop(x, 1, 0, 1, 0);                               // 23 x 39
    for (std::size_t i = 1; i < decoder1->size(); ++i) x = decoder1[i]->as<ResidualBlockImpl>()->forward(x);
    x = decoder2[0]->as<ResidualBlockImpl>()->forward(x);  // 46 x 78
    x = F::pad(x, F::PadFuncOptions({1, 1, 0, 0}));        // 46 x 80
    for (std::size_t i = 1; i < decoder2->size(); ++i) x = decoder2[i]->as<ResidualBlockImpl>()->forward(x);
    x = crop(upsample(x, 3), 1, 1, 0, 0);                  // 136 x 240
    x = torch::relu(tail_bn(tail_conv(x)));
    x = crop(upsample(x, 2), 1, 1, 0, 0);                  // 270 x 480
    return out_conv(x);
}

torch::Tensor MainBlockImpl::forward(const torch::Tensor& x) { return decode(encode(x)); }

AdaptationBlockImpl::AdaptationBlockImpl(const ModelConfig& c) {
    stem_conv = register_module("stem_conv", conv(6, c.ch(64), 7, 2));
    stem_bn = register_module("stem_bn", bn(c.ch(64)));
    encoder = register_module("encoder", torch::nn::ModuleList());
    add_stage(encoder, BlockKind::conv_down, c.ch(64), {c.ch(64), c.ch(64), c.ch(256)}, 1, 2);
    add_stage(encoder, BlockKind::conv_down, c.ch(256), {c.ch(128), c.ch(128), c.ch(512)}, 2, 4);
    decoder = register_module("decoder", torch::nn::ModuleList());
    add_stage(decoder, BlockKind::deconv_up, c.ch(512), {c.ch(512), c.ch(512), c.ch(128)}, 2, 2);
    tail_conv = register_module("tail_conv", conv(c.ch(128), c.ch(64), 3));
    tail_bn = register_module("tail_bn", bn(c.ch(64)));
    tail_conv2 = register_module("tail_conv2", conv(c.ch(64), c.ch(32), 3));
    out_conv = register_module("out_conv", conv(c.ch(32), 1, 3));
}

torch::Tensor AdaptationBlockImpl::forward(const torch::Tensor& input) {
    torch::Tensor x = F::max_pool2d(torch::relu(stem_bn(stem_conv(input))), F::MaxPool2dFuncOptions(3).stride(3));
    x = run(encoder, x);                        // 23 x 40
    x = run(decoder, x);                        // 46 x 80
    x = crop(upsample(x, 2), 1, 1, 0, 0);       // 90 x 160
    x = torch::relu(tail_bn(tail_conv(x)));
    x = upsample(x, 3);                         // 270 x 480
    x = torch::relu(tail_conv2(x));
    return out_conv(x);
}

// ---------------------------------------------------------------------------

DeepSfTModelImpl::DeepSfTModelImpl(const ModelConfig& config, const WeightInitSpec& init)
    : config_(config), init_(init) {
    config.validate();
    main_block = register_module("main", MainBlock(config));
    adaptation_block = register_module("adaptation", AdaptationBlock(config));
    initialize_weights(*this, init);
}

ModelOutput DeepSfTModelImpl::forward(const torch::Tensor& x) {
    check_input(x, 3);
    ModelOutput out;
    out.main = main_block->forward(x);
    out.refined = adaptation_block->forward(torch::cat({x, out.main}, 1));
    return out;
}

torch::Tensor DeepSfTModelImpl::bottleneck(const torch::Tensor& x) {
    check_input(x, 3);
    return main_block->encode(x);
}

DeepSfTModel build_model(const WeightInitSpec& init, const ModelConfig& config) { return DeepSfTModel(config, init); }

void initialize_weights(torch::nn::Module& module, const WeightInitSpec& init) {
    if (init.scheme != "glorot_uniform") {
        throw ConfigError("unknown weight initialization scheme '" + init.scheme + "'");
    }
    auto gen = at::make_generator<at::CPUGeneratorImpl>(init.seed);
    torch::NoGradGuard guard;
    for (auto& item : module.named_modules("", /*include_self=*/false)) {
        if (auto* c = item.value()->as<torch::nn::Conv2dImpl>()) {
            const auto& w = c->weight;
            const double fan_in = static_cast<double>(w.size(1) * w.size(2) * w.size(3));
            const double fan_out = static_cast<double>(w.size(0) * w.size(2) * w.size(3));
            const double limit = std::sqrt(6.0 / (fan_in + fan_out));
            w.copy_(torch::empty(w.sizes(), torch::kFloat).uniform_(-limit, limit, gen).to(w.options()));
            if (c->bias.defined()) c->bias.zero_();
        } else if (auto* b = item.value()->as<torch::nn::BatchNorm2dImpl>()) {
            b->weight.fill_(1.0);
            b->bias.zero_();
            b->running_mean.zero_();
            b->running_var.fill_(1.0);
            b->num_batches_tracked.zero_();
        }
    }
}

torch::Tensor image_to_tensor(const Image& image) {
    if (image.channels() != 3) {
        throw ShapeError("expected a 3-channel image");
    }
    auto t = torch::from_blob(const_cast<float*>(image.data()), {image.height(), image.width(), 3}, torch::kFloat);
    return t.permute({2, 0, 1}).unsqueeze(0).contiguous();
}

Grid<float> tensor_to_grid(const torch::Tensor& chw) {
    const auto t = chw.detach().to(torch::kCPU, torch::kFloat).permute({1, 2, 0}).contiguous();
    Grid<float> g(static_cast<int>(t.size(0)), static_cast<int>(t.size(1)), static_cast<int>(t.size(2)));
    std::copy(t.data_ptr<float>(), t.data_ptr<float>() + g.size(), g.data());
    return g;
}

ImageOutput forward_image(DeepSfTModel& model, const Image& image) {
    if (image.height() != kInputHeight || image.width() != kInputWidth || image.channels() != 3) {
        throw ShapeError("forward expects a 270 x 480 x 3 image");
    }
    torch::NoGradGuard guard;
    const bool was_training = model->is_training();
    model->eval();
    const auto device = model->parameters().front().device();
    const ModelOutput out = model->forward(image_to_tensor(image).to(device));
    model->train(was_training);
    return {tensor_to_grid(out.rho_hat()[0]), tensor_to_grid(out.eta_hat()[0]), tensor_to_grid(out.refined[0])};
}

std::string ParameterSummary::to_text() const {
    std::ostringstream os;
    for (const auto& e : entries) {
        os << e.block << '.' << e.name << " [";
        for (std::size_t i = 0; i < e.shape.size(); ++i) os << (i ? "," : "") << e.shape[i];
        os << "] " << e.count << '\n';
    }
    os << "main " << main_total << "\nadaptation " << adaptation_total << "\ntotal " << total() << '\n';
    return os.str();
}

ParameterSummary parameter_summary(DeepSfTModel& model) {
    ParameterSummary s;
    for (const auto& [block, module] :
         {std::pair<std::string, torch::nn::Module*>{"main", model->main_block.get()},
          std::pair<std::string, torch::nn::Module*>{"adaptation", model->adaptation_block.get()}}) {
        for (const auto& p : module->named_parameters()) {
            ParameterEntry e{block, p.key(), p.value().sizes().vec(), p.value().numel()};
            (block == "main" ? s.main_total : s.adaptation_total) += e.count;
            s.entries.push_back(std::move(e));
        }
    }
    return s;
}

std::string module_hash(const torch::nn::Module& module) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const std::string& name, const torch::Tensor& t) {
        h = io::fnv1a(name, h);
        const auto c = t.detach().to(torch::kCPU).contiguous();
        h = io::fnv1a(std::string_view(static_cast<const char*>(c.data_ptr()), c.numel() * c.element_size()), h);
    };
    for (const auto& p : module.named_parameters()) feed(p.key(), p.value());
    for (const auto& b : module.named_buffers()) feed(b.key(), b.value());
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

torch::Device default_device() {
    const char* env = std::getenv("DEEPSFT_DEVICE");
    if (!env || !*env) return torch::kCPU;
    try {
        torch::Device d(env);
        if (d.is_cuda() && !torch::cuda::is_available()) {
            throw ConfigError("DEEPSFT_DEVICE requests CUDA but no CUDA device is available");
        }
        return d;
    } catch (const c10::Error&) {
        throw ConfigError(std::string("invalid DEEPSFT_DEVICE '") + env + "'");
    }
}

}  // namespace deepsft::model
