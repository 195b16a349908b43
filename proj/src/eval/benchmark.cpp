#include "deepsft/eval/benchmark.hpp"

#include <chrono>
#include <fstream>
#include <thread>

#include "deepsft/error.hpp"
#include "deepsft/inference/reconstruct.hpp"
#include "deepsft/io/template_io.hpp"

namespace deepsft::eval {

nlohmann::json ThroughputReport::to_json() const {
    return {{"fps", fps},
            {"seconds", seconds},
            {"frames", frames},
            {"warmup", warmup},
            {"batch_size", batch_size},
            {"device", device},
            {"hardware", hardware},
            {"threads", threads},
            {"reference_fps", reference_fps},
            {"reference_note", "published figure on a desktop GPU; recorded for context, not compared"}};
}

std::string hardware_description() {
    std::string cpu = "unknown cpu";
    std::ifstream in("/proc/cpuinfo");
    for (std::string line; std::getline(in, line);) {
        if (line.rfind("model name", 0) == 0) {
            const auto pos = line.find(':');
            if (pos != std::string::npos) cpu = line.substr(pos + 2);
            break;
        }
    }
    return cpu + ", " + std::to_string(std::thread::hardware_concurrency()) + " logical cores, libtorch " +
           TORCH_VERSION;
}

ThroughputReport benchmark_throughput(model::DeepSfTModel& model, const std::vector<Image>& frames, int warmup,
                                      int batch_size) {
    if (frames.size() < 10) throw ConfigError("benchmark_throughput needs at least 10 frames");
    if (batch_size <= 0 || warmup < 0) throw ConfigError("benchmark_throughput: invalid batch size or warmup");
    torch::NoGradGuard guard;
    model->eval();
    const auto device = model->parameters().front().device();
    std::vector<torch::Tensor> batches;
    for (std::size_t i = 0; i < frames.size(); i += batch_size) {
        std::vector<torch::Tensor> items;
        for (std::size_t k = i; k < std::min(frames.size(), i + batch_size); ++k) {
            items.push_back(model::image_to_tensor(frames[k])[0]);
        }
        batches.push_back(torch::stack(items).to(device));
    }
    for (int i = 0; i < warmup; ++i) model->forward(batches[i % batches.size()]);
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& b : batches) {
        auto out = model->forward(b);
        out.refined.sum().item<float>();  // forces completion on asynchronous devices
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    ThroughputReport r;
    r.frames = static_cast<int>(frames.size());
    r.seconds = seconds;
    r.fps = frames.size() / seconds;
    r.warmup = warmup;
    r.batch_size = batch_size;
    r.device = device.str();
    r.hardware = hardware_description();
    r.threads = torch::get_num_threads();
    return r;
}

MetricReport evaluate_model(model::DeepSfTModel& model, const datagen::DatasetManifest& manifest,
                            const std::vector<std::size_t>& indices, double atlas_to_px) {
    if (atlas_to_px <= 0.0 && manifest.has_warp()) {
        atlas_to_px = datagen::load_dataset_template(manifest).texture.width();
    }
    std::vector<FrameMetrics> frames;
    for (auto i : indices) {
        const auto gt = datagen::load_frame(manifest, i);
        const auto rec = inference::infer(model, gt.rgb, manifest.normalization, manifest.camera);
        const geometry::WarpField* gt_warp = gt.warp ? &*gt.warp : nullptr;
        frames.push_back(evaluate_frame(manifest.frames[i].id, rec.depth, rec.segmentation,
                                        gt_warp ? &rec.warp : nullptr, gt.depth, gt_warp, atlas_to_px));
    }
    return MetricReport::aggregate(std::move(frames));
}

}  // namespace deepsft::eval
