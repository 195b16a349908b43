#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "deepsft/datagen/dataset.hpp"
#include "deepsft/eval/metrics.hpp"
#include "deepsft/model/network.hpp"

namespace deepsft::eval {

inline constexpr double kReferenceFps = 20.4;  // published GPU figure, context only

struct ThroughputReport {
    double fps = 0.0;
    double seconds = 0.0;
    int frames = 0;
    int warmup = 0;
    int batch_size = 1;
    std::string device;
    std::string hardware;
    int threads = 1;
    double reference_fps = kReferenceFps;

    nlohmann::json to_json() const;
};

/// CPU model name and logical core count, plus the torch version.
std::string hardware_description();

/// Timed full forward passes (inference mode) over `frames` after `warmup`
/// untimed passes. Throws ConfigError for fewer than 10 frames.
ThroughputReport benchmark_throughput(model::DeepSfTModel& model, const std::vector<Image>& frames, int warmup = 2,
                                      int batch_size = 1);

/// Runs the model over a dataset split and scores it against the ground truth.
/// Registration is scored only when the dataset carries warps; atlas_to_px
/// defaults to the template texture width.
MetricReport evaluate_model(model::DeepSfTModel& model, const datagen::DatasetManifest& manifest,
                            const std::vector<std::size_t>& indices, double atlas_to_px = 0.0);

}  // namespace deepsft::eval
