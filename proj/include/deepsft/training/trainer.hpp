#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "deepsft/datagen/dataset.hpp"
#include "deepsft/model/checkpoint.hpp"
#include "deepsft/model/network.hpp"
#include "deepsft/training/losses.hpp"

namespace deepsft::training {

struct Stage1Config {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.9;
    int epochs = 40;
    int batch_size = 7;
    std::uint64_t seed = 0;
    std::int64_t max_steps = 0;       // 0: no limit; otherwise stop after this many optimizer steps
    bool supervise_first_depth = true;
    bool include_val = false;         // train on train + val frames
    std::string checkpoint_dir;       // empty: no per-epoch checkpoints
    std::string history_path;         // JSON-lines step log; empty: none

    void validate() const;
};

struct Stage2Config {
    double learning_rate = 1e-5;
    int epochs = 10;
    int batch_size = 7;
    std::uint64_t seed = 0;
    std::int64_t max_steps = 0;
    bool freeze_adaptation_statistics = true;  // normalization layers use running statistics
    bool include_val = false;
    std::string checkpoint_dir;
    std::string history_path;

    void validate() const;
};

nlohmann::json to_json(const Stage1Config& c);
nlohmann::json to_json(const Stage2Config& c);
Stage1Config stage1_config_from_json(const nlohmann::json& j);
Stage2Config stage2_config_from_json(const nlohmann::json& j);

struct StepRecord {
    std::string stage;
    int epoch = 0;
    std::int64_t step = 0;
    LossReport loss;
};

struct EpochRecord {
    int epoch = 0;
    std::int64_t steps = 0;
    LossReport mean;  // mean over every element the epoch's batch losses covered
};

struct TrainResult {
    std::vector<StepRecord> steps;
    std::vector<EpochRecord> epochs;
    nlohmann::json history;  // stage history as stored in checkpoints
    std::string main_hash_before;
    std::string main_hash_after;
    std::vector<std::string> warnings;
};

using StepCallback = std::function<void(const StepRecord&)>;

/// Frames of a manifest as normalized tensors, with an in-memory cache.
class FrameLoader {
public:
    FrameLoader(datagen::DatasetManifest manifest, std::vector<std::size_t> indices, bool need_warp);

    struct Batch {
        torch::Tensor images;  // (B, 3, H, W) in [0, 1]
        torch::Tensor depth;   // (B, 1, H, W) normalized
        torch::Tensor warp;    // (B, 2, H, W) normalized; undefined for depth-only data
        torch::Tensor valid;   // (B, 1, H, W) bool: ground-truth depth present
    };

    std::size_t size() const { return indices_.size(); }
    Batch batch(const std::vector<std::size_t>& positions);

private:
    struct Item {
        torch::Tensor image, depth, warp, valid;
    };
    const Item& item(std::size_t position);

    datagen::DatasetManifest manifest_;
    std::vector<std::size_t> indices_;
    bool need_warp_;
    std::vector<std::optional<Item>> cache_;
};

/// Frame order of one epoch: a permutation drawn from (seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, int epoch);

/// End-to-end training of both blocks with the synthetic loss.
/// Throws ConfigError if the manifest has no warp ground truth.
TrainResult train_stage1(model::DeepSfTModel& model, const datagen::DatasetManifest& manifest,
                         const Stage1Config& config, const nlohmann::json& prior_history = nlohmann::json::array(),
                         const StepCallback& on_step = {});

/// Trains only the adaptation block on depth-only data; the main block is
/// frozen and its hash is reported before and after.
TrainResult finetune_stage2(model::DeepSfTModel& model, const datagen::DatasetManifest& manifest,
                            const Stage2Config& config, const nlohmann::json& prior_history = nlohmann::json::array(),
                            const StepCallback& on_step = {});

/// Loss of a model on every frame of a loader, evaluated in inference mode.
LossReport evaluate_synthetic(model::DeepSfTModel& model, FrameLoader& loader, int batch_size = 7);

}  // namespace deepsft::training
