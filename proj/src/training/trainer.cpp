#include "deepsft/training/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>


#include "deepsft/error.hpp"
#include "deepsft/geometry/normalization.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace deepsft::training {

void Stage1Config::validate() const {
    if (learning_rate < 0 || beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) {
        throw ConfigError("stage 1: invalid optimizer settings");
    }
    if (epochs < 0 || batch_size <= 0 || max_steps < 0) {
        throw ConfigError("stage 1: epochs and max_steps must be non-negative, batch_size positive");
    }
}

void Stage2Config::validate() const {
    if (learning_rate < 0) throw ConfigError("stage 2: learning rate must be non-negative");
    if (epochs < 0 || batch_size <= 0 || max_steps < 0) {
        throw ConfigError("stage 2: epochs and max_steps must be non-negative, batch_size positive");
    }
}

json to_json(const Stage1Config& c) {
    return {{"optimizer", "adam"},          {"learning_rate", c.learning_rate},
            {"beta1", c.beta1},             {"beta2", c.beta2},
            {"epochs", c.epochs},           {"batch_size", c.batch_size},
            {"seed", c.seed},               {"max_steps", c.max_steps},
            {"supervise_first_depth", c.supervise_first_depth},
            {"include_val", c.include_val}};
}

json to_json(const Stage2Config& c) {
    return {{"optimizer", "sgd"},       {"learning_rate", c.learning_rate},
            {"epochs", c.epochs},       {"batch_size", c.batch_size},
            {"seed", c.seed},           {"max_steps", c.max_steps},
            {"freeze_adaptation_statistics", c.freeze_adaptation_statistics},
            {"include_val", c.include_val}};
}

Stage1Config stage1_config_from_json(const json& j) {
    Stage1Config c;
    try {
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.beta1 = j.value("beta1", c.beta1);
        c.beta2 = j.value("beta2", c.beta2);
        c.epochs = j.value("epochs", c.epochs);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.seed = j.value("seed", c.seed);
        c.max_steps = j.value("max_steps", c.max_steps);
        c.supervise_first_depth = j.value("supervise_first_depth", c.supervise_first_depth);
        c.include_val = j.value("include_val", c.include_val);
        c.checkpoint_dir = j.value("checkpoint_dir", c.checkpoint_dir);
        c.history_path = j.value("history_path", c.history_path);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("stage 1 config: ") + e.what());
    }
    c.validate();
    return c;
}

Stage2Config stage2_config_from_json(const json& j) {
    Stage2Config c;
    try {
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.epochs = j.value("epochs", c.epochs);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.seed = j.value("seed", c.seed);
        c.max_steps = j.value("max_steps", c.max_steps);
        c.freeze_adaptation_statistics = j.value("freeze_adaptation_statistics", c.freeze_adaptation_statistics);
        c.include_val = j.value("include_val", c.include_val);
        c.checkpoint_dir = j.value("checkpoint_dir", c.checkpoint_dir);
        c.history_path = j.value("history_path", c.history_path);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("stage 2 config: ") + e.what());
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------

FrameLoader::FrameLoader(datagen::DatasetManifest manifest, std::vector<std::size_t> indices, bool need_warp)
    : manifest_(std::move(manifest)), indices_(std::move(indices)), need_warp_(need_warp), cache_(indices_.size()) {
    if (need_warp_ && !manifest_.has_warp()) {
        throw ConfigError("dataset has no warp ground truth");
    }
}

const FrameLoader::Item& FrameLoader::item(std::size_t position) {
    auto& slot = cache_.at(position);
    if (slot) return *slot;
    const auto frame = datagen::load_frame(manifest_, indices_[position]);
    if (frame.rgb.height() != model::kInputHeight || frame.rgb.width() != model::kInputWidth) {
        throw ShapeError("frame " + manifest_.frames[indices_[position]].id + " is not 270 x 480");
    }
    const auto& spec = manifest_.normalization;
    Item it;
    it.image = model::image_to_tensor(frame.rgb)[0];
    const Grid<float> nd = geometry::normalize_depth(frame.depth, spec);
    it.depth = torch::from_blob(const_cast<float*>(nd.data()), {1, nd.height(), nd.width()}, torch::kFloat).clone();
    it.valid = torch::from_blob(const_cast<unsigned char*>(frame.depth.mask().data()),
                                {1, nd.height(), nd.width()}, torch::kUInt8)
                   .to(torch::kBool);
    if (need_warp_) {
        const Grid<float> nw = geometry::normalize_warp(*frame.warp, spec);
        it.warp = torch::from_blob(const_cast<float*>(nw.data()), {nw.height(), nw.width(), 2}, torch::kFloat)
                      .permute({2, 0, 1})
                      .contiguous();
    }
    slot = std::move(it);
    return *slot;
}

FrameLoader::Batch FrameLoader::batch(const std::vector<std::size_t>& positions) {
    std::vector<torch::Tensor> im, d, w, v;
    for (auto p : positions) {
        const auto& it = item(p);
        im.push_back(it.image);
        d.push_back(it.depth);
        v.push_back(it.valid);
        if (need_warp_) w.push_back(it.warp);
    }
    Batch b{torch::stack(im), torch::stack(d), need_warp_ ? torch::stack(w) : torch::Tensor(), torch::stack(v)};
    return b;
}

std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, int epoch) {
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(datagen::frame_seed(seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

namespace {

std::vector<std::size_t> training_indices(const datagen::DatasetManifest& m, bool include_val) {
    auto idx = m.indices(datagen::Split::train);
    if (include_val) {
        const auto val = m.indices(datagen::Split::val);
        idx.insert(idx.end(), val.begin(), val.end());
        std::sort(idx.begin(), idx.end());
    }
    if (idx.empty()) throw ConfigError("dataset has no training frames");
    return idx;
}

class HistoryLog {
public:
    explicit HistoryLog(const std::string& path) {
        if (path.empty()) return;
        if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
        out_.open(path, std::ios::app);
        if (!out_) throw IoError("cannot write history log " + path);
    }
    void write(const StepRecord& r) {
        if (!out_.is_open()) return;
        json j = {{"stage", r.stage}, {"epoch", r.epoch}, {"step", r.step}, {"L1", r.loss.l1},
                  {"L2", r.loss.l2},  {"total", r.loss.total}};
        if (r.stage == "stage1") j["L2_first"] = r.loss.l2_first;
        out_ << j.dump() << '\n';
        out_.flush();
    }

private:
    std::ofstream out_;
};

// Weighted by the elements each batch mean runs over, so an epoch aggregate
// does not depend on how frames were grouped into batches.
void accumulate(LossReport& acc, const LossReport& r) {
    const double w = r.weight > 0.0 ? r.weight : static_cast<double>(r.samples);
    acc.l1 += r.l1 * w;
    acc.l2 += r.l2 * w;
    acc.total += r.total * w;
    acc.l2_first += r.l2_first * w;
    acc.samples += r.samples;
    acc.weight += w;
}

LossReport finish(LossReport acc) {
    if (acc.weight > 0.0) {
        const double n = acc.weight;
        acc.l1 /= n;
        acc.l2 /= n;
        acc.total /= n;
        acc.l2_first /= n;
    }
    return acc;
}

json stage_entry(const std::string& stage, const json& config, const datagen::DatasetManifest& m,
                 std::int64_t steps, int epochs, const std::vector<EpochRecord>& records) {
    json e = {{"stage", stage}, {"config", config}, {"dataset_hash", m.config_hash}, {"dataset_source", m.source},
              {"steps", steps}, {"epochs", epochs}};
    if (!records.empty()) e["final_loss"] = records.back().mean.total;
    return e;
}

void save_epoch(const std::string& dir, const std::string& stage, int epoch, model::DeepSfTModel& model,
                const geometry::NormalizationSpec& spec, const json& history) {
    if (dir.empty()) return;
    char name[64];
    std::snprintf(name, sizeof name, "%s_epoch_%03d.pt", stage.c_str(), epoch + 1);
    model::save_checkpoint(fs::path(dir) / name, model, spec, history);
}

template <class StepFn>
TrainResult run_epochs(const std::string& stage, int epochs, int batch_size, std::uint64_t seed,
                       std::int64_t max_steps, FrameLoader& loader, const std::string& history_path,
                       const StepCallback& on_step, StepFn&& step_fn,
                       const std::function<void(int, const std::vector<EpochRecord>&)>& on_epoch) {
    TrainResult result;
    HistoryLog log(history_path);
    std::int64_t step = 0;
    for (int epoch = 0; epoch < epochs && (max_steps == 0 || step < max_steps); ++epoch) {
        const auto order = epoch_order(loader.size(), seed, epoch);
        LossReport acc;
        std::int64_t epoch_steps = 0;
        for (std::size_t start = 0; start < order.size() && (max_steps == 0 || step < max_steps);
             start += batch_size) {
            const std::vector<std::size_t> positions(
                order.begin() + start, order.begin() + std::min(order.size(), start + batch_size));
            const LossReport r = step_fn(loader.batch(positions));
            StepRecord rec{stage, epoch, step++, r};
            log.write(rec);
            if (on_step) on_step(rec);
            result.steps.push_back(rec);
            accumulate(acc, r);
            ++epoch_steps;
        }
        result.epochs.push_back({epoch, epoch_steps, finish(acc)});
        on_epoch(epoch, result.epochs);
    }
    return result;
}

}  // namespace

TrainResult train_stage1(model::DeepSfTModel& model, const datagen::DatasetManifest& manifest,
                         const Stage1Config& config, const json& prior_history, const StepCallback& on_step) {
    config.validate();
    if (!manifest.has_warp()) {
        throw ConfigError("stage 1 needs registration ground truth; dataset '" + manifest.root.string() +
                          "' is depth-only");
    }
    FrameLoader loader(manifest, training_indices(manifest, config.include_val), true);
    const auto device = model->parameters().front().device();
    torch::optim::Adam optimizer(
        model->parameters(),
        torch::optim::AdamOptions(config.learning_rate).betas({config.beta1, config.beta2}));
    model->train();
    for (auto& p : model->parameters()) p.set_requires_grad(true);

    std::int64_t steps_done = 0;
    auto step_fn = [&](const FrameLoader::Batch& b) {
        optimizer.zero_grad();
        const auto out = model->forward(b.images.to(device));
        const auto terms = synthetic_loss(out, b.depth.to(device), b.warp.to(device), config.supervise_first_depth);
        terms.objective.backward();
        optimizer.step();
        ++steps_done;
        return terms.report(b.images.size(0));
    };
    auto on_epoch = [&](int epoch, const std::vector<EpochRecord>& records) {
        json h = prior_history;
        h.push_back(stage_entry("stage1", to_json(config), manifest, steps_done, epoch + 1, records));
        save_epoch(config.checkpoint_dir, "stage1", epoch, model, manifest.normalization, h);
    };
    TrainResult result = run_epochs("stage1", config.epochs, config.batch_size, config.seed, config.max_steps, loader,
                                    config.history_path, on_step, step_fn, on_epoch);
    result.history = prior_history;
    result.history.push_back(
        stage_entry("stage1", to_json(config), manifest, steps_done, static_cast<int>(result.epochs.size()),
                    result.epochs));
    model->eval();
    return result;
}

TrainResult finetune_stage2(model::DeepSfTModel& model, const datagen::DatasetManifest& manifest,
                            const Stage2Config& config, const json& prior_history, const StepCallback& on_step) {
    config.validate();
    std::vector<std::string> warnings;
    const bool has_stage1 = std::any_of(prior_history.begin(), prior_history.end(), [](const json& e) {
        return e.value("stage", std::string()) == "stage1";
    });
    if (!has_stage1) {
        warnings.push_back("fine-tuning a model without a recorded stage-1 run");
    }
    FrameLoader loader(manifest, training_indices(manifest, config.include_val), false);
    const auto device = model->parameters().front().device();

    const std::string before = model::module_hash(*model->main_block);
    model->main_block->eval();
    for (auto& p : model->main_block->parameters()) p.set_requires_grad(false);
    model->adaptation_block->train(!config.freeze_adaptation_statistics);
    torch::optim::SGD optimizer(model->adaptation_block->parameters(), torch::optim::SGDOptions(config.learning_rate));

    std::int64_t steps_done = 0;
    auto step_fn = [&](const FrameLoader::Batch& b) {
        optimizer.zero_grad();
        const auto images = b.images.to(device);
        torch::Tensor main_out;
        {
            torch::NoGradGuard guard;
            main_out = model->main_block->forward(images);
        }
        const auto refined = model->adaptation_block->forward(torch::cat({images, main_out}, 1));
        const auto terms = real_loss(refined, b.depth.to(device), b.valid.to(device));
        terms.objective.backward();
        optimizer.step();
        ++steps_done;
        return terms.report(b.images.size(0));
    };
    auto on_epoch = [&](int epoch, const std::vector<EpochRecord>& records) {
        json h = prior_history;
        h.push_back(stage_entry("stage2", to_json(config), manifest, steps_done, epoch + 1, records));
        save_epoch(config.checkpoint_dir, "stage2", epoch, model, manifest.normalization, h);
    };
    TrainResult result = run_epochs("stage2", config.epochs, config.batch_size, config.seed, config.max_steps, loader,
                                    config.history_path, on_step, step_fn, on_epoch);
    for (auto& p : model->main_block->parameters()) p.set_requires_grad(true);
    model->eval();
    result.main_hash_before = before;
    result.main_hash_after = model::module_hash(*model->main_block);
    result.warnings = warnings;
    result.history = prior_history;
    auto entry = stage_entry("stage2", to_json(config), manifest, steps_done, static_cast<int>(result.epochs.size()),
                             result.epochs);
    entry["main_hash"] = result.main_hash_after;
    result.history.push_back(entry);
    return result;
}

LossReport evaluate_synthetic(model::DeepSfTModel& model, FrameLoader& loader, int batch_size) {
    torch::NoGradGuard guard;
    const bool was_training = model->is_training();
    model->eval();
    const auto device = model->parameters().front().device();
    LossReport acc;
    for (std::size_t start = 0; start < loader.size(); start += batch_size) {
        std::vector<std::size_t> pos;
        for (std::size_t i = start; i < std::min(loader.size(), start + batch_size); ++i) pos.push_back(i);
        const auto b = loader.batch(pos);
        const auto out = model->forward(b.images.to(device));
        accumulate(acc, synthetic_loss(out, b.depth.to(device), b.warp.to(device), false).report(pos.size()));
    }
    model->train(was_training);
    return finish(acc);
}

}  // namespace deepsft::training
