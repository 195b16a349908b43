#include "deepsft/model/checkpoint.hpp"

#include "deepsft/error.hpp"
#include "deepsft/io/json_io.hpp"

namespace deepsft::model {

namespace {

constexpr const char* kMetaKey = "__deepsft_metadata__";

nlohmann::json metadata(const DeepSfTModel& model, const geometry::NormalizationSpec& spec,
                        const nlohmann::json& history) {
    return {{"format_version", Checkpoint::kFormatVersion},
            {"init", {{"scheme", model->init().scheme}, {"seed", model->init().seed}}},
            {"config", {{"channel_divisor", model->config().channel_divisor}}},
            {"normalization", spec},
            {"history", history}};
}

nlohmann::json read_metadata(torch::serialize::InputArchive& archive, const std::filesystem::path& path) {
    c10::IValue value;
    if (!archive.try_read(kMetaKey, value) || !value.isString()) {
        throw ConfigError(path.string() + " is not a deepsft checkpoint");
    }
    auto meta = nlohmann::json::parse(value.toStringRef());
    const int version = meta.value("format_version", 0);
    if (version != Checkpoint::kFormatVersion) {
        throw ConfigError("unsupported checkpoint format version " + std::to_string(version));
    }
    return meta;
}

torch::serialize::InputArchive open(const std::filesystem::path& path, torch::Device device) {
    if (!std::filesystem::exists(path)) {
        throw IoError("checkpoint " + path.string() + " does not exist");
    }
    torch::serialize::InputArchive archive;
    try {
        archive.load_from(path.string(), device);
    } catch (const c10::Error& e) {
        throw IoError("cannot read checkpoint " + path.string() + ": " + e.what_without_backtrace());
    }
    return archive;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, DeepSfTModel& model,
                     const geometry::NormalizationSpec& normalization, const nlohmann::json& history) {
    torch::serialize::OutputArchive archive;
    for (const auto& p : model->named_parameters()) archive.write(p.key(), p.value().detach().cpu());
    for (const auto& b : model->named_buffers()) archive.write(b.key(), b.value().cpu(), /*is_buffer=*/true);
    archive.write(kMetaKey, c10::IValue(metadata(model, normalization, history).dump()));
    try {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        archive.save_to(path.string());
    } catch (const std::exception& e) {
        throw IoError("cannot write checkpoint " + path.string() + ": " + e.what());
    }
}

nlohmann::json read_checkpoint_metadata(const std::filesystem::path& path) {
    auto archive = open(path, torch::kCPU);
    return read_metadata(archive, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path, torch::Device device) {
    auto archive = open(path, torch::kCPU);
    const auto meta = read_metadata(archive, path);
    WeightInitSpec init{meta.at("init").at("scheme").get<std::string>(), meta.at("init").at("seed").get<std::uint64_t>()};
    ModelConfig config{meta.at("config").at("channel_divisor").get<int>()};

    Checkpoint ck;
    ck.model = build_model(init, config);
    ck.normalization = meta.at("normalization").get<geometry::NormalizationSpec>();
    ck.history = meta.value("history", nlohmann::json::array());
    torch::NoGradGuard guard;
    auto restore = [&](const std::string& key, torch::Tensor& dst) {
        torch::Tensor src;
        if (!archive.try_read(key, src)) {
            throw ConfigError("checkpoint " + path.string() + " lacks tensor " + key);
        }
        if (!src.sizes().equals(dst.sizes())) {
            throw ConfigError("checkpoint tensor " + key + " has an unexpected shape");
        }
        dst.copy_(src);
    };
    for (auto& p : ck.model->named_parameters()) restore(p.key(), p.value());
    for (auto& b : ck.model->named_buffers()) restore(b.key(), b.value());
    ck.model->to(device);
    return ck;
}

}  // namespace deepsft::model
