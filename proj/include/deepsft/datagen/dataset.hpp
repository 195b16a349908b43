#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "deepsft/datagen/deformation.hpp"
#include "deepsft/datagen/render.hpp"
#include "deepsft/datagen/scene.hpp"
#include "deepsft/geometry/camera.hpp"
#include "deepsft/geometry/normalization.hpp"
#include "deepsft/geometry/template.hpp"

namespace deepsft::datagen {

enum class Split { train, val, test };

std::string to_string(Split split);
Split split_from_string(const std::string& name);

/// Synthetic generation settings. Everything except `jobs` enters the config hash.
struct DatasetConfig {
    int frames = 200;
    std::uint64_t seed = 0;
    geometry::NormalizationSpec range;
    geometry::PerspectiveCamera camera = geometry::default_training_camera();
    SceneConfig scene;
    ClothParams cloth;
    RandomForceConfig forces{.enabled = true};
    int steps_per_frame = 4;     // cloth steps between stored frames
    int sequence_length = 50;    // frames per continuous cloth sequence
    std::string background_dir;  // empty: procedural backgrounds
    double val_fraction = 0.1;
    double test_fraction = 0.1;
    int jobs = 1;

    void validate() const;
};

nlohmann::json to_json(const DatasetConfig& config);
DatasetConfig dataset_config_from_json(const nlohmann::json& j);

struct FrameEntry {
    std::string id;
    std::string rgb;    // paths relative to the dataset root
    std::string depth;
    std::string warp;   // empty for real data
    Split split = Split::train;
    std::string provenance;
    std::size_t foreground = 0;
    std::vector<std::string> warnings;
};

/// Index of a dataset directory: `manifest.json`, `template/`, `frames/`.
struct DatasetManifest {
    static constexpr int kFormatVersion = 1;

    std::string source = "synthetic";  // synthetic | real
    std::string sequence = "continuous";  // continuous | independent | real
    std::string template_dir;          // relative to root; empty when absent
    std::string template_name;
    geometry::NormalizationSpec normalization;
    geometry::PerspectiveCamera camera;
    std::uint64_t seed = 0;
    std::string config_hash;
    nlohmann::json config;
    std::vector<FrameEntry> frames;

    std::filesystem::path root;  // not serialized

    bool has_warp() const;
    std::vector<std::size_t> indices(Split split) const;

    /// Every listed file exists under root, ids are unique, warp presence is uniform.
    /// Throws ConfigError / IoError.
    void validate() const;

    nlohmann::json to_json() const;
    static DatasetManifest from_json(const nlohmann::json& j);

    void save() const;  // writes root / manifest.json
    static DatasetManifest load(const std::filesystem::path& dataset_dir);
};

struct LoadedFrame {
    Image rgb;
    geometry::DepthMap depth;
    std::optional<geometry::WarpField> warp;
};

LoadedFrame load_frame(const DatasetManifest& manifest, std::size_t index);

/// Template stored alongside the dataset. Throws ConfigError when the manifest has none.
geometry::Template load_dataset_template(const DatasetManifest& manifest);

/// Contiguous split labels: train, then val, then test at the end.
std::vector<Split> contiguous_splits(std::size_t count, double val_fraction, double test_fraction);

/// Independent per-frame seed derived from the master seed.
std::uint64_t frame_seed(std::uint64_t seed, std::uint64_t index);

/// Renders `config.frames` frames into out_dir. Cloth sequences for thin shells,
/// independent rig poses for volumetric templates. Output depends only on
/// (template, config); `jobs` only changes wall time.
DatasetManifest generate_dataset(const geometry::Template& tmpl, const DatasetConfig& config,
                                 const std::filesystem::path& out_dir);

struct RgbdExportOptions {
    std::string depth_unit = "mm";  // mm | m
    std::string depth_format = "png";  // png (16-bit) | tiff (32-bit float)
};

/// Writes `<id>.rgb.png`, `<id>.depth.*` and `camera.json` as a sensor would deliver them.
void export_rgbd(const DatasetManifest& manifest, const std::filesystem::path& out_dir,
                 const RgbdExportOptions& options = {});

struct IngestOptions {
    std::optional<geometry::PerspectiveCamera> camera;  // default: camera.json in the input directory
    std::optional<std::string> depth_unit;              // default: camera.json, else mm
    geometry::NormalizationSpec range;
    int width = 480;
    int height = 270;
    double val_fraction = 0.1;
    double test_fraction = 0.1;
};

/// Converts a directory of paired RGB + depth images into a depth-only dataset at
/// network resolution. Depth that is zero, non-finite or outside the configured
/// range becomes background.
DatasetManifest ingest_rgbd(const std::filesystem::path& input_dir, const std::filesystem::path& out_dir,
                            const IngestOptions& options = {});

}  // namespace deepsft::datagen
