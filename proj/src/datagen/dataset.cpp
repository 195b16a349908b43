#include "deepsft/datagen/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "deepsft/error.hpp"
#include "deepsft/io/json_io.hpp"
#include "deepsft/io/raster_io.hpp"
#include "deepsft/io/template_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace deepsft::datagen {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SceneConfig, max_tilt_deg, lateral_fraction, min_lights, max_lights,
                                                min_intensity, max_intensity, max_specular, min_shininess,
                                                max_shininess, min_ambient, max_ambient, blur_sigma)

std::string to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "train";
}

Split split_from_string(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    throw ConfigError("unknown split '" + name + "'");
}

void DatasetConfig::validate() const {
    if (frames < 0) throw ConfigError("frames must be non-negative");
    if (steps_per_frame <= 0 || sequence_length <= 0) {
        throw ConfigError("steps_per_frame and sequence_length must be positive");
    }
    if (val_fraction < 0 || test_fraction < 0 || val_fraction + test_fraction > 1) {
        throw ConfigError("invalid split fractions");
    }
    if (scene.min_lights < 0 || scene.max_lights < scene.min_lights) {
        throw ConfigError("invalid light count range");
    }
    range.validate();
    camera.validate();
}

json to_json(const DatasetConfig& c) {
    json cloth = {{"dt", c.cloth.dt},
                  {"solver_iterations", c.cloth.solver_iterations},
                  {"stiffness", c.cloth.stiffness},
                  {"bend_stiffness", c.cloth.bend_stiffness},
                  {"damping", c.cloth.damping},
                  {"gravity", {c.cloth.gravity.x(), c.cloth.gravity.y(), c.cloth.gravity.z()}},
                  {"pinned", c.cloth.pinned},
                  {"epsilon", c.cloth.epsilon}};
    json forces = {{"enabled", c.forces.enabled},
                   {"magnitude", c.forces.magnitude},
                   {"change_every", c.forces.change_every},
                   {"pairs", c.forces.pairs}};
    return {{"frames", c.frames},
            {"seed", c.seed},
            {"range", c.range},
            {"camera", c.camera},
            {"scene", c.scene},
            {"cloth", cloth},
            {"forces", forces},
            {"steps_per_frame", c.steps_per_frame},
            {"sequence_length", c.sequence_length},
            {"background_dir", c.background_dir},
            {"val_fraction", c.val_fraction},
            {"test_fraction", c.test_fraction}};
}

DatasetConfig dataset_config_from_json(const json& j) {
    DatasetConfig c;
    try {
        c.frames = j.value("frames", c.frames);
        c.seed = j.value("seed", c.seed);
        if (j.contains("range")) c.range = j.at("range").get<geometry::NormalizationSpec>();
        if (j.contains("camera")) c.camera = j.at("camera").get<geometry::PerspectiveCamera>();
        if (j.contains("scene")) c.scene = j.at("scene").get<SceneConfig>();
        if (j.contains("cloth")) {
            const auto& k = j.at("cloth");
            c.cloth.dt = k.value("dt", c.cloth.dt);
            c.cloth.solver_iterations = k.value("solver_iterations", c.cloth.solver_iterations);
            c.cloth.stiffness = k.value("stiffness", c.cloth.stiffness);
            c.cloth.bend_stiffness = k.value("bend_stiffness", c.cloth.bend_stiffness);
            c.cloth.damping = k.value("damping", c.cloth.damping);
            if (k.contains("gravity")) {
                const auto g = k.at("gravity").get<std::vector<double>>();
                if (g.size() != 3) throw ConfigError("cloth.gravity needs three components");
                c.cloth.gravity = {g[0], g[1], g[2]};
            }
            c.cloth.pinned = k.value("pinned", c.cloth.pinned);
            c.cloth.epsilon = k.value("epsilon", c.cloth.epsilon);
        }
        if (j.contains("forces")) {
            const auto& f = j.at("forces");
            c.forces.enabled = f.value("enabled", c.forces.enabled);
            c.forces.magnitude = f.value("magnitude", c.forces.magnitude);
            c.forces.change_every = f.value("change_every", c.forces.change_every);
            c.forces.pairs = f.value("pairs", c.forces.pairs);
        }
        c.steps_per_frame = j.value("steps_per_frame", c.steps_per_frame);
        c.sequence_length = j.value("sequence_length", c.sequence_length);
        c.background_dir = j.value("background_dir", c.background_dir);
        c.val_fraction = j.value("val_fraction", c.val_fraction);
        c.test_fraction = j.value("test_fraction", c.test_fraction);
        c.jobs = j.value("jobs", c.jobs);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("dataset config: ") + e.what());
    }
    return c;
}

// ---------------------------------------------------------------------------
// manifest

bool DatasetManifest::has_warp() const {
    return !frames.empty() && std::all_of(frames.begin(), frames.end(), [](const FrameEntry& f) { return !f.warp.empty(); });
}

std::vector<std::size_t> DatasetManifest::indices(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (frames[i].split == split) out.push_back(i);
    }
    return out;
}

void DatasetManifest::validate() const {
    normalization.validate();
    camera.validate();
    std::set<std::string> ids;
    const bool warp = !frames.empty() && !frames.front().warp.empty();
    for (const auto& f : frames) {
        if (!ids.insert(f.id).second) {
            throw ConfigError("duplicate frame id " + f.id);
        }
        if (f.warp.empty() == warp) {
            throw ConfigError("frame " + f.id + ": warp ground truth present on some frames only");
        }
        for (const auto* rel : {&f.rgb, &f.depth, &f.warp}) {
            if (!rel->empty() && !fs::exists(root / *rel)) {
                throw IoError("missing dataset file " + (root / *rel).string());
            }
        }
    }
    if (!template_dir.empty() && !fs::exists(root / template_dir / "template.json")) {
        throw IoError("missing dataset template in " + (root / template_dir).string());
    }
}

json DatasetManifest::to_json() const {
    json fr = json::array();
    for (const auto& f : frames) {
        json e = {{"id", f.id},          {"rgb", f.rgb},
                  {"depth", f.depth},    {"split", to_string(f.split)},
                  {"provenance", f.provenance}, {"foreground", f.foreground}};
        if (!f.warp.empty()) e["warp"] = f.warp;
        if (!f.warnings.empty()) e["warnings"] = f.warnings;
        fr.push_back(std::move(e));
    }
    return {{"format_version", kFormatVersion},
            {"source", source},
            {"sequence", sequence},
            {"template", template_dir},
            {"template_name", template_name},
            {"normalization", normalization},
            {"camera", camera},
            {"seed", seed},
            {"config_hash", config_hash},
            {"config", config},
            {"frames", fr}};
}

DatasetManifest DatasetManifest::from_json(const json& j) {
    DatasetManifest m;
    try {
        const int version = j.at("format_version").get<int>();
        if (version != kFormatVersion) {
            throw ConfigError("unsupported manifest format version " + std::to_string(version));
        }
        m.source = j.at("source").get<std::string>();
        m.sequence = j.value("sequence", std::string("independent"));
        m.template_dir = j.value("template", std::string());
        m.template_name = j.value("template_name", std::string());
        m.normalization = j.at("normalization").get<geometry::NormalizationSpec>();
        m.camera = j.at("camera").get<geometry::PerspectiveCamera>();
        m.seed = j.value("seed", std::uint64_t{0});
        m.config_hash = j.value("config_hash", std::string());
        m.config = j.value("config", json::object());
        for (const auto& e : j.at("frames")) {
            FrameEntry f;
            f.id = e.at("id").get<std::string>();
            f.rgb = e.at("rgb").get<std::string>();
            f.depth = e.at("depth").get<std::string>();
            f.warp = e.value("warp", std::string());
            f.split = split_from_string(e.value("split", std::string("train")));
            f.provenance = e.value("provenance", std::string());
            f.foreground = e.value("foreground", std::size_t{0});
            f.warnings = e.value("warnings", std::vector<std::string>{});
            m.frames.push_back(std::move(f));
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

void DatasetManifest::save() const { io::write_json(root / "manifest.json", to_json()); }

DatasetManifest DatasetManifest::load(const fs::path& dataset_dir) {
    const fs::path file = fs::is_directory(dataset_dir) ? dataset_dir / "manifest.json" : dataset_dir;
    DatasetManifest m = from_json(io::read_json(file));
    m.root = file.parent_path();
    m.validate();
    return m;
}

LoadedFrame load_frame(const DatasetManifest& manifest, std::size_t index) {
    if (index >= manifest.frames.size()) {
        throw RangeError("frame index out of range");
    }
    const auto& f = manifest.frames[index];
    LoadedFrame out;
    out.rgb = io::read_rgb(manifest.root / f.rgb);
    out.depth = io::read_depth(manifest.root / f.depth);
    if (!f.warp.empty()) {
        out.warp = io::read_warp(manifest.root / f.warp);
    }
    return out;
}

geometry::Template load_dataset_template(const DatasetManifest& manifest) {
    if (manifest.template_dir.empty()) {
        throw ConfigError("dataset has no template");
    }
    return io::load_template(manifest.root / manifest.template_dir);
}

std::vector<Split> contiguous_splits(std::size_t count, double val_fraction, double test_fraction) {
    const auto n_test = static_cast<std::size_t>(std::llround(count * test_fraction));
    const auto n_val = std::min(count - n_test, static_cast<std::size_t>(std::llround(count * val_fraction)));
    std::vector<Split> out(count, Split::train);
    for (std::size_t i = count - n_test - n_val; i < count - n_test; ++i) out[i] = Split::val;
    for (std::size_t i = count - n_test; i < count; ++i) out[i] = Split::test;
    return out;
}

std::uint64_t frame_seed(std::uint64_t seed, std::uint64_t index) {
    // splitmix64 finalizer over the combined key
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {

template <class Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
    const std::size_t workers = std::clamp<std::size_t>(jobs <= 0 ? std::thread::hardware_concurrency() : jobs, 1,
                                                        std::max<std::size_t>(count, 1));
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = count;
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    if (error) std::rethrow_exception(error);
}

std::vector<Image> load_backgrounds(const std::string& dir) {
    std::vector<Image> out;
    if (dir.empty()) return out;
    if (!fs::is_directory(dir)) {
        throw IoError("background directory " + dir + " does not exist");
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        auto ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
        if (e.is_regular_file() && (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp")) {
            files.push_back(e.path());
        }
    }
    if (files.empty()) {
        throw ConfigError("background directory " + dir + " contains no images");
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out.push_back(io::read_rgb(f));
    return out;
}

std::string frame_id(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%06zu", i);
    return buf;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw IoError("cannot create directory " + dir.string());
    }
    const fs::path probe = dir / ".write_probe";
    {
        std::ofstream out(probe);
        if (!out) throw IoError("output directory " + dir.string() + " is not writable");
    }
    fs::remove(probe, ec);
}

std::vector<DeformationSample> sample_deformations(const geometry::Template& tmpl, const DatasetConfig& config) {
    const auto n = static_cast<std::size_t>(config.frames);
    std::vector<DeformationSample> out(n);
    if (tmpl.kind == geometry::TemplateKind::thin_shell) {
        const std::size_t len = config.sequence_length;
        const std::size_t sequences = (n + len - 1) / len;
        parallel_for(sequences, config.jobs, [&](std::size_t s) {
            RandomForceConfig forces = config.forces;
            forces.seed = frame_seed(config.seed ^ 0x5e95e9ULL, s);
            const std::size_t first = s * len;
            const std::size_t count = std::min(len, n - first);
            const auto steps = simulate_cloth(tmpl, forces, static_cast<int>(count) * config.steps_per_frame, config.cloth);
            for (std::size_t k = 0; k < count; ++k) {
                out[first + k] = steps[(k + 1) * config.steps_per_frame - 1];
            }
        });
    } else {
        if (!tmpl.rig) {
            throw ConfigError("volumetric template '" + tmpl.name + "' has no rig to sample deformations from");
        }
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = sample_rig_pose(tmpl, frame_seed(config.seed ^ 0x2196ULL, i));
        }
    }
    return out;
}

}  // namespace

DatasetManifest generate_dataset(const geometry::Template& tmpl, const DatasetConfig& config, const fs::path& out_dir) {
    config.validate();
    tmpl.validate(64);
    const auto backgrounds = load_backgrounds(config.background_dir);
    ensure_dir(out_dir / "frames");
    io::save_template(out_dir / "template", tmpl);

    const auto deformations = sample_deformations(tmpl, config);
    const auto splits = contiguous_splits(deformations.size(), config.val_fraction, config.test_fraction);

    DatasetManifest manifest;
    manifest.source = "synthetic";
    manifest.sequence = tmpl.kind == geometry::TemplateKind::thin_shell ? "continuous" : "independent";
    manifest.template_dir = "template";
    manifest.template_name = tmpl.name;
    manifest.normalization = config.range;
    manifest.camera = config.camera;
    manifest.seed = config.seed;
    manifest.config = to_json(config);
    manifest.config_hash = io::fnv1a_hex(manifest.config.dump());
    manifest.root = out_dir;
    manifest.frames.resize(deformations.size());

    parallel_for(deformations.size(), config.jobs, [&](std::size_t i) {
        std::mt19937_64 rng(frame_seed(config.seed, i));
        auto scene = std::make_shared<const SceneSample>(
            sample_scene(tmpl, deformations[i], config.camera, config.range, config.scene, backgrounds, rng));
        const FrameRecord frame = rasterize_frame(scene, tmpl, config.camera);
        FrameEntry& e = manifest.frames[i];
        e.id = frame_id(i);
        e.rgb = "frames/" + e.id + ".rgb.png";
        e.depth = "frames/" + e.id + ".depth.tiff";
        e.warp = "frames/" + e.id + ".warp.tiff";
        e.split = splits[i];
        e.provenance = to_string(deformations[i].provenance);
        e.foreground = frame.depth.foreground_count();
        e.warnings = frame.warnings;
        io::write_rgb(out_dir / e.rgb, frame.rgb);
        io::write_depth(out_dir / e.depth, frame.depth);
        io::write_warp(out_dir / e.warp, frame.warp);
    });
    manifest.save();
    return manifest;
}

// ---------------------------------------------------------------------------
// RGB-D exchange

void export_rgbd(const DatasetManifest& manifest, const fs::path& out_dir, const RgbdExportOptions& options) {
    if (options.depth_unit != "mm" && options.depth_unit != "m") {
        throw ConfigError("depth unit must be mm or m");
    }
    if (options.depth_format != "png" && options.depth_format != "tiff") {
        throw ConfigError("depth format must be png or tiff");
    }
    if (options.depth_format == "png" && options.depth_unit == "m") {
        throw ConfigError("16-bit PNG depth must be stored in mm");
    }
    ensure_dir(out_dir);
    json cam = manifest.camera;
    cam["depth_unit"] = options.depth_unit;
    io::write_json(out_dir / "camera.json", cam);
    const double scale = options.depth_unit == "m" ? 1e-3 : 1.0;
    for (std::size_t i = 0; i < manifest.frames.size(); ++i) {
        const auto& f = manifest.frames[i];
        const LoadedFrame frame = load_frame(manifest, i);
        io::write_rgb(out_dir / (f.id + ".rgb.png"), frame.rgb);
        const auto& d = frame.depth;
        if (options.depth_format == "png") {
            cv::Mat m(d.height(), d.width(), CV_16UC1);
            for (int y = 0; y < d.height(); ++y) {
                for (int x = 0; x < d.width(); ++x) {
                    m.at<std::uint16_t>(y, x) = cv::saturate_cast<std::uint16_t>(std::lround(d.value(y, x)));
                }
            }
            if (!cv::imwrite((out_dir / (f.id + ".depth.png")).string(), m)) {
                throw IoError("cannot write depth for frame " + f.id);
            }
        } else {
            Grid<float> g(d.height(), d.width());
            for (int y = 0; y < d.height(); ++y) {
                for (int x = 0; x < d.width(); ++x) g.at(y, x) = static_cast<float>(d.value(y, x) * scale);
            }
            io::write_float_raster(out_dir / (f.id + ".depth.tiff"), g);
        }
    }
}

namespace {

struct RgbdPair {
    fs::path rgb, depth;
};

std::map<std::string, RgbdPair> find_pairs(const fs::path& dir) {
    std::map<std::string, RgbdPair> pairs;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const std::string name = e.path().filename().string();
        for (const char* tag : {".rgb.", ".depth."}) {
            const auto pos = name.find(tag);
            if (pos == std::string::npos || pos == 0) continue;
            auto& p = pairs[name.substr(0, pos)];
            (std::string(tag) == ".rgb." ? p.rgb : p.depth) = e.path();
        }
    }
    for (const auto& [id, p] : pairs) {
        if (p.rgb.empty() || p.depth.empty()) {
            throw ConfigError("unpaired RGB-D frame '" + id + "' in " + dir.string());
        }
    }
    return pairs;
}

// raw sensor depth converted to mm; 0 for holes
cv::Mat read_sensor_depth(const fs::path& path, double to_mm) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (m.empty()) {
        throw IoError("cannot read depth image " + path.string());
    }
    if (m.channels() != 1 || (m.depth() != CV_16U && m.depth() != CV_32F)) {
        throw ConfigError("unknown depth encoding in " + path.string() + " (expected 16-bit or float single channel)");
    }
    cv::Mat out;
    m.convertTo(out, CV_64F, to_mm);
    return out;
}

}  // namespace

DatasetManifest ingest_rgbd(const fs::path& input_dir, const fs::path& out_dir, const IngestOptions& options) {
    if (!fs::is_directory(input_dir)) {
        throw IoError("input directory " + input_dir.string() + " does not exist");
    }
    options.range.validate();
    json cam_json = fs::exists(input_dir / "camera.json") ? io::read_json(input_dir / "camera.json") : json::object();
    geometry::PerspectiveCamera camera;
    if (options.camera) {
        camera = *options.camera;
    } else if (cam_json.contains("fu")) {
        camera = cam_json.get<geometry::PerspectiveCamera>();
    } else {
        throw ConfigError("no camera intrinsics: pass a camera or provide camera.json");
    }
    camera.validate();
    const std::string unit = options.depth_unit.value_or(cam_json.value("depth_unit", std::string("mm")));
    if (unit != "mm" && unit != "m") {
        throw ConfigError("unknown depth unit '" + unit + "'");
    }
    const double to_mm = unit == "m" ? 1000.0 : 1.0;

    const auto pairs = find_pairs(input_dir);
    ensure_dir(out_dir / "frames");
    const auto splits = contiguous_splits(pairs.size(), options.val_fraction, options.test_fraction);

    DatasetManifest manifest;
    manifest.source = "real";
    manifest.sequence = "real";
    manifest.normalization = options.range;
    manifest.camera = camera.resized(options.width, options.height);
    manifest.config = {{"input", input_dir.filename().string()}, {"depth_unit", unit}, {"source_camera", camera}};
    manifest.config_hash = io::fnv1a_hex(manifest.config.dump());
    manifest.root = out_dir;

    std::size_t k = 0;
    for (const auto& [id, p] : pairs) {
        FrameEntry e;
        e.id = id;
        e.rgb = "frames/" + id + ".rgb.png";
        e.depth = "frames/" + id + ".depth.tiff";
        e.split = splits[k++];
        e.provenance = "sensor";

        const Image rgb = io::read_rgb(p.rgb);
        if (rgb.width() != camera.width || rgb.height() != camera.height) {
            throw ConfigError("frame " + id + ": image size does not match the camera resolution");
        }
        cv::Mat src(rgb.height(), rgb.width(), CV_32FC3, const_cast<float*>(rgb.data()));
        cv::Mat dst;
        cv::resize(src, dst, cv::Size(options.width, options.height), 0, 0, cv::INTER_AREA);
        Image small(options.height, options.width, 3);
        std::copy(dst.ptr<float>(), dst.ptr<float>() + small.size(), small.data());
        io::write_rgb(out_dir / e.rgb, small);

        const cv::Mat depth = read_sensor_depth(p.depth, to_mm);
        if (depth.cols != camera.width || depth.rows != camera.height) {
            throw ConfigError("frame " + id + ": depth size does not match the camera resolution");
        }
        geometry::DepthMap d(options.height, options.width);
        std::size_t out_of_range = 0;
        const double sx = static_cast<double>(depth.cols) / options.width;
        const double sy = static_cast<double>(depth.rows) / options.height;
        for (int y = 0; y < options.height; ++y) {
            const int ys = std::min(depth.rows - 1, static_cast<int>((y + 0.5) * sy));
            for (int x = 0; x < options.width; ++x) {
                const int xs = std::min(depth.cols - 1, static_cast<int>((x + 0.5) * sx));
                const double z = depth.at<double>(ys, xs);
                if (!std::isfinite(z) || z <= 0.0) continue;
                if (z < options.range.z_min || z > options.range.z_max) {
                    ++out_of_range;
                    continue;
                }
                d.set(y, x, z);
            }
        }
        if (out_of_range > 0) {
            e.warnings.push_back(std::to_string(out_of_range) + " pixels outside the depth range masked");
        }
        e.foreground = d.foreground_count();
        if (e.foreground == 0) {
            e.warnings.push_back("no valid depth");
        }
        io::write_depth(out_dir / e.depth, d);
        manifest.frames.push_back(std::move(e));
    }
    manifest.save();
    return manifest;
}

}  // namespace deepsft::datagen
