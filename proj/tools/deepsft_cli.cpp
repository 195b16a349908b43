// deepsft command-line entry point.
//
// Exit status: 0 success, 1 runtime failure, 2 usage error.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "deepsft/datagen/dataset.hpp"
#include "deepsft/error.hpp"
#include "deepsft/eval/benchmark.hpp"
#include "deepsft/eval/metrics.hpp"
#include "deepsft/geometry/builtin_templates.hpp"
#include "deepsft/inference/adaptation.hpp"
#include "deepsft/inference/reconstruct.hpp"
#include "deepsft/io/json_io.hpp"
#include "deepsft/io/raster_io.hpp"
#include "deepsft/io/template_io.hpp"
#include "deepsft/model/checkpoint.hpp"
#include "deepsft/training/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace deepsft;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_exists(const std::string& path, const char* what) {
    if (path.empty() || !fs::exists(path)) {
        throw UsageError(std::string(what) + " '" + path + "' does not exist");
    }
}

torch::Device pick_device(const std::string& flag) {
    if (!flag.empty()) return torch::Device(flag);
    return model::default_device();
}

Image load_image_any(const fs::path& path) { return io::read_rgb(path); }

// ---------------------------------------------------------------------------
// figures

cv::Mat to_bgr8(const Image& rgb) {
    cv::Mat m(rgb.height(), rgb.width(), CV_8UC3);
    for (int y = 0; y < rgb.height(); ++y)
        for (int x = 0; x < rgb.width(); ++x)
            for (int c = 0; c < 3; ++c)
                m.at<cv::Vec3b>(y, x)[2 - c] = cv::saturate_cast<unsigned char>(rgb.at(y, x, c) * 255.0f + 0.5f);
    return m;
}

cv::Mat colorize(const Grid<float>& values, int channel, const Mask& mask, double lo, double hi) {
    cv::Mat gray(values.height(), values.width(), CV_8UC1);
    for (int y = 0; y < values.height(); ++y)
        for (int x = 0; x < values.width(); ++x)
            gray.at<unsigned char>(y, x) =
                cv::saturate_cast<unsigned char>(255.0 * (values.at(y, x, channel) - lo) / (hi - lo));
    cv::Mat color;
    cv::applyColorMap(gray, color, cv::COLORMAP_JET);
    for (int y = 0; y < values.height(); ++y)
        for (int x = 0; x < values.width(); ++x)
            if (!mask.at(y, x)) color.at<cv::Vec3b>(y, x) = cv::Vec3b(0, 0, 0);
    return color;
}

void write_panel(const fs::path& path, const Image& input, const inference::ReconstructionResult& r,
                 const geometry::NormalizationSpec& spec) {
    cv::Mat panel;
    cv::hconcat(std::vector<cv::Mat>{to_bgr8(input), colorize(r.depth.values(), 0, r.segmentation, spec.z_min, spec.z_max),
                                     colorize(r.warp.values(), 0, r.segmentation, 0.0, 1.0),
                                     colorize(r.warp.values(), 1, r.segmentation, 0.0, 1.0)},
                panel);
    if (!cv::imwrite(path.string(), panel)) throw IoError("cannot write " + path.string());
}

void write_prediction(const fs::path& out, const std::string& id, const Image& input,
                      const inference::ReconstructionResult& r, const geometry::NormalizationSpec& spec, bool figures) {
    io::write_depth(out / (id + ".depth.tiff"), r.depth);
    io::write_warp(out / (id + ".warp.tiff"), r.warp);
    io::write_mask(out / (id + ".mask.png"), r.segmentation);
    std::vector<Eigen::Vector3f> colors;
    for (const auto& [row, col] : r.pixels) {
        colors.emplace_back(input.at(row, col, 0), input.at(row, col, 1), input.at(row, col, 2));
    }
    io::write_ply(out / (id + ".ply"), r.points, colors);
    if (figures) write_panel(out / (id + ".panel.png"), input, r, spec);
}

// ---------------------------------------------------------------------------
// subcommands

struct MakeTemplateArgs {
    std::string kind = "sheet";
    std::string out;
    std::uint64_t texture_seed = 7;
};

int run_make_template(const MakeTemplateArgs& a) {
    geometry::Template t;
    if (a.kind == "sheet") {
        geometry::SheetParams p;
        p.texture_seed = a.texture_seed;
        t = geometry::make_sheet_template(p);
    } else if (a.kind == "tube") {
        geometry::TubeParams p;
        p.texture_seed = a.texture_seed;
        t = geometry::make_tube_template(p);
    } else {
        throw UsageError("--kind must be sheet or tube");
    }
    io::save_template(a.out, t);
    std::cout << "template '" << t.name << "' (" << geometry::to_string(t.kind) << ", " << t.vertices.size()
              << " vertices, " << t.faces.size() << " faces) written to " << a.out << '\n';
    return 0;
}

struct GenDataArgs {
    std::string template_dir, out, config, backgrounds;
    std::optional<int> frames;
    std::optional<std::uint64_t> seed;
    std::optional<double> z_min, z_max, blur;
    int jobs = 1;
};

int run_gen_data(const GenDataArgs& a) {
    require_exists(a.template_dir, "template directory");
    datagen::DatasetConfig c;
    if (!a.config.empty()) {
        require_exists(a.config, "config file");
        c = datagen::dataset_config_from_json(io::read_json(a.config));
    }
    if (a.frames) c.frames = *a.frames;
    if (a.seed) c.seed = *a.seed;
    if (a.z_min) c.range.z_min = *a.z_min;
    if (a.z_max) c.range.z_max = *a.z_max;
    if (a.blur) c.scene.blur_sigma = *a.blur;
    if (!a.backgrounds.empty()) {
        require_exists(a.backgrounds, "background directory");
        c.background_dir = a.backgrounds;
    }
    c.jobs = a.jobs;
    const auto tmpl = io::load_template(a.template_dir);
    const auto m = datagen::generate_dataset(tmpl, c, a.out);
    std::size_t warned = 0;
    for (const auto& f : m.frames) warned += !f.warnings.empty();
    std::cout << "generated " << m.frames.size() << " frames (train " << m.indices(datagen::Split::train).size()
              << ", val " << m.indices(datagen::Split::val).size() << ", test "
              << m.indices(datagen::Split::test).size() << ") seed " << m.seed << " config " << m.config_hash
              << " into " << a.out << '\n';
    if (warned) std::cout << warned << " frames carry warnings (see manifest)\n";
    return 0;
}

struct ExportArgs {
    std::string dataset, out, depth_unit = "mm", depth_format = "png";
};

int run_export(const ExportArgs& a) {
    require_exists(a.dataset, "dataset");
    const auto m = datagen::DatasetManifest::load(a.dataset);
    datagen::export_rgbd(m, a.out, {a.depth_unit, a.depth_format});
    std::cout << "exported " << m.frames.size() << " RGB-D frames to " << a.out << '\n';
    return 0;
}

struct IngestArgs {
    std::string input, out, camera, depth_unit;
    std::optional<double> z_min, z_max;
    double val_fraction = 0.1, test_fraction = 0.1;
};

int run_ingest(const IngestArgs& a) {
    require_exists(a.input, "input directory");
    datagen::IngestOptions o;
    if (!a.camera.empty()) {
        require_exists(a.camera, "camera file");
        o.camera = io::read_camera(a.camera);
    }
    if (!a.depth_unit.empty()) o.depth_unit = a.depth_unit;
    if (a.z_min) o.range.z_min = *a.z_min;
    if (a.z_max) o.range.z_max = *a.z_max;
    o.val_fraction = a.val_fraction;
    o.test_fraction = a.test_fraction;
    const auto m = datagen::ingest_rgbd(a.input, a.out, o);
    std::size_t warned = 0;
    for (const auto& f : m.frames) warned += !f.warnings.empty();
    std::cout << "ingested " << m.frames.size() << " frames into " << a.out << " (" << warned
              << " with warnings)\n";
    return 0;
}

void print_step(const training::StepRecord& r, std::int64_t every) {
    if (every > 0 && r.step % every == 0) {
        std::cout << r.stage << " step " << r.step << " epoch " << r.epoch + 1 << " L1 " << r.loss.l1 << " L2 "
                  << r.loss.l2 << " total " << r.loss.total << '\n';
    }
}

struct TrainArgs {
    std::string dataset, out, init, config, history, checkpoint_dir, device;
    std::optional<int> epochs, batch_size;
    std::optional<double> lr;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> max_steps;
    int channel_divisor = 1;
    bool no_first_depth = false;
    bool include_val = false;
    std::int64_t log_every = 10;
};

int run_train(const TrainArgs& a) {
    require_exists(a.dataset, "dataset");
    if (!a.init.empty()) require_exists(a.init, "initial checkpoint");
    training::Stage1Config c;
    if (!a.config.empty()) {
        require_exists(a.config, "config file");
        c = training::stage1_config_from_json(io::read_json(a.config));
    }
    if (a.epochs) c.epochs = *a.epochs;
    if (a.batch_size) c.batch_size = *a.batch_size;
    if (a.lr) c.learning_rate = *a.lr;
    if (a.seed) c.seed = *a.seed;
    if (a.max_steps) c.max_steps = *a.max_steps;
    if (a.no_first_depth) c.supervise_first_depth = false;
    if (a.include_val) c.include_val = true;
    if (!a.history.empty()) c.history_path = a.history;
    if (!a.checkpoint_dir.empty()) c.checkpoint_dir = a.checkpoint_dir;
    c.validate();

    const auto manifest = datagen::DatasetManifest::load(a.dataset);
    const auto device = pick_device(a.device);
    model::DeepSfTModel net{nullptr};
    json history = json::array();
    if (!a.init.empty()) {
        auto ck = model::load_checkpoint(a.init, device);
        if (!(ck.normalization == manifest.normalization)) {
            throw ConfigError("checkpoint normalization does not match the dataset");
        }
        net = ck.model;
        history = ck.history;
    } else {
        net = model::build_model({"glorot_uniform", c.seed}, {a.channel_divisor});
        net->to(device);
    }
    std::cout << "stage 1: adam lr " << c.learning_rate << " betas (" << c.beta1 << ", " << c.beta2 << ") epochs "
              << c.epochs << " batch " << c.batch_size << " seed " << c.seed << '\n';
    const auto r = training::train_stage1(net, manifest, c, history,
                                          [&](const training::StepRecord& s) { print_step(s, a.log_every); });
    for (const auto& e : r.epochs) {
        std::cout << "epoch " << e.epoch + 1 << " mean L_s " << e.mean.total << '\n';
    }
    model::save_checkpoint(a.out, net, manifest.normalization, r.history);
    std::cout << "checkpoint written to " << a.out << '\n';
    return 0;
}

struct FinetuneArgs {
    std::string dataset, checkpoint, out, config, history, checkpoint_dir, device;
    std::optional<int> epochs, batch_size;
    std::optional<double> lr;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> max_steps;
    bool include_val = false;
    bool batch_statistics = false;
    std::int64_t log_every = 10;
};

int run_finetune(const FinetuneArgs& a) {
    require_exists(a.dataset, "dataset");
    require_exists(a.checkpoint, "checkpoint");
    training::Stage2Config c;
    if (!a.config.empty()) {
        require_exists(a.config, "config file");
        c = training::stage2_config_from_json(io::read_json(a.config));
    }
    if (a.epochs) c.epochs = *a.epochs;
    if (a.batch_size) c.batch_size = *a.batch_size;
    if (a.lr) c.learning_rate = *a.lr;
    if (a.seed) c.seed = *a.seed;
    if (a.max_steps) c.max_steps = *a.max_steps;
    if (a.include_val) c.include_val = true;
    if (a.batch_statistics) c.freeze_adaptation_statistics = false;
    if (!a.history.empty()) c.history_path = a.history;
    if (!a.checkpoint_dir.empty()) c.checkpoint_dir = a.checkpoint_dir;
    c.validate();

    const auto manifest = datagen::DatasetManifest::load(a.dataset);
    auto ck = model::load_checkpoint(a.checkpoint, pick_device(a.device));
    if (!(ck.normalization == manifest.normalization)) {
        throw ConfigError("checkpoint normalization does not match the dataset");
    }
    std::cout << "stage 2: sgd lr " << c.learning_rate << " epochs " << c.epochs << " batch " << c.batch_size
              << " seed " << c.seed << '\n';
    const auto r = training::finetune_stage2(ck.model, manifest, c, ck.history,
                                             [&](const training::StepRecord& s) { print_step(s, a.log_every); });
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
    for (const auto& e : r.epochs) std::cout << "epoch " << e.epoch + 1 << " mean L_r " << e.mean.total << '\n';
    std::cout << "main-block hash before " << r.main_hash_before << " after " << r.main_hash_after << ' '
              << (r.main_hash_before == r.main_hash_after ? "unchanged" : "CHANGED") << '\n';
    model::save_checkpoint(a.out, ck.model, ck.normalization, r.history);
    std::cout << "checkpoint written to " << a.out << '\n';
    return r.main_hash_before == r.main_hash_after ? 0 : 1;
}

struct InferArgs {
    std::string checkpoint, dataset, split = "test", image, camera, out, device;
    bool figures = false;
};

int run_infer(const InferArgs& a) {
    require_exists(a.checkpoint, "checkpoint");
    if (a.dataset.empty() == a.image.empty()) throw UsageError("pass exactly one of --dataset or --image");
    if (!a.dataset.empty()) require_exists(a.dataset, "dataset");
    if (!a.image.empty()) {
        require_exists(a.image, "image");
        require_exists(a.camera, "camera file");
    }
    auto ck = model::load_checkpoint(a.checkpoint, pick_device(a.device));
    fs::create_directories(a.out);
    json index = {{"checkpoint", fs::path(a.checkpoint).filename().string()},
                  {"checkpoint_hash", model::module_hash(*ck.model)},
                  {"normalization", ck.normalization}};
    json frames = json::array();
    if (!a.image.empty()) {
        const auto camera = io::read_camera(a.camera);
        const Image img = load_image_any(a.image);
        const auto r = inference::infer(ck.model, img, ck.normalization, camera);
        const std::string id = fs::path(a.image).stem().stem().string();
        write_prediction(a.out, id, img, r, ck.normalization, a.figures);
        frames.push_back({{"id", id}, {"points", r.points.size()}});
    } else {
        const auto m = datagen::DatasetManifest::load(a.dataset);
        if (!(m.normalization == ck.normalization)) {
            throw ConfigError("checkpoint normalization does not match the dataset");
        }
        index["dataset"] = fs::path(a.dataset).filename().string();
        index["dataset_hash"] = m.config_hash;
        index["seed"] = m.seed;
        index["split"] = a.split;
        for (auto i : m.indices(datagen::split_from_string(a.split))) {
            const auto f = datagen::load_frame(m, i);
            const auto r = inference::infer(ck.model, f.rgb, m.normalization, m.camera);
            write_prediction(a.out, m.frames[i].id, f.rgb, r, m.normalization, a.figures);
            frames.push_back({{"id", m.frames[i].id}, {"points", r.points.size()}});
        }
    }
    index["frames"] = frames;
    io::write_json(fs::path(a.out) / "predictions.json", index);
    std::cout << "wrote predictions for " << frames.size() << " frames to " << a.out << '\n';
    return 0;
}

struct EvalArgs {
    std::string dataset, predictions, split = "test", out, table, name = "deepsft";
    double atlas_to_px = 0.0;
};

int run_eval(const EvalArgs& a) {
    require_exists(a.dataset, "dataset");
    require_exists(a.predictions, "predictions directory");
    const auto m = datagen::DatasetManifest::load(a.dataset);
    double scale = a.atlas_to_px;
    if (scale <= 0.0 && m.has_warp()) scale = datagen::load_dataset_template(m).texture.width();
    std::vector<eval::FrameMetrics> frames;
    const fs::path pred_dir = a.predictions;
    for (auto i : m.indices(datagen::split_from_string(a.split))) {
        const auto& id = m.frames[i].id;
        const auto gt = datagen::load_frame(m, i);
        const auto depth = io::read_depth(pred_dir / (id + ".depth.tiff"));
        const fs::path mask_path = pred_dir / (id + ".mask.png");
        const Mask mask = fs::exists(mask_path) ? io::read_mask(mask_path) : depth.mask();
        std::optional<geometry::WarpField> warp;
        if (gt.warp && fs::exists(pred_dir / (id + ".warp.tiff"))) warp = io::read_warp(pred_dir / (id + ".warp.tiff"));
        frames.push_back(eval::evaluate_frame(id, depth, mask, warp ? &*warp : nullptr, gt.depth,
                                              gt.warp ? &*gt.warp : nullptr, scale));
    }
    const auto report = eval::MetricReport::aggregate(std::move(frames));
    json j = report.to_json();
    j["dataset_hash"] = m.config_hash;
    j["seed"] = m.seed;
    j["split"] = a.split;
    j["atlas_to_px"] = scale;
    if (!a.out.empty()) io::write_json(a.out, j);
    const std::string table = eval::render_comparison_table({{a.name, report}});
    if (!a.table.empty()) {
        std::ofstream(a.table) << table;
    }
    std::cout << table;
    return 0;
}

struct AdaptArgs {
    std::string input, out, source_camera, new_camera;
    int width = 480, height = 270;
};

int run_adapt(const AdaptArgs& a) {
    require_exists(a.input, "input");
    require_exists(a.source_camera, "source camera file");
    require_exists(a.new_camera, "new camera file");
    const auto params =
        inference::compute_adaptation(io::read_camera(a.source_camera), io::read_camera(a.new_camera), a.width, a.height);
    fs::create_directories(a.out);
    std::vector<fs::path> files;
    if (fs::is_directory(a.input)) {
        for (const auto& e : fs::directory_iterator(a.input)) {
            const auto ext = e.path().extension().string();
            if (e.is_regular_file() && (ext == ".png" || ext == ".jpg" || ext == ".jpeg")) files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
    } else {
        files.push_back(a.input);
    }
    for (const auto& f : files) {
        const Image img = io::read_rgb(f);
        io::write_rgb(fs::path(a.out) / (f.stem().string() + ".png"), inference::adapt_image(img, params));
    }
    json j = params.source;
    io::write_json(fs::path(a.out) / "camera.json", j);
    std::cout << "A = diag(" << params.A(0, 0) << ", " << params.A(1, 1) << ") t = (" << params.t.x() << ", "
              << params.t.y() << "); adapted " << files.size() << " images into " << a.out << '\n';
    return 0;
}

struct BenchArgs {
    std::string checkpoint, dataset, out, device;
    int frames = 10, warmup = 2, batch_size = 1, channel_divisor = 1;
    std::uint64_t seed = 0;
};

int run_bench(const BenchArgs& a) {
    model::DeepSfTModel net{nullptr};
    const auto device = pick_device(a.device);
    if (!a.checkpoint.empty()) {
        require_exists(a.checkpoint, "checkpoint");
        net = model::load_checkpoint(a.checkpoint, device).model;
    } else {
        net = model::build_model({"glorot_uniform", a.seed}, {a.channel_divisor});
        net->to(device);
    }
    std::vector<Image> frames;
    if (!a.dataset.empty()) {
        require_exists(a.dataset, "dataset");
        const auto m = datagen::DatasetManifest::load(a.dataset);
        for (std::size_t i = 0; frames.size() < static_cast<std::size_t>(a.frames) && !m.frames.empty(); ++i) {
            frames.push_back(datagen::load_frame(m, i % m.frames.size()).rgb);
        }
    } else {
        torch::manual_seed(a.seed);
        for (int i = 0; i < a.frames; ++i) {
            frames.push_back(model::tensor_to_grid(torch::rand({3, model::kInputHeight, model::kInputWidth})));
        }
    }
    const auto r = eval::benchmark_throughput(net, frames, a.warmup, a.batch_size);
    std::cout << "throughput " << r.fps << " fps over " << r.frames << " frames (batch " << r.batch_size << ", "
              << r.device << ", " << r.hardware << "); reference " << r.reference_fps << " fps on a desktop GPU\n";
    if (!a.out.empty()) io::write_json(a.out, r.to_json());
    return 0;
}

struct SummaryArgs {
    std::string checkpoint;
    int channel_divisor = 1;
    std::uint64_t seed = 0;
};

int run_summary(const SummaryArgs& a) {
    model::DeepSfTModel net{nullptr};
    if (!a.checkpoint.empty()) {
        require_exists(a.checkpoint, "checkpoint");
        net = model::load_checkpoint(a.checkpoint).model;
    } else {
        net = model::build_model({"glorot_uniform", a.seed}, {a.channel_divisor});
    }
    std::cout << model::parameter_summary(net).to_text();
    torch::NoGradGuard guard;
    net->eval();
    const auto b = net->bottleneck(torch::zeros({1, 3, model::kInputHeight, model::kInputWidth}));
    std::cout << "bottleneck " << b.size(2) << "x" << b.size(3) << "x" << b.size(1) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deepsft: template-based deformable depth and registration"};
    app.require_subcommand(1);

    MakeTemplateArgs mt;
    auto* c_mt = app.add_subcommand("make-template", "write a builtin template (sheet or tube)");
    c_mt->add_option("--kind", mt.kind, "sheet | tube")->capture_default_str();
    c_mt->add_option("--out", mt.out, "output directory")->required();
    c_mt->add_option("--texture-seed", mt.texture_seed)->capture_default_str();

    GenDataArgs gd;
    auto* c_gd = app.add_subcommand("gen-data", "render a synthetic dataset");
    c_gd->add_option("--template", gd.template_dir, "template directory")->required();
    c_gd->add_option("--out", gd.out, "output dataset directory")->required();
    c_gd->add_option("--frames", gd.frames, "number of frames (default 200)");
    c_gd->add_option("--seed", gd.seed);
    c_gd->add_option("--z-min", gd.z_min, "mm");
    c_gd->add_option("--z-max", gd.z_max, "mm");
    c_gd->add_option("--blur", gd.blur, "Gaussian blur sigma in pixels");
    c_gd->add_option("--backgrounds", gd.backgrounds, "directory of background images");
    c_gd->add_option("--config", gd.config, "dataset config JSON");
    c_gd->add_option("--jobs", gd.jobs, "worker threads")->capture_default_str();

    ExportArgs ex;
    auto* c_ex = app.add_subcommand("export-rgbd", "write a dataset as sensor-style RGB-D files");
    c_ex->add_option("--dataset", ex.dataset)->required();
    c_ex->add_option("--out", ex.out)->required();
    c_ex->add_option("--depth-unit", ex.depth_unit, "mm | m")->capture_default_str();
    c_ex->add_option("--depth-format", ex.depth_format, "png | tiff")->capture_default_str();

    IngestArgs in;
    auto* c_in = app.add_subcommand("ingest", "convert paired RGB-D images into a depth-only dataset");
    c_in->add_option("--input", in.input)->required();
    c_in->add_option("--out", in.out)->required();
    c_in->add_option("--camera", in.camera, "camera JSON (default: <input>/camera.json)");
    c_in->add_option("--depth-unit", in.depth_unit, "mm | m");
    c_in->add_option("--z-min", in.z_min);
    c_in->add_option("--z-max", in.z_max);
    c_in->add_option("--val-fraction", in.val_fraction)->capture_default_str();
    c_in->add_option("--test-fraction", in.test_fraction)->capture_default_str();

    TrainArgs tr;
    auto* c_tr = app.add_subcommand("train", "stage 1: end-to-end training on synthetic data");
    c_tr->add_option("--dataset", tr.dataset)->required();
    c_tr->add_option("--out", tr.out, "output checkpoint")->required();
    c_tr->add_option("--init", tr.init, "start from this checkpoint");
    c_tr->add_option("--config", tr.config, "stage config JSON");
    c_tr->add_option("--epochs", tr.epochs);
    c_tr->add_option("--batch-size", tr.batch_size);
    c_tr->add_option("--lr", tr.lr);
    c_tr->add_option("--seed", tr.seed);
    c_tr->add_option("--max-steps", tr.max_steps);
    c_tr->add_option("--channel-divisor", tr.channel_divisor, "8 for the reduced model")->capture_default_str();
    c_tr->add_flag("--no-first-depth", tr.no_first_depth, "do not supervise the main block's depth channel");
    c_tr->add_flag("--include-val", tr.include_val);
    c_tr->add_option("--history", tr.history, "JSON-lines step log");
    c_tr->add_option("--checkpoint-dir", tr.checkpoint_dir, "per-epoch checkpoints");
    c_tr->add_option("--device", tr.device);
    c_tr->add_option("--log-every", tr.log_every)->capture_default_str();

    FinetuneArgs ft;
    auto* c_ft = app.add_subcommand("finetune", "stage 2: adaptation block on depth-only data");
    c_ft->add_option("--dataset", ft.dataset)->required();
    c_ft->add_option("--checkpoint", ft.checkpoint)->required();
    c_ft->add_option("--out", ft.out)->required();
    c_ft->add_option("--config", ft.config);
    c_ft->add_option("--epochs", ft.epochs);
    c_ft->add_option("--batch-size", ft.batch_size);
    c_ft->add_option("--lr", ft.lr);
    c_ft->add_option("--seed", ft.seed);
    c_ft->add_option("--max-steps", ft.max_steps);
    c_ft->add_flag("--include-val", ft.include_val);
    c_ft->add_flag("--batch-statistics", ft.batch_statistics, "normalize with batch statistics while fine-tuning");
    c_ft->add_option("--history", ft.history);
    c_ft->add_option("--checkpoint-dir", ft.checkpoint_dir);
    c_ft->add_option("--device", ft.device);
    c_ft->add_option("--log-every", ft.log_every)->capture_default_str();

    InferArgs inf;
    auto* c_inf = app.add_subcommand("infer", "predict depth, warp, mask and point clouds");
    c_inf->add_option("--checkpoint", inf.checkpoint)->required();
    c_inf->add_option("--dataset", inf.dataset);
    c_inf->add_option("--split", inf.split)->capture_default_str();
    c_inf->add_option("--image", inf.image, "single 480x270 image");
    c_inf->add_option("--camera", inf.camera, "camera JSON for --image");
    c_inf->add_option("--out", inf.out)->required();
    c_inf->add_flag("--figures", inf.figures, "write input | depth | warp-u | warp-v panels");
    c_inf->add_option("--device", inf.device);

    EvalArgs ev;
    auto* c_ev = app.add_subcommand("eval", "score predictions against dataset ground truth");
    c_ev->add_option("--dataset", ev.dataset)->required();
    c_ev->add_option("--predictions", ev.predictions)->required();
    c_ev->add_option("--split", ev.split)->capture_default_str();
    c_ev->add_option("--out", ev.out, "report JSON");
    c_ev->add_option("--table", ev.table, "markdown table file");
    c_ev->add_option("--name", ev.name)->capture_default_str();
    c_ev->add_option("--atlas-to-px", ev.atlas_to_px, "texture pixels per atlas unit (default: texture width)");

    AdaptArgs ad;
    auto* c_ad = app.add_subcommand("adapt", "re-target images from a new camera to the training intrinsics");
    c_ad->add_option("--input", ad.input, "image or directory")->required();
    c_ad->add_option("--out", ad.out)->required();
    c_ad->add_option("--source-camera", ad.source_camera, "training camera JSON (native resolution)")->required();
    c_ad->add_option("--new-camera", ad.new_camera, "camera JSON of the input images")->required();
    c_ad->add_option("--width", ad.width)->capture_default_str();
    c_ad->add_option("--height", ad.height)->capture_default_str();

    BenchArgs be;
    auto* c_be = app.add_subcommand("bench", "measure inference throughput");
    c_be->add_option("--checkpoint", be.checkpoint);
    c_be->add_option("--dataset", be.dataset);
    c_be->add_option("--frames", be.frames)->capture_default_str();
    c_be->add_option("--warmup", be.warmup)->capture_default_str();
    c_be->add_option("--batch-size", be.batch_size)->capture_default_str();
    c_be->add_option("--channel-divisor", be.channel_divisor)->capture_default_str();
    c_be->add_option("--seed", be.seed)->capture_default_str();
    c_be->add_option("--out", be.out, "report JSON");
    c_be->add_option("--device", be.device);

    SummaryArgs su;
    auto* c_su = app.add_subcommand("summary", "print per-block parameter counts");
    c_su->add_option("--checkpoint", su.checkpoint);
    c_su->add_option("--channel-divisor", su.channel_divisor)->capture_default_str();
    c_su->add_option("--seed", su.seed)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*c_mt) return run_make_template(mt);
        if (*c_gd) return run_gen_data(gd);
        if (*c_ex) return run_export(ex);
        if (*c_in) return run_ingest(in);
        if (*c_tr) return run_train(tr);
        if (*c_ft) return run_finetune(ft);
        if (*c_inf) return run_infer(inf);
        if (*c_ev) return run_eval(ev);
        if (*c_ad) return run_adapt(ad);
        if (*c_be) return run_bench(be);
        if (*c_su) return run_summary(su);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.get_subcommands().front()->help();
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
