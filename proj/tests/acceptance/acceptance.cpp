// End-to-end acceptance checks, one line per criterion.
//
//   acceptance            run all ten
//   acceptance 1 5 7      run a subset
//
// Exit status is 0 only when every selected criterion passes.

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "deepsft/datagen/dataset.hpp"
#include "deepsft/datagen/deformation.hpp"
#include "deepsft/datagen/render.hpp"
#include "deepsft/eval/benchmark.hpp"
#include "deepsft/eval/metrics.hpp"
#include "deepsft/geometry/builtin_templates.hpp"
#include "deepsft/geometry/mesh.hpp"
#include "deepsft/inference/adaptation.hpp"
#include "deepsft/io/json_io.hpp"
#include "deepsft/model/checkpoint.hpp"
#include "deepsft/training/trainer.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace deepsft;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int precision = 4) {
    std::ostringstream os;
    os << std::setprecision(precision) << v;
    return os.str();
}

int run_cli(const std::string& args, std::string* output = nullptr) {
    const std::string cmd = std::string(DEEPSFT_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return -1;
    std::array<char, 4096> buf{};
    std::string out;
    while (std::fgets(buf.data(), buf.size(), pipe)) out += buf.data();
    const int status = ::pclose(pipe);
    if (output) *output = out;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Work shared between criteria 3 and 4.
struct OverfitArtifacts {
    deepsft::testing::TempDir dir{"accept"};
    datagen::DatasetManifest synthetic;
    model::DeepSfTModel model{nullptr};
    nlohmann::json history;
    bool trained = false;
};

OverfitArtifacts& overfit_state() {
    static OverfitArtifacts a;
    return a;
}

// 1 -------------------------------------------------------------------------
Outcome architecture() {
    const auto t0 = Clock::now();
    auto net = model::build_model();
    net->eval();
    torch::NoGradGuard g;
    const auto x = torch::rand({1, 3, model::kInputHeight, model::kInputWidth});
    const auto out = net->forward(x);
    const auto b = net->bottleneck(x);
    const double t = seconds_since(t0);
    const bool shapes = out.main.sizes() == torch::IntArrayRef{1, 3, 270, 480} &&
                        out.refined.sizes() == torch::IntArrayRef{1, 1, 270, 480} &&
                        b.sizes() == torch::IntArrayRef{1, 1024, 12, 20};
    const bool finite = torch::isfinite(out.main).all().item<bool>() && torch::isfinite(out.refined).all().item<bool>();
    std::ostringstream os;
    os << "main (" << out.main.size(2) << "," << out.main.size(3) << "," << out.main.size(1) << "), adaptation ("
       << out.refined.size(2) << "," << out.refined.size(3) << "," << out.refined.size(1) << "), bottleneck ("
       << b.size(2) << "," << b.size(3) << "," << b.size(1) << "), build+forward " << fmt(t, 3) << " s (limit 30 s)";
    return {shapes && finite && t < 30.0, os.str()};
}

// 2 -------------------------------------------------------------------------
Outcome gradients() {
    const auto t0 = Clock::now();
    auto net = model::build_model({"glorot_uniform", 2}, {8});
    const auto check = deepsft::testing::check_gradients(net, 24, 2024);
    const auto& samples = check.samples;
    const double t = seconds_since(t0);
    double worst = 0.0;
    int ok = 0, main_block = 0;
    for (const auto& s : samples) {
        worst = std::max(worst, s.relative_error);
        ok += s.relative_error < 1e-3;
        main_block += s.parameter.rfind("main.", 0) == 0;
    }
    const bool pass = ok == static_cast<int>(samples.size()) && samples.size() >= 20 && t < 300.0;
    return {pass, std::to_string(ok) + "/" + std::to_string(samples.size()) + " weights within 1e-3 (" +
                      std::to_string(main_block) + " in the main block; " + std::to_string(check.rejected) +
                      " draws rejected as straddling a ReLU/max-pool switch), worst relative error " + fmt(worst, 3) +
                      ", " + fmt(t, 3) + " s (limit 300 s)"};
}

// 3 -------------------------------------------------------------------------
Outcome overfit() {
    auto& st = overfit_state();
    const auto t0 = Clock::now();
    datagen::DatasetConfig dc;
    dc.frames = 20;
    dc.seed = 1;
    dc.val_fraction = dc.test_fraction = 0.0;
    st.synthetic = datagen::generate_dataset(geometry::make_sheet_template(), dc, st.dir / "overfit");
    st.model = model::build_model({"glorot_uniform", 1}, {8});
    training::FrameLoader loader(st.synthetic, st.synthetic.indices(datagen::Split::train), true);
    const auto before = training::evaluate_synthetic(st.model, loader);

    training::Stage1Config c;
    c.seed = 1;
    c.epochs = 1000;
    c.max_steps = 500;
    const auto r = training::train_stage1(st.model, st.synthetic, c, nlohmann::json::array(),
                                          [](const training::StepRecord& s) {
                                              if (s.step % 100 == 0) {
                                                  std::cerr << "  [3] step " << s.step << " L_s " << s.loss.total << '\n';
                                              }
                                          });
    st.history = r.history;
    st.trained = true;
    const auto after = training::evaluate_synthetic(st.model, loader);

    const auto report = eval::evaluate_model(st.model, st.synthetic, st.synthetic.indices(datagen::Split::train));
    double se = 0.0;
    std::size_t n = 0;
    for (const auto& f : report.per_frame) {
        if (!f.depth_rmse_mm) continue;
        se += *f.depth_rmse_mm * *f.depth_rmse_mm * f.depth_pixels;
        n += f.depth_pixels;
    }
    const double rmse = n ? std::sqrt(se / n) : std::numeric_limits<double>::infinity();
    const double limit = 0.02 * (st.synthetic.normalization.z_max - st.synthetic.normalization.z_min);
    const double ratio = after.total / before.total;
    const double t = seconds_since(t0);
    const bool pass = r.steps.size() == 500 && ratio <= 0.01 && rmse < limit && t < 1800.0;
    return {pass, "L_s " + fmt(before.total) + " -> " + fmt(after.total) + " (ratio " + fmt(ratio, 3) +
                      ", limit 0.01), training-set depth RMSE " + fmt(rmse) + " mm (limit " + fmt(limit) + " mm), " +
                      std::to_string(r.steps.size()) + " steps in " + fmt(t / 60.0, 3) + " min (limit 30 min)"};
}

// 4 -------------------------------------------------------------------------
Outcome freeze() {
    auto& st = overfit_state();
    if (!st.trained) overfit();
    const auto t0 = Clock::now();
    datagen::export_rgbd(st.synthetic, st.dir / "rgbd");
    datagen::IngestOptions o;
    o.val_fraction = o.test_fraction = 0.0;
    const auto real = datagen::ingest_rgbd(st.dir / "rgbd", st.dir / "real", o);

    std::vector<torch::Tensor> main_before, adapt_before;
    std::vector<std::string> main_names;
    for (const auto& p : st.model->main_block->named_parameters()) {
        main_names.push_back(p.key());
        main_before.push_back(p.value().detach().clone());
    }
    for (const auto& p : st.model->main_block->named_buffers()) {
        main_names.push_back(p.key());
        main_before.push_back(p.value().detach().clone());
    }
    for (const auto& p : st.model->adaptation_block->parameters()) adapt_before.push_back(p.detach().clone());

    training::Stage2Config c;
    c.seed = 1;
    c.epochs = 1000;
    c.max_steps = 200;
    const auto r = training::finetune_stage2(st.model, real, c, st.history);

    std::size_t identical = 0, k = 0;
    for (const auto& p : st.model->main_block->named_parameters()) identical += torch::equal(p.value(), main_before[k++]);
    for (const auto& p : st.model->main_block->named_buffers()) identical += torch::equal(p.value(), main_before[k++]);
    std::size_t changed = 0, a = 0;
    for (const auto& p : st.model->adaptation_block->parameters()) changed += !torch::equal(p, adapt_before[a++]);

    int increases = 0;
    for (std::size_t e = 1; e < r.epochs.size(); ++e) increases += r.epochs[e].mean.total > r.epochs[e - 1].mean.total;
    const double t = seconds_since(t0);
    const bool pass = r.main_hash_before == r.main_hash_after && identical == main_before.size() && changed > 0 &&
                      r.epochs.size() >= 2 && increases == 0;
    std::ostringstream os;
    os << "main-block hash " << r.main_hash_before << " -> " << r.main_hash_after << ", " << identical << "/"
       << main_before.size() << " main tensors bit-identical, " << changed << "/" << adapt_before.size()
       << " adaptation tensors changed, L_r epoch mean " << fmt(r.epochs.front().mean.total, 6) << " -> "
       << fmt(r.epochs.back().mean.total, 6) << " over " << r.epochs.size() << " epochs with " << increases
       << " increases, " << fmt(t, 3) << " s";
    return {pass, os.str()};
}

// 5 -------------------------------------------------------------------------
Outcome datagen_oracle() {
    const auto cam = geometry::default_training_camera();
    const auto sheet = geometry::make_sheet_template();
    const auto tube = geometry::make_tube_template();
    std::mt19937_64 rng(2025);
    const auto cloth = datagen::simulate_cloth(sheet, {.enabled = true, .seed = 2025}, 250, {});
    double worst_depth = 1.0, worst_reproj = 1.0, max_px = 0.0;
    std::size_t foreground = 0;
    for (int i = 0; i < 10; ++i) {
        const bool shell = i % 2 == 0;
        const auto& tmpl = shell ? sheet : tube;
        auto deformation = shell ? cloth[std::uniform_int_distribution<std::size_t>(0, cloth.size() - 1)(rng)]
                                 : datagen::sample_rig_pose(tube, rng());
        auto scene = std::make_shared<datagen::SceneSample>(
            datagen::sample_scene(tmpl, deformation, cam, geometry::NormalizationSpec{}, datagen::SceneConfig{}, {}, rng));
        const auto frame = datagen::rasterize_frame(scene, tmpl, cam);
        const auto s = datagen::check_frame_consistency(frame, tmpl);
        if (s.foreground == 0) return {false, "frame " + std::to_string(i) + " has no foreground"};
        foreground += s.foreground;
        worst_depth = std::min(worst_depth, s.depth_fraction());
        worst_reproj = std::min(worst_reproj, s.reprojection_fraction());
        max_px = std::max(max_px, s.max_reprojection_px);
    }
    return {worst_depth >= 0.99 && worst_reproj >= 0.99,
            "10 frames (5 cloth, 5 rig), " + std::to_string(foreground) + " foreground pixels; worst-frame depth agreement " +
                fmt(100 * worst_depth) + "%, round-trip within 0.5 px " + fmt(100 * worst_reproj) +
                "% (limit 99%), max round-trip error " + fmt(max_px, 3) + " px"};
}

// 6 -------------------------------------------------------------------------
Outcome quasi_isometry() {
    const auto sheet = geometry::make_sheet_template();
    datagen::ClothParams p;
    const auto seq = datagen::simulate_cloth(sheet, {.enabled = true, .seed = 6}, 100, p);
    double worst_mean = 0.0, worst_max = 0.0, displacement = 0.0;
    for (const auto& s : seq) {
        const auto d = geometry::edge_distortion(sheet, s.vertices);
        worst_mean = std::max(worst_mean, d.mean);
        worst_max = std::max(worst_max, d.max);
    }
    for (std::size_t i = 0; i < sheet.vertices.size(); ++i) {
        displacement = std::max(displacement, (seq.back().vertices[i] - sheet.vertices[i]).norm());
    }
    return {seq.size() == 100 && worst_mean <= p.epsilon,
            "100 steps, worst mean edge distortion " + fmt(worst_mean, 3) + " (epsilon " + fmt(p.epsilon) +
                "), worst max " + fmt(worst_max, 3) + ", largest vertex displacement " + fmt(displacement) + " mm"};
}

// 7 -------------------------------------------------------------------------
Outcome camera_adaptation() {
    const auto sheet = geometry::make_sheet_template();
    const auto kinect = geometry::kinect_v2_native();
    const auto realsense = geometry::realsense_d435_native();
    const auto params = inference::compute_adaptation(kinect, realsense);
    const double expected = 264.45 / 915.457;
    const bool a_ok = std::abs(params.A(0, 0) - expected) < 1e-4;

    std::mt19937_64 rng(7);
    const auto cloth = datagen::simulate_cloth(sheet, {.enabled = true, .seed = 7}, 60, {});
    datagen::SceneConfig sc;
    sc.lateral_fraction = 0.1;
    const auto scene =
        datagen::sample_scene(sheet, cloth.back(), params.source, geometry::NormalizationSpec{}, sc, {}, rng);
    const auto r = deepsft::testing::two_camera_correspondence(scene, sheet, kinect, realsense);
    const bool coverage = r.pixels > r.source_foreground / 2;
    return {a_ok && coverage && r.mean_px < 0.5,
            "A_uu " + fmt(params.A(0, 0), 8) + " (expected " + fmt(expected, 8) + "), mean ray-correspondence error " +
                fmt(r.mean_px, 3) + " px (limit 0.5) over " + std::to_string(r.pixels) + " of " +
                std::to_string(r.source_foreground) + " source pixels, max " + fmt(r.max_px, 3) + " px"};
}

// 8 -------------------------------------------------------------------------
Outcome metric_oracle() {
    using geometry::DepthMap;
    using geometry::WarpField;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> z(300, 1500), a(0, 1), coin(0, 1);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int h = 8 + trial % 13, w = 9 + trial % 17;
        DepthMap pd(h, w), gd(h, w);
        WarpField pw(h, w), gw(h, w);
        Mask pm(h, w), gm(h, w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (coin(rng) < 0.6) {
                    pd.set(y, x, z(rng));
                    pw.set(y, x, a(rng), a(rng));
                    pm.at(y, x) = 1;
                }
                if (coin(rng) < 0.6) {
                    gd.set(y, x, z(rng));
                    gw.set(y, x, a(rng), a(rng));
                    gm.at(y, x) = 1;
                }
            }
        long double sd = 0, sr = 0;
        long n = 0, inter = 0, uni = 0;
        const double scale = 512.0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                inter += pm.at(y, x) && gm.at(y, x);
                uni += pm.at(y, x) || gm.at(y, x);
                if (!(pd.mask(y, x) && gd.mask(y, x))) continue;
                const long double e = static_cast<long double>(pd.value(y, x)) - gd.value(y, x);
                const long double du = (static_cast<long double>(pw.uv(y, x).x()) - gw.uv(y, x).x()) * scale;
                const long double dv = (static_cast<long double>(pw.uv(y, x).y()) - gw.uv(y, x).y()) * scale;
                sd += e * e;
                sr += du * du + dv * dv;
                ++n;
            }
        if (n == 0) continue;
        const double od = static_cast<double>(std::sqrt(sd / n)), orr = static_cast<double>(std::sqrt(sr / n));
        const double oi = uni ? static_cast<double>(inter) / uni : 1.0;
        worst = std::max({worst, std::abs(eval::rmse_depth_mm(pd, gd).value - od) / od,
                          std::abs(eval::rmse_registration_px(pw, gw, scale).value - orr) / orr,
                          oi > 0 ? std::abs(eval::segmentation_iou(pm, gm) - oi) / oi : 0.0});
    }
    // hand cases
    DepthMap d1(1, 2), d2(1, 2);
    d1.set(0, 0, 500);
    d1.set(0, 1, 600);
    d2.set(0, 0, 501);
    d2.set(0, 1, 603);
    WarpField w1(1, 1), w2(1, 1);
    w1.set(0, 0, 0.0, 0.0);
    w2.set(0, 0, 0.375, 0.5);  // (3, 4) texture pixels at 8 px per unit
    Mask m1(1, 4), m2(1, 4);
    m1.at(0, 0) = m1.at(0, 1) = 1;
    m2.at(0, 1) = m2.at(0, 2) = 1;
    const double sqrt5 = eval::rmse_depth_mm(d1, d2).value;
    const double five = eval::rmse_registration_px(w1, w2, 8.0).value;
    const double third = eval::segmentation_iou(m1, m2);
    const bool hand = sqrt5 == std::sqrt(5.0) && five == 5.0 && third == 1.0 / 3.0;
    return {worst < 1e-9 && hand, "100 random pairs, worst relative deviation from brute force " + fmt(worst, 3) +
                                      "; hand cases " + fmt(sqrt5, 10) + " mm, " + fmt(five, 10) + " px, IoU " +
                                      fmt(third, 10)};
}

// 9 -------------------------------------------------------------------------
Outcome end_to_end() {
    const auto t0 = Clock::now();
    deepsft::testing::TempDir dir("e2e");
    std::vector<std::string> reports;
    std::vector<std::string> depth_bytes;
    const std::string tpl = (dir / "tpl").string();
    if (int rc = run_cli("make-template --out " + tpl); rc != 0) return {false, "make-template exit " + std::to_string(rc)};
    for (int run = 0; run < 2; ++run) {
        const fs::path root = dir / ("run" + std::to_string(run));
        const auto p = [&](const char* rel) { return (root / rel).string(); };
        const std::vector<std::pair<std::string, std::string>> steps = {
            {"gen-data", "gen-data --template " + tpl + " --out " + p("syn") + " --frames 12 --seed 9"},
            {"train", "train --dataset " + p("syn") + " --out " + p("stage1.pt") +
                          " --channel-divisor 8 --epochs 2 --batch-size 4 --seed 9 --history " + p("stage1.jsonl")},
            {"export-rgbd", "export-rgbd --dataset " + p("syn") + " --out " + p("rgbd")},
            {"ingest", "ingest --input " + p("rgbd") + " --out " + p("real")},
            {"finetune", "finetune --dataset " + p("real") + " --checkpoint " + p("stage1.pt") + " --out " +
                             p("stage2.pt") + " --epochs 2 --batch-size 4 --seed 9"},
            {"infer", "infer --checkpoint " + p("stage2.pt") + " --dataset " + p("syn") + " --out " + p("pred") +
                          " --figures"},
            {"eval", "eval --dataset " + p("syn") + " --predictions " + p("pred") + " --out " + p("report.json")},
        };
        for (const auto& [name, args] : steps) {
            std::string out;
            const int rc = run_cli(args, &out);
            if (rc != 0) return {false, name + " exited " + std::to_string(rc) + ": " + out};
        }
        reports.push_back(deepsft::testing::slurp(root / "report.json"));
        const auto m = datagen::DatasetManifest::load(root / "syn");
        std::string bytes;
        for (auto i : m.indices(datagen::Split::test)) bytes += deepsft::testing::slurp(root / "pred" / (m.frames[i].id + ".depth.tiff"));
        depth_bytes.push_back(bytes);
    }
    const auto report = eval::MetricReport::from_json(nlohmann::json::parse(reports[0]));
    const bool finite = report.depth_rmse_mm && std::isfinite(*report.depth_rmse_mm) && report.registration_rmse_px &&
                        std::isfinite(*report.registration_rmse_px) && std::isfinite(report.segmentation_iou);
    const bool deterministic = reports[0] == reports[1] && depth_bytes[0] == depth_bytes[1] && !depth_bytes[0].empty();
    const double t = seconds_since(t0);
    std::ostringstream os;
    os << "gen-data > train > export-rgbd > ingest > finetune > infer > eval all exit 0 (twice); depth RMSE "
       << (report.depth_rmse_mm ? fmt(*report.depth_rmse_mm) : "n/a") << " mm, registration RMSE "
       << (report.registration_rmse_px ? fmt(*report.registration_rmse_px) : "n/a") << " px, IoU "
       << fmt(report.segmentation_iou, 3) << "; repeat run " << (deterministic ? "identical" : "DIFFERS") << "; "
       << fmt(t / 60.0, 3) << " min (limit 45 min)";
    return {finite && deterministic && t < 45 * 60.0, os.str()};
}

// 10 ------------------------------------------------------------------------
Outcome throughput() {
    auto net = model::build_model();
    std::vector<Image> frames;
    torch::manual_seed(10);
    for (int i = 0; i < 10; ++i) {
        frames.push_back(model::tensor_to_grid(torch::rand({3, model::kInputHeight, model::kInputWidth})));
    }
    const auto r = eval::benchmark_throughput(net, frames, 1, 1);
    const bool pass = r.fps > 0.0 && std::isfinite(r.fps) && !r.hardware.empty() && r.frames == 10;
    return {pass, "full model " + fmt(r.fps, 3) + " fps over " + std::to_string(r.frames) + " frames on " + r.hardware +
                      " (" + r.device + ", " + std::to_string(r.threads) + " threads); reference " +
                      fmt(r.reference_fps, 3) + " fps on a desktop GPU, context only"};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"architecture fidelity", architecture},
        {"gradient correctness", gradients},
        {"overfit sanity", overfit},
        {"freeze invariant", freeze},
        {"datagen ground-truth oracle", datagen_oracle},
        {"quasi-isometry", quasi_isometry},
        {"camera adaptation", camera_adaptation},
        {"metric oracle equivalence", metric_oracle},
        {"end-to-end smoke", end_to_end},
        {"throughput harness", throughput},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << " (" << criteria[i].first << "): " << o.detail
                  << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
