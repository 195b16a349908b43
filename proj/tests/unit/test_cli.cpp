#include <array>
#include <cstdio>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "deepsft/datagen/dataset.hpp"
#include "deepsft/eval/metrics.hpp"
#include "deepsft/io/json_io.hpp"
#include "deepsft/io/raster_io.hpp"
#include "deepsft/model/checkpoint.hpp"
#include "test_support.hpp"

using namespace deepsft;
using deepsft::testing::TempDir;
using deepsft::testing::slurp;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string output;
};

Run cli(const std::string& args) {
    const std::string cmd = std::string(DEEPSFT_CLI_PATH) + " " + args + " 2>&1";
    Run r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

// template + small dataset shared by the tests below
struct Fixture {
    TempDir dir{"cli"};
    std::string tpl, data;
    Fixture() {
        tpl = (dir / "tpl").string();
        data = (dir / "data").string();
        cli("make-template --out " + tpl);
        cli("gen-data --template " + tpl + " --out " + data + " --frames 5 --seed 1");
    }
};

Fixture& fx() {
    static Fixture f;
    return f;
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(cli("").code, 2);
    EXPECT_EQ(cli("no-such-command").code, 2);
    const auto r = cli("gen-data --template /nonexistent/tpl --out /tmp/x");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("Usage"), std::string::npos);
    EXPECT_EQ(cli("train --out x.pt").code, 2);
    EXPECT_EQ(cli("infer --checkpoint /nonexistent.pt --out /tmp/y").code, 2);
    EXPECT_EQ(cli("--help").code, 0);
}

TEST(Cli, GenDataIsByteReproducible) {
    TempDir d("gen");
    const auto a = (d / "a").string(), b = (d / "b").string();
    ASSERT_EQ(cli("gen-data --template " + fx().tpl + " --out " + a + " --frames 10 --seed 1").code, 0);
    ASSERT_EQ(cli("gen-data --template " + fx().tpl + " --out " + b + " --frames 10 --seed 1 --jobs 2").code, 0);
    EXPECT_EQ(slurp(fs::path(a) / "manifest.json"), slurp(fs::path(b) / "manifest.json"));
    EXPECT_EQ(slurp(fs::path(a) / "frames/000009.depth.tiff"), slurp(fs::path(b) / "frames/000009.depth.tiff"));
    const auto m = io::read_json(fs::path(a) / "manifest.json");
    EXPECT_EQ(m.at("seed").get<std::uint64_t>(), 1u);
    EXPECT_EQ(m.at("frames").size(), 10u);
}

TEST(Cli, TrainPrintsDefaultsAndRejectsDepthOnlyData) {
    TempDir d("train");
    const auto ck = (d / "m.pt").string();
    const auto r = cli("train --dataset " + fx().data + " --out " + ck + " --channel-divisor 8 --max-steps 1");
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("adam lr 0.001 betas (0.9, 0.9) epochs 40 batch 7"), std::string::npos) << r.output;

    const auto rgbd = (d / "rgbd").string(), real = (d / "real").string();
    ASSERT_EQ(cli("export-rgbd --dataset " + fx().data + " --out " + rgbd).code, 0);
    ASSERT_EQ(cli("ingest --input " + rgbd + " --out " + real).code, 0);
    const auto bad = cli("train --dataset " + real + " --out " + (d / "x.pt").string() + " --channel-divisor 8");
    EXPECT_EQ(bad.code, 1);
    EXPECT_NE(bad.output.find("depth-only"), std::string::npos) << bad.output;

    const auto ft = cli("finetune --dataset " + real + " --checkpoint " + ck + " --out " + (d / "f.pt").string() +
                        " --max-steps 1");
    ASSERT_EQ(ft.code, 0) << ft.output;
    EXPECT_NE(ft.output.find("main-block hash before"), std::string::npos);
    EXPECT_NE(ft.output.find("unchanged"), std::string::npos);

    const auto zero = cli("finetune --dataset " + real + " --checkpoint " + ck + " --out " + (d / "z.pt").string() +
                          " --epochs 0");
    ASSERT_EQ(zero.code, 0) << zero.output;
    EXPECT_EQ(model::module_hash(*model::load_checkpoint(ck).model),
              model::module_hash(*model::load_checkpoint(d / "z.pt").model));

    // checkpoint trained under a different depth range
    const auto other = (d / "other").string();
    ASSERT_EQ(cli("gen-data --template " + fx().tpl + " --out " + other + " --frames 3 --z-min 500 --z-max 1500").code, 0);
    const auto mismatch = cli("infer --checkpoint " + ck + " --dataset " + other + " --out " + (d / "p").string());
    EXPECT_EQ(mismatch.code, 1);
    EXPECT_NE(mismatch.output.find("normalization"), std::string::npos);
}

TEST(Cli, EvalOfGroundTruthIsPerfect) {
    TempDir d("eval");
    const auto m = datagen::DatasetManifest::load(fx().data);
    const auto pred = d / "pred";
    fs::create_directories(pred);
    for (auto i : m.indices(datagen::Split::test)) {
        const auto f = datagen::load_frame(m, i);
        io::write_depth(pred / (m.frames[i].id + ".depth.tiff"), f.depth);
        io::write_warp(pred / (m.frames[i].id + ".warp.tiff"), *f.warp);  // mask derived from depth
    }
    const auto out = (d / "report.json").string();
    const auto r = cli("eval --dataset " + fx().data + " --predictions " + pred.string() + " --out " + out);
    ASSERT_EQ(r.code, 0) << r.output;
    const auto report = eval::MetricReport::from_json(io::read_json(out));
    EXPECT_EQ(*report.depth_rmse_mm, 0.0);
    EXPECT_EQ(*report.registration_rmse_px, 0.0);
    EXPECT_EQ(report.segmentation_iou, 1.0);
}

TEST(Cli, InferWritesAllOutputs) {
    TempDir d("infer");
    const auto ck = (d / "m.pt").string();
    ASSERT_EQ(cli("train --dataset " + fx().data + " --out " + ck + " --channel-divisor 8 --max-steps 1").code, 0);
    const auto out = d / "pred";
    const auto r = cli("infer --checkpoint " + ck + " --dataset " + fx().data + " --out " + out.string() + " --figures");
    ASSERT_EQ(r.code, 0) << r.output;
    const auto m = datagen::DatasetManifest::load(fx().data);
    for (auto i : m.indices(datagen::Split::test)) {
        for (const char* ext : {".depth.tiff", ".warp.tiff", ".mask.png", ".ply", ".panel.png"}) {
            EXPECT_TRUE(fs::exists(out / (m.frames[i].id + ext))) << ext;
        }
    }
    const auto index = io::read_json(out / "predictions.json");
    EXPECT_EQ(index.at("seed").get<std::uint64_t>(), 1u);
    const auto single = cli("infer --checkpoint " + ck + " --image " + (fs::path(fx().data) / "frames/000000.rgb.png").string() +
                            " --camera " + (fs::path(fx().data) / "manifest.json").string() + " --out " + (d / "one").string());
    EXPECT_NE(single.code, 0);  // manifest is not a camera file
}

TEST(Cli, AdaptWithIdenticalIntrinsicsIsIdentity) {
    TempDir d("adapt");
    const auto m = datagen::DatasetManifest::load(fx().data);
    const auto cam = (d / "cam.json").string();
    io::write_camera(cam, m.camera);
    const auto in = d / "in";
    fs::create_directories(in);
    fs::copy_file(fs::path(fx().data) / "frames/000000.rgb.png", in / "a.png");
    fs::copy_file(fs::path(fx().data) / "frames/000001.rgb.png", in / "b.png");
    const auto r = cli("adapt --input " + in.string() + " --out " + (d / "out").string() + " --source-camera " + cam +
                       " --new-camera " + cam);
    ASSERT_EQ(r.code, 0) << r.output;
    for (const char* n : {"a.png", "b.png"}) {
        EXPECT_EQ(io::read_rgb(in / n), io::read_rgb(d / "out" / n));
    }
}

TEST(Cli, SummaryAndBench) {
    const auto s = cli("summary");
    ASSERT_EQ(s.code, 0);
    EXPECT_NE(s.output.find("bottleneck 12x20x1024"), std::string::npos);
    TempDir d("bench");
    const auto out = (d / "bench.json").string();
    const auto b = cli("bench --channel-divisor 8 --frames 10 --out " + out);
    ASSERT_EQ(b.code, 0) << b.output;
    const auto j = io::read_json(out);
    EXPECT_GT(j.at("fps").get<double>(), 0.0);
    EXPECT_EQ(j.at("reference_fps").get<double>(), 20.4);
}
