#include <cmath>
#include <random>

#include <Eigen/Geometry>
#include <gtest/gtest.h>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "deepsft/datagen/dataset.hpp"
#include "deepsft/datagen/deformation.hpp"
#include "deepsft/datagen/render.hpp"
#include "deepsft/error.hpp"
#include "deepsft/geometry/builtin_templates.hpp"
#include "deepsft/geometry/mesh.hpp"
#include "deepsft/io/json_io.hpp"
#include "deepsft/io/raster_io.hpp"
#include "test_support.hpp"

using namespace deepsft;
using namespace deepsft::datagen;
using deepsft::testing::TempDir;
namespace fs = std::filesystem;

namespace {

const geometry::Template& sheet() {
    static const auto t = geometry::make_sheet_template({.columns = 17, .rows = 12, .texture_size = 128});
    return t;
}

const geometry::Template& tube() {
    static const auto t = geometry::make_tube_template({.segments_around = 16, .rings_along = 12, .texture_size = 128});
    return t;
}

DatasetConfig small_config(int frames, std::uint64_t seed) {
    DatasetConfig c;
    c.frames = frames;
    c.seed = seed;
    c.sequence_length = 5;
    c.val_fraction = 0.2;
    c.test_fraction = 0.2;
    return c;
}

}  // namespace

TEST(Cloth, RestWithoutForces) {
    ClothParams p;
    const auto seq = simulate_cloth(sheet(), RandomForceConfig{}, 20, p);
    ASSERT_EQ(seq.size(), 20u);
    for (const auto& s : seq) {
        EXPECT_EQ(s.provenance, Provenance::cloth_sim);
        const auto d = geometry::edge_distortion(sheet(), s.vertices);
        EXPECT_LT(d.max, 1e-12);
        for (std::size_t i = 0; i < s.vertices.size(); ++i) {
            EXPECT_LT((s.vertices[i] - sheet().vertices[i]).norm(), 1e-9);
        }
    }
}

TEST(Cloth, DrapesUnderGravityWithinEpsilon) {
    ClothParams p;
    p.gravity = {0.0, 0.0, -9810.0};  // across the sheet, which lies in the xy plane
    for (std::size_t i = 0; i < sheet().vertices.size(); ++i) {
        if (sheet().vertices[i].y() > 104.0) p.pinned.push_back(static_cast<int>(i));
    }
    ASSERT_FALSE(p.pinned.empty());
    const auto seq = simulate_cloth(sheet(), RandomForceConfig{}, 120, p);
    const auto& last = seq.back().vertices;
    const auto d = geometry::edge_distortion(sheet(), last);
    EXPECT_LT(d.mean, p.epsilon);
    double max_drop = 0.0;
    for (std::size_t i = 0; i < last.size(); ++i) max_drop = std::max(max_drop, sheet().vertices[i].z() - last[i].z());
    EXPECT_GT(max_drop, 10.0);  // it actually moved
    for (int i : p.pinned) EXPECT_EQ(last[i], sheet().vertices[i]);
}

TEST(Cloth, RandomForcesDeterministicAndQuasiIsometric) {
    RandomForceConfig f{.enabled = true, .seed = 42};
    ClothParams p;
    const auto a = simulate_cloth(sheet(), f, 100, p);
    const auto b = simulate_cloth(sheet(), f, 100, p);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        ASSERT_EQ(a[k].vertices, b[k].vertices);
        EXPECT_LE(geometry::edge_distortion(sheet(), a[k].vertices).mean, p.epsilon);
    }
    f.seed = 43;
    EXPECT_NE(simulate_cloth(sheet(), f, 100, p).back().vertices, a.back().vertices);
}

TEST(Cloth, Errors) {
    EXPECT_THROW(simulate_cloth(tube(), {}, 5, {}), ConfigError);
    ClothParams bad;
    bad.dt = 0.0;
    EXPECT_THROW(simulate_cloth(sheet(), {}, 5, bad), ConfigError);
    ClothParams weak;
    weak.stiffness = 0.001;
    weak.solver_iterations = 1;
    try {
        simulate_cloth(sheet(), {.enabled = true, .magnitude = 5e6, .seed = 1}, 50, weak);
        FAIL() << "expected divergence";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
    }
}

TEST(Rig, ZeroAnglesGiveRestShape) {
    const std::vector<Eigen::Vector3d> zero(tube().rig->bones.size(), Eigen::Vector3d::Zero());
    const auto posed = pose_rig(tube(), zero);
    for (std::size_t i = 0; i < posed.size(); ++i) EXPECT_LT((posed[i] - tube().vertices[i]).norm(), 1e-12);
}

TEST(Rig, FullyWeightedVerticesMoveRigidly) {
    const auto& rig = *tube().rig;
    const std::size_t bone = rig.bones.size() - 1;
    std::vector<Eigen::Vector3d> angles(rig.bones.size(), Eigen::Vector3d::Zero());
    angles[bone] = {10.0, 25.0, -15.0};
    const auto posed = pose_rig(tube(), angles);
    std::vector<std::size_t> rigid;
    for (Eigen::Index i = 0; i < rig.weights.rows(); ++i) {
        if (rig.weights(i, static_cast<Eigen::Index>(bone)) == 1.0) rigid.push_back(static_cast<std::size_t>(i));
    }
    ASSERT_GE(rigid.size(), 3u);
    bool moved = false;
    for (std::size_t a = 0; a < rigid.size(); ++a) {
        moved |= (posed[rigid[a]] - tube().vertices[rigid[a]]).norm() > 1.0;
        for (std::size_t b = a + 1; b < rigid.size(); b += 7) {
            const double before = (tube().vertices[rigid[a]] - tube().vertices[rigid[b]]).norm();
            const double after = (posed[rigid[a]] - posed[rigid[b]]).norm();
            EXPECT_NEAR(before, after, 1e-9);
        }
    }
    EXPECT_TRUE(moved);
}

TEST(Rig, SeededAndRequiresRig) {
    const auto a = sample_rig_pose(tube(), 9);
    const auto b = sample_rig_pose(tube(), 9);
    EXPECT_EQ(a.vertices, b.vertices);
    EXPECT_EQ(a.provenance, Provenance::rig);
    EXPECT_NE(sample_rig_pose(tube(), 10).vertices, a.vertices);
    EXPECT_THROW(sample_rig_pose(sheet(), 1), ConfigError);
}

TEST(Render, FrontoParallelPlaneHasConstantDepth) {
    const auto cam = geometry::default_training_camera();
    const auto scene = deepsft::testing::planar_scene(sheet(), cam, 800.0);
    const auto f = rasterize_frame(scene, sheet(), cam);
    ASSERT_GT(f.depth.foreground_count(), 1000u);
    EXPECT_EQ(f.depth.mask(), f.warp.mask());
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x)
            if (f.depth.mask(y, x)) ASSERT_NEAR(f.depth.value(y, x), 800.0, 1e-3);
    // oracle: z0 exactly at the principal point, background far outside the sheet
    const auto centre = raycast_depth_oracle(*scene, sheet(), cam, 132, 236);
    ASSERT_TRUE(centre.has_value());
    EXPECT_NEAR(*centre, 800.0, 1e-9);
    EXPECT_FALSE(raycast_depth_oracle(*scene, sheet(), cam, 5, 5).has_value());
}

TEST(Render, DeterministicAndConsistentWithOracle) {
    const auto cam = geometry::default_training_camera();
    std::mt19937_64 rng(11);
    const auto cloth = simulate_cloth(sheet(), {.enabled = true, .seed = 5}, 80, {});
    for (const auto* t : {&sheet(), &tube()}) {
        auto deformation = t == &sheet() ? cloth.back() : sample_rig_pose(*t, 17);
        auto scene = std::make_shared<SceneSample>(
            sample_scene(*t, deformation, cam, geometry::NormalizationSpec{}, SceneConfig{}, {}, rng));
        const auto a = rasterize_frame(scene, *t, cam);
        const auto b = rasterize_frame(scene, *t, cam);
        EXPECT_EQ(a.rgb, b.rgb);
        EXPECT_EQ(a.depth, b.depth);
        EXPECT_EQ(a.warp, b.warp);
        EXPECT_EQ(a.depth.mask(), a.warp.mask());
        const auto stats = check_frame_consistency(a, *t);
        ASSERT_GT(stats.foreground, 0u);
        EXPECT_GE(stats.depth_fraction(), 0.99);
        EXPECT_GE(stats.reprojection_fraction(), 0.99);
    }
}

TEST(Render, OutOfFrustumWarns) {
    const auto cam = geometry::default_training_camera();
    auto scene = deepsft::testing::planar_scene(sheet(), cam, 800.0);
    scene->pose.translation = {5000.0, 0.0, 800.0};
    const auto f = rasterize_frame(scene, sheet(), cam);
    EXPECT_EQ(f.depth.foreground_count(), 0u);
    EXPECT_FALSE(f.warnings.empty());
}

TEST(Dataset, GeneratesValidManifest) {
    TempDir dir("gen");
    const auto m = generate_dataset(sheet(), small_config(10, 3), dir.path());
    ASSERT_EQ(m.frames.size(), 10u);
    EXPECT_NO_THROW(m.validate());
    EXPECT_TRUE(m.has_warp());
    EXPECT_EQ(m.sequence, "continuous");
    const auto loaded = DatasetManifest::load(dir.path());
    EXPECT_EQ(loaded.to_json(), m.to_json());
    std::set<std::size_t> seen;
    for (auto s : {Split::train, Split::val, Split::test}) {
        for (auto i : m.indices(s)) EXPECT_TRUE(seen.insert(i).second);
    }
    EXPECT_EQ(seen.size(), 10u);
    EXPECT_EQ(m.indices(Split::test).size(), 2u);
    const auto tmpl = load_dataset_template(m);
    for (std::size_t i = 0; i < m.frames.size(); ++i) {
        const auto f = load_frame(m, i);
        ASSERT_TRUE(f.warp.has_value());
        EXPECT_EQ(f.depth.mask(), f.warp->mask());
        EXPECT_EQ(f.depth.foreground_count(), m.frames[i].foreground);
        EXPECT_EQ(f.rgb.width(), 480);
        EXPECT_EQ(f.rgb.height(), 270);
    }
    EXPECT_EQ(tmpl.vertices.size(), sheet().vertices.size());
}

TEST(Dataset, SeedDeterminesOutputAndJobsDoNot) {
    TempDir a("a"), b("b"), c("c");
    auto cfg = small_config(6, 8);
    const auto ma = generate_dataset(tube(), cfg, a.path());
    cfg.jobs = 3;
    const auto mb = generate_dataset(tube(), cfg, b.path());
    EXPECT_EQ(ma.sequence, "independent");
    EXPECT_EQ(ma.config_hash, mb.config_hash);
    EXPECT_EQ(deepsft::testing::slurp(a / "manifest.json"), deepsft::testing::slurp(b / "manifest.json"));
    for (const auto& f : ma.frames) {
        for (const auto& rel : {f.rgb, f.depth, f.warp}) {
            EXPECT_EQ(deepsft::testing::slurp(a.path() / rel), deepsft::testing::slurp(b.path() / rel)) << rel;
        }
    }
    cfg.seed = 9;
    const auto mc = generate_dataset(tube(), cfg, c.path());
    EXPECT_NE(mc.config_hash, ma.config_hash);
    EXPECT_NE(deepsft::testing::slurp(a / "frames/000000.rgb.png"), deepsft::testing::slurp(c / "frames/000000.rgb.png"));
}

TEST(Dataset, ConfigJsonRoundTrip) {
    auto cfg = small_config(12, 77);
    cfg.scene.blur_sigma = 1.5;
    cfg.cloth.gravity = {0, -100, 0};
    const auto back = dataset_config_from_json(to_json(cfg));
    EXPECT_EQ(to_json(back), to_json(cfg));
    auto big = cfg;
    big.frames = 60000;
    EXPECT_NO_THROW(big.validate());
}

TEST(Dataset, Errors) {
    TempDir dir("err");
    auto cfg = small_config(2, 1);
    EXPECT_THROW(generate_dataset(sheet(), cfg, "/proc/deepsft_cannot_write"), IoError);
    fs::create_directories(dir / "empty_bg");
    cfg.background_dir = (dir / "empty_bg").string();
    EXPECT_THROW(generate_dataset(sheet(), cfg, dir / "out"), ConfigError);
    cfg.background_dir = (dir / "missing_bg").string();
    EXPECT_THROW(generate_dataset(sheet(), cfg, dir / "out2"), IoError);
}

TEST(Dataset, UserBackgrounds) {
    TempDir dir("bg");
    fs::create_directories(dir / "bg");
    io::write_rgb(dir / "bg/one.png", Image(50, 80, 3, 0.25f));
    auto cfg = small_config(2, 4);
    cfg.background_dir = (dir / "bg").string();
    const auto m = generate_dataset(sheet(), cfg, dir / "out");
    const auto f = load_frame(m, 0);
    EXPECT_NEAR(f.rgb.at(0, 0, 0), 0.25f, 1.0f / 255.0f);
}

TEST(Ingest, SyntheticRoundTripWithinQuantization) {
    TempDir dir("rt");
    const auto m = generate_dataset(sheet(), small_config(4, 5), dir / "syn");
    for (const auto& [unit, format, tol] :
         {std::tuple{"mm", "png", 0.5 + 1e-3}, std::tuple{"m", "tiff", 1e-3}, std::tuple{"mm", "tiff", 1e-4}}) {
        const auto rgbd = dir / (std::string("rgbd_") + unit + format);
        export_rgbd(m, rgbd, {unit, format});
        const auto real = ingest_rgbd(rgbd, dir / (std::string("real_") + unit + format));
        EXPECT_FALSE(real.has_warp());
        EXPECT_EQ(real.source, "real");
        ASSERT_EQ(real.frames.size(), m.frames.size());
        for (std::size_t i = 0; i < m.frames.size(); ++i) {
            const auto a = load_frame(m, i);
            const auto b = load_frame(real, i);
            EXPECT_FALSE(b.warp.has_value());
            EXPECT_EQ(a.depth.mask(), b.depth.mask());
            for (int y = 0; y < 270; ++y)
                for (int x = 0; x < 480; ++x)
                    if (a.depth.mask(y, x)) ASSERT_NEAR(a.depth.value(y, x), b.depth.value(y, x), tol);
            for (std::size_t k = 0; k < a.rgb.size(); ++k) ASSERT_EQ(a.rgb.values()[k], b.rgb.values()[k]);
        }
    }
    EXPECT_THROW(export_rgbd(m, dir / "bad", {"m", "png"}), ConfigError);
}

TEST(Ingest, ResizesAndHandlesInvalidDepth) {
    TempDir dir("ing");
    const auto in = dir / "in";
    fs::create_directories(in);
    const geometry::PerspectiveCamera cam{1000.0, 1000.0, 480.0, 270.0, 960, 540};
    io::write_camera(in / "camera.json", cam);
    io::write_rgb(in / "a.rgb.png", Image(540, 960, 3, 0.5f));
    cv::Mat d(540, 960, CV_32FC1, cv::Scalar(0.75f));  // meters
    d(cv::Rect(0, 0, 2, 2)) = 0.0f;
    d(cv::Rect(8, 8, 6, 6)) = 3.0f;  // beyond z_max
    cv::imwrite((in / "a.depth.tiff").string(), d);
    io::write_rgb(in / "b.rgb.png", Image(540, 960, 3, 0.1f));
    cv::imwrite((in / "b.depth.tiff").string(), cv::Mat(540, 960, CV_32FC1, cv::Scalar(0.0f)));

    IngestOptions o;
    o.depth_unit = "m";
    o.val_fraction = o.test_fraction = 0.0;
    const auto m = ingest_rgbd(in, dir / "out", o);
    ASSERT_EQ(m.frames.size(), 2u);
    EXPECT_DOUBLE_EQ(m.camera.fu, 500.0);
    EXPECT_EQ(m.camera.width, 480);
    const auto a = load_frame(m, 0);
    EXPECT_NEAR(a.depth.value(100, 100), 750.0, 1e-3);
    EXPECT_FALSE(a.depth.mask(0, 0));
    EXPECT_FALSE(a.depth.mask(5, 5));
    EXPECT_FALSE(m.frames[0].warnings.empty());
    EXPECT_EQ(m.frames[1].foreground, 0u);
    EXPECT_FALSE(m.frames[1].warnings.empty());

    io::write_rgb(in / "c.rgb.png", Image(540, 960, 3, 0.1f));
    EXPECT_THROW(ingest_rgbd(in, dir / "out2", o), ConfigError);
    fs::remove(in / "c.rgb.png");
    cv::imwrite((in / "b.depth.png").string(), cv::Mat(540, 960, CV_8UC3, cv::Scalar(1, 2, 3)));
    fs::remove(in / "b.depth.tiff");
    EXPECT_THROW(ingest_rgbd(in, dir / "out3", o), ConfigError);
}
