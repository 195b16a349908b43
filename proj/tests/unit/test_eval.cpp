#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "deepsft/error.hpp"
#include "deepsft/eval/benchmark.hpp"
#include "deepsft/eval/metrics.hpp"

using namespace deepsft;
using namespace deepsft::eval;
using geometry::DepthMap;
using geometry::WarpField;

namespace {

struct Pair {
    DepthMap pd, gd;
    WarpField pw, gw;
    Mask pm, gm;
};

Pair random_pair(std::mt19937_64& rng, int h, int w) {
    std::uniform_real_distribution<double> z(300, 1500), a(0, 1), coin(0, 1);
    Pair p{DepthMap(h, w), DepthMap(h, w), WarpField(h, w), WarpField(h, w), Mask(h, w), Mask(h, w)};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (coin(rng) < 0.7) {
                p.pd.set(y, x, z(rng));
                p.pw.set(y, x, a(rng), a(rng));
                p.pm.at(y, x) = 1;
            }
            if (coin(rng) < 0.7) {
                p.gd.set(y, x, z(rng));
                p.gw.set(y, x, a(rng), a(rng));
                p.gm.at(y, x) = 1;
            }
        }
    }
    return p;
}

// straightforward re-implementations used as oracles
double brute_depth(const DepthMap& a, const DepthMap& b) {
    long double s = 0;
    long n = 0;
    for (int y = 0; y < a.height(); ++y)
        for (int x = 0; x < a.width(); ++x)
            if (a.mask(y, x) && b.mask(y, x)) {
                const long double d = static_cast<long double>(a.value(y, x)) - b.value(y, x);
                s += d * d;
                ++n;
            }
    return static_cast<double>(std::sqrt(s / n));
}

double brute_reg(const WarpField& a, const WarpField& b, double scale) {
    long double s = 0;
    long n = 0;
    for (int y = 0; y < a.height(); ++y)
        for (int x = 0; x < a.width(); ++x)
            if (a.mask(y, x) && b.mask(y, x)) {
                const long double du = (static_cast<long double>(a.uv(y, x).x()) - b.uv(y, x).x()) * scale;
                const long double dv = (static_cast<long double>(a.uv(y, x).y()) - b.uv(y, x).y()) * scale;
                s += du * du + dv * dv;
                ++n;
            }
    return static_cast<double>(std::sqrt(s / n));
}

double brute_iou(const Mask& a, const Mask& b) {
    long i = 0, u = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        i += a.values()[k] && b.values()[k];
        u += a.values()[k] || b.values()[k];
    }
    return u ? static_cast<double>(i) / u : 1.0;
}

}  // namespace

TEST(Metrics, DepthHandCases) {
    DepthMap a(1, 3), b(1, 3);
    a.set(0, 0, 100);
    a.set(0, 1, 200);
    b.set(0, 0, 101);
    b.set(0, 1, 203);
    const auto r = rmse_depth_mm(a, b);
    EXPECT_DOUBLE_EQ(r.value, std::sqrt(5.0));
    EXPECT_NEAR(r.value, 2.2360679775, 1e-10);
    EXPECT_EQ(r.count, 2u);
    a.set(0, 2, 999);  // masked in b: no effect
    EXPECT_DOUBLE_EQ(rmse_depth_mm(a, b).value, std::sqrt(5.0));
    EXPECT_EQ(rmse_depth_mm(a, a).value, 0.0);
    EXPECT_THROW(rmse_depth_mm(a, DepthMap(1, 3)), NumericalError);
    EXPECT_THROW(rmse_depth_mm(a, DepthMap(2, 3)), ShapeError);
}

TEST(Metrics, RegistrationHandCases) {
    WarpField a(1, 2), b(1, 2);
    a.set(0, 0, 0.0, 0.0);
    b.set(0, 0, 0.375, 0.5);
    EXPECT_EQ(rmse_registration_px(a, b, 8.0).value, 5.0);
    WarpField c(1, 1), d(1, 1);
    c.set(0, 0, 0.0, 0.0);
    d.set(0, 0, 0.75, 1.0);
    EXPECT_NEAR(rmse_registration_px(c, d, 4.0).value, 5.0, 1e-12);  // atlas error (3, 4) after scaling
    EXPECT_EQ(rmse_registration_px(a, a, 512).value, 0.0);
    WarpField e(2, 2), f(2, 2);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x) {
            e.set(y, x, 0.125 * x, 0.25 * y);
            f.set(y, x, 0.125 * x + 0.046875, 0.25 * y + 0.0625);
        }
    EXPECT_EQ(rmse_registration_px(e, f, 64).value, 5.0);  // constant offset
    EXPECT_THROW(rmse_registration_px(a, b, 0.0), ConfigError);
    EXPECT_THROW(rmse_registration_px(a, WarpField(1, 2), 1.0), NumericalError);
}

TEST(Metrics, IouHandCases) {
    Mask a(1, 4), b(1, 4);
    EXPECT_EQ(segmentation_iou(a, b), 1.0);
    a.at(0, 0) = a.at(0, 1) = 1;
    b.at(0, 1) = b.at(0, 2) = 1;
    EXPECT_DOUBLE_EQ(segmentation_iou(a, b), 1.0 / 3.0);
    EXPECT_EQ(segmentation_iou(a, a), 1.0);
    Mask c(1, 4);
    c.at(0, 3) = 1;
    EXPECT_EQ(segmentation_iou(a, c), 0.0);
}

TEST(Metrics, OracleEquivalenceProperty) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const auto p = random_pair(rng, 5 + trial % 17, 6 + trial % 23);
        const double scale = 1.0 + trial;
        const double d = rmse_depth_mm(p.pd, p.gd).value;
        const double r = rmse_registration_px(p.pw, p.gw, scale).value;
        const double i = segmentation_iou(p.pm, p.gm);
        EXPECT_NEAR(d, brute_depth(p.pd, p.gd), 1e-9 * d);
        EXPECT_NEAR(r, brute_reg(p.pw, p.gw, scale), 1e-9 * r);
        EXPECT_NEAR(i, brute_iou(p.pm, p.gm), 1e-9 * i);
        // symmetry
        EXPECT_NEAR(d, rmse_depth_mm(p.gd, p.pd).value, 1e-12 * d);
        EXPECT_NEAR(r, rmse_registration_px(p.gw, p.pw, scale).value, 1e-12 * r);
        EXPECT_EQ(i, segmentation_iou(p.gm, p.pm));
        EXPECT_GE(i, 0.0);
        EXPECT_LE(i, 1.0);
    }
}

TEST(Metrics, FrameAndReportAggregation) {
    DepthMap gd(1, 2), pd(1, 2);
    WarpField gw(1, 2), pw(1, 2);
    gd.set(0, 0, 500);
    gw.set(0, 0, 0.5, 0.5);
    pd.set(0, 0, 502);
    pw.set(0, 0, 0.5, 0.5);
    const auto f1 = evaluate_frame("a", pd, pd.mask(), &pw, gd, &gw, 512);
    EXPECT_EQ(*f1.depth_rmse_mm, 2.0);
    EXPECT_EQ(*f1.registration_rmse_px, 0.0);
    EXPECT_EQ(f1.segmentation_iou, 1.0);
    const auto f2 = evaluate_frame("b", DepthMap(1, 2), Mask(1, 2), nullptr, gd, nullptr, 512);
    EXPECT_FALSE(f2.depth_rmse_mm.has_value());
    EXPECT_EQ(f2.segmentation_iou, 0.0);
    auto pd3 = pd;
    pd3.set(0, 0, 506);
    const auto f3 = evaluate_frame("c", pd3, pd3.mask(), nullptr, gd, nullptr, 512);
    const auto report = MetricReport::aggregate({f1, f2, f3});
    EXPECT_EQ(report.frames, 3u);
    EXPECT_DOUBLE_EQ(*report.depth_rmse_mm, 4.0);
    EXPECT_DOUBLE_EQ(*report.registration_rmse_px, 0.0);
    EXPECT_DOUBLE_EQ(report.segmentation_iou, 2.0 / 3.0);
    const auto back = MetricReport::from_json(report.to_json());
    EXPECT_EQ(back.to_json(), report.to_json());
    const auto table = render_comparison_table({{"ours", report}});
    EXPECT_NE(table.find("ours"), std::string::npos);
    EXPECT_NE(table.find("4.00"), std::string::npos);
}

TEST(Metrics, GroundTruthAsPredictionIsPerfect) {
    std::mt19937_64 rng(2);
    const auto p = random_pair(rng, 20, 30);
    const auto f = evaluate_frame("x", p.gd, p.gd.mask(), &p.gw, p.gd, &p.gw, 512);
    EXPECT_EQ(*f.depth_rmse_mm, 0.0);
    EXPECT_EQ(*f.registration_rmse_px, 0.0);
    EXPECT_EQ(f.segmentation_iou, 1.0);
}

TEST(Benchmark, ReportsHardwareAndNeedsTenFrames) {
    auto net = model::build_model({"glorot_uniform", 0}, {8});
    std::vector<Image> frames(10, Image(270, 480, 3, 0.5f));
    EXPECT_THROW(benchmark_throughput(net, std::vector<Image>(9, frames[0])), ConfigError);
    const auto r = benchmark_throughput(net, frames, 1, 2);
    EXPECT_GT(r.fps, 0.0);
    EXPECT_EQ(r.frames, 10);
    EXPECT_EQ(r.batch_size, 2);
    EXPECT_FALSE(r.hardware.empty());
    const auto j = r.to_json();
    EXPECT_EQ(j.at("reference_fps").get<double>(), 20.4);
    EXPECT_TRUE(j.contains("hardware"));
    EXPECT_TRUE(j.contains("batch_size"));
}

TEST(Benchmark, SteadyStateProperty) {
    auto net = model::build_model({"glorot_uniform", 0}, {8});
    std::vector<Image> frames(10, Image(270, 480, 3, 0.25f));
    const auto a = benchmark_throughput(net, frames, 2);
    const auto first = frames;
    frames.insert(frames.end(), first.begin(), first.end());
    const auto b = benchmark_throughput(net, frames, 2);
    EXPECT_LT(std::abs(b.fps - a.fps) / a.fps, 0.2);
}
