#include "deepsft/io/raster_io.hpp"

#include <fstream>
#include <sstream>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "deepsft/error.hpp"

namespace deepsft::io {

namespace {

cv::Mat single_channel_mat(const Grid<float>& grid, int channel) {
    cv::Mat m(grid.height(), grid.width(), CV_32FC1);
    for (int y = 0; y < grid.height(); ++y) {
        auto* row = m.ptr<float>(y);
        for (int x = 0; x < grid.width(); ++x) {
            row[x] = grid.at(y, x, channel);
        }
    }
    return m;
}

void ensure_written(bool ok, const std::filesystem::path& path) {
    if (!ok) {
        throw IoError("cannot write " + path.string());
    }
}

cv::Mat read_unchanged(const std::filesystem::path& path) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (m.empty()) {
        throw IoError("cannot read image " + path.string());
    }
    return m;
}

}  // namespace

Image read_rgb(const std::filesystem::path& path) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (m.empty()) {
        throw IoError("cannot read image " + path.string());
    }
    Image img(m.rows, m.cols, 3);
    for (int y = 0; y < m.rows; ++y) {
        const auto* row = m.ptr<cv::Vec3b>(y);
        for (int x = 0; x < m.cols; ++x) {
            for (int c = 0; c < 3; ++c) {
                img.at(y, x, c) = static_cast<float>(row[x][2 - c]) / 255.0f;
            }
        }
    }
    return img;
}

void write_rgb(const std::filesystem::path& path, const Image& image) {
    if (image.channels() != 3) {
        throw ShapeError("write_rgb expects a 3-channel image");
    }
    cv::Mat m(image.height(), image.width(), CV_8UC3);
    for (int y = 0; y < image.height(); ++y) {
        auto* row = m.ptr<cv::Vec3b>(y);
        for (int x = 0; x < image.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                row[x][2 - c] = cv::saturate_cast<unsigned char>(image.at(y, x, c) * 255.0f);
            }
        }
    }
    ensure_written(cv::imwrite(path.string(), m), path);
}

Grid<float> read_float_raster(const std::filesystem::path& path) {
    cv::Mat m = read_unchanged(path);
    if (m.type() != CV_32FC1) {
        throw IoError(path.string() + " is not a single-channel 32-bit float raster");
    }
    Grid<float> grid(m.rows, m.cols, 1);
    for (int y = 0; y < m.rows; ++y) {
        const auto* row = m.ptr<float>(y);
        for (int x = 0; x < m.cols; ++x) {
            grid.at(y, x) = row[x];
        }
    }
    return grid;
}

void write_float_raster(const std::filesystem::path& path, const Grid<float>& grid) {
    if (grid.channels() != 1) {
        throw ShapeError("write_float_raster expects a single-channel grid");
    }
    ensure_written(cv::imwrite(path.string(), single_channel_mat(grid, 0)), path);
}

geometry::DepthMap read_depth(const std::filesystem::path& path) {
    return geometry::DepthMap::from_values(read_float_raster(path));
}

void write_depth(const std::filesystem::path& path, const geometry::DepthMap& depth) {
    write_float_raster(path, depth.values());
}

geometry::WarpField read_warp(const std::filesystem::path& path) {
    std::vector<cv::Mat> pages;
    if (!cv::imreadmulti(path.string(), pages, cv::IMREAD_UNCHANGED) || pages.size() != 2) {
        throw IoError("cannot read two-page warp raster " + path.string());
    }
    const cv::Mat& u = pages[0];
    const cv::Mat& v = pages[1];
    if (u.type() != CV_32FC1 || v.type() != CV_32FC1 || u.size() != v.size()) {
        throw IoError(path.string() + " is not a two-page 32-bit float raster");
    }
    geometry::WarpField warp(u.rows, u.cols);
    for (int y = 0; y < u.rows; ++y) {
        for (int x = 0; x < u.cols; ++x) {
            const float a = u.at<float>(y, x);
            const float b = v.at<float>(y, x);
            if (a >= 0.0f && a <= 1.0f && b >= 0.0f && b <= 1.0f) {
                warp.set(y, x, a, b);
            }
        }
    }
    return warp;
}

void write_warp(const std::filesystem::path& path, const geometry::WarpField& warp) {
    std::vector<cv::Mat> pages{single_channel_mat(warp.values(), 0), single_channel_mat(warp.values(), 1)};
    ensure_written(cv::imwritemulti(path.string(), pages), path);
}

Mask read_mask(const std::filesystem::path& path) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
    if (m.empty()) {
        throw IoError("cannot read mask " + path.string());
    }
    Mask mask(m.rows, m.cols);
    for (int y = 0; y < m.rows; ++y) {
        for (int x = 0; x < m.cols; ++x) {
            mask.at(y, x) = m.at<unsigned char>(y, x) > 127 ? 1 : 0;
        }
    }
    return mask;
}

void write_mask(const std::filesystem::path& path, const Mask& mask) {
    cv::Mat m(mask.height(), mask.width(), CV_8UC1);
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            m.at<unsigned char>(y, x) = mask.at(y, x) ? 255 : 0;
        }
    }
    ensure_written(cv::imwrite(path.string(), m), path);
}

void write_ply(const std::filesystem::path& path, std::span<const Eigen::Vector3d> points,
               std::span<const Eigen::Vector3f> colors) {
    if (!colors.empty() && colors.size() != points.size()) {
        throw ShapeError("write_ply: colour count differs from point count");
    }
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << "ply\nformat ascii 1.0\nelement vertex " << points.size()
        << "\nproperty float x\nproperty float y\nproperty float z\n";
    if (!colors.empty()) {
        out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    }
    out << "end_header\n";
    out.precision(9);
    for (std::size_t i = 0; i < points.size(); ++i) {
        out << points[i].x() << ' ' << points[i].y() << ' ' << points[i].z();
        if (!colors.empty()) {
            for (int c = 0; c < 3; ++c) {
                out << ' ' << static_cast<int>(cv::saturate_cast<unsigned char>(colors[i][c] * 255.0f + 0.5f));
            }
        }
        out << '\n';
    }
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

std::vector<Eigen::Vector3d> read_ply_points(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::string line;
    std::size_t count = 0;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        if (word == "element") {
            std::string kind;
            ss >> kind >> count;
        } else if (word == "end_header") {
            break;
        }
    }
    std::vector<Eigen::Vector3d> points;
    points.reserve(count);
    for (std::size_t i = 0; i < count && std::getline(in, line); ++i) {
        std::istringstream ss(line);
        Eigen::Vector3d p;
        ss >> p.x() >> p.y() >> p.z();
        points.push_back(p);
    }
    if (points.size() != count) {
        throw IoError("truncated PLY file " + path.string());
    }
    return points;
}

}  // namespace deepsft::io
