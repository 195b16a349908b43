#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>
#include <unistd.h>

#include "deepsft/datagen/scene.hpp"
#include "deepsft/geometry/camera.hpp"
#include "deepsft/geometry/template.hpp"

namespace deepsft::testing {

// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("deepsft_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// Undeformed template placed fronto-parallel at depth z0 under plain lighting.
inline std::shared_ptr<datagen::SceneSample> planar_scene(const geometry::Template& tmpl,
                                                          const geometry::PerspectiveCamera& camera, double z0) {
    auto s = std::make_shared<datagen::SceneSample>();
    s->deformation = datagen::rest_sample(tmpl);
    s->pose.translation = {0.0, 0.0, z0};
    s->lights = {datagen::Light{}};
    s->background = Image(camera.height, camera.width, 3, 0.5f);
    return s;
}

}  // namespace deepsft::testing
