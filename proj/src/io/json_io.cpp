#include "deepsft/io/json_io.hpp"

#include <cstdio>
#include <fstream>

#include "deepsft/error.hpp"

namespace deepsft::geometry {

void to_json(nlohmann::json& j, const PerspectiveCamera& camera) {
    j = {{"fu", camera.fu}, {"fv", camera.fv}, {"cu", camera.cu},
         {"cv", camera.cv}, {"width", camera.width}, {"height", camera.height}};
}

void from_json(const nlohmann::json& j, PerspectiveCamera& camera) {
    camera.fu = j.at("fu").get<double>();
    camera.fv = j.at("fv").get<double>();
    camera.cu = j.at("cu").get<double>();
    camera.cv = j.at("cv").get<double>();
    camera.width = j.at("width").get<int>();
    camera.height = j.at("height").get<int>();
}

void to_json(nlohmann::json& j, const NormalizationSpec& spec) {
    j = {{"z_min", spec.z_min},
         {"z_max", spec.z_max},
         {"valid_low", spec.valid_low},
         {"background_value", spec.background_value}};
}

void from_json(const nlohmann::json& j, NormalizationSpec& spec) {
    spec.z_min = j.at("z_min").get<double>();
    spec.z_max = j.at("z_max").get<double>();
    spec.valid_low = j.value("valid_low", -0.9);
    spec.background_value = j.value("background_value", -1.0);
}

}  // namespace deepsft::geometry

namespace deepsft::io {

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& value) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << value.dump(2) << '\n';
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

geometry::PerspectiveCamera read_camera(const std::filesystem::path& path) {
    try {
        auto camera = read_json(path).get<geometry::PerspectiveCamera>();
        camera.validate();
        return camera;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("invalid camera file " + path.string() + ": " + e.what());
    }
}

void write_camera(const std::filesystem::path& path, const geometry::PerspectiveCamera& camera) {
    write_json(path, nlohmann::json(camera));
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string fnv1a_hex(std::string_view bytes) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
    return buf;
}

}  // namespace deepsft::io
