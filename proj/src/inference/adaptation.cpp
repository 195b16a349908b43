#include "deepsft/inference/adaptation.hpp"

#include <cmath>

#include "deepsft/error.hpp"

namespace deepsft::inference {

CameraAdaptationParams compute_adaptation(const geometry::PerspectiveCamera& source_native,
                                          const geometry::PerspectiveCamera& new_camera, int width, int height) {
    source_native.validate();
    new_camera.validate();
    CameraAdaptationParams p;
    p.source = source_native.resized(width, height);
    p.new_camera = new_camera;
    const double au = p.source.fu / new_camera.fu;
    const double av = p.source.fv / new_camera.fv;
    p.A = Eigen::Vector2d(au, av).asDiagonal();
    p.t = Eigen::Vector2d(p.source.cu - new_camera.cu * au, p.source.cv - new_camera.cv * av);
    return p;
}

Grid<float> adapt_image(const Grid<float>& image, const CameraAdaptationParams& params) {
    const int w = params.source.width;
    const int h = params.source.height;
    const int ch = image.channels();
    Grid<float> out(h, w, ch, 0.0f);
    auto tap = [&](int y, int x, int c) -> double {
        return (x < 0 || y < 0 || x >= image.width() || y >= image.height()) ? 0.0 : image.at(y, x, c);
    };
    for (int row = 0; row < h; ++row) {
        for (int col = 0; col < w; ++col) {
            const Eigen::Vector2d q = params.inverse(geometry::PerspectiveCamera::pixel_center(row, col));
            // continuous position in index space: pixel centres sit at integers
            const double fx = q.x() - 0.5;
            const double fy = q.y() - 0.5;
            if (fx <= -1.0 || fy <= -1.0 || fx >= image.width() || fy >= image.height()) continue;
            const int x0 = static_cast<int>(std::floor(fx));
            const int y0 = static_cast<int>(std::floor(fy));
            const double tx = fx - x0;
            const double ty = fy - y0;
            for (int c = 0; c < ch; ++c) {
                double v = (1 - ty) * (1 - tx) * tap(y0, x0, c);
                if (tx != 0.0) v += (1 - ty) * tx * tap(y0, x0 + 1, c);
                if (ty != 0.0) v += ty * (1 - tx) * tap(y0 + 1, x0, c);
                if (tx != 0.0 && ty != 0.0) v += ty * tx * tap(y0 + 1, x0 + 1, c);
                out.at(row, col, c) = static_cast<float>(v);
            }
        }
    }
    return out;
}

}  // namespace deepsft::inference
