// Python bindings: numpy arrays in, numpy arrays out. Configs and reports
// cross the boundary as JSON text; the package wrapper turns them into dicts.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "deepsft/datagen/dataset.hpp"
#include "deepsft/error.hpp"
#include "deepsft/eval/benchmark.hpp"
#include "deepsft/eval/metrics.hpp"
#include "deepsft/geometry/builtin_templates.hpp"
#include "deepsft/inference/adaptation.hpp"
#include "deepsft/inference/reconstruct.hpp"
#include "deepsft/io/json_io.hpp"
#include "deepsft/io/template_io.hpp"
#include "deepsft/model/checkpoint.hpp"
#include "deepsft/training/trainer.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace deepsft;
using nlohmann::json;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Grid<float> to_grid(const FloatArray& a) {
    if (a.ndim() != 2 && a.ndim() != 3) throw ShapeError("expected an (h, w) or (h, w, c) array");
    const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
    Grid<float> g(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), c);
    std::copy(a.data(), a.data() + g.size(), g.data());
    return g;
}

template <class T>
py::array_t<T> to_array(const Grid<T>& g, bool squeeze = true) {
    std::vector<py::ssize_t> shape{g.height(), g.width()};
    if (!squeeze || g.channels() > 1) shape.push_back(g.channels());
    py::array_t<T> a(shape);
    std::copy(g.data(), g.data() + g.size(), a.mutable_data());
    return a;
}

Mask to_mask(const py::array_t<bool, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw ShapeError("expected an (h, w) boolean mask");
    Mask m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = a.data()[i] ? 1 : 0;
    return m;
}

py::array_t<bool> mask_array(const Mask& m) {
    py::array_t<bool> a({m.height(), m.width()});
    for (std::size_t i = 0; i < m.size(); ++i) a.mutable_data()[i] = m.data()[i] != 0;
    return a;
}

// background is 0 mm
geometry::DepthMap depth_map(const FloatArray& a) { return geometry::DepthMap::from_values(to_grid(a)); }

// background is any pixel with a coordinate outside [0, 1]
geometry::WarpField warp_field(const FloatArray& a) {
    const auto g = to_grid(a);
    if (g.channels() != 2) throw ShapeError("expected an (h, w, 2) warp array");
    geometry::WarpField w(g.height(), g.width());
    for (int y = 0; y < g.height(); ++y)
        for (int x = 0; x < g.width(); ++x) {
            const float u = g.at(y, x, 0), v = g.at(y, x, 1);
            if (u >= 0.f && u <= 1.f && v >= 0.f && v <= 1.f) w.set(y, x, u, v);
        }
    return w;
}

geometry::PerspectiveCamera camera_from(const std::string& text) {
    return json::parse(text).get<geometry::PerspectiveCamera>();
}

std::string camera_text(const geometry::PerspectiveCamera& c) { return json(c).dump(); }

std::string loss_text(const training::LossReport& l) {
    return json{{"L1", l.l1}, {"L2", l.l2}, {"total", l.total}, {"L2_first", l.l2_first}, {"samples", l.samples}}
        .dump();
}

std::string train_result_text(const training::TrainResult& r) {
    json epochs = json::array();
    for (const auto& e : r.epochs) {
        epochs.push_back({{"epoch", e.epoch}, {"steps", e.steps}, {"mean", json::parse(loss_text(e.mean))}});
    }
    json steps = json::array();
    for (const auto& s : r.steps) {
        steps.push_back({{"stage", s.stage}, {"epoch", s.epoch}, {"step", s.step}, {"loss", json::parse(loss_text(s.loss))}});
    }
    return json{{"epochs", epochs},
                {"steps", steps},
                {"history", r.history},
                {"main_hash_before", r.main_hash_before},
                {"main_hash_after", r.main_hash_after},
                {"warnings", r.warnings}}
        .dump();
}

// A model together with the normalization and stage history that travel with it.
struct PyModel {
    model::DeepSfTModel net{nullptr};
    geometry::NormalizationSpec normalization;
    json history = json::array();
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "deformable surface reconstruction from a single RGB image";

    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<RangeError>(m, "RangeError", PyExc_ValueError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    m.attr("INPUT_HEIGHT") = model::kInputHeight;
    m.attr("INPUT_WIDTH") = model::kInputWidth;
    m.attr("REFERENCE_FPS") = eval::kReferenceFps;

    // geometry
    m.def("kinect_v2_native", [] { return camera_text(geometry::kinect_v2_native()); });
    m.def("realsense_d435_native", [] { return camera_text(geometry::realsense_d435_native()); });
    m.def("default_training_camera", [] { return camera_text(geometry::default_training_camera()); });
    m.def("project_point", [](double x, double y, double z, const std::string& camera) {
        const auto p = geometry::project_point({x, y, z}, camera_from(camera));
        return std::pair{p.x(), p.y()};
    });
    m.def("embed", [](double u, double v, double rho) {
        const auto p = geometry::embed(u, v, rho);
        return std::tuple{p.x(), p.y(), p.z()};
    });
    m.def("write_template", [](const std::string& kind, const fs::path& out) {
        if (kind == "sheet") return io::save_template(out, geometry::make_sheet_template());
        if (kind == "tube") return io::save_template(out, geometry::make_tube_template());
        throw ConfigError("unknown builtin template '" + kind + "' (sheet | tube)");
    });

    // datagen
    m.def(
        "generate_dataset",
        [](const fs::path& template_dir, const fs::path& out, const std::string& config) {
            const auto c = datagen::dataset_config_from_json(json::parse(config));
            py::gil_scoped_release release;
            return datagen::generate_dataset(io::load_template(template_dir), c, out).to_json().dump();
        },
        py::arg("template_dir"), py::arg("out"), py::arg("config") = "{}");
    m.def("load_manifest", [](const fs::path& dir) { return datagen::DatasetManifest::load(dir).to_json().dump(); });
    m.def("load_frame", [](const fs::path& dir, std::size_t index) {
        const auto man = datagen::DatasetManifest::load(dir);
        const auto f = datagen::load_frame(man, index);
        py::dict d;
        d["rgb"] = to_array(f.rgb);
        d["depth"] = to_array(f.depth.values());
        if (f.warp) d["warp"] = to_array(f.warp->values());
        return d;
    });
    m.def(
        "export_rgbd",
        [](const fs::path& dataset, const fs::path& out, const std::string& unit, const std::string& format) {
            datagen::export_rgbd(datagen::DatasetManifest::load(dataset), out, {unit, format});
        },
        py::arg("dataset"), py::arg("out"), py::arg("depth_unit") = "mm", py::arg("depth_format") = "png");
    m.def(
        "ingest_rgbd",
        [](const fs::path& input, const fs::path& out, double val_fraction, double test_fraction) {
            datagen::IngestOptions o;
            o.val_fraction = val_fraction;
            o.test_fraction = test_fraction;
            return datagen::ingest_rgbd(input, out, o).to_json().dump();
        },
        py::arg("input"), py::arg("out"), py::arg("val_fraction") = 0.1, py::arg("test_fraction") = 0.1);

    // model
    py::class_<PyModel>(m, "Model")
        .def(py::init([](std::uint64_t seed, int channel_divisor) {
                 return PyModel{model::build_model({"glorot_uniform", seed}, {channel_divisor})};
             }),
             py::arg("seed") = 0, py::arg("channel_divisor") = 1)
        .def_static("load",
                    [](const fs::path& path) {
                        auto c = model::load_checkpoint(path);
                        return PyModel{c.model, c.normalization, c.history};
                    })
        .def("save", [](PyModel& self, const fs::path& path) {
            model::save_checkpoint(path, self.net, self.normalization, self.history);
        })
        .def("forward",
             [](PyModel& self, const FloatArray& image) {
                 const auto img = to_grid(image);
                 model::ImageOutput o;
                 {
                     py::gil_scoped_release release;
                     o = model::forward_image(self.net, img);
                 }
                 py::dict d;
                 d["rho_hat"] = to_array(o.rho_hat);
                 d["eta_hat"] = to_array(o.eta_hat);
                 d["rho_refined"] = to_array(o.rho_refined);
                 return d;
             })
        .def("bottleneck_shape",
             [](PyModel& self) {
                 torch::NoGradGuard g;
                 self.net->eval();
                 const auto b = self.net->bottleneck(torch::zeros({1, 3, model::kInputHeight, model::kInputWidth}));
                 return std::tuple{b.size(2), b.size(3), b.size(1)};
             })
        .def("summary", [](PyModel& self) { return model::parameter_summary(self.net).to_text(); })
        .def("parameter_counts",
             [](PyModel& self) {
                 const auto s = model::parameter_summary(self.net);
                 return std::pair{s.main_total, s.adaptation_total};
             })
        .def("main_hash", [](PyModel& self) { return model::module_hash(*self.net->main_block); })
        .def("adaptation_hash", [](PyModel& self) { return model::module_hash(*self.net->adaptation_block); })
        .def_property_readonly("history", [](const PyModel& self) { return self.history.dump(); });

    // training
    m.def(
        "train_stage1",
        [](PyModel& model, const fs::path& dataset, const std::string& config) {
            const auto man = datagen::DatasetManifest::load(dataset);
            const auto c = training::stage1_config_from_json(json::parse(config));
            training::TrainResult r;
            {
                py::gil_scoped_release release;
                r = training::train_stage1(model.net, man, c, model.history);
            }
            model.normalization = man.normalization;
            model.history = r.history;
            return train_result_text(r);
        },
        py::arg("model"), py::arg("dataset"), py::arg("config") = "{}");
    m.def(
        "finetune_stage2",
        [](PyModel& model, const fs::path& dataset, const std::string& config) {
            const auto man = datagen::DatasetManifest::load(dataset);
            const auto c = training::stage2_config_from_json(json::parse(config));
            training::TrainResult r;
            {
                py::gil_scoped_release release;
                r = training::finetune_stage2(model.net, man, c, model.history);
            }
            model.history = r.history;
            return train_result_text(r);
        },
        py::arg("model"), py::arg("dataset"), py::arg("config") = "{}");
    m.def("synthetic_loss", [](PyModel& model, const fs::path& dataset, const std::string& split) {
        const auto man = datagen::DatasetManifest::load(dataset);
        training::FrameLoader loader(man, man.indices(datagen::split_from_string(split)), true);
        return loss_text(training::evaluate_synthetic(model.net, loader));
    });

    // inference
    m.def(
        "reconstruct",
        [](PyModel& model, const FloatArray& image, const std::string& camera) {
            const auto cam = camera.empty() ? geometry::default_training_camera() : camera_from(camera);
            const auto r = inference::infer(model.net, to_grid(image), model.normalization, cam);
            py::array_t<double> points({static_cast<py::ssize_t>(r.points.size()), py::ssize_t{3}});
            for (std::size_t i = 0; i < r.points.size(); ++i)
                for (int k = 0; k < 3; ++k) points.mutable_at(i, k) = r.points[i][k];
            py::dict d;
            d["points"] = points;
            d["mask"] = mask_array(r.segmentation);
            d["depth"] = to_array(r.depth.values());
            d["warp"] = to_array(r.warp.values());
            return d;
        },
        py::arg("model"), py::arg("image"), py::arg("camera") = "");
    m.def(
        "compute_adaptation",
        [](const std::string& source_native, const std::string& new_camera) {
            const auto p = inference::compute_adaptation(camera_from(source_native), camera_from(new_camera));
            return json{{"A", {{p.A(0, 0), p.A(0, 1)}, {p.A(1, 0), p.A(1, 1)}}}, {"t", {p.t.x(), p.t.y()}}}.dump();
        },
        py::arg("source_native"), py::arg("new_camera"));
    m.def(
        "adapt_image",
        [](const FloatArray& image, const std::string& source_native, const std::string& new_camera) {
            const auto p = inference::compute_adaptation(camera_from(source_native), camera_from(new_camera));
            return to_array(inference::adapt_image(to_grid(image), p), image.ndim() != 3);
        },
        py::arg("image"), py::arg("source_native"), py::arg("new_camera"));

    // eval
    m.def("rmse_depth_mm",
          [](const FloatArray& pred, const FloatArray& gt) { return eval::rmse_depth_mm(depth_map(pred), depth_map(gt)).value; });
    m.def(
        "rmse_registration_px",
        [](const FloatArray& pred, const FloatArray& gt, double atlas_to_px) {
            return eval::rmse_registration_px(warp_field(pred), warp_field(gt), atlas_to_px).value;
        },
        py::arg("pred"), py::arg("gt"), py::arg("atlas_to_px"));
    m.def("segmentation_iou", [](const py::array_t<bool, py::array::c_style | py::array::forcecast>& pred,
                                 const py::array_t<bool, py::array::c_style | py::array::forcecast>& gt) {
        return eval::segmentation_iou(to_mask(pred), to_mask(gt));
    });
    m.def(
        "evaluate",
        [](PyModel& model, const fs::path& dataset, const std::string& split, double atlas_to_px) {
            const auto man = datagen::DatasetManifest::load(dataset);
            eval::MetricReport r;
            {
                py::gil_scoped_release release;
                r = eval::evaluate_model(model.net, man, man.indices(datagen::split_from_string(split)), atlas_to_px);
            }
            return r.to_json().dump();
        },
        py::arg("model"), py::arg("dataset"), py::arg("split") = "test", py::arg("atlas_to_px") = 0.0);
    m.def(
        "benchmark",
        [](PyModel& model, int frames, int warmup) {
            std::vector<Image> images;
            torch::manual_seed(0);
            for (int i = 0; i < frames; ++i) {
                images.push_back(model::tensor_to_grid(torch::rand({3, model::kInputHeight, model::kInputWidth})));
            }
            py::gil_scoped_release release;
            return eval::benchmark_throughput(model.net, images, warmup).to_json().dump();
        },
        py::arg("model"), py::arg("frames") = 10, py::arg("warmup") = 2);
}
