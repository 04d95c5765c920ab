// Python bindings. Images cross the boundary as float32 arrays shaped
// (h, w), (c, h, w) or (n, c, h, w); results come back as (n, c, h, w).

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "b2u/checkpoint.hpp"
#include "b2u/error.hpp"
#include "b2u/image_io.hpp"
#include "b2u/infer.hpp"
#include "b2u/mapper.hpp"
#include "b2u/masking.hpp"
#include "b2u/metrics.hpp"
#include "b2u/noise.hpp"
#include "b2u/objective.hpp"
#include "b2u/run_config.hpp"
#include "b2u/textures.hpp"
#include "b2u/trainer.hpp"

namespace py = pybind11;

namespace {

using Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

b2u::Tensor to_tensor(const Array& a) {
    b2u::Shape s{1, 1, 1, 1};
    switch (a.ndim()) {
        case 2: s = {1, 1, static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1))}; break;
        case 3: s = {1, static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2))}; break;
        case 4:
            s = {static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)),
                 static_cast<int>(a.shape(3))};
            break;
        default: throw b2u::ShapeError("ndim", "expected a 2-, 3- or 4-d array, got " + std::to_string(a.ndim()) + "-d");
    }
    return b2u::Tensor(s, std::vector<float>(a.data(), a.data() + a.size()));
}

Array to_array(const b2u::Tensor& t) {
    const b2u::Shape s = t.shape();
    Array out({s.n, s.c, s.h, s.w});
    std::memcpy(out.mutable_data(), t.ptr(), t.numel() * sizeof(float));
    return out;
}

b2u::TrainerConfig config_from(const std::string& text, const py::dict& overrides) {
    b2u::TrainerConfig c = b2u::parse_run_config(text);
    for (const auto& [k, v] : overrides) b2u::apply_setting(c, py::str(k).cast<std::string>(), py::str(v).cast<std::string>());
    return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Blind-spot self-supervised image denoiser: masking, mapping, objective, training and evaluation.";

    auto base = py::register_exception<b2u::Error>(m, "Error");
    py::register_exception<b2u::ShapeError>(m, "ShapeError", base);
    py::register_exception<b2u::ValueError>(m, "ValueError", base);
    py::register_exception<b2u::ConfigError>(m, "ConfigError", base);
    py::register_exception<b2u::FormatError>(m, "FormatError", base);
    py::register_exception<b2u::IoError>(m, "IoError", base);

    m.def("interpolate_neighbors", [](const Array& x) { return to_array(b2u::interpolate_neighbors(to_tensor(x))); },
          py::arg("image"), "Mean of the in-bounds 3x3 neighbours of each pixel, centre excluded.");
    m.def(
        "masked_volume",
        [](const Array& x, int s) { return to_array(b2u::make_global_masked_volume(to_tensor(x), {s}).stacked()); },
        py::arg("image"), py::arg("grid_s") = 2, "The s*s masked copies of one image, stacked on the first axis.");
    m.def(
        "map_blind_spots",
        [](const Array& volume, int s) {
            const b2u::Tensor v = to_tensor(volume);
            std::vector<b2u::Tensor> layers;
            for (int l = 0; l < v.shape().n; ++l) layers.push_back(v.batch_slice(l, 1));
            return to_array(b2u::map_blind_spots(layers, {s}).image);
        },
        py::arg("volume"), py::arg("grid_s") = 2, "Each pixel taken from the layer in which it was hidden.");

    m.def("lambda_at", [](int epoch, int total_epochs, double lambda_s, double lambda_f) {
        b2u::LossConfig c;
        c.total_epochs = total_epochs;
        c.lambda_s = lambda_s;
        c.lambda_f = lambda_f;
        return b2u::lambda_at(c, epoch);
    }, py::arg("epoch"), py::arg("total_epochs") = 100, py::arg("lambda_s") = 2.0, py::arg("lambda_f") = 20.0);
    m.def("lr_at_epoch", &b2u::lr_at_epoch, py::arg("lr0"), py::arg("epoch"));
    m.def(
        "revisible_loss",
        [](const Array& blind, const Array& visible, const Array& target, double lambda, double eta) {
            const auto r = b2u::revisible_loss_value(to_tensor(blind), to_tensor(visible), to_tensor(target), lambda, eta);
            return py::dict(py::arg("total") = r.total_value, py::arg("rev") = r.rev_value, py::arg("reg") = r.reg_value);
        },
        py::arg("blind"), py::arg("visible"), py::arg("target"), py::arg("lam"), py::arg("eta") = 1.0);
    m.def("casewise_expansion", [](const Array& b, const Array& v, const Array& t, double lambda) {
        return b2u::casewise_expansion(to_tensor(b), to_tensor(v), to_tensor(t), lambda);
    }, py::arg("blind"), py::arg("visible"), py::arg("target"), py::arg("lam"));
    m.def("weighted_combination", [](const Array& b, const Array& v, double lambda) {
        return to_array(b2u::weighted_combination(to_tensor(b), to_tensor(v), lambda));
    }, py::arg("blind"), py::arg("visible"), py::arg("lam"));

    m.def(
        "corrupt",
        [](const Array& clean, const std::string& spec, std::uint64_t seed) {
            const auto r = b2u::corrupt(to_tensor(clean), b2u::NoiseSpec::parse(spec), seed);
            return py::make_tuple(to_array(r.noisy), r.parameter);
        },
        py::arg("clean"), py::arg("noise") = "gauss25", py::arg("seed") = 0,
        "Returns (noisy, drawn sigma or rate). Noise grammar: gauss25, gauss5_50, poisson30, poisson5_50.");
    m.def("psnr", [](const Array& ref, const Array& test) { return b2u::psnr(to_tensor(ref), to_tensor(test)); },
          py::arg("reference"), py::arg("test"));
    m.def("ssim", [](const Array& ref, const Array& test) { return b2u::ssim(to_tensor(ref), to_tensor(test)); },
          py::arg("reference"), py::arg("test"));

    m.def("read_image", [](const std::filesystem::path& p) { return to_array(b2u::read_image(p).pixels); }, py::arg("path"));
    m.def("write_image", [](const std::filesystem::path& p, const Array& x, int bit_depth) {
        b2u::write_image(p, b2u::ImageFile{to_tensor(x), bit_depth});
    }, py::arg("path"), py::arg("image"), py::arg("bit_depth") = 8);
    m.def("make_texture", [](int h, int w, int c, std::uint64_t seed) { return to_array(b2u::make_texture(h, w, c, seed)); },
          py::arg("height"), py::arg("width"), py::arg("channels") = 1, py::arg("seed") = 0);

    py::class_<b2u::Checkpoint>(m, "Checkpoint")
        .def_readonly("epoch", &b2u::Checkpoint::epoch)
        .def_property_readonly("in_channels", [](const b2u::Checkpoint& c) { return c.net_config.in_channels; })
        .def_property_readonly("base_channels", [](const b2u::Checkpoint& c) { return c.net_config.base_channels; })
        .def_property_readonly("depth", [](const b2u::Checkpoint& c) { return c.net_config.depth; })
        .def_property_readonly("digest", [](const b2u::Checkpoint& c) { return b2u::checkpoint_digest(c); })
        .def_property_readonly("parameter_count", [](const b2u::Checkpoint& c) { return b2u::parameter_count(c.params); })
        .def("save", [](const b2u::Checkpoint& c, const std::filesystem::path& p) { b2u::save_checkpoint(p, c); }, py::arg("path"))
        .def("to_bytes", [](const b2u::Checkpoint& c) {
            const auto b = b2u::serialize_checkpoint(c);
            return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
        })
        .def_static("from_bytes", [](const py::bytes& data) {
            const std::string s = data;
            return b2u::deserialize_checkpoint(std::vector<std::uint8_t>(s.begin(), s.end()));
        })
        .def_static("load", &b2u::load_checkpoint, py::arg("path"));

    m.def(
        "train",
        [](const std::vector<Array>& images, const std::string& config_text, const py::dict& overrides,
           const std::filesystem::path& out_dir) {
            std::vector<b2u::Tensor> clean;
            for (const auto& a : images) clean.push_back(to_tensor(a));
            b2u::TrainOptions opt;
            opt.out_dir = out_dir;
            const b2u::TrainerConfig cfg = config_from(config_text, overrides);
            py::gil_scoped_release release;
            return b2u::train(clean, cfg, opt);
        },
        py::arg("images"), py::arg("config") = "", py::arg("overrides") = py::dict(), py::arg("out_dir") = "",
        "Train on clean images corrupted on the fly. `config` holds 'key = value' lines; "
        "`overrides` maps the same keys to values.");
    m.def("default_config", [] { return b2u::TrainerConfig{}.canonical(); });

    m.def(
        "denoise",
        [](const b2u::Checkpoint& ckpt, const Array& noisy, const std::string& mode, double lambda, int grid_s) {
            b2u::EvalConfig c;
            c.mode = b2u::parse_infer_mode(mode);
            c.lambda = lambda;
            c.grid_s = grid_s;
            return to_array(b2u::denoise(ckpt, to_tensor(noisy), c));
        },
        py::arg("checkpoint"), py::arg("noisy"), py::arg("mode") = "direct", py::arg("lam") = 20.0, py::arg("grid_s") = 2);
    m.def(
        "evaluate",
        [](const b2u::Checkpoint& ckpt, const std::vector<Array>& clean, const std::string& noise, std::uint64_t seed,
           int repeats, const std::string& mode) {
            b2u::EvalConfig c;
            c.noise = b2u::NoiseSpec::parse(noise);
            c.seed = seed;
            c.repeats = repeats;
            c.mode = b2u::parse_infer_mode(mode);
            std::vector<b2u::NamedImage> images;
            for (std::size_t i = 0; i < clean.size(); ++i) images.push_back({"image" + std::to_string(i), to_tensor(clean[i])});
            const auto r = b2u::evaluate(ckpt, images, c);
            return py::dict(py::arg("mean_psnr") = r.mean_psnr, py::arg("mean_ssim") = r.mean_ssim,
                            py::arg("mean_noisy_psnr") = r.mean_noisy_psnr, py::arg("report") = r.tsv());
        },
        py::arg("checkpoint"), py::arg("clean"), py::arg("noise") = "gauss25", py::arg("seed") = 0, py::arg("repeats") = 1,
        py::arg("mode") = "direct");
}
