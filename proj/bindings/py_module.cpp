// Python bindings for the main operations: scenario sampling, model input
// construction, the analytic oracle, dataset synthesis, training,
// evaluation, prediction, metrics, probe ingestion, and rendering.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "bof/data.hpp"
#include "bof/harness.hpp"
#include "bof/image.hpp"
#include "bof/optim.hpp"

namespace py = pybind11;
using namespace bof;

namespace {

py::array_t<float> field_to_numpy(const scene::Field& f) {
  py::array_t<float> out({f.dim(0), f.dim(1)});
  std::copy(f.data.begin(), f.data.end(), out.mutable_data());
  return out;
}

scene::Field numpy_to_field(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw std::invalid_argument("field arrays must be 2-D [ny, nx]");
  scene::Field f({std::size_t(a.shape(0)), std::size_t(a.shape(1))});
  std::copy(a.data(), a.data() + a.size(), f.data.begin());
  return f;
}

std::vector<scene::Field> numpy_batch(const py::list& arrays) {
  std::vector<scene::Field> out;
  for (const auto& a : arrays)
    out.push_back(numpy_to_field(
        a.cast<py::array_t<float, py::array::c_style | py::array::forcecast>>()));
  return out;
}

scene::GridSpec grid_for_side(std::size_t side) {
  return side == 99 ? scene::GridSpec{} : scene::GridSpec::square(side);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "blast pressure surrogate toolkit";

  py::register_exception<DataError>(m, "DataError");
  py::register_exception<NumericError>(m, "NumericError");

  py::class_<scene::Obstacle>(m, "Obstacle")
      .def(py::init<>())
      .def_readwrite("x_min", &scene::Obstacle::x_min)
      .def_readwrite("x_max", &scene::Obstacle::x_max)
      .def_readwrite("y_min", &scene::Obstacle::y_min)
      .def_readwrite("y_max", &scene::Obstacle::y_max)
      .def_readwrite("z_min", &scene::Obstacle::z_min)
      .def_readwrite("z_max", &scene::Obstacle::z_max);

  py::class_<scene::Charge>(m, "Charge")
      .def(py::init<>())
      .def_readwrite("x", &scene::Charge::x)
      .def_readwrite("y", &scene::Charge::y)
      .def_readwrite("mass", &scene::Charge::mass);

  py::class_<scene::Scenario>(m, "Scenario")
      .def(py::init<>())
      .def_readwrite("charge", &scene::Scenario::charge)
      .def_readwrite("seed", &scene::Scenario::seed)
      .def_property_readonly("obstacles",
                             [](const scene::Scenario& s) {
                               return std::vector<scene::Obstacle>(s.obstacles.begin(),
                                                                   s.obstacles.end());
                             })
      .def("to_json", &scene::scenario_to_json)
      .def_static("from_json", &scene::scenario_from_json);

  py::class_<scene::GridSpec>(m, "GridSpec")
      .def(py::init<>())
      .def_static("square", &scene::GridSpec::square)
      .def_readonly("nx", &scene::GridSpec::nx)
      .def_readonly("ny", &scene::GridSpec::ny)
      .def_readonly("dx", &scene::GridSpec::dx)
      .def_readonly("dy", &scene::GridSpec::dy);

  m.def("sample_scenario", &scene::sample_scenario, py::arg("seed"));
  m.def("box_sdf_footprint", &scene::box_sdf_footprint, py::arg("px"), py::arg("py"),
        py::arg("obstacle"));
  m.def(
      "build_model_input",
      [](const scene::Scenario& s, const scene::GridSpec& g) {
        const scene::InputTensor in = scene::build_model_input(s, g);
        py::array_t<float> values({g.ny, g.nx, std::size_t(4)});
        py::array_t<float> coords({g.ny, g.nx, std::size_t(2)});
        std::copy(in.values.data.begin(), in.values.data.end(), values.mutable_data());
        std::copy(in.coords.data.begin(), in.coords.data.end(), coords.mutable_data());
        return py::make_tuple(values, coords);
      },
      py::arg("scenario"), py::arg("grid"));
  m.def(
      "oracle_pressure",
      [](const scene::Scenario& s, const scene::GridSpec& g) {
        return field_to_numpy(data::oracle_pressure(s, g));
      },
      py::arg("scenario"), py::arg("grid"));

  m.def(
      "generate_dataset",
      [](std::size_t n, std::uint64_t seed, std::size_t grid_side,
         const std::filesystem::path& out) {
        const data::Dataset ds = data::generate_dataset(n, seed, grid_for_side(grid_side));
        data::write_dataset(ds, out);
        const data::SplitCounts c = data::split_counts(n);
        return py::make_tuple(c.train, c.val, c.test);
      },
      py::arg("n"), py::arg("seed"), py::arg("grid_side"), py::arg("out"));

  m.def(
      "train",
      [](const std::string& kind, const std::filesystem::path& data_dir,
         const std::string& config_json, const std::filesystem::path& out) {
        const data::Dataset ds = data::read_dataset(data_dir);
        nlohmann::json cfg = config_json.empty() ? nlohmann::json::object()
                                                 : nlohmann::json::parse(config_json);
        harness::TrainConfig tc = harness::TrainConfig::defaults_for(kind);
        if (cfg.contains("train")) {
          nlohmann::json merged = tc.to_json();
          merged.update(cfg.at("train"));
          tc = harness::TrainConfig::from_json(merged);
        }
        nlohmann::json mc = kind == "blastoformer" ? model::BlastOFormerConfig{}.to_json()
                            : kind == "cnn"        ? model::CnnConfig{}.to_json()
                                                   : model::FnoConfig{}.to_json();
        if (cfg.contains("model")) mc.update(cfg.at("model"));
        auto mdl = harness::build_model(kind, mc, ds.grid);
        const harness::TrainResult r = harness::train_model(*mdl, ds, tc);
        const Checkpoint c =
            harness::make_checkpoint(*mdl, ds.grid, tc.to_json(), ds.norm, &r.best_params);
        write_checkpoint(c, out);
        return py::make_tuple(r.best_val, r.best_epoch, r.history.size());
      },
      py::arg("model"), py::arg("data_dir"), py::arg("config_json"), py::arg("out"),
      "Train a model; returns (best_val_loss, best_epoch, epochs_run).");

  m.def(
      "evaluate",
      [](const std::filesystem::path& ckpt, const std::filesystem::path& data_dir,
         const std::string& split) {
        const Checkpoint c = read_checkpoint(ckpt);
        const data::Dataset ds = data::read_dataset(data_dir);
        const data::Split sp = split == "train" ? data::Split::train
                               : split == "val" ? data::Split::val
                                                : data::Split::test;
        return harness::evaluate(c, ds, sp).to_json().dump();
      },
      py::arg("checkpoint"), py::arg("data_dir"), py::arg("split"),
      "Evaluate a checkpoint; returns the metrics report as a JSON string.");

  m.def(
      "predict",
      [](const std::filesystem::path& ckpt, const std::string& scenario_json) {
        const Checkpoint c = read_checkpoint(ckpt);
        harness::LoadedModel lm = harness::load_model(c);
        data::Sample s;
        s.scenario = scene::scenario_from_json(scenario_json);
        s.input = scene::build_model_input(s.scenario, lm.grid);
        const scene::Field lp = harness::predict_log_field(*lm.model, lm.norm, s);
        return field_to_numpy(lm.unscaler ? lm.unscaler->forward(lp) : data::unlog(lp));
      },
      py::arg("checkpoint"), py::arg("scenario_json"),
      "Predict the maximum-pressure field (Pa) for one scenario.");

  m.def(
      "benchmark_inference",
      [](const std::filesystem::path& ckpt, std::size_t runs) {
        const Checkpoint c = read_checkpoint(ckpt);
        return harness::benchmark_inference(c, grid_from_json(c.config.at("grid")), runs);
      },
      py::arg("checkpoint"), py::arg("runs") = 100);

  m.def("metric_r2", [](const py::list& p, const py::list& t) {
    return harness::metric_r2(numpy_batch(p), numpy_batch(t));
  });
  m.def("metric_mae", [](const py::list& p, const py::list& t) {
    return harness::metric_mae(numpy_batch(p), numpy_batch(t));
  });
  m.def("metric_mape", [](const py::list& p, const py::list& t) {
    return harness::metric_mape(numpy_batch(p), numpy_batch(t));
  });
  m.def("error_map", [](const py::array_t<float>& p, const py::array_t<float>& t) {
    return field_to_numpy(harness::error_map(numpy_to_field(p), numpy_to_field(t)));
  });

  m.def(
      "parse_probe_file",
      [](const std::string& text, std::size_t grid_side) {
        return field_to_numpy(data::parse_probe_file(text, grid_for_side(grid_side)));
      },
      py::arg("text"), py::arg("grid_side") = 99);

  m.def(
      "render_map",
      [](const py::array_t<float>& f, const std::string& colormap,
         const std::filesystem::path& out) {
        harness::render_map(numpy_to_field(f), harness::colormap_from_name(colormap), out);
      },
      py::arg("field"), py::arg("colormap"), py::arg("out"));

  m.def("emit_case", &data::emit_case, py::arg("scenario"), py::arg("dir"));
  m.def("cosine_lr", &cosine_lr, py::arg("step"), py::arg("total"), py::arg("lr_max"),
        py::arg("lr_min"));

  m.attr("__version__") = "0.1.0";
}
