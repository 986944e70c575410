#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cli.hpp"
#include "rhyme/checkpoint.hpp"
#include "rhyme/data.hpp"
#include "rhyme/error.hpp"
#include "rhyme/manifold.hpp"
#include "rhyme/metrics.hpp"
#include "rhyme/network.hpp"

namespace py = pybind11;
using namespace rhyme;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

EmbeddingSequence to_sequence(const FloatArray &a) {
  if (a.ndim() != 2) {
    throw ShapeError("embedding array must be 2-D (frames, dim)");
  }
  const auto frames = static_cast<std::size_t>(a.shape(0));
  const auto dim = static_cast<std::size_t>(a.shape(1));
  return EmbeddingSequence(frames, dim, std::vector<float>(a.data(), a.data() + a.size()));
}

FloatArray to_array(const EmbeddingSequence &seq) {
  FloatArray out({seq.frames(), seq.dim()});
  std::copy(seq.values().begin(), seq.values().end(), out.mutable_data());
  return out;
}

metrics::ScoreSet to_scores(const std::vector<double> &scores, const std::vector<int> &labels) {
  if (scores.size() != labels.size()) {
    throw ShapeError("scores and labels differ in length");
  }
  metrics::ScoreSet s;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    s.add(scores[i], labels[i]);
  }
  return s;
}

/// Loaded checkpoint scoring raw arrays in eval mode.
struct Model {
  Checkpoint ckpt;

  double score(const FloatArray &a) const { return predict_score(to_sequence(a), ckpt.params, ckpt.model); }

  py::dict trace(const FloatArray &a) const {
    const ForwardTrace tr = forward(to_sequence(a), ckpt.params, ckpt.model, Mode::eval);
    std::vector<std::string> stages;
    for (Stage s : tr.stages) {
      stages.emplace_back(to_string(s));
    }
    py::dict d;
    d["score"] = tr.y_hat[1];
    d["alpha"] = tr.alpha;
    d["curvature"] = tr.curvature;
    d["used_manifold"] = tr.used_manifold();
    d["stages"] = stages;
    return d;
  }
};

} // namespace

PYBIND11_MODULE(_rhyme, m) {
  m.doc() = "Geometry-aware spoofed-speech detector over pre-extracted embeddings";

  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<ManifestError>(m, "ManifestError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  auto mf = m.def_submodule("manifold", "Poincare ball and sphere maps");
  mf.def("exp_map", &manifold::exp_map, py::arg("v"), py::arg("c"));
  mf.def("log_map", &manifold::log_map, py::arg("x"), py::arg("c"));
  mf.def("project_to_ball", &manifold::project_to_ball, py::arg("x"), py::arg("c"),
         py::arg("margin") = manifold::kDefaultMargin);
  mf.def("sphere_normalize", &manifold::sphere_normalize, py::arg("u"));
  mf.def("stereographic_to_ball", &manifold::stereographic_to_ball, py::arg("x"), py::arg("c"),
         py::arg("shrink") = manifold::kDefaultShrink, py::arg("margin") = manifold::kDefaultMargin);
  mf.def("barycentric_fuse", [](const manifold::Vec &x_h, const manifold::Vec &y_s, double alpha,
                                double c) { return manifold::barycentric_fuse(x_h, y_s, alpha, c); },
         py::arg("x_h"), py::arg("y_s"), py::arg("alpha"), py::arg("c"));

  m.def("compute_eer",
        [](const std::vector<double> &scores, const std::vector<int> &labels) {
          const metrics::EerResult r = metrics::compute_eer(to_scores(scores, labels));
          return py::make_tuple(r.eer_percent, r.threshold);
        },
        py::arg("scores"), py::arg("labels"), "(eer_percent, threshold); label 1 = spoof, higher score = spoof");
  m.def("expected_calibration_error",
        [](const std::vector<double> &scores, const std::vector<int> &labels, std::size_t bins) {
          return metrics::reliability(to_scores(scores, labels), bins).ece;
        },
        py::arg("scores"), py::arg("labels"), py::arg("bins") = 10);

  m.def("read_embedding", [](const std::filesystem::path &p) { return to_array(data::read_embedding(p)); },
        py::arg("path"), "RHYE1 file as a float32 (frames, dim) array");
  m.def("write_embedding",
        [](const std::filesystem::path &p, const FloatArray &a) { data::write_embedding(p, to_sequence(a)); },
        py::arg("path"), py::arg("array"));

  py::class_<Model>(m, "Model")
      .def_static("load", [](const std::filesystem::path &p) { return Model{load_checkpoint(p)}; }, py::arg("path"))
      .def_property_readonly("ablation", [](const Model &self) { return std::string(to_string(self.ckpt.model.ablation)); })
      .def_property_readonly("input_dim", [](const Model &self) { return self.ckpt.model.input_dim; })
      .def_property_readonly("config_json", [](const Model &self) { return to_json(self.ckpt.model).dump(); })
      .def("score", &Model::score, py::arg("embedding"), "Spoof-class probability")
      .def("trace", &Model::trace, py::arg("embedding"));

  m.def("run_cli",
        [](const std::vector<std::string> &args) {
          std::ostringstream out;
          std::ostringstream err;
          int code = 0;
          {
            py::gil_scoped_release release;
            code = cli::run(args, out, err);
          }
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run one command line in-process; returns (exit_code, stdout, stderr)");
}
