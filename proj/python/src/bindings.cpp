#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "helmfluid/datagen.hpp"
#include "helmfluid/diffops.hpp"
#include "helmfluid/error.hpp"
#include "helmfluid/gradcheck_suite.hpp"
#include "helmfluid/helmholtz.hpp"
#include "helmfluid/parallel.hpp"
#include "helmfluid/pipeline.hpp"
#include "helmfluid/spectral_sim.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using nlohmann::json;
using namespace helmfluid;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

GridSpec grid_of(const Array& a, int first_axis, double spacing, bool periodic) {
  if (a.ndim() != first_axis + 2) throw ShapeError("expected a " + std::to_string(first_axis + 2) + "-d array");
  return GridSpec(static_cast<int>(a.shape(first_axis)), static_cast<int>(a.shape(first_axis + 1)), spacing,
                  periodic ? BoundaryMode::periodic : BoundaryMode::replicate);
}

ScalarField2D scalar_in(const Array& a, double spacing, bool periodic) {
  const auto g = grid_of(a, 0, spacing, periodic);
  return ScalarField2D(g, std::vector<double>(a.data(), a.data() + g.size()));
}

VectorField2D vector_in(const Array& a, double spacing, bool periodic) {
  const auto g = grid_of(a, 1, spacing, periodic);
  if (a.shape(0) != 2) throw ShapeError("expected a (2, H, W) vector field");
  return VectorField2D(g, std::vector<double>(a.data(), a.data() + g.size()),
                       std::vector<double>(a.data() + g.size(), a.data() + 2 * g.size()));
}

Array scalar_out(const ScalarField2D& f) {
  Array out({f.grid().height, f.grid().width});
  std::copy(f.data().begin(), f.data().end(), out.mutable_data());
  return out;
}

Array vector_out(const VectorField2D& f) {
  const auto n = f.grid().size();
  Array out({2, f.grid().height, f.grid().width});
  std::copy(f.u().begin(), f.u().end(), out.mutable_data());
  std::copy(f.v().begin(), f.v().end(), out.mutable_data() + n);
  return out;
}

std::vector<std::vector<double>> frames_in(const Array& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw ShapeError("expected (H, W) or (T, H, W)");
  const std::size_t t = a.ndim() == 3 ? a.shape(0) : 1;
  const std::size_t n = a.size() / t;
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < t; ++i) out.emplace_back(a.data() + i * n, a.data() + (i + 1) * n);
  return out;
}

std::vector<std::uint8_t> mask_in(const std::optional<Array>& m) {
  if (!m) return {};
  std::vector<std::uint8_t> out(m->size());
  for (py::ssize_t i = 0; i < m->size(); ++i) out[i] = m->data()[i] > 0.5;
  return out;
}

pipeline::SequenceScore score(const Array& pred, const Array& truth, const std::optional<Array>& mask) {
  const auto m = mask_in(mask);
  return pipeline::score_sequence(frames_in(pred), frames_in(truth), m);
}

std::optional<SplitCounts> splits(const std::optional<std::tuple<int, int, int>>& s) {
  if (!s) return std::nullopt;
  return SplitCounts{std::get<0>(*s), std::get<1>(*s), std::get<2>(*s)};
}

class Predictor {
 public:
  explicit Predictor(const fs::path& checkpoint) : model_(pipeline::load_checkpoint(checkpoint, &meta_)) {}

  Array predict(const Array& history, std::optional<int> steps, const std::optional<Array>& mask) const {
    if (history.ndim() != 3) throw ShapeError("history must be (T, H, W)");
    pipeline::Sequence seq;
    seq.grid = GridSpec(static_cast<int>(history.shape(1)), static_cast<int>(history.shape(2)));
    seq.frames = static_cast<int>(history.shape(0));
    seq.values.assign(history.data(), history.data() + history.size());
    if (mask) seq.mask = BoundaryMask(seq.grid, mask_in(mask));
    const int n = steps.value_or(meta_.train_config.pred_len);
    const int input_len = std::min(seq.frames, meta_.train_config.input_len);
    pipeline::Prediction p;
    {
      py::gil_scoped_release release;
      p = pipeline::predict_sequence(model_, meta_.norm, seq, input_len, n, true);
    }
    Array out({static_cast<py::ssize_t>(n), history.shape(1), history.shape(2)});
    for (int i = 0; i < n; ++i) std::copy(p.frames[i].begin(), p.frames[i].end(), out.mutable_data() + i * seq.grid.size());
    return out;
  }

  std::string config_json() const {
    return json{{"model", meta_.model_config.to_json()},
                {"train", meta_.train_config.to_json()},
                {"norm", {{"mean", meta_.norm.mean}, {"std", meta_.norm.std}}}}
        .dump();
  }

 private:
  pipeline::Checkpoint meta_;
  pipeline::Model model_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "HelmFluid native core";

  m.def("gradient", [](const Array& phi, double spacing, bool periodic) {
    return vector_out(diffops::gradient(scalar_in(phi, spacing, periodic)));
  }, py::arg("phi"), py::arg("spacing") = 1.0, py::arg("periodic") = true);
  m.def("curl_of_scalar", [](const Array& a, double spacing, bool periodic) {
    return vector_out(diffops::curl_of_scalar(scalar_in(a, spacing, periodic)));
  }, py::arg("a"), py::arg("spacing") = 1.0, py::arg("periodic") = true);
  m.def("divergence", [](const Array& f, double spacing, bool periodic) {
    return scalar_out(diffops::divergence(vector_in(f, spacing, periodic)));
  }, py::arg("f"), py::arg("spacing") = 1.0, py::arg("periodic") = true);
  m.def("vorticity", [](const Array& f, double spacing, bool periodic) {
    return scalar_out(diffops::vorticity(vector_in(f, spacing, periodic)));
  }, py::arg("f"), py::arg("spacing") = 1.0, py::arg("periodic") = true);
  m.def("compose_helm", [](const Array& phi, const Array& a, double spacing, bool periodic) {
    return vector_out(helmholtz::compose_helm(scalar_in(phi, spacing, periodic), scalar_in(a, spacing, periodic)));
  }, py::arg("phi"), py::arg("a"), py::arg("spacing") = 1.0, py::arg("periodic") = true);
  m.def("hodge_decompose", [](const Array& f, double spacing) {
    const auto p = helmholtz::hodge_decompose_spectral(vector_in(f, spacing, true));
    return py::make_tuple(vector_out(p.curl_free), vector_out(p.div_free), py::make_tuple(p.mean_u, p.mean_v));
  }, py::arg("f"), py::arg("spacing") = 1.0, "Returns (curl_free, div_free, (mean_u, mean_v)).");

  m.def("relative_l2", [](const Array& pred, const Array& truth, const std::optional<Array>& mask) {
    return score(pred, truth, mask).rel_l2;
  }, py::arg("pred"), py::arg("truth"), py::arg("mask") = py::none());
  m.def("mse", [](const Array& pred, const Array& truth, const std::optional<Array>& mask) {
    return score(pred, truth, mask).mse;
  }, py::arg("pred"), py::arg("truth"), py::arg("mask") = py::none());

  m.def("generate_translate_json", [](const fs::path& out, int n, std::uint64_t seed, int size, int frames,
                                      const std::string& pattern, std::optional<std::tuple<int, int, int>> split,
                                      int workers) {
    datagen::TranslateConfig c;
    c.grid = GridSpec(size, size, 1.0, BoundaryMode::periodic);
    c.frames = frames;
    c.pattern = datagen::texture_pattern_from_string(pattern);
    py::gil_scoped_release release;
    return datagen::generate_translate_dataset(c, n, out, seed, splits(split), workers).to_json().dump();
  }, py::arg("out"), py::arg("n"), py::arg("seed") = 0, py::arg("size") = 32, py::arg("frames") = 20,
     py::arg("pattern") = "gaussian_blobs", py::arg("split") = py::none(), py::arg("workers") = 1);
  m.def("generate_bounded_json", [](const fs::path& out, int n, std::uint64_t seed, int size, int frames,
                                    int obstacles, std::optional<std::tuple<int, int, int>> split, int workers) {
    datagen::BoundedDyeConfig c;
    c.grid = GridSpec(size, size, 1.0, BoundaryMode::replicate);
    c.frames = frames;
    c.n_obstacles = obstacles;
    py::gil_scoped_release release;
    return datagen::generate_bounded_dye_dataset(c, n, out, seed, splits(split), workers).to_json().dump();
  }, py::arg("out"), py::arg("n"), py::arg("seed") = 0, py::arg("size") = 64, py::arg("frames") = 20,
     py::arg("obstacles") = 3, py::arg("split") = py::none(), py::arg("workers") = 1);
  m.def("generate_ns_json", [](const fs::path& out, int n, std::uint64_t seed, int resolution, int frames,
                               const std::string& profile, std::optional<std::tuple<int, int, int>> split,
                               int workers) {
    auto c = profile == "paper" ? spectral_sim::NSConfig::paper_profile() : spectral_sim::NSConfig::desk_profile();
    c.grid = GridSpec(resolution, resolution, 1.0 / resolution, BoundaryMode::periodic);
    c.frames = frames;
    py::gil_scoped_release release;
    return spectral_sim::generate_ns_dataset(c, spectral_sim::GRFSpec{}, n, out, seed, splits(split), workers)
        .to_json()
        .dump();
  }, py::arg("out"), py::arg("n"), py::arg("seed") = 0, py::arg("resolution") = 64, py::arg("frames") = 20,
     py::arg("profile") = "desk", py::arg("split") = py::none(), py::arg("workers") = 1);

  m.def("train_json", [](const fs::path& data, const fs::path& run, const std::string& config, bool resume,
                         int workers) {
    const auto j = json::parse(config);
    auto tc = pipeline::TrainConfig::from_json(j.value("train", json::object()));
    tc.workers = workers;
    auto mj = j.value("model", json::object());
    if (!mj.contains("lookback")) mj["lookback"] = tc.input_len - 1;
    const auto mc = model::ModelConfig::from_json(mj);
    const auto ds = pipeline::SequenceDataset::open(data);
    py::gil_scoped_release release;
    const auto r = pipeline::train(mc, tc, ds, run, resume);
    json epochs = json::array();
    for (const auto& e : r.epochs) {
      epochs.push_back({{"epoch", e.epoch}, {"step", e.step}, {"train_loss", e.train_loss},
                        {"val_rel_l2", e.val_rel_l2 ? json(*e.val_rel_l2) : json(nullptr)}});
    }
    return json{{"best_epoch", r.best_epoch}, {"best_val_rel_l2", r.best_val_rel_l2}, {"epochs", epochs}}.dump();
  }, py::arg("data"), py::arg("run"), py::arg("config") = "{}", py::arg("resume") = false,
     py::arg("workers") = default_workers());

  m.def("evaluate_json", [](const fs::path& checkpoint, const fs::path& data, const std::string& split,
                            std::optional<bool> masked, int workers) {
    pipeline::Checkpoint meta;
    const auto model = pipeline::load_checkpoint(checkpoint, &meta);
    const auto ds = pipeline::SequenceDataset::open(data);
    const bool use_mask = masked.value_or(ds.has_masks());
    const auto s = split_from_string(split);
    const auto& tc = meta.train_config;
    py::gil_scoped_release release;
    const auto mm = pipeline::evaluate(model, meta.norm, ds, s, tc.input_len, tc.pred_len, use_mask, workers);
    const auto pp = pipeline::persistence_baseline(ds, s, tc.input_len, tc.pred_len, use_mask);
    return json{{"model", mm.to_json()}, {"persistence", pp.to_json()}, {"masked", use_mask}}.dump();
  }, py::arg("checkpoint"), py::arg("data"), py::arg("split") = "test", py::arg("masked") = py::none(),
     py::arg("workers") = default_workers());

  py::class_<Predictor>(m, "Predictor")
      .def(py::init<const fs::path&>(), py::arg("checkpoint"))
      .def("predict", &Predictor::predict, py::arg("history"), py::arg("steps") = py::none(),
           py::arg("mask") = py::none())
      .def("config_json", &Predictor::config_json);

  m.def("gradcheck", [](double tol, std::uint64_t seed, std::size_t samples) {
    std::vector<py::dict> out;
    for (const auto& e : run_gradcheck_suite(tol, seed, samples)) {
      out.push_back(py::dict(py::arg("name") = e.name, py::arg("passed") = e.report.passed,
                             py::arg("max_rel_error") = e.report.max_rel_error,
                             py::arg("checked") = e.report.checked));
    }
    return out;
  }, py::arg("tol") = 1e-4, py::arg("seed") = 0, py::arg("samples") = 16);
}
