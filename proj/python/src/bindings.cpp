// Copyright 2026 The saim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Python bindings for the saim core. Arrays cross the boundary as float64
// numpy arrays; sparse datasets stay on the C++ side inside Task objects.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <string>
#include <vector>

#include "saim/adapt.hpp"
#include "saim/errors.hpp"
#include "saim/gmm.hpp"
#include "saim/harness.hpp"
#include "saim/model.hpp"
#include "saim/swd.hpp"

namespace py = pybind11;
using namespace saim;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-D array");
  const auto r = static_cast<std::size_t>(a.shape(0)), c = static_cast<std::size_t>(a.shape(1));
  return Matrix(r, c, std::vector<double>(a.data(), a.data() + r * c));
}

Array to_array(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

Array to_array_1d(std::span<const double> v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

struct PyTask {
  TaskData data;
  double bayes_accuracy = 0.0;
};

AdaptConfig make_adapt(const std::string& mode, double lambda, double tau, std::size_t epochs,
                       std::size_t batch, std::size_t slices, std::uint64_t seed) {
  AdaptConfig c;
  c.mode = parse_mode(mode);
  c.lambda = lambda;
  c.tau = tau;
  c.epochs = epochs;
  c.batch = batch;
  c.slices = slices;
  c.seed = seed;
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_saim, m) {
  m.doc() = "Margin-inducing domain adaptation core";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<StateError>(m, "StateError", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<BoundsError>(m, "BoundsError", PyExc_IndexError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<DegenerateError>(m, "DegenerateError", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def(
      "wasserstein2_1d",
      [](std::vector<double> a, std::vector<double> b) { return wasserstein2_1d(a, b); },
      py::arg("a"), py::arg("b"), "Mean squared difference of two ascending sequences.");

  m.def(
      "swd",
      [](const Array& xs, const Array& ys, std::size_t slices, std::uint64_t seed) {
        const Matrix x = to_matrix(xs), y = to_matrix(ys);
        Rng rng(seed);
        const SliceSet s = SliceSet::sample(slices, x.cols(), rng);
        const SwdValue v = swd(x, y, s);
        return py::make_tuple(v.value, to_array(v.grad_x), to_array(v.grad_y));
      },
      py::arg("xs"), py::arg("ys"), py::arg("slices") = 128, py::arg("seed") = 0,
      "Sliced distance of equal-size samples and its gradients.");

  m.def(
      "swd_between_sets",
      [](const Array& a, const Array& b, std::size_t slices, std::uint64_t seed,
         std::size_t repeats) {
        Rng rng(seed);
        return swd_between_sets(to_matrix(a), to_matrix(b), slices, rng, repeats);
      },
      py::arg("a"), py::arg("b"), py::arg("slices") = 128, py::arg("seed") = 0,
      py::arg("repeats") = 5);

  py::class_<PyTask>(m, "Task")
      .def_property_readonly("name", [](const PyTask& t) { return t.data.name; })
      .def_property_readonly("bayes_accuracy", [](const PyTask& t) { return t.bayes_accuracy; })
      .def_property_readonly("dim", [](const PyTask& t) { return t.data.source.dim; })
      .def_property_readonly("sizes", [](const PyTask& t) {
        py::dict d;
        d["source"] = t.data.source.size();
        d["target"] = t.data.target.size();
        d["target_test"] = t.data.target_test.size();
        d["source_test"] = t.data.source_test.size();
        return d;
      });

  m.def(
      "synthetic_task",
      [](std::uint64_t seed, double separation, std::vector<double> shift, double rotation,
         std::size_t n_source, std::size_t n_target, std::size_t n_test, double imbalance) {
        SuiteOptions o;
        o.data_seed = seed;
        o.synthetic.separation = separation;
        o.synthetic.shift = std::move(shift);
        o.synthetic.rotation_deg = rotation;
        o.synthetic.n_source = n_source;
        o.synthetic.n_source_test = n_source;
        o.synthetic.n_target = n_target;
        o.synthetic.n_test = n_test;
        PyTask t;
        std::string why;
        t.data = *load_task(TaskSpec::parse("synthetic", 0, imbalance), o, &why, &t.bayes_accuracy);
        return t;
      },
      py::arg("seed") = 20240101, py::arg("separation") = 4.0,
      py::arg("shift") = std::vector<double>{2.0, 4.0}, py::arg("rotation") = 0.0,
      py::arg("n_source") = 1000, py::arg("n_target") = 1000, py::arg("n_test") = 2000,
      py::arg("imbalance") = 0.5);

  m.def(
      "load_task",
      [](const std::string& spec, std::size_t dim, double imbalance, std::string data_root,
         std::uint64_t seed) {
        SuiteOptions o;
        o.data_root = data_root;
        o.data_seed = seed;
        PyTask t;
        std::string why;
        auto data = load_task(TaskSpec::parse(spec, dim, imbalance), o, &why, &t.bayes_accuracy);
        if (!data) throw IoError(why);
        t.data = std::move(*data);
        return t;
      },
      py::arg("spec"), py::arg("dim") = 5000, py::arg("imbalance") = 0.5,
      py::arg("data_root") = "", py::arg("seed") = 20240101);

  py::class_<ModelParams>(m, "Model")
      .def_property_readonly("input_dim", &ModelParams::input_dim)
      .def_property_readonly("hidden", &ModelParams::hidden)
      .def_property_readonly("classes", &ModelParams::classes)
      .def("to_json",
           [](const ModelParams& p, std::uint64_t seed) { return checkpoint_to_json(p, {seed, 0}); },
           py::arg("seed") = 0)
      .def_static("from_json", [](const std::string& s) { return checkpoint_from_json(s); })
      .def("__eq__", [](const ModelParams& a, const ModelParams& b) { return a == b; });

  m.def(
      "train_source",
      [](const PyTask& t, std::uint64_t seed, std::size_t epochs, std::size_t hidden) {
        TrainConfig c;
        c.seed = seed;
        c.epochs = epochs;
        c.hidden = hidden;
        return train_source(t.data.source, c);
      },
      py::arg("task"), py::arg("seed") = 0, py::arg("epochs") = 30, py::arg("hidden") = 50);

  m.def(
      "evaluate",
      [](const ModelParams& p, const PyTask& t, const std::string& split) {
        const LabeledDataset& d = split == "source" ? t.data.source
                                  : split == "source_test" ? t.data.source_test
                                                           : t.data.target_test;
        return evaluate(p, d).accuracy;
      },
      py::arg("model"), py::arg("task"), py::arg("split") = "target_test");

  m.def(
      "embed",
      [](const ModelParams& p, const PyTask& t, const std::string& split) {
        if (split == "target") return to_array(encode(p, t.data.target.features));
        if (split == "target_test") return to_array(encode(p, t.data.target_test.features));
        return to_array(encode(p, t.data.source.features));
      },
      py::arg("model"), py::arg("task"), py::arg("split") = "source");

  m.def(
      "pseudo_dataset",
      [](const ModelParams& p, const PyTask& t, std::size_t n, double tau, std::uint64_t seed) {
        const GmmModel g = estimate_gmm(p, t.data.source, build_support_sets(p, t.data.source));
        Rng rng(seed);
        PseudoDataset d = generate_pseudo_dataset(g, p, n, tau, rng);
        py::dict out;
        out["z"] = to_array(d.z);
        out["labels"] = d.labels;
        out["attempted"] = d.attempted;
        out["shortfall"] = d.shortfall;
        out["margin"] = to_array_1d(boundary_distance(p, d.z));
        return out;
      },
      py::arg("model"), py::arg("task"), py::arg("n"), py::arg("tau") = 0.99,
      py::arg("seed") = 0);

  m.def(
      "run_experiment",
      [](const PyTask& t, const std::string& mode, std::uint64_t seed, double lambda, double tau,
         std::size_t epochs, std::size_t batch, std::size_t slices, std::size_t train_epochs,
         bool with_bounds) {
        AdaptConfig c = make_adapt(mode, lambda, tau, epochs, batch, slices, seed);
        TrainConfig tc;
        tc.epochs = train_epochs;
        ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(t.data, c, tc, with_bounds);
        }
        py::dict out;
        out["target_accuracy"] = r.target_accuracy;
        out["source_test_accuracy"] = r.source_test_accuracy;
        out["pseudo_size"] = r.pseudo_size;
        out["report"] = r.report.to_jsonl();
        out["model"] = r.params;
        return out;
      },
      py::arg("task"), py::arg("mode") = "saim2", py::arg("seed") = 0, py::arg("lam") = 1e-2,
      py::arg("tau") = 0.99, py::arg("epochs") = 30, py::arg("batch") = 32,
      py::arg("slices") = 128, py::arg("train_epochs") = 30, py::arg("with_bounds") = false);

  m.def(
      "run_suite",
      [](std::vector<std::string> tasks, std::vector<std::string> modes,
         std::vector<std::uint64_t> seeds, double lambda, std::size_t epochs, double imbalance,
         std::size_t dim, std::size_t workers, std::string cache_dir) {
        SuiteOptions o;
        o.adapt.lambda = lambda;
        o.adapt.epochs = epochs;
        o.workers = workers;
        o.cache_dir = cache_dir;
        std::vector<TaskSpec> specs;
        for (const auto& t : tasks) specs.push_back(TaskSpec::parse(t, dim, imbalance));
        std::vector<AdaptMode> ms;
        for (const auto& s : modes) ms.push_back(parse_mode(s));
        py::gil_scoped_release release;
        return run_suite(specs, ms, seeds, o).to_csv();
      },
      py::arg("tasks"), py::arg("modes"), py::arg("seeds"), py::arg("lam") = 1e-2,
      py::arg("epochs") = 30, py::arg("imbalance") = 0.5, py::arg("dim") = 5000,
      py::arg("workers") = 1, py::arg("cache_dir") = "",
      "Runs every (task, mode, seed) cell; returns the result table as CSV.");

  m.def(
      "tau_sweep",
      [](const PyTask& t, std::vector<double> grid, std::vector<std::uint64_t> seeds,
         double lambda, std::size_t epochs) {
        AdaptConfig c;
        c.lambda = lambda;
        c.epochs = epochs;
        TrainConfig tc;
        py::gil_scoped_release release;
        return sweep_to_csv(tau_sweep(t.data, grid, seeds, c, tc));
      },
      py::arg("task"), py::arg("grid"), py::arg("seeds"), py::arg("lam") = 1e-2,
      py::arg("epochs") = 30);
}
