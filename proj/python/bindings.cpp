// Python bindings. Arrays follow numpy convention: one sample per row.

#include <sstream>

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "koopnet/analysis.hpp"
#include "koopnet/cli.hpp"
#include "koopnet/pipeline.hpp"
#include "koopnet/seed.hpp"

namespace py = pybind11;
using namespace koopnet;

namespace {

py::tuple run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = 0;
  {
    py::gil_scoped_release release;
    code = cli::run_cli(args, out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

koopman::RankPolicy rank_policy(std::optional<double> energy, std::optional<Eigen::Index> fixed) {
  if (energy && fixed) throw std::invalid_argument("give energy or fixed, not both");
  if (fixed) return koopman::RankPolicy::Fixed(*fixed);
  return energy ? koopman::RankPolicy::Energy(*energy) : koopman::RankPolicy{};
}

py::dict dmd_dict(const koopman::DmdModel& m) {
  py::dict d;
  d["h"] = m.h;
  d["d1"] = m.d1;
  d["rank"] = m.rank;
  d["eigenvalues"] = ComplexVector(m.eigenvalues);
  d["modes"] = ComplexMatrix(m.modes);
  d["singular_values"] = RealVector(m.singular_values);
  d["operator"] = koopman::one_step_operator(m);
  d["pairs"] = m.pairs;
  d["residual"] = m.residual;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Koopman/DMD hybrid networks";

  m.def("run_cli", &run_cli, py::arg("args"), "Runs the koopnet CLI in-process; returns (exit code, stdout, stderr).");
  m.def("derive_seed", &derive_seed, py::arg("master"), py::arg("stream"));

  m.def(
      "thin_svd",
      [](const RealMatrix& a) {
        const auto s = linalg::thin_svd(a);
        return py::make_tuple(s.u, s.sigma, s.vt);
      },
      py::arg("a"), "Returns (U, sigma, Vt) with A = U diag(sigma) Vt.");
  m.def(
      "eigenvalues", [](const RealMatrix& a) { return linalg::eigenvalues(a); }, py::arg("a"));
  m.def(
      "pinv", [](const RealMatrix& a, double rcond) { return linalg::pinv(a, rcond); }, py::arg("a"),
      py::arg("rcond") = 1e-12);

  m.def(
      "generate_yinyang",
      [](std::size_t n, std::uint64_t seed) {
        const auto ds = data::generate_yinyang(n, seed);
        return py::make_tuple(ds.inputs, ds.labels);
      },
      py::arg("n"), py::arg("seed"), "Returns (inputs n x 2, labels).");
  m.def(
      "decision_grid", [](std::size_t res) { return data::decision_grid(res); }, py::arg("resolution"));

  m.def(
      "fit_dmd",
      [](const std::vector<RealMatrix>& trajectories, int h, std::optional<double> energy,
         std::optional<Eigen::Index> fixed) {
        // each trajectory arrives as T x d (one snapshot per row)
        std::vector<RealMatrix> cols;
        cols.reserve(trajectories.size());
        for (const auto& t : trajectories) cols.push_back(t.transpose());
        return dmd_dict(koopman::fit_dmd(koopman::hankelize(cols, h), rank_policy(energy, fixed)));
      },
      py::arg("trajectories"), py::arg("h") = 1, py::arg("energy") = py::none(), py::arg("fixed") = py::none(),
      "Exact DMD of delay-embedded trajectories (each T x d).");
  m.def(
      "load_dmd", [](const std::string& path) { return dmd_dict(koopman::load_dmd(path)); }, py::arg("path"));

  py::class_<nn::MlpModel>(m, "Model")
      .def_static("load", [](const std::string& path) { return nn::load_model(path); })
      .def("forward", [](const nn::MlpModel& self, const RealMatrix& x) {
        return RealMatrix(nn::forward_batch(self, x.transpose()).transpose());
      })
      .def_property_readonly("widths", [](const nn::MlpModel& self) {
        std::vector<Eigen::Index> w{self.layers.front().in_dim()};
        for (const auto& l : self.layers) w.push_back(l.out_dim());
        return w;
      });

  py::class_<hybrid::HybridModel>(m, "Hybrid")
      .def_static("load", [](const std::string& path) { return hybrid::load_hybrid(path); })
      .def("forward", [](const hybrid::HybridModel& self, const RealMatrix& x) {
        return RealMatrix(hybrid::hybrid_forward_batch(self, x.transpose()).transpose());
      })
      .def("replaced_activation", [](const hybrid::HybridModel& self, const RealMatrix& x) {
        return RealMatrix(hybrid::replaced_activation(self, x.transpose()).transpose());
      })
      .def_property_readonly("h", &hybrid::HybridModel::h)
      .def_property_readonly("k", &hybrid::HybridModel::k)
      .def_property_readonly("target_index", [](const hybrid::HybridModel& self) { return self.target_index; })
      .def_property_readonly("step", [](const hybrid::HybridModel& self) { return self.step; });
}
