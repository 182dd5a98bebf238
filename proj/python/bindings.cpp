#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mrd/bound.hpp"
#include "mrd/diagnostics.hpp"
#include "mrd/errors.hpp"
#include "mrd/infer.hpp"
#include "mrd/io.hpp"
#include "mrd/model.hpp"
#include "mrd/synth.hpp"

namespace py = pybind11;
using namespace mrd;

namespace {

OptimConfig config(int max_iter, std::uint64_t seed) {
  OptimConfig c;
  c.max_iterations = max_iter;
  c.seed = seed;
  return c;
}

std::optional<Vector> opt_times(const std::optional<Vector>& t) { return t; }

py::dict segmentation_dict(const Segmentation& s) {
  py::dict d;
  d["views"] = s.view_names;
  d["delta"] = s.delta_rel;
  d["shared"] = s.shared;
  py::dict priv;
  for (std::size_t i = 0; i < s.view_names.size(); ++i) priv[py::str(s.view_names[i])] = s.private_dims[i];
  d["private"] = priv;
  py::list partial;
  for (const auto& p : s.partial) {
    py::list names;
    for (auto v : p.views) names.append(s.view_names[v]);
    partial.append(py::make_tuple(names, p.dims));
  }
  d["partial"] = partial;
  d["inactive"] = s.inactive;
  d["borderline"] = s.borderline;
  return d;
}

}  // namespace

PYBIND11_MODULE(_mrd, m) {
  m.doc() = "Multi-view Bayesian GP-LVM with per-view ARD weights";

  auto base = py::register_exception<Error>(m, "MrdError", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  auto data = py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<VersionError>(m, "VersionError", data.ptr());
  py::register_exception<SingularMatrixError>(m, "SingularMatrixError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

  py::class_<MrdModel>(m, "Model")
      .def_property_readonly("latent_dim", &MrdModel::latent_dim)
      .def_property_readonly("num_points", &MrdModel::num_points)
      .def_property_readonly("view_names",
                             [](const MrdModel& mm) {
                               std::vector<std::string> n;
                               for (const auto& v : mm.views) n.push_back(v.name);
                               return n;
                             })
      .def_property_readonly("q_means", [](const MrdModel& mm) { return mm.q.means; })
      .def_property_readonly("q_variances", [](const MrdModel& mm) { return mm.q.variances; })
      .def_property_readonly("is_dynamical", [](const MrdModel& mm) { return mm.prior.is_dynamical(); })
      .def_readwrite("delta", &MrdModel::delta_rel)
      .def(
          "weights",
          [](const MrdModel& mm, const std::string& view, bool normalized) {
            const ViewParams& v = mm.views[mm.view_index(view)];
            return normalized ? normalized_weights(v) : v.kernel.weights;
          },
          py::arg("view"), py::arg("normalized") = true)
      .def("noise_variance",
           [](const MrdModel& mm, const std::string& view) { return mm.views[mm.view_index(view)].noise_variance; })
      .def(
          "set_noise_variance",
          [](MrdModel& mm, const std::string& view, double value) {
            if (!(value > 0.0)) throw InvalidArgument("noise variance must be positive");
            mm.views[mm.view_index(view)].noise_variance = value;
          },
          py::arg("view"), py::arg("value"))
      .def("bound", [](const MrdModel& mm) { return total_bound(mm); })
      .def("save", [](const MrdModel& mm, const std::string& path) { save_model(path, mm); })
      .def("__repr__", [](const MrdModel& mm) {
        return "<mrd.Model N=" + std::to_string(mm.num_points()) + " Q=" + std::to_string(mm.latent_dim()) +
               " views=" + std::to_string(mm.views.size()) + ">";
      });

  m.def("load_model", &load_model, py::arg("path"));

  m.def(
      "init_model",
      [](const std::vector<std::pair<std::string, Matrix>>& views, Index latent_dim, Index num_inducing,
         std::uint64_t seed, std::optional<Vector> times, std::optional<std::vector<int>> sequences,
         std::optional<double> lengthscale) {
        std::vector<ViewData> vd;
        for (const auto& [name, y] : views) vd.push_back({name, y, {}});
        LatentPrior prior;
        if (times) {
          std::vector<int> ids = sequences ? *sequences : std::vector<int>(static_cast<std::size_t>(times->size()), 0);
          TemporalKernelParams t;
          t.lengthscale = lengthscale ? *lengthscale : default_lengthscale(*times, ids);
          prior = LatentPrior::dynamical(*times, std::move(ids), t);
        } else if (sequences) {
          throw InvalidArgument("sequence ids need timestamps");
        }
        return init_model(vd, latent_dim, num_inducing, std::move(prior), seed);
      },
      py::arg("views"), py::arg("latent_dim"), py::arg("num_inducing"), py::arg("seed") = 0,
      py::arg("times") = py::none(), py::arg("sequences") = py::none(), py::arg("lengthscale") = py::none(),
      "views: list of (name, N x D array). Passing times selects the temporal prior.");

  m.def(
      "train",
      [](const MrdModel& model, int max_iter, std::uint64_t seed, std::vector<std::string> fixed_noise_views) {
        TrainOptions o;
        o.fixed_noise_views = std::move(fixed_noise_views);
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(model, config(max_iter, seed), o);
        }
        return py::make_tuple(r.model, r.trace, to_string(r.termination));
      },
      py::arg("model"), py::arg("max_iter") = 1000, py::arg("seed") = 0,
      py::arg("fixed_noise_views") = std::vector<std::string>{},
      "Returns (trained model, bound trace, termination reason).");

  m.def(
      "segment", [](const MrdModel& mm, double delta) { return segmentation_dict(segment(mm, delta)); },
      py::arg("model"), py::arg("delta") = 0.01);

  m.def(
      "transfer",
      [](const MrdModel& mm, const Matrix& y, const std::string& source, const std::string& target, Index k,
         int max_iter, std::optional<Vector> times) {
        const TransferResult r = transfer(mm, y, source, target, k, config(max_iter, 0), opt_times(times));
        py::dict d;
        d["predictions"] = r.predictions;
        d["candidates"] = r.candidates.indices;
        d["distances"] = r.candidates.distances;
        d["latent_means"] = r.latent.means;
        d["latent_variances"] = r.latent.variances;
        return d;
      },
      py::arg("model"), py::arg("y"), py::arg("source"), py::arg("target"), py::arg("k") = 5,
      py::arg("max_iter") = 1000, py::arg("times") = py::none(), "Candidate indices are 0-based.");

  m.def(
      "classify",
      [](const MrdModel& mm, const Matrix& y, const std::string& source, const std::string& label_view, Index k,
         int max_iter, std::optional<Vector> times) {
        return classify(mm, y, source, label_view, k, config(max_iter, 0), opt_times(times));
      },
      py::arg("model"), py::arg("y"), py::arg("source"), py::arg("label_view"), py::arg("k") = 5,
      py::arg("max_iter") = 1000, py::arg("times") = py::none(), "Returns 0-based class indices.");

  m.def("predictive_mean", &predictive_mean, py::arg("model"), py::arg("view"), py::arg("x"));
  m.def("sample_traversal", &sample_traversal, py::arg("model"), py::arg("view"), py::arg("base"), py::arg("dim"),
        py::arg("low"), py::arg("high"), py::arg("steps"), "dim is 0-based.");

  m.def(
      "psi_stats",
      [](double variance, const Vector& weights, const Matrix& means, const Matrix& variances, const Matrix& z) {
        const PsiStats s = psi_stats(ArdKernelParams{variance, weights}, VariationalLatent{means, variances}, z);
        return py::make_tuple(s.psi0, s.psi1, s.psi2);
      },
      py::arg("variance"), py::arg("weights"), py::arg("means"), py::arg("variances"), py::arg("inducing"));

  m.def(
      "gradcheck",
      [](std::uint64_t seed) {
        py::dict d;
        for (const auto& r : run_gradcheck(seed)) d[r.dynamical ? "dynamical" : "standard"] = r.max_rel_error;
        return d;
      },
      py::arg("seed") = 0);

  m.def(
      "synth",
      [](const std::string& spec_json) {
        const SynthData sd = generate(synth_spec_from_json(nlohmann::json::parse(spec_json)));
        py::dict d;
        py::list views;
        for (const auto& v : sd.views) views.append(py::make_tuple(v.name, v.data));
        d["views"] = views;
        d["signals"] = sd.truth.signals;
        d["relevant"] = sd.truth.relevant;
        d["labels"] = sd.truth.labels;
        d["times"] = sd.truth.timestamps;
        d["sequences"] = sd.truth.sequence_ids;
        return d;
      },
      py::arg("spec_json"), "Spec as a JSON string with the same keys as the CLI's --spec file.");
}
