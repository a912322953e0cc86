#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dgvi/belief.hpp"
#include "dgvi/errors.hpp"
#include "dgvi/network.hpp"
#include "dgvi/oracle.hpp"
#include "dgvi/sim.hpp"
#include "dgvi/verify.hpp"
#include "dgvi/vi.hpp"

namespace py = pybind11;
using namespace dgvi;

namespace {

UpdateOptions make_options(double xi, const std::string& mean_update_matrix,
                           double likelihood_weight) {
  UpdateOptions o;
  o.xi = xi;
  o.mean_update_matrix = parse_mean_update_matrix(mean_update_matrix);
  o.likelihood_weight = likelihood_weight;
  o.validate();
  return o;
}

py::dict artifacts_to_dict(const RunArtifacts& a, const ExperimentConfig& config) {
  py::list metrics;
  for (const auto& m : a.metrics) {
    py::dict row;
    row["round"] = m.round;
    row["agent"] = m.agent;
    row["consensus_err"] = m.consensus_err;
    row["verif_bce"] = m.verif_bce;
    row["verif_acc"] = m.verif_acc;
    row["ms"] = m.ms;
    metrics.append(row);
  }
  py::list test;
  const bool regress = config.task == Task::regress;
  for (const auto& r : a.test_results) {
    py::dict d;
    d[regress ? "r2" : "accuracy"] = r.accuracy;
    d[regress ? "mse" : "bce"] = r.bce;
    test.append(d);
  }
  std::vector<Vector> means;
  for (const auto& b : a.final_beliefs) means.push_back(mean_of(b));
  py::dict out;
  out["metrics"] = metrics;
  out["test"] = test;
  out["final_means"] = means;
  out["consensus_trace"] = a.consensus_trace;
  out["weights"] = a.weights.entries();
  out["centers"] = a.model.centers();
  out["n_train"] = a.n_train;
  out["n_test"] = a.n_test;
  out["n_verify"] = a.n_verify;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Distributed Gaussian variational inference core";

  auto validation = py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  (void)validation;

  py::class_<GaussianBelief>(m, "GaussianBelief")
      .def(py::init<Vector, Matrix>(), py::arg("mean"), py::arg("information"))
      .def_static("isotropic", &GaussianBelief::isotropic, py::arg("dim"), py::arg("information"))
      .def_property_readonly("dim", &GaussianBelief::dim)
      .def_property_readonly("mean", &GaussianBelief::mean)
      .def_property_readonly("information", &GaussianBelief::information)
      .def_property_readonly("covariance", &GaussianBelief::covariance)
      .def_property_readonly("information_mean", &GaussianBelief::information_mean);

  py::class_<DiagGaussianBelief>(m, "DiagGaussianBelief")
      .def(py::init<Vector, Vector>(), py::arg("mean"), py::arg("info_diag"))
      .def_static("isotropic", &DiagGaussianBelief::isotropic, py::arg("dim"),
                  py::arg("information"))
      .def_property_readonly("dim", &DiagGaussianBelief::dim)
      .def_property_readonly("mean", &DiagGaussianBelief::mean)
      .def_property_readonly("info_diag", &DiagGaussianBelief::info_diag)
      .def_property_readonly("variance", &DiagGaussianBelief::variance);

  m.def("geometric_fuse",
        [](const std::vector<GaussianBelief>& b, const std::vector<double>& w) {
          return geometric_fuse(b, w);
        },
        py::arg("beliefs"), py::arg("weights"));
  m.def("geometric_fuse_diag",
        [](const std::vector<DiagGaussianBelief>& b, const std::vector<double>& w) {
          return geometric_fuse_diag(b, w);
        },
        py::arg("beliefs"), py::arg("weights"));
  m.def("rank1_inverse_update", &rank1_inverse_update, py::arg("covariance"), py::arg("phi"),
        py::arg("gamma"));
  m.def("kl_gaussian", &kl_gaussian, py::arg("p"), py::arg("q"));

  m.def("sinkhorn_normalize",
        [](const Eigen::MatrixXd& a, double tol, int max_iter) {
          return sinkhorn_normalize(a, tol, max_iter).entries();
        },
        py::arg("matrix"), py::arg("tol") = kSinkhornTolerance,
        py::arg("max_iter") = kSinkhornMaxIterations);
  m.def("metropolis_weights",
        [](const std::vector<Edge>& edges, int n) { return metropolis_weights(edges, n).entries(); },
        py::arg("edges"), py::arg("n"));
  m.def("is_strongly_connected",
        [](const Eigen::MatrixXd& a) { return is_strongly_connected(a); }, py::arg("matrix"));
  m.def("consensus_error",
        [](const std::vector<Vector>& means) { return consensus_error(means); }, py::arg("means"));

  py::class_<KernelModel>(m, "KernelModel")
      .def(py::init<Eigen::MatrixXd, double, Eigen::VectorXd>(), py::arg("centers"),
           py::arg("scale"), py::arg("lengthscales"))
      .def(py::init<Eigen::MatrixXd, double, double>(), py::arg("centers"), py::arg("scale"),
           py::arg("lengthscale"))
      .def_property_readonly("feature_dim", &KernelModel::feature_dim)
      .def_property_readonly("centers", &KernelModel::centers)
      .def_property_readonly("lengthscales", &KernelModel::lengthscales)
      .def("featurize", [](const KernelModel& k, const Vector& x) { return featurize(k, x); },
           py::arg("x"))
      .def("predict",
           [](const KernelModel& k, const GaussianBelief& b, const Eigen::MatrixXd& pts, double xi) {
             return predict_batch(b, k, pts, xi);
           },
           py::arg("belief"), py::arg("points"), py::arg("xi") = kDefaultXi)
      .def("predict",
           [](const KernelModel& k, const DiagGaussianBelief& b, const Eigen::MatrixXd& pts,
              double xi) { return predict_batch(b, k, pts, xi); },
           py::arg("belief"), py::arg("points"), py::arg("xi") = kDefaultXi);

  m.def("probit_closed_forms", &probit_closed_forms, py::arg("mean_u"), py::arg("var_u"),
        py::arg("xi") = kDefaultXi);
  m.def("quadrature_probit_moments", &quadrature_probit_moments, py::arg("mean_u"),
        py::arg("var_u"), py::arg("xi") = kDefaultXi, py::arg("tolerance") = 1e-13);
  m.def("expected_sigmoid",
        py::overload_cast<const GaussianBelief&, const Eigen::VectorXd&, double>(&expected_sigmoid),
        py::arg("belief"), py::arg("phi"), py::arg("xi") = kDefaultXi);
  m.def("expected_sigmoid",
        py::overload_cast<const DiagGaussianBelief&, const Eigen::VectorXd&, double>(
            &expected_sigmoid),
        py::arg("belief"), py::arg("phi"), py::arg("xi") = kDefaultXi);

  m.def("dgvi_classify_step",
        [](const std::vector<GaussianBelief>& b, const std::vector<double>& w, const Vector& phi,
           int y, double xi, const std::string& mum, double lw) {
          return dgvi_classify_step(b, w, phi, y, make_options(xi, mum, lw));
        },
        py::arg("beliefs"), py::arg("weights"), py::arg("phi"), py::arg("y"),
        py::arg("xi") = kDefaultXi, py::arg("mean_update_matrix") = "posterior_information",
        py::arg("likelihood_weight") = 1.0);
  m.def("diag_dgvi_classify_step",
        [](const std::vector<DiagGaussianBelief>& b, const std::vector<double>& w,
           const Vector& phi, int y, double xi, const std::string& mum, double lw) {
          return diag_dgvi_classify_step(b, w, phi, y, make_options(xi, mum, lw));
        },
        py::arg("beliefs"), py::arg("weights"), py::arg("phi"), py::arg("y"),
        py::arg("xi") = kDefaultXi, py::arg("mean_update_matrix") = "posterior_information",
        py::arg("likelihood_weight") = 1.0);
  m.def("dgvi_regression_step",
        [](const std::vector<GaussianBelief>& b, const std::vector<double>& w,
           const Eigen::MatrixXd& phi, const Vector& y, const Eigen::MatrixXd& s) {
          return dgvi_regression_step(b, w, phi, y, s);
        },
        py::arg("beliefs"), py::arg("weights"), py::arg("phi"), py::arg("y"),
        py::arg("precision"));

  m.def("conjugate_fusion_posterior",
        [](const std::vector<GaussianBelief>& priors, const std::vector<double>& w,
           const Matrix& h, const Matrix& s, const Vector& z) {
          return conjugate_fusion_posterior(priors, w, LinearGaussianModel{h, s}, z);
        },
        py::arg("priors"), py::arg("weights"), py::arg("h"), py::arg("obs_precision"), py::arg("z"));
  m.def("particle_fusion_posterior",
        [](const std::vector<GaussianBelief>& priors, const std::vector<double>& w,
           const Matrix& h, const Matrix& s, const Vector& z, int n, std::uint64_t seed) {
          auto r = particle_fusion_posterior(priors, w, LinearGaussianModel{h, s}, z, n, seed);
          return py::make_tuple(r.fitted, r.effective_sample_size, r.particles);
        },
        py::arg("priors"), py::arg("weights"), py::arg("h"), py::arg("obs_precision"), py::arg("z"),
        py::arg("n_particles") = 100000, py::arg("seed") = 0);

  m.def("_run_experiment_json",
        [](const std::string& text, const std::filesystem::path& base_dir,
           std::optional<std::uint64_t> seed, std::optional<std::filesystem::path> out_dir) {
          nlohmann::json j;
          try {
            j = nlohmann::json::parse(text);
          } catch (const nlohmann::json::exception& e) {
            throw ValidationError(std::string("config: ") + e.what());
          }
          auto config = config_from_json(j, base_dir);
          if (seed) override_seed(config, *seed);
          config.validate();
          std::optional<RunArtifacts> a;
          {
            py::gil_scoped_release release;
            a.emplace(run_experiment(config));
            if (out_dir) write_artifacts(*a, config, *out_dir);
          }
          return artifacts_to_dict(*a, config);
        },
        py::arg("config_json"), py::arg("base_dir"), py::arg("seed") = py::none(),
        py::arg("out_dir") = py::none());

  m.def("verify",
        [](const std::string& suite, std::uint64_t seed) {
          py::list out;
          for (const auto& c : run_suite(suite, seed)) {
            py::dict d;
            d["name"] = c.name;
            d["value"] = c.value;
            d["tolerance"] = c.tolerance;
            d["passed"] = c.passed;
            d["detail"] = c.detail;
            out.append(d);
          }
          return out;
        },
        py::arg("suite") = "all", py::arg("seed") = 0);
}
