#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "iclcp/checkpoint.hpp"
#include "iclcp/conformal.hpp"
#include "iclcp/errors.hpp"
#include "iclcp/eval.hpp"
#include "iclcp/lsa_model.hpp"
#include "iclcp/ridge.hpp"
#include "iclcp/scaling.hpp"
#include "iclcp/taskgen.hpp"

namespace py = pybind11;
using namespace iclcp;

PYBIND11_MODULE(_iclcp, m) {
  m.doc() = "Conformal prediction with in-context learning";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<ArgumentError>(m, "ArgumentError", base.ptr());
  py::register_exception<RankDeficiencyError>(m, "RankDeficiencyError", base.ptr());
  py::register_exception<BudgetError>(m, "BudgetError", base.ptr());
  py::register_exception<FitError>(m, "FitError", base.ptr());
  py::register_exception<DegeneracyError>(m, "DegeneracyError", base.ptr());

  py::class_<GenConfig>(m, "GenConfig")
      .def(py::init([](int d, int n, double a, double sigma_w, double sigma_n, std::uint64_t seed) {
             GenConfig g{d, n, a, sigma_w, sigma_n, seed};
             g.validate();
             return g;
           }),
           py::arg("d") = 1, py::arg("n") = 1, py::arg("a") = 1.0, py::arg("sigma_w") = 1.0,
           py::arg("sigma_n") = 0.25, py::arg("seed") = 0)
      .def_readwrite("d", &GenConfig::d)
      .def_readwrite("n", &GenConfig::n)
      .def_readwrite("a", &GenConfig::a)
      .def_readwrite("sigma_w", &GenConfig::sigma_w)
      .def_readwrite("sigma_n", &GenConfig::sigma_n)
      .def_readwrite("seed", &GenConfig::seed);

  m.def(
      "sample_task",
      [](const GenConfig& cfg, std::uint64_t seed) {
        Rng rng(seed);
        const TaskSample s = sample_task(cfg, rng);
        return py::make_tuple(s.X, s.y, s.w);
      },
      py::arg("cfg"), py::arg("seed"), "Returns (X, y, w) for one task with n points.");

  m.def("bayes_lambda", &bayes_lambda, py::arg("sigma_w"), py::arg("sigma_n"));
  m.def(
      "ridge_fit",
      [](const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda) {
        return ridge_fit(X, y, lambda).w_hat;
      },
      py::arg("X"), py::arg("y"), py::arg("lam"));
  m.def(
      "build_grid", [](const Eigen::VectorXd& y, int K) { return build_grid(y, K).values(); },
      py::arg("y_ctx"), py::arg("K") = kDefaultGridSize);

  py::class_<Interval>(m, "Interval")
      .def_readonly("lo", &Interval::lo)
      .def_readonly("hi", &Interval::hi)
      .def("width", &Interval::width);
  py::class_<PredictionSet>(m, "PredictionSet")
      .def_property_readonly("grid", [](const PredictionSet& s) { return s.grid.values(); })
      .def_readonly("typicalness", &PredictionSet::typicalness)
      .def_readonly("accepted", &PredictionSet::accepted)
      .def_readonly("interval", &PredictionSet::interval)
      .def_readonly("contiguous", &PredictionSet::contiguous)
      .def("covers", &PredictionSet::covers)
      .def("hull_width", &PredictionSet::hull_width);

  py::class_<LsaParams>(m, "LsaParams")
      .def_property_readonly("d", &LsaParams::dim)
      .def_property_readonly("num_layers", &LsaParams::num_layers)
      .def("parameter_count", &LsaParams::parameter_count);

  m.def(
      "full_cp_ridge",
      [](const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& x, double alpha,
         double lambda, int K) {
        return full_cp(RidgeOraclePredictor(lambda), X, y, x, alpha, build_grid(y, K));
      },
      py::arg("X_ctx"), py::arg("y_ctx"), py::arg("x_new"), py::arg("alpha"), py::arg("lam"),
      py::arg("K") = kDefaultGridSize);
  m.def(
      "full_cp_icl",
      [](const LsaParams& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
         const Eigen::VectorXd& x, double alpha, int K) {
        return full_cp(IclPredictor(params), X, y, x, alpha, build_grid(y, K));
      },
      py::arg("params"), py::arg("X_ctx"), py::arg("y_ctx"), py::arg("x_new"), py::arg("alpha"),
      py::arg("K") = kDefaultGridSize);

  m.def("count_flops_per_step", &count_flops_per_step, py::arg("d"), py::arg("n"),
        py::arg("num_layers"), py::arg("batch_size"));
  m.def(
      "train",
      [](const GenConfig& gen, int steps, int batch_size, int layers, double learning_rate) {
        TrainConfig cfg;
        cfg.gen = gen;
        cfg.steps = steps;
        cfg.batch_size = batch_size;
        cfg.layers = layers;
        cfg.learning_rate = learning_rate;
        TrainReport r;
        {
          py::gil_scoped_release release;
          r = train(cfg);
        }
        std::vector<double> losses;
        for (const auto& [step, loss] : r.loss_curve) losses.push_back(loss);
        return py::make_tuple(r.final_params, losses, r.flops_total);
      },
      py::arg("gen"), py::arg("steps"), py::arg("batch_size") = 64, py::arg("layers") = 2,
      py::arg("learning_rate") = 1e-3, "Returns (params, loss_curve, flops_total).");
  m.def(
      "load_checkpoint", [](const std::string& path) { return load_checkpoint(path).params; },
      py::arg("path"));

  m.def(
      "wasserstein_samples",
      [](const std::vector<double>& a, const std::vector<double>& b) { return wasserstein_samples(a, b); },
      py::arg("a"), py::arg("b"));

  py::class_<ScalingParams>(m, "ScalingParams")
      .def(py::init<double, double, double, double, double>(), py::arg("alpha"), py::arg("beta"),
           py::arg("A"), py::arg("B"), py::arg("E"))
      .def_readonly("alpha", &ScalingParams::alpha)
      .def_readonly("beta", &ScalingParams::beta)
      .def_readonly("A", &ScalingParams::A)
      .def_readonly("B", &ScalingParams::B)
      .def_readonly("E", &ScalingParams::E);
  py::class_<ScalingFit>(m, "ScalingFit")
      .def_readonly("params", &ScalingFit::params)
      .def_readonly("a", &ScalingFit::a)
      .def_readonly("b", &ScalingFit::b)
      .def_readonly("fit_loss", &ScalingFit::fit_loss)
      .def("predict", &ScalingFit::predict);
  m.def("scaling_law", &scaling_law, py::arg("N"), py::arg("D"), py::arg("params"));
  m.def("asymmetric_mae", &asymmetric_mae, py::arg("y_true"), py::arg("y_pred"),
        py::arg("lambda_asym") = 0.1);
  m.def(
      "fit_scaling_law",
      [](const std::vector<double>& N, const std::vector<double>& D, const std::vector<double>& loss,
         double lambda_asym, int n_starts) {
        if (N.size() != D.size() || N.size() != loss.size()) {
          throw ArgumentError("fit_scaling_law: N, D and loss must have equal lengths");
        }
        std::vector<ScalingDatapoint> data;
        for (std::size_t i = 0; i < N.size(); ++i) data.push_back({N[i], D[i], loss[i], 1.0});
        ScalingFitOptions opt;
        opt.lambda_asym = lambda_asym;
        opt.n_starts = n_starts;
        py::gil_scoped_release release;
        return fit_scaling_law(data, opt);
      },
      py::arg("N"), py::arg("D"), py::arg("loss"), py::arg("lambda_asym") = 0.1, py::arg("n_starts") = 64);
  m.def(
      "optimal_allocation",
      [](const ScalingParams& p, double C, double k) {
        const Allocation a = optimal_allocation(ScalingFit::from_params(p), C, bilinear_flops_model(k));
        return py::make_tuple(a.N, a.D, a.loss);
      },
      py::arg("params"), py::arg("C"), py::arg("k") = 6.0,
      "Compute-optimal (N, D, loss) under C = k N D.");
}
