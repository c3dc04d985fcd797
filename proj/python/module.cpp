#include "dilgp/bayes_opt.hpp"
#include "dilgp/data.hpp"
#include "dilgp/dil.hpp"
#include "dilgp/experiments.hpp"
#include "dilgp/gp.hpp"
#include "dilgp/kernel.hpp"
#include "dilgp/quad_sim.hpp"

#include <nlohmann/json.hpp>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using nlohmann::json;

namespace {

// Structured values cross the boundary as JSON text; the Python package
// wraps these with json.loads/json.dumps.
std::string train_dil(const std::string& kind, const dilgp::KernelParams& init, double sigma2,
                      const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const std::string& config) {
  const auto cfg = json::parse(config).get<dilgp::TrainConfig>();
  dilgp::TrainResult r;
  {
    py::gil_scoped_release release;
    r = dilgp::train_dil_gp(dilgp::kernel_kind_from_string(kind), init, {sigma2}, X, y, cfg);
  }
  json out{{"params", r.params},  {"sigma2", r.noise.sigma2},
           {"aborted", r.aborted}, {"error", r.error},
           {"trace", r.trace},    {"q_tilde", std::vector<double>(r.q.q_tilde.data(), r.q.q_tilde.data() + r.q.q_tilde.size())}};
  return out.dump();
}

py::dict dataset_dict(const dilgp::Dataset& d) {
  py::dict out;
  out["x"] = d.x;
  out["y"] = d.y;
  if (d.domain_tag) out["domain"] = *d.domain_tag;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "DIL-GP core bindings";
  m.attr("__version__") = dilgp::tool_version();

  py::class_<dilgp::KernelParams>(m, "KernelParams")
      .def(py::init<>())
      .def_static("from_natural", &dilgp::KernelParams::from_natural, py::arg("s"), py::arg("l"),
                  py::arg("alpha") = 1.0, py::arg("sigma_dp") = 1.0)
      .def_readwrite("log_s", &dilgp::KernelParams::log_s)
      .def_readwrite("log_l", &dilgp::KernelParams::log_l)
      .def_readwrite("log_alpha", &dilgp::KernelParams::log_alpha)
      .def_readwrite("log_sigma_dp", &dilgp::KernelParams::log_sigma_dp)
      .def_property_readonly("s", &dilgp::KernelParams::s)
      .def_property_readonly("l", &dilgp::KernelParams::l)
      .def_property_readonly("alpha", &dilgp::KernelParams::alpha)
      .def_property_readonly("sigma_dp", &dilgp::KernelParams::sigma_dp)
      .def("__repr__", [](const dilgp::KernelParams& p) {
        return "KernelParams(" + json(p).dump() + ")";
      });

  m.def(
      "kernel_matrix",
      [](const std::string& kind, const dilgp::KernelParams& p, const Eigen::MatrixXd& X,
         const Eigen::MatrixXd& Y) {
        return dilgp::kernel_matrix(dilgp::kernel_kind_from_string(kind), p, X, Y);
      },
      py::arg("kind"), py::arg("params"), py::arg("x"), py::arg("y"));

  m.def(
      "log_marginal_likelihood",
      [](const std::string& kind, const dilgp::KernelParams& p, double sigma2,
         const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double mean_const) {
        return dilgp::log_marginal_likelihood(dilgp::kernel_kind_from_string(kind), p, {sigma2},
                                              X, y, mean_const);
      },
      py::arg("kind"), py::arg("params"), py::arg("sigma2"), py::arg("x"), py::arg("y"),
      py::arg("mean_const") = 0.0);

  m.def(
      "gp_predict",
      [](const std::string& kind, const dilgp::KernelParams& p, double sigma2,
         const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::MatrixXd& Xs) {
        const auto post = dilgp::GPPosterior::fit(dilgp::kernel_kind_from_string(kind), p,
                                                  {sigma2}, X, y);
        auto pred = post.predict(Xs);
        return py::make_tuple(pred.mean, pred.var);
      },
      py::arg("kind"), py::arg("params"), py::arg("sigma2"), py::arg("x"), py::arg("y"),
      py::arg("x_star"), "Posterior mean and latent variance at the rows of x_star.");

  m.def(
      "irm_penalty",
      [](const std::string& kind, const dilgp::KernelParams& p, double sigma2,
         const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& q) {
        const auto r = dilgp::irm_penalty(dilgp::kernel_kind_from_string(kind), p, {sigma2}, X,
                                          y, {q});
        return py::make_tuple(r.penalty, py::make_tuple(r.per_env_grad[0], r.per_env_grad[1]));
      },
      py::arg("kind"), py::arg("params"), py::arg("sigma2"), py::arg("x"), py::arg("y"),
      py::arg("q_tilde"));

  m.def("_train_dil_gp", &train_dil);

  m.def("gen_synthetic_1d", [](std::uint64_t seed) {
    auto [tr, te] = dilgp::gen_synthetic_1d(seed);
    return py::make_tuple(dataset_dict(tr), dataset_dict(te));
  });
  m.def("gen_synthetic_2d", [](std::uint64_t seed) {
    auto [tr, te] = dilgp::gen_synthetic_2d(seed);
    return py::make_tuple(dataset_dict(tr), dataset_dict(te));
  });
  m.def("rmse", &dilgp::rmse, py::arg("pred"), py::arg("truth"));
  m.def("coverage_rate", &dilgp::coverage_rate, py::arg("mean"), py::arg("std"), py::arg("truth"));

  m.def(
      "simulate",
      [](double kp, double ki, double kd, const std::string& trajectory, const std::string& wind,
         std::uint64_t seed) {
        const auto spec = json::parse(wind).get<dilgp::WindDomainSpec>();
        const auto r = dilgp::simulate({kp, ki, kd}, dilgp::trajectory_kind_from_string(trajectory),
                                       spec, seed);
        Eigen::MatrixXd pos(static_cast<Eigen::Index>(r.positions.size()), 3);
        for (std::size_t i = 0; i < r.positions.size(); ++i)
          pos.row(static_cast<Eigen::Index>(i)) = r.positions[i].transpose();
        return py::make_tuple(r.ace, pos);
      },
      py::arg("kp"), py::arg("ki"), py::arg("kd"), py::arg("trajectory"), py::arg("wind"),
      py::arg("seed"));
  m.def("_wind_domain", [](int which) {
    return json(which == 1 ? dilgp::WindDomainSpec::domain1() : dilgp::WindDomainSpec::domain2())
        .dump();
  });

  m.def("_run_command", [](const std::string& command, const std::string& config,
                           const std::string& out_dir) {
    py::gil_scoped_release release;
    return dilgp::run_command(command, json::parse(config), out_dir).manifest.dump();
  });
  m.def("_replay", [](const std::string& manifest, const std::string& out_dir) {
    dilgp::ReplayReport r;
    {
      py::gil_scoped_release release;
      r = dilgp::replay(manifest, out_dir);
    }
    return py::make_tuple(r.identical, r.mismatched);
  });
}
