#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <json.hpp>

#include "oustab/config.hpp"
#include "oustab/errors.hpp"
#include "oustab/experiment.hpp"
#include "oustab/oracle.hpp"
#include "oustab/ou_model.hpp"
#include "oustab/report_io.hpp"
#include "oustab/rng.hpp"
#include "oustab/spd_matrix.hpp"
#include "oustab/stabilizer.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

oustab::RiskQuery make_query(const oustab::OuModel& model, double horizon_t,
                             std::optional<double> tau, std::optional<double> contraction_l,
                             std::optional<oustab::SpdMatrix> a_tilde,
                             std::optional<double> c_small_t) {
  return oustab::RiskQuery{.model = model,
                           .horizon_t = horizon_t,
                           .tau = tau,
                           .contraction_l = contraction_l,
                           .a_tilde = std::move(a_tilde),
                           .c_small_t = c_small_t};
}

py::dict report_to_dict(const oustab::MseReport& report) {
  py::dict meta;
  meta["config_hash"] = report.config_hash;
  meta["base_seed"] = report.base_seed;
  meta["wall_time_seconds"] = report.wall_time_seconds;
  py::list rows;
  for (const auto& row : report.rows) {
    py::dict r;
    r["stabilizer"] = row.stabilizer;
    r["checkpoint_t"] = row.checkpoint_t;
    r["mse"] = row.mse;
    r["stderr"] = row.stderr_;
    r["trials"] = row.trials;
    r["oracle_exact"] = row.oracle_exact ? py::cast(*row.oracle_exact) : py::none();
    r["oracle_upper"] = row.oracle_upper ? py::cast(*row.oracle_upper) : py::none();
    r["oracle_lower"] = row.oracle_lower ? py::cast(*row.oracle_lower) : py::none();
    r["bound_applicability"] = row.bound_applicability;
    rows.append(std::move(r));
  }
  py::dict out;
  out["metadata"] = std::move(meta);
  out["rows"] = std::move(rows);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "OU-process trajectory simulation, stabilizers, and closed-form risk oracles";

  py::register_exception<oustab::ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<oustab::UnsupportedConfigError>(m, "UnsupportedConfigError",
                                                         PyExc_ValueError);
  py::register_exception<oustab::NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<oustab::FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<oustab::IoError>(m, "IoError", PyExc_OSError);

  py::class_<oustab::RngStream>(m, "RngStream")
      .def(py::init<std::uint64_t>(), "seed"_a)
      .def_static("for_trial", &oustab::RngStream::for_trial, "base_seed"_a, "trial_index"_a)
      .def("next_u64", &oustab::RngStream::next_u64)
      .def("next_double", &oustab::RngStream::next_double)
      .def("next_gaussian", &oustab::RngStream::next_gaussian)
      .def("gaussian_vector", &oustab::RngStream::gaussian_vector, "dim"_a);

  py::class_<oustab::SpectralOperator>(m, "SpectralOperator")
      .def_property_readonly("values", &oustab::SpectralOperator::values)
      .def_property_readonly("basis", &oustab::SpectralOperator::basis)
      .def("apply", &oustab::SpectralOperator::apply, "x"_a)
      .def("dense", &oustab::SpectralOperator::dense)
      .def("trace", &oustab::SpectralOperator::trace);

  py::class_<oustab::SpdMatrix>(m, "SpdMatrix")
      .def_static(
          "from_eigs",
          [](const Eigen::VectorXd& eigs, std::optional<Eigen::MatrixXd> basis) {
            return oustab::SpdMatrix::from_eigs(eigs, basis);
          },
          "eigenvalues"_a, "basis"_a = py::none())
      .def_static("identity", &oustab::SpdMatrix::identity, "dim"_a)
      .def_static("scaled_identity", &oustab::SpdMatrix::scaled_identity, "dim"_a, "value"_a)
      .def_property_readonly("dim", &oustab::SpdMatrix::dim)
      .def_property_readonly("eigenvalues", &oustab::SpdMatrix::eigenvalues)
      .def_property_readonly("basis", &oustab::SpdMatrix::basis)
      .def("lambda_min", &oustab::SpdMatrix::lambda_min)
      .def("lambda_max", &oustab::SpdMatrix::lambda_max)
      .def("apply", &oustab::SpdMatrix::apply, "x"_a)
      .def("solve", &oustab::SpdMatrix::solve, "x"_a)
      .def("dense", &oustab::SpdMatrix::dense)
      .def("scaled", &oustab::SpdMatrix::scaled, "s"_a);

  m.def("spd_fn",
        py::overload_cast<const oustab::SpdMatrix&, const std::function<double(double)>&>(
            &oustab::spd_fn),
        "m"_a, "f"_a);
  m.def("spd_fn",
        py::overload_cast<const oustab::SpectralOperator&, const std::function<double(double)>&>(
            &oustab::spd_fn),
        "m"_a, "f"_a);

  py::class_<oustab::TrajectorySample>(m, "TrajectorySample")
      .def(py::init([](double t, Eigen::VectorXd theta) {
             return oustab::TrajectorySample{t, std::move(theta)};
           }),
           "t"_a, "theta"_a)
      .def_readonly("t", &oustab::TrajectorySample::t)
      .def_readonly("theta", &oustab::TrajectorySample::theta);

  py::class_<oustab::OuModel>(m, "OuModel")
      .def_static("isotropic", &oustab::OuModel::isotropic, "a"_a, "sigma"_a, "eta"_a,
                  "mu_star"_a, "theta0"_a)
      .def_static("general_noise", &oustab::OuModel::general_noise, "a"_a, "sigma"_a, "eta"_a,
                  "mu_star"_a, "theta0"_a)
      .def_property_readonly("dim", &oustab::OuModel::dim)
      .def_property_readonly("a", &oustab::OuModel::a)
      .def_property_readonly("is_isotropic", &oustab::OuModel::is_isotropic)
      .def_property_readonly("eta", &oustab::OuModel::eta)
      .def_property_readonly("mu_star", &oustab::OuModel::mu_star)
      .def_property_readonly("theta0", &oustab::OuModel::theta0)
      .def_property_readonly("sigma", [](const oustab::OuModel& mdl) { return mdl.sigma(); });

  m.def("ou_mean", &oustab::ou_mean, "model"_a, "t"_a);
  m.def("ou_cov", &oustab::ou_cov, "model"_a, "s"_a, "t"_a);
  m.def("ou_exact_step", &oustab::ou_exact_step, "model"_a, "theta"_a, "dt"_a, "rng"_a);
  m.def("ou_exact_step_with_noise", &oustab::ou_exact_step_with_noise, "model"_a, "theta"_a,
        "dt"_a, "z"_a);
  m.def(
      "em_step",
      [](const oustab::OuModel& model, const Eigen::VectorXd& theta, double h,
         oustab::RngStream& rng) {
        auto r = oustab::em_step(model, theta, h, rng);
        return py::make_tuple(std::move(r.theta), r.stability_warning);
      },
      "model"_a, "theta"_a, "h"_a, "rng"_a);
  m.def(
      "em_step_with_noise",
      [](const oustab::OuModel& model, const Eigen::VectorXd& theta, double h,
         const Eigen::VectorXd& z) {
        auto r = oustab::em_step_with_noise(model, theta, h, z);
        return py::make_tuple(std::move(r.theta), r.stability_warning);
      },
      "model"_a, "theta"_a, "h"_a, "z"_a);

  py::enum_<oustab::Scheme>(m, "Scheme")
      .value("Exact", oustab::Scheme::Exact)
      .value("Euler", oustab::Scheme::Euler);

  m.def("simulate", &oustab::simulate, "model"_a, "scheme"_a, "step"_a, "n_steps"_a, "rng"_a);

  py::enum_<oustab::StabilizerKind>(m, "StabilizerKind")
      .value("LastIterate", oustab::StabilizerKind::LastIterate)
      .value("FlatAverage", oustab::StabilizerKind::FlatAverage)
      .value("PowerEma", oustab::StabilizerKind::PowerEma)
      .value("Bema", oustab::StabilizerKind::Bema)
      .value("Ouema", oustab::StabilizerKind::Ouema)
      .value("Dema", oustab::StabilizerKind::Dema)
      .value("Mle", oustab::StabilizerKind::Mle);

  py::enum_<oustab::OuemaDebias>(m, "OuemaDebias")
      .value("PowerLaw", oustab::OuemaDebias::PowerLaw)
      .value("ContinuousTime", oustab::OuemaDebias::ContinuousTime);

  py::enum_<oustab::MleIntegration>(m, "MleIntegration")
      .value("Trapezoid", oustab::MleIntegration::Trapezoid)
      .value("LeftRiemann", oustab::MleIntegration::LeftRiemann);

  py::class_<oustab::BemaConfig>(m, "BemaConfig")
      .def(py::init<>())
      .def_readwrite("kappa", &oustab::BemaConfig::kappa)
      .def_readwrite("bias_power", &oustab::BemaConfig::bias_power)
      .def_readwrite("gamma", &oustab::BemaConfig::gamma)
      .def_readwrite("rho", &oustab::BemaConfig::rho)
      .def_readwrite("burn_in", &oustab::BemaConfig::burn_in)
      .def_readwrite("frequency", &oustab::BemaConfig::frequency)
      .def_readwrite("time_step", &oustab::BemaConfig::time_step)
      .def_readwrite("ouema_debias", &oustab::BemaConfig::ouema_debias)
      .def_readwrite("mle_integration", &oustab::BemaConfig::mle_integration);

  m.def(
      "bema_weights",
      [](long t, const oustab::BemaConfig& config) {
        const auto w = oustab::bema_weights(t, config);
        return py::make_tuple(w.alpha, w.beta);
      },
      "t"_a, "config"_a);

  py::class_<oustab::StabilizerState>(m, "StabilizerState")
      .def(py::init<oustab::StabilizerKind, oustab::BemaConfig, Eigen::VectorXd,
                    std::optional<oustab::SpdMatrix>>(),
           "kind"_a, "config"_a, "theta0"_a, "a_tilde"_a = py::none())
      .def("observe", &oustab::StabilizerState::observe, "theta"_a)
      .def("estimate", &oustab::StabilizerState::estimate)
      .def_property_readonly("kind", &oustab::StabilizerState::kind)
      .def_property_readonly("step_count", &oustab::StabilizerState::step_count)
      .def_property_readonly("a_tilde_defaulted", &oustab::StabilizerState::a_tilde_defaulted);

  m.def("replay", &oustab::replay, "kind"_a, "config"_a, "trajectory"_a, "checkpoints"_a,
        "a_tilde"_a = py::none());

  // Closed-form risk oracles.
  m.def(
      "cramer_rao_lower",
      [](const oustab::OuModel& model, double horizon_t, std::optional<double> contraction_l) {
        return oustab::cramer_rao_lower(
            make_query(model, horizon_t, {}, contraction_l, {}, {}));
      },
      "model"_a, "horizon_t"_a, "contraction_l"_a = py::none());
  m.def(
      "vanilla_mse",
      [](const oustab::OuModel& model, double horizon_t) {
        return oustab::vanilla_mse(make_query(model, horizon_t, {}, {}, {}, {}));
      },
      "model"_a, "horizon_t"_a);
  m.def(
      "ema_mse_upper",
      [](const oustab::OuModel& model, double horizon_t) {
        return oustab::ema_mse_upper(make_query(model, horizon_t, {}, {}, {}, {}));
      },
      "model"_a, "horizon_t"_a);
  m.def(
      "ema_mse_lower",
      [](const oustab::OuModel& model, double horizon_t, double c_small_t) {
        return oustab::ema_mse_lower(make_query(model, horizon_t, {}, {}, {}, c_small_t));
      },
      "model"_a, "horizon_t"_a, "c_small_t"_a);
  m.def(
      "ouema_mse_upper",
      [](const oustab::OuModel& model, double horizon_t, double tau) {
        return oustab::ouema_mse_upper(make_query(model, horizon_t, tau, {}, {}, {}));
      },
      "model"_a, "horizon_t"_a, "tau"_a);
  m.def(
      "mle_mse",
      [](const oustab::OuModel& model, double horizon_t) {
        return oustab::mle_mse(make_query(model, horizon_t, {}, {}, {}, {}));
      },
      "model"_a, "horizon_t"_a);
  m.def(
      "mle_sampling_cov",
      [](const oustab::OuModel& model, double horizon_t) {
        return oustab::mle_sampling_cov(make_query(model, horizon_t, {}, {}, {}, {}));
      },
      "model"_a, "horizon_t"_a);
  m.def(
      "wrong_a_mse_upper",
      [](const oustab::OuModel& model, double horizon_t, const oustab::SpdMatrix& a_tilde) {
        return oustab::wrong_a_mse_upper(make_query(model, horizon_t, {}, {}, a_tilde, {}));
      },
      "model"_a, "horizon_t"_a, "a_tilde"_a);

  // Harness entry points driven by JSON configuration text.
  m.def(
      "run_experiment",
      [](const std::string& config_json, int threads) {
        const nlohmann::json j = nlohmann::json::parse(config_json);
        const auto config = oustab::experiment_config_from_json(j);
        const auto resolved = oustab::resolve_experiment(config);
        return report_to_dict(
            oustab::run_experiment(resolved, oustab::config_hash_hex(j), threads));
      },
      "config_json"_a, "threads"_a = 1);
  m.def(
      "run_trial",
      [](const std::string& config_json, long trial_index) {
        const auto config =
            oustab::experiment_config_from_json(nlohmann::json::parse(config_json));
        return oustab::run_trial(config, trial_index);
      },
      "config_json"_a, "trial_index"_a);

  py::class_<oustab::CheckpointStream>(m, "CheckpointStream")
      .def(py::init([](std::vector<long> step_indices, Eigen::MatrixXd records) {
             oustab::CheckpointStream s;
             s.dim = records.cols();
             s.step_indices = std::move(step_indices);
             s.records = std::move(records);
             oustab::validate_checkpoint_stream(s);
             return s;
           }),
           "step_indices"_a, "records"_a)
      .def_readonly("dim", &oustab::CheckpointStream::dim)
      .def_readonly("step_indices", &oustab::CheckpointStream::step_indices)
      .def_readonly("records", &oustab::CheckpointStream::records);

  m.def("write_checkpoint_stream", &oustab::write_checkpoint_stream, "stream"_a,
        "manifest_path"_a, "payload_path"_a);
  m.def("read_checkpoint_stream", &oustab::read_checkpoint_stream, "manifest_path"_a);
}
