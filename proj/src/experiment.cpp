#include "oustab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "oustab/errors.hpp"

namespace oustab {

namespace {

Eigen::VectorXd fill_vector(const std::variant<double, std::vector<double>>& spec,
                            Eigen::Index dim, const char* what) {
  if (std::holds_alternative<double>(spec)) {
    return Eigen::VectorXd::Constant(dim, std::get<double>(spec));
  }
  const auto& values = std::get<std::vector<double>>(spec);
  if (static_cast<Eigen::Index>(values.size()) != dim) {
    throw ValidationError(std::string(what) + " has " + std::to_string(values.size()) +
                          " entries, expected " + std::to_string(dim));
  }
  return Eigen::Map<const Eigen::VectorXd>(values.data(), dim);
}

}  // namespace

OuModel build_model(const ModelSpec& spec) {
  if (spec.dim < 1) throw ValidationError("model: dim must be >= 1");
  SpdMatrix a = SpdMatrix::identity(spec.dim);
  if (spec.eigenvalues.has_value()) {
    if (static_cast<Eigen::Index>(spec.eigenvalues->size()) != spec.dim) {
      throw ValidationError("model: eigenvalue list length does not match dim");
    }
    a = SpdMatrix::from_eigs(
        Eigen::Map<const Eigen::VectorXd>(spec.eigenvalues->data(), spec.dim));
  }
  return OuModel::isotropic(std::move(a), spec.sigma, spec.eta,
                            fill_vector(spec.mu_star, spec.dim, "model.mu_star"),
                            fill_vector(spec.theta0, spec.dim, "model.theta0"));
}

SpdMatrix resolve_a_tilde(const ATildeSpec& spec, const SpdMatrix& a) {
  switch (spec.kind) {
    case ATildeSpec::Kind::Model:
      return a;
    case ATildeSpec::Kind::ScaleModel:
      return a.scaled(spec.scale);
    case ATildeSpec::Kind::ScaledIdentity:
      return SpdMatrix::scaled_identity(a.dim(), spec.scale);
    case ATildeSpec::Kind::Eigenvalues: {
      if (static_cast<Eigen::Index>(spec.eigenvalues.size()) != a.dim()) {
        throw ValidationError("a_tilde eigenvalue list length does not match the model dimension");
      }
      const Eigen::Map<const Eigen::VectorXd> eigs(spec.eigenvalues.data(), a.dim());
      if (a.identity_basis()) return SpdMatrix::from_eigs(eigs);
      return SpdMatrix::from_eigs(eigs, a.basis());
    }
  }
  throw ValidationError("a_tilde: unknown spec kind");
}

ResolvedExperiment resolve_experiment(const ExperimentConfig& config) {
  if (!(config.step > 0.0) || !std::isfinite(config.step)) {
    throw ValidationError("experiment: step must be a positive real");
  }
  if (!(config.horizon > 0.0) || !std::isfinite(config.horizon)) {
    throw ValidationError("experiment: horizon must be a positive real");
  }
  if (config.trials < 1) throw ValidationError("experiment: trials must be >= 1");
  if (config.stabilizers.empty()) {
    throw ValidationError("experiment: at least one stabilizer is required");
  }
  if (config.format != "csv" && config.format != "json") {
    throw ValidationError("experiment: format must be 'csv' or 'json'");
  }

  ResolvedExperiment out{.model = build_model(config.model),
                         .scheme = config.scheme,
                         .step = config.step,
                         .n_steps = 0,
                         .checkpoint_steps = {},
                         .checkpoint_times = {},
                         .stabilizers = {},
                         .trials = config.trials,
                         .base_seed = config.base_seed,
                         .oracle = config.oracle,
                         .em_stability_warning = false};

  out.n_steps = std::lround(config.horizon / config.step);
  if (out.n_steps < 1) throw ValidationError("experiment: horizon spans no simulation steps");
  if (config.scheme == Scheme::Exact && !out.model.is_isotropic()) {
    throw UnsupportedConfigError("experiment: exact scheme requires an isotropic model");
  }
  out.em_stability_warning =
      config.scheme == Scheme::Euler && config.step >= 2.0 / out.model.a().lambda_max();

  // Checkpoints snap to the nearest simulated step; snapped times are what
  // the report carries, so grid drift is visible rather than silent.
  if (config.checkpoints.empty()) throw ValidationError("experiment: no checkpoints given");
  for (double t : config.checkpoints) {
    const long idx = std::lround(t / config.step);
    if (idx < 0 || idx > out.n_steps) {
      throw ValidationError("experiment: checkpoint " + std::to_string(t) +
                            " lies outside the simulated horizon");
    }
    out.checkpoint_steps.push_back(idx);
  }
  std::sort(out.checkpoint_steps.begin(), out.checkpoint_steps.end());
  out.checkpoint_steps.erase(
      std::unique(out.checkpoint_steps.begin(), out.checkpoint_steps.end()),
      out.checkpoint_steps.end());
  for (long idx : out.checkpoint_steps) {
    out.checkpoint_times.push_back(static_cast<double>(idx) * config.step);
  }

  for (const StabilizerSpec& spec : config.stabilizers) {
    if (spec.name.empty()) throw ValidationError("stabilizer spec: name must not be empty");
    if (spec.name.find(',') != std::string::npos) {
      throw ValidationError("stabilizer spec: name must not contain commas");
    }
    ResolvedExperiment::ResolvedStabilizer r;
    r.name = spec.name;
    r.kind = spec.kind;
    r.config = spec.config;
    if (!spec.time_step_explicit) r.config.time_step = config.step;
    validate_bema_config(r.config);
    if (spec.a_tilde.has_value()) {
      r.a_tilde = resolve_a_tilde(*spec.a_tilde, out.model.a());
    }
    out.stabilizers.push_back(std::move(r));
  }
  for (std::size_t i = 0; i < out.stabilizers.size(); ++i) {
    for (std::size_t j = i + 1; j < out.stabilizers.size(); ++j) {
      if (out.stabilizers[i].name == out.stabilizers[j].name) {
        throw ValidationError("stabilizer names must be unique: '" + out.stabilizers[i].name +
                              "'");
      }
    }
  }
  return out;
}

namespace {

std::vector<StabilizerState> make_states(const ResolvedExperiment& ex) {
  std::vector<StabilizerState> states;
  states.reserve(ex.stabilizers.size());
  for (const auto& s : ex.stabilizers) {
    states.emplace_back(s.kind, s.config, ex.model.theta0(), s.a_tilde);
  }
  return states;
}

}  // namespace

namespace {

Eigen::MatrixXd run_trial_impl(const ResolvedExperiment& ex, long trial_index, bool zero_noise) {
  RngStream rng = RngStream::for_trial(ex.base_seed, static_cast<std::uint64_t>(trial_index));
  std::vector<StabilizerState> states = make_states(ex);
  const Eigen::Index d = ex.model.dim();
  const std::size_t n_states = states.size();

  Eigen::MatrixXd sq_errors(static_cast<Eigen::Index>(n_states),
                            static_cast<Eigen::Index>(ex.checkpoint_steps.size()));

  std::size_t next_ck = 0;
  auto record_if_checkpoint = [&](long step_index) {
    while (next_ck < ex.checkpoint_steps.size() && ex.checkpoint_steps[next_ck] == step_index) {
      for (std::size_t s = 0; s < n_states; ++s) {
        sq_errors(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(next_ck)) =
            (states[s].estimate() - ex.model.mu_star()).squaredNorm();
      }
      ++next_ck;
    }
  };

  record_if_checkpoint(0);

  std::optional<ExactTransition> transition;
  if (ex.scheme == Scheme::Exact) transition.emplace(ex.model, ex.step);

  Eigen::VectorXd theta = ex.model.theta0();
  Eigen::VectorXd z(d);
  for (long k = 1; k <= ex.n_steps; ++k) {
    if (zero_noise) {
      z.setZero();
    } else {
      rng.fill_gaussian(z);
    }
    if (ex.scheme == Scheme::Exact) {
      theta = transition->step_with_noise(theta, z);
    } else {
      theta = em_step_with_noise(ex.model, theta, ex.step, z).theta;
    }
    for (std::size_t s = 0; s < n_states; ++s) states[s].observe(theta);
    record_if_checkpoint(k);
  }
  return sq_errors;
}

}  // namespace

Eigen::MatrixXd run_trial(const ResolvedExperiment& experiment, long trial_index) {
  return run_trial_impl(experiment, trial_index, false);
}

Eigen::MatrixXd run_trial_zero_noise(const ResolvedExperiment& experiment, long trial_index) {
  return run_trial_impl(experiment, trial_index, true);
}

Eigen::MatrixXd run_trial(const ExperimentConfig& config, long trial_index) {
  return run_trial(resolve_experiment(config), trial_index);
}

namespace {

struct OracleCells {
  std::optional<double> exact, upper, lower;
  std::string applicability = "none";
};

void append_label(std::string& applicability, const std::string& label) {
  if (applicability == "none") applicability = label;
  else applicability += "+" + label;
}

OracleCells attach_oracle(const ResolvedExperiment& ex,
                          const ResolvedExperiment::ResolvedStabilizer& s, double t) {
  OracleCells cells;
  if (!(t > 0.0)) return cells;

  RiskQuery q{.model = ex.model,
              .horizon_t = t,
              .tau = std::nullopt,
              .contraction_l = std::nullopt,
              .a_tilde = std::nullopt,
              .c_small_t = ex.oracle.c_small_t};
  const bool isotropic = ex.model.is_isotropic();

  switch (s.kind) {
    case StabilizerKind::LastIterate:
      if (isotropic) {
        cells.exact = vanilla_mse(q);
        append_label(cells.applicability, "exact");
      } else {
        cells.upper = vanilla_mse(q);
        append_label(cells.applicability, "upper");
      }
      break;
    case StabilizerKind::FlatAverage: {
      cells.upper = ema_mse_upper(q);
      append_label(cells.applicability, "upper");
      if (isotropic && ex.oracle.c_small_t.has_value()) {
        cells.lower = ema_mse_lower(q);
        append_label(cells.applicability, cells.lower.has_value() ? "lower" : "lower:n/a");
      }
      break;
    }
    case StabilizerKind::Ouema:
      if (s.config.ouema_debias == OuemaDebias::ContinuousTime && isotropic) {
        // Unbiased by construction, so the information bound applies.
        cells.lower = cramer_rao_lower(q);
        append_label(cells.applicability, "lower");
        const double tau = static_cast<double>(s.config.burn_in) * s.config.time_step;
        if (tau > 0.0 && tau < t) {
          q.tau = tau;
          cells.upper = ouema_mse_upper(q);
          append_label(cells.applicability, "upper");
        }
      }
      break;
    case StabilizerKind::Mle:
      if (isotropic) {
        const SpdMatrix& tilde = s.a_tilde.has_value() ? *s.a_tilde
                                                       : SpdMatrix::identity(ex.model.dim());
        if (tilde.same_operator_as(ex.model.a())) {
          cells.exact = mle_mse(q);
          cells.lower = cramer_rao_lower(q);
          append_label(cells.applicability, "exact");
          append_label(cells.applicability, "lower");
        } else {
          q.a_tilde = tilde;
          cells.upper = wrong_a_mse_upper(q);
          append_label(cells.applicability, "upper");
        }
      }
      break;
    default:
      break;
  }
  return cells;
}

}  // namespace

MseReport run_experiment(const ResolvedExperiment& ex, const std::string& config_hash,
                         int threads) {
  const auto start = std::chrono::steady_clock::now();

  const long trials = ex.trials;
  std::vector<Eigen::MatrixXd> per_trial(static_cast<std::size_t>(trials));
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(trials)));
  if (workers == 1) {
    for (long i = 0; i < trials; ++i) per_trial[static_cast<std::size_t>(i)] = run_trial(ex, i);
  } else {
    std::atomic<long> next{0};
    auto worker = [&]() {
      for (;;) {
        const long i = next.fetch_add(1);
        if (i >= trials) return;
        per_trial[static_cast<std::size_t>(i)] = run_trial(ex, i);
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  MseReport report;
  report.config_hash = config_hash;
  report.base_seed = ex.base_seed;

  const std::size_t n_ck = ex.checkpoint_steps.size();
  for (std::size_t s = 0; s < ex.stabilizers.size(); ++s) {
    for (std::size_t c = 0; c < n_ck; ++c) {
      ReportRow row;
      row.stabilizer = ex.stabilizers[s].name;
      row.checkpoint_t = ex.checkpoint_times[c];
      row.trials = trials;
      double sum = 0.0;
      for (long i = 0; i < trials; ++i) {
        sum += per_trial[static_cast<std::size_t>(i)](static_cast<Eigen::Index>(s),
                                                      static_cast<Eigen::Index>(c));
      }
      row.mse = sum / static_cast<double>(trials);
      if (trials >= 2) {
        double sq_dev = 0.0;
        for (long i = 0; i < trials; ++i) {
          const double dev = per_trial[static_cast<std::size_t>(i)](
                                 static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(c)) -
                             row.mse;
          sq_dev += dev * dev;
        }
        row.stderr_ = std::sqrt(sq_dev / static_cast<double>(trials - 1)) /
                      std::sqrt(static_cast<double>(trials));
      } else {
        row.stderr_ = std::numeric_limits<double>::quiet_NaN();
      }
      const OracleCells cells = attach_oracle(ex, ex.stabilizers[s], row.checkpoint_t);
      row.oracle_exact = cells.exact;
      row.oracle_upper = cells.upper;
      row.oracle_lower = cells.lower;
      row.bound_applicability = cells.applicability;
      report.rows.push_back(std::move(row));
    }
  }
  std::sort(report.rows.begin(), report.rows.end(), [](const ReportRow& a, const ReportRow& b) {
    if (a.stabilizer != b.stabilizer) return a.stabilizer < b.stabilizer;
    return a.checkpoint_t < b.checkpoint_t;
  });

  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

MseReport run_experiment(const ExperimentConfig& config, int threads) {
  return run_experiment(resolve_experiment(config), "", threads);
}

std::vector<CheckpointStream> replay_stream(const CheckpointStream& stream,
                                            const std::vector<StabilizerSpec>& specs,
                                            const std::optional<SpdMatrix>& model_a) {
  validate_checkpoint_stream(stream);
  if (stream.count() == 0) throw ValidationError("replay_stream: stream has no records");

  std::vector<CheckpointStream> outputs;
  outputs.reserve(specs.size());
  for (const StabilizerSpec& spec : specs) {
    std::optional<SpdMatrix> a_tilde;
    if (spec.a_tilde.has_value()) {
      const bool needs_model = spec.a_tilde->kind == ATildeSpec::Kind::Model ||
                               spec.a_tilde->kind == ATildeSpec::Kind::ScaleModel;
      if (needs_model && !model_a.has_value()) {
        throw ValidationError("replay_stream: a_tilde references the model curvature but none "
                              "was provided");
      }
      a_tilde = resolve_a_tilde(*spec.a_tilde,
                                model_a.has_value() ? *model_a
                                                    : SpdMatrix::identity(stream.dim));
    }

    StabilizerState state(spec.kind, spec.config, stream.records.row(0).transpose(), a_tilde);
    CheckpointStream out;
    out.dim = stream.dim;
    out.step_indices = stream.step_indices;
    out.records.resize(stream.count(), stream.dim);
    out.records.row(0) = state.estimate().transpose();
    for (long i = 1; i < stream.count(); ++i) {
      state.observe(stream.records.row(i).transpose());
      out.records.row(i) = state.estimate().transpose();
    }
    outputs.push_back(std::move(out));
  }
  return outputs;
}

}  // namespace oustab
