#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "oustab/checkpoint_stream.hpp"
#include "oustab/oracle.hpp"
#include "oustab/ou_model.hpp"
#include "oustab/report_io.hpp"
#include "oustab/stabilizer.hpp"

namespace oustab {

// Model description as it appears in experiment configs.  Eigenvalues are
// either an explicit list or absent for the identity curvature; µ* and θ0
// are either constant-filled or explicit vectors.
struct ModelSpec {
  Eigen::Index dim = 1;
  std::optional<std::vector<double>> eigenvalues;  // absent -> identity
  double sigma = 1.0;
  double eta = 1.0;
  std::variant<double, std::vector<double>> mu_star = 0.0;
  std::variant<double, std::vector<double>> theta0 = 0.0;
};

OuModel build_model(const ModelSpec& spec);

// Plug-in curvature choices for Mle (and the continuous-time Ouema debias).
struct ATildeSpec {
  enum class Kind { Model, ScaleModel, ScaledIdentity, Eigenvalues };
  Kind kind = Kind::Model;
  double scale = 1.0;                // ScaleModel / ScaledIdentity
  std::vector<double> eigenvalues;   // Eigenvalues, in A's basis
};

SpdMatrix resolve_a_tilde(const ATildeSpec& spec, const SpdMatrix& a);

struct StabilizerSpec {
  std::string name;
  StabilizerKind kind = StabilizerKind::LastIterate;
  BemaConfig config;
  std::optional<ATildeSpec> a_tilde;
  // When false the harness calibrates config.time_step to the simulation
  // step before running.
  bool time_step_explicit = false;
};

// Caller-supplied constants the oracle cannot infer.
struct OracleOptions {
  std::optional<double> c_small_t;
  std::optional<double> contraction_l;
};

struct ExperimentConfig {
  ModelSpec model;
  Scheme scheme = Scheme::Exact;
  double step = 0.01;
  double horizon = 1.0;
  std::vector<double> checkpoints;  // continuous times, snapped to the grid
  std::vector<StabilizerSpec> stabilizers;
  long trials = 1;
  std::uint64_t base_seed = 0;
  std::string format = "csv";  // csv | json
  std::optional<std::string> plot_path;
  OracleOptions oracle;
};

// Config with everything derived: built model, step counts, snapped
// checkpoints and fully resolved stabilizer parameters.
struct ResolvedExperiment {
  OuModel model;
  Scheme scheme;
  double step;
  long n_steps;
  std::vector<long> checkpoint_steps;   // sorted, unique
  std::vector<double> checkpoint_times; // snapped, checkpoint_steps * step
  struct ResolvedStabilizer {
    std::string name;
    StabilizerKind kind;
    BemaConfig config;
    std::optional<SpdMatrix> a_tilde;
  };
  std::vector<ResolvedStabilizer> stabilizers;
  long trials;
  std::uint64_t base_seed;
  OracleOptions oracle;
  bool em_stability_warning = false;  // advisory: step >= 2/λ_max(A)
};

ResolvedExperiment resolve_experiment(const ExperimentConfig& config);

// One seeded trajectory fed through every stabilizer in a single pass.
// Returns ‖estimate - µ*‖² per (stabilizer, checkpoint); deterministic in
// (config, trial_index).
Eigen::MatrixXd run_trial(const ResolvedExperiment& experiment, long trial_index);
Eigen::MatrixXd run_trial(const ExperimentConfig& config, long trial_index);
// Test hook: identical pass with the noise vector forced to zero.
Eigen::MatrixXd run_trial_zero_noise(const ResolvedExperiment& experiment, long trial_index);

// Aggregates trials into an MseReport with oracle columns attached.  Trials
// run on `threads` workers; results reduce in trial-index order, so the
// report does not depend on scheduling.
MseReport run_experiment(const ExperimentConfig& config, int threads = 1);
MseReport run_experiment(const ResolvedExperiment& experiment, const std::string& config_hash,
                         int threads = 1);

// Applies each stabilizer to a stored checkpoint stream: output record i is
// the estimate after observing input records 0..i.  The input is never
// modified.
std::vector<CheckpointStream> replay_stream(
    const CheckpointStream& stream, const std::vector<StabilizerSpec>& specs,
    const std::optional<SpdMatrix>& model_a = std::nullopt);

}  // namespace oustab
