#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "oustab/ou_model.hpp"
#include "oustab/spd_matrix.hpp"

namespace oustab {

// Streaming estimators of the minimum µ*.  Each observes a trajectory one
// iterate at a time and can report its current estimate at any point.
enum class StabilizerKind {
  LastIterate,  // raw θ_t
  FlatAverage,  // arithmetic mean of all observed iterates
  PowerEma,     // EMA with polynomially decaying weight β_t
  Bema,         // EMA plus the additive bias correction α_t (θ_t - θ_0)
  Ouema,        // EMA of pointwise-debiased iterates
  Dema,         // 2·EMA - EMA(EMA)
  Mle,          // endpoint displacement plus trajectory time average
};

enum class OuemaDebias {
  // (1 - (1 + γ t)^{-bias_power})^{-1} (θ_t - (1 + γ t)^{-bias_power} θ_0),
  // the practical schedule on the raw step index.
  PowerLaw,
  // (I - e^{-A t})^{-1} (θ_t - e^{-A t} θ_0) with physical time t and the
  // curvature matrix passed via the a_tilde slot; pointwise unbiased on OU
  // trajectories.
  ContinuousTime,
};

enum class MleIntegration {
  Trapezoid,    // second-order accurate; matches the flat average on constants
  LeftRiemann,  // exact flat-average compatibility fallback
};

// Hyperparameters shared by the EMA-family estimators and the knobs the
// other kinds need.  `bias_power` may be +infinity, which turns the BEMA
// correction off and recovers the plain power EMA.
struct BemaConfig {
  double kappa = 0.5;
  double bias_power = 0.2;
  double gamma = 1.0;
  double rho = 10.0;
  long burn_in = 0;    // τ, in observe calls
  long frequency = 400;  // φ, update cadence in observe calls
  // Physical time per observe call; calibrates Mle and the continuous-time
  // Ouema debias.  The experiment harness sets it to the simulation step.
  double time_step = 1.0;
  OuemaDebias ouema_debias = OuemaDebias::PowerLaw;
  MleIntegration mle_integration = MleIntegration::Trapezoid;
};

void validate_bema_config(const BemaConfig& config);

struct BemaWeights {
  double alpha;  // bias-correction weight (ρ + γ t)^{-bias_power}, 0 at +inf
  double beta;   // EMA weight (ρ + γ t)^{-κ}
};

BemaWeights bema_weights(long t, const BemaConfig& config);

// State machine for one estimator.
//
// Update cadence: PowerEma/Bema/Ouema/Dema advance only on tick steps, i.e.
// when t > τ and (t - τ) mod φ == 0, and are frozen in between; LastIterate,
// FlatAverage and Mle update on every observe.  During burn-in (t ≤ τ) the
// state tracks θ_t, re-snapshots θ_0 and resets its accumulators — except
// the continuous-time Ouema, whose burn-in only delays averaging so the
// debiasing keeps the true start point and absolute time.
//
// Single-writer: observe mutates in place; distinct states are independent.
class StabilizerState {
 public:
  StabilizerState(StabilizerKind kind, BemaConfig config, Eigen::VectorXd theta0,
                  std::optional<SpdMatrix> a_tilde = std::nullopt);

  void observe(const Eigen::Ref<const Eigen::VectorXd>& theta);
  // Current estimate; pure read.  Fresh states report θ_0.
  const Eigen::VectorXd& estimate() const { return last_estimate_; }

  StabilizerKind kind() const { return kind_; }
  const BemaConfig& config() const { return config_; }
  long step_count() const { return step_count_; }
  Eigen::Index dim() const { return theta0_.size(); }
  const Eigen::VectorXd& theta0_snapshot() const { return theta0_; }
  // Plug-in operator for Mle (also carries A for the continuous Ouema
  // debias); identity when none was supplied.
  const SpdMatrix& a_tilde() const { return a_tilde_; }
  bool a_tilde_defaulted() const { return a_tilde_defaulted_; }

 private:
  void burn_in_reset(const Eigen::Ref<const Eigen::VectorXd>& theta);
  void tick_update(const Eigen::Ref<const Eigen::VectorXd>& theta);
  Eigen::VectorXd debiased(const Eigen::Ref<const Eigen::VectorXd>& theta) const;
  void mle_update(const Eigen::Ref<const Eigen::VectorXd>& theta);

  StabilizerKind kind_;
  BemaConfig config_;
  SpdMatrix a_tilde_;
  bool a_tilde_defaulted_;

  Eigen::VectorXd theta0_;
  Eigen::VectorXd ema_;
  Eigen::VectorXd ema_of_ema_;
  Eigen::VectorXd running_integral_;
  Eigen::VectorXd last_theta_;
  Eigen::VectorXd last_estimate_;
  long step_count_ = 0;
  long samples_since_burn_in_ = 0;
  bool ema_seeded_ = false;  // continuous Ouema seeds the EMA on its first tick
};

// Batch re-application to a stored trajectory: for each checkpoint index the
// estimate a fresh streaming state would report after observing that prefix.
// Equals the streaming output bitwise.  Checkpoints must be sorted and within
// range; index 0 maps to the initial estimate θ_0.
std::vector<Eigen::VectorXd> replay(StabilizerKind kind, const BemaConfig& config,
                                    const std::vector<TrajectorySample>& trajectory,
                                    const std::vector<long>& checkpoints,
                                    const std::optional<SpdMatrix>& a_tilde = std::nullopt);

}  // namespace oustab
