#include "oustab/stabilizer.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "oustab/errors.hpp"

namespace oustab {

void validate_bema_config(const BemaConfig& config) {
  if (!(config.kappa >= 0.0) || !std::isfinite(config.kappa)) {
    throw ValidationError("stabilizer config: kappa must be a nonnegative real");
  }
  if (!(config.bias_power > 0.0)) {
    throw ValidationError("stabilizer config: bias_power must be positive (or +infinity)");
  }
  if (!(config.gamma > 0.0) || !std::isfinite(config.gamma)) {
    throw ValidationError("stabilizer config: gamma must be a positive real");
  }
  if (!(config.rho >= 0.0) || !std::isfinite(config.rho)) {
    throw ValidationError("stabilizer config: rho must be a nonnegative real");
  }
  if (config.burn_in < 0) throw ValidationError("stabilizer config: burn_in must be >= 0");
  if (config.frequency < 1) throw ValidationError("stabilizer config: frequency must be >= 1");
  if (!(config.time_step > 0.0) || !std::isfinite(config.time_step)) {
    throw ValidationError("stabilizer config: time_step must be a positive real");
  }
}

BemaWeights bema_weights(long t, const BemaConfig& config) {
  if (t < 1) throw ValidationError("bema_weights: step index must be >= 1");
  const double base = config.rho + config.gamma * static_cast<double>(t);
  if (!(base > 0.0)) {
    throw ValidationError("bema_weights: rho + gamma*t must be positive, got " +
                          std::to_string(base));
  }
  BemaWeights w;
  w.beta = std::pow(base, -config.kappa);
  // pow(base, -inf) flips to +inf for base < 1, so the EMA-only case is
  // handled explicitly.
  w.alpha = std::isinf(config.bias_power) ? 0.0 : std::pow(base, -config.bias_power);
  return w;
}

StabilizerState::StabilizerState(StabilizerKind kind, BemaConfig config, Eigen::VectorXd theta0,
                                 std::optional<SpdMatrix> a_tilde)
    : kind_(kind),
      config_(config),
      a_tilde_(a_tilde.has_value() ? std::move(*a_tilde) : SpdMatrix::identity(theta0.size() > 0
                                                                                   ? theta0.size()
                                                                                   : 1)),
      a_tilde_defaulted_(!a_tilde.has_value()) {
  if (theta0.size() == 0) throw ValidationError("stabilizer: theta0 is required");
  validate_bema_config(config_);
  if (a_tilde_.dim() != theta0.size()) {
    throw ValidationError("stabilizer: a_tilde dimension does not match theta0");
  }
  theta0_ = theta0;
  ema_ = theta0;
  ema_of_ema_ = theta0;
  running_integral_ = Eigen::VectorXd::Zero(theta0.size());
  last_theta_ = theta0;
  last_estimate_ = std::move(theta0);
}

void StabilizerState::burn_in_reset(const Eigen::Ref<const Eigen::VectorXd>& theta) {
  theta0_ = theta;
  ema_ = theta;
  ema_of_ema_ = theta;
  running_integral_.setZero();
  last_theta_ = theta;
  samples_since_burn_in_ = 0;
  last_estimate_ = theta;
}

Eigen::VectorXd StabilizerState::debiased(const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  if (config_.ouema_debias == OuemaDebias::PowerLaw) {
    const double shrink =
        std::isinf(config_.bias_power)
            ? 0.0
            : std::pow(1.0 + config_.gamma * static_cast<double>(step_count_),
                       -config_.bias_power);
    const double factor = 1.0 - shrink;
    if (factor == 0.0) return theta;  // singular debias: pass through
    return (theta - shrink * theta0_) / factor;
  }
  // Continuous-time variant: (I - e^{-A t})^{-1} (θ - e^{-A t} θ0) in A's
  // eigenbasis, with physical t.
  const double t_phys = static_cast<double>(step_count_) * config_.time_step;
  const Eigen::VectorXd u = a_tilde_.to_eigenbasis(theta);
  const Eigen::VectorXd v = a_tilde_.to_eigenbasis(theta0_);
  Eigen::VectorXd w(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double decay = std::exp(-a_tilde_.eigenvalues()[i] * t_phys);
    const double factor = 1.0 - decay;
    if (factor == 0.0) return theta;  // singular debias: pass through
    w[i] = (u[i] - decay * v[i]) / factor;
  }
  return a_tilde_.from_eigenbasis(w);
}

void StabilizerState::mle_update(const Eigen::Ref<const Eigen::VectorXd>& theta) {
  const double dt = config_.time_step;
  ++samples_since_burn_in_;
  if (config_.mle_integration == MleIntegration::Trapezoid) {
    running_integral_ += (dt / 2.0) * (last_theta_ + theta);
  } else {
    running_integral_ += dt * last_theta_;
  }
  const double horizon = static_cast<double>(samples_since_burn_in_) * dt;
  last_estimate_ = a_tilde_.solve(theta - theta0_) / horizon + running_integral_ / horizon;
}

void StabilizerState::tick_update(const Eigen::Ref<const Eigen::VectorXd>& theta) {
  const BemaWeights w = bema_weights(step_count_, config_);
  switch (kind_) {
    case StabilizerKind::PowerEma:
      ema_ = (1.0 - w.beta) * ema_ + w.beta * theta;
      last_estimate_ = ema_;
      break;
    case StabilizerKind::Bema:
      ema_ = (1.0 - w.beta) * ema_ + w.beta * theta;
      if (w.alpha == 0.0) {
        last_estimate_ = ema_;  // bias_power = +inf: exactly the power EMA
      } else {
        last_estimate_ = w.alpha * (theta - theta0_) + ema_;
      }
      break;
    case StabilizerKind::Dema:
      ema_ = (1.0 - w.beta) * ema_ + w.beta * theta;
      ema_of_ema_ = (1.0 - w.beta) * ema_of_ema_ + w.beta * ema_;
      last_estimate_ = 2.0 * ema_ - ema_of_ema_;
      break;
    case StabilizerKind::Ouema: {
      const Eigen::VectorXd bar = debiased(theta);
      if (config_.ouema_debias == OuemaDebias::ContinuousTime && !ema_seeded_) {
        // Seed with the first debiased iterate so the average carries no
        // weight on θ0 and stays exactly unbiased.
        ema_ = bar;
        ema_seeded_ = true;
      } else {
        ema_ = (1.0 - w.beta) * ema_ + w.beta * bar;
      }
      last_estimate_ = ema_;
      break;
    }
    default:
      break;
  }
}

void StabilizerState::observe(const Eigen::Ref<const Eigen::VectorXd>& theta) {
  if (theta.size() != dim()) {
    throw ValidationError("stabilizer observe: dimension mismatch, expected " +
                          std::to_string(dim()) + ", got " + std::to_string(theta.size()));
  }
  ++step_count_;
  const long t = step_count_;

  switch (kind_) {
    case StabilizerKind::LastIterate:
      last_theta_ = theta;
      last_estimate_ = theta;
      return;
    case StabilizerKind::FlatAverage: {
      if (t <= config_.burn_in) {
        burn_in_reset(theta);
        return;
      }
      ++samples_since_burn_in_;
      if (samples_since_burn_in_ == 1) {
        ema_ = theta;
      } else {
        ema_ += (theta - ema_) / static_cast<double>(samples_since_burn_in_);
      }
      last_theta_ = theta;
      last_estimate_ = ema_;
      return;
    }
    case StabilizerKind::Mle:
      if (t <= config_.burn_in) {
        burn_in_reset(theta);
        return;
      }
      mle_update(theta);
      last_theta_ = theta;
      return;
    case StabilizerKind::Ouema:
      if (t <= config_.burn_in) {
        if (config_.ouema_debias == OuemaDebias::ContinuousTime) {
          // Delay-only burn-in: keep θ0 and absolute time so the pointwise
          // debias stays exact; only the averaging start moves.
          last_theta_ = theta;
          last_estimate_ = theta;
        } else {
          burn_in_reset(theta);
        }
        return;
      }
      break;
    case StabilizerKind::PowerEma:
    case StabilizerKind::Bema:
    case StabilizerKind::Dema:
      if (t <= config_.burn_in) {
        burn_in_reset(theta);
        return;
      }
      break;
    default:
      break;
  }

  // EMA-family cadence: frozen off tick.
  if ((t - config_.burn_in) % config_.frequency != 0) {
    last_theta_ = theta;
    return;
  }
  tick_update(theta);
  last_theta_ = theta;
}

std::vector<Eigen::VectorXd> replay(StabilizerKind kind, const BemaConfig& config,
                                    const std::vector<TrajectorySample>& trajectory,
                                    const std::vector<long>& checkpoints,
                                    const std::optional<SpdMatrix>& a_tilde) {
  if (trajectory.empty()) throw ValidationError("replay: trajectory is empty");
  const long n = static_cast<long>(trajectory.size());
  long prev = -1;
  for (long ck : checkpoints) {
    if (ck < 0 || ck >= n) {
      throw ValidationError("replay: checkpoint index " + std::to_string(ck) +
                            " out of range [0, " + std::to_string(n - 1) + "]");
    }
    if (ck < prev) throw ValidationError("replay: checkpoints must be sorted");
    prev = ck;
  }

  StabilizerState state(kind, config, trajectory[0].theta, a_tilde);
  std::vector<Eigen::VectorXd> out;
  out.reserve(checkpoints.size());
  long next_to_observe = 1;
  for (long ck : checkpoints) {
    while (next_to_observe <= ck) {
      state.observe(trajectory[static_cast<std::size_t>(next_to_observe)].theta);
      ++next_to_observe;
    }
    out.push_back(state.estimate());
  }
  return out;
}

}  // namespace oustab
