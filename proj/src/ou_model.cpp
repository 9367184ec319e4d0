#include "oustab/ou_model.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "oustab/errors.hpp"

namespace oustab {

OuModel::OuModel(SpdMatrix a, double sigma, std::optional<SpdMatrix> sigma_general, double eta,
                 Eigen::VectorXd mu_star, Eigen::VectorXd theta0)
    : a_(std::move(a)),
      sigma_(sigma),
      sigma_general_(std::move(sigma_general)),
      eta_(eta),
      mu_star_(std::move(mu_star)),
      theta0_(std::move(theta0)) {
  const Eigen::Index d = a_.dim();
  if (mu_star_.size() != d || theta0_.size() != d) {
    throw ValidationError("OuModel: mu_star/theta0 dimension does not match A");
  }
  if (sigma_general_ && sigma_general_->dim() != d) {
    throw ValidationError("OuModel: noise matrix dimension does not match A");
  }
  if (!(eta_ > 0.0) || !std::isfinite(eta_)) {
    throw ValidationError("OuModel: eta must be positive");
  }
  if (!sigma_general_ && (!(sigma_ > 0.0) || !std::isfinite(sigma_))) {
    throw ValidationError("OuModel: sigma must be positive");
  }
}

OuModel OuModel::isotropic(SpdMatrix a, double sigma, double eta, Eigen::VectorXd mu_star,
                           Eigen::VectorXd theta0) {
  return OuModel(std::move(a), sigma, std::nullopt, eta, std::move(mu_star), std::move(theta0));
}

OuModel OuModel::general_noise(SpdMatrix a, SpdMatrix sigma, double eta, Eigen::VectorXd mu_star,
                               Eigen::VectorXd theta0) {
  return OuModel(std::move(a), 0.0, std::move(sigma), eta, std::move(mu_star), std::move(theta0));
}

double OuModel::sigma() const {
  if (sigma_general_) {
    throw UnsupportedConfigError("OuModel: scalar sigma requested on a general-noise model");
  }
  return sigma_;
}

const SpdMatrix& OuModel::sigma_general() const {
  if (!sigma_general_) {
    throw UnsupportedConfigError("OuModel: general noise requested on an isotropic model");
  }
  return *sigma_general_;
}

double OuModel::sigma_op_norm() const {
  return sigma_general_ ? sigma_general_->lambda_max() : sigma_;
}

Eigen::VectorXd ou_mean(const OuModel& model, double t) {
  if (!(t >= 0.0)) throw ValidationError("ou_mean: t must be nonnegative");
  const SpdMatrix& a = model.a();
  const Eigen::VectorXd decayed =
      a.apply_fn([t](double lam) { return std::exp(-lam * t); }, model.theta0() - model.mu_star());
  return model.mu_star() + decayed;
}

Eigen::MatrixXd ou_cov(const OuModel& model, double s, double t) {
  if (!(s >= 0.0) || !(t >= 0.0)) throw ValidationError("ou_cov: times must be nonnegative");
  if (!model.is_isotropic()) {
    throw UnsupportedConfigError(
        "ou_cov: closed-form covariance requires isotropic noise; general Σ needs the integral "
        "form");
  }
  const double scale = model.sigma() * model.sigma() * model.eta() / 2.0;
  const double gap = std::abs(t - s);
  const double sum = t + s;
  return model.a().dense_fn([&](double lam) {
    return scale / lam * (std::exp(-lam * gap) - std::exp(-lam * sum));
  });
}

ExactTransition::ExactTransition(const OuModel& model, double dt)
    : a_(&model.a()), mu_star_(model.mu_star()) {
  if (!(dt > 0.0)) throw ValidationError("exact transition: dt must be positive");
  if (!model.is_isotropic()) {
    throw UnsupportedConfigError(
        "exact transition requires isotropic noise; use the Euler scheme instead");
  }
  const Eigen::VectorXd& eigs = a_->eigenvalues();
  const double noise_scale = model.eta() * model.sigma() * model.sigma() / 2.0;
  decay_.resize(eigs.size());
  noise_std_.resize(eigs.size());
  for (Eigen::Index i = 0; i < eigs.size(); ++i) {
    const double lam = eigs[i];
    decay_[i] = std::exp(-lam * dt);
    noise_std_[i] = std::sqrt(noise_scale / lam * (1.0 - std::exp(-2.0 * lam * dt)));
  }
}

Eigen::VectorXd ExactTransition::step_with_noise(const Eigen::Ref<const Eigen::VectorXd>& theta,
                                                 const Eigen::Ref<const Eigen::VectorXd>& z) const {
  if (theta.size() != decay_.size() || z.size() != decay_.size()) {
    throw ValidationError("exact transition: dimension mismatch");
  }
  Eigen::VectorXd w = a_->to_eigenbasis(theta - mu_star_);
  w.array() = w.array() * decay_.array() + noise_std_.array() * z.array();
  return mu_star_ + a_->from_eigenbasis(w);
}

Eigen::VectorXd ExactTransition::step(const Eigen::Ref<const Eigen::VectorXd>& theta,
                                      RngStream& rng) const {
  return step_with_noise(theta, rng.gaussian_vector(decay_.size()));
}

Eigen::VectorXd ou_exact_step(const OuModel& model, const Eigen::Ref<const Eigen::VectorXd>& theta,
                              double dt, RngStream& rng) {
  return ExactTransition(model, dt).step(theta, rng);
}

Eigen::VectorXd ou_exact_step_with_noise(const OuModel& model,
                                         const Eigen::Ref<const Eigen::VectorXd>& theta, double dt,
                                         const Eigen::Ref<const Eigen::VectorXd>& z) {
  return ExactTransition(model, dt).step_with_noise(theta, z);
}

EmStepResult em_step_with_noise(const OuModel& model,
                                const Eigen::Ref<const Eigen::VectorXd>& theta, double h,
                                const Eigen::Ref<const Eigen::VectorXd>& z) {
  if (!(h > 0.0)) throw ValidationError("em_step: h must be positive");
  if (theta.size() != model.dim() || z.size() != model.dim()) {
    throw ValidationError("em_step: dimension mismatch");
  }
  const double noise_scale = std::sqrt(model.eta() * h);
  EmStepResult out;
  out.stability_warning = h >= 2.0 / model.a().lambda_max();
  out.theta = theta + h * model.a().apply(model.mu_star() - theta);
  if (model.is_isotropic()) {
    out.theta += noise_scale * model.sigma() * z;
  } else {
    out.theta += noise_scale * model.sigma_general().apply(z);
  }
  return out;
}

EmStepResult em_step(const OuModel& model, const Eigen::Ref<const Eigen::VectorXd>& theta, double h,
                     RngStream& rng) {
  return em_step_with_noise(model, theta, h, rng.gaussian_vector(model.dim()));
}

std::vector<TrajectorySample> simulate(const OuModel& model, Scheme scheme, double step,
                                       long n_steps, RngStream& rng) {
  if (!(step > 0.0)) throw ValidationError("simulate: step must be positive");
  if (n_steps < 0) throw ValidationError("simulate: n_steps must be nonnegative");

  std::vector<TrajectorySample> out;
  out.reserve(static_cast<std::size_t>(n_steps) + 1);
  out.push_back({0.0, model.theta0()});

  if (n_steps == 0) return out;

  if (scheme == Scheme::Exact) {
    const ExactTransition transition(model, step);
    Eigen::VectorXd theta = model.theta0();
    for (long k = 1; k <= n_steps; ++k) {
      theta = transition.step(theta, rng);
      out.push_back({static_cast<double>(k) * step, theta});
    }
  } else {
    Eigen::VectorXd theta = model.theta0();
    for (long k = 1; k <= n_steps; ++k) {
      theta = em_step(model, theta, step, rng).theta;
      out.push_back({static_cast<double>(k) * step, theta});
    }
  }
  return out;
}

}  // namespace oustab
