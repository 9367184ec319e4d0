#include "oustab/oracle.hpp"

#include <cmath>
#include <string>

#include "oustab/errors.hpp"

namespace oustab {

namespace {

void check_horizon(const RiskQuery& q) {
  if (!(q.horizon_t > 0.0) || !std::isfinite(q.horizon_t)) {
    throw ValidationError("risk query: horizon_t must be a positive real");
  }
}

void require_isotropic(const RiskQuery& q, const char* what) {
  if (!q.model.is_isotropic()) {
    throw UnsupportedConfigError(std::string(what) + " requires an isotropic noise model");
  }
}

double sigma_sq(const RiskQuery& q) {
  const double s = q.model.sigma();
  return s * s;
}

// η σ² tr(A^{-2}) / T — shared leading term of the lower bound and the MLE.
double fisher_floor(const RiskQuery& q) {
  const SpdMatrix& a = q.model.a();
  return q.model.eta() * sigma_sq(q) * a.trace_fn([](double lam) { return 1.0 / (lam * lam); }) /
         q.horizon_t;
}

double squared_start_gap(const RiskQuery& q) {
  return (q.model.mu_star() - q.model.theta0()).squaredNorm();
}

// Validated Ã eigenvalues aligned with A's eigenbasis.
Eigen::VectorXd aligned_a_tilde_eigs(const RiskQuery& q) {
  if (!q.a_tilde.has_value()) {
    throw ValidationError("wrong_a_mse_upper: a_tilde is not set on the query");
  }
  const SpdMatrix& a = q.model.a();
  const SpdMatrix& at = *q.a_tilde;
  if (at.dim() != a.dim()) {
    throw ValidationError("wrong_a_mse_upper: a_tilde dimension does not match A");
  }
  // Scalar multiples of the identity commute with everything.
  const bool scalar = (at.eigenvalues().array() == at.eigenvalues()[0]).all();
  if (scalar) return Eigen::VectorXd::Constant(a.dim(), at.eigenvalues()[0]);
  const bool same_basis =
      (at.identity_basis() && a.identity_basis()) ||
      (at.basis() - a.basis()).cwiseAbs().maxCoeff() <= 1e-12;
  if (!same_basis) {
    throw UnsupportedConfigError(
        "wrong_a_mse_upper: a_tilde must be supplied as eigenvalues in A's basis (non-commuting "
        "plug-ins are not covered by the closed form)");
  }
  return at.eigenvalues();
}

}  // namespace

double cramer_rao_lower(const RiskQuery& q) {
  check_horizon(q);
  require_isotropic(q, "cramer_rao_lower");
  double bound = fisher_floor(q);
  if (q.contraction_l.has_value()) {
    const double l = *q.contraction_l;
    if (!(l >= 0.0) || !(l < 1.0)) {
      throw ValidationError("cramer_rao_lower: contraction_l must lie in [0, 1)");
    }
    bound *= (1.0 - l) * (1.0 - l);
  }
  return bound;
}

double vanilla_mse(const RiskQuery& q) {
  check_horizon(q);
  const SpdMatrix& a = q.model.a();
  const double t = q.horizon_t;
  const Eigen::VectorXd decayed_gap =
      a.apply_fn([t](double lam) { return std::exp(-lam * t); },
                 q.model.mu_star() - q.model.theta0());
  const double s_sq = q.model.is_isotropic() ? sigma_sq(q)
                                             : q.model.sigma_op_norm() * q.model.sigma_op_norm();
  const double noise =
      q.model.eta() * s_sq / 2.0 *
      a.trace_fn([t](double lam) { return (1.0 - std::exp(-2.0 * lam * t)) / lam; });
  return decayed_gap.squaredNorm() + noise;
}

double ema_mse_upper(const RiskQuery& q) {
  check_horizon(q);
  const SpdMatrix& a = q.model.a();
  const double s_sq = q.model.is_isotropic() ? sigma_sq(q)
                                             : q.model.sigma_op_norm() * q.model.sigma_op_norm();
  const double variance = q.model.eta() * s_sq *
                          a.trace_fn([](double lam) { return 1.0 / (lam * lam); }) / q.horizon_t;
  const double inv_op_norm = 1.0 / a.lambda_min();
  const double bias = inv_op_norm * inv_op_norm * squared_start_gap(q) /
                      (q.horizon_t * q.horizon_t);
  return variance + bias;
}

std::optional<double> ema_mse_lower(const RiskQuery& q) {
  check_horizon(q);
  require_isotropic(q, "ema_mse_lower");
  if (!q.c_small_t.has_value()) return std::nullopt;
  const double c = *q.c_small_t;
  if (!(c > 0.0) || !(c < 1.0)) {
    throw ValidationError("ema_mse_lower: c_small_t must lie in (0, 1)");
  }
  if (q.horizon_t > c / (2.0 * q.model.a().lambda_max())) return std::nullopt;
  return (1.0 - c) * (1.0 - c) * squared_start_gap(q);
}

double ouema_mse_upper(const RiskQuery& q) {
  check_horizon(q);
  require_isotropic(q, "ouema_mse_upper");
  if (!q.tau.has_value()) throw ValidationError("ouema_mse_upper: tau is not set on the query");
  const double tau = *q.tau;
  if (!(tau > 0.0) || !(tau < q.horizon_t)) {
    throw ValidationError("ouema_mse_upper: tau must lie strictly inside (0, horizon_t)");
  }
  const double warmup = 1.0 - std::exp(-q.model.a().lambda_min() * tau);
  const double coverage = 1.0 - tau / q.horizon_t;
  const double shrink = warmup * coverage;
  return fisher_floor(q) / (shrink * shrink);
}

double ouema_variance_exact_check(const RiskQuery& q) { return ouema_mse_upper(q); }

std::vector<TauScanPoint> ouema_upper_tau_scan(const RiskQuery& q,
                                               const std::vector<double>& taus) {
  std::vector<TauScanPoint> out;
  out.reserve(taus.size());
  RiskQuery scan = q;
  for (double tau : taus) {
    scan.tau = tau;
    out.push_back({tau, ouema_mse_upper(scan)});
  }
  return out;
}

double mle_mse(const RiskQuery& q) {
  check_horizon(q);
  require_isotropic(q, "mle_mse");
  return fisher_floor(q);
}

Eigen::MatrixXd mle_sampling_cov(const RiskQuery& q) {
  check_horizon(q);
  require_isotropic(q, "mle_sampling_cov");
  const double scale = q.model.eta() * sigma_sq(q) / q.horizon_t;
  return q.model.a().dense_fn([scale](double lam) { return scale / (lam * lam); });
}

double wrong_a_mse_upper(const RiskQuery& q) {
  check_horizon(q);
  require_isotropic(q, "wrong_a_mse_upper");
  const Eigen::VectorXd tilde = aligned_a_tilde_eigs(q);
  const Eigen::VectorXd& eigs = q.model.a().eigenvalues();
  const double t = q.horizon_t;
  const double eta_s_sq = q.model.eta() * sigma_sq(q);

  double tr_a2 = 0.0, tr_t2a1 = 0.0, tr_t1a2 = 0.0, gap_op = 0.0;
  for (Eigen::Index i = 0; i < eigs.size(); ++i) {
    const double lam = eigs[i];
    const double lam_t = tilde[i];
    tr_a2 += 1.0 / (lam * lam);
    tr_t2a1 += 1.0 / (lam_t * lam_t * lam);
    tr_t1a2 += 1.0 / (lam_t * lam * lam);
    gap_op = std::max(gap_op, std::abs(1.0 / lam_t - 1.0 / lam));
  }
  return eta_s_sq * tr_a2 / t + eta_s_sq * tr_t2a1 / (t * t) + eta_s_sq * tr_t1a2 / (t * t) +
         gap_op * gap_op * squared_start_gap(q) / (t * t);
}

}  // namespace oustab
