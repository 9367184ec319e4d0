#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "oustab/ou_model.hpp"
#include "oustab/spd_matrix.hpp"

namespace oustab {

// Inputs for the closed-form risk evaluations.  All evaluations are pure and
// deterministic; identical queries yield bitwise-identical values.
struct RiskQuery {
  OuModel model;
  double horizon_t = 1.0;
  // Averaging start for the OUEMA bound; must lie in (0, horizon_t).
  std::optional<double> tau;
  // Lipschitz constant of the estimator's bias map, in [0, 1).  Never
  // inferred; supplied by the caller when known.
  std::optional<double> contraction_l;
  // Plug-in curvature for the wrong-Ã bound.  Must be simultaneously
  // diagonalizable with A: either supplied as eigenvalues in A's basis or a
  // scalar multiple of the identity.
  std::optional<SpdMatrix> a_tilde;
  // Regime constant c in (0, 1) for the small-horizon EMA lower bound.
  std::optional<double> c_small_t;
};

// η σ² tr(A^{-2}) / T, with prefactor (1 - L)² when contraction_l is set.
double cramer_rao_lower(const RiskQuery& q);

// Exact last-iterate risk ‖e^{-A T}(µ* - θ0)‖² + (η σ²/2) tr(A^{-1}(I - e^{-2 A T})).
// For general noise the σ² factor becomes ‖Σ‖²_op and the value is an upper
// bound rather than an equality.
double vanilla_mse(const RiskQuery& q);

// Flat-average risk bounds:
//   upper  η σ² tr(A^{-2})/T + ‖A^{-1}‖²_op ‖µ* - θ0‖² / T²
//   lower  (1 - c)² ‖µ* - θ0‖², valid only when T ≤ c / (2 λ_max(A)).
// The lower bound returns an empty optional (not-applicable) outside its
// regime or when c is unset, so horizon sweeps can tabulate it without
// branching.
double ema_mse_upper(const RiskQuery& q);
std::optional<double> ema_mse_lower(const RiskQuery& q);

// η σ² tr(A^{-2}) / (T [(1 - e^{-λ_min(A) τ})(1 - τ/T)]²) for the debiased
// flat average over [τ, T].
double ouema_mse_upper(const RiskQuery& q);
// Same expression surfaced as its own entry point for the delayed
// flat-average estimator.
double ouema_variance_exact_check(const RiskQuery& q);

struct TauScanPoint {
  double tau;
  double bound;
};
// Evaluates the OUEMA upper bound across a τ grid (for locating the least
// upper bound).
std::vector<TauScanPoint> ouema_upper_tau_scan(const RiskQuery& q,
                                               const std::vector<double>& taus);

// Exact MLE risk η σ² tr(A^{-2}) / T and its sampling covariance
// (η σ²/T) A^{-2}; the trace of the latter equals the former.
double mle_mse(const RiskQuery& q);
Eigen::MatrixXd mle_sampling_cov(const RiskQuery& q);

// Plug-in risk of the MLE run with Ã in place of A (commuting case):
//   η σ² tr(A^{-2})/T + η σ² tr(Ã^{-2} A^{-1})/T² + η σ² tr(Ã^{-1} A^{-2})/T²
//     + ‖Ã^{-1} - A^{-1}‖²_op ‖µ* - θ0‖² / T².
double wrong_a_mse_upper(const RiskQuery& q);

}  // namespace oustab
