#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "oustab/rng.hpp"
#include "oustab/spd_matrix.hpp"

namespace oustab {

// One point of a trajectory.  Times are strictly increasing within a
// trajectory and the first sample is (0, theta0).
struct TrajectorySample {
  double t = 0.0;
  Eigen::VectorXd theta;
};

// Noisy quadratic problem instance:
//   dθ_t = A (µ* - θ_t) dt + sqrt(η) Σ dW_t,   θ_0 given.
// Noise is either isotropic (Σ = σ I) or a general SPD Σ; exactly one of the
// two is active.  Closed-form moments and exact transition sampling require
// the isotropic case.
class OuModel {
 public:
  static OuModel isotropic(SpdMatrix a, double sigma, double eta, Eigen::VectorXd mu_star,
                           Eigen::VectorXd theta0);
  static OuModel general_noise(SpdMatrix a, SpdMatrix sigma, double eta, Eigen::VectorXd mu_star,
                               Eigen::VectorXd theta0);

  Eigen::Index dim() const { return a_.dim(); }
  const SpdMatrix& a() const { return a_; }
  bool is_isotropic() const { return !sigma_general_.has_value(); }
  double sigma() const;
  const SpdMatrix& sigma_general() const;
  // sup of the noise spectrum; equals sigma in the isotropic case.
  double sigma_op_norm() const;
  double eta() const { return eta_; }
  const Eigen::VectorXd& mu_star() const { return mu_star_; }
  const Eigen::VectorXd& theta0() const { return theta0_; }

 private:
  OuModel(SpdMatrix a, double sigma, std::optional<SpdMatrix> sigma_general, double eta,
          Eigen::VectorXd mu_star, Eigen::VectorXd theta0);

  SpdMatrix a_;
  double sigma_;
  std::optional<SpdMatrix> sigma_general_;
  double eta_;
  Eigen::VectorXd mu_star_;
  Eigen::VectorXd theta0_;
};

// E[θ_t] = e^{-A t} θ0 + (I - e^{-A t}) µ*.
Eigen::VectorXd ou_mean(const OuModel& model, double t);

// Cov(θ_t, θ_s) = (σ² η / 2) A^{-1} (e^{-A |t-s|} - e^{-A (t+s)}).
// Isotropic models only.
Eigen::MatrixXd ou_cov(const OuModel& model, double s, double t);

// Exact-in-distribution transition sampler for a fixed time increment,
// precomputed once so repeated stepping is cheap:
//   θ' | θ  ~  N( µ* + e^{-A dt}(θ - µ*),  (η σ²/2) A^{-1}(I - e^{-2 A dt}) ).
class ExactTransition {
 public:
  ExactTransition(const OuModel& model, double dt);

  // z holds standard normal coordinates in A's eigenbasis.
  Eigen::VectorXd step_with_noise(const Eigen::Ref<const Eigen::VectorXd>& theta,
                                  const Eigen::Ref<const Eigen::VectorXd>& z) const;
  Eigen::VectorXd step(const Eigen::Ref<const Eigen::VectorXd>& theta, RngStream& rng) const;

  const Eigen::VectorXd& noise_std() const { return noise_std_; }

 private:
  const SpdMatrix* a_;
  Eigen::VectorXd mu_star_;
  Eigen::VectorXd decay_;      // e^{-λ_i dt}
  Eigen::VectorXd noise_std_;  // per eigendirection
};

Eigen::VectorXd ou_exact_step(const OuModel& model, const Eigen::Ref<const Eigen::VectorXd>& theta,
                              double dt, RngStream& rng);
Eigen::VectorXd ou_exact_step_with_noise(const OuModel& model,
                                         const Eigen::Ref<const Eigen::VectorXd>& theta, double dt,
                                         const Eigen::Ref<const Eigen::VectorXd>& z);

struct EmStepResult {
  Eigen::VectorXd theta;
  // Raised when h >= 2/λ_max(A); advisory only, the step still runs.
  bool stability_warning = false;
};

// Euler-Maruyama iterate θ' = θ + h A(µ* - θ) + sqrt(η h) Σ z, the discrete
// SGD surrogate.  Works for isotropic and general Σ; z is in the original
// coordinates.
EmStepResult em_step(const OuModel& model, const Eigen::Ref<const Eigen::VectorXd>& theta, double h,
                     RngStream& rng);
EmStepResult em_step_with_noise(const OuModel& model,
                                const Eigen::Ref<const Eigen::VectorXd>& theta, double h,
                                const Eigen::Ref<const Eigen::VectorXd>& z);

enum class Scheme { Exact, Euler };

// n_steps + 1 samples at times 0, step, ..., n_steps*step; sample 0 is
// (0, θ0).  Exact scheme requires an isotropic model.  Reproducible from the
// rng stream state.
std::vector<TrajectorySample> simulate(const OuModel& model, Scheme scheme, double step,
                                       long n_steps, RngStream& rng);

}  // namespace oustab
