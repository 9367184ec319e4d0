#include <doctest.h>

#include <cmath>

#include "oustab/errors.hpp"
#include "oustab/oracle.hpp"
#include "test_util.hpp"

using namespace oustab;
using test_util::scalar_model;
using test_util::spd_of;
using test_util::vec;

namespace {

RiskQuery query_of(OuModel model, double horizon) {
  return RiskQuery{.model = std::move(model),
                   .horizon_t = horizon,
                   .tau = std::nullopt,
                   .contraction_l = std::nullopt,
                   .a_tilde = std::nullopt,
                   .c_small_t = std::nullopt};
}

OuModel identity_model(Eigen::Index d, double sigma, double eta, double mu, double th0) {
  return OuModel::isotropic(SpdMatrix::identity(d), sigma, eta,
                            Eigen::VectorXd::Constant(d, mu), Eigen::VectorXd::Constant(d, th0));
}

}  // namespace

TEST_CASE("cramer-rao floor for the d=20 identity model") {
  const RiskQuery q = query_of(identity_model(20, 1.0, 0.01, 1.0, 0.0), 10.0);
  CHECK(cramer_rao_lower(q) == doctest::Approx(0.02).epsilon(1e-15));
}

TEST_CASE("cramer-rao contraction prefactor") {
  RiskQuery q = query_of(scalar_model(1.0, 1.0, 0.1, 1.0, 0.0), 2.0);
  const double unbiased = cramer_rao_lower(q);
  q.contraction_l = 0.0;
  CHECK(cramer_rao_lower(q) == unbiased);
  q.contraction_l = 0.5;
  CHECK(cramer_rao_lower(q) == doctest::Approx(0.25 * unbiased).epsilon(1e-15));
  q.contraction_l = 1.0;
  CHECK_THROWS_AS(cramer_rao_lower(q), ValidationError);
}

TEST_CASE("cramer-rao halves when the horizon doubles") {
  RiskQuery q = query_of(identity_model(3, 1.2, 0.05, 0.0, 1.0), 1.5);
  const double at_t = cramer_rao_lower(q);
  q.horizon_t = 3.0;
  CHECK(cramer_rao_lower(q) == doctest::Approx(at_t / 2.0).epsilon(1e-15));
}

TEST_CASE("vanilla risk: scalar closed form") {
  // e^{-4} + (0.01/2)(1 - e^{-4}); the noise term carries the OU
  // stationary-variance factor 1/2 that the covariance kernel fixes.
  const RiskQuery q = query_of(scalar_model(1.0, 1.0, 0.01, 1.0, 0.0), 2.0);
  CHECK(vanilla_mse(q) == doctest::Approx(0.023224060694290509).epsilon(1e-14));
}

TEST_CASE("vanilla risk approaches the noise floor") {
  const RiskQuery q = query_of(identity_model(4, 1.0, 0.01, 2.5, 2.5), 50.0);
  const double floor = 0.01 / 2.0 * 4.0;  // (eta sigma^2 / 2) tr(A^{-1})
  CHECK(std::abs(vanilla_mse(q) - floor) < 1e-9);
}

TEST_CASE("vanilla risk is linear in eta in the noise term") {
  const OuModel base = scalar_model(0.7, 1.3, 0.02, 2.0, -1.0);
  const OuModel doubled = scalar_model(0.7, 1.3, 0.04, 2.0, -1.0);
  const OuModel centered = scalar_model(0.7, 1.3, 0.02, 2.0, 2.0);  // pure noise
  const double t = 1.7;
  const double noise = vanilla_mse(query_of(centered, t));
  CHECK(vanilla_mse(query_of(doubled, t)) - vanilla_mse(query_of(base, t)) ==
        doctest::Approx(noise).epsilon(1e-12));
}

TEST_CASE("ema upper bound: scalar example") {
  const RiskQuery q = query_of(scalar_model(1.0, 1.0, 0.01, 1.0, 0.0), 2.0);
  CHECK(ema_mse_upper(q) == doctest::Approx(0.255).epsilon(1e-15));
}

TEST_CASE("ema upper with zero start gap reduces to the cramer-rao value") {
  const RiskQuery q = query_of(identity_model(5, 0.8, 0.03, 1.5, 1.5), 3.0);
  CHECK(ema_mse_upper(q) == cramer_rao_lower(q));
}

TEST_CASE("ema lower bound in and out of its regime") {
  RiskQuery q = query_of(identity_model(2, 1.0, 0.01, 1.0, 0.0), 0.25);
  CHECK_FALSE(ema_mse_lower(q).has_value());  // c unset
  q.c_small_t = 0.5;
  const auto in_regime = ema_mse_lower(q);  // T = 0.25 = c/(2 lambda_max)
  REQUIRE(in_regime.has_value());
  CHECK(*in_regime == doctest::Approx(0.25 * 2.0).epsilon(1e-15));
  q.horizon_t = 0.26;
  CHECK_FALSE(ema_mse_lower(q).has_value());  // not-applicable marker, no throw
  q.c_small_t = 1.5;
  CHECK_THROWS_AS(ema_mse_lower(q), ValidationError);
}

TEST_CASE("ouema upper bound: scalar example and domain checks") {
  RiskQuery q = query_of(scalar_model(1.0, 1.0, 0.01, 1.0, 0.0), 2.0);
  CHECK_THROWS_AS(ouema_mse_upper(q), ValidationError);  // tau unset
  q.tau = 1.0;
  CHECK(ouema_mse_upper(q) == doctest::Approx(0.050053006021542375).epsilon(1e-13));
  q.tau = 0.0;
  CHECK_THROWS_AS(ouema_mse_upper(q), ValidationError);
  q.tau = 2.0;
  CHECK_THROWS_AS(ouema_mse_upper(q), ValidationError);
}

TEST_CASE("ouema bound ratio to the floor converges as T grows") {
  RiskQuery q = query_of(scalar_model(1.0, 1.0, 0.01, 1.0, 0.0), 1e6);
  q.tau = 1.0;
  const double ratio = ouema_mse_upper(q) / cramer_rao_lower(q);
  const double limit = 1.0 / std::pow(1.0 - std::exp(-1.0), 2.0);
  CHECK(ratio == doctest::Approx(limit).epsilon(1e-5));
}

TEST_CASE("ouema variance entry point equals the bound") {
  RiskQuery q = query_of(OuModel::isotropic(spd_of({0.5, 1.0, 2.0}), 1.0, 0.01,
                                            vec({1.0, 1.0, 1.0}), vec({0.0, 0.0, 0.0})),
                         2.0);
  q.tau = 0.75;
  CHECK(ouema_variance_exact_check(q) == ouema_mse_upper(q));
}

TEST_CASE("ouema bound at tau = T/2 on the identity simplifies") {
  RiskQuery q = query_of(identity_model(3, 1.0, 0.01, 1.0, 0.0), 2.0);
  q.tau = 1.0;
  const double simplified = 4.0 * 0.01 * 3.0 / (std::pow(1.0 - std::exp(-1.0), 2.0) * 2.0);
  CHECK(ouema_mse_upper(q) == doctest::Approx(simplified).epsilon(1e-14));
}

TEST_CASE("ouema tau scan finds an interior least upper bound") {
  RiskQuery q = query_of(scalar_model(1.0, 1.0, 0.01, 1.0, 0.0), 2.0);
  std::vector<double> taus;
  for (double tau = 0.1; tau < 2.0; tau += 0.1) taus.push_back(tau);
  const auto scan = ouema_upper_tau_scan(q, taus);
  REQUIRE(scan.size() == taus.size());
  std::size_t best = 0;
  for (std::size_t i = 0; i < scan.size(); ++i) {
    if (scan[i].bound < scan[best].bound) best = i;
  }
  CHECK(best > 0);
  CHECK(best < scan.size() - 1);
  // monotone decreasing up to the minimizer
  for (std::size_t i = 1; i <= best; ++i) CHECK(scan[i].bound < scan[i - 1].bound);
}

TEST_CASE("mle risk and sampling covariance") {
  const RiskQuery q1 = query_of(scalar_model(1.0, 1.0, 0.01, 1.0, 0.0), 2.0);
  CHECK(mle_mse(q1) == doctest::Approx(0.005).epsilon(1e-15));

  const RiskQuery q2 = query_of(
      OuModel::isotropic(spd_of({0.5, 2.0}), 1.0, 0.1, vec({0.0, 0.0}), vec({1.0, 1.0})), 1.0);
  const Eigen::MatrixXd cov = mle_sampling_cov(q2);
  CHECK(cov(0, 0) == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(cov(1, 1) == doctest::Approx(0.025).epsilon(1e-14));
  CHECK(cov(0, 1) == 0.0);
  CHECK(cov.trace() == doctest::Approx(mle_mse(q2)).epsilon(1e-12));
}

TEST_CASE("mle meets the lower bound exactly for every query") {
  oustab::RngStream rng(123);
  for (int rep = 0; rep < 25; ++rep) {
    Eigen::VectorXd eigs = rng.gaussian_vector(3).cwiseAbs().array() + 0.2;
    const OuModel model =
        OuModel::isotropic(SpdMatrix::from_eigs(eigs), 0.5 + rng.next_double(),
                           0.01 + rng.next_double(), rng.gaussian_vector(3),
                           rng.gaussian_vector(3));
    const RiskQuery q = query_of(model, 0.1 + 5.0 * rng.next_double());
    CHECK(mle_mse(q) == cramer_rao_lower(q));  // identical arithmetic
    CHECK(mle_mse(q) <= ema_mse_upper(q));
  }
}

TEST_CASE("wrong-A bound: scalar worked example") {
  RiskQuery q = query_of(scalar_model(1.0, 1.0, 0.01, 1.0, 0.0), 2.0);
  q.a_tilde = spd_of({2.0});
  // 0.005 + 0.000625 + 0.00125 + 0.25 * 1 / 4
  CHECK(wrong_a_mse_upper(q) == doctest::Approx(0.069375).epsilon(1e-14));
}

TEST_CASE("wrong-A bound with the true A reduces to the mle plus curvature terms") {
  RiskQuery q = query_of(
      OuModel::isotropic(spd_of({0.5, 1.0, 2.0}), 1.3, 0.02, vec({1.0, -1.0, 2.0}),
                         vec({0.0, 0.0, 0.0})),
      1.7);
  q.a_tilde = spd_of({0.5, 1.0, 2.0});
  const double tr_a3 = std::pow(0.5, -3.0) + 1.0 + std::pow(2.0, -3.0);
  const double extra = 2.0 * 0.02 * 1.3 * 1.3 * tr_a3 / (1.7 * 1.7);
  CHECK(wrong_a_mse_upper(q) - mle_mse(q) == doctest::Approx(extra).epsilon(1e-12));
  CHECK(wrong_a_mse_upper(q) >= mle_mse(q));
}

TEST_CASE("wrong-A bound recovers the ema upper bound as the plug-in stiffens") {
  RiskQuery q = query_of(
      OuModel::isotropic(spd_of({0.5, 2.0}), 1.0, 0.05, vec({2.0, 1.0}), vec({0.0, 0.0})), 1.2);
  q.a_tilde = spd_of({0.5, 2.0}).scaled(1e9);
  CHECK(wrong_a_mse_upper(q) == doctest::Approx(ema_mse_upper(q)).epsilon(1e-6));
}

TEST_CASE("wrong-A bound rejects non-commuting plug-ins and accepts scalars") {
  oustab::RngStream rng(77);
  const Eigen::MatrixXd basis = test_util::random_orthonormal(2, rng);
  const OuModel model = OuModel::isotropic(SpdMatrix::from_eigs(vec({0.5, 2.0}), basis), 1.0,
                                           0.1, vec({1.0, 1.0}), vec({0.0, 0.0}));
  RiskQuery q = query_of(model, 1.0);
  q.a_tilde = spd_of({1.0, 3.0});  // identity basis, not A's
  CHECK_THROWS_AS(wrong_a_mse_upper(q), UnsupportedConfigError);
  q.a_tilde = SpdMatrix::scaled_identity(2, 2.0);  // scalar commutes with everything
  CHECK(wrong_a_mse_upper(q) > 0.0);
}

TEST_CASE("bounds accept general noise only where stated") {
  const OuModel general = OuModel::general_noise(spd_of({1.0, 2.0}), spd_of({0.5, 1.5}), 0.1,
                                                 vec({1.0, 1.0}), vec({0.0, 0.0}));
  RiskQuery q = query_of(general, 1.0);
  // vanilla and EMA upper bounds use the operator norm of the noise
  CHECK(vanilla_mse(q) > 0.0);
  CHECK(ema_mse_upper(q) > 0.0);
  const OuModel iso_at_op_norm =
      OuModel::isotropic(spd_of({1.0, 2.0}), 1.5, 0.1, vec({1.0, 1.0}), vec({0.0, 0.0}));
  CHECK(vanilla_mse(q) == vanilla_mse(query_of(iso_at_op_norm, 1.0)));
  // exact-equality claims stay isotropic-only
  CHECK_THROWS_AS(mle_mse(q), UnsupportedConfigError);
  CHECK_THROWS_AS(cramer_rao_lower(q), UnsupportedConfigError);
  CHECK_THROWS_AS(ouema_mse_upper(q), UnsupportedConfigError);
}

TEST_CASE("oracle outputs are bitwise deterministic") {
  RiskQuery q = query_of(
      OuModel::isotropic(spd_of({0.3, 1.1, 2.2}), 0.9, 0.07, vec({1.0, 2.0, 3.0}),
                         vec({-1.0, 0.5, 0.0})),
      2.3);
  q.tau = 0.9;
  q.c_small_t = 0.5;
  q.a_tilde = spd_of({0.6, 2.2, 4.4});
  CHECK(cramer_rao_lower(q) == cramer_rao_lower(q));
  CHECK(vanilla_mse(q) == vanilla_mse(q));
  CHECK(ema_mse_upper(q) == ema_mse_upper(q));
  CHECK(ouema_mse_upper(q) == ouema_mse_upper(q));
  CHECK(mle_mse(q) == mle_mse(q));
  CHECK(wrong_a_mse_upper(q) == wrong_a_mse_upper(q));
}
