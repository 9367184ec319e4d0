#pragma once

#include <vector>

#include <Eigen/Core>
#include <Eigen/QR>

#include "oustab/ou_model.hpp"
#include "oustab/rng.hpp"
#include "oustab/spd_matrix.hpp"

namespace test_util {

inline oustab::SpdMatrix spd_of(std::initializer_list<double> eigs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(eigs.size()));
  Eigen::Index i = 0;
  for (double e : eigs) v[i++] = e;
  return oustab::SpdMatrix::from_eigs(v);
}

inline Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

inline oustab::OuModel scalar_model(double a, double sigma, double eta, double mu_star,
                                    double theta0) {
  return oustab::OuModel::isotropic(spd_of({a}), sigma, eta, vec({mu_star}), vec({theta0}));
}

// Random orthonormal basis via Gram-Schmidt on a Gaussian matrix.
inline Eigen::MatrixXd random_orthonormal(Eigen::Index d, oustab::RngStream& rng) {
  Eigen::MatrixXd g(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) g(i, j) = rng.next_gaussian();
  // HouseholderQR gives Q with orthonormal columns.
  Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
  return q;
}

inline std::vector<oustab::TrajectorySample> random_trajectory(Eigen::Index d, long n_steps,
                                                               oustab::RngStream& rng,
                                                               double step = 1.0) {
  std::vector<oustab::TrajectorySample> traj;
  traj.reserve(static_cast<std::size_t>(n_steps) + 1);
  Eigen::VectorXd theta = rng.gaussian_vector(d);
  traj.push_back({0.0, theta});
  for (long k = 1; k <= n_steps; ++k) {
    theta += 0.3 * rng.gaussian_vector(d);
    traj.push_back({static_cast<double>(k) * step, theta});
  }
  return traj;
}

}  // namespace test_util
