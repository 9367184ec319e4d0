#pragma once

#include <functional>
#include <optional>

#include <Eigen/Core>

namespace oustab {

// Symmetric operator held in spectral form Q diag(values) Qᵀ.  Unlike
// SpdMatrix the diagonal values may be any finite reals, so this is the
// return type of generic matrix functions.
class SpectralOperator {
 public:
  SpectralOperator(Eigen::VectorXd values, Eigen::MatrixXd basis);

  Eigen::Index dim() const { return values_.size(); }
  const Eigen::VectorXd& values() const { return values_; }
  const Eigen::MatrixXd& basis() const { return basis_; }
  bool identity_basis() const { return identity_basis_; }

  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::MatrixXd dense() const;
  double trace() const { return values_.sum(); }

 private:
  Eigen::VectorXd values_;
  Eigen::MatrixXd basis_;
  bool identity_basis_;
};

// Symmetric positive definite operator stored by eigendecomposition
// (eigenvalues plus an orthonormal basis).  Matrix functions such as
// exp(-A t), A^{-1} or A^{-2} act eigenvalue-wise, which keeps every apply
// at O(d^2) and numerically exact up to rounding.
class SpdMatrix {
 public:
  // `basis` columns must be orthonormal within 1e-10 per entry; identity
  // when absent.  Eigenvalues must be strictly positive.
  static SpdMatrix from_eigs(const Eigen::VectorXd& eigenvalues,
                             const std::optional<Eigen::MatrixXd>& basis = std::nullopt);
  static SpdMatrix identity(Eigen::Index dim);
  static SpdMatrix scaled_identity(Eigen::Index dim, double value);

  Eigen::Index dim() const { return eigenvalues_.size(); }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  const Eigen::MatrixXd& basis() const { return basis_; }
  bool identity_basis() const { return identity_basis_; }

  double lambda_min() const { return eigenvalues_.minCoeff(); }
  double lambda_max() const { return eigenvalues_.maxCoeff(); }

  // A x
  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  // A^{-1} x
  Eigen::VectorXd solve(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  // Q f(Λ) Qᵀ x without materializing the operator
  Eigen::VectorXd apply_fn(const std::function<double(double)>& f,
                           const Eigen::Ref<const Eigen::VectorXd>& x) const;
  // Σ_i f(λ_i)
  double trace_fn(const std::function<double(double)>& f) const;

  Eigen::MatrixXd dense() const;
  // Q f(Λ) Qᵀ as a dense matrix
  Eigen::MatrixXd dense_fn(const std::function<double(double)>& f) const;

  // Same basis, eigenvalues multiplied by s > 0.
  SpdMatrix scaled(double s) const;

  // Coordinates of x in the eigenbasis (Qᵀ x) and back (Q w).
  Eigen::VectorXd to_eigenbasis(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::VectorXd from_eigenbasis(const Eigen::Ref<const Eigen::VectorXd>& w) const;

  bool same_operator_as(const SpdMatrix& other, double tol = 1e-12) const;

 private:
  SpdMatrix(Eigen::VectorXd eigenvalues, Eigen::MatrixXd basis, bool identity_basis);

  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd basis_;
  bool identity_basis_;
};

// Q f(Λ) Qᵀ as an applicable operator; f is applied eigenvalue-wise and must
// be finite on the spectrum.
SpectralOperator spd_fn(const SpdMatrix& m, const std::function<double(double)>& f);
SpectralOperator spd_fn(const SpectralOperator& m, const std::function<double(double)>& f);

}  // namespace oustab
