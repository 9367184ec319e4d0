#include "oustab/spd_matrix.hpp"

#include <cmath>
#include <string>

#include "oustab/errors.hpp"

namespace oustab {

namespace {

constexpr double kOrthoTol = 1e-10;

bool is_identity(const Eigen::MatrixXd& m) {
  return m.isIdentity(0.0);
}

void check_orthonormal(const Eigen::MatrixXd& basis) {
  if (basis.rows() != basis.cols()) {
    throw ValidationError("SpdMatrix basis must be square, got " + std::to_string(basis.rows()) +
                          "x" + std::to_string(basis.cols()));
  }
  const Eigen::MatrixXd gram = basis.transpose() * basis;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(basis.rows(), basis.cols());
  const double err = (gram - eye).cwiseAbs().maxCoeff();
  if (!(err <= kOrthoTol)) {
    throw ValidationError("SpdMatrix basis is not orthonormal: max |QᵀQ - I| = " +
                          std::to_string(err));
  }
}

}  // namespace

SpectralOperator::SpectralOperator(Eigen::VectorXd values, Eigen::MatrixXd basis)
    : values_(std::move(values)), basis_(std::move(basis)), identity_basis_(is_identity(basis_)) {
  if (values_.size() != basis_.rows() || basis_.rows() != basis_.cols()) {
    throw ValidationError("SpectralOperator dimension mismatch");
  }
}

Eigen::VectorXd SpectralOperator::apply(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != dim()) throw ValidationError("SpectralOperator::apply dimension mismatch");
  if (identity_basis_) return values_.cwiseProduct(x);
  return basis_ * values_.cwiseProduct(basis_.transpose() * x).eval();
}

Eigen::MatrixXd SpectralOperator::dense() const {
  if (identity_basis_) return values_.asDiagonal();
  return basis_ * values_.asDiagonal() * basis_.transpose();
}

SpdMatrix::SpdMatrix(Eigen::VectorXd eigenvalues, Eigen::MatrixXd basis, bool identity_basis)
    : eigenvalues_(std::move(eigenvalues)),
      basis_(std::move(basis)),
      identity_basis_(identity_basis) {}

SpdMatrix SpdMatrix::from_eigs(const Eigen::VectorXd& eigenvalues,
                               const std::optional<Eigen::MatrixXd>& basis) {
  if (eigenvalues.size() == 0) throw ValidationError("SpdMatrix needs at least one eigenvalue");
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    if (!(eigenvalues[i] > 0.0) || !std::isfinite(eigenvalues[i])) {
      throw ValidationError("SpdMatrix eigenvalue " + std::to_string(i) +
                            " must be positive and finite, got " +
                            std::to_string(eigenvalues[i]));
    }
  }
  if (basis.has_value()) {
    if (basis->rows() != eigenvalues.size()) {
      throw ValidationError("SpdMatrix basis dimension does not match eigenvalue count");
    }
    check_orthonormal(*basis);
    return SpdMatrix(eigenvalues, *basis, is_identity(*basis));
  }
  return SpdMatrix(eigenvalues, Eigen::MatrixXd::Identity(eigenvalues.size(), eigenvalues.size()),
                   true);
}

SpdMatrix SpdMatrix::identity(Eigen::Index dim) { return scaled_identity(dim, 1.0); }

SpdMatrix SpdMatrix::scaled_identity(Eigen::Index dim, double value) {
  return from_eigs(Eigen::VectorXd::Constant(dim, value));
}

Eigen::VectorXd SpdMatrix::apply(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != dim()) throw ValidationError("SpdMatrix::apply dimension mismatch");
  if (identity_basis_) return eigenvalues_.cwiseProduct(x);
  return basis_ * eigenvalues_.cwiseProduct(basis_.transpose() * x).eval();
}

Eigen::VectorXd SpdMatrix::solve(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != dim()) throw ValidationError("SpdMatrix::solve dimension mismatch");
  if (identity_basis_) return x.cwiseQuotient(eigenvalues_);
  return basis_ * (basis_.transpose() * x).cwiseQuotient(eigenvalues_).eval();
}

Eigen::VectorXd SpdMatrix::apply_fn(const std::function<double(double)>& f,
                                    const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != dim()) throw ValidationError("SpdMatrix::apply_fn dimension mismatch");
  Eigen::VectorXd fx(dim());
  for (Eigen::Index i = 0; i < dim(); ++i) {
    fx[i] = f(eigenvalues_[i]);
    if (!std::isfinite(fx[i])) {
      throw NumericError("matrix function is not finite at eigenvalue " +
                         std::to_string(eigenvalues_[i]));
    }
  }
  if (identity_basis_) return fx.cwiseProduct(x);
  return basis_ * fx.cwiseProduct(basis_.transpose() * x).eval();
}

double SpdMatrix::trace_fn(const std::function<double(double)>& f) const {
  double total = 0.0;
  for (Eigen::Index i = 0; i < dim(); ++i) {
    const double v = f(eigenvalues_[i]);
    if (!std::isfinite(v)) {
      throw NumericError("matrix function is not finite at eigenvalue " +
                         std::to_string(eigenvalues_[i]));
    }
    total += v;
  }
  return total;
}

Eigen::MatrixXd SpdMatrix::dense() const {
  if (identity_basis_) return eigenvalues_.asDiagonal();
  return basis_ * eigenvalues_.asDiagonal() * basis_.transpose();
}

Eigen::MatrixXd SpdMatrix::dense_fn(const std::function<double(double)>& f) const {
  return spd_fn(*this, f).dense();
}

SpdMatrix SpdMatrix::scaled(double s) const {
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw ValidationError("SpdMatrix::scaled needs a positive finite factor");
  }
  return SpdMatrix(eigenvalues_ * s, basis_, identity_basis_);
}

Eigen::VectorXd SpdMatrix::to_eigenbasis(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (identity_basis_) return x;
  return basis_.transpose() * x;
}

Eigen::VectorXd SpdMatrix::from_eigenbasis(const Eigen::Ref<const Eigen::VectorXd>& w) const {
  if (identity_basis_) return w;
  return basis_ * w;
}

bool SpdMatrix::same_operator_as(const SpdMatrix& other, double tol) const {
  if (dim() != other.dim()) return false;
  return (dense() - other.dense()).cwiseAbs().maxCoeff() <= tol;
}

SpectralOperator spd_fn(const SpdMatrix& m, const std::function<double(double)>& f) {
  Eigen::VectorXd fx(m.dim());
  for (Eigen::Index i = 0; i < m.dim(); ++i) {
    fx[i] = f(m.eigenvalues()[i]);
    if (!std::isfinite(fx[i])) {
      throw NumericError("matrix function is not finite at eigenvalue " +
                         std::to_string(m.eigenvalues()[i]));
    }
  }
  return SpectralOperator(std::move(fx), m.basis());
}

SpectralOperator spd_fn(const SpectralOperator& m, const std::function<double(double)>& f) {
  Eigen::VectorXd fx(m.dim());
  for (Eigen::Index i = 0; i < m.dim(); ++i) {
    fx[i] = f(m.values()[i]);
    if (!std::isfinite(fx[i])) {
      throw NumericError("matrix function is not finite at value " +
                         std::to_string(m.values()[i]));
    }
  }
  return SpectralOperator(std::move(fx), m.basis());
}

}  // namespace oustab
