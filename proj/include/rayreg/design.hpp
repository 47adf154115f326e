#pragma once

#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "rayreg/error.hpp"
#include "rayreg/link.hpp"

namespace rayreg {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VectorXd = Vector<double>;
using MatrixXd = Matrix<double>;

/// Observed signal y (length N, strictly positive) with its N x k covariate matrix.
/// Construction enforces N > k >= 1 and positivity; column rank is checked by the fitters.
template <typename Scalar>
class Design {
 public:
  Design(Vector<Scalar> y, Matrix<Scalar> X) : y_(std::move(y)), X_(std::move(X)) {
    if (X_.cols() < 1) throw RankError("design needs at least one covariate column");
    if (X_.rows() != y_.size())
      throw RankError("y has " + std::to_string(y_.size()) + " entries but X has " +
                      std::to_string(X_.rows()) + " rows");
    if (X_.rows() <= X_.cols())
      throw RankError("need more observations than covariates (N=" + std::to_string(X_.rows()) +
                      ", k=" + std::to_string(X_.cols()) + ")");
    for (Eigen::Index n = 0; n < y_.size(); ++n)
      if (!(y_[n] > Scalar(0)) || !std::isfinite(y_[n]))
        throw DomainError("y[" + std::to_string(n) + "] must be positive and finite");
    if (!X_.allFinite()) throw DomainError("covariate matrix contains non-finite values");
  }

  const Vector<Scalar>& y() const noexcept { return y_; }
  const Matrix<Scalar>& X() const noexcept { return X_; }
  Eigen::Index size() const noexcept { return X_.rows(); }
  Eigen::Index num_params() const noexcept { return X_.cols(); }

  /// Same covariates, new response.
  Design with_response(Vector<Scalar> y) const { return Design(std::move(y), X_); }

  template <typename Other>
  Design<Other> cast() const {
    return Design<Other>(y_.template cast<Other>(), X_.template cast<Other>());
  }

 private:
  Vector<Scalar> y_;
  Matrix<Scalar> X_;
};

using DesignD = Design<double>;

/// Throws RankError unless X has full column rank.
template <typename Derived>
void require_full_rank(const Eigen::MatrixBase<Derived>& X) {
  Eigen::ColPivHouseholderQR<typename Derived::PlainObject> qr(X);
  if (qr.rank() < X.cols())
    throw RankError("covariate matrix is rank deficient (rank " + std::to_string(qr.rank()) +
                    " < " + std::to_string(X.cols()) + " columns)");
}

/// Means mu[n] = g^{-1}(x[n]' beta).
template <typename DerivedX, typename DerivedB>
Vector<typename DerivedX::Scalar> predict(const Eigen::MatrixBase<DerivedX>& X,
                                          const Eigen::MatrixBase<DerivedB>& beta,
                                          LinkSpec link) {
  using Scalar = typename DerivedX::Scalar;
  if (beta.size() != X.cols())
    throw RankError("coefficient vector has " + std::to_string(beta.size()) +
                    " entries, design has " + std::to_string(X.cols()) + " columns");
  Vector<Scalar> mu = X * beta;
  for (Eigen::Index n = 0; n < mu.size(); ++n) mu[n] = link.inverse(mu[n]);
  return mu;
}

template <typename Scalar, typename DerivedB>
Vector<Scalar> predict(const Design<Scalar>& design, const Eigen::MatrixBase<DerivedB>& beta,
                       LinkSpec link) {
  return predict(design.X(), beta, link);
}

/// Prepends a column of ones.
template <typename Derived>
Matrix<typename Derived::Scalar> with_intercept(const Eigen::MatrixBase<Derived>& X) {
  Matrix<typename Derived::Scalar> out(X.rows(), X.cols() + 1);
  out.col(0).setOnes();
  out.rightCols(X.cols()) = X;
  return out;
}

}  // namespace rayreg
