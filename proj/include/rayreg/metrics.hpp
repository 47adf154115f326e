#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "rayreg/design.hpp"
#include "rayreg/error.hpp"

namespace rayreg {

/// Neumaier-compensated running sum.
template <typename Scalar>
class CompensatedSum {
 public:
  void add(Scalar x) noexcept {
    const Scalar t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  Scalar value() const noexcept { return sum_ + comp_; }

 private:
  Scalar sum_{0};
  Scalar comp_{0};
};

template <typename Derived>
typename Derived::Scalar compensated_sum(const Eigen::DenseBase<Derived>& v) {
  CompensatedSum<typename Derived::Scalar> s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s.add(v.derived().coeff(i));
  return s.value();
}

/// Monte Carlo estimates (one replication per row) against the true coefficients.
template <typename Scalar>
struct EstimatorSample {
  Matrix<Scalar> estimates;
  Vector<Scalar> truth;

  void validate() const {
    if (estimates.rows() < 1) throw Error("estimator sample needs at least one replication");
    if (estimates.cols() != truth.size())
      throw Error("estimates have " + std::to_string(estimates.cols()) +
                  " columns but truth has " + std::to_string(truth.size()) + " entries");
  }
};

/// 100 (mean_i - truth_i) / truth_i per component.
template <typename Scalar>
Vector<Scalar> relative_bias_pct(const EstimatorSample<Scalar>& s) {
  s.validate();
  const Eigen::Index k = s.truth.size();
  Vector<Scalar> rb(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    if (s.truth[i] == Scalar(0))
      throw UndefinedRelativeBiasError("relative bias undefined for zero true value of parameter " +
                                       std::to_string(i + 1));
    const Scalar mean = compensated_sum(s.estimates.col(i)) / Scalar(s.estimates.rows());
    rb[i] = Scalar(100) * (mean - s.truth[i]) / s.truth[i];
  }
  return rb;
}

template <typename Scalar>
Vector<Scalar> rmse_param(const EstimatorSample<Scalar>& s) {
  s.validate();
  const Eigen::Index k = s.truth.size();
  Vector<Scalar> out(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    CompensatedSum<Scalar> acc;
    for (Eigen::Index m = 0; m < s.estimates.rows(); ++m) {
      const Scalar d = s.estimates(m, i) - s.truth[i];
      acc.add(d * d);
    }
    out[i] = std::sqrt(acc.value() / Scalar(s.estimates.rows()));
  }
  return out;
}

/// Integrated relative bias squared norm: sqrt(mean(rb^2)).
template <typename Derived>
typename Derived::Scalar irbsn(const Eigen::MatrixBase<Derived>& rb) {
  using Scalar = typename Derived::Scalar;
  if (rb.size() < 1) throw Error("IRBSN needs at least one component");
  CompensatedSum<Scalar> acc;
  for (Eigen::Index i = 0; i < rb.size(); ++i) acc.add(rb[i] * rb[i]);
  return std::sqrt(acc.value() / Scalar(rb.size()));
}

/// sqrt(mean((y - mu_hat)^2)).
template <typename DerivedY, typename DerivedM>
typename DerivedY::Scalar fitted_rmse(const Eigen::MatrixBase<DerivedY>& y,
                                      const Eigen::MatrixBase<DerivedM>& mu_hat) {
  using Scalar = typename DerivedY::Scalar;
  if (y.size() != mu_hat.size())
    throw Error("fitted_rmse: y has " + std::to_string(y.size()) + " entries, mu_hat has " +
                std::to_string(mu_hat.size()));
  if (y.size() == 0) throw Error("fitted_rmse: empty input");
  CompensatedSum<Scalar> acc;
  for (Eigen::Index n = 0; n < y.size(); ++n) {
    const Scalar d = y[n] - mu_hat[n];
    acc.add(d * d);
  }
  return std::sqrt(acc.value() / Scalar(y.size()));
}

}  // namespace rayreg
