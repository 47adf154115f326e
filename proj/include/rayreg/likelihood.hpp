#pragma once

// Log-likelihood, score, expected information and second-order bias of the
// mean-parameterized Rayleigh regression model.
//
// Per observation, with m = dmu/deta and m' = d/dmu (dmu/deta):
//   score term      x * m * (pi y^2 / (2 mu^3) - 2 / mu)
//   Fisher weight   4 m^2 / mu^2
//   bias weight     -2 m^3 / mu^3 - 2 m^2 m' / mu^2
// The Fisher weights and the bias weights are distinct diagonals and are
// never stored in the same buffer.

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "rayreg/design.hpp"
#include "rayreg/error.hpp"
#include "rayreg/link.hpp"

namespace rayreg {

template <typename Scalar>
struct ScoreInfo {
  Vector<Scalar> score;
  Matrix<Scalar> info;
  Scalar loglik;
  Vector<Scalar> mu;
};

template <typename Scalar>
struct BiasWeights {
  Vector<Scalar> w;      ///< bias weights, one per observation
  Vector<Scalar> delta;  ///< diag(X I^{-1} X')
};

/// Cholesky of the information; throws SingularInformationError when it is
/// not numerically positive definite.
template <typename Scalar>
Eigen::LLT<Matrix<Scalar>> factor_information(const Matrix<Scalar>& info) {
  Eigen::LLT<Matrix<Scalar>> llt(info);
  if (llt.info() != Eigen::Success || !(llt.rcond() > Scalar(1e-13)))
    throw SingularInformationError("Fisher information is singular or not positive definite");
  return llt;
}

template <typename Scalar>
Matrix<Scalar> invert_information(const Matrix<Scalar>& info) {
  const Eigen::Index k = info.rows();
  return factor_information(info).solve(Matrix<Scalar>::Identity(k, k));
}

template <typename Scalar, typename DerivedB>
Scalar loglik(const Design<Scalar>& design, const Eigen::MatrixBase<DerivedB>& beta,
              LinkSpec link) {
  const Vector<Scalar> mu = predict(design.X(), beta, link);
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const auto& y = design.y();
  const Scalar log_half_pi = std::log(pi / Scalar(2));
  Scalar total(0);
  for (Eigen::Index n = 0; n < mu.size(); ++n)
    total += log_half_pi + std::log(y[n]) - Scalar(2) * std::log(mu[n]) -
             pi * y[n] * y[n] / (Scalar(4) * mu[n] * mu[n]);
  return total;
}

/// U(beta) = X' T v.
template <typename Scalar, typename DerivedB>
Vector<Scalar> score(const Design<Scalar>& design, const Eigen::MatrixBase<DerivedB>& beta,
                     LinkSpec link) {
  const Vector<Scalar> mu = predict(design.X(), beta, link);
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const auto& y = design.y();
  Vector<Scalar> tv(mu.size());
  for (Eigen::Index n = 0; n < mu.size(); ++n) {
    const Scalar v = pi * y[n] * y[n] / (Scalar(2) * mu[n] * mu[n] * mu[n]) - Scalar(2) / mu[n];
    tv[n] = link.dmu_deta(mu[n]) * v;
  }
  return design.X().transpose() * tv;
}

template <typename Scalar, typename DerivedMu>
Vector<Scalar> fisher_weights(const Eigen::MatrixBase<DerivedMu>& mu, LinkSpec link) {
  Vector<Scalar> W(mu.size());
  for (Eigen::Index n = 0; n < mu.size(); ++n) {
    const Scalar m = link.dmu_deta(Scalar(mu[n]));
    W[n] = Scalar(4) * m * m / (mu[n] * mu[n]);
  }
  return W;
}

/// I(beta) = X' W X with the Fisher weights.
template <typename Scalar, typename DerivedB>
Matrix<Scalar> fisher_info(const Design<Scalar>& design, const Eigen::MatrixBase<DerivedB>& beta,
                           LinkSpec link) {
  const Vector<Scalar> mu = predict(design.X(), beta, link);
  const Vector<Scalar> W = fisher_weights<Scalar>(mu, link);
  const auto& X = design.X();
  Matrix<Scalar> info = X.transpose() * W.asDiagonal() * X;
  return Scalar(0.5) * (info + info.transpose());
}

/// Log-likelihood, score and information from a single pass over the data.
template <typename Scalar, typename DerivedB>
ScoreInfo<Scalar> score_info(const Design<Scalar>& design,
                             const Eigen::MatrixBase<DerivedB>& beta, LinkSpec link) {
  const auto& X = design.X();
  const auto& y = design.y();
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const Scalar log_half_pi = std::log(pi / Scalar(2));

  ScoreInfo<Scalar> out;
  out.mu = predict(X, beta, link);
  Vector<Scalar> tv(y.size());
  Vector<Scalar> W(y.size());
  Scalar ll(0);
  for (Eigen::Index n = 0; n < y.size(); ++n) {
    const Scalar mu = out.mu[n];
    const Scalar m = link.dmu_deta(mu);
    const Scalar ratio = pi * y[n] * y[n] / (Scalar(4) * mu * mu);
    ll += log_half_pi + std::log(y[n]) - Scalar(2) * std::log(mu) - ratio;
    tv[n] = m * (Scalar(2) * ratio - Scalar(2)) / mu;
    W[n] = Scalar(4) * m * m / (mu * mu);
  }
  out.loglik = ll;
  out.score = X.transpose() * tv;
  out.info = X.transpose() * W.asDiagonal() * X;
  out.info = Scalar(0.5) * (out.info + out.info.transpose());
  return out;
}

/// Bias weights w[n] and delta = diag(X I^{-1} X') at beta.
template <typename Scalar, typename DerivedB>
BiasWeights<Scalar> bias_weights(const Design<Scalar>& design,
                                 const Eigen::MatrixBase<DerivedB>& beta, LinkSpec link) {
  const auto& X = design.X();
  const Vector<Scalar> mu = predict(X, beta, link);
  const Vector<Scalar> Wf = fisher_weights<Scalar>(mu, link);
  const Matrix<Scalar> info = X.transpose() * Wf.asDiagonal() * X;
  const Matrix<Scalar> info_inv = invert_information<Scalar>(Scalar(0.5) * (info + info.transpose()));

  BiasWeights<Scalar> out;
  out.w.resize(mu.size());
  for (Eigen::Index n = 0; n < mu.size(); ++n) {
    const Scalar m = link.dmu_deta(mu[n]);
    const Scalar dm = link.dmu_deta_slope(mu[n]);
    const Scalar mu2 = mu[n] * mu[n];
    out.w[n] = -Scalar(2) * m * m * m / (mu2 * mu[n]) - Scalar(2) * m * m * dm / mu2;
  }
  out.delta = (X * info_inv).cwiseProduct(X).rowwise().sum();
  return out;
}

/// Second-order bias of the MLE, B(beta) = I^{-1} X' diag(w) delta.
template <typename Scalar, typename DerivedB>
Vector<Scalar> cox_snell_bias(const Design<Scalar>& design,
                              const Eigen::MatrixBase<DerivedB>& beta, LinkSpec link) {
  const auto& X = design.X();
  const Vector<Scalar> mu = predict(X, beta, link);
  const Vector<Scalar> Wf = fisher_weights<Scalar>(mu, link);
  Matrix<Scalar> info = X.transpose() * Wf.asDiagonal() * X;
  info = Scalar(0.5) * (info + info.transpose());
  const auto llt = factor_information(info);
  const BiasWeights<Scalar> bw = bias_weights(design, beta, link);
  const Vector<Scalar> rhs = X.transpose() * bw.w.cwiseProduct(bw.delta);
  return llt.solve(rhs);
}

namespace oracle {

/// Reference path for cox_snell_bias: the explicit sum over (r, s, u) of
///   kappa^{ar} kappa^{su} (kappa_rs^(u) - kappa_rsu / 2)
/// built from the second- and third-order cumulants, with -kappa^{ar} the
/// (a, r) element of the inverse information. O(k^3 N); intended for
/// cross-checking the matrix form on small problems.
template <typename Scalar, typename DerivedB>
Vector<Scalar> bias_via_cumulants(const Design<Scalar>& design,
                                  const Eigen::MatrixBase<DerivedB>& beta, LinkSpec link) {
  const auto& X = design.X();
  const Eigen::Index N = X.rows();
  const Eigen::Index k = X.cols();
  const Vector<Scalar> mu = predict(X, beta, link);

  // kappa_rs = E[d^2 l / dbeta_r dbeta_s] = -sum 4/mu^2 m^2 x_r x_s
  Matrix<Scalar> kappa2 = Matrix<Scalar>::Zero(k, k);
  std::vector<Scalar> d_kappa2(static_cast<std::size_t>(k * k * k), Scalar(0));
  std::vector<Scalar> kappa3(static_cast<std::size_t>(k * k * k), Scalar(0));
  auto at = [k](Eigen::Index r, Eigen::Index s, Eigen::Index u) {
    return static_cast<std::size_t>((r * k + s) * k + u);
  };

  for (Eigen::Index n = 0; n < N; ++n) {
    const Scalar m = link.dmu_deta(mu[n]);
    const Scalar dm = link.dmu_deta_slope(mu[n]);
    const Scalar mu2 = mu[n] * mu[n];
    const Scalar mu3 = mu2 * mu[n];
    const Scalar c2 = -Scalar(4) / mu2 * m * m;
    const Scalar c2u = Scalar(8) / mu3 * m * m * m - Scalar(8) / mu2 * m * m * dm;
    const Scalar c3 = Scalar(20) / mu3 * m * m * m - Scalar(12) / mu2 * m * m * dm;
    for (Eigen::Index r = 0; r < k; ++r)
      for (Eigen::Index s = 0; s < k; ++s) {
        const Scalar xrs = X(n, r) * X(n, s);
        kappa2(r, s) += c2 * xrs;
        for (Eigen::Index u = 0; u < k; ++u) {
          d_kappa2[at(r, s, u)] += c2u * xrs * X(n, u);
          kappa3[at(r, s, u)] += c3 * xrs * X(n, u);
        }
      }
  }

  const Matrix<Scalar> info_inv = invert_information<Scalar>(-kappa2);
  const Matrix<Scalar> kappa_up = -info_inv;

  Vector<Scalar> bias = Vector<Scalar>::Zero(k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index r = 0; r < k; ++r)
      for (Eigen::Index s = 0; s < k; ++s)
        for (Eigen::Index u = 0; u < k; ++u)
          bias[a] += kappa_up(a, r) * kappa_up(s, u) *
                     (d_kappa2[at(r, s, u)] - Scalar(0.5) * kappa3[at(r, s, u)]);
  return bias;
}

}  // namespace oracle

}  // namespace rayreg
