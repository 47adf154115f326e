#pragma once

// Maximum likelihood by Fisher scoring with step halving, and the three
// bias-adjusted estimators: Cox-Snell (corrective), Firth (preventive, root of
// the modified score) and parametric bootstrap.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "rayreg/design.hpp"
#include "rayreg/error.hpp"
#include "rayreg/likelihood.hpp"
#include "rayreg/link.hpp"
#include "rayreg/random.hpp"
#include "rayreg/rayleigh.hpp"

namespace rayreg {

template <typename Scalar>
using Coefficients = Vector<Scalar>;

/// Curvature used for the Newton-type step. `expected` is plain Fisher scoring;
/// the default uses the observed information whenever it is positive definite
/// and falls back to the expected information otherwise.
enum class Curvature { observed_when_definite, expected };

template <typename Scalar>
struct FitOptions {
  Curvature curvature = Curvature::observed_when_definite;
  int max_iter = 200;
  Scalar score_tol = Scalar(1e-8);  ///< on the infinity norm of the (modified) score
  int step_halving_max = 30;
  std::optional<Coefficients<Scalar>> init;  ///< empty means automatic start
  bool trace = false;                        ///< record the objective after every iterate

  void validate() const {
    if (max_iter < 1) throw Error("max_iter must be >= 1");
    if (!(score_tol > Scalar(0))) throw Error("score_tol must be > 0");
    if (step_halving_max < 0) throw Error("step_halving_max must be >= 0");
  }
};

template <typename Scalar>
struct FitResult {
  Coefficients<Scalar> beta_hat;
  Vector<Scalar> mu_hat;
  Scalar loglik{};
  Matrix<Scalar> info;
  Vector<Scalar> std_err;
  int iterations = 0;
  bool converged = false;
  Scalar final_score_norm{};
  std::vector<Scalar> trace;  ///< loglik (MLE) or merit (Firth) per accepted iterate
};

enum class Correction { cox_snell, firth, bootstrap };

inline std::string_view correction_name(Correction c) {
  switch (c) {
    case Correction::cox_snell: return "cox_snell";
    case Correction::firth: return "firth";
    case Correction::bootstrap: return "bootstrap";
  }
  return "?";
}

struct CorrectionMeta {
  // bootstrap
  int replicates = 0;
  int failures = 0;           ///< refits that did not converge
  int replacement_draws = 0;  ///< fresh resamples drawn to replace failures
  // firth
  int iterations = 0;
  bool converged = true;
  double final_score_norm = 0.0;
};

template <typename Scalar>
struct CorrectionResult {
  Correction method;
  Coefficients<Scalar> beta_corrected;
  Vector<Scalar> bias_estimate;
  CorrectionMeta meta;
};

namespace detail {

template <typename Scalar>
Scalar inf_norm(const Vector<Scalar>& v) {
  return v.size() == 0 ? Scalar(0) : v.cwiseAbs().maxCoeff();
}

template <typename Scalar>
Coefficients<Scalar> least_squares(const Matrix<Scalar>& X, const Vector<Scalar>& y) {
  return X.colPivHouseholderQr().solve(y);
}

/// Warm start: OLS of g(y) on X for the log link; for the identity link, OLS of
/// y on X with infeasible fitted means pulled up to 0.1 * min(y) and refit.
template <typename Scalar>
Coefficients<Scalar> auto_start(const Design<Scalar>& design, LinkSpec link) {
  const auto& X = design.X();
  const auto& y = design.y();
  if (link.kind() == LinkKind::log) return least_squares<Scalar>(X, y.array().log().matrix());

  const Scalar floor = Scalar(0.1) * y.minCoeff();
  Coefficients<Scalar> beta = least_squares<Scalar>(X, y);
  for (int attempt = 0; attempt < 5; ++attempt) {
    Vector<Scalar> fitted = X * beta;
    if ((fitted.array() > Scalar(0)).all()) return beta;
    beta = least_squares<Scalar>(X, fitted.cwiseMax(floor));
  }
  throw NonAdmissibleMeanError(
      "no admissible starting point for the identity link; supply an explicit initial value");
}

template <typename Scalar>
Vector<Scalar> std_errors(const Matrix<Scalar>& info) {
  try {
    return invert_information<Scalar>(info).diagonal().cwiseSqrt();
  } catch (const SingularInformationError&) {
    return Vector<Scalar>::Constant(info.rows(), std::numeric_limits<Scalar>::quiet_NaN());
  }
}

/// Accepts a new objective value if it is not worse than the old one beyond
/// rounding in the sum.
template <typename Scalar>
bool not_worse(Scalar candidate, Scalar current) {
  const Scalar slack = Scalar(64) * std::numeric_limits<Scalar>::epsilon() *
                       (std::abs(current) + Scalar(1));
  return candidate >= current - slack;
}

}  // namespace detail

namespace detail {

/// Buffers for one evaluation of loglik, score and information. Reused across
/// iterations so the scoring loop does not allocate.
template <typename Scalar>
struct ScoringState {
  Vector<Scalar> eta, mu, tv, score;
  Matrix<Scalar> info;      ///< expected information
  Matrix<Scalar> observed;  ///< observed information, -d2l/dbeta2
  Scalar loglik{};

  ScoringState(Eigen::Index N, Eigen::Index k)
      : eta(N), mu(N), tv(N), score(k), info(k, k), observed(k, k) {}
};

/// Fills `st` at beta. Returns false if some mean is not admissible.
template <typename Scalar>
bool evaluate(const Matrix<Scalar>& X, const Vector<Scalar>& y, Scalar loglik_const,
              const Vector<Scalar>& beta, LinkSpec link, ScoringState<Scalar>& st) {
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const Eigen::Index N = X.rows();
  const Eigen::Index k = X.cols();
  st.eta.noalias() = X * beta;
  const bool log_link = link.kind() == LinkKind::log;
  Scalar ll = loglik_const;
  st.info.setZero();
  st.observed.setZero();
  for (Eigen::Index n = 0; n < N; ++n) {
    const Scalar mu = log_link ? std::exp(st.eta[n]) : st.eta[n];
    if (!(mu > Scalar(0)) || !std::isfinite(mu)) return false;
    st.mu[n] = mu;
    const Scalar log_mu = log_link ? st.eta[n] : std::log(mu);
    const Scalar m = link.dmu_deta(mu);
    const Scalar ratio = pi * y[n] * y[n] / (Scalar(4) * mu * mu);
    ll -= Scalar(2) * log_mu + ratio;
    st.tv[n] = m * (Scalar(2) * ratio - Scalar(2)) / mu;
    const Scalar w = Scalar(4) * m * m / (mu * mu);
    // -(l'' m^2 + l' m m') with l' = (2 ratio - 2) / mu, l'' = (2 - 6 ratio) / mu^2
    const Scalar o = -((Scalar(2) - Scalar(6) * ratio) * m * m / (mu * mu) +
                       st.tv[n] * link.dmu_deta_slope(mu));
    for (Eigen::Index r = 0; r < k; ++r) {
      const Scalar xr = X(n, r);
      for (Eigen::Index c = r; c < k; ++c) {
        st.info(r, c) += w * xr * X(n, c);
        st.observed(r, c) += o * xr * X(n, c);
      }
    }
  }
  for (Eigen::Index r = 0; r < k; ++r)
    for (Eigen::Index c = 0; c < r; ++c) {
      st.info(r, c) = st.info(c, r);
      st.observed(r, c) = st.observed(c, r);
    }
  st.score.noalias() = X.transpose() * st.tv;
  st.loglik = ll;
  return std::isfinite(ll);
}

/// Cholesky succeeded and the factor is not numerically rank deficient.
template <typename Scalar>
bool well_conditioned(const Eigen::LLT<Matrix<Scalar>>& llt) {
  if (llt.info() != Eigen::Success) return false;
  const auto d = llt.matrixLLT().diagonal().cwiseAbs();
  const Scalar ratio = d.minCoeff() / d.maxCoeff();
  return ratio * ratio > Scalar(1e-13);
}

template <typename Scalar>
FitResult<Scalar> scoring_iterations(const Matrix<Scalar>& X, const Vector<Scalar>& y, LinkSpec link,
                                 const Coefficients<Scalar>& start,
                                 const FitOptions<Scalar>& opts) {
  const Eigen::Index N = X.rows();
  const Eigen::Index k = X.cols();
  if (start.size() != k) throw RankError("initial value has the wrong dimension");
  const Scalar loglik_const =
      Scalar(N) * std::log(std::numbers::pi_v<Scalar> / Scalar(2)) + y.array().log().sum();

  ScoringState<Scalar> state(N, k), next(N, k);
  Coefficients<Scalar> beta = start, trial(k);
  Vector<Scalar> step(k);
  Eigen::LLT<Matrix<Scalar>> llt(k);
  if (!evaluate(X, y, loglik_const, beta, link, state))
    throw NonAdmissibleMeanError("starting value maps to a non-admissible mean");

  FitResult<Scalar> res;
  if (opts.trace) res.trace.push_back(state.loglik);
  bool stalled = false;
  while (res.iterations < opts.max_iter) {
    if (inf_norm(state.score) <= opts.score_tol) break;
    bool factored = false;
    if (opts.curvature == Curvature::observed_when_definite) {
      llt.compute(state.observed);
      factored = well_conditioned(llt);
    }
    if (!factored) {
      llt.compute(state.info);
      if (!well_conditioned(llt))
        throw SingularInformationError("Fisher information is singular during scoring");
    }
    step = llt.solve(state.score);

    Scalar lambda(1);
    bool accepted = false;
    for (int halvings = 0; halvings <= opts.step_halving_max; ++halvings, lambda /= Scalar(2)) {
      trial.noalias() = beta + lambda * step;
      if (evaluate(X, y, loglik_const, trial, link, next) && not_worse(next.loglik, state.loglik)) {
        beta.swap(trial);
        std::swap(state, next);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      stalled = true;
      break;
    }
    ++res.iterations;
    if (opts.trace) res.trace.push_back(state.loglik);
  }

  res.final_score_norm = inf_norm(state.score);
  res.converged = !stalled && res.final_score_norm <= opts.score_tol;
  res.beta_hat = std::move(beta);
  res.mu_hat = std::move(state.mu);
  res.loglik = state.loglik;
  res.info = std::move(state.info);
  res.std_err = std_errors(res.info);
  return res;
}

}  // namespace detail

/// Maximum likelihood estimate by scoring iterations,
///   beta <- beta + lambda A(beta)^{-1} U(beta),
/// where A is the observed information when it is positive definite and the
/// Fisher information I(beta) otherwise (always I with Curvature::expected).
/// lambda is halved until the log-likelihood does not decrease. Convergence
/// is declared on the infinity norm of the score. Non-convergence is reported
/// through FitResult::converged, never thrown.
template <typename Scalar>
FitResult<Scalar> fit_mle(const Design<Scalar>& design, LinkSpec link,
                          const FitOptions<Scalar>& opts = {}) {
  opts.validate();
  require_full_rank(design.X());
  return detail::scoring_iterations(design.X(), design.y(), link,
                                opts.init ? *opts.init : detail::auto_start(design, link), opts);
}

/// Cox-Snell corrected estimate beta_hat - B(beta_hat).
template <typename Scalar>
CorrectionResult<Scalar> correct_cox_snell(const Design<Scalar>& design,
                                           const FitResult<Scalar>& fit, LinkSpec link) {
  if (!fit.converged) throw Error("Cox-Snell correction requires a converged MLE");
  CorrectionResult<Scalar> out{Correction::cox_snell, {}, {}, {}};
  out.bias_estimate = cox_snell_bias(design, fit.beta_hat, link);
  out.beta_corrected = fit.beta_hat - out.bias_estimate;
  return out;
}

namespace detail {

template <typename Scalar>
struct FirthState {
  Vector<Scalar> modified_score;
  Vector<Scalar> bias;
  Vector<Scalar> step;
  Scalar merit;
};

/// U*(beta), B(beta), the Newton-type step and the merit U*' I^{-1} U*.
/// Throws on a non-admissible mean or singular information.
template <typename Scalar>
FirthState<Scalar> firth_state(const Design<Scalar>& design, const Coefficients<Scalar>& beta,
                               LinkSpec link, Curvature curvature) {
  const auto& X = design.X();
  ScoringState<Scalar> si(X.rows(), X.cols());
  if (!evaluate(X, design.y(), Scalar(0), beta, link, si))
    throw NonAdmissibleMeanError("Firth iterate maps to a non-admissible mean");
  const auto info_llt = factor_information(si.info);
  FirthState<Scalar> st;
  st.bias = cox_snell_bias(design, beta, link);
  st.modified_score = si.score - si.info * st.bias;
  st.merit = st.modified_score.dot(info_llt.solve(st.modified_score));
  // The observed information is the exact Jacobian of -U* when I(beta) B(beta)
  // does not depend on beta (log link); otherwise it is an approximation.
  if (curvature == Curvature::observed_when_definite) {
    Eigen::LLT<Matrix<Scalar>> obs(si.observed);
    if (well_conditioned(obs)) {
      st.step = obs.solve(st.modified_score);
      return st;
    }
  }
  st.step = info_llt.solve(st.modified_score);
  return st;
}

}  // namespace detail

/// Firth estimate: root of U*(beta) = U(beta) - I(beta) B(beta), with B
/// re-evaluated at every iterate. Steps solve U* against the curvature chosen in
/// `opts` and are halved until the merit U*' I^{-1} U* does not increase.
template <typename Scalar>
CorrectionResult<Scalar> fit_firth(const Design<Scalar>& design, LinkSpec link,
                                   const FitOptions<Scalar>& opts = {}) {
  opts.validate();
  require_full_rank(design.X());
  Coefficients<Scalar> beta = opts.init ? *opts.init : detail::auto_start(design, link);
  if (beta.size() != design.num_params()) throw RankError("initial value has the wrong dimension");

  detail::FirthState<Scalar> state = detail::firth_state(design, beta, link, opts.curvature);
  CorrectionMeta meta;
  bool stalled = false;
  while (meta.iterations < opts.max_iter) {
    if (detail::inf_norm(state.modified_score) <= opts.score_tol) break;
    const Vector<Scalar> step = state.step;

    Scalar lambda(1);
    bool accepted = false;
    for (int halvings = 0; halvings <= opts.step_halving_max; ++halvings, lambda /= Scalar(2)) {
      const Coefficients<Scalar> trial = beta + lambda * step;
      try {
        auto next = detail::firth_state(design, trial, link, opts.curvature);
        if (std::isfinite(next.merit) && next.merit <= state.merit) {
          beta = trial;
          state = std::move(next);
          accepted = true;
          break;
        }
      } catch (const NonAdmissibleMeanError&) {
      } catch (const SingularInformationError&) {
      }
    }
    if (!accepted) {
      stalled = true;
      break;
    }
    ++meta.iterations;
  }

  const Scalar norm = detail::inf_norm(state.modified_score);
  meta.final_score_norm = static_cast<double>(norm);
  meta.converged = !stalled && norm <= opts.score_tol;
  return {Correction::firth, std::move(beta), std::move(state.bias), meta};
}

/// Draws a response vector given fitted means; b is the replicate index and
/// attempt counts redraws of the same replicate.
template <typename Scalar>
using Resampler = std::function<Vector<Scalar>(const Vector<Scalar>& mu, int b, int attempt)>;

inline constexpr int kBootstrapMaxAttempts = 10;

/// Parametric bootstrap: beta* = 2 beta_hat - mean of the refitted replicates.
/// A replicate whose refit fails to converge is redrawn, up to
/// kBootstrapMaxAttempts draws in total. Throws BootstrapDegenerateError when
/// fewer than 90% of the R replicates converge.
template <typename Scalar>
CorrectionResult<Scalar> correct_bootstrap(const Design<Scalar>& design,
                                           const FitResult<Scalar>& fit, LinkSpec link, int R,
                                           const Resampler<Scalar>& resample,
                                           const FitOptions<Scalar>& opts = {}) {
  if (!fit.converged) throw Error("bootstrap correction requires a converged MLE");
  if (R < 1) throw Error("number of bootstrap replicates must be >= 1");

  opts.validate();
  FitOptions<Scalar> refit_opts = opts;
  refit_opts.trace = false;

  const Eigen::Index k = design.num_params();
  Vector<Scalar> sum = Vector<Scalar>::Zero(k);
  CorrectionMeta meta;
  meta.replicates = R;
  int converged = 0;
  for (int b = 0; b < R; ++b) {
    for (int attempt = 0; attempt < kBootstrapMaxAttempts; ++attempt) {
      if (attempt > 0) ++meta.replacement_draws;
      // X was rank-checked by the original fit; the start is the original estimate.
      bool ok = false;
      FitResult<Scalar> refit;
      try {
        refit = detail::scoring_iterations(design.X(), resample(fit.mu_hat, b, attempt), link,
                                       fit.beta_hat, refit_opts);
        ok = refit.converged;
      } catch (const NonAdmissibleMeanError&) {
      } catch (const SingularInformationError&) {
      }
      if (ok) {
        sum += refit.beta_hat;
        ++converged;
        break;
      }
      ++meta.failures;
    }
  }
  if (10 * converged < 9 * R)
    throw BootstrapDegenerateError("only " + std::to_string(converged) + " of " +
                                   std::to_string(R) + " bootstrap replicates converged");

  const Vector<Scalar> mean = sum / Scalar(converged);
  CorrectionResult<Scalar> out{Correction::bootstrap, {}, {}, meta};
  out.beta_corrected = Scalar(2) * fit.beta_hat - mean;
  out.bias_estimate = mean - fit.beta_hat;
  return out;
}

/// Parametric bootstrap drawing y*[n] ~ Rayleigh(mu_hat[n]) from one stream, in order.
inline CorrectionResult<double> correct_bootstrap(const DesignD& design,
                                                  const FitResult<double>& fit, LinkSpec link,
                                                  int R, RandomStream& rng,
                                                  const FitOptions<double>& opts = {}) {
  const Resampler<double> draw = [&rng](const VectorXd& mu, int, int) {
    VectorXd y(mu.size());
    for (Eigen::Index n = 0; n < mu.size(); ++n) y[n] = rayleigh_sample(mu[n], rng);
    return y;
  };
  return correct_bootstrap<double>(design, fit, link, R, draw, opts);
}

/// MLE of a constant mean: mu = sqrt(pi * mean(y^2) / 4).
template <typename Derived>
RayleighMean<typename Derived::Scalar> fit_rayleigh_const(const Eigen::MatrixBase<Derived>& y) {
  using Scalar = typename Derived::Scalar;
  if (y.size() == 0) throw Error("cannot fit a Rayleigh mean to an empty sample");
  for (Eigen::Index n = 0; n < y.size(); ++n) detail::require_positive(Scalar(y[n]), "y");
  const Scalar mean_sq = y.squaredNorm() / Scalar(y.size());
  return RayleighMean<Scalar>(std::sqrt(std::numbers::pi_v<Scalar> * mean_sq / Scalar(4)));
}

/// Ordinary least squares of y on X (Gaussian regression, identity mean).
template <typename Scalar>
Coefficients<Scalar> fit_gaussian(const Design<Scalar>& design) {
  require_full_rank(design.X());
  return detail::least_squares<Scalar>(design.X(), design.y());
}

}  // namespace rayreg
