#pragma once

// Rayleigh law parameterized by its mean mu:
//   f(y; mu) = (pi y / 2 mu^2) exp(-pi y^2 / 4 mu^2),  y > 0.

#include <cmath>
#include <numbers>
#include <string>

#include "rayreg/error.hpp"
#include "rayreg/random.hpp"

namespace rayreg {

namespace detail {

template <typename Scalar>
void require_positive(Scalar v, const char* what) {
  if (!(v > Scalar(0)) || !std::isfinite(v))
    throw DomainError(std::string(what) + " must be positive and finite, got " +
                      std::to_string(static_cast<double>(v)));
}

}  // namespace detail

/// Mean of a Rayleigh variable. Always > 0.
template <typename Scalar>
class RayleighMean {
 public:
  explicit RayleighMean(Scalar mu) : mu_(mu) { detail::require_positive(mu, "mu"); }
  Scalar value() const noexcept { return mu_; }

 private:
  Scalar mu_;
};

template <typename Scalar>
struct Moments {
  Scalar mean;
  Scalar variance;
};

template <typename Scalar>
Scalar rayleigh_pdf(Scalar y, Scalar mu) {
  detail::require_positive(y, "y");
  detail::require_positive(mu, "mu");
  const Scalar pi = std::numbers::pi_v<Scalar>;
  return pi * y / (Scalar(2) * mu * mu) * std::exp(-pi * y * y / (Scalar(4) * mu * mu));
}

/// log f(y; mu), i.e. the per-observation log-likelihood term.
template <typename Scalar>
Scalar rayleigh_logpdf(Scalar y, Scalar mu) {
  detail::require_positive(y, "y");
  detail::require_positive(mu, "mu");
  const Scalar pi = std::numbers::pi_v<Scalar>;
  return std::log(pi / Scalar(2)) + std::log(y) - Scalar(2) * std::log(mu) -
         pi * y * y / (Scalar(4) * mu * mu);
}

template <typename Scalar>
Scalar rayleigh_cdf(Scalar y, Scalar mu) {
  detail::require_positive(mu, "mu");
  if (y <= Scalar(0)) return Scalar(0);
  const Scalar pi = std::numbers::pi_v<Scalar>;
  return -std::expm1(-pi * y * y / (Scalar(4) * mu * mu));
}

/// Inverse CDF: mu * sqrt(-(4/pi) log(1 - p)).
template <typename Scalar>
Scalar rayleigh_quantile(Scalar p, Scalar mu) {
  detail::require_positive(mu, "mu");
  if (!(p >= Scalar(0) && p < Scalar(1)))
    throw DomainError("probability must lie in [0, 1)");
  const Scalar pi = std::numbers::pi_v<Scalar>;
  return mu * std::sqrt(-(Scalar(4) / pi) * std::log1p(-p));
}

template <typename Scalar>
Moments<Scalar> rayleigh_moments(Scalar mu) {
  detail::require_positive(mu, "mu");
  const Scalar pi = std::numbers::pi_v<Scalar>;
  return {mu, mu * mu * (Scalar(4) / pi - Scalar(1))};
}

/// One draw by inversion. The uniform is open at both ends so draws are finite and > 0.
inline double rayleigh_sample(double mu, RandomStream& rng) {
  detail::require_positive(mu, "mu");
  return rayleigh_quantile(rng.uniform_open(), mu);
}

}  // namespace rayreg
