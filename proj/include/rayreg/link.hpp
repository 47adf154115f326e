#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "rayreg/error.hpp"

namespace rayreg {

enum class LinkKind { log, identity };

/// Link g mapping a positive mean to the linear predictor, eta = g(mu).
class LinkSpec {
 public:
  constexpr LinkSpec() = default;
  constexpr explicit LinkSpec(LinkKind kind) : kind_(kind) {}

  static constexpr LinkSpec log() { return LinkSpec(LinkKind::log); }
  static constexpr LinkSpec identity() { return LinkSpec(LinkKind::identity); }

  constexpr LinkKind kind() const noexcept { return kind_; }

  template <typename Scalar>
  Scalar g(Scalar mu) const {
    return kind_ == LinkKind::log ? std::log(mu) : mu;
  }

  template <typename Scalar>
  Scalar g_prime(Scalar mu) const {
    return kind_ == LinkKind::log ? Scalar(1) / mu : Scalar(1);
  }

  template <typename Scalar>
  Scalar g_second(Scalar mu) const {
    return kind_ == LinkKind::log ? -Scalar(1) / (mu * mu) : Scalar(0);
  }

  /// g^{-1}(eta). Throws NonAdmissibleMeanError if the mean would not be positive.
  template <typename Scalar>
  Scalar inverse(Scalar eta) const {
    const Scalar mu = kind_ == LinkKind::log ? std::exp(eta) : eta;
    if (!(mu > Scalar(0)) || !std::isfinite(mu))
      throw NonAdmissibleMeanError("linear predictor " + std::to_string(static_cast<double>(eta)) +
                                   " maps to a non-admissible mean");
    return mu;
  }

  /// dmu/deta = 1 / g'(mu).
  template <typename Scalar>
  Scalar dmu_deta(Scalar mu) const {
    return kind_ == LinkKind::log ? mu : Scalar(1);
  }

  /// d/dmu (dmu/deta) = -g''(mu) / g'(mu)^2.
  template <typename Scalar>
  Scalar dmu_deta_slope(Scalar /*mu*/) const {
    return kind_ == LinkKind::log ? Scalar(1) : Scalar(0);
  }

  std::string_view name() const noexcept { return kind_ == LinkKind::log ? "log" : "identity"; }

  static LinkSpec parse(std::string_view s) {
    if (s == "log") return log();
    if (s == "identity") return identity();
    throw Error("unknown link '" + std::string(s) + "' (expected log or identity)");
  }

  friend constexpr bool operator==(LinkSpec, LinkSpec) = default;

 private:
  LinkKind kind_ = LinkKind::log;
};

}  // namespace rayreg
