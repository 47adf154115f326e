#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "rayreg/metrics.hpp"

using namespace rayreg;

namespace {

EstimatorSample<double> sample(MatrixXd est, VectorXd truth) { return {std::move(est), std::move(truth)}; }

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("relative bias examples") {
    const VectorXd truth = (VectorXd(3) << 0.5, -2.0, 1.0).finished();
    MatrixXd at_truth(4, 3);
    at_truth.rowwise() = truth.transpose();
    CHECK(relative_bias_pct(sample(at_truth, truth)) == VectorXd::Zero(3));

    const VectorXd rb = relative_bias_pct(sample(MatrixXd::Constant(1, 1, 1.1), VectorXd::Ones(1)));
    CHECK(rb[0] == doctest::Approx(10.0).epsilon(1e-13));
  }

  TEST_CASE("relative bias of a zero true value is an error") {
    CHECK_THROWS_AS(relative_bias_pct(sample(MatrixXd::Ones(2, 2), VectorXd::Zero(2))),
                    UndefinedRelativeBiasError);
  }

  TEST_CASE("malformed samples are rejected") {
    CHECK_THROWS_AS(rmse_param(sample(MatrixXd(0, 2), VectorXd::Ones(2))), Error);
    CHECK_THROWS_AS(rmse_param(sample(MatrixXd::Ones(3, 2), VectorXd::Ones(3))), Error);
  }

  TEST_CASE("RMSE examples") {
    const VectorXd truth = (VectorXd(2) << 1.0, -3.0).finished();
    MatrixXd at_truth(5, 2);
    at_truth.rowwise() = truth.transpose();
    CHECK(rmse_param(sample(at_truth, truth)) == VectorXd::Zero(2));

    MatrixXd pm(2, 2);
    pm << 1.25, -2.5, 0.75, -3.5;
    const VectorXd r = rmse_param(sample(pm, truth));
    CHECK(r[0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(r[1] == doctest::Approx(0.5).epsilon(1e-15));
  }

  TEST_CASE("RMSE matches an extended-precision accumulation") {
    std::mt19937_64 gen(51);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int M = 100000;
    MatrixXd est(M, 2);
    const VectorXd truth = (VectorXd(2) << 1e3, -0.01).finished();
    for (int m = 0; m < M; ++m) {
      est(m, 0) = truth[0] + 1e-3 * normal(gen);
      est(m, 1) = truth[1] + 5.0 * normal(gen);
    }
    const VectorXd r = rmse_param(sample(est, truth));
    for (int i = 0; i < 2; ++i) {
      long double acc = 0.0L;
      for (int m = 0; m < M; ++m) {
        const long double d = static_cast<long double>(est(m, i)) - truth[i];
        acc += d * d;
      }
      const double ref = static_cast<double>(std::sqrt(acc / M));
      CHECK(std::abs(r[i] - ref) <= 1e-12 * ref);
    }
  }

  TEST_CASE("RMSE dominates the absolute bias") {
    std::mt19937_64 gen(52);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int t = 0; t < 50; ++t) {
      MatrixXd est(20, 3);
      for (auto& v : est.reshaped()) v = 0.3 + normal(gen);
      const VectorXd truth = VectorXd::Constant(3, 0.7 + 0.01 * t);
      const auto s = sample(est, truth);
      const VectorXd bias = est.colwise().mean().transpose() - truth;
      const VectorXd r = rmse_param(s);
      for (int i = 0; i < 3; ++i) CHECK(r[i] >= std::abs(bias[i]) * (1.0 - 1e-14));
    }
  }

  TEST_CASE("compensated sum recovers cancellation that naive summation loses") {
    const VectorXd v = (VectorXd(4) << 1e16, 1.0, -1e16, 1.0).finished();
    CHECK(compensated_sum(v) == 2.0);
    CompensatedSum<double> s;
    for (int i = 0; i < 10; ++i) s.add(0.1);
    CHECK(s.value() == doctest::Approx(1.0).epsilon(1e-16));
  }

  TEST_CASE("IRBSN examples and invariants") {
    CHECK(irbsn(VectorXd((VectorXd(2) << 3.0, 4.0).finished())) == doctest::Approx(std::sqrt(12.5)).epsilon(1e-15));
    CHECK(irbsn(VectorXd::Zero(3)) == 0.0);
    CHECK_THROWS_AS(irbsn(VectorXd(0)), Error);

    std::mt19937_64 gen(53);
    std::normal_distribution<double> normal(0.0, 10.0);
    for (int t = 0; t < 50; ++t) {
      VectorXd rb(4);
      for (auto& v : rb) v = normal(gen);
      const double base = irbsn(rb);
      CHECK(base > 0.0);
      VectorXd flipped = rb;
      flipped[t % 4] = -flipped[t % 4];
      CHECK(irbsn(flipped) == base);
      VectorXd perm = rb;
      std::shuffle(perm.begin(), perm.end(), gen);
      CHECK(irbsn(perm) == doctest::Approx(base).epsilon(1e-15));
    }
  }

  TEST_CASE("fitted RMSE examples and invariants") {
    const VectorXd y = (VectorXd(5) << 0.3, 1.2, 2.5, 0.8, 1.9).finished();
    CHECK(fitted_rmse(y, y) == 0.0);
    CHECK(fitted_rmse(y, (y.array() + 0.25).matrix()) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK_THROWS_AS(fitted_rmse(y, VectorXd::Ones(4)), Error);

    const VectorXd mu = (VectorXd(5) << 1.0, 1.1, 1.3, 0.9, 1.4).finished();
    std::vector<int> idx = {3, 0, 4, 1, 2};
    VectorXd py(5), pm(5);
    for (int i = 0; i < 5; ++i) {
      py[i] = y[idx[i]];
      pm[i] = mu[idx[i]];
    }
    CHECK(fitted_rmse(py, pm) == doctest::Approx(fitted_rmse(y, mu)).epsilon(1e-15));
  }
}
