#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "rayreg/likelihood.hpp"
#include "rayreg/rayleigh.hpp"
#include "test_support.hpp"

using namespace rayreg;

namespace {

/// Design with positive covariates and coefficients, so identity-link means stay positive.
DesignD positive_design(std::mt19937_64& gen, int N, int k, VectorXd& beta) {
  std::uniform_real_distribution<double> cov(0.5, 2.0), coef(0.2, 1.0), unif(0.0, 1.0);
  MatrixXd X(N, k);
  for (int n = 0; n < N; ++n)
    for (int j = 0; j < k; ++j) X(n, j) = j == 0 ? 1.0 : cov(gen);
  beta.resize(k);
  for (int j = 0; j < k; ++j) beta[j] = coef(gen);
  VectorXd y(N);
  for (int n = 0; n < N; ++n) y[n] = X.row(n).dot(beta) * (0.2 + 1.6 * unif(gen));
  return DesignD(y, X);
}

VectorXd finite_difference_gradient(const DesignD& d, const VectorXd& beta, LinkSpec link) {
  VectorXd g(beta.size());
  for (Eigen::Index i = 0; i < beta.size(); ++i) {
    const double h = 1e-6 * (1.0 + std::abs(beta[i]));
    VectorXd up = beta, dn = beta;
    up[i] += h;
    dn[i] -= h;
    g[i] = (loglik(d, up, link) - loglik(d, dn, link)) / (2.0 * h);
  }
  return g;
}

}  // namespace

TEST_SUITE("likelihood") {
  TEST_CASE("single observation, intercept-only log link at mu = 1") {
    // N > k forces two rows; each contributes the same term.
    const DesignD d(VectorXd::Ones(2), MatrixXd::Ones(2, 1));
    const double term = std::log(std::numbers::pi / 2.0) - std::numbers::pi / 4.0;
    CHECK(loglik(d, VectorXd::Zero(1), LinkSpec::log()) == doctest::Approx(2.0 * term).epsilon(1e-15));
    CHECK(term == doctest::Approx(-0.3337).epsilon(1e-3));
  }

  TEST_CASE("duplicating every observation doubles the log-likelihood") {
    std::mt19937_64 gen(11);
    VectorXd beta;
    const DesignD d = testing::random_design(gen, 10, 3, &beta);
    MatrixXd X2(20, 3);
    X2 << d.X(), d.X();
    VectorXd y2(20);
    y2 << d.y(), d.y();
    const DesignD dd(y2, X2);
    CHECK(loglik(dd, beta, LinkSpec::log()) == 2.0 * loglik(d, beta, LinkSpec::log()));
  }

  TEST_CASE("loglik equals the sum of log-densities (long double oracle)") {
    std::mt19937_64 gen(12);
    for (int t = 0; t < 20; ++t) {
      VectorXd beta;
      const DesignD d = testing::random_design(gen, 5 + t, 1 + t % 4, &beta);
      const VectorXd mu = predict(d.X(), beta, LinkSpec::log());
      long double ref = 0.0L;
      for (Eigen::Index n = 0; n < mu.size(); ++n)
        ref += rayleigh_logpdf<long double>(d.y()[n], mu[n]);
      const double ll = loglik(d, beta, LinkSpec::log());
      CHECK(std::abs(ll - static_cast<double>(ref)) < 1e-10 * (1.0 + std::abs(ll)));
    }
  }

  TEST_CASE("score matches central finite differences on random designs, both links") {
    std::mt19937_64 gen(13);
    std::uniform_int_distribution<int> Nd(5, 50), kd(1, 4);
    for (int t = 0; t < 100; ++t) {
      const int k = kd(gen);
      const int N = std::max(Nd(gen), k + 1);
      VectorXd beta;
      const DesignD d = testing::random_design(gen, N, k, &beta);
      const VectorXd u = score(d, beta, LinkSpec::log());
      const VectorXd fd = finite_difference_gradient(d, beta, LinkSpec::log());
      for (int i = 0; i < k; ++i)
        CHECK(std::abs(u[i] - fd[i]) / std::max(1.0, std::abs(fd[i])) < 1e-6);

      const DesignD p = positive_design(gen, N, k, beta);
      const VectorXd ui = score(p, beta, LinkSpec::identity());
      const VectorXd fdi = finite_difference_gradient(p, beta, LinkSpec::identity());
      for (int i = 0; i < k; ++i)
        CHECK(std::abs(ui[i] - fdi[i]) / std::max(1.0, std::abs(fdi[i])) < 1e-6);
    }
  }

  TEST_CASE("score vanishes at the closed-form intercept-only MLE") {
    VectorXd y(6);
    y << 0.4, 1.7, 0.9, 2.2, 1.1, 0.35;
    const DesignD d(y, MatrixXd::Ones(6, 1));
    const double mu2 = std::numbers::pi * y.squaredNorm() / (4.0 * 6);
    const VectorXd beta = VectorXd::Constant(1, 0.5 * std::log(mu2));
    CHECK(std::abs(score(d, beta, LinkSpec::log())[0]) < 1e-10);
  }

  TEST_CASE("score is negative when the mean far exceeds the data") {
    VectorXd y(4);
    y << 0.5, 1.0, 1.5, 0.8;
    const DesignD d(y, MatrixXd::Ones(4, 1));
    CHECK(score(d, VectorXd::Constant(1, 8.0), LinkSpec::log())[0] < 0.0);
    // limit: each term -> -2
    CHECK(score(d, VectorXd::Constant(1, 30.0), LinkSpec::log())[0] == doctest::Approx(-8.0));
  }

  TEST_CASE("log-link information is 4 X'X for every beta") {
    std::mt19937_64 gen(14);
    std::uniform_int_distribution<int> Nd(5, 50), kd(1, 4);
    for (int t = 0; t < 100; ++t) {
      const int k = kd(gen);
      const int N = std::max(Nd(gen), k + 1);
      VectorXd beta;
      const DesignD d = testing::random_design(gen, N, k, &beta);
      const MatrixXd I = fisher_info(d, beta, LinkSpec::log());
      const MatrixXd ref = 4.0 * d.X().transpose() * d.X();
      CHECK((I - ref).norm() <= 1e-12 * ref.norm());
      CHECK((I - I.transpose()).norm() <= 1e-12 * I.norm());
    }
  }

  TEST_CASE("N = 1, k = 1, x = 1: information weight is 4") {
    const VectorXd mu = VectorXd::Constant(1, 2.7);
    CHECK(fisher_weights<double>(mu, LinkSpec::log())[0] == doctest::Approx(4.0).epsilon(1e-15));
  }

  TEST_CASE("information matches minus the average numerical Hessian over simulated data") {
    std::mt19937_64 gen(15);
    MatrixXd X(8, 2);
    X.col(0).setOnes();
    X.col(1) << -1.0, -0.5, 0.0, 0.3, 0.7, 1.0, 1.4, 2.0;
    const VectorXd beta = (VectorXd(2) << 0.4, -0.3).finished();
    for (LinkSpec link : {LinkSpec::log(), LinkSpec::identity()}) {
      const VectorXd b = link == LinkSpec::log() ? beta : VectorXd((VectorXd(2) << 2.0, 0.4).finished());
      const VectorXd mu = predict(X, b, link);
      const MatrixXd I = fisher_info(DesignD(mu, X), b, link);
      const int M = 10000;
      const double h = 1e-4;
      RandomStream rng(77);
      MatrixXd sum = MatrixXd::Zero(2, 2), sum2 = MatrixXd::Zero(2, 2);
      for (int m = 0; m < M; ++m) {
        VectorXd y(8);
        for (int n = 0; n < 8; ++n) y[n] = rayleigh_sample(mu[n], rng);
        const DesignD d(y, X);
        MatrixXd H(2, 2);
        for (int r = 0; r < 2; ++r)
          for (int s = 0; s < 2; ++s) {
            auto at = [&](double dr, double ds) {
              VectorXd bb = b;
              bb[r] += dr;
              bb[s] += ds;
              return loglik(d, bb, link);
            };
            H(r, s) = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4 * h * h);
          }
        sum -= H;
        sum2 += H.cwiseProduct(H);
      }
      const MatrixXd mean = sum / M;
      const MatrixXd se = ((sum2 / M - mean.cwiseProduct(mean)) / M).cwiseSqrt();
      for (int r = 0; r < 2; ++r)
        for (int s = 0; s < 2; ++s) CHECK(std::abs(mean(r, s) - I(r, s)) < 3.0 * se(r, s));
    }
  }

  TEST_CASE("bias weights are -4 under the log link") {
    std::mt19937_64 gen(16);
    for (int t = 0; t < 20; ++t) {
      VectorXd beta;
      const DesignD d = testing::random_design(gen, 12, 3, &beta);
      const auto bw = bias_weights(d, beta, LinkSpec::log());
      for (Eigen::Index n = 0; n < bw.w.size(); ++n) CHECK(bw.w[n] == -4.0);
    }
  }

  TEST_CASE("delta sums to k/4 and equals a quarter of the hat diagonal under the log link") {
    std::mt19937_64 gen(17);
    for (int k = 1; k <= 4; ++k) {
      VectorXd beta;
      const DesignD d = testing::random_design(gen, 15, k, &beta);
      const auto bw = bias_weights(d, beta, LinkSpec::log());
      CHECK(bw.delta.sum() == doctest::Approx(k / 4.0).epsilon(1e-12));
      const MatrixXd& X = d.X();
      const MatrixXd hat = X * (X.transpose() * X).inverse() * X.transpose();
      CHECK((bw.delta - 0.25 * hat.diagonal()).norm() < 1e-12);
    }
  }

  TEST_CASE("intercept-only Cox-Snell bias is -1/(4N)") {
    for (int N : {2, 5, 9, 49}) {
      RandomStream rng(static_cast<std::uint64_t>(N));
      VectorXd y(N);
      for (auto& v : y) v = rayleigh_sample(1.3, rng);
      const DesignD d(y, MatrixXd::Ones(N, 1));
      for (double b : {-1.0, 0.0, 2.0}) {
        CHECK(cox_snell_bias(d, VectorXd::Constant(1, b), LinkSpec::log())[0] ==
              doctest::Approx(-1.0 / (4.0 * N)).epsilon(1e-13));
        CHECK(oracle::bias_via_cumulants(d, VectorXd::Constant(1, b), LinkSpec::log())[0] ==
              doctest::Approx(-1.0 / (4.0 * N)).epsilon(1e-13));
      }
    }
  }

  TEST_CASE("duplicating the design halves the intercept-only bias") {
    const DesignD d(VectorXd::Ones(7), MatrixXd::Ones(7, 1));
    const DesignD dd(VectorXd::Ones(14), MatrixXd::Ones(14, 1));
    const double b1 = cox_snell_bias(d, VectorXd::Zero(1), LinkSpec::log())[0];
    const double b2 = cox_snell_bias(dd, VectorXd::Zero(1), LinkSpec::log())[0];
    CHECK(b2 == doctest::Approx(0.5 * b1).epsilon(1e-14));
  }

  TEST_CASE("matrix bias equals the cumulant triple sum on random small designs") {
    std::mt19937_64 gen(18);
    std::uniform_int_distribution<int> kd(1, 3);
    for (int t = 0; t < 100; ++t) {
      const int k = kd(gen);
      std::uniform_int_distribution<int> Nd(k + 1, 12);
      const int N = Nd(gen);
      VectorXd beta;
      const DesignD d = testing::random_design(gen, N, k, &beta, t % 2 == 0);
      const VectorXd a = cox_snell_bias(d, beta, LinkSpec::log());
      const VectorXd b = oracle::bias_via_cumulants(d, beta, LinkSpec::log());
      CHECK((a - b).cwiseAbs().maxCoeff() < 1e-10);

      const DesignD p = positive_design(gen, N, k, beta);
      const VectorXd ai = cox_snell_bias(p, beta, LinkSpec::identity());
      const VectorXd bi = oracle::bias_via_cumulants(p, beta, LinkSpec::identity());
      CHECK((ai - bi).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  TEST_CASE("k = 1 with a non-constant covariate") {
    VectorXd x(6), y(6);
    x << 0.5, 1.0, 1.5, -0.4, 2.0, 0.8;
    y << 1.2, 0.7, 2.0, 0.9, 3.1, 1.0;
    const DesignD d(y, MatrixXd(x));
    const VectorXd beta = VectorXd::Constant(1, 0.3);
    const double a = cox_snell_bias(d, beta, LinkSpec::log())[0];
    CHECK(a == doctest::Approx(oracle::bias_via_cumulants(d, beta, LinkSpec::log())[0]).epsilon(1e-12));
    // closed form: -(sum x^3) / (4 (sum x^2)^2)
    const double sx2 = x.squaredNorm(), sx3 = x.array().cube().sum();
    CHECK(a == doctest::Approx(-sx3 / (4.0 * sx2 * sx2)).epsilon(1e-12));
  }

  TEST_CASE("singular information is reported") {
    MatrixXd X(4, 2);
    X << 1, 2, 1, 2, 1, 2, 1, 2;
    const DesignD d(VectorXd::Ones(4), X);
    CHECK_THROWS_AS(cox_snell_bias(d, VectorXd::Zero(2), LinkSpec::log()), SingularInformationError);
    CHECK_THROWS_AS(bias_weights(d, VectorXd::Zero(2), LinkSpec::log()), SingularInformationError);
  }

  TEST_CASE("invariance to permuting observations") {
    std::mt19937_64 gen(19);
    VectorXd beta;
    const DesignD d = testing::random_design(gen, 11, 3, &beta);
    Eigen::PermutationMatrix<Eigen::Dynamic> P(11);
    P.setIdentity();
    std::shuffle(P.indices().data(), P.indices().data() + 11, gen);
    const DesignD pd(P * d.y(), P * d.X());
    const LinkSpec link = LinkSpec::log();
    CHECK(loglik(pd, beta, link) == doctest::Approx(loglik(d, beta, link)).epsilon(1e-14));
    CHECK(score(pd, beta, link).isApprox(score(d, beta, link), 1e-12));
    CHECK(fisher_info(pd, beta, link).isApprox(fisher_info(d, beta, link), 1e-13));
  }

  TEST_CASE("score_info agrees with the individual evaluations") {
    std::mt19937_64 gen(20);
    VectorXd beta;
    const DesignD d = testing::random_design(gen, 9, 2, &beta);
    const auto si = score_info(d, beta, LinkSpec::log());
    CHECK(si.loglik == doctest::Approx(loglik(d, beta, LinkSpec::log())).epsilon(1e-14));
    CHECK(si.score.isApprox(score(d, beta, LinkSpec::log()), 1e-12));
    CHECK(si.info.isApprox(fisher_info(d, beta, LinkSpec::log()), 1e-13));
  }

  TEST_CASE("long double instantiation agrees with double") {
    std::mt19937_64 gen(21);
    VectorXd beta;
    const DesignD d = testing::random_design(gen, 10, 3, &beta);
    const Design<long double> dl = d.cast<long double>();
    const Vector<long double> bl = beta.cast<long double>();
    const Vector<long double> a = cox_snell_bias(dl, bl, LinkSpec::log());
    const Vector<long double> b = oracle::bias_via_cumulants(dl, bl, LinkSpec::log());
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-15L);
    CHECK((a.cast<double>() - cox_snell_bias(d, beta, LinkSpec::log())).norm() < 1e-12);
  }
}
