#pragma once

// Monte Carlo harness: frozen designs, per-replication fitting of the four
// estimators, and aggregation into relative-bias / RMSE / IRBSN tables.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rayreg/design.hpp"
#include "rayreg/link.hpp"

namespace rayreg {

enum class Estimator { mle, cox_snell, firth, bootstrap };

inline constexpr Estimator kAllEstimators[] = {Estimator::mle, Estimator::cox_snell,
                                               Estimator::firth, Estimator::bootstrap};

std::string_view estimator_name(Estimator e);
Estimator parse_estimator(std::string_view name);

struct CovariateGenerator {
  enum class Kind { bernoulli, rayleigh, explicit_matrix };
  Kind kind = Kind::bernoulli;
  double parameter = 0.5;  ///< success probability, or Rayleigh mean
  MatrixXd matrix;         ///< explicit covariates (without intercept column)

  static CovariateGenerator bernoulli(double p) { return {Kind::bernoulli, p, {}}; }
  static CovariateGenerator rayleigh(double mean) { return {Kind::rayleigh, mean, {}}; }
  static CovariateGenerator explicit_values(MatrixXd m) {
    return {Kind::explicit_matrix, 0.0, std::move(m)};
  }
};

struct Scenario {
  std::string name;
  VectorXd beta_true;
  CovariateGenerator covariates;
  LinkSpec link = LinkSpec::log();
  bool intercept = true;  ///< first coefficient multiplies a column of ones

  Eigen::Index num_params() const { return beta_true.size(); }
  void validate() const;
};

struct McConfig {
  int n_mc = 5000;
  int n_boot = 1000;
  std::vector<int> sizes = {9, 25, 49};
  std::uint64_t seed = 20200101;
  std::vector<Estimator> estimators = {std::begin(kAllEstimators), std::end(kAllEstimators)};
  int workers = 1;  ///< output is identical for every worker count

  void validate() const;
};

struct EstimatorStats {
  Estimator estimator;
  VectorXd rb_pct;
  VectorXd rmse;
  double irbsn = 0.0;
  int failures = 0;
};

/// One (scenario, N) cell.
struct CellSummary {
  std::string scenario;
  int N = 0;
  int retained = 0;        ///< replications entering every aggregate
  int design_redraws = 0;  ///< frozen design re-drawn because it was rank deficient
  std::vector<EstimatorStats> estimators;

  const EstimatorStats& stats(Estimator e) const;
};

struct McSummary {
  std::vector<CellSummary> cells;
};

/// Scenario 1 (beta = (0.5, 0.5, 1), Bernoulli(0.5) covariates) and Scenario 2
/// (beta = (2.5, 1.5), unit-mean Rayleigh covariates); log link, intercept first.
std::vector<Scenario> preset_scenarios();

/// Frozen covariate matrix (including the intercept column) for one cell.
/// Re-draws once if the first draw is rank deficient, then throws RankError.
MatrixXd frozen_design(const Scenario& scenario, int N, std::uint64_t seed,
                       int* redraws = nullptr);

CellSummary run_cell(const Scenario& scenario, int N, const McConfig& config);
McSummary run_scenario(const Scenario& scenario, const McConfig& config);

/// Rendered report: fixed-width tables plus the CSV and JSON mirrors.
struct ReportDocument {
  std::string tables;
  std::string csv;
  nlohmann::json json;
};

/// Index of the entry with the smallest magnitude (first one on ties).
std::size_t best_index(const std::vector<double>& values);

ReportDocument report_tables(const std::vector<McSummary>& summaries);

/// CSV columns: scenario,N,estimator,param,rb_pct,rmse,irbsn,failures.
std::string summary_to_csv(const McSummary& summary);
McSummary summary_from_csv(std::string_view text);

nlohmann::json summary_to_json(const McSummary& summary);
McSummary summary_from_json(const nlohmann::json& j);

/// Scenario description file (JSON); see README for the schema.
Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const Scenario& s);

}  // namespace rayreg
