#include "rayreg/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include "rayreg/error.hpp"
#include "rayreg/estimators.hpp"
#include "rayreg/metrics.hpp"
#include "rayreg/random.hpp"
#include "rayreg/rayleigh.hpp"
#include "rayreg/text.hpp"

namespace rayreg {

namespace {

constexpr std::uint64_t kDesignTag = 0x64657369676eULL;  // "design"

struct Replication {
  // One row per requested estimator, in config order; empty when that estimator failed.
  std::vector<std::optional<VectorXd>> estimates;
};

Replication run_replication(const DesignD& frozen, const Scenario& sc, const McConfig& cfg,
                            RandomStream& rng) {
  const VectorXd mu = predict(frozen.X(), sc.beta_true, sc.link);
  VectorXd y(mu.size());
  for (Eigen::Index n = 0; n < mu.size(); ++n) y[n] = rayleigh_sample(mu[n], rng);
  const DesignD design = frozen.with_response(std::move(y));

  Replication rep;
  rep.estimates.resize(cfg.estimators.size());
  const FitResult<double> mle = fit_mle(design, sc.link);
  if (!mle.converged) return rep;  // every estimator of this replication is dropped

  for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
    try {
      switch (cfg.estimators[e]) {
        case Estimator::mle:
          rep.estimates[e] = mle.beta_hat;
          break;
        case Estimator::cox_snell:
          rep.estimates[e] = correct_cox_snell(design, mle, sc.link).beta_corrected;
          break;
        case Estimator::firth: {
          FitOptions<double> opts;
          opts.init = mle.beta_hat;
          auto firth = fit_firth(design, sc.link, opts);
          if (firth.meta.converged) rep.estimates[e] = std::move(firth.beta_corrected);
          break;
        }
        case Estimator::bootstrap:
          rep.estimates[e] =
              correct_bootstrap(design, mle, sc.link, cfg.n_boot, rng).beta_corrected;
          break;
      }
    } catch (const Error&) {
      // counted as a failure of this estimator below
    }
  }
  return rep;
}

}  // namespace

std::string_view estimator_name(Estimator e) {
  switch (e) {
    case Estimator::mle: return "mle";
    case Estimator::cox_snell: return "cox_snell";
    case Estimator::firth: return "firth";
    case Estimator::bootstrap: return "bootstrap";
  }
  return "?";
}

Estimator parse_estimator(std::string_view name) {
  for (Estimator e : kAllEstimators)
    if (estimator_name(e) == name) return e;
  if (name == "coxsnell") return Estimator::cox_snell;
  throw Error("unknown estimator '" + std::string(name) + "'");
}

void Scenario::validate() const {
  if (beta_true.size() < 1) throw Error("scenario '" + name + "' has no coefficients");
  if (intercept && beta_true.size() < 1) throw Error("intercept requires a coefficient");
  switch (covariates.kind) {
    case CovariateGenerator::Kind::bernoulli:
      if (!(covariates.parameter > 0.0 && covariates.parameter < 1.0))
        throw Error("Bernoulli covariate probability must be in (0, 1)");
      break;
    case CovariateGenerator::Kind::rayleigh:
      if (!(covariates.parameter > 0.0)) throw Error("Rayleigh covariate mean must be > 0");
      break;
    case CovariateGenerator::Kind::explicit_matrix: {
      const Eigen::Index want = beta_true.size() - (intercept ? 1 : 0);
      if (covariates.matrix.cols() != want)
        throw Error("explicit covariate matrix has " + std::to_string(covariates.matrix.cols()) +
                    " columns, scenario needs " + std::to_string(want));
      break;
    }
  }
}

void McConfig::validate() const {
  if (n_mc < 1) throw Error("n_mc must be >= 1");
  if (n_boot < 1) throw Error("n_boot must be >= 1");
  if (sizes.empty()) throw Error("at least one sample size is required");
  if (estimators.empty()) throw Error("at least one estimator is required");
  if (workers < 1) throw Error("workers must be >= 1");
}

const EstimatorStats& CellSummary::stats(Estimator e) const {
  for (const auto& s : estimators)
    if (s.estimator == e) return s;
  throw Error("estimator '" + std::string(estimator_name(e)) + "' not present in cell");
}

std::vector<Scenario> preset_scenarios() {
  Scenario s1;
  s1.name = "scenario1";
  s1.beta_true = (VectorXd(3) << 0.5, 0.5, 1.0).finished();
  s1.covariates = CovariateGenerator::bernoulli(0.5);

  Scenario s2;
  s2.name = "scenario2";
  s2.beta_true = (VectorXd(2) << 2.5, 1.5).finished();
  s2.covariates = CovariateGenerator::rayleigh(1.0);
  return {s1, s2};
}

MatrixXd frozen_design(const Scenario& sc, int N, std::uint64_t seed, int* redraws) {
  sc.validate();
  const Eigen::Index k = sc.num_params();
  const Eigen::Index free_cols = k - (sc.intercept ? 1 : 0);
  if (redraws) *redraws = 0;

  for (int attempt = 0; attempt < 2; ++attempt) {
    MatrixXd C(N, free_cols);
    if (sc.covariates.kind == CovariateGenerator::Kind::explicit_matrix) {
      if (sc.covariates.matrix.rows() != N)
        throw Error("explicit covariate matrix has " + std::to_string(sc.covariates.matrix.rows()) +
                    " rows but N=" + std::to_string(N));
      C = sc.covariates.matrix;
    } else {
      RandomStream rng = RandomStream::substream(
          seed, {hash_name(sc.name), static_cast<std::uint64_t>(N), kDesignTag,
                 static_cast<std::uint64_t>(attempt)});
      // column-major fill so adding a covariate does not perturb earlier columns
      for (Eigen::Index j = 0; j < free_cols; ++j)
        for (Eigen::Index n = 0; n < N; ++n)
          C(n, j) = sc.covariates.kind == CovariateGenerator::Kind::bernoulli
                        ? (rng.uniform_open() < sc.covariates.parameter ? 1.0 : 0.0)
                        : rayleigh_sample(sc.covariates.parameter, rng);
    }
    MatrixXd X = sc.intercept ? with_intercept(C) : C;
    if (X.rows() <= X.cols())
      throw RankError("scenario '" + sc.name + "': N=" + std::to_string(N) +
                      " is not larger than k=" + std::to_string(X.cols()));
    try {
      require_full_rank(X);
      return X;
    } catch (const RankError&) {
      if (attempt == 0 && sc.covariates.kind != CovariateGenerator::Kind::explicit_matrix) {
        std::cerr << "warning: scenario '" << sc.name << "' N=" << N
                  << ": frozen design is rank deficient, drawing it again\n";
        if (redraws) *redraws = 1;
        continue;
      }
      throw RankError("scenario '" + sc.name + "' N=" + std::to_string(N) +
                      ": frozen design is rank deficient");
    }
  }
  throw RankError("unreachable");
}

CellSummary run_cell(const Scenario& sc, int N, const McConfig& cfg) {
  cfg.validate();
  CellSummary cell;
  cell.scenario = sc.name;
  cell.N = N;
  const MatrixXd X = frozen_design(sc, N, cfg.seed, &cell.design_redraws);
  // placeholder response; every replication replaces it
  const DesignD frozen(VectorXd::Ones(N), X);

  std::vector<Replication> reps(static_cast<std::size_t>(cfg.n_mc));
  auto work = [&](int worker) {
    for (int r = worker; r < cfg.n_mc; r += cfg.workers) {
      RandomStream rng = RandomStream::substream(
          cfg.seed, {hash_name(sc.name), static_cast<std::uint64_t>(N),
                     static_cast<std::uint64_t>(r)});
      reps[static_cast<std::size_t>(r)] = run_replication(frozen, sc, cfg, rng);
    }
  };
  if (cfg.workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < cfg.workers; ++w) pool.emplace_back(work, w);
  }

  // Fixed-order reduction over replication index.
  const std::size_t E = cfg.estimators.size();
  std::vector<int> failures(E, 0);
  std::vector<std::size_t> kept;
  for (std::size_t r = 0; r < reps.size(); ++r) {
    bool all = true;
    for (std::size_t e = 0; e < E; ++e)
      if (!reps[r].estimates[e]) {
        ++failures[e];
        all = false;
      }
    if (all) kept.push_back(r);
  }
  cell.retained = static_cast<int>(kept.size());
  if (kept.empty())
    throw Error("scenario '" + sc.name + "' N=" + std::to_string(N) +
                ": no replication produced every estimator");

  const Eigen::Index k = sc.num_params();
  for (std::size_t e = 0; e < E; ++e) {
    EstimatorSample<double> sample{MatrixXd(static_cast<Eigen::Index>(kept.size()), k),
                                   sc.beta_true};
    for (std::size_t i = 0; i < kept.size(); ++i)
      sample.estimates.row(static_cast<Eigen::Index>(i)) = reps[kept[i]].estimates[e]->transpose();
    EstimatorStats st;
    st.estimator = cfg.estimators[e];
    st.rb_pct = relative_bias_pct(sample);
    st.rmse = rmse_param(sample);
    st.irbsn = irbsn(st.rb_pct);
    st.failures = failures[e];
    cell.estimators.push_back(std::move(st));
  }
  return cell;
}

McSummary run_scenario(const Scenario& sc, const McConfig& cfg) {
  cfg.validate();
  sc.validate();
  McSummary out;
  for (int N : cfg.sizes) out.cells.push_back(run_cell(sc, N, cfg));
  return out;
}

std::size_t best_index(const std::vector<double>& values) {
  if (values.empty()) throw Error("best_index of an empty list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (std::abs(values[i]) < std::abs(values[best])) best = i;
  return best;
}

namespace {

std::string fixed(double v, int width = 10, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%*.*f", width, prec, v);
  return buf;
}

std::string pad(std::string_view s, std::size_t width) {
  std::string out(s);
  if (out.size() < width) out.insert(0, width - out.size(), ' ');
  return out;
}

}  // namespace

ReportDocument report_tables(const std::vector<McSummary>& summaries) {
  if (summaries.empty()) throw Error("report_tables needs at least one summary");
  ReportDocument doc;
  doc.json = nlohmann::json::array();

  // Group cells by N, keeping first-seen order of sizes.
  std::vector<int> sizes;
  for (const auto& s : summaries)
    for (const auto& c : s.cells)
      if (std::find(sizes.begin(), sizes.end(), c.N) == sizes.end()) sizes.push_back(c.N);

  std::ostringstream t;
  t << "Relative bias (%) and RMSE; '*' marks the smallest |RB| per parameter\n";
  for (int N : sizes) {
    t << "\n== N = " << N << " ==\n";
    for (const auto& s : summaries)
      for (const auto& c : s.cells) {
        if (c.N != N) continue;
        const Eigen::Index k = c.estimators.front().rb_pct.size();
        t << c.scenario << "\n" << pad("", 6);
        for (Eigen::Index i = 0; i < k; ++i)
          for (const auto& st : c.estimators)
            t << pad(std::string(estimator_name(st.estimator)) + "_b" + std::to_string(i + 1), 14);
        t << "\n" << pad("RB%", 6);
        for (Eigen::Index i = 0; i < k; ++i) {
          std::vector<double> col;
          for (const auto& st : c.estimators) col.push_back(st.rb_pct[i]);
          const std::size_t best = best_index(col);
          for (std::size_t e = 0; e < col.size(); ++e)
            t << pad(fixed(col[e]) + (e == best ? "*" : " "), 14);
        }
        t << "\n" << pad("RMSE", 6);
        for (Eigen::Index i = 0; i < k; ++i)
          for (const auto& st : c.estimators) t << pad(fixed(st.rmse[i]) + " ", 14);
        t << "\n";
      }
  }

  t << "\nIRBSN; '*' marks the smallest value per row\n";
  for (const auto& s : summaries)
    for (const auto& c : s.cells) {
      std::vector<double> row;
      for (const auto& st : c.estimators) row.push_back(st.irbsn);
      const std::size_t best = best_index(row);
      t << c.scenario << " N=" << c.N << ":";
      for (std::size_t e = 0; e < row.size(); ++e)
        t << "  " << estimator_name(c.estimators[e].estimator) << "=" << fixed(row[e], 0)
          << (e == best ? "*" : "");
      t << "\n";
    }
  doc.tables = t.str();

  doc.csv = "scenario,N,estimator,param,rb_pct,rmse,irbsn,failures\n";
  for (const auto& s : summaries) {
    const std::string part = summary_to_csv(s);
    doc.csv += part.substr(part.find('\n') + 1);
    doc.json.push_back(summary_to_json(s));
  }
  return doc;
}

std::string summary_to_csv(const McSummary& summary) {
  std::string out = "scenario,N,estimator,param,rb_pct,rmse,irbsn,failures\n";
  for (const auto& c : summary.cells)
    for (const auto& st : c.estimators)
      for (Eigen::Index i = 0; i < st.rb_pct.size(); ++i) {
        out += c.scenario + "," + std::to_string(c.N) + "," +
               std::string(estimator_name(st.estimator)) + ",beta" + std::to_string(i + 1) + "," +
               text::format_double(st.rb_pct[i]) + "," + text::format_double(st.rmse[i]) + "," +
               text::format_double(st.irbsn) + "," + std::to_string(st.failures) + "\n";
      }
  return out;
}

McSummary summary_from_csv(std::string_view csv) {
  const auto rows = text::lines(csv);
  if (rows.empty() || text::trim(rows[0]) != "scenario,N,estimator,param,rb_pct,rmse,irbsn,failures")
    throw ParseError("summary CSV: missing or unexpected header");

  McSummary out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (text::trim(rows[r]).empty()) continue;
    const auto f = text::split(rows[r], ',');
    const std::string where = "summary CSV row " + std::to_string(r + 1);
    if (f.size() != 8) throw ParseError(where + ": expected 8 fields");
    const auto N = text::parse_int(f[1]);
    const auto rb = text::parse_double(f[4]);
    const auto rmse = text::parse_double(f[5]);
    const auto irb = text::parse_double(f[6]);
    const auto fails = text::parse_int(f[7]);
    if (!N || !rb || !rmse || !irb || !fails) throw ParseError(where + ": non-numeric field");
    if (f[3].substr(0, 4) != "beta") throw ParseError(where + ": bad parameter name");
    const auto idx = text::parse_int(f[3].substr(4));
    if (!idx || *idx < 1) throw ParseError(where + ": bad parameter index");

    const std::string scen(f[0]);
    if (out.cells.empty() || out.cells.back().scenario != scen || out.cells.back().N != *N) {
      CellSummary c;
      c.scenario = scen;
      c.N = static_cast<int>(*N);
      out.cells.push_back(std::move(c));
    }
    auto& cell = out.cells.back();
    const Estimator est = parse_estimator(f[2]);
    if (cell.estimators.empty() || cell.estimators.back().estimator != est)
      cell.estimators.push_back({est, {}, {}, *irb, static_cast<int>(*fails)});
    auto& st = cell.estimators.back();
    const Eigen::Index i = static_cast<Eigen::Index>(*idx - 1);
    if (i != st.rb_pct.size()) throw ParseError(where + ": parameters out of order");
    st.rb_pct.conservativeResize(i + 1);
    st.rmse.conservativeResize(i + 1);
    st.rb_pct[i] = *rb;
    st.rmse[i] = *rmse;
  }
  return out;
}

namespace {

nlohmann::json to_json(const VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

VectorXd vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json summary_to_json(const McSummary& summary) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : summary.cells) {
    nlohmann::json ests = nlohmann::json::array();
    for (const auto& st : c.estimators)
      ests.push_back({{"estimator", estimator_name(st.estimator)},
                      {"rb_pct", to_json(st.rb_pct)},
                      {"rmse", to_json(st.rmse)},
                      {"irbsn", st.irbsn},
                      {"failures", st.failures}});
    cells.push_back({{"scenario", c.scenario},
                     {"N", c.N},
                     {"retained", c.retained},
                     {"design_redraws", c.design_redraws},
                     {"estimators", ests}});
  }
  return {{"cells", cells}};
}

McSummary summary_from_json(const nlohmann::json& j) {
  McSummary out;
  for (const auto& jc : j.at("cells")) {
    CellSummary c;
    c.scenario = jc.at("scenario").get<std::string>();
    c.N = jc.at("N").get<int>();
    c.retained = jc.value("retained", 0);
    c.design_redraws = jc.value("design_redraws", 0);
    for (const auto& je : jc.at("estimators"))
      c.estimators.push_back({parse_estimator(je.at("estimator").get<std::string>()),
                              vector_from_json(je.at("rb_pct")), vector_from_json(je.at("rmse")),
                              je.at("irbsn").get<double>(), je.at("failures").get<int>()});
    out.cells.push_back(std::move(c));
  }
  return out;
}

Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s;
  try {
    s.name = j.at("name").get<std::string>();
    s.beta_true = vector_from_json(j.at("beta"));
    s.link = LinkSpec::parse(j.value("link", std::string("log")));
    s.intercept = j.value("intercept", true);
    const auto& cov = j.at("covariates");
    const auto kind = cov.at("kind").get<std::string>();
    if (kind == "bernoulli") {
      s.covariates = CovariateGenerator::bernoulli(cov.value("p", 0.5));
    } else if (kind == "rayleigh") {
      s.covariates = CovariateGenerator::rayleigh(cov.value("mean", 1.0));
    } else if (kind == "explicit") {
      const auto rows = cov.at("matrix").get<std::vector<std::vector<double>>>();
      MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                 rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (static_cast<Eigen::Index>(rows[r].size()) != m.cols())
          throw ParseError("explicit covariate matrix is ragged at row " + std::to_string(r + 1));
        for (std::size_t c = 0; c < rows[r].size(); ++c)
          m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
      }
      s.covariates = CovariateGenerator::explicit_values(std::move(m));
    } else {
      throw ParseError("unknown covariate kind '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scenario file: ") + e.what());
  }
  s.validate();
  return s;
}

nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json cov;
  switch (s.covariates.kind) {
    case CovariateGenerator::Kind::bernoulli:
      cov = {{"kind", "bernoulli"}, {"p", s.covariates.parameter}};
      break;
    case CovariateGenerator::Kind::rayleigh:
      cov = {{"kind", "rayleigh"}, {"mean", s.covariates.parameter}};
      break;
    case CovariateGenerator::Kind::explicit_matrix: {
      nlohmann::json rows = nlohmann::json::array();
      for (Eigen::Index r = 0; r < s.covariates.matrix.rows(); ++r)
        rows.push_back(to_json(s.covariates.matrix.row(r).transpose()));
      cov = {{"kind", "explicit"}, {"matrix", rows}};
      break;
    }
  }
  return {{"name", s.name},
          {"beta", to_json(s.beta_true)},
          {"link", s.link.name()},
          {"intercept", s.intercept},
          {"covariates", cov}};
}

}  // namespace rayreg
