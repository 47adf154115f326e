#include "rayreg/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "rayreg/error.hpp"
#include "rayreg/metrics.hpp"
#include "rayreg/random.hpp"
#include "rayreg/text.hpp"

namespace rayreg {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << contents;
}

Dataset parse_dataset(std::string_view csv, bool intercept) {
  const auto all = text::lines(csv);
  std::size_t h = 0;
  while (h < all.size() && text::trim(all[h]).empty()) ++h;
  if (h == all.size()) throw ParseError("dataset: empty file");

  const auto header = text::split(all[h], ',');
  if (text::trim(header[0]) != "y")
    throw ParseError("dataset: first header column must be 'y', got '" +
                     std::string(text::trim(header[0])) + "'");
  const std::size_t width = header.size();
  std::vector<std::string> columns;
  if (intercept) columns.emplace_back("(intercept)");
  for (std::size_t c = 1; c < width; ++c) columns.emplace_back(text::trim(header[c]));

  std::vector<double> ys;
  std::vector<std::vector<double>> xs;
  std::string rejected;
  for (std::size_t i = h + 1; i < all.size(); ++i) {
    if (text::trim(all[i]).empty()) continue;
    const std::size_t row = i + 1;
    const auto fields = text::split(all[i], ',');
    if (fields.size() != width)
      throw ParseError("dataset row " + std::to_string(row) + ": expected " +
                       std::to_string(width) + " fields, found " + std::to_string(fields.size()));
    std::vector<double> vals(width);
    for (std::size_t c = 0; c < width; ++c) {
      const auto v = text::parse_double(fields[c]);
      if (!v)
        throw ParseError("dataset row " + std::to_string(row) + ", column " +
                         std::to_string(c + 1) + " ('" + std::string(text::trim(header[c])) +
                         "'): not a number: '" + std::string(text::trim(fields[c])) + "'");
      vals[c] = *v;
    }
    bool bad = false;
    for (std::size_t c = 0; c < width; ++c)
      if (!std::isfinite(vals[c])) {
        rejected += "\n  row " + std::to_string(row) + ": non-finite value in column '" +
                    std::string(text::trim(header[c])) + "'";
        bad = true;
      }
    if (!bad && !(vals[0] > 0.0)) {
      rejected += "\n  row " + std::to_string(row) + ": y = " + text::format_double(vals[0]) +
                  " is not positive";
      bad = true;
    }
    if (bad) continue;
    ys.push_back(vals[0]);
    xs.emplace_back(vals.begin() + 1, vals.end());
  }
  if (!rejected.empty()) throw ParseError("dataset: rejected rows:" + rejected);

  const auto N = static_cast<Eigen::Index>(ys.size());
  const auto p = static_cast<Eigen::Index>(width - 1);
  MatrixXd X(N, p);
  for (Eigen::Index n = 0; n < N; ++n)
    for (Eigen::Index j = 0; j < p; ++j)
      X(n, j) = xs[static_cast<std::size_t>(n)][static_cast<std::size_t>(j)];
  VectorXd y = Eigen::Map<const VectorXd>(ys.data(), N);
  return Dataset{DesignD(std::move(y), intercept ? with_intercept(X) : X), std::move(columns)};
}

Dataset load_dataset(const std::filesystem::path& path, bool intercept) {
  return parse_dataset(read_file(path), intercept);
}

std::string dataset_to_csv(const DesignD& design, const std::vector<std::string>& columns) {
  const auto& X = design.X();
  std::string out = "y";
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    out += "," + (static_cast<std::size_t>(j) < columns.size() ? columns[static_cast<std::size_t>(j)]
                                                                : "x" + std::to_string(j + 1));
  out += "\n";
  for (Eigen::Index n = 0; n < X.rows(); ++n) {
    out += text::format_double(design.y()[n]);
    for (Eigen::Index j = 0; j < X.cols(); ++j) out += "," + text::format_double(X(n, j));
    out += "\n";
  }
  return out;
}

ChannelMatrix::ChannelMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (rows_ == 0 || cols_ == 0) throw Error("channel matrix must be non-empty");
  if (rows_ * cols_ != values_.size())
    throw Error("channel matrix: " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                " does not match " + std::to_string(values_.size()) + " values");
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (!(values_[i] >= 0.0) || !std::isfinite(values_[i]))
      throw DomainError("channel matrix: pixel (" + std::to_string(i / cols_) + "," +
                        std::to_string(i % cols_) + ") is negative or non-finite");
}

ChannelMatrix parse_channel_text(std::string_view txt) {
  std::vector<double> values;
  std::size_t rows = 0, cols = 0;
  const auto ls = text::lines(txt);
  for (std::size_t i = 0; i < ls.size(); ++i) {
    const auto fields = text::split_grid_row(ls[i]);
    if (fields.empty()) continue;
    if (rows == 0) cols = fields.size();
    if (fields.size() != cols)
      throw ParseError("channel grid line " + std::to_string(i + 1) + ": expected " +
                       std::to_string(cols) + " values, found " + std::to_string(fields.size()));
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto v = text::parse_double(fields[c]);
      if (!v)
        throw ParseError("channel grid line " + std::to_string(i + 1) + ", column " +
                         std::to_string(c + 1) + ": not a number");
      values.push_back(*v);
    }
    ++rows;
  }
  if (rows == 0) throw ParseError("channel grid: no data");
  return ChannelMatrix(rows, cols, std::move(values));
}

ChannelMatrix parse_pgm(std::string_view bytes) {
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string_view {
    while (pos < bytes.size()) {
      const char c = bytes[pos];
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t b = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(b, pos - b);
  };
  auto header_int = [&](const char* what) {
    const auto v = text::parse_int(next_token());
    if (!v || *v <= 0) throw ParseError(std::string("PGM: bad ") + what);
    return static_cast<std::size_t>(*v);
  };

  const auto magic = next_token();
  if (magic != "P2" && magic != "P5") throw ParseError("PGM: unsupported magic number");
  const std::size_t cols = header_int("width");
  const std::size_t rows = header_int("height");
  const std::size_t maxval = header_int("maxval");
  if (maxval > 65535) throw ParseError("PGM: maxval above 65535");

  std::vector<double> values(rows * cols);
  if (magic == "P2") {
    for (auto& v : values) {
      const auto t = text::parse_int(next_token());
      if (!t) throw ParseError("PGM: truncated or non-numeric pixel data");
      v = static_cast<double>(*t);
    }
  } else {
    ++pos;  // single whitespace after maxval
    const std::size_t bpp = maxval < 256 ? 1 : 2;
    if (bytes.size() < pos + values.size() * bpp) throw ParseError("PGM: truncated pixel data");
    for (std::size_t i = 0; i < values.size(); ++i) {
      const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos + i * bpp);
      values[i] = bpp == 1 ? p[0] : static_cast<double>((p[0] << 8) | p[1]);
    }
  }
  return ChannelMatrix(rows, cols, std::move(values));
}

ChannelMatrix load_channel(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  if (data.size() >= 2 && data[0] == 'P' && (data[1] == '2' || data[1] == '5'))
    return parse_pgm(data);
  return parse_channel_text(data);
}

std::string channel_to_text(const ChannelMatrix& ch) {
  std::string out;
  for (std::size_t r = 0; r < ch.rows(); ++r) {
    for (std::size_t c = 0; c < ch.cols(); ++c) {
      if (c) out += ' ';
      out += text::format_double(ch.at(r, c));
    }
    out += '\n';
  }
  return out;
}

VectorXd extract_window(const ChannelMatrix& ch, const WindowSpec& spec) {
  if (spec.size == 0) throw Error("window size must be positive");
  if (spec.top + spec.size > ch.rows() || spec.left + spec.size > ch.cols())
    throw Error("window at (" + std::to_string(spec.top) + "," + std::to_string(spec.left) +
                ") of size " + std::to_string(spec.size) + " does not fit a " +
                std::to_string(ch.rows()) + "x" + std::to_string(ch.cols()) + " channel");
  VectorXd out(static_cast<Eigen::Index>(spec.size * spec.size));
  Eigen::Index i = 0;
  for (std::size_t r = spec.top; r < spec.top + spec.size; ++r)
    for (std::size_t c = spec.left; c < spec.left + spec.size; ++c) {
      const double v = ch.at(r, c);
      if (!(v > 0.0))
        throw DomainError("window contains a zero pixel at (" + std::to_string(r) + "," +
                          std::to_string(c) + ")");
      out[i++] = v;
    }
  return out;
}

std::string_view method_name(Method m) {
  switch (m) {
    case Method::mle: return "mle";
    case Method::cox_snell: return "coxsnell";
    case Method::firth: return "firth";
    case Method::bootstrap: return "bootstrap";
  }
  return "?";
}

Method parse_method(std::string_view s) {
  if (s == "mle") return Method::mle;
  if (s == "coxsnell" || s == "cox_snell") return Method::cox_snell;
  if (s == "firth") return Method::firth;
  if (s == "bootstrap") return Method::bootstrap;
  throw Error("unknown method '" + std::string(s) + "' (expected mle|coxsnell|firth|bootstrap)");
}

FitReport fit_with_method(const DesignD& design, LinkSpec link, Method method,
                          const MethodOptions& opts, std::vector<std::string> columns) {
  FitReport r;
  r.method = method;
  r.link = link;
  r.columns = std::move(columns);
  r.mle = fit_mle(design, link);
  r.estimate = r.mle.beta_hat;
  r.converged = r.mle.converged;

  switch (method) {
    case Method::mle:
      break;
    case Method::cox_snell:
      if (r.converged) r.correction = correct_cox_snell(design, r.mle, link);
      break;
    case Method::firth: {
      FitOptions<double> fo;
      if (r.mle.converged) fo.init = r.mle.beta_hat;
      r.correction = fit_firth(design, link, fo);
      r.converged = r.correction->meta.converged;
      break;
    }
    case Method::bootstrap:
      if (r.converged) {
        RandomStream rng(opts.seed);
        r.correction = correct_bootstrap(design, r.mle, link, opts.boot_reps, rng);
      }
      break;
  }
  if (r.correction) r.estimate = r.correction->beta_corrected;
  r.fitted_rmse = fitted_rmse(design.y(), predict(design.X(), r.estimate, link));
  return r;
}

namespace {

std::string param_name(const std::vector<std::string>& cols, Eigen::Index i) {
  return static_cast<std::size_t>(i) < cols.size() ? cols[static_cast<std::size_t>(i)]
                                                    : "beta" + std::to_string(i + 1);
}

nlohmann::json to_json(const VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

std::string fit_report_csv(const FitReport& r) {
  std::string out = "method,param,estimate,std_err,mle_estimate,bias_estimate\n";
  for (Eigen::Index i = 0; i < r.estimate.size(); ++i) {
    out += std::string(method_name(r.method)) + "," + param_name(r.columns, i) + "," +
           text::format_double(r.estimate[i]) + "," + text::format_double(r.mle.std_err[i]) + "," +
           text::format_double(r.mle.beta_hat[i]) + "," +
           (r.correction ? text::format_double(r.correction->bias_estimate[i]) : std::string()) +
           "\n";
  }
  return out;
}

nlohmann::json fit_report_json(const FitReport& r) {
  nlohmann::json params = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.estimate.size(); ++i) params.push_back(param_name(r.columns, i));
  nlohmann::json j = {
      {"method", method_name(r.method)},
      {"link", r.link.name()},
      {"converged", r.converged},
      {"params", params},
      {"estimate", to_json(r.estimate)},
      {"fitted_rmse", r.fitted_rmse},
      {"mle",
       {{"beta", to_json(r.mle.beta_hat)},
        {"std_err", to_json(r.mle.std_err)},
        {"loglik", r.mle.loglik},
        {"iterations", r.mle.iterations},
        {"converged", r.mle.converged},
        {"final_score_norm", r.mle.final_score_norm}}},
  };
  if (r.correction) {
    const auto& m = r.correction->meta;
    j["correction"] = {{"method", correction_name(r.correction->method)},
                       {"bias_estimate", to_json(r.correction->bias_estimate)},
                       {"replicates", m.replicates},
                       {"failures", m.failures},
                       {"replacement_draws", m.replacement_draws},
                       {"iterations", m.iterations},
                       {"converged", m.converged},
                       {"final_score_norm", m.final_score_norm}};
  }
  return j;
}

const ModelFit& WindowFitReport::model(std::string_view name) const {
  for (const auto& m : models)
    if (m.model == name) return m;
  throw Error("window report has no model '" + std::string(name) + "'");
}

bool WindowFitReport::all_converged() const {
  for (const auto& m : models)
    if (!m.converged) return false;
  return true;
}

WindowFitReport fit_window_model(const ChannelMatrix& y_channel, const ChannelMatrix& x_channel,
                                 const WindowSpec& spec, Method method, const MethodOptions& opts) {
  if (y_channel.rows() != x_channel.rows() || y_channel.cols() != x_channel.cols())
    throw Error("y and x channels differ in shape");
  const VectorXd y = extract_window(y_channel, spec);
  const VectorXd x = extract_window(x_channel, spec);
  const DesignD design(y, with_intercept(MatrixXd(x)));
  const LinkSpec link = LinkSpec::log();

  WindowFitReport rep;
  rep.window = spec;
  rep.method = method;

  const FitReport firth = fit_with_method(design, link, Method::firth, opts);
  const FitReport mle = fit_with_method(design, link, Method::mle, opts);
  rep.models.push_back({"firth_rayleigh_regression", firth.converged, firth.estimate,
                        firth.fitted_rmse});
  rep.models.push_back({"mle_rayleigh_regression", mle.converged, mle.estimate, mle.fitted_rmse});

  const VectorXd ols = fit_gaussian(design);
  rep.models.push_back(
      {"gaussian_regression", true, ols, fitted_rmse(y, VectorXd(design.X() * ols))});

  const double mu = fit_rayleigh_const(y).value();
  rep.models.push_back({"rayleigh_distribution", true, VectorXd::Constant(1, std::log(mu)),
                        fitted_rmse(y, VectorXd::Constant(y.size(), mu))});

  if (method == Method::cox_snell || method == Method::bootstrap) {
    const FitReport extra = fit_with_method(design, link, method, opts);
    rep.models.push_back({std::string(method_name(method)) + "_rayleigh_regression",
                          extra.converged, extra.estimate, extra.fitted_rmse});
  }
  return rep;
}

std::string window_report_csv(const WindowFitReport& r) {
  std::string out = "model,converged,beta1,beta2,fitted_rmse\n";
  for (const auto& m : r.models) {
    out += m.model + "," + (m.converged ? "true" : "false") + ",";
    out += (m.beta.size() > 0 ? text::format_double(m.beta[0]) : "") + ",";
    out += (m.beta.size() > 1 ? text::format_double(m.beta[1]) : "") + ",";
    out += text::format_double(m.fitted_rmse) + "\n";
  }
  return out;
}

nlohmann::json window_report_json(const WindowFitReport& r) {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : r.models)
    models.push_back({{"model", m.model},
                      {"converged", m.converged},
                      {"beta", to_json(m.beta)},
                      {"fitted_rmse", m.fitted_rmse}});
  return {{"window", {{"top", r.window.top}, {"left", r.window.left}, {"size", r.window.size}}},
          {"method", method_name(r.method)},
          {"models", models}};
}

}  // namespace rayreg
