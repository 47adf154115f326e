#pragma once

// Data ingestion and result emission: CSV datasets, amplitude channel grids
// (text or PGM), window extraction and the window-based model comparison.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rayreg/design.hpp"
#include "rayreg/estimators.hpp"
#include "rayreg/link.hpp"

namespace rayreg {

struct Dataset {
  DesignD design;
  std::vector<std::string> columns;  ///< covariate column names, "(intercept)" first if added
};

/// Parses CSV text with a header whose first column is `y`. Rejects non-positive
/// or non-finite responses, short rows and non-numeric cells with row/column
/// diagnostics (rows are numbered as file lines, header = 1).
Dataset parse_dataset(std::string_view csv, bool intercept);
Dataset load_dataset(const std::filesystem::path& path, bool intercept);

/// Header y,<names...>; numbers in shortest round-trip form.
std::string dataset_to_csv(const DesignD& design, const std::vector<std::string>& columns = {});

/// Row-major grid of non-negative amplitude values.
class ChannelMatrix {
 public:
  ChannelMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  const std::vector<double>& values() const noexcept { return values_; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> values_;
};

/// Headerless grid: one row per line, fields separated by whitespace and/or commas.
ChannelMatrix parse_channel_text(std::string_view text);
/// Binary (P5) or ASCII (P2) portable graymap.
ChannelMatrix parse_pgm(std::string_view bytes);
/// Dispatches on the PGM magic number, otherwise reads a text grid.
ChannelMatrix load_channel(const std::filesystem::path& path);
std::string channel_to_text(const ChannelMatrix& channel);

/// Square window, 0-based, row-major.
struct WindowSpec {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t size = 3;
};

/// Row-major flattening of the window (length size^2). Throws if the window
/// does not fit or contains a zero pixel.
VectorXd extract_window(const ChannelMatrix& channel, const WindowSpec& spec);

enum class Method { mle, cox_snell, firth, bootstrap };
std::string_view method_name(Method m);
Method parse_method(std::string_view s);

struct MethodOptions {
  int boot_reps = 1000;
  std::uint64_t seed = 1;
};

/// Estimate of the requested method, alongside the MLE it was derived from.
struct FitReport {
  Method method = Method::mle;
  LinkSpec link;
  std::vector<std::string> columns;
  FitResult<double> mle;
  std::optional<CorrectionResult<double>> correction;
  VectorXd estimate;
  double fitted_rmse = 0.0;
  bool converged = false;
};

FitReport fit_with_method(const DesignD& design, LinkSpec link, Method method,
                          const MethodOptions& opts, std::vector<std::string> columns = {});

/// CSV columns: method,param,estimate,std_err,mle_estimate,bias_estimate.
std::string fit_report_csv(const FitReport& r);
nlohmann::json fit_report_json(const FitReport& r);

struct ModelFit {
  std::string model;
  bool converged = true;
  VectorXd beta;  ///< rayleigh_distribution: log of the constant mean
  double fitted_rmse = 0.0;
};

struct WindowFitReport {
  WindowSpec window;
  Method method = Method::firth;
  /// firth_rayleigh_regression, mle_rayleigh_regression, gaussian_regression,
  /// rayleigh_distribution, then the requested method if it is not one of the first two.
  std::vector<ModelFit> models;

  const ModelFit& model(std::string_view name) const;
  bool all_converged() const;
};

/// Fits y-window ~ intercept + x-window under the log link and the baselines.
WindowFitReport fit_window_model(const ChannelMatrix& y_channel, const ChannelMatrix& x_channel,
                                 const WindowSpec& spec, Method method,
                                 const MethodOptions& opts = {});

/// CSV columns: model,converged,beta1,beta2,fitted_rmse.
std::string window_report_csv(const WindowFitReport& r);
nlohmann::json window_report_json(const WindowFitReport& r);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace rayreg
