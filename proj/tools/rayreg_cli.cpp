// rayreg: command-line front end for Rayleigh regression fitting,
// bias-adjusted estimation and the Monte Carlo harness.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "rayreg/error.hpp"
#include "rayreg/io.hpp"
#include "rayreg/random.hpp"
#include "rayreg/rayleigh.hpp"
#include "rayreg/simulation.hpp"
#include "rayreg/text.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNotConverged = 2;

void emit(const std::string& out_path, const std::string& contents) {
  if (out_path.empty())
    std::cout << contents;
  else
    rayreg::write_file(out_path, contents);
}

std::string json_path_for(const std::string& csv_path) {
  std::filesystem::path p(csv_path);
  p.replace_extension(".json");
  if (p == std::filesystem::path(csv_path)) p += ".mirror.json";
  return p.string();
}

std::vector<int> parse_sizes(const std::string& s) {
  std::vector<int> out;
  for (auto f : rayreg::text::split(s, ',')) {
    const auto v = rayreg::text::parse_int(f);
    if (!v || *v < 1) throw rayreg::Error("bad size '" + std::string(f) + "' in --sizes");
    out.push_back(static_cast<int>(*v));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rayleigh regression with small-sample bias adjustment"};
  app.require_subcommand(1);

  // fit
  auto* fit = app.add_subcommand("fit", "Fit a Rayleigh regression to a CSV dataset");
  std::string data_path, link_name = "log", method = "mle", out_path, format = "csv";
  int boot_reps = 1000;
  std::uint64_t seed = 1;
  bool intercept = true;
  fit->add_option("--data", data_path, "CSV file with header; first column y")->required();
  fit->add_option("--link", link_name, "log|identity")
      ->check(CLI::IsMember({"log", "identity"}));
  fit->add_option("--method", method, "mle|coxsnell|firth|bootstrap")
      ->check(CLI::IsMember({"mle", "coxsnell", "firth", "bootstrap"}));
  fit->add_option("--boot-reps", boot_reps, "Bootstrap replicates")->check(CLI::PositiveNumber);
  fit->add_option("--seed", seed, "Random seed");
  fit->add_flag("--intercept,!--no-intercept", intercept, "Prepend a column of ones (default on)");
  fit->add_option("--out", out_path, "Output file (default stdout)");
  fit->add_option("--format", format, "csv|json")->check(CLI::IsMember({"csv", "json"}));

  // simulate
  auto* sim = app.add_subcommand("simulate", "Monte Carlo evaluation of the four estimators");
  std::string scenario_arg, sizes_arg = "9,25,49", estimators_arg, sim_out;
  int n_mc = 5000, sim_boot = 1000, workers = 1;
  std::uint64_t sim_seed = rayreg::McConfig{}.seed;
  bool quiet = false;
  sim->add_option("--scenario", scenario_arg, "1, 2, or a JSON scenario file")->required();
  sim->add_option("--sizes", sizes_arg, "Comma-separated sample sizes");
  sim->add_option("--mc", n_mc, "Monte Carlo replications")->check(CLI::PositiveNumber);
  sim->add_option("--boot-reps", sim_boot, "Bootstrap replicates")->check(CLI::PositiveNumber);
  sim->add_option("--seed", sim_seed, "Random seed");
  sim->add_option("--out", sim_out, "CSV output; the JSON mirror goes next to it");
  sim->add_option("--workers", workers, "Worker threads (output does not depend on it)")
      ->check(CLI::PositiveNumber);
  sim->add_option("--estimators", estimators_arg,
                  "Comma-separated subset of mle,cox_snell,firth,bootstrap");
  sim->add_flag("--quiet", quiet, "Do not print the tables to stderr");

  // window-fit
  auto* win = app.add_subcommand("window-fit", "Fit a window of one channel on another");
  std::string y_channel, x_channel, win_method = "firth", win_out, win_format = "csv";
  std::size_t top = 0, left = 0, size = 3;
  int win_boot = 1000;
  std::uint64_t win_seed = 1;
  win->add_option("--y-channel", y_channel, "Response channel (text grid or PGM)")->required();
  win->add_option("--x-channel", x_channel, "Covariate channel (text grid or PGM)")->required();
  win->add_option("--top", top, "0-based window row")->required();
  win->add_option("--left", left, "0-based window column")->required();
  win->add_option("--size", size, "Window side length")->required()->check(CLI::PositiveNumber);
  win->add_option("--method", win_method, "mle|coxsnell|firth|bootstrap")
      ->check(CLI::IsMember({"mle", "coxsnell", "firth", "bootstrap"}));
  win->add_option("--boot-reps", win_boot, "Bootstrap replicates")->check(CLI::PositiveNumber);
  win->add_option("--seed", win_seed, "Random seed");
  win->add_option("--out", win_out, "Output file (default stdout)");
  win->add_option("--format", win_format, "csv|json")->check(CLI::IsMember({"csv", "json"}));

  // sample
  auto* smp = app.add_subcommand("sample", "Emit Rayleigh draws with the given mean");
  double mu = 1.0;
  long long count = 0;
  std::uint64_t smp_seed = 1;
  smp->add_option("--mu", mu, "Mean")->required();
  smp->add_option("--n", count, "Number of draws")->required()->check(CLI::NonNegativeNumber);
  smp->add_option("--seed", smp_seed, "Random seed")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);  // prints help or the parse error
    return rc == 0 ? kExitOk : kExitError;
  }

  try {
    if (*fit) {
      const auto data = rayreg::load_dataset(data_path, intercept);
      const auto report = rayreg::fit_with_method(
          data.design, rayreg::LinkSpec::parse(link_name), rayreg::parse_method(method),
          {boot_reps, seed}, data.columns);
      emit(out_path, format == "json" ? rayreg::fit_report_json(report).dump(2) + "\n"
                                      : rayreg::fit_report_csv(report));
      if (!report.converged) {
        std::cerr << "rayreg: fit did not converge\n";
        return kExitNotConverged;
      }
      return kExitOk;
    }

    if (*sim) {
      rayreg::Scenario scenario;
      const auto presets = rayreg::preset_scenarios();
      if (scenario_arg == "1")
        scenario = presets[0];
      else if (scenario_arg == "2")
        scenario = presets[1];
      else
        scenario = rayreg::scenario_from_json(nlohmann::json::parse(rayreg::read_file(scenario_arg)));

      rayreg::McConfig cfg;
      cfg.n_mc = n_mc;
      cfg.n_boot = sim_boot;
      cfg.sizes = parse_sizes(sizes_arg);
      cfg.seed = sim_seed;
      cfg.workers = workers;
      if (!estimators_arg.empty()) {
        cfg.estimators.clear();
        for (auto e : rayreg::text::split(estimators_arg, ','))
          cfg.estimators.push_back(rayreg::parse_estimator(rayreg::text::trim(e)));
      }
      const auto summary = rayreg::run_scenario(scenario, cfg);
      const auto doc = rayreg::report_tables({summary});
      if (!quiet) std::cerr << doc.tables;
      emit(sim_out, doc.csv);
      if (!sim_out.empty()) rayreg::write_file(json_path_for(sim_out), doc.json.dump(2) + "\n");
      return kExitOk;
    }

    if (*win) {
      const auto ych = rayreg::load_channel(y_channel);
      const auto xch = rayreg::load_channel(x_channel);
      const auto report = rayreg::fit_window_model(ych, xch, {top, left, size},
                                                   rayreg::parse_method(win_method),
                                                   {win_boot, win_seed});
      emit(win_out, win_format == "json" ? rayreg::window_report_json(report).dump(2) + "\n"
                                         : rayreg::window_report_csv(report));
      if (!report.all_converged()) {
        std::cerr << "rayreg: at least one window fit did not converge\n";
        return kExitNotConverged;
      }
      return kExitOk;
    }

    if (*smp) {
      rayreg::RandomStream rng(smp_seed);
      std::string out;
      for (long long i = 0; i < count; ++i)
        out += rayreg::text::format_double(rayreg::rayleigh_sample(mu, rng)) + "\n";
      std::cout << out;
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "rayreg: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
