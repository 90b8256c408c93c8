#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "elfit/ensembles.hpp"
#include "elfit/fitting.hpp"
#include "elfit/solvers.hpp"

namespace elfit {

inline constexpr const char* kLibraryVersion = "0.1.0";

enum class Command { Fit, Scan, Widths, Universality, Interpolate, Clt, Processes, Baseline, Nuclear };
enum class OutputFormat { Csv, Json };
/// Original: X = x x^T / sqrt(d), b = sqrt(d). Centered: X = (x x^T - Id) / sqrt(d), b = --target.
enum class Coordinates { Original, Centered };

std::string_view to_string(Command c);
std::string_view to_string(OutputFormat f);

struct RunConfig {
  Command command = Command::Fit;
  int d = 30;
  std::optional<int> n;
  std::optional<double> alpha;
  Ensemble ensemble = Ensemble::Ell;
  Coordinates coords = Coordinates::Original;
  double target = 1.0;  // b for centered coordinates and the GS experiments
  std::string loss_name = "abs";
  LossSpec loss = LossSpec::power(1.0);
  SpectralBox box = SpectralBox::interval(0.2, 3.0);
  int seeds = 10;
  std::uint64_t master_seed = 0;
  std::string out_path;
  OutputFormat format = OutputFormat::Csv;
  int threads = 1;
  bool record_timing = false;
  SolverOptions solver;
  std::vector<std::pair<std::string, std::string>> solver_overrides;

  // scan
  double alpha_min = 0.05;
  double alpha_max = 0.45;
  int alpha_steps = 9;
  double level = 0.05;
  double violation_c = 0.1;
  // widths, baseline
  int trials = 200;
  std::vector<double> kappas;
  double eps = 0.05;
  // interpolate
  int t_steps = 5;
  // clt
  int samples = 2000;
  double eta = 0.1;
  std::string matrix = "identity";
  // processes
  std::vector<double> betas;
  double q = 1.5;

  /// round(alpha d^2) or n; throws std::invalid_argument when neither is set.
  int resolved_n() const;
  std::vector<double> alpha_grid() const;
  /// Flattened key=value echo of every field, in a fixed order.
  std::vector<std::pair<std::string, std::string>> echo() const;
};

struct ParseOutcome {
  std::optional<RunConfig> config;  // set when the run should proceed
  int exit_code = 0;                // 0 for --help, 2 for configuration errors
  std::string message;              // help text or error message
};

/// argv without the program name. CLI flags override values from --config
/// (flat key=value file, keys are flag names without the leading dashes).
ParseOutcome parse_config(const std::vector<std::string>& args);

/// Full --help text.
std::string help_text();

}  // namespace elfit
