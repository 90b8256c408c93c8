#include "elfit/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>

namespace elfit {

std::string_view to_string(Command c) {
  switch (c) {
    case Command::Fit: return "fit";
    case Command::Scan: return "scan";
    case Command::Widths: return "widths";
    case Command::Universality: return "universality";
    case Command::Interpolate: return "interpolate";
    case Command::Clt: return "clt";
    case Command::Processes: return "processes";
    case Command::Baseline: return "baseline";
    case Command::Nuclear: return "nuclear";
  }
  return "?";
}

std::string_view to_string(OutputFormat f) { return f == OutputFormat::Csv ? "csv" : "json"; }

namespace {

const std::vector<std::pair<std::string, Command>> kCommands = {
    {"fit", Command::Fit},           {"scan", Command::Scan},
    {"widths", Command::Widths},     {"universality", Command::Universality},
    {"interpolate", Command::Interpolate}, {"clt", Command::Clt},
    {"processes", Command::Processes}, {"baseline", Command::Baseline},
    {"nuclear", Command::Nuclear}};

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "/" : "") + fmt(v[i]);
  return out;
}

class ConfigProblem : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] void out_of_range(const std::string& what) { throw ConfigProblem("out-of-range value: " + what); }

double parse_bound(const std::string& text) {
  if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) out_of_range("--box bound '" + text + "'");
  return v;
}

SpectralBox parse_box(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) out_of_range("--box expects lo:hi, got '" + text + "'");
  SpectralBox box = SpectralBox::interval(parse_bound(text.substr(0, colon)), parse_bound(text.substr(colon + 1)));
  if (!(box.lo <= box.hi)) out_of_range("--box needs lo <= hi, got '" + text + "'");
  return box;
}

struct Raw {
  std::string command;
  std::string ensemble = "ell";
  std::string coords = "original";
  std::string box = "0.2:3";
  std::optional<double> fro_floor;
  double r = 1.0;
  double smooth_delta = 0.5;
  double trunc_a = 10.0;
  std::string format = "csv";
  std::vector<std::string> solver;
  std::vector<double> kappas = {1, 2, 4, 8, 16, 64, 256, 1024};
  std::vector<double> betas = {0.1, 0.2, 0.4};
};

void build_app(CLI::App& app, RunConfig& c, Raw& raw) {
  app.description("Ellipsoid fitting experiments: ground states, phase scans, widths and diagnostics.");
  app.set_config("--config", "", "Flat key=value file; keys are flag names without dashes");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.option_defaults()->always_capture_default();

  std::vector<std::string> names;
  for (const auto& [name, cmd] : kCommands) names.push_back(name);
  app.add_option("command", raw.command, "Subcommand")->required()->check(CLI::IsMember(names));

  app.add_option("--d", c.d, "Dimension")->check(CLI::Range(1, 4096));
  auto* n_opt = app.add_option("--n", c.n, "Number of constraints")->check(CLI::Range(1, 100000000));
  auto* a_opt = app.add_option("--alpha", c.alpha, "n / d^2; exclusive with --n")->check(CLI::Range(0.0, 1.0));
  n_opt->excludes(a_opt);
  app.add_option("--ensemble", raw.ensemble, "goe | ell | rademacher_ell")
      ->check(CLI::IsMember({"goe", "ell", "rademacher_ell"}, CLI::ignore_case));
  app.add_option("--coords", raw.coords, "original (b = sqrt(d)) | centered (b = --target)")
      ->check(CLI::IsMember({"original", "centered"}));
  app.add_option("--target", c.target, "Target b for centered problems and GS experiments")
      ->check(CLI::Range(-1e6, 1e6));
  app.add_option("--loss", c.loss_name, "abs | square | power | smoothed | truncated")
      ->check(CLI::IsMember({"abs", "square", "power", "smoothed", "truncated"}));
  app.add_option("--r", raw.r, "Loss exponent")->check(CLI::Range(1.0, 2.0));
  app.add_option("--smooth-delta", raw.smooth_delta, "Width of the smoothed loss dead zone")
      ->check(CLI::Range(0.0, 1e6));
  app.add_option("--trunc-A", raw.trunc_a, "Truncation level of the truncated loss")->check(CLI::Range(1e-9, 1e12));
  app.add_option("--box", raw.box, "Spectral box lo:hi (inf allowed)");
  app.add_option("--fro-floor", raw.fro_floor, "Frobenius floor (nonconvex box)")->check(CLI::Range(0.0, 1e12));
  app.add_option("--seeds", c.seeds, "Seeds (trials per configuration)")->check(CLI::Range(1, 1000000));
  app.add_option("--seed", c.master_seed, "Master seed; trial i uses stream (seed, i)");
  app.add_option("--out", c.out_path, "Output file (stdout when empty)");
  app.add_option("--format", raw.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--threads", c.threads, "Worker threads (fallback: ELFIT_THREADS)")->check(CLI::Range(1, 1024));
  app.add_flag("--record-timing", c.record_timing, "Write wall-clock columns (breaks byte-identical reruns)");
  app.add_option("--solver", raw.solver, "Solver option key=value, repeatable");

  app.add_option("--alpha-min", c.alpha_min, "scan: first alpha")->check(CLI::Range(0.0, 0.5));
  app.add_option("--alpha-max", c.alpha_max, "scan: last alpha")->check(CLI::Range(0.0, 0.5));
  app.add_option("--alpha-steps", c.alpha_steps, "scan: grid points")->check(CLI::Range(1, 1000));
  app.add_option("--level", c.level, "scan: median-error level for the crossing estimate")
      ->check(CLI::Range(0.0, 1e6));
  app.add_option("--violation-c", c.violation_c, "Residual threshold for violation counts")
      ->check(CLI::Range(0.0, 1e6));
  app.add_option("--trials", c.trials, "Monte Carlo trials")->check(CLI::Range(2, 10000000));
  app.add_option("--kappa", raw.kappas, "widths: condition numbers")->check(CLI::Range(1.0, 1e12));
  app.add_option("--eps", c.eps, "widths: slack in the f(kappa) bound")->check(CLI::Range(1e-12, 1e6));
  app.add_option("--t-steps", c.t_steps, "interpolate: grid points on [0, pi/2]")->check(CLI::Range(2, 1000));
  app.add_option("--samples", c.samples, "clt: samples")->check(CLI::Range(100, 100000000));
  app.add_option("--eta", c.eta, "clt: exponent in the Tr|S|^3 budget")->check(CLI::Range(0.0, 1.5));
  app.add_option("--matrix", c.matrix, "clt: identity | goe | wishart")
      ->check(CLI::IsMember({"identity", "goe", "wishart"}));
  app.add_option("--beta", raw.betas, "processes: block fractions")->check(CLI::Range(1e-9, 1.0));
  app.add_option("--q", c.q, "processes: dual exponent in (1, 2)")->check(CLI::Range(1.0, 2.0));
}

void finish(RunConfig& c, Raw& raw) {
  for (const auto& [name, cmd] : kCommands)
    if (name == raw.command) c.command = cmd;
  c.ensemble = parse_ensemble(raw.ensemble);
  c.coords = raw.coords == "original" ? Coordinates::Original : Coordinates::Centered;
  c.format = raw.format == "csv" ? OutputFormat::Csv : OutputFormat::Json;
  c.box = parse_box(raw.box);
  c.box.fro_floor = raw.fro_floor;
  if (c.loss_name == "abs") c.loss = LossSpec::power(1.0);
  else if (c.loss_name == "square") c.loss = LossSpec::power(2.0);
  else if (c.loss_name == "power") c.loss = LossSpec::power(raw.r);
  else if (c.loss_name == "smoothed") c.loss = LossSpec::smoothed(raw.r, raw.smooth_delta);
  else c.loss = LossSpec::truncated(raw.r, raw.trunc_a);
  c.kappas = raw.kappas;
  c.betas = raw.betas;

  std::map<std::string, std::string> kv;
  for (const auto& item : raw.solver) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigProblem("invalid solver option: expected key=value, got '" + item + "'");
    kv[item.substr(0, eq)] = item.substr(eq + 1);
    c.solver_overrides.emplace_back(item.substr(0, eq), item.substr(eq + 1));
  }
  try {
    c.solver = SolverOptions::from_kv(kv);
  } catch (const std::invalid_argument& e) {
    throw ConfigProblem(std::string("invalid solver option: ") + e.what());
  }

  if (c.alpha && !(*c.alpha > 0.0)) out_of_range("--alpha must be > 0");
  if (c.alpha_min <= 0.0 || c.alpha_min > c.alpha_max) out_of_range("--alpha-min must lie in (0, --alpha-max]");
  if (c.q <= 1.0 || c.q >= 2.0) out_of_range("--q must lie in (1, 2)");

  const bool needs_n = c.command == Command::Fit || c.command == Command::Universality ||
                       c.command == Command::Interpolate || c.command == Command::Processes ||
                       c.command == Command::Baseline || c.command == Command::Nuclear;
  if (needs_n && !c.n && !c.alpha)
    throw ConfigProblem("missing required field: " + std::string(to_string(c.command)) + " needs --n or --alpha");
  if (c.command == Command::Scan && (c.n || c.alpha))
    throw ConfigProblem("conflicting flags: scan takes --alpha-min/--alpha-max/--alpha-steps, not --n/--alpha");
  if (c.command == Command::Universality && c.seeds < 10) out_of_range("universality needs --seeds >= 10");
  if (c.command == Command::Fit || c.command == Command::Scan || c.command == Command::Nuclear) {
    if (c.ensemble == Ensemble::Goe && c.coords == Coordinates::Original)
      throw ConfigProblem("conflicting flags: original coordinates need a point ensemble (ell, rademacher_ell)");
  }
  if (c.command == Command::Widths && c.d < 2) out_of_range("widths needs --d >= 2");
  if (c.command == Command::Scan && c.d < 2) out_of_range("scan needs --d >= 2");
  if (needs_n) {
    const long long n = c.n ? *c.n : std::llround(*c.alpha * double(c.d) * double(c.d));
    if (n < 1) out_of_range("round(alpha d^2) must be >= 1");
    if (n > 100000000) out_of_range("n too large");
  }
}

}  // namespace

int RunConfig::resolved_n() const {
  if (n) return *n;
  if (alpha) return int(std::llround(*alpha * double(d) * double(d)));
  throw std::invalid_argument("RunConfig: neither n nor alpha set");
}

std::vector<double> RunConfig::alpha_grid() const {
  std::vector<double> grid;
  if (alpha_steps == 1) return {alpha_min};
  for (int k = 0; k < alpha_steps; ++k)
    grid.push_back(alpha_min + (alpha_max - alpha_min) * double(k) / double(alpha_steps - 1));
  return grid;
}

std::vector<std::pair<std::string, std::string>> RunConfig::echo() const {
  std::vector<std::pair<std::string, std::string>> e = {
      {"command", std::string(to_string(command))},
      {"d", std::to_string(d)},
      {"n", n ? std::to_string(*n) : ""},
      {"alpha", alpha ? fmt(*alpha) : ""},
      {"ensemble", std::string(elfit::to_string(ensemble))},
      {"coords", coords == Coordinates::Original ? "original" : "centered"},
      {"target", fmt(target)},
      {"loss", loss_name},
      {"r", fmt(loss.r)},
      {"smooth_delta", fmt(loss.smooth_delta)},
      {"trunc_A", fmt(loss.trunc_A)},
      {"box", fmt(box.lo) + ":" + fmt(box.hi)},
      {"fro_floor", box.fro_floor ? fmt(*box.fro_floor) : ""},
      {"seeds", std::to_string(seeds)},
      {"seed", std::to_string(master_seed)},
      {"alpha_min", fmt(alpha_min)},
      {"alpha_max", fmt(alpha_max)},
      {"alpha_steps", std::to_string(alpha_steps)},
      {"level", fmt(level)},
      {"violation_c", fmt(violation_c)},
      {"trials", std::to_string(trials)},
      {"kappa", join(kappas)},
      {"eps", fmt(eps)},
      {"t_steps", std::to_string(t_steps)},
      {"samples", std::to_string(samples)},
      {"eta", fmt(eta)},
      {"matrix", matrix},
      {"beta", join(betas)},
      {"q", fmt(q)},
  };
  for (const auto& [k, v] : solver.to_kv()) e.emplace_back("solver." + k, v);
  return e;
}

ParseOutcome parse_config(const std::vector<std::string>& args) {
  CLI::App app{"", "elfit"};
  RunConfig c;
  Raw raw;
  build_app(app, c, raw);
  ParseOutcome out;
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    if (app.count("--threads") == 0) {
      if (const char* env = std::getenv("ELFIT_THREADS"); env && *env) {
        int t = 0;
        const std::string text(env);
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), t);
        if (ec != std::errc() || ptr != text.data() + text.size() || t < 1 || t > 1024)
          throw ConfigProblem("out-of-range value: ELFIT_THREADS must be an integer in [1, 1024]");
        c.threads = t;
      }
    }
    finish(c, raw);
  } catch (const CLI::CallForHelp&) {
    out.exit_code = 0;
    out.message = app.help();
    return out;
  } catch (const CLI::ExtrasError& e) {
    out.exit_code = 2;
    out.message = std::string("unknown flag: ") + e.what();
    return out;
  } catch (const CLI::ConfigError& e) {
    out.exit_code = 2;
    out.message = std::string("unknown config key: ") + e.what();
    return out;
  } catch (const CLI::FileError& e) {
    out.exit_code = 2;
    out.message = std::string("cannot read config file: ") + e.what();
    return out;
  } catch (const CLI::ExcludesError& e) {
    out.exit_code = 2;
    out.message = std::string("conflicting flags: ") + e.what();
    return out;
  } catch (const CLI::RequiredError& e) {
    out.exit_code = 2;
    out.message = std::string("missing required field: ") + e.what();
    return out;
  } catch (const CLI::ValidationError& e) {
    out.exit_code = 2;
    out.message = std::string("out-of-range value: ") + e.what();
    return out;
  } catch (const CLI::ConversionError& e) {
    out.exit_code = 2;
    out.message = std::string("invalid value: ") + e.what();
    return out;
  } catch (const CLI::ParseError& e) {
    out.exit_code = 2;
    out.message = std::string("invalid arguments: ") + e.what();
    return out;
  } catch (const ConfigProblem& e) {
    out.exit_code = 2;
    out.message = e.what();
    return out;
  }
  out.config = std::move(c);
  return out;
}

std::string help_text() {
  CLI::App app{"", "elfit"};
  RunConfig c;
  Raw raw;
  build_app(app, c, raw);
  return app.help();
}

}  // namespace elfit
