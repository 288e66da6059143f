#include "delaylab/commands.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "delaylab/delay_lift.hpp"
#include "delaylab/scenario.hpp"
#include "delaylab/spectral.hpp"
#include "delaylab/wp_system.hpp"
#include "json.hpp"

namespace delaylab {

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace {

/// A scalar ("0.5") or a nested JSON array ("[[0,1],[-1,0]]").
Matrix parse_matrix(const std::string& text, const std::string& what) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(what + " is neither a number nor a JSON matrix: " + text);
  }
  if (j.is_number()) return Matrix{{j.get<double>()}};
  if (!j.is_array() || j.empty() || !j[0].is_array()) {
    throw ConfigError(what + " must be a number or an array of rows");
  }
  const std::size_t rows = j.size(), cols = j[0].size();
  std::vector<double> data;
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != cols) throw ConfigError(what + " has ragged rows");
    for (const auto& x : row) {
      if (!x.is_number()) throw ConfigError(what + " has a non-numeric entry");
      data.push_back(x.get<double>());
    }
  }
  try {
    return Matrix(rows, cols, std::move(data));
  } catch (const Error& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

Hold parse_hold(const std::string& s) {
  if (s == "zoh") return Hold::zero_order;
  if (s == "foh") return Hold::first_order;
  if (s == "qoh") return Hold::second_order;
  throw ConfigError("--hold must be zoh, foh or qoh");
}

StateSpaceSystem random_system(std::uint64_t seed, std::size_t n, std::size_t io) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    0xa5u};
  std::mt19937_64 gen(seq);
  std::uniform_real_distribution<double> entry(-1.0, 1.0);
  auto fill = [&](std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (double& x : m.data()) x = entry(gen);
    return m;
  };
  Matrix a = fill(n, n), b = fill(n, io), c = fill(io, n), d = fill(io, io);
  return StateSpaceSystem(std::move(a), std::move(b), std::move(c), std::move(d));
}

struct VerifyArgs {
  std::size_t trials = 20;
  std::size_t dim = 5;
  std::size_t io_dim = 3;
  double horizon = 2.0;
  double dt = 1e-3;
  std::uint64_t seed = 42;
  double tol = 1e-6;
  std::string hold = "qoh";
};

int cmd_verify_identities(const VerifyArgs& a, std::ostream& out) {
  if (a.trials == 0) throw PreconditionError("--trials must be at least 1");
  if (a.dim == 0 || a.io_dim == 0) throw PreconditionError("--dim and --io-dim must be at least 1");
  if (!(a.dt > 0.0) || !(a.horizon > 0.0)) {
    throw PreconditionError("--dt and --horizon must be positive");
  }
  if (a.horizon / a.dt < 100.0 - 1e-9) {
    throw PreconditionError("--horizon must span at least 100 steps of --dt");
  }
  if (!(a.tol > 0.0)) throw PreconditionError("--tol must be positive");
  grid_index(a.horizon, a.dt);

  PerturbationSuiteOptions o;
  o.max_state_dim = a.dim;
  o.max_io_dim = a.io_dim;
  o.trials = a.trials;
  o.seed = a.seed;
  o.dt = a.dt;
  o.horizon = a.horizon;
  o.hold = parse_hold(a.hold);
  const auto reports = verify_perturbation_identities(o);

  AxiomOptions ax;
  ax.dt = a.dt;
  ax.t = a.horizon / 2.0;
  ax.tau = a.horizon / 2.0;
  if (grid_index(a.horizon, a.dt) % 2 != 0) {
    ax.t = a.dt * static_cast<double>(grid_index(a.horizon, a.dt) / 2);
    ax.tau = a.horizon - ax.t;
  }
  ax.trials = a.trials;
  ax.seed = a.seed;
  const auto axioms = verify_system_axioms(random_system(a.seed, a.dim, a.io_dim), ax);

  bool pass = true;
  auto summarize = [&](const char* kind, const std::vector<IdentityResidualReport>& rs) {
    std::vector<std::string> order;
    std::map<std::string, std::pair<double, double>> worst;
    for (const auto& r : rs) {
      if (!worst.count(r.identity)) order.push_back(r.identity);
      auto& w = worst[r.identity];
      w.first = std::max(w.first, r.relative_residual);
      w.second = std::max(w.second, r.sup_residual);
    }
    for (const auto& name : order) {
      const auto [rel, sup] = worst[name];
      const bool ok = rel <= a.tol;
      pass = pass && ok;
      out << kind << ' ' << name << " max_relative_residual=" << format_double(rel)
          << " max_sup_residual=" << format_double(sup) << (ok ? " ok" : " FAIL") << '\n';
    }
  };
  summarize("identity", reports);
  summarize("axiom", axioms);
  out << "result " << (pass ? "PASS" : "FAIL") << " tol=" << format_double(a.tol)
      << " trials=" << a.trials << '\n';
  return pass ? kExitOk : kExitFailure;
}

struct SpectrumArgs {
  std::string a0 = "0";
  std::string a1 = "0";
  double delay = 1.0;
  std::size_t history_points = 200;
  std::vector<double> bracket{-5.0, 5.0};
  double lifted_dt = 1.0;
};

int cmd_delay_spectrum(const SpectrumArgs& a, std::ostream& out) {
  if (a.bracket.size() != 2) throw ConfigError("--bracket needs two values lo,hi");
  if (a.history_points < 2) throw PreconditionError("--history-points must be at least 2");
  const DelayDescriptor d(parse_matrix(a.a0, "--a0"), parse_matrix(a.a1, "--a1"), a.delay);
  const CharFunction cf(d);
  const auto root = rightmost_real_root(cf, a.bracket[0], a.bracket[1]);
  if (root) {
    out << "characteristic_root " << format_double(*root) << '\n';
  } else {
    out << "characteristic_root none (no real root in bracket [" << format_double(a.bracket[0])
        << ", " << format_double(a.bracket[1]) << "])\n";
  }
  std::optional<double> growth;
  try {
    growth = lifted_growth(build_lift(d, a.history_points), a.lifted_dt);
    out << "lifted_growth " << format_double(*growth) << '\n';
  } catch (const ConvergenceError& e) {
    out << "lifted_growth unavailable (no real dominant eigenvalue; oscillation "
        << format_double(e.oscillation()) << ")\n";
  }
  const double tol = 2.0 / static_cast<double>(a.history_points);
  if (root && growth) {
    const double gap = std::abs(*growth - *root);
    const bool ok = gap <= tol;
    out << "gap " << format_double(gap) << " tolerance " << format_double(tol)
        << (ok ? " ok" : " FAIL") << '\n';
    return ok ? kExitOk : kExitFailure;
  }
  out << "gap n/a\n";
  return kExitOk;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << text;
  if (!f) throw ConfigError("failed writing " + path.string());
}

int cmd_simulate(const std::string& config, const std::string& out_path, std::ostream& out) {
  const Scenario s = load_scenario(config);
  const HarvestInput* q = s.harvest ? &*s.harvest : nullptr;
  const Trajectory tr = simulate(s.model, s.history, s.t_max, q, {s.snapshot_stride});

  std::string csv = "t,total_population,birth_rate\n";
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    csv += format_double(tr.times[i]) + ',' + format_double(tr.total[i]) + ',' +
           format_double(tr.birth[i]) + '\n';
  }
  write_file(out_path, csv);

  const std::filesystem::path base(out_path);
  for (std::size_t i = 0; i < tr.snapshots.size(); ++i) {
    std::ostringstream name;
    name << base.stem().string() << "_snapshot_" << std::setw(5) << std::setfill('0') << i
         << ".csv";
    std::string prof = "a,w\n";
    const Vector& w = tr.snapshots[i].second;
    for (std::size_t j = 0; j < w.size(); ++j) {
      prof += format_double(s.model.age(j)) + ',' + format_double(w[j]) + '\n';
    }
    write_file(base.parent_path() / name.str(), prof);
  }

  std::string growth = "n/a";
  try {
    growth = format_double(growth_rate_fit(tr, s.discard_fraction));
  } catch (const FitError&) {
  }
  out << "final_total_population=" << format_double(tr.total.back())
      << " measured_growth=" << growth << " steps=" << tr.times.size() - 1 << " min_profile=" << format_double(tr.min_value)
      << " snapshots=" << tr.snapshots.size() << '\n';
  return kExitOk;
}

int cmd_report(const std::string& config, const std::string& out_path, bool simulate_too,
               std::ostream& out) {
  const Scenario s = load_scenario(config);
  SpectralReport r;
  if (simulate_too) {
    r = cross_check(s.model, s.history, s.t_max, s.discard_fraction);
  } else {
    r = classify_stability(CharacteristicEvaluator(s.model));
  }
  const std::string text = to_json(r) + '\n';
  if (out_path.empty()) {
    out << text;
  } else {
    write_file(out_path, text);
    out << "wrote " << out_path << '\n';
  }
  if (simulate_too && !trichotomy_consistent(r)) {
    out << "trichotomy disagreement: class " << to_string(r.stability_class)
        << " but measured growth " << format_double(*r.measured_growth) << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Numerical laboratory for delayed linear systems and age-structured populations",
               "delaylab"};
  app.require_subcommand(1);
  int jobs = 0;
  app.add_option("--jobs", jobs, "OpenMP threads (0: runtime default)")
      ->check(CLI::NonNegativeNumber);

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify-identities",
                                    "Perturbation identities and system axioms on random systems");
  verify->add_option("--trials", va.trials, "random systems")->capture_default_str();
  verify->add_option("--dim", va.dim, "maximum state dimension")->capture_default_str();
  verify->add_option("--io-dim", va.io_dim, "maximum input/output dimension")->capture_default_str();
  verify->add_option("--horizon", va.horizon)->capture_default_str();
  verify->add_option("--dt", va.dt)->capture_default_str();
  verify->add_option("--seed", va.seed)->capture_default_str();
  verify->add_option("--tol", va.tol, "relative residual tolerance")->capture_default_str();
  verify->add_option("--hold", va.hold, "signal hold: zoh, foh or qoh")->capture_default_str();

  SpectrumArgs sa;
  auto* spectrum = app.add_subcommand("delay-spectrum",
                                      "Characteristic root vs. lifted generator growth");
  spectrum->add_option("--a0", sa.a0, "undelayed matrix (number or JSON rows)")->capture_default_str();
  spectrum->add_option("--a1", sa.a1, "delayed matrix (number or JSON rows)")->capture_default_str();
  spectrum->add_option("--delay", sa.delay)->capture_default_str();
  spectrum->add_option("--history-points", sa.history_points)->capture_default_str();
  spectrum->add_option("--bracket", sa.bracket, "root search interval lo,hi")
      ->delimiter(',')
      ->expected(2)
      ->allow_extra_args(false);
  spectrum->add_option("--lifted-dt", sa.lifted_dt, "propagator step for the growth estimate")
      ->capture_default_str();

  std::string config, out_path;
  auto* sim = app.add_subcommand("simulate", "Run a scenario and write the trajectory CSV");
  sim->add_option("--config", config)->required();
  sim->add_option("--out", out_path)->required();
  std::string a_config, a_out;
  auto* analyze = app.add_subcommand("analyze", "Spectral report of a scenario");
  analyze->add_option("--config", a_config)->required();
  analyze->add_option("--out", a_out);
  std::string c_config, c_out;
  auto* cross = app.add_subcommand("cross-check", "Spectral report plus simulated growth");
  cross->add_option("--config", c_config)->required();
  cross->add_option("--out", c_out);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (jobs > 0) omp_set_num_threads(jobs);
    if (*verify) return cmd_verify_identities(va, out);
    if (*spectrum) return cmd_delay_spectrum(sa, out);
    if (*sim) return cmd_simulate(config, out_path, out);
    if (*analyze) return cmd_report(a_config, a_out, false, out);
    if (*cross) return cmd_report(c_config, c_out, true, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const PreconditionError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DimensionError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const GridAlignmentError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const OverflowError& e) {
    err << "overflow: " << e.what() << " (last valid time "
        << format_double(e.last_valid_time()) << ")\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace delaylab
