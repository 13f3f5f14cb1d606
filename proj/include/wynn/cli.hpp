#pragma once

#include <iostream>
#include <optional>
#include <string>

#include "json.hpp"

#include "wynn/adaptive.hpp"
#include "wynn/analysis.hpp"
#include "wynn/config.hpp"
#include "wynn/design.hpp"
#include "wynn/io.hpp"
#include "wynn/protocol.hpp"

namespace wynn::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2 };

inline RunConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const Error& e) {
    throw ConfigError("", e.what());
  }
  return parse_config(text);
}

/// Command-line values that replace top-level scalars of the configuration.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<long> n_max;
  std::optional<std::size_t> replicates;
  std::optional<unsigned> workers;
  std::optional<std::string> prefix;
};

inline void apply(RunConfig& c, const Overrides& o) {
  if (o.seed) c.seed = *o.seed;
  if (o.n_max) {
    if (*o.n_max < 1) throw ConfigError("--n-max", "must be >= 1");
    c.wynn.n_max = *o.n_max;
  }
  if (o.replicates) {
    if (*o.replicates < 1) throw ConfigError("--replicates", "must be >= 1");
    c.mc.replicates = *o.replicates;
  }
  if (o.workers) c.mc.workers = *o.workers;
  if (o.prefix) {
    if (o.prefix->empty()) throw ConfigError("--out", "must be nonempty");
    c.output.prefix = *o.prefix;
  }
}

struct TrajectoryFiles {
  std::string csv, json;
};

inline TrajectoryFiles trajectory_paths(const RunConfig& c) {
  return {c.output.prefix + ".trajectory.csv", c.output.prefix + ".trajectory.json"};
}
inline std::string design_path(const RunConfig& c) { return c.output.prefix + ".design.json"; }
inline std::string report_json_path(const RunConfig& c) { return c.output.prefix + ".report.json"; }
inline std::string report_csv_path(const RunConfig& c) { return c.output.prefix + ".report.csv"; }

inline void write_trajectory(const Trajectory& t, const TrajectoryFiles& files) {
  io::write_file(files.csv, io::trajectory_csv(t));
  io::write_json(files.json, io::to_json(t));
}

namespace detail {

// Runs `body`, mapping exceptions to exit codes and one message line.
template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

inline std::string echo(const RunConfig& c) { return config_to_json(c).dump(); }

}  // namespace detail

/// Full adaptive run against the simulated (or replay) source; writes the
/// trajectory CSV and JSON.
inline int cmd_simulate(const RunConfig& c, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    if (c.source.kind == SourceKind::Interactive)
      throw ConfigError("/source/kind", "interactive sources run with the 'session' command");
    const Problem problem = c.problem();
    AdaptiveWynn alg(problem, c.wynn);
    alg.trajectory().seed = c.seed;
    alg.trajectory().config_echo = detail::echo(c);
    if (c.source.kind == SourceKind::Simulated) {
      if (!c.theta_true) throw ConfigError("/theta_true", "required by the simulated source");
      SimulatedSource src(problem.model, to_eigen(*c.theta_true), ErrorProcess(c.noise), c.seed);
      alg.run(src);
    } else {
      std::ifstream in(c.source.path);
      if (!in) throw ConfigError("/source/path", "cannot open replay file '" + c.source.path + "'");
      ReplaySource src(in);
      alg.run(src);
    }
    write_trajectory(alg.trajectory(), trajectory_paths(c));
    return static_cast<int>(kOk);
  });
}

/// Locally D-optimal design at oracle.theta (default theta_true).
inline int cmd_oracle(const RunConfig& c, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    const auto theta = c.oracle.theta ? c.oracle.theta : c.theta_true;
    if (!theta) throw ConfigError("/oracle/theta", "oracle needs oracle.theta or theta_true");
    const Problem problem = c.problem();
    const OracleResult res = solve_locally_d_optimal(problem.model, to_eigen(*theta), problem.design_space.grid(),
                                                     c.oracle.tolerance, c.oracle.max_iterations);
    io::write_json(design_path(c), io::to_json(res));
    return static_cast<int>(kOk);
  });
}

/// Monte Carlo study at the configured checkpoints; writes the report JSON
/// and CSV. More than 1% failed replicates is a failure.
inline int cmd_mc(const RunConfig& c, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    const Scenario sc = c.scenario();
    StudyOptions opt;
    opt.workers = c.mc.workers;
    const MCReport rep = consistency_study(sc, c.mc.replicates, c.checkpoints(), c.seed, opt);
    io::write_json(report_json_path(c), io::to_json(rep));
    io::write_file(report_csv_path(c), io::report_csv(rep, sc.problem.model.p));
    if (rep.study_failed) {
      err << "error: " << rep.failed << " of " << rep.replicates << " replicates failed\n";
      return static_cast<int>(kFailure);
    }
    return static_cast<int>(kOk);
  });
}

struct DiagnoseOptions {
  std::optional<double> d;              // calibrated from the run's configuration when absent
  std::optional<double> cell_diameter;  // d / 3 when absent
  double epsilon = 0.1;
  std::string out;  // default: <trajectory path>.diagnostics.json
};

/// Design-mass diagnostics of a saved trajectory.
inline int cmd_diagnose(const std::string& trajectory_path, const DiagnoseOptions& opt, std::ostream& err = std::cerr) {
  Trajectory traj;
  try {
    traj = io::trajectory_from_json(io::json::parse(io::read_file(trajectory_path)));
  } catch (const std::exception& e) {
    err << "error: cannot read trajectory '" << trajectory_path << "': " << e.what() << '\n';
    return kUsage;
  }
  return detail::guarded(err, [&] {
    if (!(opt.epsilon > 0.0)) throw ConfigError("--eps", "must be positive");
    io::json calibration = nullptr;
    double d = 0.0;
    if (opt.d) {
      d = *opt.d;
      if (!(d > 0.0)) throw ConfigError("--d", "must be positive");
    } else {
      const RunConfig rc = parse_config(traj.config_echo);
      const Problem pr = rc.problem();
      const WindowCalibration cal = calibrate_window_diameter(
          pr.model, pr.design_space.grid(), pr.parameter_space.grid(rc.wynn.theta_check_points_per_axis), opt.epsilon);
      d = cal.d;
      calibration = io::json{{"eta", io::num(cal.eta)},
                             {"threshold", io::num(cal.threshold)},
                             {"gamma", io::num(cal.constants.gamma)},
                             {"kappa", io::num(cal.constants.kappa)}};
    }
    const double cell = opt.cell_diameter ? *opt.cell_diameter : d / 3.0;
    if (!(cell > 0.0)) throw ConfigError("--cell-diameter", "must be positive");
    const MassDiagnostics diag = diagnose(traj, d, cell, opt.epsilon);
    io::json j = io::to_json(diag);
    j["calibration"] = calibration;
    const std::string out = opt.out.empty() ? trajectory_path + ".diagnostics.json" : opt.out;
    io::write_json(out, j);
    return static_cast<int>(kOk);
  });
}

/// Interactive suggest/observe loop over `in`/`out`. QUIT or end of input
/// after the starting design finalizes the run; before it, the partial
/// trajectory is saved and the exit code is 1.
inline int cmd_session(const RunConfig& c, std::istream& in, std::ostream& out, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    const Problem problem = c.problem();
    AdaptiveWynn alg(problem, c.wynn);
    alg.trajectory().seed = c.seed;
    alg.trajectory().config_echo = detail::echo(c);
    alg.on_estimate([&out](const WynnState& s) { out << protocol::estimate_line(s.theta) << '\n' << std::flush; });
    InteractiveSource src(in, out);
    try {
      alg.run(src);
    } catch (const SessionEnded& e) {
      if (!alg.initialized()) {
        write_trajectory(alg.trajectory(), trajectory_paths(c));
        err << "error: " << e.what() << " before the starting design was complete ("
            << alg.trajectory().initial_responses.size() << " of " << alg.trajectory().n_start
            << " observations); partial trajectory saved\n";
        return static_cast<int>(kFailure);
      }
      alg.finalize();
    }
    write_trajectory(alg.trajectory(), trajectory_paths(c));
    return static_cast<int>(kOk);
  });
}

}  // namespace wynn::cli
