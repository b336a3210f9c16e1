#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "finsler/analysis.hpp"
#include "finsler/error.hpp"
#include "finsler/harness.hpp"

using namespace finsler;
using nlohmann::json;

namespace {

struct Common {
  std::string config_file;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
  std::string scenario;
};

void add_common(CLI::App* cmd, Common& c, const std::string& default_scenario) {
  c.scenario = default_scenario;
  cmd->add_option("--config", c.config_file, "JSON config patch over the scenario defaults")->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "output root; files go to <out>/<command or scenario>/<timestamp>/");
  cmd->add_option("--seed", c.seed, "scenario seed");
  cmd->add_option("--set", c.sets, "dotted-path override key=value (repeatable)");
  if (!default_scenario.empty()) {
    cmd->add_option("--scenario", c.scenario, "scenario whose defaults seed the config")->capture_default_str();
  }
}

json load_config(const Common& c, const std::string& scenario) {
  json config = default_config(scenario);
  if (!c.config_file.empty()) merge_config(config, read_json_file(c.config_file));
  for (const auto& s : c.sets) apply_override(config, s);
  if (c.seed) config["scenario"]["seed"] = *c.seed;
  return config;
}

DualMetric metric_of(const json& config) {
  return DualMetric::from_json(config["metric"], RotationalProfile::from_json(config["profile"]));
}

/// Writes `content` to <out>/<command>/<stamp>/<file>, or to stdout.
class Sink {
 public:
  Sink(const std::string& out, const std::string& command) {
    if (!out.empty()) dir_ = make_run_directory(out, command);
  }
  void emit(const std::string& file, const std::string& content, bool to_stdout = true) {
    if (dir_) {
      std::ofstream f(*dir_ / file, std::ios::binary);
      f << content;
      if (!f) throw Error(ErrorKind::IoFailure, "cannot write " + (*dir_ / file).string());
      std::cerr << "wrote " << (*dir_ / file).string() << '\n';
    } else if (to_stdout) {
      std::cout << content;
    }
  }

 private:
  std::optional<std::filesystem::path> dir_;
};

double analysis_number(const json& config, const std::string& key, double fallback) {
  const auto& a = config["analysis"];
  return a.contains(key) && a[key].is_number() ? a[key].get<double>() : fallback;
}

std::vector<double> analysis_list(const json& config, const std::string& key, std::vector<double> fallback) {
  const auto& a = config["analysis"];
  return a.contains(key) && a[key].is_array() ? a[key].get<std::vector<double>>() : fallback;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finsler geodesic-flow experiments: orbits, sections, rotation numbers, entropy, graphs, tubes."};
  app.require_subcommand(1);

  Common simulate_c, section_c, rotation_c, entropy_c, graphs_c, tube_c, validate_c, run_c;

  auto* simulate = app.add_subcommand("simulate", "integrate one orbit and dump it as CSV (and SVG with --out)");
  add_common(simulate, simulate_c, "katok-sphere");
  std::array<double, 4> state{0.0, 0.0, 1.0, 0.0};
  double T = 100.0;
  bool unit = true;
  simulate->add_option("--state", state, "x1 x2 xi1 xi2");
  simulate->add_option("--T", T, "flow time")->capture_default_str();
  simulate->add_flag("!--raw", unit, "do not rescale the covector to the unit level");

  auto* section = app.add_subcommand("section", "first-return map table on a grid of the section annulus");
  add_common(section, section_c, "katok-sphere");
  int n_s = 8;
  int n_u = 8;
  section->add_option("--ns", n_s, "grid points in s")->capture_default_str();
  section->add_option("--nu", n_u, "grid points in u")->capture_default_str();

  auto* rotation = app.add_subcommand("rotation", "rotation number of the first-return map");
  add_common(rotation, rotation_c, "katok-sphere");
  std::array<double, 2> start{1.0, 1.0};
  std::size_t n_iter = 1000;
  rotation->add_option("--start", start, "s u");
  rotation->add_option("-n,--iterations", n_iter, "number of returns")->capture_default_str();

  auto* entropy = app.add_subcommand("entropy", "separated-set entropy of the first-return map");
  add_common(entropy, entropy_c, "katok-sphere");

  auto* graphs = app.add_subcommand("graphs", "invariant-graph test of a rotating orbit");
  add_common(graphs, graphs_c, "katok-torus");
  double c_value = std::nan("");
  graphs->add_option("--c", c_value, "Clairaut value xi1 (default: half the profile minimum)");

  auto* tube = app.add_subcommand("tube", "elliptic-tube diagnostics");
  add_common(tube, tube_c, "katok-torus");

  auto* validate = app.add_subcommand("validate", "metric axioms, convexity and (Katok) seam checks");
  add_common(validate, validate_c, "katok-sphere");

  auto* run = app.add_subcommand("run", "run a registered scenario and write its report");
  add_common(run, run_c, "");
  std::string scenario_name;
  bool list = false;
  run->add_option("scenario", scenario_name, "scenario name");
  run->add_flag("--list", list, "list registered scenarios");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      if (list || scenario_name.empty()) {
        for (const auto& n : scenario_names()) std::cout << n << '\n';
        return scenario_name.empty() && !list ? 2 : 0;
      }
      const json config = load_config(run_c, scenario_name);
      RunOptions opts;
      opts.out_root = run_c.out.empty() ? std::filesystem::path("out") : std::filesystem::path(run_c.out);
      const auto report = run_scenario(scenario_name, config, opts);
      for (const auto& c : report.checks) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << "  measured " << c.measured << ' ' << c.relation << ' '
                  << c.tolerance;
        if (!c.note.empty()) std::cout << "  (" << c.note << ')';
        std::cout << '\n';
      }
      std::cout << (report.passed() ? "scenario passed" : "scenario FAILED") << '\n';
      return report.passed() ? 0 : 1;
    }

    if (*simulate) {
      const json config = load_config(simulate_c, simulate_c.scenario);
      const auto m = metric_of(config);
      CotangentPoint p{state[0], state[1], state[2], state[3]};
      if (unit) {
        const double h = m(p);
        p.xi1 /= h;
        p.xi2 /= h;
      }
      const auto trace = integrate_orbit(m, p, T, IntegratorConfig::from_json(config["integrator"]));
      Sink sink(simulate_c.out, "simulate");
      std::ostringstream csv;
      write_orbit_csv(csv, trace, m);
      sink.emit("orbit.csv", csv.str());
      PlotStyle style;
      style.x_label = "x1";
      style.y_label = "x2";
      sink.emit("orbit.svg", render_section_plot(trace, style), false);
      std::cerr << "max drift H " << trace.max_drift_H << ", xi1 " << trace.max_drift_H1 << '\n';
      return 0;
    }

    if (*section) {
      const json config = load_config(section_c, section_c.scenario);
      const auto m = metric_of(config);
      GridSpec grid;
      grid.n_s = n_s;
      grid.n_u = n_u;
      const auto spec = SectionSpec::from_json(config["section"]);
      const auto table = build_return_map_grid(m, spec, grid, IntegratorConfig::from_json(config["integrator"]));
      Sink sink(section_c.out, "section");
      std::ostringstream csv;
      write_return_csv(csv, table);
      sink.emit("return_map.csv", csv.str());
      sink.emit("return_map.svg", render_section_plot(table, PlotStyle{}), false);
      return 0;
    }

    if (*rotation) {
      const json config = load_config(rotation_c, rotation_c.scenario);
      const auto m = metric_of(config);
      const auto spec = SectionSpec::from_json(config["section"]);
      const auto cfg = IntegratorConfig::from_json(config["integrator"]);
      const auto r = rotation_number(section_lifted_map(m, spec, cfg), section_state(m, spec, {start[0], start[1]}), n_iter);
      Sink sink(rotation_c.out, "rotation");
      sink.emit("rotation.json", r.to_json().dump(2) + "\n");
      return 0;
    }

    if (*entropy) {
      const json config = load_config(entropy_c, entropy_c.scenario);
      const auto m = metric_of(config);
      const auto spec = SectionSpec::from_json(config["section"]);
      const auto cfg = IntegratorConfig::from_json(config["integrator"]);
      const auto n = static_cast<std::size_t>(analysis_number(config, "entropy_points", 2000));
      const auto steps = static_cast<std::size_t>(analysis_number(config, "entropy_T_max", 40));
      UniformStream rng(config["scenario"]["seed"].get<std::uint64_t>());
      const double period = s_period(m, spec);
      if (!(period > 0.0)) throw Error(ErrorKind::InvalidArgument, "the section has no periodic s coordinate");
      std::vector<std::vector<double>> pts(n);
      for (auto& p : pts) {
        const double s = rng.uniform(0.0, period);
        p = {s, rng.uniform(0.1, kPi - 0.1)};
      }
      const auto cloud = make_orbit_cloud(
          pts, steps,
          [&](std::vector<double>& x) {
            const auto r = first_return(m, spec, {x[0], x[1]}, cfg);
            x = {r.image.s, r.image.u};
          },
          [period](const double* a, const double* b) {
            return std::max(std::abs(std::remainder(a[0] - b[0], period)), std::abs(a[1] - b[1]));
          });
      std::vector<std::size_t> Ts(steps + 1);
      for (std::size_t t = 0; t <= steps; ++t) Ts[t] = t;
      const auto e = entropy_separated_sets(cloud, Ts, analysis_list(config, "entropy_eps", {1.0, 0.8}));
      Sink sink(entropy_c.out, "entropy");
      std::ostringstream csv;
      write_entropy_csv(csv, e);
      sink.emit("entropy.csv", csv.str());
      std::cerr << "h = " << e.value << " at eps = " << e.value_eps << '\n';
      return 0;
    }

    if (*graphs) {
      const json config = load_config(graphs_c, graphs_c.scenario);
      const auto m = metric_of(config);
      const auto profile = RotationalProfile::from_json(config["profile"]);
      const double c = std::isnan(c_value) ? 0.5 * profile.minimum() : c_value;
      IntegratorConfig cfg = IntegratorConfig::from_json(config["integrator"]);
      cfg.projection = true;
      const auto trace = integrate_orbit(m, clairaut_state(m, 0.0, 0.0, c), analysis_number(config, "orbit_graph_T", 5000), cfg);
      GraphBinning b;
      if (profile.period()) b.period2 = *profile.period();
      const auto g = invariant_graph_test(fiber_samples(trace), b, &trace.lifted_base);
      Sink sink(graphs_c.out, "graphs");
      sink.emit("graph.json", g.to_json().dump(2) + "\n");
      return g.is_graph ? 0 : 1;
    }

    if (*tube) {
      const json config = load_config(tube_c, tube_c.scenario);
      const auto m = metric_of(config);
      IntegratorConfig cfg = IntegratorConfig::from_json(config["integrator"]);
      cfg.projection = true;
      const auto spec = clairaut_tube(m);
      const auto n = static_cast<std::size_t>(analysis_number(config, "tube_samples", 500));
      const auto ensemble = sample_tube(m, spec, n, config["scenario"]["seed"].get<std::uint64_t>());
      std::vector<std::pair<CotangentPoint, WitnessBall>> witnesses;
      const double offset = analysis_number(config, "witness_offset", 0.1);
      const double radius = analysis_number(config, "witness_radius", 0.05);
      for (double c : analysis_list(config, "witness_cs", {})) {
        witnesses.push_back({clairaut_state(m, 0.0, 0.0, c), {clairaut_state(m, 0.0, 0.0, c + offset), radius}});
      }
      const auto r = tube_diagnostics(m, spec, ensemble, analysis_number(config, "tube_T", 50),
                                      analysis_list(config, "tube_eps", {0.01, 0.02, 0.05, 0.1}), witnesses,
                                      analysis_number(config, "witness_T", 1000), cfg);
      json j = r.to_json();
      j["c_lo"] = spec.c_lo;
      j["c_hi"] = spec.c_hi;
      Sink sink(tube_c.out, "tube");
      sink.emit("tube.json", j.dump(2) + "\n");
      return 0;
    }

    if (*validate) {
      const json config = load_config(validate_c, validate_c.scenario);
      const auto m = metric_of(config);
      json out = {{"metric", m.to_json()}};
      const auto profile = RotationalProfile::from_json(config["profile"]);
      const double lo = profile.period() ? 0.0 : -4.0;
      const double hi = profile.period() ? *profile.period() : 4.0;
      const auto conv = fiber_convexity_check(m, fiber_sample_grid(lo, hi, 161, 360));
      out["min_fiber_eigenvalue"] = conv.min_eigenvalue;
      bool ok = conv.passed;
      if (m.kind() == DualMetric::Kind::Katok) {
        const auto seam = seam_jet_check(reversibilize(m));
        out["seam_jet_mismatch"] = seam.max_mismatch;
        ok = ok && seam.max_mismatch <= 1e-5;
      }
      out["passed"] = ok;
      Sink sink(validate_c.out, "validate");
      sink.emit("validate.json", out.dump(2) + "\n");
      return ok ? 0 : 1;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
