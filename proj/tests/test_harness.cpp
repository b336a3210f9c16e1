#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "finsler/error.hpp"
#include "finsler/harness.hpp"

using namespace finsler;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <class Fn>
ErrorKind error_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::InvalidArgument;
}

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("finsler_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t count_of(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

// Shrinks the expensive parts of katok-sphere; the checks that depend on
// them may then fail, which these tests do not look at.
const json kLightKatokSphere = {{"analysis",
                                 {{"rotation_short", 10},
                                  {"rotation_long", 20},
                                  {"iterate_steps", 5},
                                  {"entropy_points", 20},
                                  {"entropy_T_max", 3},
                                  {"samples", 50},
                                  {"commuting_samples", 2}}}};

}  // namespace

TEST_CASE("scenario registry and defaults") {
  const auto& names = scenario_names();
  CHECK(names == std::vector<std::string>{"round-sphere-baseline", "katok-sphere", "katok-torus", "benchmark-maps",
                                          "appendix-smooth-division"});
  for (const auto& n : names) {
    const auto c = default_config(n);
    for (const char* key : {"profile", "metric", "integrator", "section", "analysis", "scenario"}) {
      CHECK(c.contains(key));
    }
    CHECK(c["scenario"]["name"] == n);
    CHECK(c["scenario"]["seed"] == 1);
    CHECK_FALSE(planned_checks(n).empty());
  }
  CHECK(error_of([] { default_config("nonexistent"); }) == ErrorKind::UnknownScenario);
  CHECK(error_of([] { run_scenario("nonexistent"); }) == ErrorKind::UnknownScenario);
}

TEST_CASE("config merging and dotted overrides") {
  json c = default_config("katok-sphere");
  apply_override(c, "metric.alpha=0.02");
  CHECK(c["metric"]["alpha"] == 0.02);
  apply_override(c, "analysis.entropy_eps=[0.9, 0.7]");
  CHECK(c["analysis"]["entropy_eps"] == json::array({0.9, 0.7}));
  apply_override(c, "metric.kind=rotational");  // not JSON, so taken as a string
  CHECK(c["metric"]["kind"] == "rotational");
  apply_override(c, "integrator.projection=true");
  CHECK(c["integrator"]["projection"] == true);

  CHECK(error_of([&] { apply_override(c, "metric.gamma=1"); }) == ErrorKind::ConfigInvalid);
  CHECK(message_of([&] { apply_override(c, "metric.gamma=1"); }).find("metric.gamma") != std::string::npos);
  CHECK(message_of([&] { apply_override(c, "metric.alpha=\"x\""); }).find("metric.alpha") != std::string::npos);
  CHECK(error_of([&] { apply_override(c, "no_equals_sign"); }) == ErrorKind::ConfigInvalid);
  CHECK(error_of([&] { apply_override(c, "metric..alpha=1"); }) == ErrorKind::ConfigInvalid);
  CHECK(error_of([&] { merge_config(c, {{"metric", 3}}); }) == ErrorKind::ConfigInvalid);

  CHECK(error_of([] { run_scenario("appendix-smooth-division", {{"analysis", {{"identity_tol", -1.0}}}}); }) ==
        ErrorKind::ConfigInvalid);
  CHECK(error_of([] { run_scenario("appendix-smooth-division", {{"scenario", {{"seed", -3}}}}); }) ==
        ErrorKind::ConfigInvalid);
  CHECK(error_of([] { run_scenario("appendix-smooth-division", {{"beta", 1.0}}); }) == ErrorKind::ConfigInvalid);

  const auto dir = scratch_dir("config");
  {
    std::ofstream(dir / "bad.json") << "{ not json";
  }
  CHECK(error_of([&] { read_json_file(dir / "bad.json"); }) == ErrorKind::ConfigInvalid);
  CHECK(error_of([&] { read_json_file(dir / "missing.json"); }) == ErrorKind::IoFailure);
}

TEST_CASE("baseline scenarios pass and list exactly their planned checks") {
  for (const char* name : {"round-sphere-baseline", "appendix-smooth-division"}) {
    const auto r = run_scenario(name);
    CHECK(r.passed());
    std::vector<std::string> got;
    for (const auto& c : r.checks) got.push_back(c.name);
    CHECK(got == planned_checks(name));
    CHECK(r.timings.count("total") == 1);
  }
}

TEST_CASE("reports are determined by scenario, seed and config") {
  const auto a = run_scenario("round-sphere-baseline", {{"scenario", {{"seed", 42}}}});
  const auto b = run_scenario("round-sphere-baseline", {{"scenario", {{"seed", 42}}}});
  CHECK(a.to_json().dump() == b.to_json().dump());
  const auto c = run_scenario("round-sphere-baseline", {{"scenario", {{"seed", 43}}}});
  CHECK(a.to_json().dump() != c.to_json().dump());

  const auto root = scratch_dir("determinism");
  RunOptions o1{root / "one", std::string("run")};
  RunOptions o2{root / "two", std::string("run")};
  run_scenario("appendix-smooth-division", {}, o1);
  run_scenario("appendix-smooth-division", {}, o2);
  const auto p1 = root / "one" / "appendix-smooth-division" / "latest" / "report.json";
  const auto p2 = root / "two" / "appendix-smooth-division" / "latest" / "report.json";
  REQUIRE(fs::exists(p1));
  CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("katok-sphere echoes an alpha override and reruns the convexity gate") {
  json over = kLightKatokSphere;
  over["alpha"] = 0.030901699;
  const auto r = run_scenario("katok-sphere", over);
  CHECK(r.config["metric"]["alpha"] == 0.030901699);
  CHECK(r.results["alpha"] == 0.030901699);
  CHECK(r.check("convexity_gate").passed);
  CHECK(r.check("locality_outside").passed);

  // Far beyond the critical alpha the gate fails, and every check needing
  // the metric fails with the same cause instead of aborting the run.
  json bad = kLightKatokSphere;
  bad["metric"] = {{"alpha", 1.5}};
  const auto q = run_scenario("katok-sphere", bad);
  CHECK_FALSE(q.passed());
  CHECK(q.checks.size() == planned_checks("katok-sphere").size());
  CHECK_FALSE(q.check("convexity_gate").passed);
  CHECK(q.check("convexity_gate").note.find("ConvexityLost") != std::string::npos);
  CHECK(q.check("seam_jet").note.find("ConvexityLost") != std::string::npos);
}

TEST_CASE("report export") {
  RunReport r;
  r.scenario = "round-sphere-baseline";
  r.seed = 5;
  r.config = default_config("round-sphere-baseline");
  r.checks = {check_le("a", 1e-9, 1e-6, "fine"), check_ge("b", 3.0, 5.0, "with, comma and \"quotes\""),
              check_le("c", std::numeric_limits<double>::quiet_NaN(), 1.0),
              check_gt("d", std::numeric_limits<double>::infinity(), 0.0)};
  r.artifacts = {"x.csv"};
  CHECK(r.checks[0].passed);
  CHECK_FALSE(r.checks[1].passed);
  CHECK_FALSE(r.checks[2].passed);
  CHECK(r.checks[3].passed);
  CHECK_FALSE(r.passed());
  CHECK(error_of([&] { r.check("zzz"); }) == ErrorKind::InvalidArgument);

  const auto dir = scratch_dir("export");
  export_report(r, "json", dir / "r.json");
  const auto back = RunReport::from_json(read_json_file(dir / "r.json"));
  CHECK(back.to_json() == r.to_json());
  CHECK(std::isnan(back.checks[2].measured));
  CHECK(std::isinf(back.checks[3].measured));

  export_report(r, "csv-summary", dir / "r.csv");
  const auto csv = slurp(dir / "r.csv");
  CHECK(csv.rfind("check,passed,measured,relation,tolerance,note\n", 0) == 0);
  CHECK(count_of(csv, "\n") == r.checks.size() + 1);
  CHECK(csv.find("\"with, comma and \"\"quotes\"\"\"") != std::string::npos);

  CHECK(error_of([&] { export_report(r, "xml", dir / "r.xml"); }) == ErrorKind::InvalidArgument);
  CHECK(error_of([&] { export_report(r, "json", dir / "no" / "such" / "dir" / "r.json"); }) == ErrorKind::IoFailure);
}

TEST_CASE("run directories and the latest link") {
  const auto root = scratch_dir("rundir");
  const auto a = make_run_directory(root, "demo", std::string("stamp"));
  const auto b = make_run_directory(root, "demo", std::string("stamp"));
  CHECK(a.filename() == "stamp");
  CHECK(b.filename() == "stamp-1");
  CHECK(fs::is_symlink(root / "demo" / "latest"));
  CHECK(fs::read_symlink(root / "demo" / "latest") == "stamp-1");
  const auto c = make_run_directory(root, "demo");
  CHECK(c.filename().string().size() == 16);  // YYYYMMDDTHHMMSSZ

  RunOptions opts{root, std::string("r")};
  const auto r = run_scenario("round-sphere-baseline", {}, opts);
  for (const auto& f : r.artifacts) {
    CHECK(fs::path(f).is_relative());
    CHECK(fs::exists(root / "round-sphere-baseline" / "r" / f));
  }
  for (const char* f : {"report.json", "summary.csv", "timings.json", "return_map.csv", "return_map.svg"}) {
    CHECK(std::find(r.artifacts.begin(), r.artifacts.end(), f) != r.artifacts.end());
  }
  // Timings stay out of the report itself.
  const auto saved = read_json_file(root / "round-sphere-baseline" / "r" / "report.json");
  CHECK_FALSE(saved.contains("timings"));
  CHECK(read_json_file(root / "round-sphere-baseline" / "r" / "timings.json").contains("total"));
}

TEST_CASE("section plots") {
  CHECK(error_of([] { render_svg({}, PlotStyle{}); }) == ErrorKind::EmptyInput);
  CHECK(error_of([] { render_svg({PlotSeries{}}, PlotStyle{}); }) == ErrorKind::EmptyInput);
  CHECK(error_of([] { render_section_plot(std::vector<ReturnSample>{}, PlotStyle{}); }) == ErrorKind::EmptyInput);
  CHECK(error_of([] { render_section_plot(OrbitTrace{}, PlotStyle{}); }) == ErrorKind::EmptyInput);

  // Identity return map: a lattice of markers and no arrows.
  std::vector<ReturnSample> identity;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 3; ++j) {
      ReturnSample r;
      r.point = r.image = {1.5 * i, 0.5 + j};
      identity.push_back(r);
    }
  }
  PlotStyle style;
  style.title = "identity <map>";
  const auto svg = render_section_plot(identity, style);
  CHECK(count_of(svg, "<circle") == 12);
  CHECK(count_of(svg, "<path") == 0);
  CHECK(svg.find("identity &lt;map&gt;") != std::string::npos);
  CHECK(svg == render_section_plot(identity, style));

  // A displaced image gets one arrow; failed samples are skipped.
  auto moved = identity;
  moved[0].image.s += 0.3;
  moved[1].status = ErrorKind::NoCrossing;
  const auto svg2 = render_section_plot(moved, style);
  CHECK(count_of(svg2, "<circle") == 11);
  CHECK(count_of(svg2, "<path") == 1);

  // Orbit traces break their polyline where the reduced path wraps.
  OrbitTrace t;
  t.domain = Domain{kTwoPi, std::nullopt};
  for (int i = 0; i < 100; ++i) {
    const double x1 = std::fmod(0.1 * i, kTwoPi);
    t.times.push_back(0.1 * i);
    t.states.push_back({x1, std::sin(0.1 * i), 1.0, 0.0});
  }
  const auto orbit_svg = render_section_plot(t, PlotStyle{});
  CHECK(count_of(orbit_svg, " M") == 1);  // one break after the single wrap at 2 pi
}
