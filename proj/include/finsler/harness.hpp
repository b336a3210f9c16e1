#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "finsler/flow.hpp"
#include "finsler/sections.hpp"

namespace finsler {

// ---------------------------------------------------------------------------
// Reports

struct Check {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  /// How measured is compared with tolerance: "<=", ">=" or ">".
  std::string relation = "<=";
  std::string note;

  nlohmann::json to_json() const;
  static Check from_json(const nlohmann::json& j);
};

Check check_le(std::string name, double measured, double tolerance, std::string note = {});
Check check_ge(std::string name, double measured, double tolerance, std::string note = {});
Check check_gt(std::string name, double measured, double tolerance, std::string note = {});

/// Everything in the report is a function of (scenario, seed, config);
/// wall-clock timings are kept apart in `timings` and never serialized
/// into the report itself.
struct RunReport {
  std::string scenario;
  std::uint64_t seed = 0;
  nlohmann::json config;
  std::vector<Check> checks;
  /// Measured data beyond the checks (small tables, echoes).
  nlohmann::json results = nlohmann::json::object();
  /// File names relative to the run directory.
  std::vector<std::string> artifacts;
  std::map<std::string, double> timings;

  bool passed() const;
  const Check& check(const std::string& name) const;
  nlohmann::json to_json() const;
  static RunReport from_json(const nlohmann::json& j);
};

/// Formats: "json" (the report) or "csv-summary" (one row per check).
/// Throws InvalidArgument for other formats, IoFailure when writing fails.
void export_report(const RunReport& report, const std::string& format, const std::filesystem::path& path);
std::string report_csv_summary(const RunReport& report);

// ---------------------------------------------------------------------------
// Configuration

const std::vector<std::string>& scenario_names();

/// Full default configuration of a scenario, with top-level keys profile,
/// metric, integrator, section, analysis and scenario. Throws
/// UnknownScenario.
nlohmann::json default_config(const std::string& scenario);

/// Recursively merges `patch` into `config`. Every key must already exist
/// and keep its JSON type (numbers are interchangeable, arrays are
/// replaced whole); otherwise ConfigInvalid names the dotted key path.
void merge_config(nlohmann::json& config, const nlohmann::json& patch, const std::string& path = "");

/// Applies "a.b.c=value"; the value is parsed as JSON when possible and
/// taken as a string otherwise.
void apply_override(nlohmann::json& config, const std::string& assignment);

/// Reads a JSON file; IoFailure or ConfigInvalid on failure.
nlohmann::json read_json_file(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Scenarios

struct RunOptions {
  /// Root of the output tree; artifacts go to <root>/<scenario>/<stamp>/.
  std::optional<std::filesystem::path> out_root;
  /// Fixed run-directory name instead of a UTC timestamp.
  std::optional<std::string> stamp;
};

/// Runs a registered scenario with the given configuration overrides (a
/// JSON patch over default_config, which may set scenario.seed). Each
/// scenario enumerates its checks up front and the report holds exactly
/// those; a check whose computation throws is recorded as failed with the
/// error in its note. Throws UnknownScenario or ConfigInvalid.
RunReport run_scenario(const std::string& name, const nlohmann::json& overrides = nlohmann::json::object(),
                       const RunOptions& options = {});

/// The check names of a scenario, in report order.
std::vector<std::string> planned_checks(const std::string& name);

/// Creates <root>/<scenario>/<stamp>/ (suffixing -1, -2, ... if taken) and
/// points <root>/<scenario>/latest at it.
std::filesystem::path make_run_directory(const std::filesystem::path& root, const std::string& scenario,
                                         const std::optional<std::string>& stamp = {});

/// Deterministic uniform stream: mt19937_64 with 53-bit doubles (the
/// standard distributions are implementation-defined, so they are avoided).
class UniformStream {
 public:
  explicit UniformStream(std::uint64_t seed) : rng_(seed) {}
  double operator()() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * (*this)(); }
  std::uint64_t bits() { return rng_(); }

 private:
  std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------
// Plots

struct PlotStyle {
  int width = 640;
  int height = 480;
  std::string title;
  std::string x_label = "s";
  std::string y_label = "u";
  /// (x_min, x_max, y_min, y_max); derived from the data when absent.
  std::optional<std::array<double, 4>> bounds;
  double point_radius = 1.5;
};

struct PlotSeries {
  std::vector<std::array<double, 2>> points;
  /// Polyline instead of markers; NaN points break the line.
  bool line = false;
  std::string color = "#1f77b4";
};

/// Deterministic SVG (fixed element order, 3-decimal coordinates). Throws
/// EmptyInput when no series has points.
std::string render_svg(const std::vector<PlotSeries>& series, const PlotStyle& style);

/// Return-map table over the annulus: a marker per image and an arrow from
/// each point to its image where they differ. Failed samples are skipped.
std::string render_section_plot(const std::vector<ReturnSample>& table, const PlotStyle& style);
/// Base curve of an orbit trace, broken where the reduced path wraps.
std::string render_section_plot(const OrbitTrace& trace, const PlotStyle& style);

}  // namespace finsler
