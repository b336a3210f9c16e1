#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "finsler/error.hpp"
#include "finsler/harness.hpp"
#include "finsler/metrics.hpp"

namespace finsler::detail {

struct Measured {
  Measured(double v) : value(v) {}  // NOLINT(google-explicit-constructor)
  Measured(double v, std::string n) : value(v), note(std::move(n)) {}

  double value;
  std::string note;
};

/// Execution context of one scenario run. Checks run in plan order and
/// draw from the single uniform stream in that order.
class Plan {
 public:
  Plan(RunReport& report, std::vector<std::string> names, std::optional<std::filesystem::path> dir);

  const nlohmann::json& config() const { return report_.config; }
  std::uint64_t seed() const { return report_.seed; }
  UniformStream& rng() { return rng_; }
  nlohmann::json& results() { return report_.results; }

  double num(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  std::vector<double> list(const std::string& key) const;

  /// The configured metric, built once. A construction failure is replayed
  /// to every caller so each dependent check fails with the same cause.
  const DualMetric& metric();
  RotationalProfile profile() const;
  IntegratorConfig integrator() const;
  /// Integrator settings for runs beyond F-time 100 (level projection on).
  IntegratorConfig long_integrator() const;
  SectionSpec section() const;

  /// Runs a planned check; exceptions become a failed check with the error
  /// as note.
  void check(const std::string& name, const std::string& relation, double tolerance,
             const std::function<Measured()>& body);
  /// Writes an artifact when the run has an output directory.
  void write(const std::string& file, const std::string& content);
  /// Fails every planned check that did not run.
  void finish();

 private:
  RunReport& report_;
  std::vector<std::string> names_;
  std::optional<std::filesystem::path> dir_;
  UniformStream rng_;
  std::optional<DualMetric> metric_;
  std::optional<Error> metric_error_;
};

struct ScenarioDef {
  std::string name;
  std::vector<std::string> checks;
  std::function<nlohmann::json()> defaults;
  std::function<void(Plan&)> run;
};

const std::vector<ScenarioDef>& scenario_registry();

}  // namespace finsler::detail
