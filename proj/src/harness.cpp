#include "finsler/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>

#include "finsler/error.hpp"
#include "scenario_plan.hpp"

namespace finsler {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool compare(double measured, const std::string& relation, double tolerance) {
  if (relation == "<=") return measured <= tolerance;
  if (relation == ">=") return measured >= tolerance;
  if (relation == ">") return measured > tolerance;
  throw Error(ErrorKind::InvalidArgument, "unknown relation '" + relation + "'");
}

// NaN and infinities have no JSON literal; they are stored as strings so a
// report survives a reload unchanged.
json number_to_json(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

double number_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw Error(ErrorKind::ConfigInvalid, "expected a number, got " + j.dump());
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

std::string type_name(const json& j) {
  if (j.is_number()) return "number";
  return j.type_name();
}

const detail::ScenarioDef& find_scenario(const std::string& name) {
  for (const auto& s : detail::scenario_registry()) {
    if (s.name == name) return s;
  }
  throw Error(ErrorKind::UnknownScenario, "'" + name + "' is not registered");
}

std::string utc_stamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

const std::vector<std::string> kSections = {"profile", "metric", "integrator", "section", "analysis", "scenario"};

// Top-level keys that are not config sections are shorthand for the unique
// section holding that key, e.g. {"alpha": x} for {"metric": {"alpha": x}}.
json normalize_overrides(const json& config, const json& overrides) {
  json out = json::object();
  if (overrides.is_null()) return out;
  if (!overrides.is_object()) throw Error(ErrorKind::ConfigInvalid, "overrides: expected an object");
  for (const auto& [key, value] : overrides.items()) {
    if (std::find(kSections.begin(), kSections.end(), key) != kSections.end()) {
      if (!out.contains(key)) out[key] = json::object();
      if (value.is_object()) {
        for (const auto& [k, v] : value.items()) out[key][k] = v;
      } else {
        out[key] = value;
      }
      continue;
    }
    std::vector<std::string> owners;
    for (const auto& s : kSections) {
      if (config[s].is_object() && config[s].contains(key)) owners.push_back(s);
    }
    if (owners.size() != 1) {
      throw Error(ErrorKind::ConfigInvalid,
                  key + (owners.empty() ? ": unknown key" : ": ambiguous key, qualify it with its section"));
    }
    out[owners[0]][key] = value;
  }
  return out;
}

void validate_tolerances(const json& j, const std::string& path) {
  for (const auto& [key, value] : j.items()) {
    const std::string p = path + "." + key;
    if (value.is_object()) {
      validate_tolerances(value, p);
    } else if (key.size() > 4 && key.compare(key.size() - 4, 4, "_tol") == 0) {
      if (!value.is_number() || !(value.get<double>() > 0.0)) {
        throw Error(ErrorKind::ConfigInvalid, p.substr(1) + ": tolerance must be positive");
      }
    }
  }
}

std::uint64_t seed_of(const json& config) {
  const auto& s = config["scenario"]["seed"];
  if (!s.is_number_integer() || (!s.is_number_unsigned() && s.get<std::int64_t>() < 0)) {
    throw Error(ErrorKind::ConfigInvalid, "scenario.seed: expected a non-negative integer");
  }
  return s.get<std::uint64_t>();
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  out << content;
  out.close();
  if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
}

}  // namespace

// ---------------------------------------------------------------------------
// Checks and reports

json Check::to_json() const {
  return {{"name", name},
          {"passed", passed},
          {"measured", number_to_json(measured)},
          {"tolerance", number_to_json(tolerance)},
          {"relation", relation},
          {"note", note}};
}

Check Check::from_json(const json& j) {
  Check c;
  c.name = j.at("name").get<std::string>();
  c.passed = j.at("passed").get<bool>();
  c.measured = number_from_json(j.at("measured"));
  c.tolerance = number_from_json(j.at("tolerance"));
  c.relation = j.at("relation").get<std::string>();
  c.note = j.at("note").get<std::string>();
  return c;
}

Check check_le(std::string name, double measured, double tolerance, std::string note) {
  return {std::move(name), compare(measured, "<=", tolerance), measured, tolerance, "<=", std::move(note)};
}

Check check_ge(std::string name, double measured, double tolerance, std::string note) {
  return {std::move(name), compare(measured, ">=", tolerance), measured, tolerance, ">=", std::move(note)};
}

Check check_gt(std::string name, double measured, double tolerance, std::string note) {
  return {std::move(name), compare(measured, ">", tolerance), measured, tolerance, ">", std::move(note)};
}

bool RunReport::passed() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

const Check& RunReport::check(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return c;
  }
  throw Error(ErrorKind::InvalidArgument, "report has no check '" + name + "'");
}

json RunReport::to_json() const {
  json checks_json = json::array();
  for (const auto& c : checks) checks_json.push_back(c.to_json());
  return {{"scenario", scenario}, {"seed", seed},       {"passed", passed()}, {"config", config},
          {"checks", checks_json}, {"results", results}, {"artifacts", artifacts}};
}

RunReport RunReport::from_json(const json& j) {
  RunReport r;
  r.scenario = j.at("scenario").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.config = j.at("config");
  for (const auto& c : j.at("checks")) r.checks.push_back(Check::from_json(c));
  r.results = j.at("results");
  r.artifacts = j.at("artifacts").get<std::vector<std::string>>();
  return r;
}

std::string report_csv_summary(const RunReport& report) {
  std::ostringstream out;
  out << "check,passed,measured,relation,tolerance,note\n";
  for (const auto& c : report.checks) {
    out << csv_field(c.name) << ',' << (c.passed ? "true" : "false") << ',' << format_number(c.measured) << ','
        << c.relation << ',' << format_number(c.tolerance) << ',' << csv_field(c.note) << '\n';
  }
  return out.str();
}

void export_report(const RunReport& report, const std::string& format, const fs::path& path) {
  if (format == "json") {
    write_text(path, report.to_json().dump(2) + "\n");
  } else if (format == "csv-summary") {
    write_text(path, report_csv_summary(report));
  } else {
    throw Error(ErrorKind::InvalidArgument, "unknown export format '" + format + "' (json, csv-summary)");
  }
}

// ---------------------------------------------------------------------------
// Configuration

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& s : detail::scenario_registry()) v.push_back(s.name);
    return v;
  }();
  return names;
}

json default_config(const std::string& scenario) {
  json c = find_scenario(scenario).defaults();
  c["scenario"] = {{"name", scenario}, {"seed", 1}};
  return c;
}

void merge_config(json& config, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw Error(ErrorKind::ConfigInvalid, (path.empty() ? "config" : path) + ": expected an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string p = path.empty() ? key : path + "." + key;
    if (!config.is_object() || !config.contains(key)) throw Error(ErrorKind::ConfigInvalid, p + ": unknown key");
    json& target = config[key];
    if (target.is_object()) {
      merge_config(target, value, p);
    } else if (type_name(target) != type_name(value)) {
      throw Error(ErrorKind::ConfigInvalid, p + ": expected " + type_name(target) + ", got " + type_name(value));
    } else {
      target = value;
    }
  }
}

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorKind::ConfigInvalid, "override '" + assignment + "': expected key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json patch = value;
  std::string rest = key;
  std::vector<std::string> parts;
  for (std::size_t pos; (pos = rest.find('.')) != std::string::npos; rest = rest.substr(pos + 1)) {
    parts.push_back(rest.substr(0, pos));
  }
  parts.push_back(rest);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
    if (it->empty()) throw Error(ErrorKind::ConfigInvalid, "override '" + key + "': empty path segment");
    patch = json{{*it, patch}};
  }
  merge_config(config, patch);
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot read " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::ConfigInvalid, path.string() + ": not valid JSON");
  return j;
}

// ---------------------------------------------------------------------------
// Runs

fs::path make_run_directory(const fs::path& root, const std::string& scenario, const std::optional<std::string>& stamp) {
  try {
    const fs::path base = root / scenario;
    fs::create_directories(base);
    const std::string name = stamp ? *stamp : utc_stamp();
    fs::path dir = base / name;
    for (int k = 1; fs::exists(dir); ++k) dir = base / (name + "-" + std::to_string(k));
    fs::create_directory(dir);
    const fs::path latest = base / "latest";
    if (fs::is_symlink(latest) || fs::exists(latest)) fs::remove(latest);
    fs::create_directory_symlink(dir.filename(), latest);
    return dir;
  } catch (const fs::filesystem_error& e) {
    throw Error(ErrorKind::IoFailure, e.what());
  }
}

std::vector<std::string> planned_checks(const std::string& name) { return find_scenario(name).checks; }

RunReport run_scenario(const std::string& name, const json& overrides, const RunOptions& options) {
  const auto& def = find_scenario(name);
  json config = default_config(name);
  merge_config(config, normalize_overrides(config, overrides));
  if (config["scenario"]["name"] != name) throw Error(ErrorKind::ConfigInvalid, "scenario.name: must equal '" + name + "'");
  validate_tolerances(config, "");

  RunReport report;
  report.scenario = name;
  report.seed = seed_of(config);
  report.config = config;

  std::optional<fs::path> dir;
  if (options.out_root) dir = make_run_directory(*options.out_root, name, options.stamp);

  const auto start = std::chrono::steady_clock::now();
  detail::Plan plan(report, def.checks, dir);
  def.run(plan);
  plan.finish();
  report.timings["total"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (dir) {
    report.artifacts.push_back("report.json");
    report.artifacts.push_back("summary.csv");
    report.artifacts.push_back("timings.json");
    export_report(report, "json", *dir / "report.json");
    export_report(report, "csv-summary", *dir / "summary.csv");
    write_text(*dir / "timings.json", json(report.timings).dump(2) + "\n");
  }
  return report;
}

namespace detail {

Plan::Plan(RunReport& report, std::vector<std::string> names, std::optional<fs::path> dir)
    : report_(report), names_(std::move(names)), dir_(std::move(dir)), rng_(report.seed) {}

double Plan::num(const std::string& key) const {
  const auto& a = config()["analysis"];
  if (!a.contains(key) || !a[key].is_number()) throw Error(ErrorKind::ConfigInvalid, "analysis." + key + ": expected a number");
  return a[key].get<double>();
}

std::size_t Plan::count(const std::string& key) const {
  const auto& a = config()["analysis"];
  if (!a.contains(key) || !a[key].is_number_integer() || a[key].get<std::int64_t>() < 0) {
    throw Error(ErrorKind::ConfigInvalid, "analysis." + key + ": expected a non-negative integer");
  }
  return a[key].get<std::size_t>();
}

std::vector<double> Plan::list(const std::string& key) const {
  const auto& a = config()["analysis"];
  if (!a.contains(key) || !a[key].is_array()) throw Error(ErrorKind::ConfigInvalid, "analysis." + key + ": expected an array");
  std::vector<double> v;
  for (const auto& x : a[key]) {
    if (!x.is_number()) throw Error(ErrorKind::ConfigInvalid, "analysis." + key + ": expected numbers");
    v.push_back(x.get<double>());
  }
  return v;
}

const DualMetric& Plan::metric() {
  if (metric_error_) throw *metric_error_;
  if (!metric_) {
    try {
      metric_ = DualMetric::from_json(config()["metric"], profile());
    } catch (const Error& e) {
      metric_error_ = e;
      throw;
    }
  }
  return *metric_;
}

RotationalProfile Plan::profile() const { return RotationalProfile::from_json(config()["profile"]); }

IntegratorConfig Plan::integrator() const { return IntegratorConfig::from_json(config()["integrator"]); }

IntegratorConfig Plan::long_integrator() const {
  IntegratorConfig c = integrator();
  c.projection = true;
  return c;
}

SectionSpec Plan::section() const { return SectionSpec::from_json(config()["section"]); }

void Plan::check(const std::string& name, const std::string& relation, double tolerance,
                 const std::function<Measured()>& body) {
  if (std::find(names_.begin(), names_.end(), name) == names_.end()) {
    throw Error(ErrorKind::InvalidArgument, "check '" + name + "' is not in the plan");
  }
  for (const auto& c : report_.checks) {
    if (c.name == name) throw Error(ErrorKind::InvalidArgument, "check '" + name + "' ran twice");
  }
  Check c{name, false, std::numeric_limits<double>::quiet_NaN(), tolerance, relation, {}};
  const auto start = std::chrono::steady_clock::now();
  try {
    const Measured m = body();
    c.measured = m.value;
    c.note = m.note;
    c.passed = compare(m.value, relation, tolerance);
  } catch (const std::exception& e) {
    c.note = e.what();
  }
  report_.timings[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report_.checks.push_back(std::move(c));
}

void Plan::write(const std::string& file, const std::string& content) {
  if (!dir_) return;
  write_text(*dir_ / file, content);
  report_.artifacts.push_back(file);
}

void Plan::finish() {
  std::vector<Check> ordered;
  for (const auto& n : names_) {
    const auto it = std::find_if(report_.checks.begin(), report_.checks.end(), [&](const Check& c) { return c.name == n; });
    if (it != report_.checks.end()) {
      ordered.push_back(*it);
    } else {
      ordered.push_back({n, false, std::numeric_limits<double>::quiet_NaN(), 0.0, "<=", "not executed"});
    }
  }
  report_.checks = std::move(ordered);
}

}  // namespace detail

}  // namespace finsler
