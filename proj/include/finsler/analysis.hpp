#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "finsler/error.hpp"
#include "finsler/flow.hpp"
#include "finsler/sections.hpp"

namespace finsler {

// ---------------------------------------------------------------------------
// Rotation numbers

struct RotationEstimate {
  double value = 0.0;
  /// value mod 1, in [0, 1).
  double reduced = 0.0;
  std::size_t n = 0;
  /// Spread of D_j - j * value over j <= n, divided by n, where D_j is the
  /// partial lifted displacement.
  double error_bound = 0.0;

  nlohmann::json to_json() const;
};

/// Estimate from per-iterate lift displacements.
RotationEstimate rotation_from_displacements(const std::vector<double>& displacements);

/// Iterates `map` n times from x0. `map` returns (image, lift displacement).
/// Any Error thrown by the map is rethrown as MapFailure naming the iterate.
template <class State, class Map>
RotationEstimate rotation_number(Map&& map, State x0, std::size_t n) {
  if (n < 10) throw Error(ErrorKind::InvalidArgument, "rotation_number needs n >= 10");
  std::vector<double> d;
  d.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    try {
      auto [next, disp] = map(x0);
      d.push_back(disp);
      x0 = std::move(next);
    } catch (const Error& e) {
      throw Error(ErrorKind::MapFailure, "iterate " + std::to_string(i) + ": " + e.what());
    }
  }
  return rotation_from_displacements(d);
}

/// The first-return map of a section as a lifted map on states.
std::function<std::pair<CotangentPoint, double>(const CotangentPoint&)> section_lifted_map(
    const DualMetric& metric, const SectionSpec& spec, const IntegratorConfig& config = {});

// ---------------------------------------------------------------------------
// Asymptotic direction and deviation

using LiftedPath = std::vector<std::array<double, 2>>;

struct DirectionEstimate {
  std::array<double, 2> direction{1.0, 0.0};
  /// Largest angle between the chord directions over [0, T/4], [0, T/2]
  /// and [0, T].
  double residual = 0.0;

  nlohmann::json to_json() const;
};

/// Normalized endpoint chord of the lifted path. Throws NotConverged when
/// the residual exceeds `tol`, InvalidArgument for paths shorter than 4
/// points or with vanishing chord.
DirectionEstimate asymptotic_direction(const LiftedPath& path, double tol = 1e-2);

struct DeviationReport {
  double sup_distance = 0.0;
  std::size_t argmax = 0;

  nlohmann::json to_json() const;
};

/// Sup over the path of the distance to the line through path[0] with
/// direction rho (normalized internally). `count` limits the prefix used.
DeviationReport bounded_deviation(const LiftedPath& path, std::array<double, 2> rho,
                                  std::optional<std::size_t> count = {});

// ---------------------------------------------------------------------------
// Topological entropy from separated sets

/// N orbit segments of length steps + 1 in a phase space of dimension dim,
/// stored row-major as data[(i * (steps + 1) + t) * dim + k], with a
/// distance on the phase space.
struct OrbitCloud {
  std::size_t n = 0;
  std::size_t steps = 0;
  std::size_t dim = 0;
  std::vector<double> data;
  std::function<double(const double*, const double*)> distance;

  const double* at(std::size_t i, std::size_t t) const { return data.data() + (i * (steps + 1) + t) * dim; }
};

/// Samples x_i and iterates them with `map` (in place on a dim-vector).
OrbitCloud make_orbit_cloud(const std::vector<std::vector<double>>& points, std::size_t steps,
                            const std::function<void(std::vector<double>&)>& map,
                            std::function<double(const double*, const double*)> distance);

struct EntropyRow {
  std::size_t T = 0;
  double eps = 0.0;
  std::size_t s = 0;
};

struct EntropyEstimate {
  std::vector<EntropyRow> table;
  std::vector<double> eps;
  /// Tail slope of log s against T for each eps (NaN when unstable).
  std::vector<double> slopes;
  std::vector<std::size_t> fit_points;
  double value = 0.0;
  double value_eps = 0.0;

  std::size_t s(std::size_t T, double eps) const;
  nlohmann::json to_json() const;
};

struct EntropyOptions {
  /// Counts above this fraction of the cloud are treated as saturated: a
  /// finite cloud undercounts once Bowen balls hold few cloud points.
  double saturation = 1.0 / 16.0;
  /// A slope needs at least this many unsaturated T values in its tail.
  std::size_t min_fit_points = 3;
  /// T values below this are left out of the fit (the step from T = 0 is a
  /// transient of the packing, not of the dynamics).
  std::size_t burn_in = 1;
};

/// Greedy maximal (T, eps)-separated subsets with a fixed insertion order
/// (cloud index). Sets are nested: S(T, eps) extends S(T - 1, eps) or
/// S(T, eps') for the next larger eps', whichever yields more points, so s
/// is nondecreasing in T and nonincreasing in eps. T values must be
/// increasing and <= cloud.steps; eps values are processed in decreasing
/// order. Throws InsufficientCloud if no eps yields a stable slope.
EntropyEstimate entropy_separated_sets(const OrbitCloud& cloud, std::vector<std::size_t> T_list,
                                       std::vector<double> eps_list, const EntropyOptions& options = {});

/// Indices of a greedy maximal (T, eps)-separated set; exposed for
/// post-hoc maximality checks.
std::vector<std::size_t> separated_set(const OrbitCloud& cloud, std::size_t T, double eps);
bool is_separated(const OrbitCloud& cloud, std::size_t i, std::size_t j, std::size_t T, double eps);

/// CSV with header T,eps,s,slope.
void write_entropy_csv(std::ostream& out, const EntropyEstimate& e);

// ---------------------------------------------------------------------------
// Invariant graphs

struct FiberSample {
  double x1 = 0.0;
  double x2 = 0.0;
  /// Fiber coordinate, an angle (the covector direction).
  double fiber = 0.0;
};

struct GraphBinning {
  int n1 = 32;
  int n2 = 32;
  double period1 = kTwoPi;
  double period2 = 4.0;
  double origin2 = 0.0;
  /// Circular gap that separates two fiber clusters.
  double cluster_tol = 0.5;
};

struct GraphReport {
  bool is_graph = false;
  /// Largest second-largest circular gap over bins; above cluster_tol the
  /// bin holds two or more clusters.
  double max_multivaluedness = 0.0;
  double lipschitz_estimate = 0.0;
  double deviation_D = 0.0;
  std::size_t occupied_bins = 0;
  std::size_t multivalued_bins = 0;

  nlohmann::json to_json() const;
};

/// Bins samples by base point and tests single-valuedness of the fiber.
/// If `orbit` is given, deviation_D is its bounded_deviation along its own
/// asymptotic direction. Throws EmptySample.
GraphReport invariant_graph_test(const std::vector<FiberSample>& samples, const GraphBinning& binning,
                                 const LiftedPath* orbit = nullptr);

std::vector<FiberSample> fiber_samples(const OrbitTrace& trace);

// ---------------------------------------------------------------------------
// Elliptic tubes

/// E = { c_lo < xi1 < c_hi } on the unit level of the metric.
struct TubeSpec {
  double c_lo = 0.0;
  double c_hi = 1.0;

  double gap(double xi1) const noexcept { return std::min(xi1 - c_lo, c_hi - xi1); }
  bool contains(double xi1) const noexcept { return c_lo < xi1 && xi1 < c_hi; }
};

struct WitnessBall {
  CotangentPoint center{};
  double radius = 0.0;
};

struct TubeOrbitRecord {
  double xi1 = 0.0;
  /// Conservation gap at the start: min(xi1 - c_lo, c_hi - xi1).
  double gap = 0.0;
  /// min over the orbit of the xi1-distance to {c_lo, c_hi}.
  double min_boundary_distance = 0.0;
};

struct WitnessRecord {
  WitnessBall ball{};
  std::size_t orbit = 0;
  /// min over the orbit of (phase distance to the centre) - radius.
  double distance = 0.0;
  bool hole = false;
};

struct TubeReport {
  std::vector<double> eps_grid;
  std::vector<double> boundary_fraction;
  /// Fraction of uniform chart measure of E within eps of the boundary.
  std::vector<double> collar_fraction;
  std::vector<TubeOrbitRecord> orbits;
  std::vector<WitnessRecord> witnesses;
  std::size_t failures = 0;

  nlohmann::json to_json() const;
};

/// Unit-level state over (x1, x2) with xi1 = c and xi2 >= 0. Throws
/// InvalidArgument when c is not attained on that fiber.
CotangentPoint clairaut_state(const DualMetric& metric, double x1, double x2, double c);

/// Tube of trapped states: c_lo = min over x2 of the largest xi1 on the unit
/// fiber (the separatrix value), c_hi = max over x2 of the same quantity,
/// from an n x n grid over one period of x2 and the fiber angle.
TubeSpec clairaut_tube(const DualMetric& metric, int n = 512);

/// Uniform (x2, covector angle) chart samples of the unit level inside E,
/// by rejection; x1 uniform in [0, 2pi).
std::vector<CotangentPoint> sample_tube(const DualMetric& metric, const TubeSpec& tube, std::size_t count,
                                        std::uint64_t seed);

/// Ratio of chart measure of { p in E : dist_xi1(p, boundary) < eps } to
/// chart measure of E, by midpoint quadrature on n x n cells over one
/// period of x2 (or [-x2_span, x2_span] without a period).
double tube_collar_fraction(const DualMetric& metric, const TubeSpec& tube, double eps, int n = 1024,
                            double x2_span = 3.0);

/// Integrates every ensemble state for time T and every witness orbit for
/// time T_witness (in parallel), measures boundary distances and witness
/// distances. Failed orbits are counted and excluded.
TubeReport tube_diagnostics(const DualMetric& metric, const TubeSpec& tube, const std::vector<CotangentPoint>& ensemble,
                            double T, const std::vector<double>& eps_grid,
                            const std::vector<std::pair<CotangentPoint, WitnessBall>>& witnesses, double T_witness,
                            const IntegratorConfig& config = {});

}  // namespace finsler
