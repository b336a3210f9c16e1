#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include <json.hpp>

#include "finsler/dop853.hpp"
#include "finsler/metrics.hpp"

namespace finsler {

struct IntegratorConfig {
  double rel_tol = 1e-12;
  double abs_tol = 1e-12;
  double max_step = 0.5;
  double invariant_drift_tol = 1e-8;
  /// Step to every checkpoint and pull H back to its initial level by
  /// correcting xi2 (xi1 is conserved exactly by the scheme).
  bool projection = false;
  /// Spacing of recorded states and invariant checkpoints.
  double checkpoint_interval = 0.1;
  /// |x2| cap for runs on the round-sphere profile.
  double pole_cap = 30.0;
  std::size_t max_steps = 5'000'000;

  /// Throws ConfigInvalid naming the offending key.
  void validate() const;
  nlohmann::json to_json() const;
  static IntegratorConfig from_json(const nlohmann::json& j);
};

/// (dH/dxi, -dH/dx) as a 4-vector ordered (x1, x2, xi1, xi2).
std::array<double, 4> hamiltonian_vector_field(const DualMetric& metric, const CotangentPoint& p);

inline std::array<double, 4> to_array(const CotangentPoint& p) { return {p.x1, p.x2, p.xi1, p.xi2}; }
inline CotangentPoint to_point(const std::array<double, 4>& y) { return {y[0], y[1], y[2], y[3]}; }

/// Live integration of one orbit with raw (unreduced) base coordinates, so
/// x1 and x2 are continuous lifts. Enforces the pole cap on every step.
class FlowIntegrator {
 public:
  FlowIntegrator(const DualMetric& metric, const IntegratorConfig& config);

  void reset(double t0, const CotangentPoint& p0);
  /// One accepted step toward t_end.
  void step(double t_end);
  /// Steps until time() == t_end.
  void advance(double t_end);

  double time() const noexcept { return rk_.time(); }
  double previous_time() const noexcept { return rk_.previous_time(); }
  CotangentPoint state() const { return to_point(rk_.state()); }
  CotangentPoint previous_state() const { return to_point(rk_.previous_state()); }
  /// Dense output on [previous_time(), time()].
  CotangentPoint dense(double t) const { return to_point(rk_.dense(t)); }
  const DualMetric& metric() const noexcept { return *metric_; }

 private:
  void check_pole() const;

  const DualMetric* metric_;
  IntegratorConfig config_;
  bool sphere_;
  Dop853<4> rk_;
};

struct InvariantSample {
  double t;
  double H;
  double H1;
};

/// States are reduced to the fundamental domain; lifted_base holds the
/// continuous lift of (x1, x2) at the same times.
struct OrbitTrace {
  std::vector<double> times;
  std::vector<CotangentPoint> states;
  std::vector<std::array<double, 2>> lifted_base;
  std::vector<InvariantSample> invariant_log;
  Domain domain;
  double max_drift_H = 0.0;
  double max_drift_H1 = 0.0;

  std::size_t size() const noexcept { return times.size(); }
};

/// Integrates from p0 over [0, T] (T > 0), recording a state every
/// checkpoint interval and at T. Throws PoleProximity, InvariantDrift or
/// StepFailure. Drift of H is relative to H(p0); drift of H1 is measured
/// relative to max(|H1(p0)|, H(p0)).
OrbitTrace integrate_orbit(const DualMetric& metric, const CotangentPoint& p0, double T,
                           const IntegratorConfig& config = {});

/// Endpoint of the flow for time t (either sign), unreduced. The angular
/// metric is flowed in closed form.
CotangentPoint integrate_state(const DualMetric& metric, const CotangentPoint& p0, double t,
                               const IntegratorConfig& config = {});

/// phi_{H0}^t applied to (x1 + alpha t, x2, xi): the flow of H0 + alpha H1
/// as a composition of commuting flows. Throws ConeViolation if p0 or any
/// recorded state of its H0-orbit leaves U_{a0}.
CotangentPoint compose_commuting_flows(const RotationalProfile& profile, const CutoffPair& cutoffs, double alpha,
                                       const CotangentPoint& p0, double t, const IntegratorConfig& config = {});

struct PeriodicityReport {
  double max_distance = 0.0;
  std::size_t worst = 0;
  std::vector<double> distances;
};

/// Flows every sample for time T and reports the distance (modulo the base
/// lattice) between start and end.
PeriodicityReport check_periodicity(const DualMetric& metric, const std::vector<CotangentPoint>& samples, double T,
                                    const IntegratorConfig& config = {});

/// Unwraps the reduced base points of the trace across the lattice. Throws
/// LiftAmbiguity when consecutive lifted points differ by half a period or
/// more, since the unwrapping is then not determined by the samples.
std::vector<std::array<double, 2>> lift_to_cover(const OrbitTrace& trace);

/// CSV with header t,x1,x2,xi1,xi2,lift_x1,lift_x2,H,H1.
void write_orbit_csv(std::ostream& out, const OrbitTrace& trace, const DualMetric& metric);

}  // namespace finsler
