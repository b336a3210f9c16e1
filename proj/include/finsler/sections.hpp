#pragma once

#include <array>
#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "finsler/error.hpp"
#include "finsler/flow.hpp"

namespace finsler {

/// A transverse annulus over a closed base curve of the cylinder or torus.
///
///  - EquatorBirkhoff: base {x2 = 0}, crossings with dx2/dt > 0.
///  - MeridianAz: base {x1 = position (mod 2pi)}, crossings with dx1/dt > 0.
///  - ParallelAz: base {x2 = position (mod L)}, crossings with dx2/dt > 0.
///
/// Annulus coordinates (s, u): s is the chart coordinate along the base
/// (x1 for the equator and parallels, x2 for meridians) and u is the
/// euclidean chart angle of the velocity measured from +d/ds toward the
/// crossing normal, so the open annulus is u in (0, pi).
struct SectionSpec {
  enum class Kind { EquatorBirkhoff, MeridianAz, ParallelAz };

  Kind kind = Kind::EquatorBirkhoff;
  double position = 0.0;
  double transversality_tol = 1e-6;
  double max_return_time = 50.0;

  static SectionSpec equator() { return {}; }
  static SectionSpec meridian(double x1) { return {Kind::MeridianAz, x1}; }
  static SectionSpec parallel(double x2) { return {Kind::ParallelAz, x2}; }

  /// Index (0 = x1, 1 = x2) of the coordinate that is constant on the base.
  int normal_axis() const noexcept { return kind == Kind::MeridianAz ? 0 : 1; }
  int tangent_axis() const noexcept { return 1 - normal_axis(); }

  void validate() const;
  nlohmann::json to_json() const;
  static SectionSpec from_json(const nlohmann::json& j);
};

struct AnnulusPoint {
  double s = 0.0;
  double u = 0.0;
};

/// Unit-level state (H = 1) over base coordinate s with velocity angle u.
/// Solves for the covector angle by bisection; the Legendre map of a
/// strictly convex H is a monotone circle map.
CotangentPoint section_state(const DualMetric& metric, const SectionSpec& spec, const AnnulusPoint& a);
/// (s, u) of a state on the section, with s reduced to its period.
AnnulusPoint annulus_coordinates(const DualMetric& metric, const SectionSpec& spec, const CotangentPoint& p);

struct CrossingEvent {
  double t = 0.0;
  /// Raw (lifted) state with the normal coordinate snapped onto the level.
  CotangentPoint state{};
  /// |x_normal - level| before snapping.
  double residual = 0.0;
  /// Normal velocity over speed at the event.
  double transverse_speed = 0.0;
  std::size_t skipped_tangencies = 0;
};

/// First upward crossing of the section strictly after t = 0. Root is
/// refined on the dense output to about 1e-13 in time. Throws
/// NonTransverse when p starts on the section tangentially, NoCrossing
/// after max_return_time.
CrossingEvent detect_crossing(const DualMetric& metric, const SectionSpec& spec, const CotangentPoint& p,
                              const IntegratorConfig& config = {});

struct ReturnSample {
  AnnulusPoint point{};
  AnnulusPoint image{};
  double tau = 0.0;
  /// Lifted displacement of s over one return, in turns of the s period.
  double lift_displacement = 0.0;
  CotangentPoint start{};
  /// Image state reduced to the fundamental domain.
  CotangentPoint end{};
  std::optional<ErrorKind> status;
  std::string message;

  bool ok() const noexcept { return !status; }
};

/// Return from an explicit state on the section. Errors propagate.
ReturnSample first_return_state(const DualMetric& metric, const SectionSpec& spec, const CotangentPoint& p,
                                const IntegratorConfig& config = {});
ReturnSample first_return(const DualMetric& metric, const SectionSpec& spec, const AnnulusPoint& a,
                          const IntegratorConfig& config = {});

struct GridSpec {
  int n_s = 8;
  int n_u = 8;
  double u_min = 0.0;
  double u_max = kPi;
  /// Cell-centred nodes exclude the endpoints; otherwise both are included.
  bool cell_centred = true;

  std::vector<AnnulusPoint> nodes(double s_period) const;
};

/// Return samples over the grid, computed in parallel. Failed points carry
/// their error kind and message; the table never throws.
std::vector<ReturnSample> build_return_map_grid(const DualMetric& metric, const SectionSpec& spec, const GridSpec& grid,
                                                const IntegratorConfig& config = {});

/// CSV with header s,u,s_image,u_image,tau,lift_ds,status.
void write_return_csv(std::ostream& out, const std::vector<ReturnSample>& table);

/// Period of the s coordinate (2pi for x1, L for x2 on the torus, 0 for
/// an unbounded x2).
double s_period(const DualMetric& metric, const SectionSpec& spec);

/// Coordinates (s, xi_s) in which the return map preserves ds ^ dxi_s:
/// on the section the normal coordinate is constant, so the canonical form
/// restricts to the tangential pair.
std::array<double, 2> symplectic_coordinates(const SectionSpec& spec, const CotangentPoint& p);

struct AreaCheck {
  double area_before = 0.0;
  double area_after = 0.0;
  double relative_error = 0.0;
};

/// Area of the (s, u)-rectangle [s0, s0 + ds] x [u0, u0 + du] and of its
/// image, both in the coordinates of symplectic_coordinates, using
/// `per_edge` boundary points per side.
AreaCheck area_preservation_check(const DualMetric& metric, const SectionSpec& spec, const AnnulusPoint& corner,
                                  double ds, double du, int per_edge = 16, const IntegratorConfig& config = {});

struct SmoothDivideOptions {
  /// Highest derivative order in t that the Taylor branch must resolve.
  int order = 2;
  double t_switch = 1e-3;
  /// Node spacing of the interpolation model.
  double step = 0.05;
  /// Nodes per side; the model of G has degree 2 * nodes - 1.
  int nodes = 5;
  double vanish_tol = 1e-12;
};

/// G(x, t) = F(x, t) / t continued across t = 0. Away from zero the
/// quotient is evaluated directly; for |t| <= t_switch G is the polynomial
/// interpolating F(x, t_i) / t_i at t_i = +-step, ..., +-nodes*step, whose
/// derivatives at 0 realize d^k G(x, 0) = d^{k+1} F(x, 0) / (k + 1).
class SmoothQuotient {
 public:
  using Function = std::function<double(double x, double t)>;

  explicit SmoothQuotient(Function F, SmoothDivideOptions options = {});

  /// Throws NotVanishing if |F(x, 0)| > vanish_tol.
  double operator()(double x, double t) const;
  /// d^k G / dt^k at (x, 0) from the model.
  double derivative_at_zero(double x, int k) const;
  /// Taylor coefficients c_j of the model, G(x, t) ~ sum c_j t^j.
  std::vector<double> taylor(double x) const;

  const SmoothDivideOptions& options() const noexcept { return options_; }

 private:
  Function F_;
  SmoothDivideOptions options_;
};

SmoothQuotient smooth_divide(SmoothQuotient::Function F, SmoothDivideOptions options = {});

struct BoundaryExtensionReport {
  double s = 0.0;
  std::vector<double> u;
  std::vector<double> tau;
  /// Value at u = 0 of the least-squares polynomial fit of tau(u).
  double tau_extrapolated = 0.0;
  int fit_degree = 3;
  /// Largest fit residual; small residuals indicate a smooth extension.
  double fit_residual = 0.0;
  /// Root of G(., s, 0) with G = F / r, F = normal coordinate after the flow.
  double tau_root = 0.0;
  /// dG/dtau at the root; positive for an upward crossing.
  double root_slope = 0.0;
};

/// Approaches the boundary {u = 0} at fixed s through the given u values
/// (geometric, decreasing; default 2^-3 ... 2^-10), fits tau and solves
/// G(tau, s, 0) = 0 near the fit. Throws ExtrapolationUnstable if the
/// samples do not approach the boundary or the fit residual exceeds
/// residual_tol.
BoundaryExtensionReport return_time_boundary_extension(const DualMetric& metric, const SectionSpec& spec, double s,
                                                       std::vector<double> u_samples = {},
                                                       double residual_tol = 1e-4,
                                                       const IntegratorConfig& config = {});

}  // namespace finsler
