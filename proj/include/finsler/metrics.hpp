#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "finsler/profiles.hpp"

namespace finsler {

/// A covector xi = xi1 dx1 + xi2 dx2 over the base point (x1, x2). The base
/// coordinates are kept as lifts to R^2; reduce with `Domain`.
struct CotangentPoint {
  double x1 = 0.0;
  double x2 = 0.0;
  double xi1 = 0.0;
  double xi2 = 0.0;

  friend bool operator==(const CotangentPoint&, const CotangentPoint&) = default;
};

/// Partial derivatives (dH/dx1, dH/dx2, dH/dxi1, dH/dxi2).
struct PhaseGradient {
  double x1 = 0.0;
  double x2 = 0.0;
  double xi1 = 0.0;
  double xi2 = 0.0;
};

/// The fundamental domain R/2piZ x (R or R/LZ) of a rotational metric.
struct Domain {
  double period_x1 = kTwoPi;
  std::optional<double> period_x2;

  static Domain of(const RotationalProfile& profile) { return Domain{kTwoPi, profile.period()}; }

  /// Representative of p with x1 in [0, 2pi) and, on the torus, x2 in [0, L).
  CotangentPoint reduce(CotangentPoint p) const noexcept;
  /// Euclidean distance in (x, xi) with the base difference taken modulo the
  /// lattice.
  double distance(const CotangentPoint& a, const CotangentPoint& b) const noexcept;
};

/// A positively 1-homogeneous Hamiltonian on the cotangent bundle of the
/// cylinder: H0 = |xi| / f(x2), H1 = xi1, the Katok family
/// H_alpha = H0 + alpha * chi * eta(H1/H0) * H1, or its reversibilization.
/// Immutable after construction.
class DualMetric {
 public:
  enum class Kind { Rotational, Angular, Katok, Reversibilized };

  static DualMetric rotational(RotationalProfile profile);
  static DualMetric angular();

  /// Throws ZeroCovector for xi = 0 (except for the angular kind).
  double operator()(const CotangentPoint& p) const;
  PhaseGradient gradient(const CotangentPoint& p) const;

  Kind kind() const noexcept { return kind_; }
  /// Null for the angular kind.
  const RotationalProfile* profile() const noexcept { return profile_ ? &*profile_ : nullptr; }
  const CutoffPair* cutoffs() const noexcept { return cutoffs_ ? &*cutoffs_ : nullptr; }
  double alpha() const noexcept { return alpha_; }

  nlohmann::json to_json() const;
  /// Accepts {"kind": "rotational" | "angular" | "katok", "profile": ...,
  /// "a0", "a1", "b", "alpha", "reversible"}. When the object has no
  /// "profile" key, `fallback_profile` is used.
  static DualMetric from_json(const nlohmann::json& j, const std::optional<RotationalProfile>& fallback_profile = {});

 private:
  friend DualMetric reversibilize(const DualMetric&);
  friend DualMetric katok_unchecked(const RotationalProfile&, const CutoffPair&, double);

  DualMetric() = default;

  double eval_katok(const CotangentPoint& p) const;
  PhaseGradient gradient_katok(const CotangentPoint& p) const;

  Kind kind_ = Kind::Rotational;
  std::optional<RotationalProfile> profile_;
  std::optional<CutoffPair> cutoffs_;
  double alpha_ = 0.0;
};

/// Default Katok coupling: a small irrational multiple 0.05 * (sqrt 5 - 1)/2.
inline const double kDefaultAlpha = 0.05 * (std::sqrt(5.0) - 1.0) / 2.0;

double eval_H0(const RotationalProfile& profile, const CotangentPoint& p);
double eval_H1(const CotangentPoint& p) noexcept;

/// Membership in U_a = { |x2| <= a, H1/H0 >= f0(a) }.
bool cone_membership(const RotationalProfile& profile, double a, const CotangentPoint& p);

/// H_alpha without the convexity gate; used by the alpha scan.
DualMetric katok_unchecked(const RotationalProfile& profile, const CutoffPair& cutoffs, double alpha);

/// H_alpha = H0 + alpha * psi. Requires f = f0 on [-b, b]; runs the sampled
/// fiber convexity gate and throws ConvexityLost when it fails.
DualMetric build_katok_family(const RotationalProfile& profile, const CutoffPair& cutoffs, double alpha);

/// H'(xi) = H(xi) for xi1 >= 0 and H(-xi) otherwise. Throws SeamMismatch if
/// H is not even on sampled covectors with xi1 = 0.
DualMetric reversibilize(const DualMetric& katok);

struct SeamJetReport {
  /// Largest |d^k A - d^k B| over samples and orders k <= max_order, where
  /// A(xi) = H(xi) and B(xi) = H(-xi) are the two branches glued on
  /// {xi1 = 0} and d^k is the central difference in xi1 of step h.
  double max_mismatch = 0.0;
  int worst_order = 0;
  CotangentPoint worst{};
};

/// Jet comparison of the branches of a reversibilized Katok metric across
/// the seam, over heights in [-2b, 2b] and unit-scale xi2 of both signs.
SeamJetReport seam_jet_check(const DualMetric& reversible, double h = 1e-3, int max_order = 3);

struct ConvexityReport {
  double min_eigenvalue = 0.0;
  CotangentPoint worst{};
  std::size_t samples = 0;
  bool passed = false;
};

/// Minimum eigenvalue of the central-difference Hessian of H^2/2 in the
/// fiber over the samples; passes iff it is positive.
ConvexityReport fiber_convexity_check(const DualMetric& metric, std::span<const CotangentPoint> samples);

/// Unit covectors (cos t, sin t) over a uniform grid of heights and angles.
std::vector<CotangentPoint> fiber_sample_grid(double x2_lo, double x2_hi, int n_heights, int n_angles);

/// Largest alpha in [0, alpha_max] for which the Katok family passes the
/// convexity scan on `samples`, located by bisection to `tol`.
double critical_alpha(const RotationalProfile& profile, const CutoffPair& cutoffs,
                      std::span<const CotangentPoint> samples, double alpha_max = 4.0, double tol = 1e-4);

/// dH/dxi, the base velocity of the Hamiltonian flow.
std::array<double, 2> legendre_velocity(const DualMetric& metric, const CotangentPoint& p);

}  // namespace finsler
