#include "finsler/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "finsler/error.hpp"

namespace finsler {

namespace {

double wrap_difference(double d, double period) noexcept { return d - period * std::round(d / period); }

// The cutoffs live near x2 = 0 of the fundamental domain; on the torus they
// repeat with the profile.
double centred(const RotationalProfile& f, double x2) noexcept {
  const auto L = f.period();
  return L ? wrap_difference(x2, *L) : x2;
}

void require_nonzero(const CotangentPoint& p) {
  if (p.xi1 == 0.0 && p.xi2 == 0.0) {
    throw Error(ErrorKind::ZeroCovector, "covector must be nonzero");
  }
}

CotangentPoint negated(const CotangentPoint& p) noexcept { return {p.x1, p.x2, -p.xi1, -p.xi2}; }

// The ratio H1/H0 written as xi1 f / |xi| so that it equals f exactly for
// xi proportional to +dx1.
double cone_ratio(double f, const CotangentPoint& p) noexcept { return p.xi1 * f / std::hypot(p.xi1, p.xi2); }

}  // namespace

CotangentPoint Domain::reduce(CotangentPoint p) const noexcept {
  p.x1 -= period_x1 * std::floor(p.x1 / period_x1);
  if (p.x1 >= period_x1) p.x1 = 0.0;
  if (period_x2) {
    p.x2 -= *period_x2 * std::floor(p.x2 / *period_x2);
    if (p.x2 >= *period_x2) p.x2 = 0.0;
  }
  return p;
}

double Domain::distance(const CotangentPoint& a, const CotangentPoint& b) const noexcept {
  const double d1 = wrap_difference(a.x1 - b.x1, period_x1);
  const double d2 = period_x2 ? wrap_difference(a.x2 - b.x2, *period_x2) : a.x2 - b.x2;
  const double d3 = a.xi1 - b.xi1;
  const double d4 = a.xi2 - b.xi2;
  return std::sqrt(d1 * d1 + d2 * d2 + d3 * d3 + d4 * d4);
}

double eval_H0(const RotationalProfile& profile, const CotangentPoint& p) {
  require_nonzero(p);
  return std::hypot(p.xi1, p.xi2) / profile.value(p.x2);
}

double eval_H1(const CotangentPoint& p) noexcept { return p.xi1; }

bool cone_membership(const RotationalProfile& profile, double a, const CotangentPoint& p) {
  require_nonzero(p);
  if (!(a > 0.0)) throw Error(ErrorKind::InvalidArgument, "cone parameter a must be positive");
  if (std::abs(centred(profile, p.x2)) > a) return false;
  return cone_ratio(profile.value(p.x2), p) >= eval_f0(a);
}

DualMetric DualMetric::rotational(RotationalProfile profile) {
  DualMetric m;
  m.kind_ = Kind::Rotational;
  m.profile_ = profile;
  return m;
}

DualMetric DualMetric::angular() {
  DualMetric m;
  m.kind_ = Kind::Angular;
  return m;
}

double DualMetric::eval_katok(const CotangentPoint& p) const {
  const double f = profile_->value(p.x2);
  const double n = std::hypot(p.xi1, p.xi2);
  const double h0 = n / f;
  if (cutoffs_->chi(centred(*profile_, p.x2)) == 0.0) return h0;
  const double eta = cutoffs_->eta()(cone_ratio(f, p));
  if (eta == 0.0) return h0;
  return h0 + alpha_ * (eta * p.xi1);
}

PhaseGradient DualMetric::gradient_katok(const CotangentPoint& p) const {
  const double f = profile_->value(p.x2);
  const double df = profile_->derivative(p.x2);
  const double n = std::hypot(p.xi1, p.xi2);
  PhaseGradient g{0.0, -n * df / (f * f), p.xi1 / (f * n), p.xi2 / (f * n)};
  if (cutoffs_->chi(centred(*profile_, p.x2)) == 0.0) return g;
  const double r = cone_ratio(f, p);
  const double eta = cutoffs_->eta()(r);
  const double deta = cutoffs_->eta().derivative(r);
  if (eta == 0.0 && deta == 0.0) return g;
  const double n3 = n * n * n;
  const double dr_dxi1 = f * p.xi2 * p.xi2 / n3;
  const double dr_dxi2 = -f * p.xi1 * p.xi2 / n3;
  const double dr_dx2 = p.xi1 * df / n;
  g.x2 += alpha_ * deta * dr_dx2 * p.xi1;
  g.xi1 += alpha_ * (deta * dr_dxi1 * p.xi1 + eta);
  g.xi2 += alpha_ * deta * dr_dxi2 * p.xi1;
  return g;
}

double DualMetric::operator()(const CotangentPoint& p) const {
  switch (kind_) {
    case Kind::Angular:
      return p.xi1;
    case Kind::Rotational:
      return eval_H0(*profile_, p);
    case Kind::Katok:
      require_nonzero(p);
      return eval_katok(p);
    case Kind::Reversibilized:
      require_nonzero(p);
      return p.xi1 >= 0.0 ? eval_katok(p) : eval_katok(negated(p));
  }
  return 0.0;
}

PhaseGradient DualMetric::gradient(const CotangentPoint& p) const {
  switch (kind_) {
    case Kind::Angular:
      return {0.0, 0.0, 1.0, 0.0};
    case Kind::Rotational: {
      require_nonzero(p);
      const double f = profile_->value(p.x2);
      const double n = std::hypot(p.xi1, p.xi2);
      return {0.0, -n * profile_->derivative(p.x2) / (f * f), p.xi1 / (f * n), p.xi2 / (f * n)};
    }
    case Kind::Katok:
      require_nonzero(p);
      return gradient_katok(p);
    case Kind::Reversibilized: {
      require_nonzero(p);
      if (p.xi1 >= 0.0) return gradient_katok(p);
      const PhaseGradient g = gradient_katok(negated(p));
      return {g.x1, g.x2, -g.xi1, -g.xi2};
    }
  }
  return {};
}

nlohmann::json DualMetric::to_json() const {
  switch (kind_) {
    case Kind::Angular:
      return {{"kind", "angular"}};
    case Kind::Rotational:
      return {{"kind", "rotational"}, {"profile", profile_->to_json()}};
    case Kind::Katok:
    case Kind::Reversibilized:
      return {{"kind", "katok"},
              {"profile", profile_->to_json()},
              {"a0", cutoffs_->a0},
              {"a1", cutoffs_->a1},
              {"b", cutoffs_->b},
              {"alpha", alpha_},
              {"reversible", kind_ == Kind::Reversibilized}};
  }
  return {};
}

DualMetric DualMetric::from_json(const nlohmann::json& j, const std::optional<RotationalProfile>& fallback_profile) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    throw Error(ErrorKind::ConfigInvalid, "metric.kind: expected a string");
  }
  const auto kind = j["kind"].get<std::string>();
  if (kind == "angular") return angular();
  std::optional<RotationalProfile> profile = fallback_profile;
  if (j.contains("profile")) profile = RotationalProfile::from_json(j["profile"]);
  if (!profile) throw Error(ErrorKind::ConfigInvalid, "metric.profile: missing");
  if (kind == "rotational") return rotational(*profile);
  if (kind != "katok") throw Error(ErrorKind::ConfigInvalid, "metric.kind: unknown kind '" + kind + "'");
  auto number = [&j](const char* key, std::optional<double> fallback = {}) {
    if (!j.contains(key)) {
      if (fallback) return *fallback;
      throw Error(ErrorKind::ConfigInvalid, std::string("metric.") + key + ": missing");
    }
    if (!j[key].is_number()) throw Error(ErrorKind::ConfigInvalid, std::string("metric.") + key + ": expected a number");
    return j[key].get<double>();
  };
  const CutoffPair cutoffs(number("a0"), number("a1"), number("b"));
  DualMetric m = build_katok_family(*profile, cutoffs, number("alpha", kDefaultAlpha));
  if (j.contains("reversible")) {
    if (!j["reversible"].is_boolean()) throw Error(ErrorKind::ConfigInvalid, "metric.reversible: expected a boolean");
    if (j["reversible"].get<bool>()) m = reversibilize(m);
  }
  return m;
}

ConvexityReport fiber_convexity_check(const DualMetric& metric, std::span<const CotangentPoint> samples) {
  ConvexityReport report;
  report.min_eigenvalue = std::numeric_limits<double>::infinity();
  report.samples = samples.size();
  for (const auto& p : samples) {
    const double scale = std::hypot(p.xi1, p.xi2);
    if (scale == 0.0) throw Error(ErrorKind::ZeroCovector, "convexity samples must avoid xi = 0");
    const double d = 1e-4 * scale;
    auto q = [&](double e1, double e2) {
      const double h = metric({p.x1, p.x2, p.xi1 + e1 * d, p.xi2 + e2 * d});
      return 0.5 * h * h;
    };
    const double q0 = q(0, 0);
    const double q11 = (q(1, 0) - 2.0 * q0 + q(-1, 0)) / (d * d);
    const double q22 = (q(0, 1) - 2.0 * q0 + q(0, -1)) / (d * d);
    const double q12 = (q(1, 1) - q(1, -1) - q(-1, 1) + q(-1, -1)) / (4.0 * d * d);
    // Smaller eigenvalue of the symmetric 2x2 Hessian; degree-0 homogeneous,
    // so samples of any size compare.
    const double mean = 0.5 * (q11 + q22);
    const double rad = std::hypot(0.5 * (q11 - q22), q12);
    const double lambda = mean - rad;
    if (lambda < report.min_eigenvalue) {
      report.min_eigenvalue = lambda;
      report.worst = p;
    }
  }
  report.passed = samples.empty() || report.min_eigenvalue > 0.0;
  return report;
}

std::vector<CotangentPoint> fiber_sample_grid(double x2_lo, double x2_hi, int n_heights, int n_angles) {
  std::vector<CotangentPoint> out;
  out.reserve(static_cast<std::size_t>(n_heights) * n_angles);
  for (int i = 0; i < n_heights; ++i) {
    const double x2 = n_heights == 1 ? x2_lo : x2_lo + (x2_hi - x2_lo) * i / (n_heights - 1);
    for (int k = 0; k < n_angles; ++k) {
      const double t = kTwoPi * (k + 0.5) / n_angles;
      out.push_back({0.0, x2, std::cos(t), std::sin(t)});
    }
  }
  return out;
}

namespace {

// Covectors over the heights where psi can be nonzero, with a fine angular
// resolution around +dx1 where eta varies.
std::vector<CotangentPoint> default_convexity_samples(const CutoffPair& cutoffs) {
  return fiber_sample_grid(-cutoffs.a1, cutoffs.a1, 41, 360);
}

}  // namespace

DualMetric build_katok_family(const RotationalProfile& profile, const CutoffPair& cutoffs, double alpha) {
  for (int i = 0; i <= 256; ++i) {
    const double x2 = -cutoffs.b + 2.0 * cutoffs.b * i / 256;
    if (std::abs(profile.value(x2) - eval_f0(x2)) > 1e-14) {
      throw Error(ErrorKind::InvalidArgument, "profile must coincide with f0 on [-b, b]");
    }
  }
  DualMetric m = katok_unchecked(profile, cutoffs, alpha);
  if (alpha != 0.0) {
    const auto samples = default_convexity_samples(cutoffs);
    const auto report = fiber_convexity_check(m, samples);
    if (!report.passed) {
      throw Error(ErrorKind::ConvexityLost,
                  "alpha = " + std::to_string(alpha) + " (min eigenvalue " + std::to_string(report.min_eigenvalue) + ")");
    }
  }
  return m;
}

DualMetric katok_unchecked(const RotationalProfile& profile, const CutoffPair& cutoffs, double alpha) {
  DualMetric m;
  m.kind_ = DualMetric::Kind::Katok;
  m.profile_ = profile;
  m.cutoffs_ = cutoffs;
  m.alpha_ = alpha;
  return m;
}

DualMetric reversibilize(const DualMetric& katok) {
  if (katok.kind() == DualMetric::Kind::Reversibilized) return katok;
  if (katok.kind() != DualMetric::Kind::Katok) {
    throw Error(ErrorKind::InvalidArgument, "reversibilize expects a Katok metric");
  }
  // H must be even across {xi1 = 0}; it equals H0 there.
  for (int i = 0; i <= 64; ++i) {
    const double x2 = -2.0 * katok.cutoffs()->b + 4.0 * katok.cutoffs()->b * i / 64;
    for (const double xi2 : {0.25, 1.0, 3.0}) {
      const CotangentPoint p{0.0, x2, 0.0, xi2};
      if (std::abs(katok(p) - katok(negated(p))) > 1e-10) {
        throw Error(ErrorKind::SeamMismatch, "H(xi) != H(-xi) on xi1 = 0 at x2 = " + std::to_string(x2));
      }
    }
  }
  DualMetric m = katok;
  m.kind_ = DualMetric::Kind::Reversibilized;
  return m;
}

SeamJetReport seam_jet_check(const DualMetric& reversible, double h, int max_order) {
  if (reversible.kind() != DualMetric::Kind::Reversibilized) {
    throw Error(ErrorKind::InvalidArgument, "seam_jet_check expects a reversibilized metric");
  }
  if (!(h > 0.0) || max_order < 0 || max_order > 3) throw Error(ErrorKind::InvalidArgument, "invalid jet stencil");
  const DualMetric a = katok_unchecked(*reversible.profile(), *reversible.cutoffs(), reversible.alpha());
  // Central difference weights on xi1 = h * {-2, -1, 0, 1, 2}.
  static constexpr double w[4][5] = {{0, 0, 1, 0, 0},
                                     {1.0 / 12, -2.0 / 3, 0, 2.0 / 3, -1.0 / 12},
                                     {-1.0 / 12, 4.0 / 3, -5.0 / 2, 4.0 / 3, -1.0 / 12},
                                     {-0.5, 1, 0, -1, 0.5}};
  SeamJetReport r;
  const double b = reversible.cutoffs()->b;
  for (int i = 0; i <= 64; ++i) {
    const double x2 = -2.0 * b + 4.0 * b * i / 64;
    for (const double xi2 : {-1.5, -0.5, 0.5, 1.5}) {
      double va[5];
      double vb[5];
      for (int j = 0; j < 5; ++j) {
        const CotangentPoint q{0.0, x2, (j - 2) * h, xi2};
        va[j] = a(q);
        vb[j] = a(negated(q));
      }
      for (int k = 0; k <= max_order; ++k) {
        double da = 0.0;
        double db = 0.0;
        for (int j = 0; j < 5; ++j) {
          da += w[k][j] * va[j];
          db += w[k][j] * vb[j];
        }
        const double diff = std::abs(da - db) / std::pow(h, k);
        if (diff > r.max_mismatch) {
          r.max_mismatch = diff;
          r.worst_order = k;
          r.worst = {0.0, x2, 0.0, xi2};
        }
      }
    }
  }
  return r;
}

double critical_alpha(const RotationalProfile& profile, const CutoffPair& cutoffs,
                      std::span<const CotangentPoint> samples, double alpha_max, double tol) {
  auto passes = [&](double alpha) {
    return fiber_convexity_check(katok_unchecked(profile, cutoffs, alpha), samples).passed;
  };
  if (passes(alpha_max)) return alpha_max;
  double lo = 0.0;
  double hi = alpha_max;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (passes(mid) ? lo : hi) = mid;
  }
  return lo;
}

std::array<double, 2> legendre_velocity(const DualMetric& metric, const CotangentPoint& p) {
  require_nonzero(p);
  const PhaseGradient g = metric.gradient(p);
  return {g.xi1, g.xi2};
}

}  // namespace finsler
