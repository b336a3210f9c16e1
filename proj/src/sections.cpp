#include "finsler/sections.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "finsler/parallel.hpp"

namespace finsler {

namespace {

double wrap_angle(double a) noexcept { return a - kTwoPi * std::round(a / kTwoPi); }

double coord(const CotangentPoint& p, int axis) noexcept { return axis == 0 ? p.x1 : p.x2; }
double& coord(CotangentPoint& p, int axis) noexcept { return axis == 0 ? p.x1 : p.x2; }
double momentum(const CotangentPoint& p, int axis) noexcept { return axis == 0 ? p.xi1 : p.xi2; }

/// Period of coordinate `axis` on the metric's domain; 0 when unbounded.
double axis_period(const DualMetric& metric, int axis) {
  if (axis == 0) return kTwoPi;
  if (metric.profile() == nullptr) return 0.0;
  return metric.profile()->period().value_or(0.0);
}

double reduce_to(double c, double period) noexcept {
  if (period == 0.0) return c;
  double r = c - period * std::floor(c / period);
  if (r >= period) r = 0.0;
  return r;
}

struct Levels {
  double position;
  double period;

  double nearest(double c) const noexcept {
    return period == 0.0 ? position : position + period * std::round((c - position) / period);
  }
  /// Smallest level strictly above c.
  double above(double c) const noexcept {
    if (period == 0.0) return position;
    double k = std::floor((c - position) / period) + 1.0;
    double level = position + k * period;
    if (level <= c) level += period;
    return level;
  }
};

Levels levels_of(const DualMetric& metric, const SectionSpec& spec) {
  return {spec.position, axis_period(metric, spec.normal_axis())};
}

std::array<double, 2> velocity(const DualMetric& metric, const CotangentPoint& p) {
  return legendre_velocity(metric, p);
}

/// Chart angle of the velocity direction with annulus angle u.
double chart_angle(const SectionSpec& spec, double u) noexcept {
  return spec.normal_axis() == 1 ? u : kPi / 2 - u;
}

double transverse_ratio(const DualMetric& metric, const SectionSpec& spec, const CotangentPoint& p) {
  const auto v = velocity(metric, p);
  return v[spec.normal_axis()] / std::hypot(v[0], v[1]);
}

void require_metric(const DualMetric& metric) {
  if (metric.profile() == nullptr) {
    throw Error(ErrorKind::InvalidArgument, "sections need a metric with a rotational profile");
  }
}

}  // namespace

void SectionSpec::validate() const {
  if (!(transversality_tol > 0.0)) throw Error(ErrorKind::ConfigInvalid, "section.transversality_tol: must be positive");
  if (!(max_return_time > 0.0)) throw Error(ErrorKind::ConfigInvalid, "section.max_return_time: must be positive");
  if (!std::isfinite(position)) throw Error(ErrorKind::ConfigInvalid, "section.position: must be finite");
}

nlohmann::json SectionSpec::to_json() const {
  const char* names[] = {"equator", "meridian", "parallel"};
  return {{"kind", names[static_cast<int>(kind)]},
          {"position", position},
          {"transversality_tol", transversality_tol},
          {"max_return_time", max_return_time}};
}

SectionSpec SectionSpec::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::ConfigInvalid, "section: expected an object");
  SectionSpec s;
  for (const auto& [key, value] : j.items()) {
    if (key == "kind") {
      if (!value.is_string()) throw Error(ErrorKind::ConfigInvalid, "section.kind: expected a string");
      const auto k = value.get<std::string>();
      if (k == "equator") {
        s.kind = Kind::EquatorBirkhoff;
      } else if (k == "meridian") {
        s.kind = Kind::MeridianAz;
      } else if (k == "parallel") {
        s.kind = Kind::ParallelAz;
      } else {
        throw Error(ErrorKind::ConfigInvalid, "section.kind: unknown kind '" + k + "'");
      }
      continue;
    }
    if (!value.is_number()) throw Error(ErrorKind::ConfigInvalid, "section." + key + ": expected a number");
    if (key == "position") {
      s.position = value.get<double>();
    } else if (key == "transversality_tol") {
      s.transversality_tol = value.get<double>();
    } else if (key == "max_return_time") {
      s.max_return_time = value.get<double>();
    } else {
      throw Error(ErrorKind::ConfigInvalid, "section." + key + ": unknown key");
    }
  }
  if (s.kind == Kind::EquatorBirkhoff && s.position != 0.0) {
    throw Error(ErrorKind::ConfigInvalid, "section.position: the equator section sits at x2 = 0");
  }
  s.validate();
  return s;
}

double s_period(const DualMetric& metric, const SectionSpec& spec) { return axis_period(metric, spec.tangent_axis()); }

CotangentPoint section_state(const DualMetric& metric, const SectionSpec& spec, const AnnulusPoint& a) {
  require_metric(metric);
  CotangentPoint p{};
  coord(p, spec.normal_axis()) = spec.position;
  coord(p, spec.tangent_axis()) = a.s;
  const double phi = chart_angle(spec, a.u);
  auto mismatch = [&](double theta) {
    p.xi1 = std::cos(theta);
    p.xi2 = std::sin(theta);
    const auto v = velocity(metric, p);
    return wrap_angle(std::atan2(v[1], v[0]) - phi);
  };
  // xi . v = H > 0 keeps the velocity within a quarter turn of xi, so the
  // root is bracketed by phi -+ pi/2.
  double lo = phi - kPi / 2;
  double hi = phi + kPi / 2;
  for (int i = 0; i < 100 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mismatch(mid) < 0.0 ? lo : hi) = mid;
  }
  const double theta = 0.5 * (lo + hi);
  p.xi1 = std::cos(theta);
  p.xi2 = std::sin(theta);
  const double h = metric(p);
  p.xi1 /= h;
  p.xi2 /= h;
  return p;
}

AnnulusPoint annulus_coordinates(const DualMetric& metric, const SectionSpec& spec, const CotangentPoint& p) {
  const auto v = velocity(metric, p);
  double u = std::atan2(v[spec.normal_axis()], v[spec.tangent_axis()]);
  if (u < 0.0) u += kTwoPi;
  return {reduce_to(coord(p, spec.tangent_axis()), s_period(metric, spec)), u};
}

CrossingEvent detect_crossing(const DualMetric& metric, const SectionSpec& spec, const CotangentPoint& p,
                              const IntegratorConfig& config) {
  require_metric(metric);
  const int axis = spec.normal_axis();
  const Levels levels = levels_of(metric, spec);
  if (std::abs(coord(p, axis) - levels.nearest(coord(p, axis))) <= 1e-9 &&
      std::abs(transverse_ratio(metric, spec, p)) < spec.transversality_tol) {
    throw Error(ErrorKind::NonTransverse, "start point is tangent to the section");
  }
  FlowIntegrator flow(metric, config);
  flow.reset(0.0, p);
  CrossingEvent event;
  while (flow.time() < spec.max_return_time) {
    flow.step(spec.max_return_time);
    const double c_old = coord(flow.previous_state(), axis);
    const double c_new = coord(flow.state(), axis);
    if (!(c_new > c_old)) continue;
    double floor_c = c_old;
    for (;;) {
      const double level = levels.above(floor_c);
      if (!(level > floor_c && level <= c_new)) break;
      floor_c = level;
      double lo = flow.previous_time();
      double hi = flow.time();
      while (hi - lo > 1e-13 * std::max(1.0, hi)) {
        const double mid = 0.5 * (lo + hi);
        (coord(flow.dense(mid), axis) < level ? lo : hi) = mid;
      }
      const double t = hi;
      if (t <= 1e-9) continue;  // the start point itself
      CotangentPoint q = t == flow.time() ? flow.state() : flow.dense(t);
      const double ratio = transverse_ratio(metric, spec, q);
      if (ratio < spec.transversality_tol) {
        ++event.skipped_tangencies;
        continue;
      }
      event.t = t;
      event.residual = std::abs(coord(q, axis) - level);
      coord(q, axis) = level;
      event.state = q;
      event.transverse_speed = ratio;
      return event;
    }
  }
  throw Error(ErrorKind::NoCrossing, "no transverse return within " + std::to_string(spec.max_return_time));
}

ReturnSample first_return_state(const DualMetric& metric, const SectionSpec& spec, const CotangentPoint& p,
                                const IntegratorConfig& config) {
  require_metric(metric);
  const int n_axis = spec.normal_axis();
  const int t_axis = spec.tangent_axis();
  const Levels levels = levels_of(metric, spec);
  CotangentPoint start = p;
  const double level = levels.nearest(coord(p, n_axis));
  if (std::abs(coord(p, n_axis) - level) > 1e-9) {
    throw Error(ErrorKind::InvalidArgument, "state is not on the section");
  }
  coord(start, n_axis) = level;
  const CrossingEvent e = detect_crossing(metric, spec, start, config);
  ReturnSample r;
  r.start = start;
  r.point = annulus_coordinates(metric, spec, start);
  r.image = annulus_coordinates(metric, spec, e.state);
  r.tau = e.t;
  const double period = s_period(metric, spec);
  const double ds = coord(e.state, t_axis) - coord(start, t_axis);
  r.lift_displacement = period == 0.0 ? ds : ds / period;
  CotangentPoint end = e.state;
  coord(end, t_axis) = reduce_to(coord(end, t_axis), period);
  coord(end, n_axis) = reduce_to(spec.position, levels.period);
  r.end = end;
  return r;
}

ReturnSample first_return(const DualMetric& metric, const SectionSpec& spec, const AnnulusPoint& a,
                          const IntegratorConfig& config) {
  return first_return_state(metric, spec, section_state(metric, spec, a), config);
}

std::vector<AnnulusPoint> GridSpec::nodes(double period) const {
  if (n_s < 1 || n_u < 1) throw Error(ErrorKind::InvalidArgument, "grid needs at least one node per axis");
  std::vector<AnnulusPoint> out;
  out.reserve(static_cast<std::size_t>(n_s) * n_u);
  for (int j = 0; j < n_u; ++j) {
    double u = 0.0;
    if (cell_centred) {
      u = u_min + (u_max - u_min) * (j + 0.5) / n_u;
    } else {
      u = n_u == 1 ? u_min : u_min + (u_max - u_min) * j / (n_u - 1);
    }
    for (int i = 0; i < n_s; ++i) out.push_back({period * (i + 0.5) / n_s, u});
  }
  return out;
}

std::vector<ReturnSample> build_return_map_grid(const DualMetric& metric, const SectionSpec& spec, const GridSpec& grid,
                                                const IntegratorConfig& config) {
  require_metric(metric);
  const double period = s_period(metric, spec);
  if (period == 0.0) throw Error(ErrorKind::InvalidArgument, "grid needs a closed base curve");
  const auto nodes = grid.nodes(period);
  std::vector<ReturnSample> table(nodes.size());
  parallel_for(nodes.size(), [&](std::size_t i) {
    ReturnSample& r = table[i];
    r.point = nodes[i];
    try {
      r = first_return(metric, spec, nodes[i], config);
      r.point = nodes[i];
    } catch (const Error& e) {
      r.status = e.kind();
      r.message = e.what();
    }
  });
  return table;
}

void write_return_csv(std::ostream& out, const std::vector<ReturnSample>& table) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << "s,u,s_image,u_image,tau,lift_ds,status\n" << std::setprecision(17);
  for (const auto& r : table) {
    out << r.point.s << ',' << r.point.u << ',';
    if (r.ok()) {
      out << r.image.s << ',' << r.image.u << ',' << r.tau << ',' << r.lift_displacement << ",ok\n";
    } else {
      out << ",,,," << to_string(*r.status) << '\n';
    }
  }
  out.flags(flags);
  out.precision(precision);
}

std::array<double, 2> symplectic_coordinates(const SectionSpec& spec, const CotangentPoint& p) {
  return {coord(p, spec.tangent_axis()), momentum(p, spec.tangent_axis())};
}

namespace {

double shoelace(const std::vector<std::array<double, 2>>& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    a += p[0] * q[1] - q[0] * p[1];
  }
  return 0.5 * std::abs(a);
}

}  // namespace

AreaCheck area_preservation_check(const DualMetric& metric, const SectionSpec& spec, const AnnulusPoint& corner,
                                  double ds, double du, int per_edge, const IntegratorConfig& config) {
  std::vector<AnnulusPoint> boundary;
  for (int side = 0; side < 4; ++side) {
    for (int k = 0; k < per_edge; ++k) {
      const double f = static_cast<double>(k) / per_edge;
      switch (side) {
        case 0: boundary.push_back({corner.s + f * ds, corner.u}); break;
        case 1: boundary.push_back({corner.s + ds, corner.u + f * du}); break;
        case 2: boundary.push_back({corner.s + (1 - f) * ds, corner.u + du}); break;
        default: boundary.push_back({corner.s, corner.u + (1 - f) * du}); break;
      }
    }
  }
  const double period = s_period(metric, spec);
  std::vector<std::array<double, 2>> before(boundary.size());
  std::vector<std::array<double, 2>> after(boundary.size());
  parallel_for(boundary.size(), [&](std::size_t i) {
    const CotangentPoint p = section_state(metric, spec, boundary[i]);
    const ReturnSample r = first_return_state(metric, spec, p, config);
    before[i] = symplectic_coordinates(spec, p);
    after[i] = symplectic_coordinates(spec, r.end);
    after[i][0] = before[i][0] + (period == 0.0 ? 1.0 : period) * r.lift_displacement;
  });
  AreaCheck c;
  c.area_before = shoelace(before);
  c.area_after = shoelace(after);
  c.relative_error = std::abs(c.area_after - c.area_before) / c.area_before;
  return c;
}

SmoothQuotient::SmoothQuotient(Function F, SmoothDivideOptions options) : F_(std::move(F)), options_(options) {
  if (options_.nodes < 1 || !(options_.step > 0.0) || !(options_.t_switch >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "smooth_divide needs nodes >= 1, step > 0, t_switch >= 0");
  }
  if (2 * options_.nodes - 1 < options_.order + 2) {
    throw Error(ErrorKind::InvalidArgument, "smooth_divide model degree is below order + 2");
  }
}

std::vector<double> SmoothQuotient::taylor(double x) const {
  const int m = options_.nodes;
  const int n = 2 * m;
  // Interpolate G at tau = t / step in {-m..-1, 1..m}; solve the scaled
  // Vandermonde system by Gaussian elimination with partial pivoting.
  std::vector<std::vector<long double>> a(n, std::vector<long double>(n + 1));
  int row = 0;
  for (int i = -m; i <= m; ++i) {
    if (i == 0) continue;
    const double t = options_.step * i;
    long double pw = 1.0L;
    for (int j = 0; j < n; ++j) {
      a[row][j] = pw;
      pw *= i;
    }
    a[row][n] = static_cast<long double>(F_(x, t) / t);
    ++row;
  }
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    std::swap(a[c], a[piv]);
    for (int r = c + 1; r < n; ++r) {
      const long double f = a[r][c] / a[c][c];
      for (int k = c; k <= n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  std::vector<double> coef(n);
  for (int c = n - 1; c >= 0; --c) {
    long double s = a[c][n];
    for (int k = c + 1; k < n; ++k) s -= a[c][k] * static_cast<long double>(coef[k]);
    coef[c] = static_cast<double>(s / a[c][c]);
  }
  double scale = 1.0;
  for (int j = 0; j < n; ++j) {
    coef[j] /= scale;
    scale *= options_.step;
  }
  return coef;
}

double SmoothQuotient::operator()(double x, double t) const {
  const double f0 = F_(x, 0.0);
  if (std::abs(f0) > options_.vanish_tol) {
    throw Error(ErrorKind::NotVanishing, "F(x, 0) = " + std::to_string(f0));
  }
  if (std::abs(t) > options_.t_switch) return F_(x, t) / t;
  const auto c = taylor(x);
  double g = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) g = g * t + *it;
  return g;
}

double SmoothQuotient::derivative_at_zero(double x, int k) const {
  const double f0 = F_(x, 0.0);
  if (std::abs(f0) > options_.vanish_tol) {
    throw Error(ErrorKind::NotVanishing, "F(x, 0) = " + std::to_string(f0));
  }
  const auto c = taylor(x);
  if (k < 0 || k >= static_cast<int>(c.size())) throw Error(ErrorKind::InvalidArgument, "derivative order out of range");
  double fact = 1.0;
  for (int i = 2; i <= k; ++i) fact *= i;
  return fact * c[k];
}

SmoothQuotient smooth_divide(SmoothQuotient::Function F, SmoothDivideOptions options) {
  return SmoothQuotient(std::move(F), options);
}

namespace {

/// Least-squares polynomial of the given degree; returns coefficients.
std::vector<double> polyfit(const std::vector<double>& x, const std::vector<double>& y, int degree) {
  const int n = degree + 1;
  std::vector<std::vector<long double>> a(n, std::vector<long double>(n + 1, 0.0L));
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::vector<long double> pw(2 * n, 1.0L);
    for (int j = 1; j < 2 * n; ++j) pw[j] = pw[j - 1] * x[i];
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) a[r][c] += pw[r + c];
      a[r][n] += pw[r] * y[i];
    }
  }
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    std::swap(a[c], a[piv]);
    for (int r = c + 1; r < n; ++r) {
      const long double f = a[r][c] / a[c][c];
      for (int k = c; k <= n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  std::vector<double> coef(n);
  for (int c = n - 1; c >= 0; --c) {
    long double s = a[c][n];
    for (int k = c + 1; k < n; ++k) s -= a[c][k] * static_cast<long double>(coef[k]);
    coef[c] = static_cast<double>(s / a[c][c]);
  }
  return coef;
}

double polyval(const std::vector<double>& c, double x) {
  double v = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * x + *it;
  return v;
}

}  // namespace

BoundaryExtensionReport return_time_boundary_extension(const DualMetric& metric, const SectionSpec& spec, double s,
                                                       std::vector<double> u_samples, double residual_tol,
                                                       const IntegratorConfig& config) {
  if (u_samples.empty()) {
    for (int k = 3; k <= 10; ++k) u_samples.push_back(std::ldexp(1.0, -k));
  }
  for (std::size_t i = 1; i < u_samples.size(); ++i) {
    if (!(u_samples[i] < u_samples[i - 1])) {
      throw Error(ErrorKind::ExtrapolationUnstable, "boundary samples must decrease toward u = 0");
    }
  }
  if (u_samples.size() < 4 || !(u_samples.back() > 0.0) || u_samples.back() > 0.01) {
    throw Error(ErrorKind::ExtrapolationUnstable, "boundary samples do not approach u = 0");
  }
  BoundaryExtensionReport rep;
  rep.s = s;
  rep.u = u_samples;
  rep.tau.resize(u_samples.size());
  parallel_for(u_samples.size(), [&](std::size_t i) {
    rep.tau[i] = first_return(metric, spec, {s, u_samples[i]}, config).tau;
  });
  rep.fit_degree = std::min<int>(3, static_cast<int>(u_samples.size()) - 2);
  const auto coef = polyfit(rep.u, rep.tau, rep.fit_degree);
  rep.tau_extrapolated = coef[0];
  for (std::size_t i = 0; i < rep.u.size(); ++i) {
    rep.fit_residual = std::max(rep.fit_residual, std::abs(polyval(coef, rep.u[i]) - rep.tau[i]));
  }
  if (!(rep.fit_residual <= residual_tol) || !std::isfinite(rep.tau_extrapolated)) {
    throw Error(ErrorKind::ExtrapolationUnstable, "fit residual " + std::to_string(rep.fit_residual));
  }

  // F(tau, r): normal offset after flowing the unit state at angle r for
  // time tau. F(., 0) vanishes because the base curve is an orbit.
  const int axis = spec.normal_axis();
  const SmoothQuotient G = smooth_divide(
      [&](double tau, double r) {
        const CotangentPoint p = section_state(metric, spec, {s, r});
        const CotangentPoint q = integrate_state(metric, p, tau, config);
        return coord(q, axis) - spec.position;
      },
      SmoothDivideOptions{1, 1e-3, 0.02, 4, 1e-9});
  auto g = [&](double tau) { return G(tau, 0.0); };
  double t0 = rep.tau_extrapolated;
  double t1 = t0 + 1e-3;
  double g0 = g(t0);
  double g1 = g(t1);
  for (int it = 0; it < 30 && std::abs(t1 - t0) > 1e-12; ++it) {
    if (g1 == g0) break;
    const double t2 = t1 - g1 * (t1 - t0) / (g1 - g0);
    t0 = t1;
    g0 = g1;
    t1 = t2;
    g1 = g(t1);
  }
  rep.tau_root = t1;
  const double h = 1e-4;
  rep.root_slope = (g(t1 + h) - g(t1 - h)) / (2 * h);
  return rep;
}

}  // namespace finsler
