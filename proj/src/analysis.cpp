#include "finsler/analysis.hpp"

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "finsler/parallel.hpp"

namespace finsler {

namespace {

double wrap_angle(double a) { return std::remainder(a, kTwoPi); }

double angle_between(const std::array<double, 2>& a, const std::array<double, 2>& b) {
  return std::abs(std::atan2(a[0] * b[1] - a[1] * b[0], a[0] * b[0] + a[1] * b[1]));
}

std::array<double, 2> chord(const LiftedPath& path, std::size_t end) {
  const double dx = path[end][0] - path[0][0];
  const double dy = path[end][1] - path[0][1];
  const double n = std::hypot(dx, dy);
  if (!(n > 0.0)) throw Error(ErrorKind::InvalidArgument, "vanishing chord");
  return {dx / n, dy / n};
}

double reduce_mod(double x, double period) {
  double r = std::fmod(x, period);
  if (r < 0.0) r += period;
  return r >= period ? 0.0 : r;
}

}  // namespace

// ---------------------------------------------------------------------------

nlohmann::json RotationEstimate::to_json() const {
  return {{"value", value}, {"reduced", reduced}, {"n", n}, {"error_bound", error_bound}};
}

RotationEstimate rotation_from_displacements(const std::vector<double>& displacements) {
  if (displacements.empty()) throw Error(ErrorKind::InvalidArgument, "no displacements");
  RotationEstimate r;
  r.n = displacements.size();
  const double total = std::accumulate(displacements.begin(), displacements.end(), 0.0);
  r.value = total / static_cast<double>(r.n);
  r.reduced = r.value - std::floor(r.value);
  if (r.reduced >= 1.0) r.reduced = 0.0;
  double partial = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  for (std::size_t j = 0; j < r.n; ++j) {
    partial += displacements[j];
    const double dev = partial - static_cast<double>(j + 1) * r.value;
    lo = std::min(lo, dev);
    hi = std::max(hi, dev);
  }
  r.error_bound = (hi - lo) / static_cast<double>(r.n);
  return r;
}

std::function<std::pair<CotangentPoint, double>(const CotangentPoint&)> section_lifted_map(
    const DualMetric& metric, const SectionSpec& spec, const IntegratorConfig& config) {
  return [metric, spec, config](const CotangentPoint& p) {
    const ReturnSample r = first_return_state(metric, spec, p, config);
    return std::make_pair(r.end, r.lift_displacement);
  };
}

// ---------------------------------------------------------------------------

nlohmann::json DirectionEstimate::to_json() const {
  return {{"direction", direction}, {"residual", residual}};
}

DirectionEstimate asymptotic_direction(const LiftedPath& path, double tol) {
  if (path.size() < 5) throw Error(ErrorKind::InvalidArgument, "path too short for a direction estimate");
  const std::size_t last = path.size() - 1;
  const auto full = chord(path, last);
  const auto half = chord(path, last / 2);
  const auto quarter = chord(path, last / 4);
  DirectionEstimate d;
  d.direction = full;
  d.residual = std::max({angle_between(full, half), angle_between(full, quarter), angle_between(half, quarter)});
  if (d.residual > tol) {
    throw Error(ErrorKind::NotConverged, "direction residual " + std::to_string(d.residual) + " exceeds " +
                                             std::to_string(tol));
  }
  return d;
}

nlohmann::json DeviationReport::to_json() const { return {{"sup_distance", sup_distance}, {"argmax", argmax}}; }

DeviationReport bounded_deviation(const LiftedPath& path, std::array<double, 2> rho,
                                  std::optional<std::size_t> count) {
  const double n = std::hypot(rho[0], rho[1]);
  if (!(n > 0.0)) throw Error(ErrorKind::InvalidArgument, "zero direction");
  rho = {rho[0] / n, rho[1] / n};
  const std::size_t m = std::min(path.size(), count.value_or(path.size()));
  DeviationReport r;
  for (std::size_t i = 0; i < m; ++i) {
    const double dx = path[i][0] - path[0][0];
    const double dy = path[i][1] - path[0][1];
    const double d = std::abs(dx * rho[1] - dy * rho[0]);
    if (d > r.sup_distance) {
      r.sup_distance = d;
      r.argmax = i;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------

OrbitCloud make_orbit_cloud(const std::vector<std::vector<double>>& points, std::size_t steps,
                            const std::function<void(std::vector<double>&)>& map,
                            std::function<double(const double*, const double*)> distance) {
  if (points.empty()) throw Error(ErrorKind::EmptySample, "empty point cloud");
  OrbitCloud c;
  c.n = points.size();
  c.steps = steps;
  c.dim = points.front().size();
  c.distance = std::move(distance);
  c.data.resize(c.n * (steps + 1) * c.dim);
  parallel_for(c.n, [&](std::size_t i) {
    std::vector<double> x = points[i];
    if (x.size() != c.dim) throw Error(ErrorKind::InvalidArgument, "inconsistent point dimension");
    for (std::size_t t = 0; t <= steps; ++t) {
      if (t > 0) map(x);
      std::copy(x.begin(), x.end(), c.data.begin() + static_cast<std::ptrdiff_t>((i * (steps + 1) + t) * c.dim));
    }
  });
  return c;
}

bool is_separated(const OrbitCloud& cloud, std::size_t i, std::size_t j, std::size_t T, double eps) {
  for (std::size_t t = 0; t <= T; ++t) {
    if (cloud.distance(cloud.at(i, t), cloud.at(j, t)) > eps) return true;
  }
  return false;
}

std::vector<std::size_t> separated_set(const OrbitCloud& cloud, std::size_t T, double eps) {
  std::vector<std::size_t> set;
  for (std::size_t i = 0; i < cloud.n; ++i) {
    if (std::all_of(set.begin(), set.end(), [&](std::size_t j) { return is_separated(cloud, i, j, T, eps); })) {
      set.push_back(i);
    }
  }
  return set;
}

namespace {

/// First time index at which each pair is eps-apart (steps + 1 if never),
/// packed for i < j.
class SeparationCache {
 public:
  SeparationCache(const OrbitCloud& cloud, double eps) : n_(cloud.n), first_(cloud.n * (cloud.n - 1) / 2) {
    parallel_for(n_, [&](std::size_t i) {
      for (std::size_t j = i + 1; j < n_; ++j) {
        std::size_t t = 0;
        while (t <= cloud.steps && !(cloud.distance(cloud.at(i, t), cloud.at(j, t)) > eps)) ++t;
        first_[index(i, j)] = static_cast<std::uint32_t>(t);
      }
    });
  }

  bool separated(std::size_t i, std::size_t j, std::size_t T) const {
    if (i > j) std::swap(i, j);
    return first_[index(i, j)] <= T;
  }

 private:
  std::size_t index(std::size_t i, std::size_t j) const { return i * n_ - i * (i + 1) / 2 + (j - i - 1); }

  std::size_t n_;
  std::vector<std::uint32_t> first_;
};

std::vector<std::size_t> greedy_extend(const SeparationCache& cache, std::size_t n, std::size_t T,
                                       std::vector<std::size_t> seed) {
  std::vector<char> member(n, 0);
  for (std::size_t i : seed) member[i] = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (member[i]) continue;
    if (std::all_of(seed.begin(), seed.end(), [&](std::size_t j) { return cache.separated(i, j, T); })) {
      seed.push_back(i);
      member[i] = 1;
    }
  }
  return seed;
}

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace

std::size_t EntropyEstimate::s(std::size_t T, double e) const {
  for (const auto& r : table) {
    if (r.T == T && r.eps == e) return r.s;
  }
  throw Error(ErrorKind::InvalidArgument, "no entry for (T, eps)");
}

nlohmann::json EntropyEstimate::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table) rows.push_back({{"T", r.T}, {"eps", r.eps}, {"s", r.s}});
  nlohmann::json sl = nlohmann::json::array();
  for (double x : slopes) sl.push_back(std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr));
  return {{"table", rows}, {"eps", eps}, {"slopes", sl}, {"fit_points", fit_points},
          {"value", value},  {"value_eps", value_eps}};
}

EntropyEstimate entropy_separated_sets(const OrbitCloud& cloud, std::vector<std::size_t> T_list,
                                       std::vector<double> eps_list, const EntropyOptions& options) {
  if (T_list.size() < 2 || eps_list.empty()) throw Error(ErrorKind::InvalidArgument, "need >= 2 T and >= 1 eps");
  if (!std::is_sorted(T_list.begin(), T_list.end()) ||
      std::adjacent_find(T_list.begin(), T_list.end()) != T_list.end() || T_list.back() > cloud.steps) {
    throw Error(ErrorKind::InvalidArgument, "T values must be increasing and within the orbit segments");
  }
  for (double e : eps_list) {
    if (!(e > 0.0)) throw Error(ErrorKind::InvalidArgument, "eps must be positive");
  }
  if (cloud.n < 10) throw Error(ErrorKind::InsufficientCloud, "cloud has fewer than 10 points");
  std::sort(eps_list.begin(), eps_list.end(), std::greater<>());
  eps_list.erase(std::unique(eps_list.begin(), eps_list.end()), eps_list.end());

  EntropyEstimate est;
  est.eps = eps_list;
  const double cap = options.saturation * static_cast<double>(cloud.n);
  std::vector<std::vector<std::size_t>> previous_eps_sets;  // indexed by T position
  for (double eps : eps_list) {
    const SeparationCache cache(cloud, eps);
    std::vector<std::vector<std::size_t>> sets;
    for (std::size_t k = 0; k < T_list.size(); ++k) {
      const std::size_t T = T_list[k];
      auto a = greedy_extend(cache, cloud.n, T, k > 0 ? sets[k - 1] : std::vector<std::size_t>{});
      if (!previous_eps_sets.empty()) {
        auto b = greedy_extend(cache, cloud.n, T, previous_eps_sets[k]);
        if (b.size() > a.size()) a = std::move(b);
      }
      est.table.push_back({T, eps, a.size()});
      sets.push_back(std::move(a));
    }
    // Unsaturated prefix (s is nondecreasing in T), fitted over its tail.
    std::vector<double> x;
    std::vector<double> y;
    for (std::size_t k = 0; k < T_list.size(); ++k) {
      if (static_cast<double>(sets[k].size()) > cap) break;
      if (T_list[k] < options.burn_in) continue;
      x.push_back(static_cast<double>(T_list[k]));
      y.push_back(std::log(static_cast<double>(sets[k].size())));
    }
    const std::size_t need = std::max<std::size_t>(options.min_fit_points, 2);
    if (x.size() < need) {
      est.slopes.push_back(std::numeric_limits<double>::quiet_NaN());
      est.fit_points.push_back(0);
    } else {
      const std::size_t tail = std::max(need, (x.size() + 1) / 2);
      const std::vector<double> xt(x.end() - static_cast<std::ptrdiff_t>(tail), x.end());
      const std::vector<double> yt(y.end() - static_cast<std::ptrdiff_t>(tail), y.end());
      est.slopes.push_back(least_squares_slope(xt, yt));
      est.fit_points.push_back(tail);
    }
    previous_eps_sets = std::move(sets);
  }
  for (std::size_t i = eps_list.size(); i-- > 0;) {
    if (std::isfinite(est.slopes[i])) {
      est.value = est.slopes[i];
      est.value_eps = eps_list[i];
      return est;
    }
  }
  throw Error(ErrorKind::InsufficientCloud, "every eps saturates the cloud before a stable fit");
}

void write_entropy_csv(std::ostream& out, const EntropyEstimate& e) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << "T,eps,s,slope\n" << std::setprecision(17);
  for (const auto& r : e.table) {
    const auto it = std::find(e.eps.begin(), e.eps.end(), r.eps);
    const double slope = e.slopes[static_cast<std::size_t>(it - e.eps.begin())];
    out << r.T << ',' << r.eps << ',' << r.s << ',';
    if (std::isfinite(slope)) out << slope;
    out << '\n';
  }
  out.flags(flags);
  out.precision(precision);
}

// ---------------------------------------------------------------------------

nlohmann::json GraphReport::to_json() const {
  return {{"is_graph", is_graph},
          {"max_multivaluedness", max_multivaluedness},
          {"lipschitz_estimate", lipschitz_estimate},
          {"deviation_D", deviation_D},
          {"occupied_bins", occupied_bins},
          {"multivalued_bins", multivalued_bins}};
}

GraphReport invariant_graph_test(const std::vector<FiberSample>& samples, const GraphBinning& b,
                                 const LiftedPath* orbit) {
  if (samples.empty()) throw Error(ErrorKind::EmptySample, "no samples for the graph test");
  if (b.n1 < 1 || b.n2 < 1 || !(b.period1 > 0.0) || !(b.period2 > 0.0) || !(b.cluster_tol > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "invalid binning");
  }
  const std::size_t nb = static_cast<std::size_t>(b.n1) * static_cast<std::size_t>(b.n2);
  std::vector<std::vector<double>> bins(nb);
  for (const auto& s : samples) {
    const double u = reduce_mod(s.x1, b.period1) / b.period1;
    const double v = reduce_mod(s.x2 - b.origin2, b.period2) / b.period2;
    const int i = std::min(b.n1 - 1, static_cast<int>(u * b.n1));
    const int j = std::min(b.n2 - 1, static_cast<int>(v * b.n2));
    bins[static_cast<std::size_t>(j) * b.n1 + i].push_back(reduce_mod(s.fiber, kTwoPi));
  }

  GraphReport r;
  std::vector<double> mean(nb, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = 0; k < nb; ++k) {
    auto& f = bins[k];
    if (f.empty()) continue;
    ++r.occupied_bins;
    std::sort(f.begin(), f.end());
    // Circular gaps; one cluster iff at most one gap exceeds the tolerance.
    double largest = kTwoPi - (f.back() - f.front());
    double second = 0.0;
    for (std::size_t m = 1; m < f.size(); ++m) {
      const double g = f[m] - f[m - 1];
      if (g > largest) {
        second = largest;
        largest = g;
      } else {
        second = std::max(second, g);
      }
    }
    if (f.size() == 1) second = 0.0;
    r.max_multivaluedness = std::max(r.max_multivaluedness, second);
    if (second > b.cluster_tol) {
      ++r.multivalued_bins;
      continue;
    }
    double sx = 0.0;
    double sy = 0.0;
    for (double a : f) {
      sx += std::cos(a);
      sy += std::sin(a);
    }
    mean[k] = std::atan2(sy, sx);
  }
  r.is_graph = r.multivalued_bins == 0;

  const double h1 = b.period1 / b.n1;
  const double h2 = b.period2 / b.n2;
  for (int j = 0; j < b.n2; ++j) {
    for (int i = 0; i < b.n1; ++i) {
      const double m = mean[static_cast<std::size_t>(j) * b.n1 + i];
      if (std::isnan(m)) continue;
      const double right = mean[static_cast<std::size_t>(j) * b.n1 + (i + 1) % b.n1];
      const double up = mean[static_cast<std::size_t>((j + 1) % b.n2) * b.n1 + i];
      if (!std::isnan(right)) r.lipschitz_estimate = std::max(r.lipschitz_estimate, std::abs(wrap_angle(right - m)) / h1);
      if (!std::isnan(up)) r.lipschitz_estimate = std::max(r.lipschitz_estimate, std::abs(wrap_angle(up - m)) / h2);
    }
  }
  if (orbit != nullptr) {
    const auto d = asymptotic_direction(*orbit);
    r.deviation_D = bounded_deviation(*orbit, d.direction).sup_distance;
  }
  return r;
}

std::vector<FiberSample> fiber_samples(const OrbitTrace& trace) {
  std::vector<FiberSample> out;
  out.reserve(trace.size());
  for (const auto& p : trace.states) out.push_back({p.x1, p.x2, std::atan2(p.xi2, p.xi1)});
  return out;
}

// ---------------------------------------------------------------------------

nlohmann::json TubeReport::to_json() const {
  nlohmann::json orbs = nlohmann::json::array();
  for (const auto& o : orbits) {
    orbs.push_back({{"xi1", o.xi1}, {"gap", o.gap}, {"min_boundary_distance", o.min_boundary_distance}});
  }
  nlohmann::json wit = nlohmann::json::array();
  for (const auto& w : witnesses) {
    const auto& c = w.ball.center;
    wit.push_back({{"center", {c.x1, c.x2, c.xi1, c.xi2}},
                   {"radius", w.ball.radius},
                   {"orbit", w.orbit},
                   {"distance", w.distance},
                   {"hole", w.hole}});
  }
  return {{"eps_grid", eps_grid},     {"boundary_fraction", boundary_fraction},
          {"collar_fraction", collar_fraction}, {"orbits", orbs},
          {"witnesses", wit},         {"failures", failures}};
}

namespace {

CotangentPoint unit_state(const DualMetric& metric, double x1, double x2, double theta) {
  CotangentPoint p{x1, x2, std::cos(theta), std::sin(theta)};
  const double h = metric(p);
  p.xi1 /= h;
  p.xi2 /= h;
  return p;
}

double x2_extent(const DualMetric& metric, double span) {
  const auto* f = metric.profile();
  if (f != nullptr && f->period()) return *f->period();
  return 2.0 * span;
}

double x2_origin(const DualMetric& metric, double span) {
  const auto* f = metric.profile();
  if (f != nullptr && f->period()) return 0.0;
  return -span;
}

}  // namespace

CotangentPoint clairaut_state(const DualMetric& metric, double x1, double x2, double c) {
  const auto H = [&](double xi2) { return metric({x1, x2, c, xi2}); };
  if (c == 0.0) return unit_state(metric, x1, x2, kPi / 2);
  if (!(H(0.0) <= 1.0)) throw Error(ErrorKind::InvalidArgument, "xi1 value not attained on the unit fiber");
  double lo = 0.0;
  double hi = 1.0;
  while (H(hi) < 1.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) throw Error(ErrorKind::InvalidArgument, "unit fiber is unbounded");
  }
  for (int i = 0; i < 200 && hi - lo > 1e-16 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (H(mid) < 1.0 ? lo : hi) = mid;
  }
  return {x1, x2, c, 0.5 * (lo + hi)};
}

TubeSpec clairaut_tube(const DualMetric& metric, int n) {
  if (n < 8) throw Error(ErrorKind::InvalidArgument, "tube grid needs n >= 8");
  const double extent = x2_extent(metric, 3.0);
  const double origin = x2_origin(metric, 3.0);
  TubeSpec t{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (int i = 0; i < n; ++i) {
    const double x2 = origin + extent * (i + 0.5) / n;
    double top = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < n; ++k) top = std::max(top, unit_state(metric, 0.0, x2, -kPi / 2 + kPi * (k + 0.5) / n).xi1);
    t.c_lo = std::min(t.c_lo, top);
    t.c_hi = std::max(t.c_hi, top);
  }
  return t;
}

std::vector<CotangentPoint> sample_tube(const DualMetric& metric, const TubeSpec& tube, std::size_t count,
                                        std::uint64_t seed) {
  if (!(tube.c_lo < tube.c_hi)) throw Error(ErrorKind::InvalidArgument, "empty tube");
  std::mt19937_64 rng(seed);
  const auto uniform = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  const double extent = x2_extent(metric, 3.0);
  const double origin = x2_origin(metric, 3.0);
  std::vector<CotangentPoint> out;
  out.reserve(count);
  const std::size_t max_tries = 1000 * count + 1000;
  for (std::size_t tries = 0; out.size() < count; ++tries) {
    if (tries >= max_tries) throw Error(ErrorKind::EmptySample, "tube rejection sampling found too few states");
    const double x1 = kTwoPi * uniform();
    const double x2 = origin + extent * uniform();
    const double theta = -kPi + kTwoPi * uniform();
    const auto p = unit_state(metric, x1, x2, theta);
    if (tube.contains(p.xi1)) out.push_back(p);
  }
  return out;
}

double tube_collar_fraction(const DualMetric& metric, const TubeSpec& tube, double eps, int n, double x2_span) {
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "quadrature needs n >= 2");
  const double extent = x2_extent(metric, x2_span);
  const double origin = x2_origin(metric, x2_span);
  std::vector<std::size_t> inside(static_cast<std::size_t>(n), 0);
  std::vector<std::size_t> collar(static_cast<std::size_t>(n), 0);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    const double x2 = origin + extent * (static_cast<double>(i) + 0.5) / n;
    for (int k = 0; k < n; ++k) {
      const double theta = -kPi + kTwoPi * (k + 0.5) / n;
      const double xi1 = unit_state(metric, 0.0, x2, theta).xi1;
      if (!tube.contains(xi1)) continue;
      ++inside[i];
      if (tube.gap(xi1) < eps) ++collar[i];
    }
  });
  const double in = static_cast<double>(std::accumulate(inside.begin(), inside.end(), std::size_t{0}));
  if (in == 0.0) throw Error(ErrorKind::EmptySample, "tube has no quadrature cells");
  return static_cast<double>(std::accumulate(collar.begin(), collar.end(), std::size_t{0})) / in;
}

TubeReport tube_diagnostics(const DualMetric& metric, const TubeSpec& tube, const std::vector<CotangentPoint>& ensemble,
                            double T, const std::vector<double>& eps_grid,
                            const std::vector<std::pair<CotangentPoint, WitnessBall>>& witnesses, double T_witness,
                            const IntegratorConfig& config) {
  if (ensemble.empty()) throw Error(ErrorKind::EmptySample, "empty tube ensemble");
  const Domain domain = metric.profile() != nullptr ? Domain::of(*metric.profile()) : Domain{};
  TubeReport r;
  r.eps_grid = eps_grid;
  std::sort(r.eps_grid.begin(), r.eps_grid.end());

  std::vector<std::optional<TubeOrbitRecord>> records(ensemble.size());
  parallel_for(ensemble.size(), [&](std::size_t i) {
    try {
      const auto trace = integrate_orbit(metric, ensemble[i], T, config);
      TubeOrbitRecord rec;
      rec.xi1 = ensemble[i].xi1;
      rec.gap = tube.gap(rec.xi1);
      rec.min_boundary_distance = std::numeric_limits<double>::infinity();
      for (const auto& p : trace.states) rec.min_boundary_distance = std::min(rec.min_boundary_distance, tube.gap(p.xi1));
      records[i] = rec;
    } catch (const Error&) {
    }
  });
  for (const auto& rec : records) {
    if (rec) {
      r.orbits.push_back(*rec);
    } else {
      ++r.failures;
    }
  }
  for (double eps : r.eps_grid) {
    const auto near = std::count_if(r.orbits.begin(), r.orbits.end(),
                                    [eps](const TubeOrbitRecord& o) { return o.min_boundary_distance < eps; });
    r.boundary_fraction.push_back(r.orbits.empty() ? 0.0
                                                   : static_cast<double>(near) / static_cast<double>(r.orbits.size()));
    r.collar_fraction.push_back(tube_collar_fraction(metric, tube, eps));
  }

  std::vector<std::optional<WitnessRecord>> wit(witnesses.size());
  parallel_for(witnesses.size(), [&](std::size_t i) {
    try {
      const auto trace = integrate_orbit(metric, witnesses[i].first, T_witness, config);
      WitnessRecord w;
      w.ball = witnesses[i].second;
      w.orbit = i;
      double d = std::numeric_limits<double>::infinity();
      for (const auto& p : trace.states) d = std::min(d, domain.distance(p, w.ball.center));
      w.distance = d - w.ball.radius;
      w.hole = w.distance > 0.0;
      wit[i] = w;
    } catch (const Error&) {
    }
  });
  for (const auto& w : wit) {
    if (w) {
      r.witnesses.push_back(*w);
    } else {
      ++r.failures;
    }
  }
  return r;
}

}  // namespace finsler
