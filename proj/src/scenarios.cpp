#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "finsler/analysis.hpp"
#include "finsler/error.hpp"
#include "finsler/parallel.hpp"
#include "scenario_plan.hpp"

namespace finsler::detail {

namespace {

using nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(6);
  s << x;
  return s.str();
}

/// Covector over (x1, x2) with direction angle theta on the H0 = 1 level.
CotangentPoint unit_covector(const RotationalProfile& f, double x1, double x2, double theta) {
  const double r = f.value(x2);
  return {x1, x2, r * std::cos(theta), r * std::sin(theta)};
}

CotangentPoint random_covector(UniformStream& rng, const RotationalProfile& f, double x2_lo, double x2_hi) {
  const double x1 = rng.uniform(0.0, kTwoPi);
  const double x2 = rng.uniform(x2_lo, x2_hi);
  const double theta = rng.uniform(0.0, kTwoPi);
  const double scale = rng.uniform(0.5, 2.0);
  auto p = unit_covector(f, x1, x2, theta);
  p.xi1 *= scale;
  p.xi2 *= scale;
  return p;
}

/// Rejection samples of U_a (|x2| <= a, H1/H0 >= f0(a)) on the H0 = 1 level.
std::vector<CotangentPoint> cone_samples(UniformStream& rng, const RotationalProfile& f, double a, std::size_t n) {
  std::vector<CotangentPoint> out;
  for (std::size_t tries = 0; out.size() < n; ++tries) {
    if (tries > 1000 * n + 1000) throw Error(ErrorKind::EmptySample, "cone U_" + fmt(a) + " is too thin to sample");
    const auto p = unit_covector(f, rng.uniform(0.0, kTwoPi), rng.uniform(-a, a), rng.uniform(-0.5 * kPi, 0.5 * kPi));
    if (cone_membership(f, a, p)) out.push_back(p);
  }
  return out;
}

double x2_reach(const RotationalProfile& f, double fallback) { return f.period() ? *f.period() : fallback; }

Measured axioms_measure(const DualMetric& m, UniformStream& rng, std::size_t n, double x2_lo, double x2_hi) {
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = random_covector(rng, *m.profile(), x2_lo, x2_hi);
    const double lambda = rng.uniform(0.1, 10.0);
    const double h = m(p);
    const double hl = m({p.x1, p.x2, lambda * p.xi1, lambda * p.xi2});
    const auto g = m.gradient(p);
    worst = std::max(worst, std::abs(hl - lambda * h) / (lambda * h));
    worst = std::max(worst, std::abs(p.xi1 * g.xi1 + p.xi2 * g.xi2 - h) / h);
  }
  return {worst, "max relative homogeneity / Euler defect over " + std::to_string(n) + " samples"};
}

Measured convexity_measure(const DualMetric& m, UniformStream& rng, std::size_t n, double x2_lo, double x2_hi) {
  std::vector<CotangentPoint> samples;
  for (std::size_t i = 0; i < n; ++i) samples.push_back(random_covector(rng, *m.profile(), x2_lo, x2_hi));
  const auto r = fiber_convexity_check(m, samples);
  return {r.min_eigenvalue, "min fiber Hessian eigenvalue of H^2/2 over " + std::to_string(n) + " samples"};
}

/// Gate grid over the Katok band (or one torus period) at unit covectors.
Measured gate_measure(Plan& plan) {
  const auto& m = plan.metric();
  plan.results()["alpha"] = m.alpha();
  const double b = m.cutoffs() ? m.cutoffs()->b : 2.0;
  const auto f = plan.profile();
  const double lo = f.period() ? 0.0 : -2.0 * b;
  const double hi = f.period() ? *f.period() : 2.0 * b;
  const auto r = fiber_convexity_check(m, fiber_sample_grid(lo, hi, 161, 360));
  return {r.min_eigenvalue, "alpha " + fmt(m.alpha()) + "; min fiber Hessian eigenvalue on the gate grid"};
}

Measured conservation_measure(const DualMetric& m, const std::vector<CotangentPoint>& starts, double T,
                              const IntegratorConfig& cfg, OrbitTrace* keep = nullptr) {
  std::vector<double> drift(starts.size());
  std::vector<OrbitTrace> traces(starts.size());
  parallel_for(starts.size(), [&](std::size_t i) {
    traces[i] = integrate_orbit(m, starts[i], T, cfg);
    drift[i] = std::max(traces[i].max_drift_H, traces[i].max_drift_H1);
  });
  if (keep && !traces.empty()) *keep = std::move(traces.front());
  return {*std::max_element(drift.begin(), drift.end()),
          "max relative drift of H and xi1 over " + std::to_string(starts.size()) + " orbits at F-time " + fmt(T)};
}

std::string entropy_csv(const EntropyEstimate& e) {
  std::ostringstream out;
  write_entropy_csv(out, e);
  return out.str();
}

std::vector<std::size_t> steps_upto(std::size_t n) {
  std::vector<std::size_t> v(n + 1);
  for (std::size_t i = 0; i <= n; ++i) v[i] = i;
  return v;
}

double circle_distance(double a, double b, double period) {
  const double d = std::abs(std::remainder(a - b, period));
  return d;
}

template <class F>
double bisect(F&& g, double lo, double hi) {
  double glo = g(lo);
  for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++i) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if ((gm > 0) == (glo > 0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Smallest x2 >= 0 with H(x2; xi = (c, 0)) = 1: the turning height of the
/// trapped orbit with Clairaut value c through the equator.
double turning_point(const DualMetric& m, double c) {
  const auto g = [&](double x) { return m({0.0, x, c, 0.0}) - 1.0; };
  if (g(0.0) >= 0.0) throw Error(ErrorKind::InvalidArgument, "c = " + fmt(c) + " does not pass the equator");
  double x = 0.0;
  for (; g(x + 1e-3) < 0.0; x += 1e-3) {
    if (x > 100.0) throw Error(ErrorKind::NotConverged, "no turning point for c = " + fmt(c));
  }
  return bisect(g, x, x + 1e-3);
}

json base_integrator() { return IntegratorConfig{}.to_json(); }

json metric_block(const std::string& kind, double a0, double a1, double b) {
  return {{"kind", kind}, {"a0", a0}, {"a1", a1}, {"b", b}, {"alpha", kDefaultAlpha}, {"reversible", false}};
}

// ---------------------------------------------------------------------------
// round-sphere-baseline

void run_round_sphere(Plan& plan) {
  const auto f = plan.profile();
  const auto cfg = plan.integrator();
  const double span = plan.num("x2_span");

  plan.check("finsler_axioms", "<=", plan.num("axioms_tol"),
             [&] { return axioms_measure(plan.metric(), plan.rng(), plan.count("samples"), -span, span); });
  plan.check("fiber_convexity", ">", 0.0,
             [&] { return convexity_measure(plan.metric(), plan.rng(), plan.count("samples"), -span, span); });
  plan.check("periodicity_2pi", "<=", plan.num("periodicity_tol"), [&]() -> Measured {
    const auto samples = cone_samples(plan.rng(), f, plan.num("periodicity_cone"), plan.count("periodicity_samples"));
    const auto r = check_periodicity(plan.metric(), samples, kTwoPi, cfg);
    return {r.max_distance, "max phase-space distance after 2 pi over " + std::to_string(samples.size()) + " samples of U_" +
                                fmt(plan.num("periodicity_cone"))};
  });

  std::optional<std::vector<ReturnSample>> table;
  const auto get_table = [&]() -> const std::vector<ReturnSample>& {
    if (!table) {
      GridSpec grid;
      grid.n_s = grid.n_u = static_cast<int>(plan.count("grid"));
      table = build_return_map_grid(plan.metric(), plan.section(), grid, cfg);
      std::ostringstream csv;
      write_return_csv(csv, *table);
      plan.write("return_map.csv", csv.str());
      PlotStyle style;
      style.title = "first-return map, round sphere";
      style.bounds = std::array<double, 4>{0.0, kTwoPi, 0.0, kPi};
      plan.write("return_map.svg", render_section_plot(*table, style));
    }
    return *table;
  };
  plan.check("return_map_identity", "<=", plan.num("return_tol"), [&]() -> Measured {
    double worst = 0.0;
    for (const auto& r : get_table()) {
      if (!r.ok()) return {kInf, "sample failed: " + r.message};
      worst = std::max(worst, std::hypot(circle_distance(r.image.s, r.point.s, kTwoPi), r.image.u - r.point.u));
    }
    return {worst, "max |P(s, u) - (s, u)| over the grid"};
  });
  plan.check("return_time_2pi", "<=", plan.num("return_tol"), [&]() -> Measured {
    double worst = 0.0;
    for (const auto& r : get_table()) {
      if (!r.ok()) return {kInf, "sample failed: " + r.message};
      worst = std::max(worst, std::abs(r.tau - kTwoPi));
    }
    return {worst, "max |tau - 2 pi| over the grid"};
  });
  plan.check("boundary_extension", "<=", plan.num("extension_tol"), [&]() -> Measured {
    const auto r = return_time_boundary_extension(plan.metric(), plan.section(), plan.num("extension_s"), {}, 1e-4, cfg);
    plan.results()["boundary_extension"] = {{"tau_extrapolated", r.tau_extrapolated},
                                            {"tau_root", r.tau_root},
                                            {"fit_residual", r.fit_residual}};
    return {std::max(std::abs(r.tau_extrapolated - kTwoPi), std::abs(r.tau_root - kTwoPi)),
            "max deviation from 2 pi of the fitted and root-solved boundary return time"};
  });
  plan.check("conservation", "<=", plan.num("conservation_tol"), [&]() -> Measured {
    std::vector<CotangentPoint> starts;
    for (std::size_t i = 0; i < plan.count("conservation_orbits"); ++i) {
      starts.push_back(unit_covector(f, plan.rng().uniform(0.0, kTwoPi), plan.rng().uniform(-1.0, 1.0),
                                     plan.rng().uniform(0.0, kTwoPi)));
    }
    OrbitTrace first;
    auto m = conservation_measure(plan.metric(), starts, plan.num("conservation_T"), cfg, &first);
    std::ostringstream csv;
    write_orbit_csv(csv, first, plan.metric());
    plan.write("orbit.csv", csv.str());
    PlotStyle style;
    style.title = "geodesic, round sphere";
    style.x_label = "x1";
    style.y_label = "x2";
    plan.write("orbit.svg", render_section_plot(first, style));
    return m;
  });
}

json round_sphere_defaults() {
  return {{"profile", RotationalProfile::round_sphere().to_json()},
          {"metric", metric_block("rotational", 0.5, 1.5, 2.0)},
          {"integrator", base_integrator()},
          {"section", SectionSpec::equator().to_json()},
          {"analysis",
           {{"samples", 1000},
            {"x2_span", 3.0},
            {"axioms_tol", 1e-10},
            {"periodicity_samples", 50},
            {"periodicity_cone", 0.5},
            {"periodicity_tol", 1e-6},
            {"grid", 8},
            {"return_tol", 1e-6},
            {"extension_s", 1.0},
            {"extension_tol", 1e-5},
            {"conservation_orbits", 5},
            {"conservation_T", 100.0},
            {"conservation_tol", 1e-8}}}};
}

// ---------------------------------------------------------------------------
// katok-sphere

void run_katok_sphere(Plan& plan) {
  const auto f = plan.profile();
  const auto cfg = plan.integrator();
  const double span = plan.num("x2_span");

  plan.check("convexity_gate", ">", 0.0, [&] { return gate_measure(plan); });
  plan.check("finsler_axioms", "<=", plan.num("axioms_tol"),
             [&] { return axioms_measure(plan.metric(), plan.rng(), plan.count("samples"), -span, span); });
  plan.check("fiber_convexity", ">", 0.0,
             [&] { return convexity_measure(plan.metric(), plan.rng(), plan.count("samples"), -span, span); });

  plan.check("locality_outside", "<=", 0.0, [&]() -> Measured {
    const auto& m = plan.metric();
    const double a1 = m.cutoffs()->a1;
    double worst = 0.0;
    std::size_t n = 0;
    while (n < plan.count("samples")) {
      const auto p = random_covector(plan.rng(), f, -span, span);
      if (cone_membership(f, a1, p)) continue;
      worst = std::max(worst, std::abs(m(p) - eval_H0(f, p)));
      ++n;
    }
    return {worst, "max |H_alpha - H0| outside U_a1 over " + std::to_string(n) + " samples"};
  });
  plan.check("locality_inside", "<=", plan.num("locality_tol"), [&]() -> Measured {
    const auto& m = plan.metric();
    const auto samples = cone_samples(plan.rng(), f, m.cutoffs()->a0, plan.count("samples"));
    double worst = 0.0;
    for (const auto& p : samples) worst = std::max(worst, std::abs(m(p) - (eval_H0(f, p) + m.alpha() * p.xi1)));
    return {worst, "max |H_alpha - (H0 + alpha xi1)| inside U_a0 over " + std::to_string(samples.size()) + " samples"};
  });
  plan.check("commuting_flows", "<=", plan.num("commuting_tol"), [&]() -> Measured {
    const auto& m = plan.metric();
    const auto samples = cone_samples(plan.rng(), f, m.cutoffs()->a0, plan.count("commuting_samples"));
    const Domain dom = Domain::of(f);
    std::vector<double> worst(samples.size(), 0.0);
    parallel_for(samples.size(), [&](std::size_t i) {
      for (double t : {0.5 * kPi, kPi, 1.5 * kPi, kTwoPi}) {
        const auto direct = integrate_state(m, samples[i], t, cfg);
        const auto composed = compose_commuting_flows(f, *m.cutoffs(), m.alpha(), samples[i], t, cfg);
        worst[i] = std::max(worst[i], dom.distance(direct, composed));
      }
    });
    return {*std::max_element(worst.begin(), worst.end()),
            "max distance between the direct and composed flows at t = pi/2, pi, 3pi/2, 2pi"};
  });

  std::optional<DualMetric> reversible;
  const auto get_reversible = [&]() -> const DualMetric& {
    if (!reversible) {
      const auto& m = plan.metric();
      reversible = m.kind() == DualMetric::Kind::Reversibilized ? m : reversibilize(m);
    }
    return *reversible;
  };
  plan.check("reversibility", "<=", plan.num("reversibility_tol"), [&]() -> Measured {
    const auto& h = get_reversible();
    double worst = 0.0;
    for (std::size_t i = 0; i < plan.count("samples"); ++i) {
      const auto p = random_covector(plan.rng(), f, -span, span);
      worst = std::max(worst, std::abs(h({p.x1, p.x2, -p.xi1, -p.xi2}) - h(p)));
    }
    return {worst, "max |H'(-xi) - H'(xi)|"};
  });
  plan.check("seam_jet", "<=", plan.num("seam_tol"), [&]() -> Measured {
    const auto r = seam_jet_check(get_reversible());
    return {r.max_mismatch, "worst finite-difference order " + std::to_string(r.worst_order)};
  });

  plan.check("rotation_convergence", "<=", plan.num("rotation_tol"), [&]() -> Measured {
    const auto map = section_lifted_map(plan.metric(), plan.section(), cfg);
    const auto start = plan.list("rotation_start");
    const auto p0 = section_state(plan.metric(), plan.section(), {start.at(0), start.at(1)});
    const auto a = rotation_number(map, p0, plan.count("rotation_short"));
    const auto b = rotation_number(map, p0, plan.count("rotation_long"));
    plan.results()["rotation"] = {{"short", a.to_json()}, {"long", b.to_json()}};
    return {std::abs(a.value - b.value), "rho(" + std::to_string(a.n) + ") = " + fmt(a.value) + ", rho(" +
                                             std::to_string(b.n) + ") = " + fmt(b.value)};
  });
  plan.check("area_preservation", "<=", plan.num("area_tol"), [&]() -> Measured {
    const auto c = plan.list("area_corner");
    const auto r = area_preservation_check(plan.metric(), plan.section(), {c.at(0), c.at(1)}, plan.num("area_ds"),
                                           plan.num("area_du"), 16, cfg);
    return {r.relative_error, "relative change of the (s, xi_s) area of a return-map rectangle"};
  });
  plan.check("invariant_curves", "<=", plan.num("curve_tol"), [&]() -> Measured {
    const auto& m = plan.metric();
    const auto spec = plan.section();
    const std::size_t seeds = plan.count("iterate_seeds");
    const std::size_t steps = plan.count("iterate_steps");
    std::vector<AnnulusPoint> starts;
    for (std::size_t i = 0; i < seeds; ++i) {
      const double s = plan.rng().uniform(0.0, kTwoPi);
      const double u = plan.rng().uniform(0.2, 1.3);
      starts.push_back({s, i % 2 == 0 ? u : kPi - u});
    }
    std::vector<std::vector<AnnulusPoint>> orbits(seeds);
    parallel_for(seeds, [&](std::size_t i) {
      auto p = section_state(m, spec, starts[i]);
      orbits[i].push_back(starts[i]);
      for (std::size_t k = 0; k < steps; ++k) {
        const auto r = first_return_state(m, spec, p, cfg);
        orbits[i].push_back(r.image);
        p = r.end;
      }
    });
    double spread = 0.0;
    std::ostringstream csv;
    csv << "seed,k,s,u\n";
    std::vector<PlotSeries> series;
    const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"};
    for (std::size_t i = 0; i < seeds; ++i) {
      double lo = kInf;
      double hi = -kInf;
      PlotSeries ps;
      ps.color = colors[i % 5];
      for (std::size_t k = 0; k < orbits[i].size(); ++k) {
        const auto& a = orbits[i][k];
        lo = std::min(lo, a.u);
        hi = std::max(hi, a.u);
        csv << i << ',' << k << ',' << fmt(a.s) << ',' << fmt(a.u) << '\n';
        ps.points.push_back({a.s, a.u});
      }
      spread = std::max(spread, hi - lo);
      series.push_back(std::move(ps));
    }
    plan.write("section_iterates.csv", csv.str());
    PlotStyle style;
    style.title = "section iterates, Katok sphere";
    style.bounds = std::array<double, 4>{0.0, kTwoPi, 0.0, kPi};
    style.point_radius = 1.0;
    plan.write("section_iterates.svg", render_svg(series, style));
    return {spread, "max spread of u along " + std::to_string(seeds) + " orbits of " + std::to_string(steps) +
                        " returns (invariant circles u = const)"};
  });
  plan.check("return_map_entropy", "<=", plan.num("entropy_tol"), [&]() -> Measured {
    const auto& m = plan.metric();
    const auto spec = plan.section();
    std::vector<std::vector<double>> pts(plan.count("entropy_points"));
    for (auto& p : pts) {
      const double s = plan.rng().uniform(0.0, kTwoPi);
      p = {s, plan.rng().uniform(0.1, kPi - 0.1)};
    }
    const std::size_t T = plan.count("entropy_T_max");
    const auto cloud = make_orbit_cloud(
        pts, T,
        [&](std::vector<double>& x) {
          const auto r = first_return(m, spec, {x[0], x[1]}, cfg);
          x = {r.image.s, r.image.u};
        },
        [](const double* a, const double* b) {
          return std::max(circle_distance(a[0], b[0], kTwoPi), std::abs(a[1] - b[1]));
        });
    const auto e = entropy_separated_sets(cloud, steps_upto(T), plan.list("entropy_eps"));
    plan.write("entropy.csv", entropy_csv(e));
    plan.results()["return_map_entropy"] = {{"value", e.value}, {"eps", e.value_eps}};
    return {e.value, "tail slope at eps = " + fmt(e.value_eps)};
  });
  plan.check("conservation", "<=", plan.num("conservation_tol"), [&]() -> Measured {
    std::vector<CotangentPoint> starts;
    for (std::size_t i = 0; i < plan.count("conservation_orbits"); ++i) {
      starts.push_back(unit_covector(f, plan.rng().uniform(0.0, kTwoPi), plan.rng().uniform(-1.0, 1.0),
                                     plan.rng().uniform(0.0, kTwoPi)));
    }
    return conservation_measure(plan.metric(), starts, plan.num("conservation_T"), cfg);
  });
}

json katok_sphere_defaults() {
  return {{"profile", RotationalProfile::round_sphere().to_json()},
          {"metric", metric_block("katok", 0.5, 1.5, 2.0)},
          {"integrator", base_integrator()},
          {"section", SectionSpec::equator().to_json()},
          {"analysis",
           {{"samples", 1000},
            {"x2_span", 4.0},
            {"axioms_tol", 1e-10},
            {"locality_tol", 1e-14},
            {"commuting_samples", 10},
            {"commuting_tol", 1e-6},
            {"reversibility_tol", 1e-12},
            {"seam_tol", 1e-5},
            {"rotation_start", {1.0, 1.0}},
            {"rotation_short", 1000},
            {"rotation_long", 10000},
            {"rotation_tol", 1e-3},
            {"area_corner", {1.0, 0.6}},
            {"area_ds", 0.2},
            {"area_du", 0.1},
            {"area_tol", 1e-2},
            {"iterate_seeds", 5},
            {"iterate_steps", 1000},
            {"curve_tol", 1e-8},
            {"entropy_points", 2000},
            {"entropy_T_max", 40},
            {"entropy_eps", {1.0, 0.8}},
            {"entropy_tol", 0.05},
            {"conservation_orbits", 5},
            {"conservation_T", 100.0},
            {"conservation_tol", 1e-8}}}};
}

// ---------------------------------------------------------------------------
// katok-torus

void run_katok_torus(Plan& plan) {
  const auto f = plan.profile();
  const auto cfg = plan.integrator();
  const auto long_cfg = plan.long_integrator();
  const double L = x2_reach(f, 4.0);
  const auto integrable = DualMetric::rotational(f);

  plan.check("convexity_gate", ">", 0.0, [&] { return gate_measure(plan); });
  plan.check("conservation", "<=", plan.num("conservation_tol"), [&]() -> Measured {
    const auto& m = plan.metric();
    std::vector<CotangentPoint> starts;
    for (double c : plan.list("turning_cs")) starts.push_back(clairaut_state(m, 0.0, 0.0, c));
    starts.push_back(clairaut_state(m, 0.0, 0.0, plan.num("graph_c_fraction") * f.minimum()));
    for (std::size_t i = 0; i < plan.count("conservation_orbits"); ++i) {
      starts.push_back(unit_covector(f, plan.rng().uniform(0.0, kTwoPi), plan.rng().uniform(0.0, L),
                                     plan.rng().uniform(0.0, kTwoPi)));
    }
    OrbitTrace first;
    auto r = conservation_measure(m, starts, plan.num("conservation_T"), cfg, &first);
    PlotStyle style;
    style.title = "trapped orbit, Katok torus";
    style.x_label = "x1";
    style.y_label = "x2";
    style.bounds = std::array<double, 4>{0.0, kTwoPi, 0.0, L};
    plan.write("trapped_orbit.svg", render_section_plot(first, style));
    return r;
  });
  plan.check("asymptotic_direction_trapped", "<=", plan.num("direction_tol"), [&]() -> Measured {
    const auto& m = plan.metric();
    const double c = plan.num("direction_c");
    const auto trace = integrate_orbit(m, clairaut_state(m, 0.0, 0.0, c), plan.num("direction_T"), long_cfg);
    const auto d = asymptotic_direction(trace.lifted_base, kInf);
    plan.results()["direction_trapped"] = d.to_json();
    return {d.residual, "chord-angle residual of the trapped orbit xi1 = " + fmt(c)};
  });
  plan.check("trapped_turning_point", "<=", plan.num("turning_tol"), [&]() -> Measured {
    const auto& m = plan.metric();
    const auto cs = plan.list("turning_cs");
    std::vector<double> excess(cs.size());
    std::vector<double> reach(cs.size());
    std::vector<double> bound(cs.size());
    parallel_for(cs.size(), [&](std::size_t i) {
      bound[i] = turning_point(m, cs[i]);
      const auto trace = integrate_orbit(m, clairaut_state(m, 0.0, 0.0, cs[i]), plan.num("trapped_T"), long_cfg);
      for (const auto& q : trace.lifted_base) reach[i] = std::max(reach[i], std::abs(q[1]));
      excess[i] = reach[i] - bound[i];
    });
    json rows = json::array();
    for (std::size_t i = 0; i < cs.size(); ++i) rows.push_back({{"c", cs[i]}, {"sup_x2", reach[i]}, {"x_star", bound[i]}});
    plan.results()["turning_points"] = rows;
    return {*std::max_element(excess.begin(), excess.end()), "max of sup |x2| - x*(c) over the trapped orbits"};
  });

  plan.check("level_set_graphs", ">=", 6.0, [&]() -> Measured {
    const double c = plan.num("graph_c_fraction") * f.minimum();
    std::vector<FiberSample> upper;
    std::vector<FiberSample> both;
    const std::size_t n = plan.count("graph_samples");
    for (std::size_t i = 0; i < n; ++i) {
      const double x1 = plan.rng().uniform(0.0, kTwoPi);
      const double x2 = plan.rng().uniform(0.0, L);
      const double r = f.value(x2);
      const double xi2 = std::sqrt(r * r - c * c);
      upper.push_back({x1, x2, std::atan2(xi2, c)});
      both.push_back({x1, x2, std::atan2(i % 2 == 0 ? xi2 : -xi2, c)});
    }
    double agree = 0.0;
    json rows = json::array();
    for (double bins : plan.list("graph_bins")) {
      GraphBinning b;
      b.n1 = b.n2 = static_cast<int>(bins);
      b.period2 = L;
      const auto g = invariant_graph_test(upper, b);
      const auto h = invariant_graph_test(both, b);
      agree += (g.is_graph ? 1.0 : 0.0) + (h.is_graph ? 0.0 : 1.0);
      rows.push_back({{"bins", bins}, {"single_sheet", g.to_json()}, {"two_sheets", h.to_json()}});
    }
    plan.results()["level_set_graphs"] = rows;
    return {agree, "correct verdicts (one sheet is a graph, two sheets are not) over the bin resolutions"};
  });
  plan.check("katok_orbit_graph", "<=", plan.num("orbit_graph_tol"), [&]() -> Measured {
    const auto& m = plan.metric();
    const double c = plan.num("graph_c_fraction") * f.minimum();
    const auto trace = integrate_orbit(m, clairaut_state(m, 0.0, 0.0, c), plan.num("orbit_graph_T"), long_cfg);
    const auto samples = fiber_samples(trace);
    double worst = 0.0;
    for (std::size_t i = 0; i < samples.size(); i += 7) {
      const double xi2 = bisect([&](double y) { return m({0.0, samples[i].x2, c, y}) - 1.0; }, 0.0, 20.0);
      worst = std::max(worst, std::abs(samples[i].fiber - std::atan2(xi2, c)));
    }
    GraphBinning coarse;
    coarse.period2 = L;
    GraphBinning fine = coarse;
    fine.n1 = fine.n2 = 64;
    const auto g = invariant_graph_test(samples, coarse, &trace.lifted_base);
    const auto h = invariant_graph_test(samples, fine);
    plan.results()["katok_orbit_graph"] = {{"bins32", g.to_json()}, {"bins64", h.to_json()}};
    PlotSeries ps;
    for (const auto& s : samples) ps.points.push_back({s.x2, s.fiber});
    PlotStyle style;
    style.title = "fiber angle along a rotating orbit, Katok torus";
    style.x_label = "x2";
    style.y_label = "angle";
    style.point_radius = 0.8;
    plan.write("orbit_graph.svg", render_svg({ps}, style));
    if (!g.is_graph || !h.is_graph) return {kInf, "orbit samples are not a graph over the base"};
    return {worst, "max fiber deviation from the bisected graph; Lipschitz " + fmt(g.lipschitz_estimate) + " (32) / " +
                       fmt(h.lipschitz_estimate) + " (64)"};
  });
  plan.check("deviation_stabilization", "<=", plan.num("deviation_tol"), [&]() -> Measured {
    const double c = plan.num("graph_c_fraction") * f.minimum();
    const double T = plan.num("deviation_T");
    const CotangentPoint p{0.0, 0.0, c, std::sqrt(1.0 - c * c)};
    const auto trace = integrate_orbit(integrable, p, plan.num("deviation_multiple") * T, long_cfg);
    const auto rho = asymptotic_direction(trace.lifted_base).direction;
    const auto per_T = static_cast<std::size_t>(std::llround(T / long_cfg.checkpoint_interval));
    const double at_T = bounded_deviation(trace.lifted_base, rho, per_T + 1).sup_distance;
    const double at_2T = bounded_deviation(trace.lifted_base, rho, 2 * per_T + 1).sup_distance;
    plan.results()["deviation"] = {{"T", T}, {"D_T", at_T}, {"D_2T", at_2T}};
    if (!(at_T > 0.0)) return {kInf, "zero deviation at T"};
    return {std::abs(at_2T - at_T) / at_T, "relative change of the sup deviation from T to 2T"};
  });

  std::optional<TubeReport> tube_report;
  std::optional<TubeSpec> tube_spec;
  const auto get_tube = [&]() -> const TubeReport& {
    if (!tube_report) {
      const auto& m = plan.metric();
      tube_spec = clairaut_tube(m);
      const auto ensemble = sample_tube(m, *tube_spec, plan.count("tube_samples"), plan.seed() ^ plan.rng().bits());
      std::vector<std::pair<CotangentPoint, WitnessBall>> witnesses;
      for (double c : plan.list("witness_cs")) {
        witnesses.push_back({clairaut_state(m, 0.0, 0.0, c),
                             {clairaut_state(m, 0.0, 0.0, c + plan.num("witness_offset")), plan.num("witness_radius")}});
      }
      tube_report = tube_diagnostics(m, *tube_spec, ensemble, plan.num("tube_T"), plan.list("tube_eps"), witnesses,
                                     plan.num("witness_T"), long_cfg);
      json j = tube_report->to_json();
      j["c_lo"] = tube_spec->c_lo;
      j["c_hi"] = tube_spec->c_hi;
      plan.write("tube.json", j.dump(2) + "\n");
      plan.results()["tube"] = {{"c_lo", tube_spec->c_lo},
                                {"c_hi", tube_spec->c_hi},
                                {"eps_grid", tube_report->eps_grid},
                                {"boundary_fraction", tube_report->boundary_fraction},
                                {"collar_fraction", tube_report->collar_fraction},
                                {"failures", tube_report->failures}};
    }
    return *tube_report;
  };
  plan.check("tube_conservation", ">=", -plan.num("tube_gap_tol"), [&]() -> Measured {
    const auto& r = get_tube();
    if (r.failures > 0) return {-kInf, std::to_string(r.failures) + " ensemble orbits failed"};
    double worst = kInf;
    for (const auto& o : r.orbits) worst = std::min(worst, o.min_boundary_distance - o.gap);
    return {worst, "min over " + std::to_string(r.orbits.size()) + " orbits of (boundary distance - conservation gap)"};
  });
  plan.check("tube_witnesses", ">=", static_cast<double>(plan.count("witness_min")), [&]() -> Measured {
    const auto& r = get_tube();
    double holes = 0.0;
    double closest = kInf;
    for (const auto& w : r.witnesses) {
      if (w.hole && w.distance > 0.0) holes += 1.0;
      closest = std::min(closest, w.distance);
    }
    return {holes, "witness balls missed at F-time " + fmt(plan.num("witness_T")) + "; smallest distance " + fmt(closest)};
  });
  plan.check("tube_boundary_fraction_monotone", "<=", 0.0, [&]() -> Measured {
    const auto& r = get_tube();
    double violations = 0.0;
    for (std::size_t i = 1; i < r.eps_grid.size(); ++i) {
      if (r.boundary_fraction[i] < r.boundary_fraction[i - 1]) violations += 1.0;
    }
    return {violations, "decreases of boundary_fraction along the increasing eps grid of " +
                            std::to_string(r.eps_grid.size()) + " points"};
  });
  plan.check("tube_collar_bound", "<=", 0.0, [&]() -> Measured {
    const auto& r = get_tube();
    const double n = static_cast<double>(r.orbits.size());
    double worst = -kInf;
    for (std::size_t i = 0; i < r.eps_grid.size(); ++i) {
      const double q = r.collar_fraction[i];
      const double bound = 2.0 * q + 3.0 * std::sqrt(q * (1.0 - q) / n) + 1.0 / n;
      worst = std::max(worst, r.boundary_fraction[i] - bound);
    }
    return {worst, "max of boundary_fraction - (2 collar + 3 sigma + 1/n)"};
  });
  plan.check("integrable_time1_entropy", "<=", plan.num("entropy_tol"), [&]() -> Measured {
    const Domain dom = Domain::of(f);
    std::vector<std::vector<double>> pts(plan.count("entropy_points"));
    for (auto& p : pts) {
      const double x1 = plan.rng().uniform(0.0, kTwoPi);
      const double x2 = plan.rng().uniform(0.0, L);
      const double th = plan.rng().uniform(0.0, kTwoPi);
      const auto q = unit_covector(f, x1, x2, th);
      p = {q.x1, q.x2, q.xi1, q.xi2};
    }
    const std::size_t T = plan.count("entropy_T_max");
    const auto cloud = make_orbit_cloud(
        pts, T,
        [&](std::vector<double>& x) {
          const auto q = dom.reduce(integrate_state(integrable, {x[0], x[1], x[2], x[3]}, 1.0, cfg));
          x = {q.x1, q.x2, q.xi1, q.xi2};
        },
        [dom](const double* a, const double* b) {
          return dom.distance({a[0], a[1], a[2], a[3]}, {b[0], b[1], b[2], b[3]});
        });
    const auto e = entropy_separated_sets(cloud, steps_upto(T), plan.list("entropy_eps"));
    plan.write("entropy.csv", entropy_csv(e));
    plan.results()["time1_entropy"] = {{"value", e.value}, {"eps", e.value_eps}};
    return {e.value, "tail slope at eps = " + fmt(e.value_eps)};
  });
}

json katok_torus_defaults() {
  return {{"profile", make_spliced_profile(4.0, 0.5).to_json()},
          {"metric", metric_block("katok", 0.3, 1.4, 1.5)},
          {"integrator", base_integrator()},
          {"section", SectionSpec::equator().to_json()},
          {"analysis",
           {{"conservation_orbits", 5},
            {"conservation_T", 100.0},
            {"conservation_tol", 1e-8},
            {"direction_c", 0.96},
            {"direction_T", 1000.0},
            {"direction_tol", 1e-3},
            {"turning_cs", {0.9, 0.93, 0.96}},
            {"trapped_T", 200.0},
            {"turning_tol", 1e-4},
            {"graph_c_fraction", 0.5},
            {"graph_samples", 200000},
            {"graph_bins", {32, 64, 128}},
            {"orbit_graph_T", 5000.0},
            {"orbit_graph_tol", 1e-7},
            {"deviation_T", 200.0},
            {"deviation_multiple", 40.0},
            {"deviation_tol", 0.05},
            {"tube_samples", 500},
            {"tube_T", 50.0},
            {"tube_eps", {0.005, 0.01, 0.02, 0.05, 0.1, 0.2}},
            {"tube_gap_tol", 1e-6},
            {"witness_cs", {0.35, 0.45, 0.55, 0.65, 0.75}},
            {"witness_offset", 0.1},
            {"witness_radius", 0.05},
            {"witness_T", 1000.0},
            {"witness_min", 5},
            {"entropy_points", 2000},
            {"entropy_T_max", 40},
            {"entropy_eps", {3.0, 2.5}},
            {"entropy_tol", 0.05}}}};
}

// ---------------------------------------------------------------------------
// benchmark-maps

double wrap01(double x) { return x - std::floor(x); }

double circle01(const double* a, const double* b) { return circle_distance(a[0], b[0], 1.0); }

void run_benchmarks(Plan& plan) {
  // Jittered clouds: one uniform point per cell of a near-square grid on
  // [0, 1)^dim. Against i.i.d. clouds this halves the greedy-count bias of
  // the hyperbolic benchmarks.
  const auto cloud_points = [&](std::size_t dim) {
    const std::size_t n = plan.count("entropy_points");
    std::size_t rows = 1;
    if (dim == 2) {
      for (std::size_t d = 1; d * d <= n; ++d) {
        if (n % d == 0) rows = d;
      }
    } else if (dim != 1) {
      throw Error(ErrorKind::InvalidArgument, "jittered clouds are built in dimension 1 or 2");
    }
    const std::size_t cols = n / rows;
    std::vector<std::vector<double>> pts;
    pts.reserve(n);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) {
        if (dim == 1) {
          pts.push_back({(static_cast<double>(j) + plan.rng()()) / static_cast<double>(cols)});
        } else {
          const double a = (static_cast<double>(i) + plan.rng()()) / static_cast<double>(rows);
          pts.push_back({a, (static_cast<double>(j) + plan.rng()()) / static_cast<double>(cols)});
        }
      }
    }
    return pts;
  };
  const auto estimate = [&](const std::string& tag, const OrbitCloud& cloud, std::size_t T, const std::string& eps_key) {
    const auto e = entropy_separated_sets(cloud, steps_upto(T), plan.list(eps_key));
    plan.write("entropy_" + tag + ".csv", entropy_csv(e));
    plan.results()["entropy_" + tag] = {{"value", e.value}, {"eps", e.value_eps}};
    return e;
  };
  const std::size_t T_iso = plan.count("isometry_T");

  plan.check("entropy_identity", "<=", plan.num("isometry_tol"), [&]() -> Measured {
    const auto cloud = make_orbit_cloud(cloud_points(1), T_iso, [](std::vector<double>&) {}, circle01);
    const auto e = estimate("identity", cloud, T_iso, "isometry_eps");
    return {std::abs(e.value), "|h| of the identity"};
  });
  plan.check("entropy_rotation", "<=", plan.num("isometry_tol"), [&]() -> Measured {
    const double w = plan.num("rotation_angle");
    const auto cloud = make_orbit_cloud(cloud_points(1), T_iso, [w](std::vector<double>& x) { x[0] = wrap01(x[0] + w); },
                                        circle01);
    const auto e = estimate("rotation", cloud, T_iso, "isometry_eps");
    return {std::abs(e.value), "|h| of the rigid rotation by " + fmt(w)};
  });
  plan.check("entropy_doubling", "<=", plan.num("doubling_tol"), [&]() -> Measured {
    const std::size_t T = plan.count("doubling_T");
    const auto cloud = make_orbit_cloud(cloud_points(1), T, [](std::vector<double>& x) { x[0] = wrap01(2.0 * x[0]); },
                                        circle01);
    const auto e = estimate("doubling", cloud, T, "doubling_eps");
    const double target = std::log(2.0);
    return {std::abs(e.value - target) / target, "h = " + fmt(e.value) + " against log 2"};
  });
  plan.check("entropy_cat", "<=", plan.num("cat_tol"), [&]() -> Measured {
    const std::size_t T = plan.count("cat_T");
    const auto cloud = make_orbit_cloud(
        cloud_points(2), T,
        [](std::vector<double>& x) {
          const double a = wrap01(2.0 * x[0] + x[1]);
          const double b = wrap01(x[0] + x[1]);
          x = {a, b};
        },
        [](const double* a, const double* b) {
          return std::hypot(circle_distance(a[0], b[0], 1.0), circle_distance(a[1], b[1], 1.0));
        });
    const auto e = estimate("cat", cloud, T, "cat_eps");
    const double target = std::log((3.0 + std::sqrt(5.0)) / 2.0);
    return {std::abs(e.value - target) / target, "h = " + fmt(e.value) + " against log((3 + sqrt 5)/2)"};
  });
  plan.check("rotation_rigid", "<=", plan.num("rotation_tol"), [&]() -> Measured {
    const double w = 0.25;
    const auto r = rotation_number([w](double x) { return std::make_pair(wrap01(x + w), w); }, plan.rng()(),
                                   plan.count("rotation_n"));
    return {std::abs(r.value - w), "rho = " + fmt(r.value) + " for the rotation by 1/4"};
  });
  plan.check("rotation_twist", "<=", plan.num("rotation_tol"), [&]() -> Measured {
    using SU = std::array<double, 2>;
    const auto twist = [](const SU& p) { return std::make_pair(SU{wrap01(p[0] + p[1]), p[1]}, p[1]); };
    const auto r = rotation_number(twist, SU{plan.rng()(), 1.0 / 3.0}, plan.count("rotation_n"));
    return {std::abs(r.value - 1.0 / 3.0), "rho = " + fmt(r.value) + " on the twist-map circle u = 1/3"};
  });
}

json benchmark_defaults() {
  return {{"profile", RotationalProfile::round_sphere().to_json()},
          {"metric", metric_block("rotational", 0.5, 1.5, 2.0)},
          {"integrator", base_integrator()},
          {"section", SectionSpec::equator().to_json()},
          {"analysis",
           {{"entropy_points", 2000},
            {"isometry_T", 10},
            {"isometry_eps", {0.1, 0.05, 0.02}},
            {"isometry_tol", 0.02},
            {"rotation_angle", 0.3819660112501051},
            {"doubling_T", 12},
            {"doubling_eps", {0.2, 0.1, 0.05, 0.02}},
            {"doubling_tol", 0.15},
            {"cat_T", 8},
            {"cat_eps", {0.3, 0.25, 0.2, 0.15, 0.1}},
            {"cat_tol", 0.10},
            {"rotation_n", 1000},
            {"rotation_tol", 1e-9}}}};
}

// ---------------------------------------------------------------------------
// appendix-smooth-division

struct BatteryCase {
  std::string name;
  SmoothQuotient::Function F;
  /// n-th t-derivative of F at t = 0.
  std::function<double(double, int)> dF;
};

std::vector<BatteryCase> battery() {
  return {
      {"sin(x t)",
       [](double x, double t) { return std::sin(x * t); },
       [](double x, int n) {
         const double p = std::pow(x, n);
         return n % 4 == 1 ? p : n % 4 == 3 ? -p : 0.0;
       }},
      {"t exp(x t)", [](double x, double t) { return t * std::exp(x * t); },
       [](double x, int n) { return n * std::pow(x, n - 1); }},
      {"expm1(x t)", [](double x, double t) { return std::expm1(x * t); }, [](double x, int n) { return std::pow(x, n); }},
      {"log1p(x t)", [](double x, double t) { return std::log1p(x * t); },
       [](double x, int n) {
         double fact = 1.0;
         for (int i = 2; i < n; ++i) fact *= i;
         return (n % 2 ? 1.0 : -1.0) * fact * std::pow(x, n);
       }},
      {"x sin t + t^3", [](double x, double t) { return x * std::sin(t) + t * t * t; },
       [](double x, int n) { return n == 1 ? x : n == 3 ? 6.0 - x : 0.0; }},
  };
}

SmoothDivideOptions divide_options(const Plan& plan) {
  SmoothDivideOptions o;
  o.order = static_cast<int>(plan.count("order"));
  o.t_switch = plan.num("t_switch");
  o.step = plan.num("node_step");
  o.nodes = static_cast<int>(plan.count("nodes"));
  return o;
}

void run_appendix(Plan& plan) {
  const auto xs = plan.list("x_values");
  const double h = plan.num("fd_step");
  for (int k = 0; k <= 2; ++k) {
    plan.check("derivative_identity_k" + std::to_string(k), "<=", plan.num("identity_tol"), [&, k]() -> Measured {
      double worst = 0.0;
      std::string where;
      for (const auto& c : battery()) {
        const auto G = smooth_divide(c.F, divide_options(plan));
        for (double x : xs) {
          const double exact = c.dF(x, k + 1) / (k + 1);
          const auto g = [&](double t) { return G(x, t); };
          // Five-point stencils on G itself, inside the interpolation branch.
          double fd = g(0.0);
          if (k == 1) fd = (-g(2 * h) + 8 * g(h) - 8 * g(-h) + g(-2 * h)) / (12 * h);
          if (k == 2) fd = (-g(2 * h) + 16 * g(h) - 30 * g(0.0) + 16 * g(-h) - g(-2 * h)) / (12 * h * h);
          const double err = std::max(std::abs(G.derivative_at_zero(x, k) - exact), std::abs(fd - exact));
          if (err >= worst) {
            worst = err;
            where = c.name + " at x = " + fmt(x);
          }
        }
      }
      return {worst, "max error of the model and finite-difference derivative; worst " + where};
    });
  }
  plan.check("not_vanishing_rejected", ">=", 1.0, []() -> Measured {
    const auto G = smooth_divide([](double x, double t) { return 1.0 + x * t; });
    try {
      G(0.5, 0.2);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::NotVanishing) return {1.0, "F(x, 0) = 1 rejected"};
      return {0.0, std::string("wrong error: ") + e.what()};
    }
    return {0.0, "F(x, 0) = 1 accepted"};
  });
  plan.check("branch_continuity", "<=", plan.num("continuity_tol"), [&]() -> Measured {
    const auto opts = divide_options(plan);
    double worst = 0.0;
    for (const auto& c : battery()) {
      const auto G = smooth_divide(c.F, opts);
      for (double x : xs) {
        for (double side : {-1.0, 1.0}) {
          const double inner = G(x, side * opts.t_switch);
          const double outer = G(x, side * opts.t_switch * (1.0 + 1e-9));
          worst = std::max(worst, std::abs(inner - outer));
        }
      }
    }
    return {worst, "max jump of G across the switch between the interpolation and direct branches"};
  });
}

json appendix_defaults() {
  const SmoothDivideOptions o;
  return {{"profile", RotationalProfile::round_sphere().to_json()},
          {"metric", metric_block("rotational", 0.5, 1.5, 2.0)},
          {"integrator", base_integrator()},
          {"section", SectionSpec::equator().to_json()},
          {"analysis",
           {{"x_values", {-1.0, 0.5, 1.5}},
            {"order", o.order},
            {"t_switch", o.t_switch},
            {"node_step", o.step},
            {"nodes", o.nodes},
            {"fd_step", 4e-4},
            {"identity_tol", 1e-4},
            {"continuity_tol", 1e-6}}}};
}

}  // namespace

const std::vector<ScenarioDef>& scenario_registry() {
  static const std::vector<ScenarioDef> registry{
      {"round-sphere-baseline",
       {"finsler_axioms", "fiber_convexity", "periodicity_2pi", "return_map_identity", "return_time_2pi",
        "boundary_extension", "conservation"},
       round_sphere_defaults, run_round_sphere},
      {"katok-sphere",
       {"convexity_gate", "finsler_axioms", "fiber_convexity", "locality_outside", "locality_inside", "commuting_flows",
        "reversibility", "seam_jet", "rotation_convergence", "area_preservation", "invariant_curves",
        "return_map_entropy", "conservation"},
       katok_sphere_defaults, run_katok_sphere},
      {"katok-torus",
       {"convexity_gate", "conservation", "asymptotic_direction_trapped", "trapped_turning_point", "level_set_graphs",
        "katok_orbit_graph", "deviation_stabilization", "tube_conservation", "tube_witnesses",
        "tube_boundary_fraction_monotone", "tube_collar_bound", "integrable_time1_entropy"},
       katok_torus_defaults, run_katok_torus},
      {"benchmark-maps",
       {"entropy_identity", "entropy_rotation", "entropy_doubling", "entropy_cat", "rotation_rigid", "rotation_twist"},
       benchmark_defaults, run_benchmarks},
      {"appendix-smooth-division",
       {"derivative_identity_k0", "derivative_identity_k1", "derivative_identity_k2", "not_vanishing_rejected",
        "branch_continuity"},
       appendix_defaults, run_appendix},
  };
  return registry;
}

}  // namespace finsler::detail
