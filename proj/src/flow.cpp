#include "finsler/flow.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "finsler/error.hpp"

namespace finsler {

void IntegratorConfig::validate() const {
  auto positive = [](double v, const char* key) {
    if (!(v > 0.0)) throw Error(ErrorKind::ConfigInvalid, std::string("integrator.") + key + ": must be positive");
  };
  positive(rel_tol, "rel_tol");
  positive(abs_tol, "abs_tol");
  positive(max_step, "max_step");
  positive(invariant_drift_tol, "invariant_drift_tol");
  positive(checkpoint_interval, "checkpoint_interval");
  positive(pole_cap, "pole_cap");
  if (max_steps == 0) throw Error(ErrorKind::ConfigInvalid, "integrator.max_steps: must be positive");
}

nlohmann::json IntegratorConfig::to_json() const {
  return {{"rel_tol", rel_tol},
          {"abs_tol", abs_tol},
          {"max_step", max_step},
          {"invariant_drift_tol", invariant_drift_tol},
          {"projection", projection},
          {"checkpoint_interval", checkpoint_interval},
          {"pole_cap", pole_cap},
          {"max_steps", max_steps}};
}

IntegratorConfig IntegratorConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::ConfigInvalid, "integrator: expected an object");
  IntegratorConfig c;
  for (const auto& [key, value] : j.items()) {
    auto number = [&]() {
      if (!value.is_number()) throw Error(ErrorKind::ConfigInvalid, "integrator." + key + ": expected a number");
      return value.get<double>();
    };
    if (key == "rel_tol") {
      c.rel_tol = number();
    } else if (key == "abs_tol") {
      c.abs_tol = number();
    } else if (key == "max_step") {
      c.max_step = number();
    } else if (key == "invariant_drift_tol") {
      c.invariant_drift_tol = number();
    } else if (key == "checkpoint_interval") {
      c.checkpoint_interval = number();
    } else if (key == "pole_cap") {
      c.pole_cap = number();
    } else if (key == "max_steps") {
      if (!value.is_number_unsigned()) throw Error(ErrorKind::ConfigInvalid, "integrator.max_steps: expected a count");
      c.max_steps = value.get<std::size_t>();
    } else if (key == "projection") {
      if (!value.is_boolean()) throw Error(ErrorKind::ConfigInvalid, "integrator.projection: expected a boolean");
      c.projection = value.get<bool>();
    } else {
      throw Error(ErrorKind::ConfigInvalid, "integrator." + key + ": unknown key");
    }
  }
  c.validate();
  return c;
}

std::array<double, 4> hamiltonian_vector_field(const DualMetric& metric, const CotangentPoint& p) {
  const PhaseGradient g = metric.gradient(p);
  return {g.xi1, g.xi2, -g.x1, -g.x2};
}

FlowIntegrator::FlowIntegrator(const DualMetric& metric, const IntegratorConfig& config)
    : metric_(&metric),
      config_(config),
      sphere_(metric.profile() != nullptr && metric.profile()->is_round_sphere()),
      rk_([m = &metric](double, const Dop853<4>::Vector& y) { return hamiltonian_vector_field(*m, to_point(y)); },
          {config.rel_tol, config.abs_tol, config.max_step, config.max_steps}) {
  config_.validate();
}

void FlowIntegrator::reset(double t0, const CotangentPoint& p0) {
  rk_.reset(t0, to_array(p0));
  check_pole();
}

void FlowIntegrator::check_pole() const {
  if (sphere_ && std::abs(rk_.state()[1]) > config_.pole_cap) {
    throw Error(ErrorKind::PoleProximity, "|x2| exceeded " + std::to_string(config_.pole_cap) +
                                              " at t = " + std::to_string(rk_.time()));
  }
}

void FlowIntegrator::step(double t_end) {
  try {
    rk_.step(t_end);
  } catch (const Error& e) {
    // Near a missing pole the field blows up and the step size collapses
    // before |x2| reaches the cap.
    if (sphere_ && e.kind() == ErrorKind::StepFailure && std::abs(rk_.state()[1]) > 0.5 * config_.pole_cap) {
      throw Error(ErrorKind::PoleProximity, "step size collapsed at x2 = " + std::to_string(rk_.state()[1]));
    }
    throw;
  }
  check_pole();
}

void FlowIntegrator::advance(double t_end) {
  while (rk_.time() != t_end) step(t_end);
}

namespace {

struct DriftMonitor {
  double H0;
  double H1_0;
  double h1_scale;
  double tol;
  double max_H = 0.0;
  double max_H1 = 0.0;

  DriftMonitor(const DualMetric& m, const CotangentPoint& p0, double tol_)
      : H0(m(p0)), H1_0(p0.xi1), h1_scale(std::max(std::abs(p0.xi1), H0)), tol(tol_) {}

  InvariantSample check(const DualMetric& m, double t, const CotangentPoint& p) {
    const InvariantSample s{t, m(p), p.xi1};
    const double dH = std::abs(s.H - H0) / H0;
    const double dH1 = std::abs(s.H1 - H1_0) / h1_scale;
    max_H = std::max(max_H, dH);
    max_H1 = std::max(max_H1, dH1);
    if (dH > tol || dH1 > tol) {
      std::ostringstream msg;
      msg << "relative drift of " << (dH > tol ? "H" : "H1") << ' ' << std::max(dH, dH1) << " at t = " << t;
      throw Error(ErrorKind::InvariantDrift, msg.str());
    }
    return s;
  }
};

// Newton step on xi2 alone, so xi1 (conserved exactly by the scheme) is
// left untouched. Skipped where dH/dxi2 nearly vanishes (turning points);
// the next checkpoint corrects instead.
void project_to_level(const DualMetric& metric, double level, CotangentPoint& p) {
  const double h = metric(p);
  const PhaseGradient g = metric.gradient(p);
  if (std::abs(g.xi2) < 1e-3 * std::hypot(g.xi1, g.xi2)) return;
  p.xi2 -= (h - level) / g.xi2;
}

}  // namespace

OrbitTrace integrate_orbit(const DualMetric& metric, const CotangentPoint& p0, double T,
                           const IntegratorConfig& config) {
  if (!(T > 0.0)) throw Error(ErrorKind::InvalidArgument, "integrate_orbit needs T > 0");
  if (!(metric(p0) > 0.0)) throw Error(ErrorKind::InvalidArgument, "H(p0) must be positive");
  OrbitTrace trace;
  trace.domain = metric.profile() ? Domain::of(*metric.profile()) : Domain{};
  DriftMonitor monitor(metric, p0, config.invariant_drift_tol);
  FlowIntegrator flow(metric, config);
  flow.reset(0.0, p0);

  auto record = [&](double t, const CotangentPoint& p) {
    trace.times.push_back(t);
    trace.states.push_back(trace.domain.reduce(p));
    trace.lifted_base.push_back({p.x1, p.x2});
    trace.invariant_log.push_back(monitor.check(metric, t, p));
  };
  record(0.0, p0);

  const double dt = config.checkpoint_interval;
  const auto n_checkpoints = static_cast<std::size_t>(std::floor(T / dt));
  std::size_t k = 1;
  auto next_time = [&]() { return k <= n_checkpoints ? std::min(T, dt * static_cast<double>(k)) : T; };

  if (config.projection) {
    while (flow.time() < T) {
      const double t = next_time();
      flow.advance(t);
      CotangentPoint p = flow.state();
      project_to_level(metric, monitor.H0, p);
      flow.reset(t, p);
      if (t > trace.times.back()) record(t, p);
      ++k;
    }
  } else {
    while (flow.time() < T) {
      flow.step(T);
      for (; k <= n_checkpoints + 1; ++k) {
        const double t = next_time();
        if (t > flow.time()) break;
        if (t > trace.times.back()) record(t, t == flow.time() ? flow.state() : flow.dense(t));
      }
    }
  }
  trace.max_drift_H = monitor.max_H;
  trace.max_drift_H1 = monitor.max_H1;
  return trace;
}

CotangentPoint integrate_state(const DualMetric& metric, const CotangentPoint& p0, double t,
                               const IntegratorConfig& config) {
  // The angular flow is the rigid shift in x1; no quadrature error.
  if (metric.kind() == DualMetric::Kind::Angular) return {p0.x1 + t, p0.x2, p0.xi1, p0.xi2};
  FlowIntegrator flow(metric, config);
  flow.reset(0.0, p0);
  flow.advance(t);
  return flow.state();
}

CotangentPoint compose_commuting_flows(const RotationalProfile& profile, const CutoffPair& cutoffs, double alpha,
                                       const CotangentPoint& p0, double t, const IntegratorConfig& config) {
  if (!cone_membership(profile, cutoffs.a0, p0)) {
    throw Error(ErrorKind::ConeViolation, "start point is outside U_a0");
  }
  const CotangentPoint shifted{p0.x1 + alpha * t, p0.x2, p0.xi1, p0.xi2};
  if (t == 0.0) return shifted;
  const DualMetric h0 = DualMetric::rotational(profile);
  if (t < 0.0) {
    // The cone is invariant, so checking the endpoint suffices for the
    // backward direction as well as any recorded state does forward.
    const CotangentPoint end = integrate_state(h0, shifted, t, config);
    if (!cone_membership(profile, cutoffs.a0, end)) throw Error(ErrorKind::ConeViolation, "orbit left U_a0");
    return end;
  }
  const OrbitTrace trace = integrate_orbit(h0, shifted, t, config);
  for (const auto& p : trace.states) {
    if (!cone_membership(profile, cutoffs.a0, p)) {
      throw Error(ErrorKind::ConeViolation, "orbit left U_a0");
    }
  }
  const auto& base = trace.lifted_base.back();
  const auto& last = trace.states.back();
  return {base[0], base[1], last.xi1, last.xi2};
}

PeriodicityReport check_periodicity(const DualMetric& metric, const std::vector<CotangentPoint>& samples, double T,
                                    const IntegratorConfig& config) {
  PeriodicityReport report;
  const Domain domain = metric.profile() ? Domain::of(*metric.profile()) : Domain{};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const CotangentPoint end = integrate_state(metric, samples[i], T, config);
    const double d = domain.distance(samples[i], end);
    report.distances.push_back(d);
    if (d > report.max_distance || i == 0) {
      report.max_distance = d;
      report.worst = i;
    }
  }
  return report;
}

std::vector<std::array<double, 2>> lift_to_cover(const OrbitTrace& trace) {
  std::vector<std::array<double, 2>> out;
  if (trace.states.empty()) return out;
  const double p1 = trace.domain.period_x1;
  const auto p2 = trace.domain.period_x2;
  const bool have_witness = trace.lifted_base.size() == trace.states.size();
  out.reserve(trace.states.size());
  out.push_back({trace.states[0].x1, trace.states[0].x2});
  for (std::size_t i = 1; i < trace.states.size(); ++i) {
    if (have_witness) {
      const double m1 = std::abs(trace.lifted_base[i][0] - trace.lifted_base[i - 1][0]);
      const double m2 = std::abs(trace.lifted_base[i][1] - trace.lifted_base[i - 1][1]);
      if (m1 >= 0.5 * p1 || (p2 && m2 >= 0.5 * *p2)) {
        throw Error(ErrorKind::LiftAmbiguity, "step " + std::to_string(i) + " moves half a period or more");
      }
    }
    double d1 = trace.states[i].x1 - trace.states[i - 1].x1;
    d1 -= p1 * std::round(d1 / p1);
    double d2 = trace.states[i].x2 - trace.states[i - 1].x2;
    if (p2) d2 -= *p2 * std::round(d2 / *p2);
    out.push_back({out.back()[0] + d1, out.back()[1] + d2});
  }
  return out;
}

void write_orbit_csv(std::ostream& out, const OrbitTrace& trace, const DualMetric& metric) {
  out << "t,x1,x2,xi1,xi2,lift_x1,lift_x2,H,H1\n";
  const auto old_flags = out.flags();
  const auto old_precision = out.precision();
  out << std::setprecision(17);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& p = trace.states[i];
    out << trace.times[i] << ',' << p.x1 << ',' << p.x2 << ',' << p.xi1 << ',' << p.xi2 << ','
        << trace.lifted_base[i][0] << ',' << trace.lifted_base[i][1] << ',' << metric(p) << ',' << p.xi1 << '\n';
  }
  out.flags(old_flags);
  out.precision(old_precision);
}

}  // namespace finsler
