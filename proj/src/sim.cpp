#include "stplan/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

namespace stplan::sim {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double wrap_angle(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

ilqr::Settings solver_settings(const SolverConfig& c) {
  ilqr::Settings s;
  s.max_iterations = c.n_iters;
  s.tolerance = c.tol;
  return s;
}

path::SmoothingOptions smoothing_options(const Scenario& sc) {
  path::SmoothingOptions o;
  o.weights = {sc.params.w_d, sc.params.w_kappa};
  o.bounds = {sc.params.kappa_min, sc.params.kappa_max};
  o.mu = sc.solver.mu_default;
  o.lambda_max = sc.solver.lambda_max_default;
  o.solver = solver_settings(sc.solver);
  return o;
}

velocity::ProfileOptions profile_options(const Scenario& sc) {
  velocity::ProfileOptions o;
  const Params& p = sc.params;
  o.weights = {p.w_v, p.w_a, p.v_min, p.a_min, p.a_max, p.j_min, p.j_max};
  o.mu = sc.solver.mu_default;
  o.lambda_max = sc.solver.lambda_max_default;
  o.mu_tmax = sc.solver.mu_tmax;
  o.lambda_max_tmax = sc.solver.lambda_max_tmax;
  o.solver = solver_settings(sc.solver);
  return o;
}

double max_of(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, x);
  return m;
}

}  // namespace

EgoState step_vehicle(const EgoState& ego, double accel, double steer, double dt,
                      double wheelbase) {
  using V = Eigen::Vector4d;  // x, y, heading, v
  const double curv = std::tan(steer) / wheelbase;
  auto f = [&](const V& q) {
    const double v = std::max(q(3), 0.0);
    return V(v * std::cos(q(2)), v * std::sin(q(2)), v * curv, accel);
  };
  const V q(ego.x, ego.y, ego.heading, ego.v);
  const V k1 = f(q);
  const V k2 = f(q + 0.5 * dt * k1);
  const V k3 = f(q + 0.5 * dt * k2);
  const V k4 = f(q + dt * k3);
  const V n = q + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  EgoState out = ego;
  out.x = n(0);
  out.y = n(1);
  out.heading = n(2);
  out.v = std::max(n(3), 0.0);
  return out;
}

Command low_level_control(const EgoState& ego, const Plan& plan, const SimConfig& cfg,
                          const Params& params) {
  Command c;
  const auto proj = plan.path.project(path::Point(ego.x, ego.y));
  const double end = plan.path.grid.back();
  if (proj.s >= end) {
    c.beyond_horizon = true;
    return c;
  }
  const auto& prof = plan.profile;
  c.v_plan = interpolate(prof.grid, prof.v, proj.s);
  c.a_plan = interpolate(prof.grid, prof.a, proj.s);
  c.accel_raw = c.a_plan + cfg.k_p * (c.v_plan - ego.v);
  if (c.v_plan <= 0.0) c.accel_raw = std::min(c.accel_raw, 0.0);
  // Creeping towards a standstill sample: brake to land on it.
  if (c.v_plan <= params.v_min + 0.05) {
    for (int k = 0; k < prof.size(); ++k) {
      if (prof.v[k] > 0.0 || prof.grid.at(k) < proj.s - 1.0) continue;
      const double gap = prof.grid.at(k) - proj.s;
      const double stop = gap > 0.05 ? -ego.v * ego.v / (2.0 * gap) : params.a_min;
      c.accel_raw = std::min(c.accel_raw, ego.v > 0.0 ? stop : 0.0);
      break;
    }
  }
  c.accel = std::clamp(c.accel_raw, params.a_min, params.a_max);

  const double look = std::max(cfg.lookahead_min, cfg.lookahead_time * ego.v);
  const path::PathState target = plan.path.state_at(std::min(proj.s + look, end));
  const double dx = target(0) - ego.x;
  const double dy = target(1) - ego.y;
  const double alpha = wrap_angle(std::atan2(dy, dx) - ego.heading);
  const double dist = std::max(std::hypot(dx, dy), 1e-6);
  c.steer = std::clamp(std::atan2(2.0 * cfg.wheelbase * std::sin(alpha), dist), -cfg.max_steer,
                       cfg.max_steer);
  return c;
}

bool boxes_overlap(const Box& a, const Box& b) {
  auto axes = [](const Box& q) {
    return std::array<path::Point, 2>{path::Point(std::cos(q.heading), std::sin(q.heading)),
                                      path::Point(-std::sin(q.heading), std::cos(q.heading))};
  };
  const auto aa = axes(a), ab = axes(b);
  const path::Point d(b.x - a.x, b.y - a.y);
  auto radius = [](const Box& q, const std::array<path::Point, 2>& ax, const path::Point& n) {
    return 0.5 * q.length * std::abs(ax[0].dot(n)) + 0.5 * q.width * std::abs(ax[1].dot(n));
  };
  for (const auto* set : {&aa, &ab})
    for (const auto& n : *set)
      if (std::abs(d.dot(n)) > radius(a, aa, n) + radius(b, ab, n)) return false;
  return true;
}

std::optional<ConstraintSet> parse_constraint_set(const std::string& name) {
  if (name == "none") return ConstraintSet::none;
  if (name == "tmin") return ConstraintSet::tmin;
  if (name == "tmin_tmax") return ConstraintSet::tmin_tmax;
  if (name == "all") return ConstraintSet::all;
  return std::nullopt;
}

std::string to_string(ConstraintSet c) {
  switch (c) {
    case ConstraintSet::none: return "none";
    case ConstraintSet::tmin: return "tmin";
    case ConstraintSet::tmin_tmax: return "tmin_tmax";
    case ConstraintSet::all: return "all";
  }
  return "all";
}

std::vector<path::Point> reference_points(const Scenario& sc, std::uint64_t seed) {
  std::vector<path::Point> raw;
  for (const auto& p : sc.reference.points) raw.emplace_back(p.x, p.y);
  if (sc.reference.noise_sigma <= 0.0) return raw;
  const double spacing =
      sc.reference.noise_spacing > 0.0 ? sc.reference.noise_spacing : sc.grid.delta_s;
  const auto dense = path::resample(raw, spacing);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sc.reference.noise_sigma);
  std::vector<path::Point> out = dense.points;
  for (std::size_t k = 0; k < out.size(); ++k) {
    const std::size_t a = k == 0 ? 0 : k - 1, b = std::min(k + 1, out.size() - 1);
    const path::Point t = (dense.points[b] - dense.points[a]).normalized();
    out[k] += noise(rng) * path::Point(-t.y(), t.x());
  }
  return out;
}

Simulation::Simulation(Scenario scenario, RunOptions options)
    : scenario_(std::move(scenario)), options_(options) {
  scenario_.validate();
  const std::uint64_t seed = options_.seed.value_or(scenario_.reference.seed);
  reference_ = path::ReferenceLine(reference_points(scenario_, seed), scenario_.grid.delta_s);
  duration_ = options_.duration.value_or(scenario_.sim.duration);

  const double s0 = scenario_.ego.s;
  const path::Point t = reference_.tangent(s0);
  const path::Point p = reference_.at(s0) + scenario_.ego.lateral * path::Point(-t.y(), t.x());
  ego_ = {p.x(), p.y(), std::atan2(t.y(), t.x()), scenario_.ego.v, s0};

  spawn_s_.assign(scenario_.actors.size(), 0.0);
  placed_.assign(scenario_.actors.size(), false);
  spawn_actors();
  committed_.assign(scenario_.signals.size(), false);

  const bool tmin = options_.constraints != ConstraintSet::none;
  const bool tmax = options_.constraints == ConstraintSet::tmin_tmax ||
                    options_.constraints == ConstraintSet::all;
  for (const auto& c : scenario_.spatiotemporal)
    verdict_.arrivals.push_back({c.id, c.is_min, c.is_min ? tmin : tmax, c.s, c.t, {}, true});
  verdict_.min_accel = verdict_.max_accel = 0.0;
}

bool Simulation::finished() const { return stopped_ || time_ >= duration_ - 1e-9; }

double Simulation::legal_limit(double s) const {
  double v = scenario_.speed_limits.empty() ? 13.89 : scenario_.speed_limits.front().v;
  for (const auto& l : scenario_.speed_limits)
    if (l.from <= s) v = l.v;
  return v;
}

double Simulation::d_safe() const {
  return scenario_.sim.d_safe_base + scenario_.sim.d_safe_time * ego_.v;
}

std::vector<ActorState> Simulation::actors() const {
  std::vector<ActorState> out;
  for (std::size_t i = 0; i < scenario_.actors.size(); ++i) {
    const Actor& a = scenario_.actors[i];
    ActorState st;
    st.id = a.id;
    st.speed = a.speed;
    st.active = placed_[i];
    const double travelled = a.speed * std::max(0.0, time_ - a.spawn_time);
    st.box.length = a.length;
    st.box.width = a.width;
    if (a.mode == Actor::Mode::reference) {
      const double s = spawn_s_[i] + travelled;
      const path::Point t = reference_.tangent(s);
      const path::Point p = reference_.at(s) + a.lateral * path::Point(-t.y(), t.x());
      st.box.x = p.x();
      st.box.y = p.y();
      st.box.heading = std::atan2(t.y(), t.x());
    } else {
      st.box.x = a.x + travelled * std::cos(a.heading);
      st.box.y = a.y + travelled * std::sin(a.heading);
      st.box.heading = a.heading;
    }
    out.push_back(st);
  }
  return out;
}

std::vector<Obstacle> Simulation::extract_obstacles(const path::SmoothedPath& path,
                                                    double origin) const {
  std::vector<Obstacle> out;
  const double ego_rel = ego_.s - origin;
  const double end = path.grid.back();
  // Traffic crossing or opposing the path is left to authored time bounds.
  const double aligned = std::cos(std::numbers::pi / 4.0);
  for (const ActorState& a : actors()) {
    if (!a.active) continue;
    const auto proj = path.project(path::Point(a.box.x, a.box.y));
    if (std::abs(proj.lateral) >= scenario_.sim.lateral_gate) continue;
    if (proj.s <= ego_rel || proj.s >= end) continue;
    const double c = std::cos(a.box.heading - path.state_at(proj.s)(2));
    if (c < aligned) continue;
    out.push_back({a.id, proj.s, a.speed * c, false});
  }
  for (std::size_t i = 0; i < scenario_.signals.size(); ++i) {
    const Signal& sg = scenario_.signals[i];
    if (!sg.red_at(time_) || committed_[i] || ego_.s >= sg.s + 1.0) continue;
    const double s = sg.s - origin;
    if (s <= end) out.push_back({sg.id, s, 0.0, true});
  }
  return out;
}

std::vector<velocity::SpatioTemporalConstraint> Simulation::time_constraints(double origin) const {
  std::vector<velocity::SpatioTemporalConstraint> out;
  if (options_.constraints == ConstraintSet::none) return out;
  const bool tmax = options_.constraints != ConstraintSet::tmin;
  // Plan time starts at the grid origin, slightly behind or ahead of the ego.
  const double lead = (ego_.s - origin) / std::max(ego_.v, scenario_.params.v_min);
  auto add = [&](const std::string& id, velocity::TimeBound kind, double s, double t) {
    const double t_rel = t - time_ + lead;
    if (ego_.s >= s || t - time_ <= 0.0) return;
    out.push_back({id, kind, s - origin, t_rel, scenario_.params.alpha, scenario_.params.beta});
  };
  for (const auto& c : scenario_.spatiotemporal) {
    if (!c.is_min && !tmax) continue;
    add(c.id, c.is_min ? velocity::TimeBound::min : velocity::TimeBound::max, c.s, c.t);
  }
  if (options_.constraints == ConstraintSet::all)
    for (const auto& sg : scenario_.signals) {
      if (!sg.emit_deadline || sg.red_at(time_)) continue;
      if (auto red = sg.next_red_after(time_)) add("deadline:" + sg.id, velocity::TimeBound::max, sg.s, *red);
    }
  return out;
}

Simulation::Planned Simulation::plan_cycle() const {
  const auto t_start = Clock::now();
  const double ds = scenario_.grid.delta_s;
  const int K = scenario_.grid.samples();
  Planned out;

  double origin = ego_.s;
  int shift = 0;
  if (have_warm_) {
    shift = std::max(0, static_cast<int>(std::lround((ego_.s - origin_) / ds)));
    origin = origin_ + shift * ds;
  }
  path::ReferencePolyline window = reference_.window(origin, ds, K);
  window.grid.s0 = 0.0;
  path::PathState boundary;
  if (plan_) {
    boundary = plan_->path.state_at(origin - plan_->origin);
  } else {
    const path::Point p = reference_.at(origin);
    boundary = path::PathState(p.x(), p.y(), ego_.heading);
  }
  std::optional<path::PathWarmStart> path_warm;
  std::optional<velocity::ProfileWarmStart> profile_warm;
  if (have_warm_ && !options_.cold_start) {
    path_warm = al::shift_warm_start(path_warm_, shift).warm;
    profile_warm = al::shift_warm_start(profile_warm_, shift).warm;
  }
  const double prep_a = ms_since(t_start);

  const auto t_lat = Clock::now();
  auto smoothed = path::smooth_path(window, smoothing_options(scenario_),
                                    path_warm ? &*path_warm : nullptr, boundary);
  out.times.lateral_ms = ms_since(t_lat);
  if (!all_finite(smoothed.path.x) || !all_finite(smoothed.path.y) ||
      !all_finite(smoothed.path.curvature))
    throw std::runtime_error("path smoothing produced non-finite values");

  const auto t_pre = Clock::now();
  const Params& P = scenario_.params;
  std::vector<double> legal(K);
  for (int k = 0; k < K; ++k) legal[k] = legal_limit(origin + k * ds);
  LimitProfile limits = path::curvature_speed_limit(window.grid, smoothed.path.curvature, legal,
                                                    P.a_lat_hat);
  const auto obstacles = extract_obstacles(smoothed.path, origin);
  for (const auto& o : obstacles) {
    if (o.is_static) velocity::apply_static_constraint(limits, o.s, 0.0);
    else if (scenario_.sim.follow == SimConfig::Follow::ramp)
      velocity::apply_dynamic_constraint(limits, o.s, o.v, d_safe());
    else
      velocity::apply_gap_constraint(limits, o.s, o.v, d_safe(), ego_.s - origin);
  }
  const auto opts = profile_options(scenario_);
  const double v_start = std::max(ego_.v, P.v_min);
  auto ref = velocity::generate_reference(limits, v_start, opts.weights, accel_);
  const auto tc = time_constraints(origin);
  const double prep_b = ms_since(t_pre);

  const auto t_lon = Clock::now();
  auto prof = velocity::optimize_profile(ref, v_start, tc, opts, profile_warm ? &*profile_warm : nullptr);
  out.times.longitudinal_ms = ms_since(t_lon);

  const auto t_post = Clock::now();
  auto traj = velocity::postprocess_standstill(prof.trajectory, limits, P.v_min);
  if (!all_finite(traj.v) || !all_finite(traj.t) || !all_finite(traj.a))
    throw std::runtime_error("profile optimization produced non-finite values");
  const double prep_c = ms_since(t_post);

  out.plan = {origin, std::move(smoothed.path), std::move(limits), std::move(ref), std::move(traj)};
  out.path_warm = std::move(smoothed.solution);
  out.profile_warm = std::move(prof.solution);
  out.path_iterations = smoothed.report.iterations;
  out.profile_iterations = prof.report.iterations;
  out.path_violation = max_of(smoothed.max_violation);
  out.profile_violation = max_of(prof.max_violation);
  out.obstacles = static_cast<int>(obstacles.size());
  out.time_constraints = static_cast<int>(tc.size());
  out.times.preprocessing_ms = prep_a + prep_b + prep_c;
  out.times.total_ms = ms_since(t_start);
  return out;
}

Plan Simulation::plan_now() { return plan_cycle().plan; }

void Simulation::spawn_actors() {
  for (std::size_t i = 0; i < scenario_.actors.size(); ++i) {
    const Actor& a = scenario_.actors[i];
    if (placed_[i] || time_ < a.spawn_time - 1e-9) continue;
    spawn_s_[i] = a.relative_to_ego ? ego_.s + a.s : a.s;
    placed_[i] = true;
  }
}

void Simulation::update_signals() {
  const double brake = std::abs(scenario_.params.a_min);
  for (std::size_t i = 0; i < scenario_.signals.size(); ++i) {
    const Signal& sg = scenario_.signals[i];
    const bool red = sg.red_at(time_);
    const bool was_red = cycle_ > 0 && sg.red_at(time_ - scenario_.sim.dt);
    if (!red) committed_[i] = false;
    else if (!was_red) committed_[i] = sg.s - ego_.s < ego_.v * ego_.v / (2.0 * brake);
  }
}

void Simulation::record_arrivals(const EgoState& before, const EgoState& after, double t0) {
  for (auto& r : verdict_.arrivals) {
    if (r.arrival || !(before.s < r.s && after.s >= r.s)) continue;
    const double f = (r.s - before.s) / (after.s - before.s);
    r.arrival = t0 + f * scenario_.sim.dt;
  }
}

void Simulation::check_collision() {
  const Box ego{ego_.x, ego_.y, ego_.heading, 4.5, 1.8};
  for (const ActorState& a : actors())
    if (a.active && boxes_overlap(ego, a.box)) {
      verdict_.collision = true;
      verdict_.collision_time = time_;
      verdict_.collision_with = a.id;
      stopped_ = true;
      return;
    }
}

void Simulation::finalize() {
  constexpr double tol = 0.1;
  bool ok = verdict_.stop_line_violations == 0;
  for (auto& r : verdict_.arrivals) {
    if (r.is_min) r.satisfied = !r.arrival || *r.arrival >= r.bound - tol;
    else r.satisfied = r.arrival ? *r.arrival <= r.bound + tol : time_ <= r.bound + tol;
    if (r.enforced && !r.satisfied) ok = false;
  }
  verdict_.constraints_satisfied = ok;
}

const CycleLog& Simulation::step() {
  spawn_actors();
  update_signals();
  CycleLog log;
  log.cycle = cycle_;
  log.time = time_;
  log.ego = ego_;

  try {
    Planned p = plan_cycle();
    log.times = p.times;
    log.path_iterations = p.path_iterations;
    log.profile_iterations = p.profile_iterations;
    log.path_violation = p.path_violation;
    log.profile_violation = p.profile_violation;
    log.obstacles = p.obstacles;
    log.time_constraints = p.time_constraints;
    if (options_.budget_ms > 0.0 && p.times.total_ms > options_.budget_ms) {
      ++verdict_.budget_overruns;
      log.note = "over budget";
    } else {
      origin_ = p.plan.origin;
      path_warm_ = std::move(p.path_warm);
      profile_warm_ = std::move(p.profile_warm);
      have_warm_ = true;
      plan_ = std::move(p.plan);
      log.replanned = true;
    }
  } catch (const std::exception& e) {
    ++verdict_.planner_failures;
    log.note = e.what();
  }

  if (plan_) {
    log.command = low_level_control(ego_, *plan_, scenario_.sim, scenario_.params);
    if (log.command.beyond_horizon && log.note.empty()) log.note = "beyond plan horizon";
  } else if (log.note.empty()) {
    log.note = "no plan";
  }
  const Command& c = log.command;
  if (cycle_ == 0) {
    verdict_.min_accel = verdict_.max_accel = c.accel;
    verdict_.min_planned_accel = verdict_.max_planned_accel = c.a_plan;
  }
  verdict_.min_accel = std::min(verdict_.min_accel, c.accel);
  verdict_.max_accel = std::max(verdict_.max_accel, c.accel);
  verdict_.min_planned_accel = std::min(verdict_.min_planned_accel, c.a_plan);
  verdict_.max_planned_accel = std::max(verdict_.max_planned_accel, c.a_plan);

  accel_ = c.accel;
  const EgoState before = ego_;
  const double t0 = time_;
  ego_ = step_vehicle(ego_, c.accel, c.steer, scenario_.sim.dt, scenario_.sim.wheelbase);
  ego_.s = std::max(before.s, reference_.project(path::Point(ego_.x, ego_.y), before.s).s);
  ++cycle_;
  time_ = cycle_ * scenario_.sim.dt;
  spawn_actors();

  record_arrivals(before, ego_, t0);
  for (std::size_t i = 0; i < scenario_.signals.size(); ++i) {
    const Signal& sg = scenario_.signals[i];
    if (sg.red_at(t0) && !committed_[i] && before.s <= sg.s + 1.0 && ego_.s > sg.s + 1.0)
      ++verdict_.stop_line_violations;
  }
  check_collision();
  finalize();
  log_.push_back(std::move(log));
  return log_.back();
}

RuntimeStats runtime_stats(const std::vector<double>& x) {
  RuntimeStats r;
  if (x.empty()) return r;
  for (double v : x) {
    r.mean += v;
    r.max = std::max(r.max, v);
  }
  r.mean /= x.size();
  for (double v : x) r.stddev += (v - r.mean) * (v - r.mean);
  r.stddev = std::sqrt(r.stddev / x.size());
  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  auto pct = [&](double q) {
    return sorted[std::min(sorted.size() - 1, static_cast<std::size_t>(q * (sorted.size() - 1) + 0.5))];
  };
  r.p50 = pct(0.5);
  r.p99 = pct(0.99);
  return r;
}

RunResult run_scenario(const Scenario& scenario, const RunOptions& options) {
  Simulation sim(scenario, options);
  RunResult out;
  const int stride = scenario.sim.profile_stride;
  while (!sim.finished()) {
    const CycleLog& log = sim.step();
    if (log.cycle % stride == 0 && sim.plan()) out.profiles.push_back({log.cycle, log.time, *sim.plan()});
  }
  out.cycles = sim.log();
  out.verdict = sim.verdict();
  std::vector<double> lat, lon, pre, tot;
  for (const auto& c : out.cycles) {
    lat.push_back(c.times.lateral_ms);
    lon.push_back(c.times.longitudinal_ms);
    pre.push_back(c.times.preprocessing_ms);
    tot.push_back(c.times.total_ms);
  }
  out.lateral = runtime_stats(lat);
  out.longitudinal = runtime_stats(lon);
  out.preprocessing = runtime_stats(pre);
  out.total = runtime_stats(tot);
  return out;
}

}  // namespace stplan::sim
