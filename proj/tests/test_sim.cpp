#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "stplan/sim.hpp"

using namespace stplan;
using namespace stplan::sim;

namespace {

Scenario bundled(const std::string& name) {
  return load_scenario(std::string(STPLAN_SCENARIO_DIR) + "/" + name + ".json");
}

// Straight plan along +x from the origin with a prescribed speed profile.
Plan straight_plan(std::vector<double> v, std::vector<double> a) {
  Plan p;
  const SpatialGrid g{0.0, 0.5, static_cast<int>(v.size())};
  p.path.grid = g;
  for (int k = 0; k < g.samples; ++k) {
    p.path.x.push_back(g.at(k));
    p.path.y.push_back(0.0);
    p.path.heading.push_back(0.0);
    p.path.curvature.push_back(0.0);
  }
  p.profile.grid = g;
  p.profile.v = std::move(v);
  p.profile.a = std::move(a);
  p.profile.t.assign(g.samples, 0.0);
  return p;
}

// Brute-force overlap: sample points of each box and test them against the
// other box in its own frame.
bool sampled_overlap(const Box& a, const Box& b, int n = 40) {
  auto inside = [](const Box& q, double x, double y) {
    const double dx = x - q.x, dy = y - q.y;
    const double c = std::cos(q.heading), s = std::sin(q.heading);
    const double u = c * dx + s * dy, w = -s * dx + c * dy;
    return std::abs(u) <= 0.5 * q.length && std::abs(w) <= 0.5 * q.width;
  };
  auto hits = [&](const Box& p, const Box& q) {
    const double c = std::cos(p.heading), s = std::sin(p.heading);
    for (int i = 0; i <= n; ++i)
      for (int j = 0; j <= n; ++j) {
        const double u = (i / double(n) - 0.5) * p.length;
        const double w = (j / double(n) - 0.5) * p.width;
        if (inside(q, p.x + c * u - s * w, p.y + s * u + c * w)) return true;
      }
    return false;
  };
  return hits(a, b) || hits(b, a);
}

Box scaled(Box b, double f) {
  b.length *= f;
  b.width *= f;
  return b;
}

}  // namespace

TEST_CASE("vehicle step integrates the bicycle model") {
  const EgoState e{0.0, 0.0, 0.0, 10.0, 0.0};
  const EgoState n = step_vehicle(e, 2.0, 0.0, 0.01);
  CHECK(n.v == doctest::Approx(10.02));
  CHECK(n.x == doctest::Approx(0.1001).epsilon(1e-9));
  CHECK(n.y == 0.0);
  CHECK(n.heading == 0.0);

  const EgoState rest{1.0, 2.0, 0.3, 0.0, 5.0};
  const EgoState r = step_vehicle(rest, 0.0, 0.4, 0.01);
  CHECK(r.x == rest.x);
  CHECK(r.y == rest.y);
  CHECK(r.heading == rest.heading);
  CHECK(r.s == rest.s);

  // Braking at rest does not reverse.
  CHECK(step_vehicle(rest, -2.5, 0.0, 0.01).v == 0.0);
}

TEST_CASE("constant steering traces the kinematic circle") {
  const double L = 2.9, steer = 0.2, v = 8.0;
  const double R = L / std::tan(steer);
  EgoState e{0.0, 0.0, 0.0, v, 0.0};
  const int steps = 500;
  for (int i = 0; i < steps; ++i) e = step_vehicle(e, 0.0, steer, 0.01, L);
  const double turned = v * steps * 0.01 / R;
  CHECK(e.heading == doctest::Approx(turned).epsilon(1e-9));
  CHECK(e.x == doctest::Approx(R * std::sin(turned)).epsilon(1e-6));
  CHECK(e.y == doctest::Approx(R * (1.0 - std::cos(turned))).epsilon(1e-6));
}

TEST_CASE("speed feedback on the planned profile") {
  const Params params;
  const SimConfig cfg;
  const Plan p = straight_plan(std::vector<double>(100, 10.0), std::vector<double>(100, 0.0));
  const Command c = low_level_control({5.0, 0.0, 0.0, 9.0, 5.0}, p, cfg, params);
  CHECK(c.v_plan == 10.0);
  CHECK(c.accel == doctest::Approx(0.5));
  CHECK(c.steer == doctest::Approx(0.0));
  CHECK_FALSE(c.beyond_horizon);

  // Large errors saturate at the actuator limits.
  CHECK(low_level_control({5.0, 0.0, 0.0, 0.0, 5.0}, p, cfg, params).accel == params.a_max);

  const Plan stop = straight_plan(std::vector<double>(100, 0.0), std::vector<double>(100, 0.3));
  const Command s = low_level_control({5.0, 0.0, 0.0, 0.0, 5.0}, stop, cfg, params);
  CHECK(s.accel <= 0.0);

  CHECK(low_level_control({60.0, 0.0, 0.0, 5.0, 60.0}, p, cfg, params).beyond_horizon);
}

TEST_CASE("creeping towards a standstill sample brakes onto it") {
  const Params params;
  std::vector<double> v(100, 1.0), a(100, 0.0);
  for (int k = 30; k < 100; ++k) v[k] = 0.0;  // standstill from 15 m on
  const Plan p = straight_plan(v, a);
  const Command c = low_level_control({10.0, 0.0, 0.0, 1.0, 10.0}, p, {}, params);
  CHECK(c.accel == doctest::Approx(-1.0 / (2.0 * 5.0)));
  const Command held = low_level_control({14.9, 0.0, 0.0, 0.0, 14.9}, p, {}, params);
  CHECK(held.accel <= 0.0);
}

TEST_CASE("pure pursuit steers towards the path") {
  const Plan p = straight_plan(std::vector<double>(100, 5.0), std::vector<double>(100, 0.0));
  CHECK(low_level_control({5.0, 1.0, 0.0, 5.0, 5.0}, p, {}, {}).steer < 0.0);
  CHECK(low_level_control({5.0, -1.0, 0.0, 5.0, 5.0}, p, {}, {}).steer > 0.0);
  CHECK(low_level_control({5.0, 0.5, 1.2, 5.0, 5.0}, p, {}, {}).steer == doctest::Approx(-0.6));
}

TEST_CASE("separating-axis overlap") {
  const Box a{0.0, 0.0, 0.0, 4.5, 1.8};
  CHECK(boxes_overlap(a, {4.4, 0.0, 0.0, 4.5, 1.8}));
  CHECK_FALSE(boxes_overlap(a, {4.6, 0.0, 0.0, 4.5, 1.8}));
  CHECK_FALSE(boxes_overlap(a, {0.0, 1.9, 0.0, 4.5, 1.8}));
  // Rotated box whose bounding circle reaches but whose corner does not.
  const double diag = 0.5 * std::hypot(4.5, 1.8);
  CHECK_FALSE(boxes_overlap(a, {2.25 + diag + 0.05, 0.9 + 0.5, std::numbers::pi / 4, 4.5, 1.8}));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pos(-6.0, 6.0), ang(-3.2, 3.2), dim(0.5, 5.0);
  int checked = 0;
  for (int i = 0; i < 2000; ++i) {
    const Box p{pos(rng), pos(rng), ang(rng), dim(rng), dim(rng)};
    const Box q{pos(rng), pos(rng), ang(rng), dim(rng), dim(rng)};
    // Skip near-touching pairs the sampler cannot resolve.
    const bool grown = sampled_overlap(scaled(p, 1.02), scaled(q, 1.02));
    const bool shrunk = sampled_overlap(scaled(p, 0.98), scaled(q, 0.98));
    if (grown != shrunk) continue;
    CHECK(boxes_overlap(p, q) == shrunk);
    CHECK(boxes_overlap(q, p) == shrunk);
    ++checked;
  }
  CHECK(checked > 1500);
}

TEST_CASE("constraint set names") {
  for (auto c : {ConstraintSet::none, ConstraintSet::tmin, ConstraintSet::tmin_tmax,
                 ConstraintSet::all})
    CHECK(parse_constraint_set(to_string(c)) == c);
  CHECK_FALSE(parse_constraint_set("everything").has_value());
}

TEST_CASE("time bounds follow the constraint set and the clock") {
  const Scenario sc = bundled("fig1_merge_light");
  for (auto [set, expected] : {std::pair{ConstraintSet::none, 0}, {ConstraintSet::tmin, 1},
                               {ConstraintSet::tmin_tmax, 2}, {ConstraintSet::all, 2}}) {
    RunOptions o;
    o.constraints = set;
    Simulation s(sc, o);
    const auto tc = s.time_constraints(0.0);
    CHECK(static_cast<int>(tc.size()) == expected);
    for (const auto& c : tc) {
      if (c.id == "right_of_way") {
        CHECK(c.kind == velocity::TimeBound::min);
        CHECK(c.s == 44.5);
        CHECK(c.t == 5.75);
      } else {
        CHECK(c.kind == velocity::TimeBound::max);
        CHECK(c.t == 14.0);
      }
    }
  }

  // Deadlines from signals only with the full set; bounds shift with time.
  Scenario sc2 = sc;
  sc2.spatiotemporal.clear();
  sc2.signals[0].emit_deadline = true;
  RunOptions all;
  Simulation s(sc2, all);
  auto tc = s.time_constraints(0.0);
  REQUIRE(tc.size() == 1);
  CHECK(tc[0].id == "deadline:traffic_light");
  CHECK(tc[0].t == 14.0);
  for (int i = 0; i < 100; ++i) s.step();
  tc = s.time_constraints(s.ego().s);
  REQUIRE(tc.size() == 1);
  CHECK(tc[0].t == doctest::Approx(13.0));
  CHECK(tc[0].s == doctest::Approx(114.5 - s.ego().s));
  RunOptions tmax;
  tmax.constraints = ConstraintSet::tmin_tmax;
  CHECK(Simulation(sc2, tmax).time_constraints(0.0).empty());
}

TEST_CASE("crossing traffic is not a following target") {
  const Scenario sc = bundled("fig1_merge_light");
  Simulation s(sc);
  for (int i = 0; i < 300; ++i) s.step();
  REQUIRE(s.plan());
  CHECK(s.extract_obstacles(s.plan()->path, s.plan()->origin).empty());

  const Scenario lead = bundled("leader_follow");
  Simulation f(lead);
  f.step();
  const auto obs = f.extract_obstacles(f.plan()->path, f.plan()->origin);
  REQUIRE(obs.size() == 1);
  CHECK(obs[0].id == "leader");
  CHECK(obs[0].v == doctest::Approx(5.0));
  CHECK_FALSE(obs[0].is_static);
}

TEST_CASE("red light stops the ego at the line") {
  const Scenario sc = bundled("stop_line");
  const double line = sc.signals[0].s;
  const double green = sc.signals[0].schedule[1].t;
  const auto r = run_scenario(sc);
  CHECK_FALSE(r.verdict.collision);
  CHECK(r.verdict.stop_line_violations == 0);
  double held_at = -1.0;
  for (const auto& c : r.cycles) {
    if (c.time < green) CHECK(c.ego.s <= line + 1e-9);
    if (c.time > green - 1.0 && c.time < green) {
      CHECK(c.ego.v == 0.0);
      held_at = c.ego.s;
    }
  }
  CHECK(held_at >= line - 1.0);
  CHECK(r.cycles.back().ego.s > line + 50.0);
}

TEST_CASE("leader following settles at the safety distance") {
  const Scenario sc = bundled("leader_follow");
  const auto r = run_scenario(sc);
  CHECK_FALSE(r.verdict.collision);
  const double lead_s0 = sc.actors[0].s, lead_v = sc.actors[0].speed;
  int n = 0;
  for (const auto& c : r.cycles) {
    const double gap = lead_s0 + lead_v * c.time - c.ego.s;
    const double d_safe = sc.sim.d_safe_base + sc.sim.d_safe_time * c.ego.v;
    CHECK(gap >= d_safe - 0.5);
    if (c.time < sc.sim.duration - 10.0) continue;
    CHECK(c.ego.v == doctest::Approx(5.0).epsilon(0.04));
    CHECK(gap <= d_safe + 2.0);
    ++n;
  }
  CHECK(n > 900);
}

TEST_CASE("cut-in is absorbed at full braking") {
  const Scenario sc = bundled("cut_in");
  const auto r = run_scenario(sc);
  CHECK_FALSE(r.verdict.collision);
  const int spawn = static_cast<int>(std::lround(sc.actors[0].spawn_time / sc.sim.dt));
  const auto& first = r.cycles[spawn];
  CHECK(first.obstacles == 1);
  CHECK(first.profile_violation > 1.0);
  CHECK(first.command.accel == sc.params.a_min);
  CHECK(first.command.a_plan <= sc.params.a_min + 0.05);
  for (int i = spawn + 1; i <= spawn + 10; ++i)
    CHECK(r.cycles[i].profile_violation < r.cycles[i - 1].profile_violation);
  for (const auto& c : r.cycles) {
    CHECK(std::isfinite(c.command.accel));
    CHECK(std::isfinite(c.ego.x));
  }
}

TEST_CASE("closed loop is deterministic") {
  const Scenario sc = bundled("noisy_line");
  RunOptions o;
  o.duration = 3.0;
  const auto a = run_scenario(sc, o);
  const auto b = run_scenario(sc, o);
  REQUIRE(a.cycles.size() == b.cycles.size());
  for (std::size_t i = 0; i < a.cycles.size(); ++i) {
    const auto &p = a.cycles[i], &q = b.cycles[i];
    CHECK(p.ego.x == q.ego.x);
    CHECK(p.ego.y == q.ego.y);
    CHECK(p.ego.v == q.ego.v);
    CHECK(p.command.accel == q.command.accel);
    CHECK(p.command.steer == q.command.steer);
    CHECK(p.profile_iterations == q.profile_iterations);
  }

  // A different seed moves the reference.
  o.seed = 1234;
  const auto c = run_scenario(sc, o);
  CHECK(c.cycles.back().ego.y != a.cycles.back().ego.y);
}

TEST_CASE("warm starts save longitudinal iterations") {
  const Scenario sc = bundled("leader_follow");
  RunOptions warm, cold;
  warm.duration = cold.duration = 10.0;
  cold.cold_start = true;
  auto mean_iterations = [](const RunResult& r) {
    double sum = 0.0;
    for (const auto& c : r.cycles) sum += c.profile_iterations;
    return sum / r.cycles.size();
  };
  const double w = mean_iterations(run_scenario(sc, warm));
  const double c = mean_iterations(run_scenario(sc, cold));
  MESSAGE("mean profile iterations: warm " << w << ", cold " << c);
  CHECK(w < c);
}

TEST_CASE("arrival times are interpolated on crossing") {
  const Scenario sc = parse_scenario(R"({
    "reference": {"points": [[0, 0], [300, 0]]},
    "spatiotemporal": [{"id": "mark", "kind": "min", "s": 50, "t": 1}],
    "ego": {"v": 10},
    "sim": {"duration": 8}
  })");
  const auto r = run_scenario(sc);
  REQUIRE(r.verdict.arrivals.size() == 1);
  const auto& rec = r.verdict.arrivals[0];
  REQUIRE(rec.arrival.has_value());
  // Oracle: the logged trajectory brackets the crossing.
  for (std::size_t i = 1; i < r.cycles.size(); ++i)
    if (r.cycles[i - 1].ego.s < 50.0 && r.cycles[i].ego.s >= 50.0) {
      CHECK(*rec.arrival >= r.cycles[i - 1].time);
      CHECK(*rec.arrival <= r.cycles[i].time);
    }
  CHECK(rec.satisfied);
}

TEST_CASE("an overrun budget keeps the previous plan") {
  const Scenario sc = bundled("noisy_line");
  RunOptions o;
  o.duration = 0.5;
  o.budget_ms = 1e-9;
  const auto r = run_scenario(sc, o);
  CHECK(r.verdict.budget_overruns == static_cast<int>(r.cycles.size()));
  for (const auto& c : r.cycles) {
    CHECK_FALSE(c.replanned);
    CHECK(c.note == "over budget");
    CHECK(c.command.accel == 0.0);
  }
}
