#include "doctest.h"

#include <string>

#include "stplan/scenario.hpp"

using namespace stplan::sim;

namespace {

const char* kMinimal = R"({
  "name": "minimal",
  "reference": {"points": [[0, 0], [100, 0]]}
})";

int error_line(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ScenarioError& e) {
    return e.line();
  }
  return -1;
}

std::string error_where(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ScenarioError& e) {
    return e.where();
  }
  return "<none>";
}

}  // namespace

TEST_CASE("omitted parameters take the published tuning") {
  const Scenario s = parse_scenario(kMinimal);
  const Params& p = s.params;
  CHECK(p.v_min == 1.0);
  CHECK(p.a_min == -2.5);
  CHECK(p.a_max == 2.5);
  CHECK(p.a_lat_hat == 2.5);
  CHECK(p.j_min == -1.5);
  CHECK(p.j_max == 1.5);
  CHECK(p.kappa_min == -3.0);
  CHECK(p.kappa_max == 3.0);
  CHECK(p.w_d == 1.0);
  CHECK(p.w_kappa == 20.0);
  CHECK(p.w_v == 0.1);
  CHECK(p.w_a == 1.0);
  CHECK(p.alpha == 10.0);
  CHECK(p.beta == 5e-3);

  CHECK(s.grid.delta_s == 0.5);
  CHECK(s.grid.samples() == 250);
  CHECK(s.solver.n_iters == 5);
  CHECK(s.solver.mu_default == 1e2);
  CHECK(s.solver.mu_tmax == 1e3);
  CHECK(s.sim.dt == 0.01);
  CHECK(s.sim.follow == SimConfig::Follow::gap);
}

TEST_CASE("dump and parse round-trip") {
  Scenario s = parse_scenario(kMinimal);
  s.params.w_kappa = 7.25;
  s.reference.noise_sigma = 0.1;
  s.reference.noise_spacing = 2.0;
  s.reference.seed = 99;
  s.speed_limits = {{0.0, 10.0}, {50.0, 5.0}};
  Actor a;
  a.id = "car";
  a.mode = Actor::Mode::pose;
  a.x = 3.0;
  a.y = -1.0;
  a.heading = 0.3;
  a.speed = 4.0;
  a.spawn_time = 2.5;
  s.actors.push_back(a);
  Actor b;
  b.id = "lead";
  b.s = 10.0;
  b.relative_to_ego = true;
  s.actors.push_back(b);
  s.signals.push_back({"light", 80.0, {{5.0, true}, {9.0, false}}, true});
  s.spatiotemporal.push_back({"late", true, 40.0, 6.0});
  s.spatiotemporal.push_back({"early", false, 90.0, 12.0});
  s.ego = {5.0, 0.5, 8.0};
  s.sim.follow = SimConfig::Follow::ramp;
  s.sim.profile_stride = 7;

  const Scenario again = parse_scenario(dump_scenario(s));
  CHECK(again == s);
  CHECK(dump_scenario(again) == dump_scenario(s));
}

TEST_CASE("unknown keys are rejected with their line") {
  const std::string text = R"({
  "name": "typo",
  "reference": {"points": [[0, 0], [100, 0]]},
  "ego": {
    "s": 0,
    "speed": 3
  }
})";
  CHECK_THROWS_AS(parse_scenario(text), ScenarioError);
  CHECK(error_line(text) == 6);
  CHECK(error_where(text) == "/ego/speed");
}

TEST_CASE("wrong types are rejected") {
  const std::string text = R"({
  "reference": {"points": [[0, 0], [100, 0]]},
  "params": {"w_v": "0.1"}
})";
  CHECK(error_line(text) == 3);
  CHECK(error_where(text) == "/params/w_v");

  CHECK(error_where(R"({"reference": {"points": [[0, 0], [100]]}})").rfind("/reference/points", 0) == 0);
  CHECK(error_line(R"({"reference": {"points": [[0, 0], [100, 0]]}, "actors": {}})") == 1);
}

TEST_CASE("malformed JSON reports the line") {
  const std::string text = "{\n  \"name\": \"x\",\n  \"grid\": {\"delta_s\": 0.5,}\n}";
  CHECK(error_line(text) == 3);
}

TEST_CASE("inconsistent values are rejected") {
  CHECK(error_where(R"({"reference": {"points": [[0, 0]]}})") == "/reference/points");
  CHECK(error_where(R"({"reference": {"points": [[0, 0], [100, 0]]},
                       "params": {"a_min": 1.0}})") == "/params/a_min");
  CHECK(error_where(R"({"reference": {"points": [[0, 0], [100, 0]]},
                       "signals": [{"id": "x", "s": 150}]})") == "/signals/0/s");
  CHECK(error_where(R"({"reference": {"points": [[0, 0], [100, 0]]},
                       "actors": [{"id": "x", "s": 10}],
                       "spatiotemporal": [{"id": "x", "kind": "min", "s": 20, "t": 1}]})") ==
        "/spatiotemporal/0/id");
  CHECK(error_where(R"({"reference": {"points": [[0, 0], [100, 0]]},
                       "signals": [{"id": "x", "s": 50,
                                    "schedule": [{"t": 5, "state": "red"},
                                                 {"t": 5, "state": "green"}]}]})") ==
        "/signals/0/schedule/1/t");
  CHECK(error_where(R"({"reference": {"points": [[0, 0], [100, 0]]},
                       "spatiotemporal": [{"id": "x", "kind": "soon", "s": 20, "t": 1}]})")
            .rfind("/spatiotemporal/0", 0) == 0);
}

TEST_CASE("signal schedules") {
  Signal sg{"light", 50.0, {{5.0, true}, {9.0, false}, {20.0, true}}, true};
  CHECK_FALSE(sg.red_at(0.0));
  CHECK(sg.red_at(5.0));
  CHECK(sg.red_at(8.99));
  CHECK_FALSE(sg.red_at(9.0));
  CHECK(sg.red_at(25.0));
  CHECK(*sg.next_red_after(0.0) == 5.0);
  CHECK(*sg.next_red_after(5.0) == 20.0);
  CHECK_FALSE(sg.next_red_after(20.0).has_value());
}
