#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "stplan/report.hpp"
#include "stplan/scenario.hpp"
#include "stplan/sim.hpp"

namespace fs = std::filesystem;
using namespace stplan;
using nlohmann::json;

namespace {

enum Exit { ok = 0, bad_input = 1, collision = 2 };

fs::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("STPLAN_OUT_DIR"); env && *env) return env;
  return "out";
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

json stats_json(const sim::RuntimeStats& s) {
  return {{"mean_ms", s.mean}, {"stddev_ms", s.stddev}, {"max_ms", s.max},
          {"p50_ms", s.p50},   {"p99_ms", s.p99}};
}

json verdict_json(const sim::Verdict& v) {
  json arr = json::array();
  for (const auto& a : v.arrivals)
    arr.push_back({{"id", a.id},
                   {"kind", a.is_min ? "min" : "max"},
                   {"enforced", a.enforced},
                   {"s", a.s},
                   {"bound", a.bound},
                   {"arrival", a.arrival ? json(*a.arrival) : json(nullptr)},
                   {"satisfied", a.satisfied}});
  json j = {{"collision", v.collision},
            {"constraints_satisfied", v.constraints_satisfied},
            {"min_accel", v.min_accel},
            {"max_accel", v.max_accel},
            {"min_planned_accel", v.min_planned_accel},
            {"max_planned_accel", v.max_planned_accel},
            {"stop_line_violations", v.stop_line_violations},
            {"planner_failures", v.planner_failures},
            {"budget_overruns", v.budget_overruns},
            {"arrivals", arr}};
  if (v.collision) {
    j["collision_time"] = v.collision_time;
    j["collision_with"] = v.collision_with;
  }
  return j;
}

struct Common {
  std::string scenario;
  std::string out;
  std::string constraint_set = "all";
  std::optional<std::uint64_t> seed;
};

sim::RunOptions run_options(const Common& c) {
  sim::RunOptions o;
  auto set = sim::parse_constraint_set(c.constraint_set);
  if (!set) throw sim::ScenarioError("unknown constraint set " + c.constraint_set);
  o.constraints = *set;
  o.seed = c.seed;
  return o;
}

int cmd_run(const Common& c, std::optional<double> duration, bool cold, double budget) {
  const auto scenario = sim::load_scenario(c.scenario);
  auto opts = run_options(c);
  opts.duration = duration;
  opts.cold_start = cold;
  opts.budget_ms = budget;
  const auto result = sim::run_scenario(scenario, opts);

  const fs::path dir = output_dir(c.out);
  fs::create_directories(dir);
  {
    auto f = open_out(dir / "cycles.csv");
    sim::write_cycles_csv(f, result.cycles);
  }
  {
    auto f = open_out(dir / "profiles.csv");
    sim::write_profiles_csv(f, result.profiles);
  }
  json report = {{"scenario", scenario.name},
                 {"constraint_set", c.constraint_set},
                 {"cycles", result.cycles.size()},
                 {"simulated_time", result.cycles.size() * scenario.sim.dt},
                 {"verdict", verdict_json(result.verdict)},
                 {"runtime",
                  {{"lateral", stats_json(result.lateral)},
                   {"longitudinal", stats_json(result.longitudinal)},
                   {"preprocessing", stats_json(result.preprocessing)},
                   {"total", stats_json(result.total)}}},
                 {"outputs",
                  {{"cycles", (dir / "cycles.csv").string()},
                   {"profiles", (dir / "profiles.csv").string()},
                   {"report", (dir / "report.json").string()}}}};
  open_out(dir / "report.json") << report.dump(2) << '\n';

  const auto& v = result.verdict;
  std::cout << scenario.name << " [" << c.constraint_set << "]: " << result.cycles.size()
            << " cycles, ";
  if (v.collision)
    std::cout << "COLLISION with " << v.collision_with << " at t=" << v.collision_time << " s\n";
  else
    std::cout << "no collision\n";
  for (const auto& a : v.arrivals) {
    std::cout << "  t_" << (a.is_min ? "min" : "max") << " " << a.id << " @ " << a.s << " m: bound "
              << a.bound << " s, arrival ";
    if (a.arrival) std::cout << *a.arrival << " s";
    else std::cout << "none";
    std::cout << (a.satisfied ? "" : (a.is_min ? "  (too early)" : "  (missed)"))
              << (a.enforced ? "" : "  [not enforced]") << '\n';
  }
  std::cout << "  accel range [" << v.min_accel << ", " << v.max_accel << "] m/s^2, mean cycle "
            << result.total.mean << " ms\n  output: " << dir.string() << '\n';
  return v.collision ? collision : ok;
}

int cmd_profile(const Common& c, double at_time) {
  const auto scenario = sim::load_scenario(c.scenario);
  if (at_time < 0.0 || at_time > scenario.sim.duration)
    throw sim::ScenarioError("--at-time outside [0, duration]");
  sim::Simulation s(scenario, run_options(c));
  while (s.time() < at_time - 1e-9 && !s.finished()) s.step();
  const sim::Plan plan = s.plan_now();

  const fs::path dir = output_dir(c.out);
  fs::create_directories(dir);
  {
    auto f = open_out(dir / "profile.csv");
    sim::write_profile_csv(f, plan);
  }
  {
    auto f = open_out(dir / "path.csv");
    sim::write_path_csv(f, plan, s.reference());
  }
  std::cout << "profile at t=" << s.time() << " s written to " << (dir / "profile.csv").string()
            << " and " << (dir / "path.csv").string() << '\n';
  return ok;
}

int cmd_bench(const Common& c, int cycles, std::optional<double> horizon) {
  auto scenario = sim::load_scenario(c.scenario);
  if (horizon) {
    scenario.grid.horizon = *horizon;
    scenario.validate();
  }
  const auto opts = run_options(c);
  std::vector<double> lat, lon, tot;
  while (static_cast<int>(tot.size()) < cycles) {
    sim::Simulation s(scenario, opts);
    while (!s.finished() && static_cast<int>(tot.size()) < cycles) {
      const auto& log = s.step();
      lat.push_back(log.times.lateral_ms);
      lon.push_back(log.times.longitudinal_ms);
      tot.push_back(log.times.total_ms);
    }
  }
  std::printf("%-32s %-11s %-11s %-11s\n", "Component", "Mean", "Stddev.", "Max.");
  auto row = [](const char* name, const std::vector<double>& x) {
    const auto st = sim::runtime_stats(x);
    std::printf("%-32s %8.3f ms %8.3f ms %8.3f ms\n", name, st.mean, st.stddev, st.max);
  };
  row("lateral", lat);
  row("longitudinal", lon);
  row("total (lat. + lon. + preproc.)", tot);
  std::printf("(%d cycles, K = %d)\n", cycles, scenario.grid.samples());
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial trajectory planner: closed-loop runs, profiles and benchmarks"};
  app.require_subcommand(1);

  Common common;
  std::optional<double> duration, horizon;
  bool cold = false;
  double budget = 0.0, at_time = 0.0;
  int cycles = 1000;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("scenario", common.scenario, "Scenario JSON file")->required();
    sub->add_option("--out", common.out, "Output directory (default $STPLAN_OUT_DIR or ./out)");
    sub->add_option("--constraint-set", common.constraint_set, "Spatiotemporal constraints")
        ->check(CLI::IsMember({"none", "tmin", "tmin_tmax", "all"}));
    sub->add_option("--seed", common.seed, "Reference noise seed");
  };
  auto* run = app.add_subcommand("run", "Run a closed-loop simulation");
  add_common(run);
  run->add_option("--duration", duration, "Simulated seconds");
  run->add_flag("--cold-start", cold, "Disable warm starts");
  run->add_option("--budget-ms", budget, "Per-cycle wall-clock budget; 0 disables");

  auto* prof = app.add_subcommand("profile", "Emit the plan of one cycle");
  add_common(prof);
  prof->add_option("--at-time", at_time, "Simulated time of the planning cycle")->required();

  auto* bench = app.add_subcommand("bench", "Time planning cycles");
  add_common(bench);
  bench->add_option("--cycles", cycles, "Number of cycles")->check(CLI::Range(100, 100000000));
  bench->add_option("--horizon", horizon, "Override the horizon length in meters");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : bad_input;
  }

  try {
    if (*run) return cmd_run(common, duration, cold, budget);
    if (*prof) return cmd_profile(common, at_time);
    return cmd_bench(common, cycles, horizon);
  } catch (const sim::ScenarioError& e) {
    std::cerr << common.scenario << ": " << e.what() << '\n';
    return bad_input;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return bad_input;
  }
}
