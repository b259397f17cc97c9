#include "stplan/report.hpp"

#include <cstdio>
#include <string>

namespace stplan::sim {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void profile_rows(std::ostream& f, const Plan& plan, const std::string& prefix) {
  const auto& p = plan.profile;
  for (int k = 0; k < p.size(); ++k)
    f << prefix << num(plan.origin + p.grid.at(k)) << ',' << num(plan.limits.v[k]) << ','
      << num(plan.reference.v[k]) << ',' << num(p.v[k]) << ',' << num(p.a[k]) << ','
      << num(p.t[k]) << '\n';
}

}  // namespace

void write_cycles_csv(std::ostream& f, const std::vector<CycleLog>& cycles) {
  f << "cycle,time,x,y,heading,v,s,accel,accel_raw,steer,v_plan,a_plan,path_iterations,"
       "profile_iterations,replanned,path_violation,profile_violation,obstacles,time_constraints,"
       "note\n";
  for (const auto& c : cycles) {
    const auto& e = c.ego;
    const auto& m = c.command;
    f << c.cycle << ',' << num(c.time) << ',' << num(e.x) << ',' << num(e.y) << ','
      << num(e.heading) << ',' << num(e.v) << ',' << num(e.s) << ',' << num(m.accel) << ','
      << num(m.accel_raw) << ',' << num(m.steer) << ',' << num(m.v_plan) << ',' << num(m.a_plan)
      << ',' << c.path_iterations << ',' << c.profile_iterations << ',' << (c.replanned ? 1 : 0)
      << ',' << num(c.path_violation) << ',' << num(c.profile_violation) << ',' << c.obstacles
      << ',' << c.time_constraints << ',' << c.note << '\n';
  }
}

void write_profiles_csv(std::ostream& f, const std::vector<ProfileSnapshot>& snaps) {
  f << "cycle,time,s,v_lim,v_ref,v_star,a_star,t_star\n";
  for (const auto& s : snaps) profile_rows(f, s.plan, std::to_string(s.cycle) + ',' + num(s.time) + ',');
}

void write_profile_csv(std::ostream& f, const Plan& plan) {
  f << "s,v_lim,v_ref,v_star,a_star,t_star\n";
  profile_rows(f, plan, "");
}

void write_path_csv(std::ostream& f, const Plan& plan, const path::ReferenceLine& reference) {
  const auto window = reference.window(plan.origin, plan.path.grid.ds, plan.path.size());
  const auto local = path::local_curvature(window);
  f << "s,x_ref,y_ref,x,y,heading,kappa_star,kappa_local\n";
  for (int k = 0; k < plan.path.size(); ++k)
    f << num(plan.origin + plan.path.grid.at(k)) << ',' << num(window.points[k].x()) << ','
      << num(window.points[k].y()) << ',' << num(plan.path.x[k]) << ',' << num(plan.path.y[k])
      << ',' << num(plan.path.heading[k]) << ',' << num(plan.path.curvature[k]) << ','
      << num(local[k]) << '\n';
}

}  // namespace stplan::sim
