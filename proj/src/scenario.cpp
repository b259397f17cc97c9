#include "stplan/scenario.hpp"

#include "json.hpp"

#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace stplan::sim {

using nlohmann::json;

ScenarioError::ScenarioError(const std::string& message, std::string where, int line)
    : std::runtime_error((line > 0 ? "line " + std::to_string(line) + ": " : std::string()) +
                         (where.empty() ? "" : where + ": ") + message),
      message_(message),
      where_(std::move(where)),
      line_(line) {}

int GridConfig::samples() const { return static_cast<int>(std::lround(horizon / delta_s)); }

bool Signal::red_at(double t) const {
  bool red = false;
  for (const auto& p : schedule)
    if (p.t <= t) red = p.red;
  return red;
}

std::optional<double> Signal::next_red_after(double t) const {
  for (const auto& p : schedule)
    if (p.t > t && p.red) return p.t;
  return std::nullopt;
}

namespace {

// Maps JSON pointers to source lines. Only run on text nlohmann already accepted.
class LineIndex {
 public:
  explicit LineIndex(const std::string& text) : text_(text) {
    skip_ws();
    value("");
  }
  int line_of(std::string ptr) const {
    while (true) {
      auto it = lines_.find(ptr);
      if (it != lines_.end()) return it->second;
      const auto cut = ptr.rfind('/');
      if (cut == std::string::npos) return 0;
      ptr.resize(cut);
    }
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      if (text_[pos_] == '\n') ++line_;
      ++pos_;
    }
  }
  std::string string() {
    std::string out;
    ++pos_;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\\') ++pos_;
      out += text_[pos_++];
    }
    ++pos_;
    return out;
  }
  void value(const std::string& ptr) {
    lines_.emplace(ptr, line_);
    const char c = text_[pos_];
    if (c == '{') {
      ++pos_;
      skip_ws();
      while (text_[pos_] != '}') {
        const int key_line = line_;
        const std::string key = string();
        skip_ws();
        ++pos_;  // ':'
        skip_ws();
        const std::string child = ptr + "/" + key;
        value(child);
        lines_[child] = key_line;
        skip_ws();
        if (text_[pos_] == ',') ++pos_;
        skip_ws();
      }
      ++pos_;
    } else if (c == '[') {
      ++pos_;
      skip_ws();
      for (int i = 0; text_[pos_] != ']'; ++i) {
        value(ptr + "/" + std::to_string(i));
        skip_ws();
        if (text_[pos_] == ',') ++pos_;
        skip_ws();
      }
      ++pos_;
    } else if (c == '"') {
      string();
    } else {
      while (pos_ < text_.size() && !std::strchr(",]} \t\r\n", text_[pos_])) ++pos_;
    }
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::map<std::string, int> lines_;
};

// Strict object reader: every key must be consumed exactly once.
class Obj {
 public:
  Obj(const json& j, std::string ptr) : j_(j), ptr_(std::move(ptr)) {
    if (!j.is_object()) throw ScenarioError("expected an object", ptr_);
  }
  void done() const {
    for (const auto& [key, _] : j_.items())
      if (!used_.count(key)) throw ScenarioError("unknown key \"" + key + "\"", ptr_ + "/" + key);
  }

  template <class T>
  void get(const char* key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    const std::string p = ptr_ + "/" + key;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ScenarioError("expected a boolean", p);
      out = v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ScenarioError("expected a string", p);
      out = v.get<std::string>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ScenarioError("expected an integer", p);
      if (v.is_number_unsigned()) {
        out = static_cast<T>(v.get<std::uint64_t>());
      } else {
        const auto i = v.get<std::int64_t>();
        if (std::is_unsigned_v<T> && i < 0) throw ScenarioError("expected a non-negative integer", p);
        out = static_cast<T>(i);
      }
    } else {
      if (!v.is_number()) throw ScenarioError("expected a number", p);
      out = v.get<T>();
    }
  }

  template <class F>
  void array(const char* key, F&& each) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    const std::string p = ptr_ + "/" + key;
    if (!v.is_array()) throw ScenarioError("expected an array", p);
    for (std::size_t i = 0; i < v.size(); ++i) each(v[i], p + "/" + std::to_string(i));
  }

  template <class F>
  void object(const char* key, F&& fn) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    Obj o(j_.at(key), ptr_ + "/" + key);
    fn(o);
    o.done();
  }

 private:
  const json& j_;
  std::string ptr_;
  std::set<std::string> used_;
};

void read(Obj& o, GridConfig& g) {
  o.get("delta_s", g.delta_s);
  o.get("horizon", g.horizon);
}

void read(Obj& o, Params& p) {
  o.get("v_min", p.v_min);
  o.get("a_min", p.a_min);
  o.get("a_max", p.a_max);
  o.get("a_lat_hat", p.a_lat_hat);
  o.get("j_min", p.j_min);
  o.get("j_max", p.j_max);
  o.get("kappa_min", p.kappa_min);
  o.get("kappa_max", p.kappa_max);
  o.get("w_d", p.w_d);
  o.get("w_kappa", p.w_kappa);
  o.get("w_v", p.w_v);
  o.get("w_a", p.w_a);
  o.get("alpha", p.alpha);
  o.get("beta", p.beta);
}

void read(Obj& o, SolverConfig& s) {
  o.get("n_iters", s.n_iters);
  o.get("tol", s.tol);
  o.get("mu_default", s.mu_default);
  o.get("mu_tmax", s.mu_tmax);
  o.get("lambda_max_default", s.lambda_max_default);
  o.get("lambda_max_tmax", s.lambda_max_tmax);
}

XY read_xy(const json& j, const std::string& p) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ScenarioError("expected [x, y]", p);
  return {j[0].get<double>(), j[1].get<double>()};
}

void read(Obj& o, ReferenceConfig& r) {
  o.array("points", [&](const json& j, const std::string& p) { r.points.push_back(read_xy(j, p)); });
  o.get("noise_sigma", r.noise_sigma);
  o.get("noise_spacing", r.noise_spacing);
  o.get("seed", r.seed);
}

void read(Obj& o, Actor& a) {
  o.get("id", a.id);
  std::string mode = "reference";
  o.get("mode", mode);
  if (mode == "reference") a.mode = Actor::Mode::reference;
  else if (mode == "pose") a.mode = Actor::Mode::pose;
  else throw ScenarioError("mode must be \"reference\" or \"pose\"");
  o.get("s", a.s);
  o.get("lateral", a.lateral);
  o.get("relative_to_ego", a.relative_to_ego);
  o.get("x", a.x);
  o.get("y", a.y);
  o.get("heading", a.heading);
  o.get("speed", a.speed);
  o.get("spawn_time", a.spawn_time);
  o.get("length", a.length);
  o.get("width", a.width);
}

void read(Obj& o, Signal& s) {
  o.get("id", s.id);
  o.get("s", s.s);
  o.get("emit_deadline", s.emit_deadline);
  o.array("schedule", [&](const json& j, const std::string& p) {
    Obj ph(j, p);
    SignalPhase phase;
    ph.get("t", phase.t);
    std::string state;
    ph.get("state", state);
    if (state != "red" && state != "green")
      throw ScenarioError("state must be \"red\" or \"green\"", p + "/state");
    phase.red = state == "red";
    ph.done();
    s.schedule.push_back(phase);
  });
}

void read(Obj& o, TimeConstraint& c) {
  o.get("id", c.id);
  std::string kind;
  o.get("kind", kind);
  if (kind != "min" && kind != "max") throw ScenarioError("kind must be \"min\" or \"max\"");
  c.is_min = kind == "min";
  o.get("s", c.s);
  o.get("t", c.t);
}

void read(Obj& o, EgoConfig& e) {
  o.get("s", e.s);
  o.get("lateral", e.lateral);
  o.get("v", e.v);
}

void read(Obj& o, SimConfig& s) {
  o.get("duration", s.duration);
  o.get("dt", s.dt);
  o.get("wheelbase", s.wheelbase);
  o.get("k_p", s.k_p);
  o.get("lookahead_min", s.lookahead_min);
  o.get("lookahead_time", s.lookahead_time);
  o.get("max_steer", s.max_steer);
  o.get("d_safe_base", s.d_safe_base);
  o.get("d_safe_time", s.d_safe_time);
  o.get("lateral_gate", s.lateral_gate);
  o.get("profile_stride", s.profile_stride);
  std::string follow = "gap";
  o.get("follow", follow);
  if (follow == "gap") s.follow = SimConfig::Follow::gap;
  else if (follow == "ramp") s.follow = SimConfig::Follow::ramp;
  else throw ScenarioError("follow must be \"gap\" or \"ramp\"");
}

template <class T>
auto list_reader(std::vector<T>& out) {
  return [&out](const json& j, const std::string& p) {
    Obj o(j, p);
    T item;
    try {
      read(o, item);
    } catch (const ScenarioError& e) {
      if (!e.where().empty()) throw;
      throw ScenarioError(e.message(), p);
    }
    o.done();
    out.push_back(item);
  };
}

Scenario from_json(const json& root) {
  Scenario s;
  Obj o(root, "");
  o.get("name", s.name);
  o.object("grid", [&](Obj& g) { read(g, s.grid); });
  o.object("params", [&](Obj& g) { read(g, s.params); });
  o.object("solver", [&](Obj& g) { read(g, s.solver); });
  o.object("reference", [&](Obj& g) { read(g, s.reference); });
  o.array("speed_limits", [&](const json& j, const std::string& p) {
    Obj l(j, p);
    SpeedLimit lim;
    l.get("from", lim.from);
    l.get("v", lim.v);
    l.done();
    s.speed_limits.push_back(lim);
  });
  o.array("actors", list_reader(s.actors));
  o.array("signals", list_reader(s.signals));
  o.array("spatiotemporal", list_reader(s.spatiotemporal));
  o.object("ego", [&](Obj& g) { read(g, s.ego); });
  o.object("sim", [&](Obj& g) { read(g, s.sim); });
  o.done();
  return s;
}

json to_json(const Scenario& s) {
  json j;
  j["name"] = s.name;
  j["grid"] = {{"delta_s", s.grid.delta_s}, {"horizon", s.grid.horizon}};
  const Params& p = s.params;
  j["params"] = {{"v_min", p.v_min},     {"a_min", p.a_min},         {"a_max", p.a_max},
                 {"a_lat_hat", p.a_lat_hat}, {"j_min", p.j_min},     {"j_max", p.j_max},
                 {"kappa_min", p.kappa_min}, {"kappa_max", p.kappa_max}, {"w_d", p.w_d},
                 {"w_kappa", p.w_kappa}, {"w_v", p.w_v},             {"w_a", p.w_a},
                 {"alpha", p.alpha},     {"beta", p.beta}};
  const SolverConfig& sv = s.solver;
  j["solver"] = {{"n_iters", sv.n_iters},
                 {"tol", sv.tol},
                 {"mu_default", sv.mu_default},
                 {"mu_tmax", sv.mu_tmax},
                 {"lambda_max_default", sv.lambda_max_default},
                 {"lambda_max_tmax", sv.lambda_max_tmax}};
  json pts = json::array();
  for (const auto& q : s.reference.points) pts.push_back({q.x, q.y});
  j["reference"] = {{"points", pts}, {"noise_sigma", s.reference.noise_sigma},
                    {"noise_spacing", s.reference.noise_spacing},
                    {"seed", s.reference.seed}};
  j["speed_limits"] = json::array();
  for (const auto& l : s.speed_limits) j["speed_limits"].push_back({{"from", l.from}, {"v", l.v}});
  j["actors"] = json::array();
  for (const auto& a : s.actors)
    j["actors"].push_back({{"id", a.id},
                           {"mode", a.mode == Actor::Mode::pose ? "pose" : "reference"},
                           {"s", a.s},
                           {"lateral", a.lateral},
                           {"relative_to_ego", a.relative_to_ego},
                           {"x", a.x},
                           {"y", a.y},
                           {"heading", a.heading},
                           {"speed", a.speed},
                           {"spawn_time", a.spawn_time},
                           {"length", a.length},
                           {"width", a.width}});
  j["signals"] = json::array();
  for (const auto& sg : s.signals) {
    json sched = json::array();
    for (const auto& ph : sg.schedule) sched.push_back({{"t", ph.t}, {"state", ph.red ? "red" : "green"}});
    j["signals"].push_back(
        {{"id", sg.id}, {"s", sg.s}, {"schedule", sched}, {"emit_deadline", sg.emit_deadline}});
  }
  j["spatiotemporal"] = json::array();
  for (const auto& c : s.spatiotemporal)
    j["spatiotemporal"].push_back(
        {{"id", c.id}, {"kind", c.is_min ? "min" : "max"}, {"s", c.s}, {"t", c.t}});
  j["ego"] = {{"s", s.ego.s}, {"lateral", s.ego.lateral}, {"v", s.ego.v}};
  const SimConfig& m = s.sim;
  j["sim"] = {{"duration", m.duration},         {"dt", m.dt},
              {"wheelbase", m.wheelbase},       {"k_p", m.k_p},
              {"lookahead_min", m.lookahead_min}, {"lookahead_time", m.lookahead_time},
              {"max_steer", m.max_steer},       {"d_safe_base", m.d_safe_base},
              {"d_safe_time", m.d_safe_time},   {"lateral_gate", m.lateral_gate},
              {"profile_stride", m.profile_stride},
              {"follow", m.follow == SimConfig::Follow::gap ? "gap" : "ramp"}};
  return j;
}

void require(bool ok, const std::string& what, const std::string& where) {
  if (!ok) throw ScenarioError(what, where);
}

double polyline_length(const std::vector<XY>& pts) {
  double L = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    L += std::hypot(pts[i].x - pts[i - 1].x, pts[i].y - pts[i - 1].y);
  return L;
}

}  // namespace

void Scenario::validate() const {
  require(grid.delta_s > 0.0, "must be positive", "/grid/delta_s");
  require(grid.horizon >= 2.0 * grid.delta_s, "must cover at least two samples", "/grid/horizon");
  const Params& p = params;
  require(p.v_min > 0.0, "must be positive", "/params/v_min");
  require(p.a_min < 0.0, "must be negative", "/params/a_min");
  require(p.a_max > 0.0, "must be positive", "/params/a_max");
  require(p.a_lat_hat > 0.0, "must be positive", "/params/a_lat_hat");
  require(p.j_min < 0.0, "must be negative", "/params/j_min");
  require(p.j_max > 0.0, "must be positive", "/params/j_max");
  require(p.kappa_min < p.kappa_max, "must be below kappa_max", "/params/kappa_min");
  require(p.w_d > 0.0, "must be positive", "/params/w_d");
  require(p.w_kappa > 0.0, "must be positive", "/params/w_kappa");
  require(p.w_v > 0.0, "must be positive", "/params/w_v");
  require(p.w_a > 0.0, "must be positive", "/params/w_a");
  require(p.beta >= 0.0, "must be non-negative", "/params/beta");
  require(solver.n_iters >= 1, "must be at least 1", "/solver/n_iters");
  require(solver.tol >= 0.0, "must be non-negative", "/solver/tol");
  require(solver.mu_default > 0.0, "must be positive", "/solver/mu_default");
  require(solver.mu_tmax > 0.0, "must be positive", "/solver/mu_tmax");
  require(solver.lambda_max_default > 0.0, "must be positive", "/solver/lambda_max_default");
  require(solver.lambda_max_tmax > 0.0, "must be positive", "/solver/lambda_max_tmax");

  require(reference.points.size() >= 2, "needs at least two points", "/reference/points");
  const double L = polyline_length(reference.points);
  require(L > 0.0, "has zero length", "/reference/points");
  require(reference.noise_sigma >= 0.0, "must be non-negative", "/reference/noise_sigma");
  require(reference.noise_spacing >= 0.0, "must be non-negative", "/reference/noise_spacing");

  auto on_map = [L](double s) { return s >= 0.0 && s <= L; };
  for (std::size_t i = 0; i < speed_limits.size(); ++i) {
    const std::string w = "/speed_limits/" + std::to_string(i);
    require(speed_limits[i].v > 0.0, "v must be positive", w + "/v");
    require(on_map(speed_limits[i].from), "outside the map", w + "/from");
    if (i > 0) require(speed_limits[i].from > speed_limits[i - 1].from, "must be increasing", w + "/from");
  }
  std::set<std::string> ids;
  for (std::size_t i = 0; i < actors.size(); ++i) {
    const Actor& a = actors[i];
    const std::string w = "/actors/" + std::to_string(i);
    require(!a.id.empty() && ids.insert(a.id).second, "id missing or duplicate", w + "/id");
    require(a.speed >= 0.0, "must be non-negative", w + "/speed");
    require(a.spawn_time >= 0.0, "must be non-negative", w + "/spawn_time");
    require(a.length > 0.0 && a.width > 0.0, "dimensions must be positive", w);
    if (a.mode == Actor::Mode::reference && !a.relative_to_ego)
      require(on_map(a.s), "outside the map", w + "/s");
  }
  for (std::size_t i = 0; i < signals.size(); ++i) {
    const Signal& sg = signals[i];
    const std::string w = "/signals/" + std::to_string(i);
    require(!sg.id.empty() && ids.insert(sg.id).second, "id missing or duplicate", w + "/id");
    require(on_map(sg.s), "outside the map", w + "/s");
    for (std::size_t k = 0; k < sg.schedule.size(); ++k) {
      const std::string wk = w + "/schedule/" + std::to_string(k) + "/t";
      require(sg.schedule[k].t >= 0.0, "must be non-negative", wk);
      if (k > 0) require(sg.schedule[k].t > sg.schedule[k - 1].t, "must be increasing", wk);
    }
  }
  for (std::size_t i = 0; i < spatiotemporal.size(); ++i) {
    const TimeConstraint& c = spatiotemporal[i];
    const std::string w = "/spatiotemporal/" + std::to_string(i);
    require(!c.id.empty() && ids.insert(c.id).second, "id missing or duplicate", w + "/id");
    require(on_map(c.s), "outside the map", w + "/s");
    require(c.t >= 0.0, "must be non-negative", w + "/t");
  }
  require(on_map(ego.s), "outside the map", "/ego/s");
  require(ego.v >= 0.0, "must be non-negative", "/ego/v");
  require(sim.duration > 0.0, "must be positive", "/sim/duration");
  require(sim.dt > 0.0, "must be positive", "/sim/dt");
  require(sim.wheelbase > 0.0, "must be positive", "/sim/wheelbase");
  require(sim.lookahead_min > 0.0, "must be positive", "/sim/lookahead_min");
  require(sim.max_steer > 0.0, "must be positive", "/sim/max_steer");
  require(sim.d_safe_base > 0.0, "must be positive", "/sim/d_safe_base");
  require(sim.d_safe_time >= 0.0, "must be non-negative", "/sim/d_safe_time");
  require(sim.lateral_gate > 0.0, "must be positive", "/sim/lateral_gate");
  require(sim.profile_stride >= 1, "must be at least 1", "/sim/profile_stride");
}

Scenario parse_scenario(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    int line = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i)
      if (text[i] == '\n') ++line;
    throw ScenarioError(e.what(), {}, line);
  }
  try {
    Scenario s = from_json(root);
    s.validate();
    return s;
  } catch (const ScenarioError& e) {
    throw ScenarioError(e.message(), e.where(), LineIndex(text).line_of(e.where()));
  }
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string dump_scenario(const Scenario& s) { return to_json(s).dump(2) + "\n"; }

}  // namespace stplan::sim
