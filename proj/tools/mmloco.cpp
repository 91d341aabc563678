// Command-line front end: plan, simulate, trot, compare, validate-log.

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmloco/mission.hpp"

namespace {

using namespace mmloco;

constexpr int kExitFailure = 1;  // ran, but the outcome is not a success
constexpr int kExitError = 2;    // bad input or internal error

MissionConfig load_config(const std::string& path) {
  return path.empty() ? MissionConfig{} : load_mission_config(path);
}

// A scenario file holds {environment, start, goal}; a bare environment file is
// accepted too, in which case start and goal must come from flags.
Scenario load_env_or_scenario(const std::string& path, bool& has_terminals) {
  const auto j = read_json_file(path);
  has_terminals = j.contains("environment");
  if (has_terminals) return scenario_from_json(j);
  Scenario s;
  s.env = environment_from_json(j);
  return s;
}

Scenario load_env_or_scenario(const std::string& path) {
  bool unused = false;
  return load_env_or_scenario(path, unused);
}

Vec3 to_vec(const std::vector<double>& v) { return Vec3(v.at(0), v.at(1), v.at(2)); }

// Flag value when given, otherwise the scenario's.
Vec3 terminal(const std::vector<double>& flag, const Vec3& fallback, bool has_fallback, const char* name) {
  if (!flag.empty()) return to_vec(flag);
  if (!has_fallback) throw ConfigError(std::string("--") + name + " is required with a bare environment file");
  return fallback;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

struct Common {
  std::string config;
  double dt = 0.0;  // 0 keeps the configured value

  void add(CLI::App* app) {
    app->add_option("-c,--config", config, "mission config JSON (defaults when omitted)");
    app->add_option("--dt", dt, "simulation step in seconds")->check(CLI::PositiveNumber);
  }
  MissionConfig load() const {
    MissionConfig c = load_config(config);
    if (dt > 0) c.mission.dt = dt;
    return c;
  }
};

struct RouteFlags {
  std::optional<std::string> method, search;
  std::optional<double> spacing, radius;
  std::optional<int> samples;
  std::optional<std::uint64_t> seed;
  bool legged_only = false;

  void add(CLI::App* app) {
    app->add_option("-m,--method", method, "uniform | mmprm")->check(CLI::IsMember({"uniform", "mmprm"}));
    app->add_option("--search", search, "astar | dijkstra")->check(CLI::IsMember({"astar", "dijkstra"}));
    app->add_option("--spacing", spacing, "uniform lattice spacing (m)")->check(CLI::PositiveNumber);
    app->add_option("--samples", samples, "MM-PRM sample count")->check(CLI::PositiveNumber);
    app->add_option("--radius", radius, "MM-PRM connection radius (m)")->check(CLI::PositiveNumber);
    app->add_option("-s,--seed", seed, "MM-PRM seed");
    app->add_flag("--legged-only", legged_only, "drop aerial and transition edges");
  }
  RouteOptions apply(RouteOptions r) const {
    if (method) r.method = *method;
    if (search) r.search = *search;
    if (spacing) r.spacing = *spacing;
    if (samples) r.samples = *samples;
    if (radius) r.radius = *radius;
    if (seed) r.seed = *seed;
    if (legged_only) r.legged_only = true;
    return r;
  }
};

int cmd_plan(const Common& common, const RouteFlags& rf, const std::string& env_path,
             const std::vector<double>& start, const std::vector<double>& goal, const std::string& out,
             const std::string& graph_out) {
  const MissionConfig cfg = common.load();
  bool has_terminals = false;
  const Scenario sc = load_env_or_scenario(env_path, has_terminals);
  RouteOptions ro = cfg.route;
  if (sc.route) ro = route_options_from_json(*sc.route, ro);
  ro = rf.apply(ro);
  const Vec3 s = terminal(start, sc.start, has_terminals, "start");
  const Vec3 g = terminal(goal, sc.goal, has_terminals, "goal");

  const Route r = plan_route(sc.env, s, g, cfg.cost, cfg.planner, ro);
  if (!graph_out.empty()) write_json_file(graph_out, to_json(r.graph));
  nlohmann::json j;
  if (r.result.found()) {
    j = to_json(*r.result.plan);
  } else {
    j = {{"status", "no_path"}};
  }
  j["expansions"] = r.result.expansions;
  j["route"] = to_json(ro);
  write_text(out, j.dump(2) + "\n");
  if (!r.result.found()) {
    std::cerr << "no path\n";
    return kExitFailure;
  }
  return 0;
}

int cmd_simulate(const Common& common, const std::string& plan_path, const std::string& env_path,
                 const std::string& out, const std::string& summary_out) {
  const MissionConfig cfg = common.load();
  const Scenario sc = load_env_or_scenario(env_path);
  const Plan plan = plan_from_json(read_json_file(plan_path));
  const MissionLog log = follow_plan(plan, cfg, sc.env);
  write_log_csv(out, log);
  const nlohmann::json summary = mission_summary(log, plan, cfg);
  write_text(summary_out, summary.dump(2) + "\n");
  const LogValidation v = validate_log(log);
  for (const auto& p : v.problems) std::cerr << p << '\n';
  if (log.aborted) std::cerr << "mission aborted: " << log.reason << '\n';
  return (!log.aborted && v.ok) ? 0 : kExitFailure;
}

int cmd_trot(const Common& common, double freq, double duty, double duration, bool no_kick,
             const std::string& out, const std::string& summary_out) {
  MissionConfig cfg = common.load();
  GaitRun g;
  g.duration = duration;
  g.kick = !no_kick;
  g.sched = duty == 0.5 ? GaitSchedule::trot(freq) : GaitSchedule::three_contact(freq);
  g.sched.duty = duty;
  g.sched.step_height = cfg.gait.step_height;
  const MissionLog log = run_gait(g, cfg);
  write_log_csv(out, log);

  nlohmann::json s{{"fell", log.fell}, {"rows", log.rows.size()}, {"gait", to_json(g.sched)}};
  if (!log.rows.empty()) s["final_position"] = vec_to_json(log.rows.back().body.r);
  if (freq > 0 && !log.fell) {
    try {
      const LimitCycle lc = limit_cycle_metric(log, g.sched, cfg.mission.poincare_weights);
      s["limit_cycle"] = {{"d", lc.d}, {"converged", lc.converged}, {"K", lc.K}, {"final_ratio", lc.final_ratio}};
    } catch (const Error& e) {
      s["limit_cycle"] = {{"error", e.what()}};
    }
    double margin = std::numeric_limits<double>::infinity();
    for (const auto& r : log.rows)
      if (r.gait_clock >= 0 && !std::isnan(r.margin)) margin = std::min(margin, r.margin);
    s["min_margin"] = margin;
  }
  write_text(summary_out, s.dump(2) + "\n");
  if (log.fell) std::cerr << "robot fell\n";
  return log.fell ? kExitFailure : 0;
}

int cmd_compare(const Common& common, const std::string& env_path, const std::vector<double>& start,
                const std::vector<double>& goal, const CompareOptions& co, const std::string& out,
                const std::string& csv_out) {
  const MissionConfig cfg = common.load();
  bool has_terminals = false;
  const Scenario sc = load_env_or_scenario(env_path, has_terminals);
  const Vec3 s = terminal(start, sc.start, has_terminals, "start");
  const Vec3 g = terminal(goal, sc.goal, has_terminals, "goal");
  const CompareReport rep = compare_discretizations(sc.env, s, g, cfg.cost, cfg.planner, co);
  write_text(out, to_json(rep).dump(2) + "\n");
  if (!csv_out.empty()) {
    std::ofstream f(csv_out);
    if (!f) throw ConfigError("cannot write " + csv_out);
    write_compare_csv(f, rep);
  }
  return 0;
}

int cmd_validate(const std::string& path) {
  const MissionLog log = read_log_csv(path);
  const LogValidation v = validate_log(log);
  for (const auto& p : v.problems) std::cerr << p << '\n';
  std::cout << (v.ok ? "PASS" : "FAIL") << " " << log.rows.size() << " rows\n";
  return v.ok ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-modal legged/aerial locomotion planner and simulator"};
  app.require_subcommand(1);

  Common common;
  RouteFlags route;
  std::string env_path, out, aux, plan_path;
  std::vector<double> start, goal;

  auto* plan = app.add_subcommand("plan", "build a graph and search it");
  common.add(plan);
  route.add(plan);
  plan->add_option("-e,--env", env_path, "scenario or environment JSON")->required()->check(CLI::ExistingFile);
  plan->add_option("--start", start, "start x y z")->expected(3);
  plan->add_option("--goal", goal, "goal x y z")->expected(3);
  plan->add_option("-o,--out", out, "plan JSON (stdout when omitted)");
  plan->add_option("--graph-out", aux, "also write the searched graph");

  auto* sim = app.add_subcommand("simulate", "execute a plan in the simulator");
  common.add(sim);
  sim->add_option("-p,--plan", plan_path, "plan JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("-e,--env", env_path, "scenario or environment JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("-o,--out", out, "log CSV")->required();
  sim->add_option("--summary", aux, "summary JSON (stdout when omitted)");

  double freq = 2.0, duty = 0.5, duration = 15.0;
  bool no_kick = false;
  auto* trot = app.add_subcommand("trot", "gait in place on flat ground");
  common.add(trot);
  trot->add_option("--freq", freq, "gait frequency in Hz, 0 stands still")->check(CLI::NonNegativeNumber);
  trot->add_option("--duty", duty, "stance fraction; 0.5 trot, 0.75 one leg at a time")->check(CLI::Range(0.5, 0.95));
  trot->add_option("--duration", duration, "seconds of gait")->check(CLI::PositiveNumber);
  trot->add_flag("--no-kick", no_kick, "skip the start-up disturbance");
  trot->add_option("-o,--out", out, "log CSV")->required();
  trot->add_option("--summary", aux, "summary JSON (stdout when omitted)");

  CompareOptions co;
  auto* cmp = app.add_subcommand("compare", "uniform lattice vs MM-PRM on one query");
  common.add(cmp);
  cmp->add_option("-e,--env", env_path, "scenario or environment JSON")->required()->check(CLI::ExistingFile);
  cmp->add_option("--start", start, "start x y z")->expected(3);
  cmp->add_option("--goal", goal, "goal x y z")->expected(3);
  cmp->add_option("--spacings", co.spacings, "uniform spacings");
  cmp->add_option("--seeds", co.seeds, "MM-PRM seeds");
  cmp->add_option("--samples", co.samples, "MM-PRM sample count")->check(CLI::PositiveNumber);
  cmp->add_option("--radius", co.radius, "MM-PRM connection radius")->check(CLI::PositiveNumber);
  cmp->add_flag("--legged-only", co.legged_only, "drop aerial and transition edges");
  cmp->add_option("-o,--out", out, "report JSON (stdout when omitted)");
  cmp->add_option("--csv", aux, "report CSV");

  auto* val = app.add_subcommand("validate-log", "check a mission log");
  val->add_option("log", plan_path, "log CSV")->required()->check(CLI::ExistingFile);

  auto* defaults = app.add_subcommand("config", "print the default mission config");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*plan) return cmd_plan(common, route, env_path, start, goal, out, aux);
    if (*sim) return cmd_simulate(common, plan_path, env_path, out, aux);
    if (*trot) return cmd_trot(common, freq, duty, duration, no_kick, out, aux);
    if (*cmp) return cmd_compare(common, env_path, start, goal, co, out, aux);
    if (*val) return cmd_validate(plan_path);
    if (*defaults) {
      std::cout << to_json(MissionConfig{}).dump(2) << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
