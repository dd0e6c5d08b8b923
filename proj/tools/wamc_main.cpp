#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wamc/manifest.hpp"
#include "wamc/model_io.hpp"
#include "wamc/ocp.hpp"
#include "wamc/sim.hpp"
#include "wamc/spatial.hpp"
#include "wamc/wrench_predict.hpp"
#include "wamc/wrenchgen.hpp"

namespace {

using nlohmann::json;

json load_json_file(const std::string& path) {
  std::string resolved = path;
  std::ifstream in(resolved);
  if (!in) {
    const char* dir = std::getenv("WAMC_CONFIG_DIR");
    if (dir != nullptr) {
      resolved = std::string(dir) + "/" + path;
      in.open(resolved);
    }
  }
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  json j;
  in >> j;
  return j;
}

// --set a.b.c=value overrides on a JSON config
void apply_overrides(json& config, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got: " + s);
    const std::string key = s.substr(0, eq);
    const std::string value = s.substr(eq + 1);
    json* node = &config;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
    (*node)[parts.back()] = json::parse(value, nullptr, false).is_discarded()
                                ? json(value)
                                : json::parse(value);
  }
}

wamc::RobotModel load_model_or_default(const std::string& path) {
  if (path.empty()) return wamc::make_sample_arm();
  return wamc::load_robot_model(path);
}

int cmd_gen_wrench(std::uint64_t seed, double duration, const std::string& config_path,
                   const std::vector<std::string>& sets, const std::string& out_path) {
  wamc::WallClock clock;
  json config = config_path.empty() ? json::object() : load_json_file(config_path);
  apply_overrides(config, sets);
  const auto cfg = wamc::generator_config_from_json(config);

  auto ep = wamc::episode_init(cfg, seed);
  wamc::Rng noise_rng(seed ^ 0xdeadbeefull);
  std::ofstream out(out_path);
  if (!out) throw std::invalid_argument("cannot open output: " + out_path);

  const int steps = static_cast<int>(std::round(duration / cfg.dt));
  for (int k = 0; k < steps; ++k) {
    const wamc::Wrench observed = wamc::observed_wrench(ep);
    const wamc::Wrench unobserved = wamc::unobserved_disturbance(
        ep, wamc::Vector3::Zero(), wamc::Vector3::Zero(), cfg, noise_rng);
    const auto preds = wamc::query_prediction(ep, wamc::Pose::Identity(), cfg.horizon_points);

    json line;
    line["time"] = ep.current_time;
    line["observed_wrench"] = std::vector<double>(observed.vector().data(), observed.vector().data() + 6);
    line["unobserved_wrench"] = std::vector<double>(unobserved.vector().data(), unobserved.vector().data() + 6);
    auto parr = json::array();
    for (const auto& p : preds)
      parr.push_back(std::vector<double>(p.vector().data(), p.vector().data() + 6));
    line["predictions"] = parr;
    out << line.dump() << "\n";
    wamc::episode_step(ep, cfg);
  }

  wamc::RunManifest manifest;
  manifest.scenario = "gen-wrench";
  manifest.seed = seed;
  manifest.config = config;
  manifest.outputs = {out_path};
  manifest.wall_clock_seconds = clock.elapsed();
  manifest.write(out_path + ".manifest.json");
  return 0;
}

int cmd_solve(const std::string& model_path, const std::string& config_path,
              const std::vector<std::string>& sets, const std::string& target_str,
              const std::string& out_path) {
  wamc::WallClock clock;
  const auto model = load_model_or_default(model_path);
  json config = config_path.empty() ? json::object() : load_json_file(config_path);
  apply_overrides(config, sets);

  wamc::OcpDefinition def;
  def.model = model;
  def.h_des = model.base_height;
  def.setDefaultWeights();
  wamc::apply_ocp_config(def, config);

  wamc::Vector3 target;
  {
    std::stringstream ss(target_str);
    std::string tok;
    for (int i = 0; i < 3; ++i) {
      if (!std::getline(ss, tok, ',')) throw std::invalid_argument("--target expects x,y,z");
      target[i] = std::stod(tok);
    }
  }
  def.ee_reference = [target](double) { return target; };

  const auto L = def.layout();
  wamc::VectorX x0 = wamc::VectorX::Zero(L.nx());
  x0[2] = def.h_des;
  x0.segment(6, L.n_joints) = model.nominal_posture;

  const auto plan = wamc::ocp_solve(def, x0);
  std::ofstream out(out_path);
  out << wamc::plan_to_json(plan).dump(2) << "\n";

  wamc::RunManifest manifest;
  manifest.scenario = "solve";
  manifest.config = config;
  manifest.outputs = {out_path};
  manifest.wall_clock_seconds = clock.elapsed();
  manifest.write(out_path + ".manifest.json");

  if (plan.degraded) {
    std::cerr << "solver did not converge after " << plan.iterations << " iterations (DEGRADED)\n";
    return 2;
  }
  return 0;
}

int cmd_predict_wrench(const std::string& plan_path, const std::string& model_path,
                       const std::string& out_path) {
  const auto model = load_model_or_default(model_path);
  const auto plan = wamc::plan_from_json(load_json_file(plan_path));
  const std::vector<double> offsets = {0.0, 0.2, 0.4, 0.6, 0.8};
  const auto wp = wamc::plan_to_wrench(plan, model, offsets);
  std::ofstream out(out_path);
  out << wamc::wrench_plan_to_json(wp).dump(2) << "\n";
  return 0;
}

void write_trace(const wamc::SimTrace& trace, const std::string& path, bool csv) {
  std::ofstream out(path);
  if (csv) {
    out << "time,px,py,pz,roll,pitch,yaw,vx,vy,vz,wx,wy,wz,cmd_vx,cmd_vy,cmd_wz,tilt\n";
    for (const auto& r : trace.records) {
      out << r.time << "," << r.base_position.x() << "," << r.base_position.y() << ","
          << r.base_position.z() << "," << r.base_rpy[0] << "," << r.base_rpy[1] << ","
          << r.base_rpy[2] << "," << r.base_lin_vel[0] << "," << r.base_lin_vel[1] << ","
          << r.base_lin_vel[2] << "," << r.base_ang_vel[0] << "," << r.base_ang_vel[1] << ","
          << r.base_ang_vel[2] << "," << r.commands[0] << "," << r.commands[1] << ","
          << r.commands[2] << "," << wamc::tilt_angle(r.base_rpy) << "\n";
    }
  } else {
    for (const auto& r : trace.records) out << wamc::record_to_json(r).dump() << "\n";
  }
}

int cmd_simulate(const std::string& scenario, const std::string& controller_str, std::uint64_t seed,
                 double duration, bool full_length, const std::string& model_path,
                 const std::string& out_path, const std::string& metrics_path, bool csv,
                 bool strict) {
  wamc::WallClock clock;
  const auto model = load_model_or_default(model_path);
  const auto controller = wamc::controller_from_string(controller_str);
  wamc::SimConfig cfg;
  cfg.base.h_des = model.base_height;
  if (full_length) duration = 1800.0;

  json metrics_json;
  metrics_json["scenario"] = scenario;
  metrics_json["controller"] = controller_str;
  metrics_json["seed"] = seed;

  bool fell = false;
  if (scenario == "exp1" || scenario == "exp2") {
    const auto res = scenario == "exp1"
                         ? wamc::run_experiment_1(model, controller, seed, duration, cfg)
                         : wamc::run_experiment_2(model, controller, seed, duration, cfg);
    if (!out_path.empty()) write_trace(res.trace, out_path, csv);
    metrics_json["metrics"] = wamc::metrics_to_json(res.metrics);
    fell = res.metrics.fall_count > 0;
  } else if (scenario == "lean") {
    const double max_force = wamc::max_stabilized_force(controller, cfg);
    const auto probe = wamc::run_leaning(max_force, controller, cfg);
    metrics_json["metrics"] = {{"max_stabilized_force", max_force},
                               {"peak_tilt", probe.peak_tilt},
                               {"preonset_compensation", probe.preonset_compensation}};
  } else if (scenario == "sweep") {
    auto rows = json::array();
    for (double omega : {0.0, 2.0, 4.0, 5.0}) {
      const auto res = wamc::run_frequency_sweep_point(model, controller, omega, seed,
                                                       duration > 0 ? duration : 8.0, cfg);
      json row = wamc::metrics_to_json(res.metrics);
      row["omega"] = omega;
      rows.push_back(row);
      fell = fell || res.metrics.fall_count > 0;
    }
    metrics_json["metrics"] = rows;
  } else {
    throw std::invalid_argument("unknown scenario: " + scenario);
  }

  if (!metrics_path.empty()) {
    std::ofstream out(metrics_path);
    out << metrics_json.dump(2) << "\n";
  } else {
    std::cout << metrics_json.dump(2) << "\n";
  }

  wamc::RunManifest manifest;
  manifest.scenario = scenario;
  manifest.seed = seed;
  manifest.config = {{"controller", controller_str}, {"duration", duration}};
  if (!out_path.empty()) manifest.outputs.push_back(out_path);
  if (!metrics_path.empty()) manifest.outputs.push_back(metrics_path);
  manifest.wall_clock_seconds = clock.elapsed();
  const std::string manifest_base = !metrics_path.empty() ? metrics_path : (!out_path.empty() ? out_path : scenario);
  manifest.write(manifest_base + ".manifest.json");

  if (strict && fell) {
    std::cerr << "fall detected in --strict mode\n";
    return 2;
  }
  return 0;
}

int cmd_report(const std::vector<std::string>& files, const std::string& csv_path) {
  if (files.empty()) {
    std::cerr << "report: no metrics files given\n";
    return 1;
  }
  struct Group {
    std::vector<double> tilt, angvel, track;
    std::vector<std::uint64_t> seeds;
  };
  std::map<std::pair<std::string, std::string>, Group> groups;
  for (const auto& f : files) {
    const json j = load_json_file(f);
    const auto key = std::make_pair(j.at("scenario").get<std::string>(),
                                    j.at("controller").get<std::string>());
    auto& g = groups[key];
    const auto& m = j.at("metrics");
    if (m.is_object()) {
      g.tilt.push_back(m.value("mean_abs_tilt", 0.0));
      g.angvel.push_back(m.value("mean_ang_vel_magnitude_rollpitch", 0.0));
      g.track.push_back(m.value("mean_lin_vel_tracking_error", 0.0));
    }
    g.seeds.push_back(j.value("seed", 0ull));
  }
  auto mean = [](const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };

  std::ostringstream csv;
  csv << "scenario,controller,n_runs,mean_abs_tilt,mean_ang_vel_rollpitch,mean_tracking_error\n";
  std::cout << "scenario    controller   runs  mean_tilt  mean_angvel  mean_trackerr\n";
  for (const auto& [key, g] : groups) {
    std::cout << key.first << "  " << key.second << "  " << g.seeds.size() << "  "
              << mean(g.tilt) << "  " << mean(g.angvel) << "  " << mean(g.track) << "\n";
    csv << key.first << "," << key.second << "," << g.seeds.size() << "," << mean(g.tilt) << ","
        << mean(g.angvel) << "," << mean(g.track) << "\n";
  }
  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    out << csv.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wrench-aware mobile manipulation controller toolkit"};
  app.require_subcommand(1);

  // gen-wrench
  auto* gen = app.add_subcommand("gen-wrench", "Generate a random wrench sequence episode");
  std::uint64_t gen_seed = 0;
  double gen_duration = 10.0;
  std::string gen_config, gen_out = "wrench.jsonl";
  std::vector<std::string> gen_sets;
  gen->add_option("--seed", gen_seed, "RNG seed");
  gen->add_option("--duration", gen_duration, "Episode duration (s)");
  gen->add_option("--config", gen_config, "Generator config JSON");
  gen->add_option("--set", gen_sets, "Config overrides key=value");
  gen->add_option("--out", gen_out, "Output JSONL path");

  // solve
  auto* solve = app.add_subcommand("solve", "Solve one OCP instance for a fixed EE target");
  std::string solve_model, solve_config, solve_target = "0.5,0.0,0.8", solve_out = "plan.json";
  std::vector<std::string> solve_sets;
  solve->add_option("--model", solve_model, "Robot model JSON (default: built-in sample arm)");
  solve->add_option("--config", solve_config, "OCP config JSON");
  solve->add_option("--set", solve_sets, "Config overrides key=value");
  solve->add_option("--target", solve_target, "EE target x,y,z");
  solve->add_option("--out", solve_out, "Output plan JSON");

  // predict-wrench
  auto* pred = app.add_subcommand("predict-wrench", "Convert a plan into a wrench prediction");
  std::string pred_plan, pred_model, pred_out = "wrench.json";
  pred->add_option("--plan", pred_plan, "Plan JSON")->required();
  pred->add_option("--model", pred_model, "Robot model JSON");
  pred->add_option("--out", pred_out, "Output wrench JSON");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run a closed-loop scenario");
  std::string sim_scenario = "exp2", sim_controller = "predictive", sim_model;
  std::string sim_out, sim_metrics;
  std::uint64_t sim_seed = 0;
  double sim_duration = 60.0;
  bool sim_csv = false, sim_full = false, sim_strict = false;
  sim->add_option("--scenario", sim_scenario, "exp1|exp2|lean|sweep");
  sim->add_option("--controller", sim_controller, "predictive|reactive|naive");
  sim->add_option("--seed", sim_seed, "RNG seed");
  sim->add_option("--duration", sim_duration, "Run duration (s)");
  sim->add_option("--model", sim_model, "Robot model JSON");
  sim->add_option("--out", sim_out, "Trace output (JSONL, or CSV with --csv)");
  sim->add_option("--metrics", sim_metrics, "Metrics output JSON");
  sim->add_flag("--csv", sim_csv, "Emit flat CSV trace");
  sim->add_flag("--full", sim_full, "Full-length run (30 min)");
  sim->add_flag("--strict", sim_strict, "Exit 2 if the base falls");

  // report
  auto* rep = app.add_subcommand("report", "Aggregate metrics files into a comparison table");
  std::vector<std::string> rep_files;
  std::string rep_csv;
  rep->add_option("files", rep_files, "Metrics JSON files");
  rep->add_option("--csv", rep_csv, "Also write CSV table");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_wrench(gen_seed, gen_duration, gen_config, gen_sets, gen_out);
    if (solve->parsed()) return cmd_solve(solve_model, solve_config, solve_sets, solve_target, solve_out);
    if (pred->parsed()) return cmd_predict_wrench(pred_plan, pred_model, pred_out);
    if (sim->parsed())
      return cmd_simulate(sim_scenario, sim_controller, sim_seed, sim_duration, sim_full, sim_model,
                          sim_out, sim_metrics, sim_csv, sim_strict);
    if (rep->parsed()) return cmd_report(rep_files, rep_csv);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
