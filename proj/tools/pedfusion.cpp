// pedfusion: calibration sweep, scenario runs and log replay.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pedfusion/calib.hpp"
#include "pedfusion/csv.hpp"
#include "pedfusion/error.hpp"
#include "pedfusion/pipeline.hpp"
#include "pedfusion/sim.hpp"

namespace fs = std::filesystem;
using namespace pedfusion;

int main(int argc, char** argv) {
  CLI::App app{"Camera/lidar pedestrian distance fusion on simulated crossing scenarios"};
  app.require_subcommand(1);

  auto* calibrate = app.add_subcommand("calibrate", "Fit the distance polynomial and spatial map");
  std::string cal_scenario;
  std::string cal_out;
  int positions = 53;
  std::optional<std::uint64_t> cal_seed;
  calibrate->add_option("--scenario", cal_scenario, "Scenario JSON supplying camera/lidar geometry");
  calibrate->add_option("--out", cal_out, "Calibration JSON to write")->required();
  calibrate->add_option("--positions", positions, "Number of sweep positions")->capture_default_str();
  calibrate->add_option("--seed", cal_seed, "Override the scenario seed");

  auto* run = app.add_subcommand("run", "Simulate a scenario and run the full pipeline");
  std::string run_scenario;
  std::string run_calib;
  std::string run_out;
  bool dump_frames = false;
  std::optional<std::uint64_t> run_seed;
  run->add_option("--scenario", run_scenario, "Scenario JSON")->required();
  run->add_option("--calib", run_calib, "Calibration JSON")->required();
  run->add_option("--out", run_out, "Output directory")->required();
  run->add_flag("--dump-frames", dump_frames, "Write every frame as PGM");
  run->add_option("--seed", run_seed, "Override the scenario seed");

  auto* replay = app.add_subcommand("replay", "Re-run gating and fusion from recorded logs");
  std::string logs;
  std::string rep_calib;
  std::string rep_out;
  std::string rep_scenario;
  replay->add_option("--logs", logs, "Directory written by 'run'")->required();
  replay->add_option("--calib", rep_calib, "Calibration JSON")->required();
  replay->add_option("--out", rep_out, "Output directory for fusion.csv")->required();
  replay->add_option("--scenario", rep_scenario, "Scenario JSON supplying fusion thresholds");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*calibrate) {
      pipeline::SweepConfig sweep;
      if (!cal_scenario.empty()) sweep.scene = sim::load_scenario(cal_scenario);
      if (cal_seed) sweep.scene.seed = *cal_seed;
      sweep.positions = positions;
      const auto artifact = pipeline::cmd_calibrate(sweep);
      calib::save_calibration(cal_out, artifact);
      std::cout << "poly max residual " << artifact.report.max_abs_residual_m << " m over "
                << artifact.report.sample_count << " samples, " << artifact.spatial_map.anchors().size()
                << " anchors -> " << cal_out << "\n";
    } else if (*run) {
      const auto cfg = sim::load_scenario(run_scenario);
      const auto artifact = calib::load_calibration(run_calib);
      pipeline::RunOptions options;
      options.dump_frames = dump_frames;
      options.seed = run_seed;
      const auto result = pipeline::cmd_run(cfg, artifact, fs::path(run_out), options);
      std::cout << pipeline::to_json(result.report);
    } else if (*replay) {
      const auto artifact = calib::load_calibration(rep_calib);
      fusion::FusionParams params;
      if (!rep_scenario.empty()) {
        params = pipeline::fusion_params_for(sim::load_scenario(rep_scenario).pipeline);
      }
      const auto fused = pipeline::cmd_replay(logs, artifact, params);
      fs::create_directories(rep_out);
      csv::write_file(fs::path(rep_out) / "fusion.csv", pipeline::fusion_csv(fused));
      std::cout << fused.size() << " frames -> " << (fs::path(rep_out) / "fusion.csv").string()
                << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "pedfusion: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "pedfusion: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
