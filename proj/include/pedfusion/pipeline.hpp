#pragma once

// End-to-end wiring used by the command-line tool: calibration sweep,
// scenario runs and log replay.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pedfusion/calib.hpp"
#include "pedfusion/fusion.hpp"
#include "pedfusion/lidar.hpp"
#include "pedfusion/sim.hpp"
#include "pedfusion/vision.hpp"

namespace pedfusion::pipeline {

struct SweepConfig {
  sim::ScenarioConfig scene;  // camera and lidar geometry, seed
  int positions = 53;
  double min_distance_m = 2.0;
  double max_distance_m = 20.0;
  // Target positions start uniform in 1/d (uniform in image rows). Each
  // refinement round fits, evaluates the error on a dense probe sweep and
  // regroups the interior positions around the error's zero crossings, so
  // the fit stays tight across the whole span including its ends.
  int refine_rounds = 10;
  int probe_positions = 401;
  int cluster_halfwidth_probes = 2;
  double anchor_min_m = 2.0;
  double anchor_max_m = 10.0;
  int lidar_scans_per_anchor = 1000;  // lidar anchor value is the median
};

std::vector<calib::PixelSample> calibration_samples(const SweepConfig& sweep);

/// Static-distance sweep, polynomial fit and lidar/camera anchor pairs.
calib::CalibrationArtifact cmd_calibrate(const SweepConfig& sweep);

struct RunOptions {
  bool dump_frames = false;
  std::optional<std::uint64_t> seed;
};

struct RunReport {
  std::string scenario;
  std::size_t frames = 0;
  double lidar_detection_rate = 0.0;
  double camera_detection_rate = 0.0;
  double camera_trusted_rate = 0.0;
  double coverage_2_20 = 0.0;  // frames with a fused distance while 2 <= gt <= 20
  std::size_t frames_2_20 = 0;
  std::optional<double> rmse_near_m;  // gt in [2, 9)
  std::optional<double> rmse_far_m;   // gt in [9, 20]
  std::size_t samples_near = 0;
  std::size_t samples_far = 0;
  std::optional<double> switch_time_s;
  std::optional<double> switch_distance_m;  // gt at the sustained camera->lidar switch
  std::optional<double> warning_time_s;
  std::optional<double> warning_distance_m;  // gt at the first sustained yellow->red
  std::size_t sustained_red_transitions = 0;
  std::size_t lidar_main_frames = 0;
  std::size_t lidar_valid_frames = 0;  // frames with a lidar CIO
  std::size_t lidar_main_when_valid = 0;
  std::size_t red_frames = 0;
  std::size_t lidar_false_alarms = 0;
  std::size_t camera_false_alarms = 0;
};

std::string to_json(const RunReport& report);

/// Gating, CIO selection and fusion for one camera frame. Shared by the run
/// and replay paths so both produce the same numbers.
class FusionStage {
 public:
  FusionStage(const calib::SpatialMap& map, const fusion::FusionParams& params);

  fusion::FusedOutput process(double frame_t_s, std::span<const lidar::LidarScan> lidar_stream,
                              std::span<const Detection> camera_dets, const EnvSignal& env);

  std::optional<Detection> last_lidar_cio() const { return last_lidar_cio_; }
  std::optional<Detection> last_camera_cio() const { return last_camera_cio_; }
  std::size_t lidar_rejections() const { return lidar_rejections_; }

 private:
  const calib::SpatialMap* map_;
  fusion::FusionParams params_;
  calib::TriggerClock clock_;
  lidar::ChannelHistory history_;
  fusion::FusionState state_;
  std::optional<Detection> last_lidar_cio_;
  std::optional<Detection> last_camera_cio_;
  std::size_t lidar_rejections_ = 0;
};

struct FrameRecord {
  double t_s = 0.0;
  EnvSignal env;
};

struct GroundTruthRecord {
  double t_s = 0.0;
  double gt_distance_m = 0.0;
  double ped_lat_m = 0.0;
};

struct RunResult {
  RunReport report;
  std::vector<fusion::FusedOutput> fused;
  std::vector<std::vector<Detection>> camera;  // per frame
  std::vector<FrameRecord> frames;
  std::vector<GroundTruthRecord> ground_truth;
  std::vector<lidar::LidarScan> lidar;
};

vision::CameraParams camera_params_for(const sim::PipelineConfig& cfg);
fusion::FusionParams fusion_params_for(const sim::PipelineConfig& cfg);
vision::RoiMask roi_for(const sim::ScenarioConfig& cfg);

/// Runs a scenario in memory. When out_dir is set, writes fusion.csv,
/// lidar.csv, camera.csv, frames.csv, ground_truth.csv and report.json (and
/// frames/frame_%06d.pgm with dump_frames).
RunResult cmd_run(const sim::ScenarioConfig& cfg, const calib::CalibrationArtifact& calib,
                  const std::optional<std::filesystem::path>& out_dir, const RunOptions& options);

/// Re-runs gating and fusion from recorded logs in `log_dir`.
std::vector<fusion::FusedOutput> cmd_replay(const std::filesystem::path& log_dir,
                                            const calib::CalibrationArtifact& calib,
                                            const fusion::FusionParams& params);

RunReport summarize(const std::string& scenario, const std::vector<fusion::FusedOutput>& fused,
                    const std::vector<GroundTruthRecord>& truth,
                    const std::vector<FrameRecord>& frames,
                    const std::vector<std::vector<Detection>>& camera,
                    const fusion::FusionParams& params);

// Log formats.
std::string fusion_csv(std::span<const fusion::FusedOutput> rows);
std::string camera_csv(std::span<const FrameRecord> frames,
                       std::span<const std::vector<Detection>> camera);
std::string frames_csv(std::span<const FrameRecord> frames);
std::string ground_truth_csv(std::span<const GroundTruthRecord> rows);

std::vector<FrameRecord> load_frames_csv(const std::filesystem::path& path);
std::vector<Detection> load_camera_csv(const std::filesystem::path& path);

}  // namespace pedfusion::pipeline
