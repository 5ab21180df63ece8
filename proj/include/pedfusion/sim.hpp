#pragma once

// Deterministic simulator for the car-to-pedestrian crossing scenarios:
// constant-speed vehicle and pedestrians, pinhole rendering over a textured
// ground plane and a three-beam lidar return model.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "pedfusion/image.hpp"
#include "pedfusion/lidar.hpp"

namespace pedfusion::sim {

enum class ScenarioKind { kCVFA, kCVNA25, kCVNA75 };

std::string_view to_string(ScenarioKind kind);
ScenarioKind scenario_kind_from_string(std::string_view text);

/// Fraction of the vehicle width (from the near side) where the pedestrian
/// is struck: 0.50 for CVFA, 0.25 for CVNA25, 0.75 for CVNA75.
double impact_fraction_for(ScenarioKind kind);

/// Implementer defaults: 8 km/h running (farside), 5 km/h walking (nearside).
double default_ped_speed_for(ScenarioKind kind);

inline constexpr double kDefaultVehicleSpeedMps = 15.0 / 3.6;

struct CameraConfig {
  double hfov_deg = 78.0;
  double height_m = 1.2;
  double fps = 30.0;
  int width = 640;
  int height = 480;
};

struct LidarConfig {
  double hfov_deg = 27.0;
  double vfov_deg = 11.0;
  double rate_hz = 100.0;
  double sigma_m = 0.10;
  double range_min_m = 1.0;
  double range_max_m = 10.0;
  double spike_probability = 0.0;
  double spike_magnitude_m = 0.5;
};

/// Additional crossing pedestrian, given directly in world coordinates.
struct ExtraPedestrian {
  double lon_m = 0.0;
  double lat_start_m = 0.0;
  double lat_speed_mps = 0.0;  // signed
  double t_start_s = 0.0;
};

/// Pipeline tuning carried alongside a scenario.
struct PipelineConfig {
  double roi_far_distance_m = 30.0;
  double roi_half_width_px = 300.0;
  int threshold = 60;
  double motion_threshold_px = 0.05;
  double dbscan_eps_px = 15.0;
  int dbscan_min_pts = 4;
  double dark_threshold = 30.0;
  int min_corners = 8;
};

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::kCVFA;
  double vehicle_speed_mps = kDefaultVehicleSpeedMps;
  double ped_speed_mps = default_ped_speed_for(ScenarioKind::kCVFA);
  double impact_fraction = impact_fraction_for(ScenarioKind::kCVFA);
  double vehicle_width_m = 1.8;
  double ped_width_m = 0.5;
  double ped_height_m = 1.8;
  double start_gap_m = 30.0;      // vehicle front to pedestrian path at t = 0
  double ped_start_time_s = 0.0;  // pedestrian stands still before this
  CameraConfig camera;
  LidarConfig lidar;
  std::uint64_t seed = 1;
  std::optional<double> duration_s;  // default: until 1.5 m before the path
  int ambient_level = 255;
  std::vector<ExtraPedestrian> extra_pedestrians;
  PipelineConfig pipeline;

  /// Config with kind-specific defaults filled in.
  static ScenarioConfig for_kind(ScenarioKind kind);
};

std::string to_json(const ScenarioConfig& cfg);
ScenarioConfig scenario_from_json(const std::string& text);
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Pinhole camera looking along the road with zero pitch. The principal
/// point is the image center and pixel centers sit on integer coordinates.
struct PinholeCamera {
  double focal_px;
  double cx;
  double cy;
  double height_m;
  int width;
  int height;

  explicit PinholeCamera(const CameraConfig& cfg);

  /// Image row of a ground point at the given longitudinal distance.
  double ground_row(double distance_m) const { return cy + focal_px * height_m / distance_m; }
  /// Image column of a point at the given lateral offset (positive = left).
  double column(double lateral_m, double distance_m) const {
    return cx - focal_px * lateral_m / distance_m;
  }
  double row(double height_above_ground_m, double distance_m) const {
    return cy + focal_px * (height_m - height_above_ground_m) / distance_m;
  }
};

struct PedestrianTrack {
  double lon_m = 0.0;
  double lat_start_m = 0.0;
  double lat_speed_mps = 0.0;
  double t_start_s = 0.0;

  double lat_at(double t_s) const {
    return t_s <= t_start_s ? lat_start_m : lat_start_m + lat_speed_mps * (t_s - t_start_s);
  }
};

struct PedestrianState {
  double lon_m = 0.0;
  double lat_m = 0.0;
};

struct WorldState {
  double t_s = 0.0;
  double vehicle_x_m = 0.0;
  std::vector<PedestrianState> peds;
  double ground_truth_distance_m = 0.0;  // nearest pedestrian, longitudinal
  double ground_truth_lat_m = 0.0;
};

struct Scenario {
  ScenarioConfig cfg;
  std::vector<PedestrianTrack> tracks;  // tracks[0] is the scenario pedestrian
  double impact_time_s = 0.0;
  double impact_lat_m = 0.0;
  double duration_s = 0.0;
  WorldState initial;
};

/// Throws kInfeasibleGeometry when the pedestrian cannot reach the impact
/// point (non-positive speeds, start after impact) and kInvalidArgument for
/// an impact fraction that disagrees with the kind.
Scenario build_scenario(const ScenarioConfig& cfg);

WorldState state_at(const Scenario& scenario, double t_s);

/// Advances by dt > 0. Positions are evaluated in closed form, which equals
/// the Euler update for constant velocities.
WorldState step(const Scenario& scenario, const WorldState& world, double dt);

/// Throws kBehindCamera if a pedestrian is at or behind the camera plane.
GrayFrame render_frame(const WorldState& world, const ScenarioConfig& cfg);

/// Static calibration scene: flat ground and a uniform target board of
/// pedestrian size on the optical axis.
GrayFrame render_reference_target(const ScenarioConfig& cfg, double distance_m);

inline constexpr int kReferenceTargetLevel = 255;
inline constexpr int kReferenceGroundLevel = 100;

/// Subpixel row of the bottom edge of a bright target in one column,
/// recovered from the partial coverage of the boundary pixel.
double measure_bottom_row(const GrayFrame& frame, int column, int target_level, int ground_level);

using Rng = std::mt19937_64;

lidar::LidarScan sample_lidar(const WorldState& world, const ScenarioConfig& cfg, Rng& rng);

/// Scans at the lidar repetition rate for t in [0, t_end].
std::vector<lidar::LidarScan> lidar_stream(const Scenario& scenario, double t_end, Rng& rng);

}  // namespace pedfusion::sim
