#include "pedfusion/fusion.hpp"

#include <algorithm>

namespace pedfusion::fusion {

std::string_view to_string(MainSensor sensor) {
  switch (sensor) {
    case MainSensor::kNone: return "none";
    case MainSensor::kLidar: return "lidar";
    case MainSensor::kCamera: return "camera";
    case MainSensor::kFallback: return "fallback";
  }
  return "none";
}

std::string_view to_string(Warning warning) {
  switch (warning) {
    case Warning::kNone: return "none";
    case Warning::kLevel1Yellow: return "yellow";
    case Warning::kLevel2Red: return "red";
  }
  return "none";
}

bool camera_trusted(const EnvSignal& env, double dark_threshold, int min_corners) {
  return env.mean_intensity >= dark_threshold && env.corner_count >= min_corners;
}

Warning warn_level(std::optional<double> distance_m) {
  if (!distance_m) return Warning::kNone;
  if (*distance_m < kWarningDistanceM) return Warning::kLevel2Red;
  // Beyond the camera's working range nothing is claimed.
  if (*distance_m > kMaxRangeM) return Warning::kNone;
  return Warning::kLevel1Yellow;
}

FusedOutput fuse(const std::optional<Detection>& lidar_cio,
                 const std::optional<Detection>& camera_cio, const EnvSignal& env,
                 FusionState& state, const FusionParams& params, double t_s) {
  FusedOutput out;
  out.t_s = t_s;
  if (lidar_cio) out.lidar_raw_m = lidar_cio->distance_m;
  if (camera_cio) out.camera_raw_m = camera_cio->distance_m;

  const bool trusted = camera_trusted(env, params.dark_threshold, params.min_corners);
  const std::optional<Detection> camera = trusted ? camera_cio : std::nullopt;

  std::optional<Detection> chosen;
  if (lidar_cio && camera) {
    chosen = lidar_cio->distance_m < params.switch_distance_m ? lidar_cio : camera;
  } else if (lidar_cio) {
    chosen = lidar_cio;
  } else if (camera) {
    chosen = camera;
  }

  while (!state.recent.empty() && t_s - state.recent.front().t_s > params.persistence_window_s) {
    state.recent.pop_front();
  }

  if (chosen) {
    out.distance_m = chosen->distance_m;
    out.main_sensor = chosen->source == Source::kLidar ? MainSensor::kLidar : MainSensor::kCamera;
    state.recent.push_back({chosen->distance_m, t_s, chosen->source});
  } else if (!state.recent.empty()) {
    double nearest = state.recent.front().distance_m;
    for (const auto& e : state.recent) nearest = std::min(nearest, e.distance_m);
    out.distance_m = nearest;
    out.main_sensor = MainSensor::kFallback;
  }
  out.warning = warn_level(out.distance_m);
  return out;
}

}  // namespace pedfusion::fusion
