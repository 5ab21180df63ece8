#pragma once

#include <deque>
#include <optional>
#include <string_view>

#include "pedfusion/detection.hpp"

namespace pedfusion::fusion {

enum class MainSensor { kNone, kLidar, kCamera, kFallback };
enum class Warning { kNone, kLevel1Yellow, kLevel2Red };

std::string_view to_string(MainSensor sensor);
std::string_view to_string(Warning warning);  // none | yellow | red

inline constexpr double kSwitchDistanceM = 9.0;
inline constexpr double kWarningDistanceM = 10.0;
inline constexpr double kMaxRangeM = 20.0;

struct FusedOutput {
  double t_s = 0.0;
  std::optional<double> distance_m;
  MainSensor main_sensor = MainSensor::kNone;
  Warning warning = Warning::kNone;
  std::optional<double> lidar_raw_m;
  std::optional<double> camera_raw_m;
};

struct FusionParams {
  double dark_threshold = 30.0;
  int min_corners = 8;
  double switch_distance_m = kSwitchDistanceM;
  double persistence_window_s = 0.33;  // 10 frames at 30 fps
};

/// Recent fused distances from real detections, used for the fallback.
struct FusionState {
  struct Entry {
    double distance_m;
    double t_s;
    Source source;
  };
  std::deque<Entry> recent;

  std::optional<Entry> last_valid() const {
    if (recent.empty()) return std::nullopt;
    return recent.back();
  }
};

bool camera_trusted(const EnvSignal& env, double dark_threshold, int min_corners);

/// Main-sensor switch. The camera detection must already be expressed in the
/// lidar distance frame.
FusedOutput fuse(const std::optional<Detection>& lidar_cio,
                 const std::optional<Detection>& camera_cio, const EnvSignal& env,
                 FusionState& state, const FusionParams& params, double t_s);

Warning warn_level(std::optional<double> distance_m);

}  // namespace pedfusion::fusion
