#pragma once

#include <optional>
#include <string_view>

namespace pedfusion {

enum class Source { kLidar, kCamera };

std::string_view to_string(Source source);
Source source_from_string(std::string_view text);

/// Closed pixel-column interval [x_min, x_max] in image coordinates.
struct PixelSpan {
  double x_min = 0.0;
  double x_max = 0.0;
};

/// A single distance estimate from one sensor. The closest one per sensor
/// and frame (the CIO) is what the fusion layer consumes.
struct Detection {
  double distance_m = 0.0;
  Source source = Source::kLidar;
  double t_s = 0.0;
  std::optional<PixelSpan> lateral_px;  // camera only
};

/// Scene visibility statistics used to decide whether the camera can be trusted.
struct EnvSignal {
  double mean_intensity = 0.0;  // 0..255
  int corner_count = 0;
};

}  // namespace pedfusion
