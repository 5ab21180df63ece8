#pragma once

// Pixel-to-distance calibration and camera/lidar alignment.
//
// The image row convention is fixed throughout the library: y is the row
// coordinate measured from the image top, with pixel centers at integer
// values. Larger y means a nearer object on the ground plane.

#include <array>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "pedfusion/lidar.hpp"

namespace pedfusion::calib {

inline constexpr int kPolyDegree = 8;
inline constexpr int kPolyCoeffs = kPolyDegree + 1;

struct PixelSample {
  double y_px = 0.0;
  double distance_m = 0.0;
};

/// Degree-8 polynomial distance model evaluated on the normalized row
/// coordinate u = (y - y_center) / y_scale. Coefficients are stored highest
/// power first, so coeffs[0] multiplies u^8 and coeffs[8] is the constant.
class DistancePoly {
 public:
  DistancePoly(std::array<double, kPolyCoeffs> coeffs, double y_center, double y_scale,
               std::pair<double, double> valid_y_range);

  const std::array<double, kPolyCoeffs>& coeffs() const { return coeffs_; }
  double y_center() const { return y_center_; }
  double y_scale() const { return y_scale_; }
  std::pair<double, double> valid_y_range() const { return valid_y_range_; }

  bool in_range(double y_px) const {
    return y_px >= valid_y_range_.first && y_px <= valid_y_range_.second;
  }

  /// Horner evaluation without the range check.
  double evaluate_unchecked(double y_px) const;

 private:
  std::array<double, kPolyCoeffs> coeffs_;
  double y_center_;
  double y_scale_;
  std::pair<double, double> valid_y_range_;
};

struct FitReport {
  std::size_t sample_count = 0;
  double max_abs_residual_m = 0.0;
  double rms_residual_m = 0.0;
};

struct PolyFit {
  DistancePoly poly;
  FitReport report;
};

/// Least-squares fit of the distance polynomial. Solved with a
/// column-pivoted Householder QR on the normalized Vandermonde matrix.
/// Throws kTooFewSamples (< 9 samples) or kDegenerateDesign.
PolyFit fit_distance_poly(std::span<const PixelSample> samples);

/// Throws kOutOfCalibratedRange outside the fitted row span.
double eval_distance(const DistancePoly& poly, double y_px);

struct Anchor {
  double camera_m = 0.0;
  double lidar_m = 0.0;
};

/// Piecewise-linear camera-distance to lidar-distance map.
class SpatialMap {
 public:
  const std::vector<Anchor>& anchors() const { return anchors_; }

 private:
  friend SpatialMap build_spatial_map(std::vector<Anchor> pairs);
  std::vector<Anchor> anchors_;
};

/// Sorts by camera distance. Throws kTooFewAnchors (< 2) or kNonMonotone
/// when either coordinate fails to increase strictly.
SpatialMap build_spatial_map(std::vector<Anchor> pairs);

/// Linear interpolation between bracketing anchors; outside the anchor span
/// the nearest segment's line is extended.
double align_camera_to_lidar(const SpatialMap& map, double camera_m);

struct TriggerClock {
  double frame_period_s = 1.0 / 30.0;
  double last_frame_time_s = 0.0;
};

/// Returns the latest scan with t_s <= frame_time_s; this is the one-reading-
/// per-frame trigger. The stream must be sorted by time.
/// Throws kNoScanAvailable when every scan is later than the frame.
const lidar::LidarScan& align_lidar_to_frame(TriggerClock& clock, double frame_time_s,
                                             std::span<const lidar::LidarScan> stream);

struct CalibrationArtifact {
  DistancePoly poly;
  SpatialMap spatial_map;
  FitReport report;
};

// JSON layout:
// {"poly": {"coeffs": [...9], "y_center": n, "y_scale": n, "y_range": [lo, hi]},
//  "spatial_map": [[camera_m, lidar_m], ...], "report": {...}}
std::string to_json(const CalibrationArtifact& artifact);
CalibrationArtifact calibration_from_json(const std::string& text);
void save_calibration(const std::filesystem::path& path, const CalibrationArtifact& artifact);
CalibrationArtifact load_calibration(const std::filesystem::path& path);

/// Reads `y_px,distance_m` CSV rows.
std::vector<PixelSample> load_samples_csv(const std::filesystem::path& path);

}  // namespace pedfusion::calib
