#pragma once

// Motion-based camera detection: ROI mask and threshold, Shi-Tomasi corners,
// pyramidal Lucas-Kanade flow, DBSCAN on moving corners and bottom-row
// distance lookup, followed by per-target false-alarm gating.

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "pedfusion/calib.hpp"
#include "pedfusion/detection.hpp"
#include "pedfusion/gate.hpp"
#include "pedfusion/image.hpp"

namespace pedfusion::vision {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Convex four-vertex region plus its rasterization (pixel centers on or
/// inside the polygon are included).
struct RoiMask {
  std::array<Point2, 4> polygon{};
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> raster;

  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height &&
           raster[static_cast<std::size_t>(y) * width + x] != 0;
  }
};

inline constexpr double kDefaultRoiHalfWidthPx = 12.0;

/// Trapezoid from the two near lane points plus two far vertices placed
/// half_width_px either side of far_point. Throws kDegeneratePolygon.
RoiMask compute_roi(Point2 far_point, Point2 near_a, Point2 near_b, int width, int height,
                    double half_width_px = kDefaultRoiHalfWidthPx);

/// Full-frame mask, handy for tests and tools.
RoiMask full_roi(int width, int height);

/// Zeroes pixels outside the mask and pixels below threshold; kept pixels
/// retain their original intensity.
GrayFrame mask_threshold(const GrayFrame& frame, const RoiMask& mask, int threshold);

struct Corner {
  double x = 0.0;
  double y = 0.0;
  double score = 0.0;
};

struct ShiTomasiParams {
  int max_corners = 400;
  double quality = 0.01;
  double min_dist_px = 3.0;
  bool subpixel = false;  // move each coordinate to the nearby gradient-profile peak
};

/// Minimum-eigenvalue map of the 3x3-summed structure tensor of 3x3 Sobel
/// gradients (replicated borders), row-major.
std::vector<double> min_eigen_scores(const GrayFrame& frame);

std::vector<Corner> shi_tomasi(const GrayFrame& frame, const ShiTomasiParams& params);

enum class FlowStatus { kTracked, kLost };

struct FlowVector {
  Point2 from;
  Point2 to;
  FlowStatus status = FlowStatus::kLost;
};

struct LkParams {
  int window_px = 11;
  int pyramid_levels = 2;  // number of coarser levels above the base image
  int max_iterations = 30;
  double epsilon_px = 0.01;
  double min_eigen = 1e-5;  // on window-averaged gradients of [0,1] intensities
};

/// Pyramidal Lucas-Kanade. Throws kDimensionMismatch for frames of
/// different sizes.
std::vector<FlowVector> lk_flow(const GrayFrame& prev, const GrayFrame& next,
                                std::span<const Corner> corners, const LkParams& params);

inline constexpr int kNoise = -1;

/// Density clustering. Labels are 0,1,... in order of cluster discovery
/// when scanning points in input order; kNoise for noise.
std::vector<int> dbscan(std::span<const Point2> points, double eps, int min_pts);

struct CameraParams {
  int threshold = 60;
  ShiTomasiParams corners{400, 0.01, 3.0, true};
  LkParams flow{};
  double motion_threshold_px = 0.05;
  double dbscan_eps_px = 15.0;
  int dbscan_min_pts = 4;
  double association_radius_px = 40.0;
  int target_timeout_frames = 15;
  std::size_t max_targets = 5;
  // A 0.20 m sigma makes a 5-sample slope test weak, hence the lower z.
  GateConfig gate{0.20, 2.0, 30, 5, 10, 2.0};
};

struct CameraTarget {
  int id = 0;
  Point2 center;
  int last_seen_frame = 0;
  RollingGate gate;
};

/// Per-stream tracking state for camera gating.
struct CameraTrackState {
  std::vector<CameraTarget> targets;
  int frame_index = 0;
  int next_id = 0;
};

struct CameraFrameResult {
  std::vector<Detection> detections;  // nearest first, at most max_targets
  EnvSignal env;
  std::size_t clusters = 0;
  std::size_t rejected = 0;  // gated out as false alarms
  std::size_t out_of_range = 0;
};

CameraFrameResult camera_detect(const GrayFrame& prev, const GrayFrame& next, const RoiMask& mask,
                                const calib::DistancePoly& poly, const CameraParams& params,
                                CameraTrackState& state);

/// Nearest detection; ties keep the earlier one.
std::optional<Detection> select_cio_camera(std::span<const Detection> dets);

}  // namespace pedfusion::vision
