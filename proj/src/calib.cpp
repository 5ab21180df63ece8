#include "pedfusion/calib.hpp"

#include <algorithm>
#include <cmath>
#include <Eigen/Dense>
#include <json.hpp>

#include "pedfusion/csv.hpp"
#include "pedfusion/error.hpp"

namespace pedfusion::calib {

DistancePoly::DistancePoly(std::array<double, kPolyCoeffs> coeffs, double y_center, double y_scale,
                           std::pair<double, double> valid_y_range)
    : coeffs_(coeffs), y_center_(y_center), y_scale_(y_scale), valid_y_range_(valid_y_range) {
  if (!(y_scale > 0.0) || !std::isfinite(y_scale)) {
    throw Error(ErrorCode::kInvalidArgument, "y_scale must be positive");
  }
  if (!(valid_y_range.first <= valid_y_range.second)) {
    throw Error(ErrorCode::kInvalidArgument, "empty valid_y_range");
  }
}

double DistancePoly::evaluate_unchecked(double y_px) const {
  const double u = (y_px - y_center_) / y_scale_;
  double acc = 0.0;
  for (double c : coeffs_) acc = acc * u + c;
  return acc;
}

double eval_distance(const DistancePoly& poly, double y_px) {
  if (!poly.in_range(y_px)) {
    const auto [lo, hi] = poly.valid_y_range();
    throw Error(ErrorCode::kOutOfCalibratedRange,
                "row " + csv::format_double(y_px) + " outside [" + csv::format_double(lo) + ", " +
                    csv::format_double(hi) + "]");
  }
  return poly.evaluate_unchecked(y_px);
}

PolyFit fit_distance_poly(std::span<const PixelSample> samples) {
  const auto n = samples.size();
  if (n < static_cast<std::size_t>(kPolyCoeffs)) {
    throw Error(ErrorCode::kTooFewSamples,
                "need at least 9 samples for a degree-8 fit, got " + std::to_string(n));
  }
  double y_min = samples.front().y_px;
  double y_max = samples.front().y_px;
  double y_sum = 0.0;
  for (const auto& s : samples) {
    if (!std::isfinite(s.y_px) || !std::isfinite(s.distance_m)) {
      throw Error(ErrorCode::kInvalidArgument, "non-finite calibration sample");
    }
    if (!(s.distance_m > 0.0)) throw Error(ErrorCode::kInvalidArgument, "distances must be positive");
    y_min = std::min(y_min, s.y_px);
    y_max = std::max(y_max, s.y_px);
    y_sum += s.y_px;
  }
  const double y_center = y_sum / static_cast<double>(n);
  const double y_scale = std::max(y_max - y_center, y_center - y_min);
  if (!(y_scale > 0.0)) throw Error(ErrorCode::kDegenerateDesign, "all sample rows are identical");

  Eigen::MatrixXd design(n, kPolyCoeffs);
  Eigen::VectorXd rhs(n);
  for (std::size_t r = 0; r < n; ++r) {
    const double u = (samples[r].y_px - y_center) / y_scale;
    double p = 1.0;
    for (int c = kPolyDegree; c >= 0; --c) {
      design(static_cast<Eigen::Index>(r), c) = p;
      p *= u;
    }
    rhs(static_cast<Eigen::Index>(r)) = samples[r].distance_m;
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < kPolyCoeffs) {
    throw Error(ErrorCode::kDegenerateDesign,
                "normalized Vandermonde has rank " + std::to_string(qr.rank()) + " < 9");
  }
  const Eigen::VectorXd solution = qr.solve(rhs);

  std::array<double, kPolyCoeffs> coeffs{};
  for (int c = 0; c < kPolyCoeffs; ++c) coeffs[c] = solution(c);
  DistancePoly poly(coeffs, y_center, y_scale, {y_min, y_max});

  FitReport report;
  report.sample_count = n;
  double sq = 0.0;
  for (const auto& s : samples) {
    const double r = poly.evaluate_unchecked(s.y_px) - s.distance_m;
    report.max_abs_residual_m = std::max(report.max_abs_residual_m, std::abs(r));
    sq += r * r;
  }
  report.rms_residual_m = std::sqrt(sq / static_cast<double>(n));
  return {poly, report};
}

SpatialMap build_spatial_map(std::vector<Anchor> pairs) {
  if (pairs.size() < 2) throw Error(ErrorCode::kTooFewAnchors, "need at least 2 anchors");
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Anchor& a, const Anchor& b) { return a.camera_m < b.camera_m; });
  for (std::size_t i = 1; i < pairs.size(); ++i) {
    if (!(pairs[i].camera_m > pairs[i - 1].camera_m)) {
      throw Error(ErrorCode::kNonMonotone, "camera distances must be strictly increasing");
    }
    if (!(pairs[i].lidar_m > pairs[i - 1].lidar_m)) {
      throw Error(ErrorCode::kNonMonotone,
                  "lidar distance decreases between anchors at camera " +
                      csv::format_double(pairs[i - 1].camera_m) + " and " +
                      csv::format_double(pairs[i].camera_m) + " m");
    }
  }
  SpatialMap map;
  map.anchors_ = std::move(pairs);
  return map;
}

double align_camera_to_lidar(const SpatialMap& map, double camera_m) {
  const auto& a = map.anchors();
  // Segment index: first anchor with camera_m greater than the input, clamped
  // so that out-of-span inputs reuse the end segments.
  auto it = std::upper_bound(a.begin(), a.end(), camera_m,
                             [](double v, const Anchor& anchor) { return v < anchor.camera_m; });
  std::size_t hi = static_cast<std::size_t>(it - a.begin());
  hi = std::clamp<std::size_t>(hi, 1, a.size() - 1);
  const Anchor& p0 = a[hi - 1];
  const Anchor& p1 = a[hi];
  const double slope = (p1.lidar_m - p0.lidar_m) / (p1.camera_m - p0.camera_m);
  return p0.lidar_m + slope * (camera_m - p0.camera_m);
}

const lidar::LidarScan& align_lidar_to_frame(TriggerClock& clock, double frame_time_s,
                                             std::span<const lidar::LidarScan> stream) {
  auto it = std::upper_bound(stream.begin(), stream.end(), frame_time_s,
                             [](double t, const lidar::LidarScan& s) { return t < s.t_s; });
  if (it == stream.begin()) {
    throw Error(ErrorCode::kNoScanAvailable,
                "no lidar scan at or before t=" + csv::format_double(frame_time_s));
  }
  clock.last_frame_time_s = frame_time_s;
  return *(it - 1);
}

std::string to_json(const CalibrationArtifact& artifact) {
  nlohmann::ordered_json j;
  const auto& p = artifact.poly;
  j["poly"]["coeffs"] = p.coeffs();
  j["poly"]["y_center"] = p.y_center();
  j["poly"]["y_scale"] = p.y_scale();
  j["poly"]["y_range"] = {p.valid_y_range().first, p.valid_y_range().second};
  auto anchors = nlohmann::ordered_json::array();
  for (const auto& a : artifact.spatial_map.anchors()) anchors.push_back({a.camera_m, a.lidar_m});
  j["spatial_map"] = anchors;
  j["report"]["samples"] = artifact.report.sample_count;
  j["report"]["max_abs_residual_m"] = artifact.report.max_abs_residual_m;
  j["report"]["rms_residual_m"] = artifact.report.rms_residual_m;
  return j.dump(2) + "\n";
}

CalibrationArtifact calibration_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    const auto& pj = j.at("poly");
    const auto coeffs_v = pj.at("coeffs").get<std::vector<double>>();
    if (coeffs_v.size() != kPolyCoeffs) {
      throw Error(ErrorCode::kSchemaError, "poly.coeffs must hold exactly 9 numbers");
    }
    std::array<double, kPolyCoeffs> coeffs{};
    std::copy(coeffs_v.begin(), coeffs_v.end(), coeffs.begin());
    const auto range = pj.at("y_range").get<std::vector<double>>();
    if (range.size() != 2) throw Error(ErrorCode::kSchemaError, "poly.y_range must be [lo, hi]");
    DistancePoly poly(coeffs, pj.at("y_center").get<double>(), pj.at("y_scale").get<double>(),
                      {range[0], range[1]});
    std::vector<Anchor> anchors;
    for (const auto& a : j.at("spatial_map")) {
      if (!a.is_array() || a.size() != 2) {
        throw Error(ErrorCode::kSchemaError, "spatial_map entries must be [camera_m, lidar_m]");
      }
      anchors.push_back({a[0].get<double>(), a[1].get<double>()});
    }
    FitReport report;
    if (j.contains("report")) {
      const auto& r = j["report"];
      report.sample_count = r.value("samples", std::size_t{0});
      report.max_abs_residual_m = r.value("max_abs_residual_m", 0.0);
      report.rms_residual_m = r.value("rms_residual_m", 0.0);
    }
    return {poly, build_spatial_map(std::move(anchors)), report};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("calibration JSON: ") + e.what());
  }
}

void save_calibration(const std::filesystem::path& path, const CalibrationArtifact& artifact) {
  csv::write_file(path, to_json(artifact));
}

CalibrationArtifact load_calibration(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kMissingCalibration, "calibration file not found: " + path.string());
  }
  return calibration_from_json(csv::read_file(path));
}

std::vector<PixelSample> load_samples_csv(const std::filesystem::path& path) {
  const auto table = csv::read_table(path, {"y_px", "distance_m"});
  std::vector<PixelSample> out;
  out.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto where = table.where(i);
    out.push_back({csv::parse_double(table.rows[i][0], where),
                   csv::parse_double(table.rows[i][1], where)});
  }
  return out;
}

}  // namespace pedfusion::calib
