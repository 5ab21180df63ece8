#include "pedfusion/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "pedfusion/csv.hpp"
#include "pedfusion/error.hpp"

namespace pedfusion::pipeline {

// ---------------------------------------------------------------------------
// Calibration

namespace {

double measure_row(const SweepConfig& sweep, double distance_m) {
  const auto frame = sim::render_reference_target(sweep.scene, distance_m);
  return sim::measure_bottom_row(frame, sweep.scene.camera.width / 2, sim::kReferenceTargetLevel,
                                 sim::kReferenceGroundLevel);
}

// Distances whose inverses are evenly spaced between the sweep ends.
std::vector<double> inverse_spaced(double lo, double hi, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) {
    const double s = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
    out.push_back(1.0 / (1.0 / hi + (1.0 / lo - 1.0 / hi) * s));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<calib::PixelSample> calibration_samples(const SweepConfig& sweep) {
  if (sweep.positions < 1 || !(sweep.min_distance_m > 0.0) ||
      !(sweep.max_distance_m > sweep.min_distance_m)) {
    throw Error(ErrorCode::kInvalidArgument, "bad sweep range");
  }
  const double lo = sweep.min_distance_m;
  const double hi = sweep.max_distance_m;
  auto measure = [&](const std::vector<double>& distances) {
    std::vector<calib::PixelSample> out;
    for (double d : distances) out.push_back({measure_row(sweep, d), d});
    return out;
  };

  auto samples = measure(inverse_spaced(lo, hi, sweep.positions));
  if (sweep.positions < calib::kPolyCoeffs + 2 || sweep.refine_rounds <= 0) return samples;

  const auto probe_d = inverse_spaced(lo, hi, std::max(sweep.probe_positions, 3));
  const auto probes = measure(probe_d);
  const double step = (1.0 / lo - 1.0 / hi) / (static_cast<double>(probe_d.size()) - 1.0);
  const double spread = sweep.cluster_halfwidth_probes * step;

  for (int round = 0; round < sweep.refine_rounds; ++round) {
    const auto fit = calib::fit_distance_poly(samples);
    std::vector<double> zeros_inv;  // zero crossings, in 1/d
    double prev_err = 0.0;
    for (std::size_t j = 0; j < probes.size(); ++j) {
      const double err = fit.poly.evaluate_unchecked(probes[j].y_px) - probes[j].distance_m;
      if (j > 0 && (err > 0.0) != (prev_err > 0.0)) {
        const double a = 1.0 / probes[j - 1].distance_m;
        const double b = 1.0 / probes[j].distance_m;
        zeros_inv.push_back(a + (b - a) * prev_err / (prev_err - err));
      }
      prev_err = err;
    }
    if (static_cast<int>(zeros_inv.size()) < calib::kPolyCoeffs - 1) break;

    // Both ends stay; the interior samples are shared out over the zeros.
    std::vector<double> next{lo, hi};
    const int interior = sweep.positions - 2;
    const int k = static_cast<int>(zeros_inv.size());
    for (int z = 0; z < k; ++z) {
      const int count = interior / k + (z < interior % k ? 1 : 0);
      for (int i = 0; i < count; ++i) {
        const double offset = count == 1 ? 0.0 : -spread + 2.0 * spread * i / (count - 1);
        const double inv = std::clamp(zeros_inv[static_cast<std::size_t>(z)] + offset, 1.0 / hi,
                                      1.0 / lo);
        next.push_back(1.0 / inv);
      }
    }
    std::sort(next.begin(), next.end());
    samples = measure(next);
  }
  return samples;
}

calib::CalibrationArtifact cmd_calibrate(const SweepConfig& sweep) {
  const auto samples = calibration_samples(sweep);
  auto fit = calib::fit_distance_poly(samples);

  // Both sensors look at the same reference target at 1 m steps.
  sim::Rng rng(sweep.scene.seed);
  std::vector<calib::Anchor> anchors;
  for (double d = sweep.anchor_min_m; d <= sweep.anchor_max_m + 1e-9; d += 1.0) {
    const double camera_m = calib::eval_distance(fit.poly, measure_row(sweep, d));

    sim::WorldState world;
    world.peds = {{d, 0.0}};
    world.ground_truth_distance_m = d;
    std::vector<double> ranges;
    for (int k = 0; k < sweep.lidar_scans_per_anchor; ++k) {
      world.t_s = k / sweep.scene.lidar.rate_hz;
      const auto scan = sim::sample_lidar(world, sweep.scene, rng);
      if (scan.channels[1].valid) ranges.push_back(scan.channels[1].range_m);
    }
    if (ranges.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "lidar does not see the reference target");
    }
    // Median, since readings at the top of the band are clamped.
    const auto mid = ranges.begin() + static_cast<std::ptrdiff_t>(ranges.size() / 2);
    std::nth_element(ranges.begin(), mid, ranges.end());
    anchors.push_back({camera_m, *mid});
  }
  return {fit.poly, calib::build_spatial_map(std::move(anchors)), fit.report};
}

// ---------------------------------------------------------------------------
// Fusion stage

FusionStage::FusionStage(const calib::SpatialMap& map, const fusion::FusionParams& params)
    : map_(&map), params_(params) {}

fusion::FusedOutput FusionStage::process(double frame_t_s,
                                         std::span<const lidar::LidarScan> lidar_stream,
                                         std::span<const Detection> camera_dets,
                                         const EnvSignal& env) {
  last_lidar_cio_.reset();
  if (!lidar_stream.empty() && lidar_stream.front().t_s <= frame_t_s) {
    const auto& scan = calib::align_lidar_to_frame(clock_, frame_t_s, lidar_stream);
    const auto verdicts = lidar::gate_scan(history_, scan);
    for (std::size_t c = 0; c < lidar::kChannels; ++c) {
      if (scan.channels[c].valid && verdicts[c] == GateVerdict::kRejected) ++lidar_rejections_;
    }
    last_lidar_cio_ = lidar::select_cio(scan, verdicts);
  }

  last_camera_cio_ = vision::select_cio_camera(camera_dets);
  std::optional<Detection> camera_mapped = last_camera_cio_;
  if (camera_mapped) {
    camera_mapped->distance_m = calib::align_camera_to_lidar(*map_, camera_mapped->distance_m);
  }
  auto out = fusion::fuse(last_lidar_cio_, camera_mapped, env, state_, params_, frame_t_s);
  return out;
}

// ---------------------------------------------------------------------------
// Scenario run

vision::CameraParams camera_params_for(const sim::PipelineConfig& cfg) {
  vision::CameraParams p;
  p.threshold = cfg.threshold;
  p.motion_threshold_px = cfg.motion_threshold_px;
  p.dbscan_eps_px = cfg.dbscan_eps_px;
  p.dbscan_min_pts = cfg.dbscan_min_pts;
  return p;
}

fusion::FusionParams fusion_params_for(const sim::PipelineConfig& cfg) {
  fusion::FusionParams p;
  p.dark_threshold = cfg.dark_threshold;
  p.min_corners = cfg.min_corners;
  return p;
}

vision::RoiMask roi_for(const sim::ScenarioConfig& cfg) {
  const sim::PinholeCamera cam(cfg.camera);
  // Far edge at the head height of a pedestrian standing at the far distance.
  const vision::Point2 far{cam.cx, cam.row(cfg.ped_height_m, cfg.pipeline.roi_far_distance_m)};
  const double bottom = cam.height - 1;
  return vision::compute_roi(far, {0.0, bottom}, {cam.width - 1.0, bottom}, cam.width, cam.height,
                             cfg.pipeline.roi_half_width_px);
}

namespace {

std::size_t frame_count(const sim::Scenario& sc) {
  return static_cast<std::size_t>(std::floor(sc.duration_s * sc.cfg.camera.fps + 1e-9));
}

std::string frame_name(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06zu.pgm", k);
  return buf;
}

}  // namespace

RunResult cmd_run(const sim::ScenarioConfig& cfg_in, const calib::CalibrationArtifact& calib,
                  const std::optional<std::filesystem::path>& out_dir, const RunOptions& options) {
  sim::ScenarioConfig cfg = cfg_in;
  if (options.seed) cfg.seed = *options.seed;
  const auto sc = sim::build_scenario(cfg);
  const std::size_t n = frame_count(sc);
  const double fps = cfg.camera.fps;

  RunResult result;
  sim::Rng rng(cfg.seed);
  result.lidar = sim::lidar_stream(sc, static_cast<double>(n) / fps, rng);

  const auto roi = roi_for(cfg);
  const auto cam_params = camera_params_for(cfg.pipeline);
  const auto fus_params = fusion_params_for(cfg.pipeline);
  vision::CameraTrackState track;
  FusionStage stage(calib.spatial_map, fus_params);

  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    if (options.dump_frames) std::filesystem::create_directories(*out_dir / "frames");
  }

  std::size_t camera_rejections = 0;
  GrayFrame prev;
  if (n > 0) {
    prev = sim::render_frame(sim::state_at(sc, 0.0), cfg);
    if (out_dir && options.dump_frames) write_pgm(*out_dir / "frames" / frame_name(0), prev);
  }
  for (std::size_t k = 1; k <= n; ++k) {
    const double t = static_cast<double>(k) / fps;
    const auto world = sim::state_at(sc, t);
    GrayFrame next = sim::render_frame(world, cfg);
    if (out_dir && options.dump_frames) write_pgm(*out_dir / "frames" / frame_name(k), next);

    auto cam = vision::camera_detect(prev, next, roi, calib.poly, cam_params, track);
    camera_rejections += cam.rejected;
    result.fused.push_back(stage.process(t, result.lidar, cam.detections, cam.env));
    result.camera.push_back(std::move(cam.detections));
    result.frames.push_back({t, cam.env});
    result.ground_truth.push_back({t, world.ground_truth_distance_m, world.ground_truth_lat_m});
    prev = std::move(next);
  }

  result.report = summarize(std::string(sim::to_string(cfg.kind)), result.fused,
                            result.ground_truth, result.frames, result.camera, fus_params);
  result.report.lidar_false_alarms = stage.lidar_rejections();
  result.report.camera_false_alarms = camera_rejections;

  if (out_dir) {
    csv::write_file(*out_dir / "fusion.csv", fusion_csv(result.fused));
    lidar::save_scans_csv(*out_dir / "lidar.csv", result.lidar);
    csv::write_file(*out_dir / "camera.csv", camera_csv(result.frames, result.camera));
    csv::write_file(*out_dir / "frames.csv", frames_csv(result.frames));
    csv::write_file(*out_dir / "ground_truth.csv", ground_truth_csv(result.ground_truth));
    csv::write_file(*out_dir / "report.json", to_json(result.report));
  }
  return result;
}

std::vector<fusion::FusedOutput> cmd_replay(const std::filesystem::path& log_dir,
                                            const calib::CalibrationArtifact& calib,
                                            const fusion::FusionParams& params) {
  const auto frames = load_frames_csv(log_dir / "frames.csv");
  const auto detections = load_camera_csv(log_dir / "camera.csv");
  const auto scans = lidar::load_scans_csv(log_dir / "lidar.csv");

  std::map<double, std::vector<Detection>> by_time;
  for (const auto& d : detections) by_time[d.t_s].push_back(d);

  FusionStage stage(calib.spatial_map, params);
  std::vector<fusion::FusedOutput> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    const auto it = by_time.find(f.t_s);
    const std::span<const Detection> dets =
        it == by_time.end() ? std::span<const Detection>{} : std::span<const Detection>(it->second);
    out.push_back(stage.process(f.t_s, scans, dets, f.env));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

namespace {

// Index of the first frame at which `target` takes over from `from` and then
// holds for `hold` frames (or until the end). Frames whose state is in
// `skip` are ignored.
template <typename T, typename Skip>
std::vector<std::size_t> sustained_transitions(const std::vector<T>& states, T from, T target,
                                               std::size_t hold, Skip skip) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (!skip(states[i])) idx.push_back(i);
  }
  std::vector<std::size_t> out;
  for (std::size_t k = 1; k < idx.size(); ++k) {
    if (states[idx[k]] != target || states[idx[k - 1]] != from) continue;
    bool held = true;
    for (std::size_t m = k; m < std::min(idx.size(), k + hold); ++m) {
      if (states[idx[m]] != target) {
        held = false;
        break;
      }
    }
    if (held) out.push_back(idx[k]);
  }
  return out;
}

}  // namespace

RunReport summarize(const std::string& scenario, const std::vector<fusion::FusedOutput>& fused,
                    const std::vector<GroundTruthRecord>& truth,
                    const std::vector<FrameRecord>& frames,
                    const std::vector<std::vector<Detection>>& camera,
                    const fusion::FusionParams& params) {
  RunReport r;
  r.scenario = scenario;
  r.frames = fused.size();
  if (fused.empty()) return r;
  constexpr std::size_t kHold = 10;

  std::size_t lidar_frames = 0;
  std::size_t camera_frames = 0;
  std::size_t trusted = 0;
  std::size_t covered = 0;
  double se_near = 0.0;
  double se_far = 0.0;
  for (std::size_t i = 0; i < fused.size(); ++i) {
    const auto& f = fused[i];
    if (f.lidar_raw_m) ++lidar_frames;
    if (i < camera.size() && !camera[i].empty()) ++camera_frames;
    if (i < frames.size() &&
        fusion::camera_trusted(frames[i].env, params.dark_threshold, params.min_corners)) {
      ++trusted;
    }
    if (f.lidar_raw_m) {
      ++r.lidar_valid_frames;
      if (f.main_sensor == fusion::MainSensor::kLidar) ++r.lidar_main_when_valid;
    }
    if (f.main_sensor == fusion::MainSensor::kLidar) ++r.lidar_main_frames;
    if (f.warning == fusion::Warning::kLevel2Red) ++r.red_frames;
    if (i >= truth.size()) continue;
    const double gt = truth[i].gt_distance_m;
    if (gt < 2.0 || gt > 20.0) continue;
    ++r.frames_2_20;
    if (!f.distance_m) continue;
    ++covered;
    const double e = *f.distance_m - gt;
    if (gt < fusion::kSwitchDistanceM) {
      se_near += e * e;
      ++r.samples_near;
    } else {
      se_far += e * e;
      ++r.samples_far;
    }
  }
  const double n = static_cast<double>(fused.size());
  r.lidar_detection_rate = lidar_frames / n;
  r.camera_detection_rate = camera_frames / n;
  r.camera_trusted_rate = trusted / n;
  r.coverage_2_20 = r.frames_2_20 ? static_cast<double>(covered) / r.frames_2_20 : 0.0;
  if (r.samples_near) r.rmse_near_m = std::sqrt(se_near / r.samples_near);
  if (r.samples_far) r.rmse_far_m = std::sqrt(se_far / r.samples_far);

  std::vector<fusion::MainSensor> mains;
  std::vector<fusion::Warning> warnings;
  for (const auto& f : fused) {
    mains.push_back(f.main_sensor);
    warnings.push_back(f.warning);
  }
  using fusion::MainSensor;
  const auto switches = sustained_transitions(
      mains, MainSensor::kCamera, MainSensor::kLidar, kHold,
      [](MainSensor m) { return m == MainSensor::kFallback || m == MainSensor::kNone; });
  if (!switches.empty() && switches.front() < truth.size()) {
    r.switch_time_s = fused[switches.front()].t_s;
    r.switch_distance_m = truth[switches.front()].gt_distance_m;
  }
  using fusion::Warning;
  const auto reds = sustained_transitions(warnings, Warning::kLevel1Yellow, Warning::kLevel2Red,
                                          kHold, [](Warning w) { return w == Warning::kNone; });
  r.sustained_red_transitions = reds.size();
  if (!reds.empty() && reds.front() < truth.size()) {
    r.warning_time_s = fused[reds.front()].t_s;
    r.warning_distance_m = truth[reds.front()].gt_distance_m;
  }
  return r;
}

std::string to_json(const RunReport& r) {
  nlohmann::ordered_json j;
  const auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  j["scenario"] = r.scenario;
  j["frames"] = r.frames;
  j["lidar_detection_rate"] = r.lidar_detection_rate;
  j["camera_detection_rate"] = r.camera_detection_rate;
  j["camera_trusted_rate"] = r.camera_trusted_rate;
  j["coverage_2_20"] = r.coverage_2_20;
  j["frames_2_20"] = r.frames_2_20;
  j["rmse_near_m"] = opt(r.rmse_near_m);
  j["rmse_far_m"] = opt(r.rmse_far_m);
  j["samples_near"] = r.samples_near;
  j["samples_far"] = r.samples_far;
  j["switch_time_s"] = opt(r.switch_time_s);
  j["switch_distance_m"] = opt(r.switch_distance_m);
  j["warning_time_s"] = opt(r.warning_time_s);
  j["warning_distance_m"] = opt(r.warning_distance_m);
  j["sustained_red_transitions"] = r.sustained_red_transitions;
  j["lidar_main_frames"] = r.lidar_main_frames;
  j["lidar_valid_frames"] = r.lidar_valid_frames;
  j["lidar_main_when_valid"] = r.lidar_main_when_valid;
  j["red_frames"] = r.red_frames;
  j["lidar_false_alarms"] = r.lidar_false_alarms;
  j["camera_false_alarms"] = r.camera_false_alarms;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Logs

std::string fusion_csv(std::span<const fusion::FusedOutput> rows) {
  std::ostringstream out;
  out << "t_s,main,distance_m,warning,lidar_raw_m,camera_raw_m\n";
  for (const auto& r : rows) {
    out << csv::format_double(r.t_s) << ',' << fusion::to_string(r.main_sensor) << ','
        << csv::format_optional(r.distance_m) << ',' << fusion::to_string(r.warning) << ','
        << csv::format_optional(r.lidar_raw_m) << ',' << csv::format_optional(r.camera_raw_m)
        << '\n';
  }
  return out.str();
}

std::string camera_csv(std::span<const FrameRecord> frames,
                       std::span<const std::vector<Detection>> camera) {
  std::ostringstream out;
  out << "t_s,source,distance_m,x_min,x_max\n";
  for (std::size_t i = 0; i < camera.size(); ++i) {
    for (const auto& d : camera[i]) {
      const double t = i < frames.size() ? frames[i].t_s : d.t_s;
      out << csv::format_double(t) << ',' << to_string(d.source) << ','
          << csv::format_double(d.distance_m) << ','
          << (d.lateral_px ? csv::format_double(d.lateral_px->x_min) : std::string()) << ','
          << (d.lateral_px ? csv::format_double(d.lateral_px->x_max) : std::string()) << '\n';
    }
  }
  return out.str();
}

std::string frames_csv(std::span<const FrameRecord> frames) {
  std::ostringstream out;
  out << "t_s,mean_intensity,corner_count\n";
  for (const auto& f : frames) {
    out << csv::format_double(f.t_s) << ',' << csv::format_double(f.env.mean_intensity) << ','
        << f.env.corner_count << '\n';
  }
  return out.str();
}

std::string ground_truth_csv(std::span<const GroundTruthRecord> rows) {
  std::ostringstream out;
  out << "t_s,gt_distance_m,ped_lat_m\n";
  for (const auto& r : rows) {
    out << csv::format_double(r.t_s) << ',' << csv::format_double(r.gt_distance_m) << ','
        << csv::format_double(r.ped_lat_m) << '\n';
  }
  return out.str();
}

std::vector<FrameRecord> load_frames_csv(const std::filesystem::path& path) {
  const auto table = csv::read_table(path, {"t_s", "mean_intensity", "corner_count"});
  std::vector<FrameRecord> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto where = table.where(i);
    const auto& row = table.rows[i];
    FrameRecord f;
    f.t_s = csv::parse_double(row[0], where);
    f.env.mean_intensity = csv::parse_double(row[1], where);
    const double corners = csv::parse_double(row[2], where);
    if (corners < 0 || corners != std::floor(corners)) {
      throw Error(ErrorCode::kSchemaError, where + ": corner_count must be a non-negative integer");
    }
    f.env.corner_count = static_cast<int>(corners);
    out.push_back(f);
  }
  return out;
}

std::vector<Detection> load_camera_csv(const std::filesystem::path& path) {
  const auto table = csv::read_table(path, {"t_s", "source", "distance_m", "x_min", "x_max"});
  std::vector<Detection> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto where = table.where(i);
    const auto& row = table.rows[i];
    Detection d;
    d.t_s = csv::parse_double(row[0], where);
    try {
      d.source = source_from_string(row[1]);
    } catch (const Error&) {
      throw Error(ErrorCode::kSchemaError, where + ": unknown source '" + row[1] + "'");
    }
    d.distance_m = csv::parse_double(row[2], where);
    const auto x0 = csv::parse_optional(row[3], where);
    const auto x1 = csv::parse_optional(row[4], where);
    if (x0.has_value() != x1.has_value()) {
      throw Error(ErrorCode::kSchemaError, where + ": x_min and x_max must both be set or empty");
    }
    if (x0) d.lateral_px = PixelSpan{*x0, *x1};
    out.push_back(d);
  }
  return out;
}

}  // namespace pedfusion::pipeline
