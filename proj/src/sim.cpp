#include "pedfusion/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include <json.hpp>

#include "pedfusion/csv.hpp"
#include "pedfusion/error.hpp"

namespace pedfusion::sim {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Rendering levels before ambient scaling. Ground and sky sit below the
// default threshold so only the pedestrians survive masking.
constexpr double kSkyLevel = 45.0;
constexpr double kGroundLevel = 40.0;
constexpr int kGroundNoise = 12;
constexpr double kCheckerLo = 175.0;
constexpr double kCheckerHi = 235.0;
constexpr double kCheckerCellM = 0.25;
constexpr double kFineCellM = 0.03;
constexpr int kFineNoise = 25;
constexpr int kSubsamples = 4;

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash3(std::uint64_t seed, std::int64_t a, std::int64_t b) {
  return mix(mix(mix(seed) ^ static_cast<std::uint64_t>(a)) ^ static_cast<std::uint64_t>(b));
}

// Signed integer noise in [-amplitude, amplitude].
int noise(std::uint64_t h, int amplitude) {
  return static_cast<int>(h % static_cast<std::uint64_t>(2 * amplitude + 1)) - amplitude;
}

std::uint8_t to_pixel(double value, int ambient) {
  const double scaled = value * ambient / 255.0;
  return static_cast<std::uint8_t>(std::clamp(std::lround(scaled), 0L, 255L));
}

}  // namespace

std::string_view to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kCVFA: return "CVFA";
    case ScenarioKind::kCVNA25: return "CVNA25";
    case ScenarioKind::kCVNA75: return "CVNA75";
  }
  return "CVFA";
}

ScenarioKind scenario_kind_from_string(std::string_view text) {
  if (text == "CVFA") return ScenarioKind::kCVFA;
  if (text == "CVNA25") return ScenarioKind::kCVNA25;
  if (text == "CVNA75") return ScenarioKind::kCVNA75;
  throw Error(ErrorCode::kSchemaError, "unknown scenario kind '" + std::string(text) + "'");
}

double impact_fraction_for(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kCVFA: return 0.50;
    case ScenarioKind::kCVNA25: return 0.25;
    case ScenarioKind::kCVNA75: return 0.75;
  }
  return 0.50;
}

double default_ped_speed_for(ScenarioKind kind) {
  return (kind == ScenarioKind::kCVFA ? 8.0 : 5.0) / 3.6;
}

ScenarioConfig ScenarioConfig::for_kind(ScenarioKind kind) {
  ScenarioConfig cfg;
  cfg.kind = kind;
  cfg.ped_speed_mps = default_ped_speed_for(kind);
  cfg.impact_fraction = impact_fraction_for(kind);
  return cfg;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

using nlohmann::ordered_json;

template <typename T>
void read_field(const ordered_json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("field '") + key + "': " + e.what());
  }
}

void check_keys(const ordered_json& obj, const std::set<std::string>& allowed, const char* where) {
  if (!obj.is_object()) throw Error(ErrorCode::kSchemaError, std::string(where) + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      throw Error(ErrorCode::kSchemaError, std::string("unknown key '") + key + "' in " + where);
    }
  }
}

}  // namespace

std::string to_json(const ScenarioConfig& cfg) {
  ordered_json j;
  j["kind"] = std::string(to_string(cfg.kind));
  j["vehicle_speed_mps"] = cfg.vehicle_speed_mps;
  j["ped_speed_mps"] = cfg.ped_speed_mps;
  j["impact_fraction"] = cfg.impact_fraction;
  j["vehicle_width_m"] = cfg.vehicle_width_m;
  j["ped_size_m"] = {cfg.ped_width_m, cfg.ped_height_m};
  j["start_gap_m"] = cfg.start_gap_m;
  j["ped_start_time_s"] = cfg.ped_start_time_s;
  j["camera"] = {{"hfov_deg", cfg.camera.hfov_deg},
                 {"height_m", cfg.camera.height_m},
                 {"fps", cfg.camera.fps},
                 {"width", cfg.camera.width},
                 {"height", cfg.camera.height}};
  j["lidar"] = {{"hfov_deg", cfg.lidar.hfov_deg},
                {"vfov_deg", cfg.lidar.vfov_deg},
                {"rate_hz", cfg.lidar.rate_hz},
                {"sigma_m", cfg.lidar.sigma_m},
                {"range_m", {cfg.lidar.range_min_m, cfg.lidar.range_max_m}},
                {"spike_probability", cfg.lidar.spike_probability},
                {"spike_magnitude_m", cfg.lidar.spike_magnitude_m}};
  j["seed"] = cfg.seed;
  if (cfg.duration_s) j["duration_s"] = *cfg.duration_s;
  j["ambient_level"] = cfg.ambient_level;
  auto extras = ordered_json::array();
  for (const auto& p : cfg.extra_pedestrians) {
    extras.push_back({{"lon_m", p.lon_m},
                      {"lat_start_m", p.lat_start_m},
                      {"lat_speed_mps", p.lat_speed_mps},
                      {"t_start_s", p.t_start_s}});
  }
  j["extra_pedestrians"] = extras;
  const auto& pl = cfg.pipeline;
  j["pipeline"] = {{"roi_far_distance_m", pl.roi_far_distance_m},
                   {"roi_half_width_px", pl.roi_half_width_px},
                   {"threshold", pl.threshold},
                   {"motion_threshold_px", pl.motion_threshold_px},
                   {"dbscan_eps_px", pl.dbscan_eps_px},
                   {"dbscan_min_pts", pl.dbscan_min_pts},
                   {"dark_threshold", pl.dark_threshold},
                   {"min_corners", pl.min_corners}};
  return j.dump(2) + "\n";
}

ScenarioConfig scenario_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("scenario JSON: ") + e.what());
  }
  check_keys(j,
             {"kind", "vehicle_speed_mps", "ped_speed_mps", "impact_fraction", "vehicle_width_m",
              "ped_size_m", "start_gap_m", "ped_start_time_s", "camera", "lidar", "seed",
              "duration_s", "ambient_level", "extra_pedestrians", "pipeline"},
             "scenario");

  std::string kind = "CVFA";
  read_field(j, "kind", kind);
  ScenarioConfig cfg = ScenarioConfig::for_kind(scenario_kind_from_string(kind));
  read_field(j, "vehicle_speed_mps", cfg.vehicle_speed_mps);
  read_field(j, "ped_speed_mps", cfg.ped_speed_mps);
  read_field(j, "impact_fraction", cfg.impact_fraction);
  read_field(j, "vehicle_width_m", cfg.vehicle_width_m);
  if (j.contains("ped_size_m")) {
    std::array<double, 2> size{};
    read_field(j, "ped_size_m", size);
    cfg.ped_width_m = size[0];
    cfg.ped_height_m = size[1];
  }
  read_field(j, "start_gap_m", cfg.start_gap_m);
  read_field(j, "ped_start_time_s", cfg.ped_start_time_s);
  if (j.contains("camera")) {
    const auto& c = j["camera"];
    check_keys(c, {"hfov_deg", "height_m", "fps", "width", "height"}, "camera");
    read_field(c, "hfov_deg", cfg.camera.hfov_deg);
    read_field(c, "height_m", cfg.camera.height_m);
    read_field(c, "fps", cfg.camera.fps);
    read_field(c, "width", cfg.camera.width);
    read_field(c, "height", cfg.camera.height);
  }
  if (j.contains("lidar")) {
    const auto& l = j["lidar"];
    check_keys(l,
               {"hfov_deg", "vfov_deg", "rate_hz", "sigma_m", "range_m", "spike_probability",
                "spike_magnitude_m"},
               "lidar");
    read_field(l, "hfov_deg", cfg.lidar.hfov_deg);
    read_field(l, "vfov_deg", cfg.lidar.vfov_deg);
    read_field(l, "rate_hz", cfg.lidar.rate_hz);
    read_field(l, "sigma_m", cfg.lidar.sigma_m);
    if (l.contains("range_m")) {
      std::array<double, 2> range{};
      read_field(l, "range_m", range);
      cfg.lidar.range_min_m = range[0];
      cfg.lidar.range_max_m = range[1];
    }
    read_field(l, "spike_probability", cfg.lidar.spike_probability);
    read_field(l, "spike_magnitude_m", cfg.lidar.spike_magnitude_m);
  }
  read_field(j, "seed", cfg.seed);
  if (j.contains("duration_s") && !j["duration_s"].is_null()) {
    double d = 0.0;
    read_field(j, "duration_s", d);
    cfg.duration_s = d;
  }
  read_field(j, "ambient_level", cfg.ambient_level);
  if (j.contains("extra_pedestrians")) {
    const auto& arr = j["extra_pedestrians"];
    if (!arr.is_array()) throw Error(ErrorCode::kSchemaError, "extra_pedestrians must be an array");
    for (const auto& e : arr) {
      check_keys(e, {"lon_m", "lat_start_m", "lat_speed_mps", "t_start_s"}, "extra_pedestrians");
      ExtraPedestrian p;
      read_field(e, "lon_m", p.lon_m);
      read_field(e, "lat_start_m", p.lat_start_m);
      read_field(e, "lat_speed_mps", p.lat_speed_mps);
      read_field(e, "t_start_s", p.t_start_s);
      cfg.extra_pedestrians.push_back(p);
    }
  }
  if (j.contains("pipeline")) {
    const auto& p = j["pipeline"];
    check_keys(p,
               {"roi_far_distance_m", "roi_half_width_px", "threshold", "motion_threshold_px",
                "dbscan_eps_px", "dbscan_min_pts", "dark_threshold", "min_corners"},
               "pipeline");
    auto& pl = cfg.pipeline;
    read_field(p, "roi_far_distance_m", pl.roi_far_distance_m);
    read_field(p, "roi_half_width_px", pl.roi_half_width_px);
    read_field(p, "threshold", pl.threshold);
    read_field(p, "motion_threshold_px", pl.motion_threshold_px);
    read_field(p, "dbscan_eps_px", pl.dbscan_eps_px);
    read_field(p, "dbscan_min_pts", pl.dbscan_min_pts);
    read_field(p, "dark_threshold", pl.dark_threshold);
    read_field(p, "min_corners", pl.min_corners);
  }
  if (cfg.ambient_level < 0 || cfg.ambient_level > 255) {
    throw Error(ErrorCode::kSchemaError, "ambient_level must be in [0, 255]");
  }
  if (cfg.camera.width < 8 || cfg.camera.height < 8 || !(cfg.camera.fps > 0.0)) {
    throw Error(ErrorCode::kSchemaError, "camera needs at least 8x8 pixels and fps > 0");
  }
  if (!(cfg.lidar.rate_hz > 0.0)) throw Error(ErrorCode::kSchemaError, "lidar rate_hz must be > 0");
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(csv::read_file(path));
}

// ---------------------------------------------------------------------------
// Kinematics

PinholeCamera::PinholeCamera(const CameraConfig& cfg)
    : focal_px(0.5 * cfg.width / std::tan(0.5 * cfg.hfov_deg * kDeg)),
      cx(0.5 * cfg.width),
      cy(0.5 * cfg.height),
      height_m(cfg.height_m),
      width(cfg.width),
      height(cfg.height) {}

Scenario build_scenario(const ScenarioConfig& cfg) {
  if (!(cfg.vehicle_speed_mps > 0.0) || !(cfg.ped_speed_mps > 0.0)) {
    throw Error(ErrorCode::kInfeasibleGeometry, "vehicle and pedestrian speeds must be positive");
  }
  if (std::abs(cfg.impact_fraction - impact_fraction_for(cfg.kind)) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "impact_fraction does not match scenario kind");
  }
  if (!(cfg.start_gap_m > 0.0)) throw Error(ErrorCode::kInfeasibleGeometry, "start_gap_m must be > 0");

  Scenario sc;
  sc.cfg = cfg;
  sc.impact_time_s = cfg.start_gap_m / cfg.vehicle_speed_mps;
  if (cfg.ped_start_time_s >= sc.impact_time_s) {
    throw Error(ErrorCode::kInfeasibleGeometry, "pedestrian starts after the impact time");
  }
  sc.impact_lat_m = (cfg.impact_fraction - 0.5) * cfg.vehicle_width_m;

  // Farside pedestrians come from the positive (left) side.
  const double dir = cfg.kind == ScenarioKind::kCVFA ? -1.0 : 1.0;
  PedestrianTrack main;
  main.lon_m = cfg.start_gap_m;
  main.lat_speed_mps = dir * cfg.ped_speed_mps;
  main.t_start_s = cfg.ped_start_time_s;
  main.lat_start_m = sc.impact_lat_m - main.lat_speed_mps * (sc.impact_time_s - main.t_start_s);
  sc.tracks.push_back(main);
  for (const auto& e : cfg.extra_pedestrians) {
    sc.tracks.push_back({e.lon_m, e.lat_start_m, e.lat_speed_mps, e.t_start_s});
  }

  if (cfg.duration_s) {
    if (*cfg.duration_s < 0.0) throw Error(ErrorCode::kInvalidArgument, "negative duration");
    sc.duration_s = *cfg.duration_s;
  } else {
    sc.duration_s = std::max(0.0, (cfg.start_gap_m - 1.5) / cfg.vehicle_speed_mps);
  }
  sc.initial = state_at(sc, 0.0);
  return sc;
}

WorldState state_at(const Scenario& scenario, double t_s) {
  WorldState w;
  w.t_s = t_s;
  w.vehicle_x_m = scenario.cfg.vehicle_speed_mps * t_s;
  std::optional<std::size_t> nearest;
  for (std::size_t i = 0; i < scenario.tracks.size(); ++i) {
    const auto& tr = scenario.tracks[i];
    w.peds.push_back({tr.lon_m, tr.lat_at(t_s)});
    const double rel = tr.lon_m - w.vehicle_x_m;
    if (rel > 0.0 && (!nearest || rel < w.peds[*nearest].lon_m - w.vehicle_x_m)) nearest = i;
  }
  const std::size_t k = nearest.value_or(0);
  if (!w.peds.empty()) {
    w.ground_truth_distance_m = w.peds[k].lon_m - w.vehicle_x_m;
    w.ground_truth_lat_m = w.peds[k].lat_m;
  }
  return w;
}

WorldState step(const Scenario& scenario, const WorldState& world, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::kInvalidArgument, "step needs dt > 0");
  return state_at(scenario, world.t_s + dt);
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

std::vector<double> background(const ScenarioConfig& cfg, const PinholeCamera& cam) {
  std::vector<double> img(static_cast<std::size_t>(cam.width) * cam.height);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      double v = kSkyLevel;
      if (y > cam.cy) v = kGroundLevel + noise(hash3(cfg.seed, x, y), kGroundNoise);
      img[static_cast<std::size_t>(y) * cam.width + x] = v;
    }
  }
  return img;
}

struct Rect {
  double x0, x1, y0, y1;
};

// Accumulates a rectangle with exact area coverage at its borders. The
// texture callback gets image coordinates.
template <typename Texture>
void draw_rect(std::vector<double>& img, const PinholeCamera& cam, const Rect& r, Texture tex) {
  const int px0 = std::max(0, static_cast<int>(std::floor(r.x0 + 0.5)));
  const int px1 = std::min(cam.width - 1, static_cast<int>(std::ceil(r.x1 - 0.5)));
  const int py0 = std::max(0, static_cast<int>(std::floor(r.y0 + 0.5)));
  const int py1 = std::min(cam.height - 1, static_cast<int>(std::ceil(r.y1 - 0.5)));
  for (int y = py0; y <= py1; ++y) {
    const double oy0 = std::max(y - 0.5, r.y0);
    const double oy1 = std::min(y + 0.5, r.y1);
    if (oy1 <= oy0) continue;
    for (int x = px0; x <= px1; ++x) {
      const double ox0 = std::max(x - 0.5, r.x0);
      const double ox1 = std::min(x + 0.5, r.x1);
      if (ox1 <= ox0) continue;
      const double cover = (ox1 - ox0) * (oy1 - oy0);
      double sum = 0.0;
      for (int j = 0; j < kSubsamples; ++j) {
        const double sy = oy0 + (j + 0.5) / kSubsamples * (oy1 - oy0);
        for (int i = 0; i < kSubsamples; ++i) {
          const double sx = ox0 + (i + 0.5) / kSubsamples * (ox1 - ox0);
          sum += tex(sx, sy);
        }
      }
      auto& px = img[static_cast<std::size_t>(y) * cam.width + x];
      px = (1.0 - cover) * px + cover * sum / (kSubsamples * kSubsamples);
    }
  }
}

GrayFrame finish(const std::vector<double>& img, const PinholeCamera& cam, int ambient, double t) {
  GrayFrame out(cam.width, cam.height, 0, t);
  for (std::size_t i = 0; i < img.size(); ++i) out.pixels[i] = to_pixel(img[i], ambient);
  return out;
}

}  // namespace

GrayFrame render_frame(const WorldState& world, const ScenarioConfig& cfg) {
  const PinholeCamera cam(cfg.camera);
  auto img = background(cfg, cam);

  std::vector<std::size_t> order(world.peds.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (world.peds[i].lon_m - world.vehicle_x_m <= 0.0) {
      throw Error(ErrorCode::kBehindCamera, "pedestrian at or behind the camera plane");
    }
    order[i] = i;
  }
  // Far to near so nearer pedestrians occlude farther ones.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return world.peds[a].lon_m > world.peds[b].lon_m;
  });

  const double w = cfg.ped_width_m;
  const double h = cfg.ped_height_m;
  for (std::size_t idx : order) {
    const auto& p = world.peds[idx];
    const double d = p.lon_m - world.vehicle_x_m;
    const Rect r{cam.column(p.lat_m + 0.5 * w, d), cam.column(p.lat_m - 0.5 * w, d), cam.row(h, d),
                 cam.ground_row(d)};
    const std::uint64_t pseed = mix(cfg.seed ^ mix(idx + 1));
    draw_rect(img, cam, r, [&](double sx, double sy) {
      // Texture lives on the pedestrian so it moves and scales with it.
      const double u = (cam.cx - sx) * d / cam.focal_px - (p.lat_m - 0.5 * w);
      const double v = cam.height_m - (sy - cam.cy) * d / cam.focal_px;
      const auto cu = static_cast<std::int64_t>(std::floor(u / kCheckerCellM));
      const auto cv = static_cast<std::int64_t>(std::floor(v / kCheckerCellM));
      const double base = ((cu + cv) & 1) ? kCheckerHi : kCheckerLo;
      const auto fu = static_cast<std::int64_t>(std::floor(u / kFineCellM));
      const auto fv = static_cast<std::int64_t>(std::floor(v / kFineCellM));
      return base + noise(hash3(pseed, fu, fv), kFineNoise);
    });
  }
  return finish(img, cam, cfg.ambient_level, world.t_s);
}

GrayFrame render_reference_target(const ScenarioConfig& cfg, double distance_m) {
  if (!(distance_m > 0.0)) throw Error(ErrorCode::kBehindCamera, "target at or behind the camera");
  const PinholeCamera cam(cfg.camera);
  std::vector<double> img(static_cast<std::size_t>(cam.width) * cam.height,
                          static_cast<double>(kReferenceGroundLevel));
  const double w = cfg.ped_width_m;
  const Rect r{cam.column(0.5 * w, distance_m), cam.column(-0.5 * w, distance_m),
               cam.row(cfg.ped_height_m, distance_m), cam.ground_row(distance_m)};
  draw_rect(img, cam, r, [](double, double) { return static_cast<double>(kReferenceTargetLevel); });
  return finish(img, cam, 255, 0.0);
}

double measure_bottom_row(const GrayFrame& frame, int column, int target_level, int ground_level) {
  if (column < 0 || column >= frame.width || target_level <= ground_level) {
    throw Error(ErrorCode::kInvalidArgument, "bad bottom-row measurement request");
  }
  for (int y = frame.height - 1; y >= 0; --y) {
    const int v = frame.at(column, y);
    if (v <= ground_level) continue;
    const double cover =
        std::min(1.0, static_cast<double>(v - ground_level) / (target_level - ground_level));
    return y - 0.5 + cover;
  }
  throw Error(ErrorCode::kInvalidArgument, "no target found in column");
}

// ---------------------------------------------------------------------------
// Lidar

lidar::LidarScan sample_lidar(const WorldState& world, const ScenarioConfig& cfg, Rng& rng) {
  lidar::LidarScan scan;
  scan.t_s = world.t_s;
  const double sector = cfg.lidar.hfov_deg / static_cast<double>(lidar::kChannels);
  std::normal_distribution<double> gauss(0.0, cfg.lidar.sigma_m);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (std::size_t ch = 0; ch < lidar::kChannels; ++ch) {
    // Draw the same number of variates every scan so streams stay aligned.
    const double n = gauss(rng);
    const double spike_u = unit(rng);
    const double spike_sign = unit(rng) < 0.5 ? -1.0 : 1.0;

    const double boresight = (static_cast<double>(ch) - 1.0) * sector;
    const double lo = (boresight - 0.5 * sector) * kDeg;
    const double hi = (boresight + 0.5 * sector) * kDeg;
    std::optional<double> nearest;
    for (const auto& p : world.peds) {
      const double d = p.lon_m - world.vehicle_x_m;
      if (d <= 0.0) continue;
      const double a0 = std::atan2(p.lat_m - 0.5 * cfg.ped_width_m, d);
      const double a1 = std::atan2(p.lat_m + 0.5 * cfg.ped_width_m, d);
      if (std::max(a0, lo) < std::min(a1, hi) && (!nearest || d < *nearest)) nearest = d;
    }
    if (!nearest || *nearest < cfg.lidar.range_min_m || *nearest > cfg.lidar.range_max_m) continue;
    double range = *nearest + n;
    if (spike_u < cfg.lidar.spike_probability) range += spike_sign * cfg.lidar.spike_magnitude_m;
    scan.channels[ch] = {std::clamp(range, cfg.lidar.range_min_m, cfg.lidar.range_max_m), true};
  }
  return scan;
}

std::vector<lidar::LidarScan> lidar_stream(const Scenario& scenario, double t_end, Rng& rng) {
  std::vector<lidar::LidarScan> out;
  const double rate = scenario.cfg.lidar.rate_hz;
  for (long j = 0;; ++j) {
    const double t = static_cast<double>(j) / rate;
    if (t > t_end) break;
    out.push_back(sample_lidar(state_at(scenario, t), scenario.cfg, rng));
  }
  return out;
}

}  // namespace pedfusion::sim
