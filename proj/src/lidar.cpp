#include "pedfusion/lidar.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "pedfusion/csv.hpp"
#include "pedfusion/error.hpp"

namespace pedfusion::lidar {

GateConfig default_gate_config() {
  GateConfig cfg;
  cfg.sigma_m = kSigmaSpecM;
  cfg.capacity = kWindowFrames;
  return cfg;
}

ChannelHistory::ChannelHistory() : ChannelHistory(default_gate_config()) {}

ChannelHistory::ChannelHistory(const GateConfig& config)
    : channels{RollingGate(config), RollingGate(config), RollingGate(config)} {}

GateVerdict channel_gate(ChannelHistory& hist, std::size_t channel, double t_s, double sample_m) {
  if (channel >= kChannels) throw Error(ErrorCode::kInvalidArgument, "channel index out of range");
  if (!std::isfinite(sample_m)) throw Error(ErrorCode::kInvalidArgument, "non-finite lidar sample");
  return hist.channels[channel].offer(t_s, sample_m);
}

std::array<GateVerdict, kChannels> gate_scan(ChannelHistory& hist, const LidarScan& scan) {
  std::array<GateVerdict, kChannels> out{};
  for (std::size_t c = 0; c < kChannels; ++c) {
    out[c] = scan.channels[c].valid ? channel_gate(hist, c, scan.t_s, scan.channels[c].range_m)
                                    : GateVerdict::kRejected;
  }
  return out;
}

std::optional<Detection> select_cio(const LidarScan& scan,
                                    std::span<const GateVerdict, kChannels> gates) {
  std::optional<Detection> best;
  for (std::size_t c = 0; c < kChannels; ++c) {
    const auto& ch = scan.channels[c];
    if (!ch.valid || gates[c] != GateVerdict::kAccepted) continue;
    if (!best || ch.range_m < best->distance_m) {
      best = Detection{ch.range_m, Source::kLidar, scan.t_s, std::nullopt};
    }
  }
  return best;
}

PixelSpan project_cio_to_image(const Detection& det, int image_width_px, double camera_hfov_deg,
                               double lidar_hfov_deg) {
  if (det.source != Source::kLidar) {
    throw Error(ErrorCode::kInvalidArgument, "only lidar detections project as a FOV band");
  }
  if (image_width_px <= 0 || !(lidar_hfov_deg > 0.0) || lidar_hfov_deg > camera_hfov_deg) {
    throw Error(ErrorCode::kInvalidArgument, "need 0 < lidar FOV <= camera FOV and a positive width");
  }
  constexpr double kDeg = std::numbers::pi / 180.0;
  const double cx = image_width_px / 2.0;
  const double focal = cx / std::tan(camera_hfov_deg * kDeg / 2.0);
  const double half = focal * std::tan(lidar_hfov_deg * kDeg / 2.0);
  // Columns whose center ray lies inside the lidar FOV. The tiny slack keeps
  // the equal-FOV case from losing the edge column to rounding.
  const double slack = 1e-9 * std::max(1.0, half);
  double lo = std::ceil(cx - half - slack);
  double hi = std::floor(cx + half + slack);
  lo = std::max(lo, 0.0);
  hi = std::min(hi, static_cast<double>(image_width_px - 1));
  return {lo, hi};
}

namespace {
const std::vector<std::string> kHeader = {"t_s",   "ch0_m", "ch0_valid", "ch1_m",
                                          "ch1_valid", "ch2_m", "ch2_valid"};
}

void save_scans_csv(const std::filesystem::path& path, std::span<const LidarScan> scans) {
  std::ostringstream out;
  out << "t_s,ch0_m,ch0_valid,ch1_m,ch1_valid,ch2_m,ch2_valid\n";
  for (const auto& s : scans) {
    out << csv::format_double(s.t_s);
    for (const auto& ch : s.channels) {
      out << ',' << csv::format_double(ch.range_m) << ',' << (ch.valid ? 1 : 0);
    }
    out << '\n';
  }
  csv::write_file(path, out.str());
}

std::vector<LidarScan> load_scans_csv(const std::filesystem::path& path) {
  const auto table = csv::read_table(path, kHeader);
  std::vector<LidarScan> scans;
  scans.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto where = table.where(i);
    const auto& row = table.rows[i];
    LidarScan scan;
    scan.t_s = csv::parse_double(row[0], where);
    for (std::size_t c = 0; c < kChannels; ++c) {
      scan.channels[c].range_m = csv::parse_double(row[1 + 2 * c], where);
      scan.channels[c].valid = csv::parse_flag(row[2 + 2 * c], where);
    }
    if (!scans.empty() && scan.t_s < scans.back().t_s) {
      throw Error(ErrorCode::kSchemaError, where + ": timestamps must be non-decreasing");
    }
    scans.push_back(scan);
  }
  return scans;
}

}  // namespace pedfusion::lidar
