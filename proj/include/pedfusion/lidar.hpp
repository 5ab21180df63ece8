#pragma once

// Three-beam short-range lidar: scan type, per-channel false-alarm gating,
// closest-object selection and projection of the lidar FOV into the image.

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "pedfusion/detection.hpp"
#include "pedfusion/gate.hpp"

namespace pedfusion::lidar {

inline constexpr std::size_t kChannels = 3;
inline constexpr double kMinRangeM = 1.0;
inline constexpr double kMaxRangeM = 10.0;
inline constexpr double kSigmaSpecM = 0.10;
inline constexpr std::size_t kWindowFrames = 30;

struct ChannelReading {
  double range_m = 0.0;
  bool valid = false;
};

struct LidarScan {
  double t_s = 0.0;
  std::array<ChannelReading, kChannels> channels{};
};

/// Per-channel rolling windows (30 accepted frames, sigma 10 cm).
struct ChannelHistory {
  ChannelHistory();
  explicit ChannelHistory(const GateConfig& config);

  std::array<RollingGate, kChannels> channels;
};

GateConfig default_gate_config();

GateVerdict channel_gate(ChannelHistory& hist, std::size_t channel, double t_s, double sample_m);

/// Gates every valid channel of a scan. Invalid channels report kRejected
/// and leave their window untouched.
std::array<GateVerdict, kChannels> gate_scan(ChannelHistory& hist, const LidarScan& scan);

/// Closest valid, accepted channel reading.
std::optional<Detection> select_cio(const LidarScan& scan,
                                    std::span<const GateVerdict, kChannels> gates);

/// Image columns covered by the lidar's horizontal FOV, assuming both
/// sensors share the optical axis. Annotation only.
PixelSpan project_cio_to_image(const Detection& det, int image_width_px, double camera_hfov_deg,
                               double lidar_hfov_deg);

// CSV: t_s,ch0_m,ch0_valid,ch1_m,ch1_valid,ch2_m,ch2_valid
void save_scans_csv(const std::filesystem::path& path, std::span<const LidarScan> scans);
std::vector<LidarScan> load_scans_csv(const std::filesystem::path& path);

}  // namespace pedfusion::lidar
