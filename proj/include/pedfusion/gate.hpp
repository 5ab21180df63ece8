#pragma once

#include <cstddef>
#include <deque>

namespace pedfusion {

enum class GateVerdict { kAccepted, kRejected };

struct GateConfig {
  double sigma_m = 0.10;            // sensor standard deviation
  double k_sigma = 2.0;             // accept iff |deviation| <= k_sigma * sigma_m
  std::size_t capacity = 30;        // rolling window length in frames
  std::size_t warmup = 5;           // below this window size everything is accepted
  std::size_t reset_after = 10;     // consecutive rejections that clear the window
  double trend_z = 3.0;             // slope z-score needed to use the trend line
};

/// Rolling false-alarm gate over the last accepted samples of one stream.
///
/// The center statistic is the window mean. When the window shows a
/// significant linear trend (|slope| more than trend_z standard errors from
/// zero, computed with the configured sensor sigma) the center
/// is the trend line evaluated at the sample time instead, so a target
/// closing at constant speed is not rejected for the lag of the mean.
class RollingGate {
 public:
  RollingGate() = default;
  explicit RollingGate(GateConfig config) : config_(config) {}

  /// Checks a sample and, if accepted, pushes it into the window.
  GateVerdict offer(double t_s, double value);

  /// Verdict without mutating state.
  GateVerdict evaluate(double t_s, double value) const;

  /// Prediction used as the gate center; only meaningful once warm.
  double center(double t_s) const;

  bool warm() const { return window_.size() >= config_.warmup; }
  std::size_t size() const { return window_.size(); }
  std::size_t consecutive_rejections() const { return consecutive_rejections_; }
  const GateConfig& config() const { return config_; }
  void clear();

 private:
  struct Sample {
    double t_s;
    double value;
  };

  GateConfig config_;
  std::deque<Sample> window_;
  std::size_t consecutive_rejections_ = 0;
};

}  // namespace pedfusion
