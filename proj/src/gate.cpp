#include "pedfusion/gate.hpp"

#include <cmath>

namespace pedfusion {

double RollingGate::center(double t_s) const {
  if (window_.empty()) return 0.0;
  const double n = static_cast<double>(window_.size());
  double t_mean = 0.0;
  double v_mean = 0.0;
  for (const auto& s : window_) {
    t_mean += s.t_s;
    v_mean += s.value;
  }
  t_mean /= n;
  v_mean /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto& s : window_) {
    const double dt = s.t_s - t_mean;
    sxx += dt * dt;
    sxy += dt * (s.value - v_mean);
  }
  if (sxx <= 0.0) return v_mean;
  const double slope = sxy / sxx;
  // z-score of the slope against the configured sensor noise.
  const double z = std::abs(slope) * std::sqrt(sxx) / config_.sigma_m;
  if (z <= config_.trend_z) return v_mean;
  return v_mean + slope * (t_s - t_mean);
}

GateVerdict RollingGate::evaluate(double t_s, double value) const {
  if (!warm()) return GateVerdict::kAccepted;
  const double deviation = std::abs(value - center(t_s));
  return deviation <= config_.k_sigma * config_.sigma_m ? GateVerdict::kAccepted
                                                        : GateVerdict::kRejected;
}

GateVerdict RollingGate::offer(double t_s, double value) {
  const GateVerdict verdict = evaluate(t_s, value);
  if (verdict == GateVerdict::kAccepted) {
    window_.push_back({t_s, value});
    while (window_.size() > config_.capacity) window_.pop_front();
    consecutive_rejections_ = 0;
  } else if (++consecutive_rejections_ >= config_.reset_after) {
    clear();
  }
  return verdict;
}

void RollingGate::clear() {
  window_.clear();
  consecutive_rejections_ = 0;
}

}  // namespace pedfusion
