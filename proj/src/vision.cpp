#include "pedfusion/vision.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "pedfusion/error.hpp"

namespace pedfusion::vision {

namespace {

constexpr int kSubpixelReach = 1;

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool inside_convex(const std::array<Point2, 4>& poly, Point2 p) {
  bool has_pos = false;
  bool has_neg = false;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const double c = cross(poly[i], poly[(i + 1) % poly.size()], p);
    if (c > 1e-9) has_pos = true;
    if (c < -1e-9) has_neg = true;
  }
  return !(has_pos && has_neg);
}

void rasterize(RoiMask& mask) {
  mask.raster.assign(static_cast<std::size_t>(mask.width) * mask.height, 0);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (inside_convex(mask.polygon, {static_cast<double>(x), static_cast<double>(y)})) {
        mask.raster[static_cast<std::size_t>(y) * mask.width + x] = 1;
      }
    }
  }
}

}  // namespace

RoiMask compute_roi(Point2 far_point, Point2 near_a, Point2 near_b, int width, int height,
                    double half_width_px) {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::kInvalidArgument, "empty frame size");
  if (std::hypot(near_a.x - near_b.x, near_a.y - near_b.y) < 1e-9) {
    throw Error(ErrorCode::kDegeneratePolygon, "near lane points coincide");
  }
  if (!(half_width_px > 0.0)) {
    throw Error(ErrorCode::kDegeneratePolygon, "far half-width must be positive");
  }
  if (!(far_point.y < near_a.y && far_point.y < near_b.y)) {
    throw Error(ErrorCode::kDegeneratePolygon, "far point must lie above both near points");
  }
  const Point2& near_left = near_a.x <= near_b.x ? near_a : near_b;
  const Point2& near_right = near_a.x <= near_b.x ? near_b : near_a;

  RoiMask mask;
  mask.width = width;
  mask.height = height;
  mask.polygon = {Point2{far_point.x - half_width_px, far_point.y},
                  Point2{far_point.x + half_width_px, far_point.y}, near_right, near_left};

  // Convex with positive area: every turn has the same orientation.
  double area2 = 0.0;
  int sign = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& a = mask.polygon[i];
    const auto& b = mask.polygon[(i + 1) % 4];
    const auto& c = mask.polygon[(i + 2) % 4];
    area2 += a.x * b.y - b.x * a.y;
    const double turn = cross(a, b, c);
    const int s = turn > 1e-9 ? 1 : (turn < -1e-9 ? -1 : 0);
    if (s == 0 || (sign != 0 && s != sign)) {
      throw Error(ErrorCode::kDegeneratePolygon, "ROI is not a convex quadrilateral");
    }
    sign = s;
  }
  if (std::abs(area2) < 1e-6) throw Error(ErrorCode::kDegeneratePolygon, "ROI has zero area");
  rasterize(mask);
  return mask;
}

RoiMask full_roi(int width, int height) {
  RoiMask mask;
  mask.width = width;
  mask.height = height;
  const double w = width - 1;
  const double h = height - 1;
  mask.polygon = {Point2{0, 0}, Point2{w, 0}, Point2{w, h}, Point2{0, h}};
  mask.raster.assign(static_cast<std::size_t>(width) * height, 1);
  return mask;
}

GrayFrame mask_threshold(const GrayFrame& frame, const RoiMask& mask, int threshold) {
  if (threshold < 0 || threshold > 255) {
    throw Error(ErrorCode::kInvalidArgument, "threshold must be in [0, 255]");
  }
  if (frame.width != mask.width || frame.height != mask.height) {
    throw Error(ErrorCode::kDimensionMismatch, "mask and frame sizes differ");
  }
  GrayFrame out = frame;
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    if (!mask.raster[i] || out.pixels[i] < threshold) out.pixels[i] = 0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shi-Tomasi

std::vector<double> min_eigen_scores(const GrayFrame& frame) {
  const int w = frame.width;
  const int h = frame.height;
  const auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };
  const auto px = [&](int x, int y) {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return static_cast<double>(frame.at(x, y));
  };

  std::vector<double> gxx(frame.pixels.size()), gyy(frame.pixels.size()), gxy(frame.pixels.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = (px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2 * px(x - 1, y) + px(x - 1, y + 1));
      const double gy = (px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2 * px(x, y - 1) + px(x + 1, y - 1));
      gxx[idx(x, y)] = gx * gx;
      gyy[idx(x, y)] = gy * gy;
      gxy[idx(x, y)] = gx * gy;
    }
  }

  // 3x3 box sums with replicated borders, separable.
  const auto box = [&](const std::vector<double>& src) {
    std::vector<double> tmp(src.size()), dst(src.size());
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        tmp[idx(x, y)] = src[idx(std::max(x - 1, 0), y)] + src[idx(x, y)] +
                         src[idx(std::min(x + 1, w - 1), y)];
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        dst[idx(x, y)] = tmp[idx(x, std::max(y - 1, 0))] + tmp[idx(x, y)] +
                         tmp[idx(x, std::min(y + 1, h - 1))];
      }
    }
    return dst;
  };
  const auto sxx = box(gxx);
  const auto syy = box(gyy);
  const auto sxy = box(gxy);

  std::vector<double> score(frame.pixels.size());
  for (std::size_t i = 0; i < score.size(); ++i) {
    // Sums of products of integer gradients are exact in double, so the
    // determinant is exact and det / lambda_max avoids cancellation.
    const double half_trace = 0.5 * (sxx[i] + syy[i]);
    const double half_diff = 0.5 * (sxx[i] - syy[i]);
    const double lambda_max = half_trace + std::sqrt(half_diff * half_diff + sxy[i] * sxy[i]);
    const double det = sxx[i] * syy[i] - sxy[i] * sxy[i];
    score[i] = lambda_max > 0.0 ? std::max(det / lambda_max, 0.0) : 0.0;
  }
  return score;
}

std::vector<Corner> shi_tomasi(const GrayFrame& frame, const ShiTomasiParams& params) {
  if (frame.width < 8 || frame.height < 8) {
    throw Error(ErrorCode::kInvalidArgument, "shi_tomasi needs a frame of at least 8x8");
  }
  if (params.max_corners < 1) throw Error(ErrorCode::kInvalidArgument, "max_corners must be >= 1");
  const int w = frame.width;
  const int h = frame.height;
  const auto score = min_eigen_scores(frame);
  const auto at = [&](int x, int y) { return score[static_cast<std::size_t>(y) * w + x]; };
  const double max_score = *std::max_element(score.begin(), score.end());
  if (!(max_score > 0.0)) return {};
  const double floor_score = params.quality * max_score;

  constexpr int kBorder = 2;
  std::vector<std::pair<int, int>> candidates;
  for (int y = kBorder; y < h - kBorder; ++y) {
    for (int x = kBorder; x < w - kBorder; ++x) {
      const double s = at(x, y);
      if (s <= 0.0 || s < floor_score) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const double n = at(x + dx, y + dy);
          // Plateau ties go to the first pixel in raster order.
          const bool earlier = dy < 0 || (dy == 0 && dx < 0);
          if (earlier ? n >= s : n > s) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) candidates.emplace_back(x, y);
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), [&](const auto& a, const auto& b) {
    return at(a.first, a.second) > at(b.first, b.second);
  });

  std::vector<Corner> out;
  const double min_d = params.min_dist_px;
  const double cell = std::max(min_d, 1.0);
  const int gw = static_cast<int>(std::ceil(w / cell)) + 1;
  const int gh = static_cast<int>(std::ceil(h / cell)) + 1;
  std::vector<std::vector<std::size_t>> grid(static_cast<std::size_t>(gw) * gh);
  for (const auto& [x, y] : candidates) {
    if (static_cast<int>(out.size()) >= params.max_corners) break;
    const int cx = static_cast<int>(x / cell);
    const int cy = static_cast<int>(y / cell);
    bool ok = true;
    if (min_d > 0.0) {
      for (int gy = std::max(cy - 1, 0); gy <= std::min(cy + 1, gh - 1) && ok; ++gy) {
        for (int gx = std::max(cx - 1, 0); gx <= std::min(cx + 1, gw - 1) && ok; ++gx) {
          for (std::size_t k : grid[static_cast<std::size_t>(gy) * gw + gx]) {
            const double ddx = out[k].x - x;
            const double ddy = out[k].y - y;
            if (ddx * ddx + ddy * ddy < min_d * min_d) {
              ok = false;
              break;
            }
          }
        }
      }
    }
    if (!ok) continue;
    grid[static_cast<std::size_t>(cy) * gw + cx].push_back(out.size());
    out.push_back({static_cast<double>(x), static_cast<double>(y), at(x, y)});
  }

  if (params.subpixel) {
    // Each coordinate moves to the nearest gradient-magnitude peak along its
    // axis. A parabola through the central-difference gradient locates an
    // anti-aliased step edge exactly, which is what the bottom row needs.
    const auto px = [&](int x, int y) {
      return static_cast<double>(frame.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)));
    };
    const auto gy_abs = [&](int x, int y) {
      return std::abs((px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1)) -
                      (px(x - 1, y - 1) + 2 * px(x, y - 1) + px(x + 1, y - 1)));
    };
    const auto gx_abs = [&](int x, int y) {
      return std::abs((px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1)) -
                      (px(x - 1, y - 1) + 2 * px(x - 1, y) + px(x - 1, y + 1)));
    };
    const auto refine = [](auto profile, int centre) {
      int best = centre;
      for (int k = centre - kSubpixelReach; k <= centre + kSubpixelReach; ++k) {
        if (profile(k) > profile(best)) best = k;
      }
      const double m = profile(best - 1);
      const double c0 = profile(best);
      const double p = profile(best + 1);
      const double denom = m - 2.0 * c0 + p;
      if (!(c0 > 0.0) || denom >= 0.0) return static_cast<double>(centre);
      return best + std::clamp(0.5 * (m - p) / denom, -0.5, 0.5);
    };
    for (auto& c : out) {
      const int x = static_cast<int>(c.x);
      const int y = static_cast<int>(c.y);
      c.x = refine([&](int k) { return gx_abs(k, y); }, x);
      c.y = refine([&](int k) { return gy_abs(x, k); }, y);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pyramidal Lucas-Kanade

namespace {

struct FloatImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

  // Bilinear sample with clamp-to-edge.
  float sample(double x, double y) const {
    x = std::clamp(x, 0.0, static_cast<double>(width - 1));
    y = std::clamp(y, 0.0, static_cast<double>(height - 1));
    const int x0 = std::min(static_cast<int>(x), width - 1);
    const int y0 = std::min(static_cast<int>(y), height - 1);
    const int x1 = std::min(x0 + 1, width - 1);
    const int y1 = std::min(y0 + 1, height - 1);
    const float ax = static_cast<float>(x - x0);
    const float ay = static_cast<float>(y - y0);
    const float top = at(x0, y0) + ax * (at(x1, y0) - at(x0, y0));
    const float bottom = at(x0, y1) + ax * (at(x1, y1) - at(x0, y1));
    return top + ay * (bottom - top);
  }
};

FloatImage to_float(const GrayFrame& f) {
  FloatImage img{f.width, f.height, std::vector<float>(f.pixels.size())};
  for (std::size_t i = 0; i < f.pixels.size(); ++i) img.data[i] = f.pixels[i] / 255.0f;
  return img;
}

int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

// 5-tap binomial blur followed by 2x decimation.
FloatImage pyr_down(const FloatImage& src) {
  static constexpr float k[5] = {1 / 16.f, 4 / 16.f, 6 / 16.f, 4 / 16.f, 1 / 16.f};
  FloatImage tmp{src.width, src.height, std::vector<float>(src.data.size())};
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      float acc = 0;
      for (int t = -2; t <= 2; ++t) acc += k[t + 2] * src.at(reflect101(x + t, src.width), y);
      tmp.data[static_cast<std::size_t>(y) * src.width + x] = acc;
    }
  }
  FloatImage dst;
  dst.width = (src.width + 1) / 2;
  dst.height = (src.height + 1) / 2;
  dst.data.resize(static_cast<std::size_t>(dst.width) * dst.height);
  for (int y = 0; y < dst.height; ++y) {
    for (int x = 0; x < dst.width; ++x) {
      float acc = 0;
      for (int t = -2; t <= 2; ++t) acc += k[t + 2] * tmp.at(2 * x, reflect101(2 * y + t, src.height));
      dst.data[static_cast<std::size_t>(y) * dst.width + x] = acc;
    }
  }
  return dst;
}

// Scharr derivatives scaled to intensity per pixel.
void gradients(const FloatImage& img, FloatImage& gx, FloatImage& gy) {
  gx = FloatImage{img.width, img.height, std::vector<float>(img.data.size())};
  gy = gx;
  const auto p = [&](int x, int y) {
    return img.at(std::clamp(x, 0, img.width - 1), std::clamp(y, 0, img.height - 1));
  };
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const float dx = 3 * (p(x + 1, y - 1) - p(x - 1, y - 1)) + 10 * (p(x + 1, y) - p(x - 1, y)) +
                       3 * (p(x + 1, y + 1) - p(x - 1, y + 1));
      const float dy = 3 * (p(x - 1, y + 1) - p(x - 1, y - 1)) + 10 * (p(x, y + 1) - p(x, y - 1)) +
                       3 * (p(x + 1, y + 1) - p(x + 1, y - 1));
      gx.data[static_cast<std::size_t>(y) * img.width + x] = dx / 32.0f;
      gy.data[static_cast<std::size_t>(y) * img.width + x] = dy / 32.0f;
    }
  }
}

struct Level {
  FloatImage prev, next, gx, gy;
};

}  // namespace

std::vector<FlowVector> lk_flow(const GrayFrame& prev, const GrayFrame& next,
                                std::span<const Corner> corners, const LkParams& params) {
  if (prev.width != next.width || prev.height != next.height) {
    throw Error(ErrorCode::kDimensionMismatch, "lk_flow frames differ in size");
  }
  if (params.window_px < 5 || params.window_px % 2 == 0) {
    throw Error(ErrorCode::kInvalidArgument, "window_px must be odd and >= 5");
  }
  if (params.pyramid_levels < 0) throw Error(ErrorCode::kInvalidArgument, "negative pyramid levels");

  std::vector<Level> levels(static_cast<std::size_t>(params.pyramid_levels) + 1);
  levels[0].prev = to_float(prev);
  levels[0].next = to_float(next);
  for (std::size_t l = 1; l < levels.size(); ++l) {
    levels[l].prev = pyr_down(levels[l - 1].prev);
    levels[l].next = pyr_down(levels[l - 1].next);
  }
  for (auto& lv : levels) gradients(lv.prev, lv.gx, lv.gy);

  const int half = params.window_px / 2;
  const std::size_t area = static_cast<std::size_t>(params.window_px) * params.window_px;
  std::vector<float> win_i(area), win_gx(area), win_gy(area);

  std::vector<FlowVector> out;
  out.reserve(corners.size());
  for (const auto& c : corners) {
    FlowVector fv;
    fv.from = {c.x, c.y};
    fv.to = fv.from;
    double gx_guess = 0.0;
    double gy_guess = 0.0;
    bool lost = false;

    for (int l = static_cast<int>(levels.size()) - 1; l >= 0 && !lost; --l) {
      const Level& lv = levels[static_cast<std::size_t>(l)];
      const double scale = std::ldexp(1.0, -l);
      const double px = c.x * scale;
      const double py = c.y * scale;

      double gxx = 0, gyy = 0, gxy = 0;
      std::size_t k = 0;
      for (int dy = -half; dy <= half; ++dy) {
        for (int dx = -half; dx <= half; ++dx, ++k) {
          win_i[k] = lv.prev.sample(px + dx, py + dy);
          win_gx[k] = lv.gx.sample(px + dx, py + dy);
          win_gy[k] = lv.gy.sample(px + dx, py + dy);
          gxx += win_gx[k] * win_gx[k];
          gyy += win_gy[k] * win_gy[k];
          gxy += win_gx[k] * win_gy[k];
        }
      }
      const double det = gxx * gyy - gxy * gxy;
      const double min_eig =
          (0.5 * (gxx + gyy) - std::sqrt(0.25 * (gxx - gyy) * (gxx - gyy) + gxy * gxy)) /
          static_cast<double>(area);
      if (min_eig < params.min_eigen || det <= 0.0) {
        lost = true;
        break;
      }

      double vx = 0.0;
      double vy = 0.0;
      for (int it = 0; it < params.max_iterations; ++it) {
        double bx = 0.0;
        double by = 0.0;
        const double ox = px + gx_guess + vx;
        const double oy = py + gy_guess + vy;
        k = 0;
        for (int dy = -half; dy <= half; ++dy) {
          for (int dx = -half; dx <= half; ++dx, ++k) {
            const double diff = win_i[k] - lv.next.sample(ox + dx, oy + dy);
            bx += diff * win_gx[k];
            by += diff * win_gy[k];
          }
        }
        const double ex = (gyy * bx - gxy * by) / det;
        const double ey = (gxx * by - gxy * bx) / det;
        vx += ex;
        vy += ey;
        if (!std::isfinite(vx) || !std::isfinite(vy)) {
          lost = true;
          break;
        }
        if (ex * ex + ey * ey < params.epsilon_px * params.epsilon_px) break;
      }
      if (l > 0) {
        gx_guess = 2.0 * (gx_guess + vx);
        gy_guess = 2.0 * (gy_guess + vy);
      } else {
        gx_guess += vx;
        gy_guess += vy;
      }
    }

    if (!lost) {
      fv.to = {c.x + gx_guess, c.y + gy_guess};
      const bool inside = std::isfinite(fv.to.x) && std::isfinite(fv.to.y) && fv.to.x >= 0.0 &&
                          fv.to.y >= 0.0 && fv.to.x <= prev.width - 1.0 &&
                          fv.to.y <= prev.height - 1.0;
      fv.status = inside ? FlowStatus::kTracked : FlowStatus::kLost;
      if (!inside) fv.to = fv.from;
    }
    out.push_back(fv);
  }
  return out;
}

// ---------------------------------------------------------------------------
// DBSCAN

std::vector<int> dbscan(std::span<const Point2> points, double eps, int min_pts) {
  if (!(eps > 0.0)) throw Error(ErrorCode::kInvalidArgument, "eps must be positive");
  if (min_pts < 1) throw Error(ErrorCode::kInvalidArgument, "min_pts must be >= 1");
  constexpr int kUnvisited = -2;
  const std::size_t n = points.size();
  const double eps2 = eps * eps;
  const auto neighbours = [&](std::size_t i) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < n; ++j) {
      const double dx = points[i].x - points[j].x;
      const double dy = points[i].y - points[j].y;
      if (dx * dx + dy * dy <= eps2) out.push_back(j);
    }
    return out;
  };

  std::vector<int> labels(n, kUnvisited);
  int cluster = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != kUnvisited) continue;
    auto seeds = neighbours(i);
    if (static_cast<int>(seeds.size()) < min_pts) {
      labels[i] = kNoise;
      continue;
    }
    labels[i] = cluster;
    std::deque<std::size_t> queue(seeds.begin(), seeds.end());
    while (!queue.empty()) {
      const std::size_t j = queue.front();
      queue.pop_front();
      if (labels[j] == kNoise) labels[j] = cluster;  // border point
      if (labels[j] != kUnvisited) continue;
      labels[j] = cluster;
      auto nj = neighbours(j);
      if (static_cast<int>(nj.size()) >= min_pts) queue.insert(queue.end(), nj.begin(), nj.end());
    }
    ++cluster;
  }
  return labels;
}

// ---------------------------------------------------------------------------
// End-to-end camera detection

namespace {

struct Candidate {
  double distance_m;
  Point2 center;
  PixelSpan span;
};

}  // namespace

CameraFrameResult camera_detect(const GrayFrame& prev, const GrayFrame& next, const RoiMask& mask,
                                const calib::DistancePoly& poly, const CameraParams& params,
                                CameraTrackState& state) {
  if (prev.width != next.width || prev.height != next.height) {
    throw Error(ErrorCode::kDimensionMismatch, "camera_detect frames differ in size");
  }
  CameraFrameResult result;
  const int frame_index = state.frame_index++;

  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < next.pixels.size(); ++i) {
    if (mask.raster[i]) {
      sum += next.pixels[i];
      ++count;
    }
  }
  result.env.mean_intensity = count ? sum / static_cast<double>(count) : 0.0;

  const GrayFrame masked_prev = mask_threshold(prev, mask, params.threshold);
  const GrayFrame masked_next = mask_threshold(next, mask, params.threshold);
  const auto corners = shi_tomasi(masked_prev, params.corners);
  result.env.corner_count = static_cast<int>(corners.size());

  const auto flow = lk_flow(masked_prev, masked_next, corners, params.flow);
  std::vector<Point2> moving;
  for (const auto& f : flow) {
    if (f.status != FlowStatus::kTracked) continue;
    if (std::hypot(f.to.x - f.from.x, f.to.y - f.from.y) >= params.motion_threshold_px) {
      moving.push_back(f.to);
    }
  }

  const auto labels = dbscan(moving, params.dbscan_eps_px, params.dbscan_min_pts);
  const int n_clusters = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  result.clusters = static_cast<std::size_t>(std::max(n_clusters, 0));

  std::vector<Candidate> candidates;
  for (int k = 0; k < n_clusters; ++k) {
    double x_min = std::numeric_limits<double>::infinity();
    double x_max = -x_min;
    double y_min = x_min;
    double y_max = -x_min;
    for (std::size_t i = 0; i < moving.size(); ++i) {
      if (labels[i] != k) continue;
      x_min = std::min(x_min, moving[i].x);
      x_max = std::max(x_max, moving[i].x);
      y_min = std::min(y_min, moving[i].y);
      y_max = std::max(y_max, moving[i].y);
    }
    if (!poly.in_range(y_max)) {
      ++result.out_of_range;
      continue;
    }
    candidates.push_back({calib::eval_distance(poly, y_max),
                          {0.5 * (x_min + x_max), 0.5 * (y_min + y_max)},
                          {x_min, x_max}});
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.distance_m < b.distance_m; });

  std::vector<bool> claimed(state.targets.size(), false);
  for (const auto& cand : candidates) {
    std::size_t best = state.targets.size();
    double best_d = params.association_radius_px;
    for (std::size_t t = 0; t < state.targets.size(); ++t) {
      if (claimed[t]) continue;
      const double d = std::hypot(state.targets[t].center.x - cand.center.x,
                                  state.targets[t].center.y - cand.center.y);
      if (d <= best_d) {
        best_d = d;
        best = t;
      }
    }
    GateVerdict verdict;
    if (best < state.targets.size()) {
      claimed[best] = true;
      auto& target = state.targets[best];
      verdict = target.gate.offer(next.t_s, cand.distance_m);
      target.center = cand.center;
      target.last_seen_frame = frame_index;
    } else {
      CameraTarget target{state.next_id++, cand.center, frame_index, RollingGate(params.gate)};
      verdict = target.gate.offer(next.t_s, cand.distance_m);
      state.targets.push_back(std::move(target));
      claimed.push_back(true);
    }
    if (verdict == GateVerdict::kAccepted) {
      result.detections.push_back({cand.distance_m, Source::kCamera, next.t_s, cand.span});
    } else {
      ++result.rejected;
    }
  }

  std::erase_if(state.targets, [&](const CameraTarget& t) {
    return frame_index - t.last_seen_frame > params.target_timeout_frames;
  });
  if (result.detections.size() > params.max_targets) result.detections.resize(params.max_targets);
  return result;
}

std::optional<Detection> select_cio_camera(std::span<const Detection> dets) {
  std::optional<Detection> best;
  for (const auto& d : dets) {
    if (!best || d.distance_m < best->distance_m) best = d;
  }
  return best;
}

}  // namespace pedfusion::vision
