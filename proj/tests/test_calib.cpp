#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "pedfusion/calib.hpp"
#include "pedfusion/error.hpp"

using namespace pedfusion;
using namespace pedfusion::calib;

namespace {

std::vector<PixelSample> ground_plane_samples(int n, double jitter = 0.0, unsigned seed = 7) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-jitter, jitter);
  std::vector<PixelSample> s;
  for (int i = 0; i < n; ++i) {
    const double y = 215.0 + (470.0 - 215.0) * i / (n - 1);
    s.push_back({y + (jitter > 0 ? u(rng) : 0.0), 600.0 / (y - 200.0)});
  }
  return s;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::kIo;
}

}  // namespace

// The hyperbola over [215, 470] cannot be matched to 5 cm by any degree-8
// polynomial (even the minimax fit is about 0.40 m off), so the fit is held to
// the extended-precision least-squares solution instead.
TEST(FitDistancePoly, GroundPlaneSamplesMatchLongDoubleOracle) {
  const auto s = ground_plane_samples(53);
  const auto fit = fit_distance_poly(s);
  std::vector<double> u, d;
  for (const auto& p : s) {
    u.push_back((p.y_px - fit.poly.y_center()) / fit.poly.y_scale());
    d.push_back(p.distance_m);
  }
  const double oracle = static_cast<double>(oracle::ls_max_residual(u, d, kPolyDegree));
  EXPECT_LE(fit.report.max_abs_residual_m, oracle * (1 + 1e-6) + 1e-9);
  EXPECT_EQ(fit.report.sample_count, 53u);
  const auto coeffs = oracle::ls_fit(u, d, kPolyDegree);
  const double u300 = (300.0 - fit.poly.y_center()) / fit.poly.y_scale();
  EXPECT_NEAR(eval_distance(fit.poly, 300.0), static_cast<double>(oracle::poly_eval(coeffs, u300)),
              1e-6);
  EXPECT_NEAR(eval_distance(fit.poly, 300.0), 6.0, 0.15);
}

TEST(FitDistancePoly, ConstantSamples) {
  std::vector<PixelSample> s;
  for (int i = 0; i < 9; ++i) s.push_back({250.0 + 10.0 * i, 7.0});
  const auto fit = fit_distance_poly(s);
  for (const auto& p : s) EXPECT_NEAR(eval_distance(fit.poly, p.y_px), 7.0, 1e-9);
}

TEST(FitDistancePoly, JitteredSamplesStillFit) {
  const auto fit = fit_distance_poly(ground_plane_samples(53, 0.1));
  EXPECT_TRUE(std::isfinite(fit.report.max_abs_residual_m));
  EXPECT_GT(fit.report.rms_residual_m, 0.0);
  EXPECT_LE(fit.report.rms_residual_m, fit.report.max_abs_residual_m);
}

TEST(FitDistancePoly, RecoversDegreeEightGenerator) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::array<double, kPolyCoeffs> c{};
    for (auto& v : c) v = coef(rng);
    c[8] += 10.0;
    std::vector<PixelSample> s;
    for (int i = 0; i < 40; ++i) {
      const double y = 220.0 + 6.0 * i;
      s.push_back({y, 0.0});
    }
    // Generator defined on the same normalized coordinate the fit will use.
    double sum = 0;
    for (auto& p : s) sum += p.y_px;
    const double yc = sum / s.size();
    const double ys = std::max(s.back().y_px - yc, yc - s.front().y_px);
    for (auto& p : s) {
      const double u = (p.y_px - yc) / ys;
      double acc = 0;
      for (double v : c) acc = acc * u + v;
      p.distance_m = acc;
    }
    const auto fit = fit_distance_poly(s);
    for (int k = 0; k < kPolyCoeffs; ++k) {
      EXPECT_NEAR(fit.poly.coeffs()[k], c[k], 1e-6 * std::max(1.0, std::abs(c[k])));
    }
    for (const auto& p : s) {
      EXPECT_NEAR(eval_distance(fit.poly, p.y_px), p.distance_m, 1e-6 * std::abs(p.distance_m));
    }
  }
}

TEST(FitDistancePoly, Errors) {
  std::vector<PixelSample> few(8, {300.0, 5.0});
  for (int i = 0; i < 8; ++i) few[i].y_px += i;
  EXPECT_EQ(code_of([&] { fit_distance_poly(few); }), ErrorCode::kTooFewSamples);

  std::vector<PixelSample> same(12, {300.0, 5.0});
  EXPECT_EQ(code_of([&] { fit_distance_poly(same); }), ErrorCode::kDegenerateDesign);

  // Nine samples on only four distinct rows cannot pin down nine coefficients.
  std::vector<PixelSample> four;
  for (int i = 0; i < 9; ++i) four.push_back({300.0 + (i % 4), 5.0 + i});
  EXPECT_EQ(code_of([&] { fit_distance_poly(four); }), ErrorCode::kDegenerateDesign);
}

TEST(EvalDistance, ConstantTermOnly) {
  std::array<double, kPolyCoeffs> c{};
  c[8] = 7.5;
  const DistancePoly poly(c, 300.0, 100.0, {200.0, 400.0});
  EXPECT_DOUBLE_EQ(eval_distance(poly, 250.0), 7.5);
  EXPECT_DOUBLE_EQ(eval_distance(poly, 400.0), 7.5);
  EXPECT_EQ(code_of([&] { eval_distance(poly, 401.0); }), ErrorCode::kOutOfCalibratedRange);
  EXPECT_EQ(code_of([&] { eval_distance(poly, 199.0); }), ErrorCode::kOutOfCalibratedRange);
}

TEST(SpatialMap, IdentityAndInterpolation) {
  std::vector<Anchor> id;
  for (int k = 2; k <= 10; ++k) id.push_back({double(k), double(k)});
  const auto m = build_spatial_map(id);
  EXPECT_EQ(m.anchors().size(), 9u);
  EXPECT_NEAR(align_camera_to_lidar(m, 6.3), 6.3, 1e-12);

  const auto two = build_spatial_map({{3.0, 3.0}, {2.0, 2.2}});
  EXPECT_NEAR(align_camera_to_lidar(two, 2.5), 2.6, 1e-12);

  // Past the last anchor the last segment is extended: slope (10-9.1)/(10-9).
  std::vector<Anchor> a;
  for (int k = 2; k <= 9; ++k) a.push_back({double(k), k + 0.1});
  a.push_back({10.0, 10.0});
  const auto ext = build_spatial_map(a);
  EXPECT_NEAR(align_camera_to_lidar(ext, 12.0), 10.0 + 0.9 * 2.0, 1e-12);
  EXPECT_NEAR(align_camera_to_lidar(ext, 1.0), 2.1 - 1.0, 1e-12);
}

TEST(SpatialMap, Errors) {
  EXPECT_EQ(code_of([] { build_spatial_map({{2.0, 2.0}}); }), ErrorCode::kTooFewAnchors);
  EXPECT_EQ(code_of([] { build_spatial_map({{2.0, 2.0}, {3.0, 3.0}, {4.0, 2.9}}); }),
            ErrorCode::kNonMonotone);
  EXPECT_EQ(code_of([] { build_spatial_map({{2.0, 2.0}, {2.0, 3.0}}); }), ErrorCode::kNonMonotone);
}

TEST(SpatialMap, MonotoneOnRandomMaps) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> step(0.05, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Anchor> a;
    double c = 1.0, l = 1.0;
    for (int k = 0; k < 6; ++k) {
      c += step(rng);
      l += step(rng);
      a.push_back({c, l});
    }
    const auto m = build_spatial_map(a);
    double prev = -1e300;
    for (double x = -5.0; x < 25.0; x += 0.01) {
      const double v = align_camera_to_lidar(m, x);
      ASSERT_GE(v, prev);
      prev = v;
    }
  }
}

TEST(AlignLidarToFrame, LatestNotAfter) {
  std::vector<lidar::LidarScan> s(3);
  s[0].t_s = 0.00;
  s[1].t_s = 0.01;
  s[2].t_s = 0.02;
  TriggerClock clock;
  EXPECT_DOUBLE_EQ(align_lidar_to_frame(clock, 0.015, s).t_s, 0.01);
  EXPECT_DOUBLE_EQ(clock.last_frame_time_s, 0.015);
  EXPECT_DOUBLE_EQ(align_lidar_to_frame(clock, 0.02, s).t_s, 0.02);

  std::vector<lidar::LidarScan> one(1);
  EXPECT_DOUBLE_EQ(align_lidar_to_frame(clock, 0.033, one).t_s, 0.0);

  std::vector<lidar::LidarScan> none;
  EXPECT_EQ(code_of([&] { align_lidar_to_frame(clock, 0.0, none); }), ErrorCode::kNoScanAvailable);

  for (double t = 0.0; t < 0.05; t += 0.0013) {
    EXPECT_LE(align_lidar_to_frame(clock, t, s).t_s, t);
  }
}

TEST(CalibrationArtifact, JsonRoundTrip) {
  const auto fit = fit_distance_poly(ground_plane_samples(53));
  const CalibrationArtifact art{fit.poly, build_spatial_map({{2.0, 2.1}, {3.0, 3.05}}), fit.report};
  const auto text = to_json(art);
  const auto back = calibration_from_json(text);
  EXPECT_EQ(to_json(back), text);
  EXPECT_EQ(code_of([] { calibration_from_json("{\"poly\": {}}"); }), ErrorCode::kSchemaError);
  EXPECT_EQ(code_of([] { load_calibration("/nonexistent/calib.json"); }),
            ErrorCode::kMissingCalibration);
}
