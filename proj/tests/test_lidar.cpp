#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "pedfusion/error.hpp"
#include "pedfusion/gate.hpp"
#include "pedfusion/lidar.hpp"

using namespace pedfusion;
using namespace pedfusion::lidar;

namespace {

ChannelHistory filled(double value, std::size_t n = kWindowFrames) {
  ChannelHistory h;
  for (std::size_t i = 0; i < n; ++i) channel_gate(h, 0, i * 0.01, value);
  return h;
}

LidarScan scan_of(std::array<std::optional<double>, kChannels> r, double t = 0.0) {
  LidarScan s;
  s.t_s = t;
  for (std::size_t c = 0; c < kChannels; ++c) {
    s.channels[c] = r[c] ? ChannelReading{*r[c], true} : ChannelReading{0.0, false};
  }
  return s;
}

}  // namespace

TEST(ChannelGate, TwoSigmaRule) {
  auto h = filled(5.0);
  EXPECT_EQ(channel_gate(h, 0, 1.0, 5.15), GateVerdict::kAccepted);
  auto h2 = filled(5.0);
  EXPECT_EQ(channel_gate(h2, 0, 1.0, 5.25), GateVerdict::kRejected);
  ChannelHistory empty;
  EXPECT_EQ(channel_gate(empty, 0, 0.0, 9.7), GateVerdict::kAccepted);
}

TEST(ChannelGate, WarmupAcceptsEverything) {
  ChannelHistory h;
  const double vals[] = {5.0, 9.0, 1.0, 7.0};
  for (int i = 0; i < 4; ++i) EXPECT_EQ(channel_gate(h, 0, i, vals[i]), GateVerdict::kAccepted);
  EXPECT_EQ(h.channels[0].size(), 4u);
}

TEST(ChannelGate, RejectionsDoNotEnterWindowAndResetAfterRun) {
  auto h = filled(5.0, 10);
  for (int i = 0; i < 9; ++i) {
    EXPECT_EQ(channel_gate(h, 0, 1.0 + i * 0.01, 8.0), GateVerdict::kRejected);
    EXPECT_EQ(h.channels[0].size(), 10u);
  }
  // The tenth consecutive rejection clears the window; the target moved.
  EXPECT_EQ(channel_gate(h, 0, 1.1, 8.0), GateVerdict::kRejected);
  EXPECT_EQ(h.channels[0].size(), 0u);
  EXPECT_EQ(channel_gate(h, 0, 1.11, 8.0), GateVerdict::kAccepted);
}

TEST(ChannelGate, FollowsClosingTarget) {
  // 4.17 m/s at 100 Hz with 10 cm noise; the trend line keeps the gate centered.
  ChannelHistory h;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.10);
  int rejected = 0;
  const int n = 200;
  for (int i = 0; i < n; ++i) {
    const double t = i * 0.01;
    if (channel_gate(h, 1, t, 10.0 - 4.17 * t + noise(rng)) == GateVerdict::kRejected) ++rejected;
  }
  EXPECT_LT(rejected, n / 10);
}

TEST(ChannelGate, Deterministic) {
  auto a = filled(5.0);
  auto b = filled(5.0);
  for (int i = 0; i < 20; ++i) {
    const double v = 5.0 + 0.03 * i;
    EXPECT_EQ(channel_gate(a, 0, 1 + i * 0.01, v), channel_gate(b, 0, 1 + i * 0.01, v));
  }
  EXPECT_THROW(channel_gate(a, 3, 0.0, 1.0), Error);
}

TEST(GateScan, InvalidChannelsAreRejectedAndUntouched) {
  ChannelHistory h;
  const auto v = gate_scan(h, scan_of({3.0, std::nullopt, 4.0}));
  EXPECT_EQ(v[0], GateVerdict::kAccepted);
  EXPECT_EQ(v[1], GateVerdict::kRejected);
  EXPECT_EQ(h.channels[1].size(), 0u);
}

TEST(SelectCio, Examples) {
  using V = GateVerdict;
  const std::array<V, 3> acc{V::kAccepted, V::kAccepted, V::kAccepted};
  auto d = select_cio(scan_of({3.2, 7.5, std::nullopt}), acc);
  ASSERT_TRUE(d);
  EXPECT_DOUBLE_EQ(d->distance_m, 3.2);
  EXPECT_EQ(d->source, Source::kLidar);

  EXPECT_FALSE(select_cio(scan_of({std::nullopt, std::nullopt, std::nullopt}), acc));

  const std::array<V, 3> mixed{V::kRejected, V::kAccepted, V::kAccepted};
  d = select_cio(scan_of({4.0, 6.1, 5.0}), mixed);
  ASSERT_TRUE(d);
  EXPECT_DOUBLE_EQ(d->distance_m, 5.0);
}

TEST(SelectCio, NeverExceedsAcceptedReading) {
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> r(1.0, 10.0);
  std::bernoulli_distribution coin(0.5);
  for (int i = 0; i < 1000; ++i) {
    std::array<std::optional<double>, 3> in;
    std::array<GateVerdict, 3> v{};
    for (int c = 0; c < 3; ++c) {
      if (coin(rng)) in[c] = r(rng);
      v[c] = coin(rng) ? GateVerdict::kAccepted : GateVerdict::kRejected;
    }
    const auto s = scan_of(in);
    const auto d = select_cio(s, v);
    bool any = false;
    for (int c = 0; c < 3; ++c) {
      if (in[c] && v[c] == GateVerdict::kAccepted) {
        any = true;
        ASSERT_TRUE(d);
        EXPECT_LE(d->distance_m, *in[c]);
      }
    }
    EXPECT_EQ(any, d.has_value());
  }
}

TEST(ProjectCio, TangentMapping) {
  const Detection det{5.0, Source::kLidar, 0.0, std::nullopt};
  const auto span = project_cio_to_image(det, 640, 78.0, 27.0);
  const double half = 640 * std::tan(13.5 * M_PI / 180) / (2 * std::tan(39.0 * M_PI / 180));
  EXPECT_DOUBLE_EQ(span.x_min, std::ceil(320 - half));
  EXPECT_DOUBLE_EQ(span.x_max, std::floor(320 + half));
  EXPECT_DOUBLE_EQ(span.x_min, 226.0);
  EXPECT_DOUBLE_EQ(span.x_max, 414.0);

  const auto full = project_cio_to_image(det, 640, 78.0, 78.0);
  EXPECT_DOUBLE_EQ(full.x_min, 0.0);
  EXPECT_DOUBLE_EQ(full.x_max, 639.0);

  const auto tiny = project_cio_to_image(det, 2, 78.0, 27.0);
  EXPECT_LE(tiny.x_min, 1.0);
  EXPECT_GE(tiny.x_max, 1.0);

  const Detection cam{5.0, Source::kCamera, 0.0, std::nullopt};
  EXPECT_THROW(project_cio_to_image(cam, 640, 78.0, 27.0), Error);
}

TEST(ScanCsv, RoundTripAndSchema) {
  const auto dir = std::filesystem::temp_directory_path() / "pedfusion_lidar_csv";
  std::filesystem::create_directories(dir);
  std::vector<LidarScan> scans{scan_of({1.0 / 3.0, std::nullopt, 9.99}, 0.01),
                               scan_of({std::nullopt, 2.5, std::nullopt}, 0.02)};
  save_scans_csv(dir / "l.csv", scans);
  const auto back = load_scans_csv(dir / "l.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].channels[0].range_m, 1.0 / 3.0);
  EXPECT_FALSE(back[0].channels[1].valid);
  EXPECT_DOUBLE_EQ(back[1].t_s, 0.02);

  std::ofstream(dir / "bad.csv") << "t_s,ch0_m,ch0_valid\n0,1,1\n";
  try {
    load_scans_csv(dir / "bad.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaError);
  }
  std::ofstream(dir / "short.csv") << "t_s,ch0_m,ch0_valid,ch1_m,ch1_valid,ch2_m,ch2_valid\n"
                                   << "0,1,1,2,1,3,1\n0.01,1,1\n";
  try {
    load_scans_csv(dir / "short.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaError);
    EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos) << e.what();
  }
  std::filesystem::remove_all(dir);
}
