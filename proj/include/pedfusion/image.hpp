#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace pedfusion {

/// 8-bit single-channel image, row-major, with its capture timestamp.
struct GrayFrame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
  double t_s = 0.0;

  GrayFrame() = default;
  GrayFrame(int w, int h, std::uint8_t fill = 0, double t = 0.0);

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
};

/// Binary PGM (P5, maxval 255). The timestamp is not stored in the file.
void write_pgm(const std::filesystem::path& path, const GrayFrame& frame);
GrayFrame read_pgm(const std::filesystem::path& path);

}  // namespace pedfusion
