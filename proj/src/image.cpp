#include "pedfusion/image.hpp"

#include <cctype>
#include <fstream>
#include <string>

#include "pedfusion/error.hpp"

namespace pedfusion {

GrayFrame::GrayFrame(int w, int h, std::uint8_t fill, double t)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill), t_s(t) {
  if (w < 0 || h < 0) throw Error(ErrorCode::kInvalidArgument, "negative frame size");
}

void write_pgm(const std::filesystem::path& path, const GrayFrame& frame) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << "P5\n" << frame.width << " " << frame.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(frame.pixels.data()),
            static_cast<std::streamsize>(frame.pixels.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

namespace {

// Next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
  std::string token;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      if (!token.empty()) break;
    } else {
      token.push_back(static_cast<char>(c));
    }
    c = in.get();
  }
  return token;
}

int parse_int(const std::string& token, const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    int v = std::stoi(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kSchemaError, path.string() + ": bad PGM header field '" + token + "'");
  }
}

}  // namespace

GrayFrame read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  if (next_token(in) != "P5") throw Error(ErrorCode::kSchemaError, path.string() + ": not a P5 PGM");
  const int w = parse_int(next_token(in), path);
  const int h = parse_int(next_token(in), path);
  const int maxval = parse_int(next_token(in), path);
  if (w <= 0 || h <= 0) throw Error(ErrorCode::kSchemaError, path.string() + ": bad dimensions");
  if (maxval != 255) throw Error(ErrorCode::kSchemaError, path.string() + ": maxval must be 255");
  GrayFrame frame(w, h);
  in.read(reinterpret_cast<char*>(frame.pixels.data()),
          static_cast<std::streamsize>(frame.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(frame.pixels.size())) {
    throw Error(ErrorCode::kSchemaError, path.string() + ": truncated pixel data");
  }
  return frame;
}

}  // namespace pedfusion
