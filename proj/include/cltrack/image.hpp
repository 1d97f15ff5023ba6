#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cltrack/error.hpp"
#include "cltrack/geometry.hpp"

namespace cltrack {

/// RGB frame, row-major, channel-interleaved, values in [0, 1]. Pixel (col, row)
/// covers the continuous square [col, col+1) x [row, row+1).
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  static constexpr int kChannels = 3;

  Frame() = default;
  Frame(int w, int h, float fill = 0.0f) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, fill) {
    if (w <= 0 || h <= 0) throw ConfigError("frame dimensions must be positive");
  }

  float& at(int col, int row, int ch) { return pixels[(static_cast<std::size_t>(row) * width + col) * 3 + ch]; }
  float at(int col, int row, int ch) const {
    return pixels[(static_cast<std::size_t>(row) * width + col) * 3 + ch];
  }

  /// Channel value with zero outside the frame.
  float get(int col, int row, int ch) const {
    if (col < 0 || row < 0 || col >= width || row >= height) return 0.0f;
    return at(col, row, ch);
  }

  void clamp() {
    for (auto& v : pixels) v = std::clamp(v, 0.0f, 1.0f);
  }

  friend bool operator==(const Frame&, const Frame&) = default;
};

/// Bilinear sample at continuous point p; outside pixels read as zero.
inline float sample_bilinear(const Frame& f, Point2 p, int ch) {
  const double x = p.x - 0.5;
  const double y = p.y - 0.5;
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const double ax = x - fx;
  const double ay = y - fy;
  const double v = (1 - ax) * (1 - ay) * f.get(x0, y0, ch) + ax * (1 - ay) * f.get(x0 + 1, y0, ch) +
                   (1 - ax) * ay * f.get(x0, y0 + 1, ch) + ax * ay * f.get(x0 + 1, y0 + 1, ch);
  return static_cast<float>(v);
}

inline Frame gaussian_blur(const Frame& f, double sigma) {
  if (!(sigma > 0.0)) return f;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) sum += (k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma)));
  for (auto& v : k) v /= sum;
  auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };
  Frame tmp = f, out = f;
  for (int r = 0; r < f.height; ++r)
    for (int c = 0; c < f.width; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        double s = 0.0;
        for (int i = -radius; i <= radius; ++i) s += k[i + radius] * f.at(clampi(c + i, f.width), r, ch);
        tmp.at(c, r, ch) = static_cast<float>(s);
      }
  for (int r = 0; r < f.height; ++r)
    for (int c = 0; c < f.width; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        double s = 0.0;
        for (int i = -radius; i <= radius; ++i) s += k[i + radius] * tmp.at(c, clampi(r + i, f.height), ch);
        out.at(c, r, ch) = static_cast<float>(s);
      }
  return out;
}

inline std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

inline void write_ppm(const std::string& path, const Frame& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path);
  os << "P6\n" << f.width << ' ' << f.height << "\n255\n";
  std::vector<char> bytes(f.pixels.size());
  for (std::size_t i = 0; i < f.pixels.size(); ++i) bytes[i] = static_cast<char>(to_byte(f.pixels[i]));
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline Frame read_ppm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + path);
  auto token = [&]() {
    std::string t;
    while (is >> t) {
      if (t[0] == '#') {
        std::string rest;
        std::getline(is, rest);
        continue;
      }
      return t;
    }
    throw ConfigError(path + ": truncated PPM header");
  };
  if (token() != "P6") throw ConfigError(path + ": not a binary PPM (P6)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::logic_error&) {
    throw ConfigError(path + ": malformed PPM header");
  }
  if (maxval != 255) throw ConfigError(path + ": only 8-bit PPM is supported");
  is.get();
  Frame f(w, h);
  std::vector<unsigned char> bytes(f.pixels.size());
  if (!is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size())))
    throw ConfigError(path + ": truncated PPM data");
  for (std::size_t i = 0; i < bytes.size(); ++i) f.pixels[i] = static_cast<float>(bytes[i]) / 255.0f;
  return f;
}

}  // namespace cltrack
