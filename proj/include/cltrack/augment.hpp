#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>

#include "cltrack/geometry.hpp"
#include "cltrack/image.hpp"
#include "cltrack/random.hpp"

namespace cltrack {

/// Maps normalised crop coordinates u in [0,1]^2 to frame coordinates
/// origin + side * u. Translation plus uniform scale, so beta is unchanged.
struct CropTransform {
  Point2 origin;
  double side = 1.0;

  Point2 to_frame(Point2 u) const { return origin + side * u; }
  Point2 to_crop(Point2 p) const { return (1.0 / side) * (p - origin); }

  FiveBB to_frame(const FiveBB& b) const { return {to_frame(b.p1), to_frame(b.p2), b.beta}; }
  FiveBB to_crop(const FiveBB& b) const { return {to_crop(b.p1), to_crop(b.p2), b.beta}; }
};

struct Crop {
  Frame frame;
  CropTransform transform;
};

inline constexpr double kDefaultCropFactor = 1.5;

inline CropTransform crop_window(Point2 center, double diagonal, double factor) {
  if (!(factor > 0.0)) throw ConfigError("crop factor must be positive");
  if (!(diagonal > 1e-12) || !std::isfinite(diagonal)) throw DegenerateBox("cannot crop around a zero-size box");
  const double side = factor * diagonal;
  return {center - Point2{0.5 * side, 0.5 * side}, side};
}

/// Resamples the window `tf` of `f` to out_size x out_size pixels; outside the frame is zero.
inline Frame crop_frame(const Frame& f, const CropTransform& tf, int out_size) {
  Frame out(out_size, out_size);
  const double inv = 1.0 / out_size;
  for (int r = 0; r < out_size; ++r)
    for (int c = 0; c < out_size; ++c) {
      const Point2 p = tf.to_frame(Point2{(c + 0.5) * inv, (r + 0.5) * inv});
      for (int ch = 0; ch < 3; ++ch) out.at(c, r, ch) = sample_bilinear(f, p, ch);
    }
  return out;
}

/// Square window centred on the box with side factor * diagonal, resampled to
/// out_size x out_size pixels (0 = keep the native size).
inline Crop crop_around_box(const Frame& f, const CornerBB& b, double factor = kDefaultCropFactor, int out_size = 0) {
  validate(b);
  const CropTransform tf = crop_window(center(b), diagonal_length(b), factor);
  if (out_size <= 0) out_size = std::max(1, static_cast<int>(std::lround(tf.side)));
  return {crop_frame(f, tf, out_size), tf};
}

/// The twelve rotation angles in degrees: +-10 ... +-60.
inline constexpr std::array<int, 12> kRotationAngles = {-60, -50, -40, -30, -20, -10, 10, 20, 30, 40, 50, 60};

struct AugmentSpec {
  bool flip_h = false;
  bool flip_v = false;
  /// Degrees, one of kRotationAngles; positive turns clockwise on screen.
  std::optional<int> rotation_deg;
  double brightness_shift = 0.0;
  /// Multiplier applied around mid-grey.
  double contrast_scale = 1.0;
  std::array<double, 3> color_shift{0.0, 0.0, 0.0};
  double blur_sigma = 0.0;

  void validate() const {
    if (rotation_deg && std::find(kRotationAngles.begin(), kRotationAngles.end(), *rotation_deg) == kRotationAngles.end())
      throw ConfigError("rotation angle must come from the fixed twelve-angle set");
    if (!(blur_sigma >= 0.0) || !(contrast_scale > 0.0)) throw ConfigError("invalid photometric parameters");
  }
};

struct AugmentRanges {
  double brightness = 0.2;
  double contrast_lo = 0.8;
  double contrast_hi = 1.25;
  double color = 0.1;
  double max_blur_sigma = 1.0;
};

inline AugmentSpec sample_augment_spec(std::uint64_t seed, const AugmentRanges& ranges = {}) {
  Rng rng(seed);
  AugmentSpec s;
  s.flip_h = rng.coin();
  s.flip_v = rng.coin();
  if (rng.coin()) s.rotation_deg = kRotationAngles[rng.below(kRotationAngles.size())];
  s.brightness_shift = rng.uniform(-ranges.brightness, ranges.brightness);
  s.contrast_scale = std::exp(rng.uniform(std::log(ranges.contrast_lo), std::log(ranges.contrast_hi)));
  for (auto& c : s.color_shift) c = rng.uniform(-ranges.color, ranges.color);
  s.blur_sigma = rng.coin() ? rng.uniform(0.0, ranges.max_blur_sigma) : 0.0;
  return s;
}

struct AugmentResult {
  Frame frame;
  CornerBB box;
  /// The transformed box reaches outside the frame; callers may drop the sample.
  bool clipped = false;
};

inline Point2 rotate_about(Point2 p, Point2 c, double degrees) {
  const double a = degrees * std::numbers::pi / 180.0;
  const Point2 d = p - c;
  return c + Point2{std::cos(a) * d.x - std::sin(a) * d.y, std::sin(a) * d.x + std::cos(a) * d.y};
}

inline AugmentResult augment(const Frame& f, const CornerBB& box, const AugmentSpec& spec) {
  spec.validate();
  validate(box);
  Frame img = f;
  CornerBB b = box;
  const double W = f.width;
  const double H = f.height;

  if (spec.flip_h) {
    Frame out(f.width, f.height);
    for (int r = 0; r < f.height; ++r)
      for (int c = 0; c < f.width; ++c)
        for (int ch = 0; ch < 3; ++ch) out.at(c, r, ch) = img.at(f.width - 1 - c, r, ch);
    img = std::move(out);
    for (auto& p : b.corners) p.x = W - p.x;
    b = with_canonical_winding(b);
  }
  if (spec.flip_v) {
    Frame out(f.width, f.height);
    for (int r = 0; r < f.height; ++r)
      for (int c = 0; c < f.width; ++c)
        for (int ch = 0; ch < 3; ++ch) out.at(c, r, ch) = img.at(c, f.height - 1 - r, ch);
    img = std::move(out);
    for (auto& p : b.corners) p.y = H - p.y;
    b = with_canonical_winding(b);
  }
  if (spec.rotation_deg) {
    const Point2 c{0.5 * W, 0.5 * H};
    const double deg = *spec.rotation_deg;
    Frame out(f.width, f.height);
    for (int r = 0; r < f.height; ++r)
      for (int col = 0; col < f.width; ++col) {
        const Point2 src = rotate_about({col + 0.5, r + 0.5}, c, -deg);
        for (int ch = 0; ch < 3; ++ch) out.at(col, r, ch) = sample_bilinear(img, src, ch);
      }
    img = std::move(out);
    for (auto& p : b.corners) p = rotate_about(p, c, deg);
  }

  const bool photometric = spec.brightness_shift != 0.0 || spec.contrast_scale != 1.0 ||
                           spec.color_shift != std::array<double, 3>{0.0, 0.0, 0.0};
  if (photometric) {
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
      double v = img.pixels[i];
      v = (v - 0.5) * spec.contrast_scale + 0.5 + spec.brightness_shift + spec.color_shift[i % 3];
      img.pixels[i] = static_cast<float>(v);
    }
    img.clamp();
  }
  if (spec.blur_sigma > 0.0) img = gaussian_blur(img, spec.blur_sigma);

  bool clipped = false;
  for (const auto& p : b.corners)
    if (p.x < 0.0 || p.y < 0.0 || p.x > W || p.y > H) clipped = true;
  return {std::move(img), b, clipped};
}

}  // namespace cltrack
