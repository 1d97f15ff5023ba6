#pragma once

// Synthetic tracking sequences: a filled rectangle drifting over a static
// textured background. Linear and angular velocity follow a clamped random
// walk; position and angle bounce off their limits.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "cltrack/augment.hpp"
#include "cltrack/geometry.hpp"
#include "cltrack/image.hpp"
#include "cltrack/random.hpp"

namespace cltrack {

struct Sequence {
  std::string id;
  std::vector<Frame> frames;
  std::vector<CornerBB> groundtruth;

  std::size_t size() const { return groundtruth.size(); }

  void validate() const {
    if (!frames.empty() && frames.size() != groundtruth.size())
      throw MissingAnnotation("sequence '" + id + "': " + std::to_string(frames.size()) + " frames but " +
                              std::to_string(groundtruth.size()) + " annotations");
    for (const auto& b : groundtruth) cltrack::validate(b);
  }
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct SynthConfig {
  int width = 64;
  int height = 64;
  int length = 60;
  Range object_w{14.0, 22.0};
  Range object_h{8.0, 14.0};
  /// Pixels per frame, per axis.
  Range velocity{-0.3, 0.3};
  /// Standard deviation of the per-frame velocity change.
  double velocity_jitter = 0.05;
  /// Degrees per frame.
  Range angular_velocity{-0.3, 0.3};
  double angular_jitter = 0.05;
  /// Degrees; the box never leaves this range. The default stays inside one
  /// quadrant, where the canonical corner labelling does not switch.
  Range angle{20.0, 70.0};
  /// Per-pixel noise amplitude added independently to every frame.
  double noise = 0.02;
  int supersample = 4;
  std::string id_prefix = "synth";
  /// When set, object colour and background come from this seed instead of the
  /// sequence seed, so sequences differ only in geometry, motion and noise.
  std::optional<std::uint64_t> appearance_seed;

  void validate() const {
    if (width <= 0 || height <= 0 || length <= 0) throw ConfigError("synthetic frame size and length must be positive");
    if (!(object_w.lo > 0.0 && object_h.lo > 0.0) || object_w.hi < object_w.lo || object_h.hi < object_h.lo)
      throw ConfigError("synthetic object size range is invalid");
    if (velocity.hi < velocity.lo || angular_velocity.hi < angular_velocity.lo || angle.hi < angle.lo)
      throw ConfigError("synthetic velocity ranges are invalid");
    if (!(velocity_jitter >= 0.0) || !(angular_jitter >= 0.0)) throw ConfigError("jitter must be non-negative");
    if (supersample < 1) throw ConfigError("supersample must be at least 1");
    if (std::hypot(object_w.hi, object_h.hi) > std::min(width, height))
      throw ConfigError("object does not fit in the frame and could leave it");
  }
};

/// Rectangle with centre c, size w x h, rotated by `degrees` (clockwise on screen).
inline CornerBB oriented_box(Point2 c, double w, double h, double degrees) {
  CornerBB b;
  const std::array<Point2, 4> local{{{-0.5 * w, -0.5 * h}, {0.5 * w, -0.5 * h}, {0.5 * w, 0.5 * h}, {-0.5 * w, 0.5 * h}}};
  for (std::size_t i = 0; i < 4; ++i) b.corners[i] = rotate_about(c + local[i], c, degrees);
  return with_canonical_winding(b);
}

namespace detail {

struct Background {
  std::array<double, 3> base{};
  struct Wave {
    double fx, fy, phase;
    std::array<double, 3> amp;
  };
  std::vector<Wave> waves;

  float at(double x, double y, int ch) const {
    double v = base[ch];
    for (const auto& w : waves) v += w.amp[ch] * std::sin(w.fx * x + w.fy * y + w.phase);
    return static_cast<float>(v);
  }
};

inline Background make_background(Rng& rng) {
  Background bg;
  for (auto& b : bg.base) b = rng.uniform(0.35, 0.55);
  for (int i = 0; i < 4; ++i) {
    Background::Wave w;
    const double period = rng.uniform(6.0, 24.0);
    const double dir = rng.uniform(0.0, std::numbers::pi);
    w.fx = 2.0 * std::numbers::pi / period * std::cos(dir);
    w.fy = 2.0 * std::numbers::pi / period * std::sin(dir);
    w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (auto& a : w.amp) a = rng.uniform(0.02, 0.08);
    bg.waves.push_back(w);
  }
  return bg;
}

/// Folds x back into [lo, hi], flipping the velocity on every bounce.
inline void reflect(double& x, double& v, double lo, double hi) {
  if (hi <= lo) {
    x = 0.5 * (lo + hi);
    return;
  }
  while (x < lo || x > hi) {
    x = x < lo ? 2.0 * lo - x : 2.0 * hi - x;
    v = -v;
  }
}

}  // namespace detail

inline Sequence synth_sequence(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const double w = rng.uniform(cfg.object_w.lo, cfg.object_w.hi);
  const double h = rng.uniform(cfg.object_h.lo, cfg.object_h.hi);
  Point2 vel{rng.uniform(cfg.velocity.lo, cfg.velocity.hi), rng.uniform(cfg.velocity.lo, cfg.velocity.hi)};
  double omega = rng.uniform(cfg.angular_velocity.lo, cfg.angular_velocity.hi);
  double deg = rng.uniform(cfg.angle.lo, cfg.angle.hi);

  // The whole object stays inside the frame at any angle.
  const double margin = 0.5 * std::hypot(w, h);
  const Range rx{margin, cfg.width - margin};
  const Range ry{margin, cfg.height - margin};
  Point2 pos{rng.uniform(rx.lo, rx.hi), rng.uniform(ry.lo, ry.hi)};

  Rng appearance_rng(cfg.appearance_seed.value_or(0));
  Rng& look = cfg.appearance_seed ? appearance_rng : rng;
  const detail::Background bg = detail::make_background(look);
  std::array<float, 3> color{};
  for (auto& c : color) c = static_cast<float>(look.uniform(0.0, 1.0));
  color[look.below(3)] = static_cast<float>(look.uniform(0.85, 1.0));
  color[look.below(3)] = static_cast<float>(look.uniform(0.0, 0.15));

  Frame background(cfg.width, cfg.height);
  for (int r = 0; r < cfg.height; ++r)
    for (int c = 0; c < cfg.width; ++c)
      for (int ch = 0; ch < 3; ++ch) background.at(c, r, ch) = bg.at(c + 0.5, r + 0.5, ch);

  Sequence seq;
  char id[64];
  std::snprintf(id, sizeof id, "%s-%04llu", cfg.id_prefix.c_str(), static_cast<unsigned long long>(seed));
  seq.id = id;
  const int ss = cfg.supersample;
  for (int t = 0; t < cfg.length; ++t) {
    if (t > 0) {
      vel.x = std::clamp(vel.x + cfg.velocity_jitter * rng.normal(), cfg.velocity.lo, cfg.velocity.hi);
      vel.y = std::clamp(vel.y + cfg.velocity_jitter * rng.normal(), cfg.velocity.lo, cfg.velocity.hi);
      omega = std::clamp(omega + cfg.angular_jitter * rng.normal(), cfg.angular_velocity.lo, cfg.angular_velocity.hi);
      pos = pos + vel;
      deg += omega;
      detail::reflect(pos.x, vel.x, rx.lo, rx.hi);
      detail::reflect(pos.y, vel.y, ry.lo, ry.hi);
      detail::reflect(deg, omega, cfg.angle.lo, cfg.angle.hi);
    }
    seq.groundtruth.push_back(oriented_box(pos, w, h, deg));

    const double a = -deg * std::numbers::pi / 180.0;
    const double ca = std::cos(a), sa = std::sin(a);
    Frame f = background;
    for (int r = 0; r < cfg.height; ++r)
      for (int col = 0; col < cfg.width; ++col) {
        int inside = 0;
        for (int sy = 0; sy < ss; ++sy)
          for (int sx = 0; sx < ss; ++sx) {
            const double px = col + (sx + 0.5) / ss - pos.x;
            const double py = r + (sy + 0.5) / ss - pos.y;
            const double lx = ca * px - sa * py;
            const double ly = sa * px + ca * py;
            if (std::abs(lx) <= 0.5 * w && std::abs(ly) <= 0.5 * h) ++inside;
          }
        const float cov = static_cast<float>(inside) / static_cast<float>(ss * ss);
        for (int ch = 0; ch < 3; ++ch) {
          float v = cov * color[ch] + (1.0f - cov) * f.at(col, r, ch);
          if (cfg.noise > 0.0) v += static_cast<float>(cfg.noise * rng.uniform(-1.0, 1.0));
          f.at(col, r, ch) = v;
        }
      }
    f.clamp();
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

}  // namespace cltrack
