#pragma once

// Rotated-box representations and overlap measures.
//
// Coordinates are image coordinates (x right, y down). A rectangle's corners
// are stored so that the signed shoelace area is negative, e.g. the square
// (0,0) (0,2) (2,2) (2,0); this is the winding the library calls "clockwise".
// The five-parameter box stores two diagonal corners p1, p2 and beta, where
// pi * beta is the central angle (about the diagonal midpoint) from p1 to the
// corner that follows it in that winding. beta = 0.5 is a square.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "cltrack/error.hpp"

namespace cltrack {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
  friend constexpr Point2 operator*(Point2 a, double s) { return {s * a.x, s * a.y}; }
  friend constexpr bool operator==(Point2 a, Point2 b) = default;
};

inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 a) { return std::hypot(a.x, a.y); }
inline double distance(Point2 a, Point2 b) { return norm(b - a); }
inline Point2 midpoint(Point2 a, Point2 b) { return {0.5 * (a.x + b.x), 0.5 * (a.y + b.y)}; }
inline bool is_finite(Point2 p) { return std::isfinite(p.x) && std::isfinite(p.y); }

/// Rotation by theta in the corner winding direction. For theta = pi/2 it maps
/// (-1,-1) to (-1,1).
inline Point2 rotate_winding(Point2 v, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {c * v.x + s * v.y, -s * v.x + c * v.y};
}

/// Angle in [0, 2pi) that rotate_winding needs to carry direction a onto direction b.
inline double winding_angle(Point2 a, Point2 b) {
  double t = -std::atan2(cross(a, b), dot(a, b));
  if (t < 0.0) t += 2.0 * std::numbers::pi;
  return t;
}

struct FiveBB {
  Point2 p1;
  Point2 p2;
  double beta = 0.5;
};

struct CornerBB {
  std::array<Point2, 4> corners{};
};

struct AABB {
  double cx = 0.0;
  double cy = 0.0;
  double w = 1.0;
  double h = 1.0;
};

struct Circle {
  Point2 center;
  double radius = 0.0;
};

inline constexpr double kRectangleTolerance = 1e-6;

inline std::array<double, 5> to_array(const FiveBB& b) {
  return {b.p1.x, b.p1.y, b.p2.x, b.p2.y, b.beta};
}

inline FiveBB from_array(std::span<const double, 5> v) { return {{v[0], v[1]}, {v[2], v[3]}, v[4]}; }

inline void validate(const FiveBB& b) {
  if (!is_finite(b.p1) || !is_finite(b.p2) || !std::isfinite(b.beta))
    throw DegenerateBox("non-finite box parameters");
  if (!(distance(b.p1, b.p2) > 1e-12)) throw DegenerateBox("diagonal endpoints coincide");
  if (!(b.beta > 0.0 && b.beta < 1.0)) throw DegenerateBox("beta must lie in (0, 1)");
}

inline double signed_area(std::span<const Point2> poly) {
  double s = 0.0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) s += cross(poly[i], poly[(i + 1) % n]);
  return 0.5 * s;
}

inline double area(const CornerBB& c) { return std::abs(signed_area(c.corners)); }
inline Point2 center(const CornerBB& c) { return midpoint(c.corners[0], c.corners[2]); }
inline double diagonal_length(const CornerBB& c) { return distance(c.corners[0], c.corners[2]); }

/// Rectangle test: diagonals bisect each other and have equal length, the
/// winding is the library's clockwise one, and the area is nonzero.
inline void validate(const CornerBB& c, double tol = kRectangleTolerance) {
  for (const auto& p : c.corners)
    if (!is_finite(p)) throw NotARectangle("non-finite corner");
  const auto& k = c.corners;
  const double d1 = distance(k[0], k[2]);
  const double d2 = distance(k[1], k[3]);
  const double scale = std::max({1.0, d1, d2});
  if (d1 <= 1e-12 && d2 <= 1e-12) throw DegenerateBox("zero-size rectangle");
  if (distance(midpoint(k[0], k[2]), midpoint(k[1], k[3])) > tol * scale || std::abs(d1 - d2) > tol * scale)
    throw NotARectangle();
  const double a = signed_area(k);
  if (std::abs(a) <= 1e-12 * scale * scale) throw DegenerateBox("zero-area rectangle");
  if (a > 0.0) throw NotARectangle("corners are not in clockwise order");
}

/// Reverses the corner order when the winding is counter to the library's.
inline CornerBB with_canonical_winding(CornerBB c) {
  if (signed_area(c.corners) > 0.0) std::swap(c.corners[1], c.corners[3]);
  return c;
}

inline CornerBB five_to_corners(const FiveBB& b) {
  validate(b);
  const Point2 c = midpoint(b.p1, b.p2);
  const Point2 q = c + rotate_winding(b.p1 - c, std::numbers::pi * b.beta);
  return {{b.p1, q, b.p2, 2.0 * c - q}};
}

/// Canonical five-parameter form: p1 is the corner with minimal y (ties: minimal x).
inline FiveBB corners_to_five(const CornerBB& c) {
  validate(c);
  std::size_t k = 0;
  for (std::size_t i = 1; i < 4; ++i) {
    const auto& p = c.corners[i];
    const auto& best = c.corners[k];
    if (p.y < best.y || (p.y == best.y && p.x < best.x)) k = i;
  }
  const Point2 p1 = c.corners[k];
  const Point2 next = c.corners[(k + 1) % 4];
  const Point2 p2 = c.corners[(k + 2) % 4];
  const Point2 mid = midpoint(p1, p2);
  const double beta = winding_angle(p1 - mid, next - mid) / std::numbers::pi;
  FiveBB out{p1, p2, beta};
  validate(out);
  return out;
}

inline Circle circumscribed_circle(const FiveBB& b) {
  validate(b);
  return {midpoint(b.p1, b.p2), 0.5 * distance(b.p1, b.p2)};
}

inline Point2 orientation_vector(const FiveBB& b) {
  validate(b);
  return b.p2 - b.p1;
}

/// Area of the lens shared by two circles. Disjoint and contained
/// configurations are resolved before the two-arccos formula, which is only
/// defined for 0 < d and |ra - rb| < d < ra + rb.
inline double circle_intersection_area(const Circle& a, const Circle& b) {
  const double d = distance(a.center, b.center);
  // Ordered radii keep the result bit-identical under swapping the circles.
  const double r = std::min(a.radius, b.radius);
  const double R = std::max(a.radius, b.radius);
  if (d >= r + R) return 0.0;
  if (d <= R - r) return std::numbers::pi * r * r;
  const double ca = std::clamp((d * d + r * r - R * R) / (2.0 * d * r), -1.0, 1.0);
  const double cb = std::clamp((d * d + R * R - r * r) / (2.0 * d * R), -1.0, 1.0);
  const double k = std::max(0.0, (d + R + r) * (d + R - r) * (d + r - R) * (r + R - d));
  const double lens = r * r * std::acos(ca) + R * R * std::acos(cb) - 0.5 * std::sqrt(k);
  return std::clamp(lens, 0.0, std::numbers::pi * r * r);
}

inline double circle_iou(const Circle& a, const Circle& b) {
  if (!(a.radius > 0.0) && !(b.radius > 0.0)) throw DegenerateBox("both circles have zero radius");
  const double inter = circle_intersection_area(a, b);
  const double total = std::numbers::pi * (a.radius * a.radius + b.radius * b.radius);
  return std::clamp(inter / (total - inter), 0.0, 1.0);
}

inline double polygon_area(std::span<const Point2> poly) { return std::abs(signed_area(poly)); }

/// Clips `subject` against the convex polygon `clip` (either winding).
inline std::vector<Point2> clip_convex(std::span<const Point2> subject, std::span<const Point2> clip) {
  std::vector<Point2> out(subject.begin(), subject.end());
  const double orient = signed_area(clip) < 0.0 ? -1.0 : 1.0;
  const std::size_t m = clip.size();
  for (std::size_t e = 0; e < m && !out.empty(); ++e) {
    const Point2 a = clip[e];
    const Point2 b = clip[(e + 1) % m];
    const Point2 edge = b - a;
    auto side = [&](Point2 p) { return orient * cross(edge, p - a); };
    std::vector<Point2> in;
    in.swap(out);
    for (std::size_t i = 0, n = in.size(); i < n; ++i) {
      const Point2 cur = in[i];
      const Point2 prev = in[(i + n - 1) % n];
      const double sc = side(cur);
      const double sp = side(prev);
      if (sc >= 0.0) {
        if (sp < 0.0) out.push_back(prev + (sp / (sp - sc)) * (cur - prev));
        out.push_back(cur);
      } else if (sp >= 0.0) {
        out.push_back(prev + (sp / (sp - sc)) * (cur - prev));
      }
    }
  }
  return out;
}

inline double polygon_intersection_area(const CornerBB& a, const CornerBB& b) {
  const auto clipped = clip_convex(a.corners, b.corners);
  if (clipped.size() < 3) return 0.0;
  return std::min({polygon_area(clipped), area(a), area(b)});
}

inline double polygon_iou(const CornerBB& a, const CornerBB& b) {
  const double aa = area(a);
  const double ab = area(b);
  if (aa <= 0.0 && ab <= 0.0) throw DegenerateBox("both polygons have zero area");
  const double inter = polygon_intersection_area(a, b);
  return std::clamp(inter / (aa + ab - inter), 0.0, 1.0);
}

inline CornerBB aabb_to_corners(const AABB& a) {
  if (!(a.w > 0.0 && a.h > 0.0)) throw DegenerateBox("axis-aligned box needs positive width and height");
  const double l = a.cx - 0.5 * a.w;
  const double r = a.cx + 0.5 * a.w;
  const double t = a.cy - 0.5 * a.h;
  const double btm = a.cy + 0.5 * a.h;
  return {{Point2{l, t}, Point2{l, btm}, Point2{r, btm}, Point2{r, t}}};
}

/// Largest distance from a corner of one box to the nearest corner of the other.
inline double point_set_deviation(const CornerBB& a, const CornerBB& b) {
  auto one_way = [](const CornerBB& u, const CornerBB& v) {
    double worst = 0.0;
    for (const auto& p : u.corners) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : v.corners) best = std::min(best, distance(p, q));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(one_way(a, b), one_way(b, a));
}

}  // namespace cltrack
