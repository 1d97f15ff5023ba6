#pragma once

// Circular loss on five-parameter boxes and the Smooth-L1 regression baseline.
//
//   total = area + lambda1 * angle + lambda2 * arc
//   area  = 1 - IoU of the circumscribed circles
//   angle = 1 - cos(angle between the two diagonals p2 - p1)
//   arc   = (beta - beta_gt)^2

#include <array>
#include <cmath>
#include <numbers>
#include <span>

#include "cltrack/error.hpp"
#include "cltrack/geometry.hpp"

namespace cltrack {

struct LossWeights {
  double lambda1 = 0.5;
  double lambda2 = 0.3;
};

struct LossBreakdown {
  double area = 0.0;
  double angle = 0.0;
  double arc = 0.0;
  double total = 0.0;
};

struct Grad5 {
  double d_x1 = 0.0;
  double d_y1 = 0.0;
  double d_x2 = 0.0;
  double d_y2 = 0.0;
  double d_beta = 0.0;
  /// Set when the circles are tangent or one sits on the other's rim; the
  /// gradient then comes from the branch the forward pass selected.
  bool on_boundary = false;

  std::array<double, 5> as_array() const { return {d_x1, d_y1, d_x2, d_y2, d_beta}; }
};

struct SmoothL1Config {
  double sigma = 1.0;
};

namespace detail {

inline void check_weights(const LossWeights& w) {
  if (!(w.lambda1 >= 0.0) || !(w.lambda2 >= 0.0)) throw ConfigError("loss weights must be non-negative");
}

inline double cosine(Point2 v, Point2 w) {
  const double nv = norm(v);
  const double nw = norm(w);
  if (nv < 1e-12 || nw < 1e-12) throw DegenerateBox("zero-length diagonal");
  return std::clamp(dot(v, w) / (nv * nw), -1.0, 1.0);
}

}  // namespace detail

inline LossBreakdown circular_loss(const FiveBB& pred, const FiveBB& gt, const LossWeights& w = {}) {
  detail::check_weights(w);
  const Circle c = circumscribed_circle(pred);
  const Circle cg = circumscribed_circle(gt);
  LossBreakdown out;
  out.area = 1.0 - circle_iou(c, cg);
  out.angle = 1.0 - detail::cosine(orientation_vector(pred), orientation_vector(gt));
  out.arc = (pred.beta - gt.beta) * (pred.beta - gt.beta);
  out.total = out.area + w.lambda1 * out.angle + w.lambda2 * out.arc;
  return out;
}

/// Analytic gradient of circular_loss(pred, gt).total with respect to pred.
inline Grad5 circular_loss_grad(const FiveBB& pred, const FiveBB& gt, const LossWeights& w = {}) {
  detail::check_weights(w);
  const Circle c = circumscribed_circle(pred);
  const Circle cg = circumscribed_circle(gt);
  const double r = c.radius;
  const double R = cg.radius;
  const double d = distance(c.center, cg.center);
  const double pi = std::numbers::pi;

  Grad5 g;
  const double scale = std::max({1.0, r, R});
  const double eps = 1e-9 * scale;
  g.on_boundary = std::abs(d - (r + R)) < eps || std::abs(d - std::abs(r - R)) < eps;

  // Area term: derivatives of the intersection I with respect to r and d.
  double dI_dr = 0.0;
  double dI_dd = 0.0;
  const double inter = circle_intersection_area(c, cg);
  if (d >= r + R) {
    // disjoint: I = 0
  } else if (d <= std::abs(r - R)) {
    if (r <= R) dI_dr = 2.0 * pi * r;
  } else {
    const double ca = std::clamp((d * d + r * r - R * R) / (2.0 * d * r), -1.0, 1.0);
    const double alpha = std::acos(ca);
    dI_dr = 2.0 * r * alpha;
    dI_dd = -2.0 * r * std::sin(alpha);
  }
  const double S = pi * (r * r + R * R);
  const double dS_dr = 2.0 * pi * r;
  const double denom = (S - inter) * (S - inter);
  // d(area)/dx = -d(IoU)/dx, d(IoU) = (dI * S - I * dS) / (S - I)^2
  const double dA_dr = -(dI_dr * S - inter * dS_dr) / denom;
  const double dA_dd = -(dI_dd * S) / denom;

  const Point2 diag = pred.p2 - pred.p1;
  const double len = norm(diag);
  const Point2 dr_dp2 = (0.5 / len) * diag;  // dr/dp1 = -dr/dp2
  Point2 dd_dp{0.0, 0.0};                    // same for p1 and p2
  if (d > 0.0) dd_dp = (0.5 / d) * (c.center - cg.center);

  Point2 gp1 = -dA_dr * dr_dp2 + dA_dd * dd_dp;
  Point2 gp2 = dA_dr * dr_dp2 + dA_dd * dd_dp;

  // Angle term: d(1 - cos)/dv with v = p2 - p1.
  const Point2 vg = gt.p2 - gt.p1;
  const double nv = len;
  const double ng = norm(vg);
  if (nv < 1e-12 || ng < 1e-12) throw DegenerateBox("zero-length diagonal");
  const double cosv = dot(diag, vg) / (nv * ng);
  const Point2 dcos_dv = (1.0 / (nv * ng)) * vg - (cosv / (nv * nv)) * diag;
  gp2 = gp2 - w.lambda1 * dcos_dv;
  gp1 = gp1 + w.lambda1 * dcos_dv;

  g.d_x1 = gp1.x;
  g.d_y1 = gp1.y;
  g.d_x2 = gp2.x;
  g.d_y2 = gp2.y;
  g.d_beta = w.lambda2 * 2.0 * (pred.beta - gt.beta);
  return g;
}

inline double smooth_l1(double z, const SmoothL1Config& cfg = {}) {
  if (!(cfg.sigma > 0.0)) throw ConfigError("smooth-l1 sigma must be positive");
  const double s2 = cfg.sigma * cfg.sigma;
  const double az = std::abs(z);
  return az < 1.0 / s2 ? 0.5 * s2 * z * z : az - 0.5 / s2;
}

inline double smooth_l1_derivative(double z, const SmoothL1Config& cfg = {}) {
  const double s2 = cfg.sigma * cfg.sigma;
  if (std::abs(z) < 1.0 / s2) return s2 * z;
  return z > 0.0 ? 1.0 : -1.0;
}

inline std::array<double, 4> regression_deltas(const AABB& pred, const AABB& gt) {
  if (!(pred.w > 0.0 && pred.h > 0.0 && gt.w > 0.0 && gt.h > 0.0))
    throw DegenerateBox("regression targets need positive width and height");
  return {(gt.cx - pred.cx) / pred.w, (gt.cy - pred.cy) / pred.h, std::log(gt.w / pred.w),
          std::log(gt.h / pred.h)};
}

inline double baseline_reg_loss(const AABB& pred, const AABB& gt, const SmoothL1Config& cfg = {}) {
  double sum = 0.0;
  for (double delta : regression_deltas(pred, gt)) sum += smooth_l1(delta, cfg);
  return sum;
}

inline double smooth_l1_vector(std::span<const double> pred, std::span<const double> gt,
                               const SmoothL1Config& cfg = {}) {
  if (pred.size() != gt.size()) throw ShapeError("smooth_l1_vector: length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += smooth_l1(pred[i] - gt[i], cfg);
  return sum;
}

}  // namespace cltrack
