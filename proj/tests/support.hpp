#pragma once

// Hand-rolled generators and small helpers shared by the test binaries.

#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "cltrack.hpp"

namespace testing_support {

using namespace cltrack;

inline Point2 random_point(Rng& rng, double lo = -50.0, double hi = 50.0) {
  return {rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

/// A valid box with a diagonal of at least min_diag and beta away from 0 and 1.
inline FiveBB random_box(Rng& rng, double min_diag = 1.0, double spread = 50.0) {
  const Point2 p1 = random_point(rng, -spread, spread);
  const double len = rng.uniform(min_diag, min_diag + spread);
  const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return {p1, p1 + Point2{len * std::cos(ang), len * std::sin(ang)}, rng.uniform(0.05, 0.95)};
}

inline Circle random_circle(Rng& rng) { return {random_point(rng, -3.0, 3.0), rng.uniform(0.2, 3.0)}; }

/// Rotation by `angle` about the origin (standard matrix, any orientation will do for invariance tests).
inline Point2 similarity(Point2 p, double angle, double s, Point2 t) {
  const double c = std::cos(angle), n = std::sin(angle);
  return Point2{s * (c * p.x - n * p.y), s * (n * p.x + c * p.y)} + t;
}

inline FiveBB similarity(const FiveBB& b, double angle, double s, Point2 t) {
  return {similarity(b.p1, angle, s, t), similarity(b.p2, angle, s, t), b.beta};
}

inline CornerBB similarity(const CornerBB& b, double angle, double s, Point2 t) {
  CornerBB out = b;
  for (auto& p : out.corners) p = similarity(p, angle, s, t);
  return out;
}

inline CornerBB square(double x0, double y0, double side) { return aabb_to_corners({x0 + side / 2, y0 + side / 2, side, side}); }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("cltrack-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

inline CliResult run_tool(std::vector<std::string> args) {
  args.insert(args.begin(), "cltrack");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

}  // namespace testing_support
