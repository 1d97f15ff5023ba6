#pragma once

// Text formats:
//   groundtruth.txt  one box per line, either 8 reals "x1,y1,x2,y2,x3,y3,x4,y4"
//                    or 4 reals "left,top,width,height"; LF or CRLF
//   predictions      one box per line, "x1,y1,x2,y2,beta" with 6 decimals, LF

#include <charconv>
#include <cmath>
#include <initializer_list>
#include <cstdio>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cltrack/error.hpp"
#include "cltrack/geometry.hpp"

namespace cltrack {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<double> split_reals(std::string_view line, std::size_t line_no) {
  std::vector<double> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    const auto field = trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    double v = 0.0;
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    if (!field.empty() && *first == '+') ++first;
    const auto res = std::from_chars(first, last, v);
    if (field.empty() || res.ec != std::errc() || res.ptr != last || !std::isfinite(v))
      throw ParseError("expected a real number, got '" + std::string(field) + "'", line_no);
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Calls fn(line_no, values) for each non-empty line; blank lines are allowed only at the end.
template <typename Fn>
void for_each_record(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t blank_at = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty()) {
      if (!blank_at) blank_at = line_no;
      continue;
    }
    if (blank_at) throw ParseError("blank line inside annotation data", blank_at);
    fn(line_no, split_reals(t, line_no));
  }
}

/// Snaps a near-rectangle onto an exact one sharing its centre and the directions of corners 0 and 1.
inline CornerBB rectify(const CornerBB& c) {
  Point2 m{0.0, 0.0};
  for (const auto& p : c.corners) m = m + 0.25 * p;
  const double r = 0.25 * (distance(c.corners[0], c.corners[2]) + distance(c.corners[1], c.corners[3]));
  auto on_circle = [&](Point2 p) {
    const Point2 d = p - m;
    return m + (r / norm(d)) * d;
  };
  const Point2 a = on_circle(c.corners[0]);
  const Point2 b = on_circle(c.corners[1]);
  return {{a, b, 2.0 * m - a, 2.0 * m - b}};
}

inline std::string format_reals(std::initializer_list<double> values) {
  std::string s;
  char buf[64];
  bool first = true;
  for (double v : values) {
    std::snprintf(buf, sizeof buf, "%.6f", v);
    if (std::string_view(buf) == "-0.000000") std::snprintf(buf, sizeof buf, "%.6f", 0.0);
    if (!first) s += ',';
    s += buf;
    first = false;
  }
  return s;
}

}  // namespace detail

inline constexpr double kAnnotationTolerance = 1e-3;

inline CornerBB corners_from_values(std::span<const double> v, std::size_t line_no) {
  if (v.size() == 4) {
    if (!(v[2] > 0.0 && v[3] > 0.0)) throw ParseError("axis-aligned box needs positive width and height", line_no);
    return aabb_to_corners({v[0] + 0.5 * v[2], v[1] + 0.5 * v[3], v[2], v[3]});
  }
  if (v.size() != 8) throw ParseError("expected 4 or 8 values, got " + std::to_string(v.size()), line_no);
  CornerBB c{{Point2{v[0], v[1]}, Point2{v[2], v[3]}, Point2{v[4], v[5]}, Point2{v[6], v[7]}}};
  c = with_canonical_winding(c);
  try {
    validate(c);
    return c;
  } catch (const NotARectangle&) {
  } catch (const DegenerateBox&) {
    throw NotARectangle("zero-area annotation", line_no);
  }
  try {
    validate(c, kAnnotationTolerance);
  } catch (const Error&) {
    throw NotARectangle("corners do not form a rectangle", line_no);
  }
  return detail::rectify(c);
}

inline std::vector<CornerBB> parse_vot_groundtruth(std::istream& in) {
  std::vector<CornerBB> boxes;
  detail::for_each_record(in, [&](std::size_t line_no, const std::vector<double>& v) {
    boxes.push_back(corners_from_values(v, line_no));
  });
  return boxes;
}

inline std::vector<CornerBB> parse_vot_groundtruth(const std::string& text) {
  std::istringstream in(text);
  return parse_vot_groundtruth(in);
}

inline std::string serialize_groundtruth(std::span<const CornerBB> boxes) {
  std::string out;
  for (const auto& b : boxes) {
    const auto& k = b.corners;
    out += detail::format_reals({k[0].x, k[0].y, k[1].x, k[1].y, k[2].x, k[2].y, k[3].x, k[3].y});
    out += '\n';
  }
  return out;
}

inline std::string serialize_predictions(std::span<const FiveBB> boxes) {
  std::string out;
  for (const auto& b : boxes) {
    out += detail::format_reals({b.p1.x, b.p1.y, b.p2.x, b.p2.y, b.beta});
    out += '\n';
  }
  return out;
}

inline std::vector<FiveBB> parse_predictions(std::istream& in) {
  std::vector<FiveBB> boxes;
  detail::for_each_record(in, [&](std::size_t line_no, const std::vector<double>& v) {
    if (v.size() != 5) throw ParseError("expected 5 values, got " + std::to_string(v.size()), line_no);
    FiveBB b{{v[0], v[1]}, {v[2], v[3]}, v[4]};
    try {
      validate(b);
    } catch (const DegenerateBox& e) {
      throw ParseError(e.what(), line_no);
    }
    boxes.push_back(b);
  });
  return boxes;
}

inline std::vector<FiveBB> parse_predictions(const std::string& text) {
  std::istringstream in(text);
  return parse_predictions(in);
}

}  // namespace cltrack
