#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "stomakit/rotated_box.hpp"

namespace stomakit::geom {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Convex polygon, counter-clockwise vertex order; empty or >= 3 vertices.
// Collinear vertices are permitted (they do not change the area).
struct Polygon {
  std::vector<Point> vertices;

  bool empty() const { return vertices.empty(); }
};

// Epsilon for point-side tests in the clipper. Vertices within this band of
// a clip edge count as inside.
inline constexpr double kClipEps = 1e-12;

// Corner expansion, counter-clockwise starting from +w/2,+h/2 in box frame.
// The centroid of the result equals (cx, cy).
inline Polygon corners(const RotatedBox& b) {
  const double c = std::cos(b.angle);
  const double s = std::sin(b.angle);
  const double ux = 0.5 * b.w * c, uy = 0.5 * b.w * s;
  const double vx = -0.5 * b.h * s, vy = 0.5 * b.h * c;
  Polygon p;
  p.vertices = {
      {b.cx + ux + vx, b.cy + uy + vy},
      {b.cx - ux + vx, b.cy - uy + vy},
      {b.cx - ux - vx, b.cy - uy - vy},
      {b.cx + ux - vx, b.cy + uy - vy},
  };
  return p;
}

// Shoelace area; zero for the empty polygon. Inputs are CCW so the signed
// sum is nonnegative.
inline double area(const Polygon& p) {
  const auto& v = p.vertices;
  if (v.size() < 3) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    sum += v[j].x * v[i].y - v[i].x * v[j].y;
  }
  return 0.5 * sum;
}

namespace detail {

inline double side_of(const Point& a, const Point& b, const Point& p) {
  return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
}

inline Point edge_intersection(const Point& p, const Point& q, double dp,
                               double dq) {
  const double t = dp / (dp - dq);
  return {p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
}

}  // namespace detail

// Sutherland-Hodgman on convex CCW inputs. The intersection of two convex
// polygons is convex; an empty result is valid.
inline Polygon clip_convex(const Polygon& subject, const Polygon& clip) {
  std::vector<Point> out = subject.vertices;
  const auto& cv = clip.vertices;
  if (cv.size() < 3) return {};
  for (std::size_t e = 0; e < cv.size() && !out.empty(); ++e) {
    const Point a = cv[e];
    const Point b = cv[(e + 1) % cv.size()];
    std::vector<Point> in;
    in.swap(out);
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Point& p = in[i];
      const Point& q = in[(i + 1) % in.size()];
      const double dp = detail::side_of(a, b, p);
      const double dq = detail::side_of(a, b, q);
      const bool p_in = dp >= -kClipEps;
      const bool q_in = dq >= -kClipEps;
      if (p_in) out.push_back(p);
      if (p_in != q_in) out.push_back(detail::edge_intersection(p, q, dp, dq));
    }
  }
  if (out.size() < 3) out.clear();
  return {std::move(out)};
}

// Intersection-over-union of two rotated rectangles via polygon clipping.
// Symmetric, in [0, 1]. Both areas come from the same shoelace route as the
// intersection, so identical boxes yield exactly 1. Two zero-area inputs
// give 0.
inline double rotated_iou(const RotatedBox& a, const RotatedBox& b) {
  const Polygon pa = corners(a);
  const Polygon pb = corners(b);
  const double area_a = area(pa);
  const double area_b = area(pb);
  const double inter = area(clip_convex(pa, pb));
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

// Point-in-rotated-rectangle test in the box frame.
inline bool contains_point(const RotatedBox& b, double px, double py,
                           bool strict = false) {
  const double c = std::cos(b.angle);
  const double s = std::sin(b.angle);
  const double dx = px - b.cx;
  const double dy = py - b.cy;
  const double u = std::abs(dx * c + dy * s);
  const double v = std::abs(-dx * s + dy * c);
  if (strict) return u < 0.5 * b.w && v < 0.5 * b.h;
  return u <= 0.5 * b.w && v <= 0.5 * b.h;
}

}  // namespace stomakit::geom
