#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace fpplab {

using Point = Eigen::Vector2d;

struct Rect {
  double x0, x1, y0, y1;

  Rect(double x0_, double x1_, double y0_, double y1_) : x0(x0_), x1(x1_), y0(y0_), y1(y1_) {
    if (!(x0 < x1 && y0 < y1)) throw std::invalid_argument("Rect: degenerate extent");
  }
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  bool contains(const Point& p) const {
    return p.x() >= x0 && p.x() <= x1 && p.y() >= y0 && p.y() <= y1;
  }
  Rect inflated(double dx, double dy) const { return Rect(x0 - dx, x1 + dx, y0 - dy, y1 + dy); }
};

struct VStrip {
  double x0, x1;
  VStrip(double x0_, double x1_) : x0(x0_), x1(x1_) {
    if (!(x0 < x1)) throw std::invalid_argument("VStrip: degenerate extent");
  }
  bool contains(const Point& p) const { return p.x() >= x0 && p.x() <= x1; }
};

// Slanted parallelogram with vertical sides: left side at x=(i-1)*n spanning
// heights [k*W,(k+1)*W], right side at x=i*n spanning [k'*W,(k'+1)*W].
struct Parallelogram {
  int i, k, kp;
  double n, W;
  Parallelogram(int i_, int k_, int kp_, double n_, double W_) : i(i_), k(k_), kp(kp_), n(n_), W(W_) {
    if (!(n > 0 && W > 0)) throw std::invalid_argument("Parallelogram: n and W must be positive");
  }
  double left_x() const { return (i - 1) * n; }
  double right_x() const { return i * n; }
  Point left_side(double t) const { return {left_x(), (k + t) * W}; }    // t in [0,1]
  Point right_side(double t) const { return {right_x(), (kp + t) * W}; }
};

// Nearest integer-coordinate point; ties broken toward the smaller coordinate.
inline Point round_to_lattice(const Point& p) {
  auto round1 = [](double v) {
    double f = std::floor(v);
    return (v - f > 0.5) ? f + 1.0 : f;
  };
  return {round1(p.x()), round1(p.y())};
}

// Two-sided elementary bound on sqrt(n^2+y^2):
//   max{n, n + y^2/2n - y^4/8n^3} <= sqrt(n^2+y^2) <= n + y^2/2n.
inline std::pair<double, double> hypot_bounds(double n, double y) {
  if (!(n > 0)) throw std::invalid_argument("hypot_bounds: n must be positive");
  double y2 = y * y;
  double upper = n + y2 / (2 * n);
  double lower = std::max(n, n + y2 / (2 * n) - y2 * y2 / (8 * n * n * n));
  return {lower, upper};
}

// |e.(w-u)| with e a unit normal to v-u.
inline double point_line_distance(const Point& w, const Point& u, const Point& v) {
  Point d = v - u;
  double len = d.norm();
  if (len == 0.0) throw std::invalid_argument("point_line_distance: degenerate segment");
  Point r = w - u;
  return std::abs(d.x() * r.y() - d.y() * r.x()) / len;
}

inline double cross2(const Point& a, const Point& b) { return a.x() * b.y() - a.y() * b.x(); }

}  // namespace fpplab
