#include "fpplab/path_obs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fpplab {

double transversal_fluctuation(const Geodesic& g) {
  if (g.vertices.size() < 2) throw std::invalid_argument("transversal_fluctuation: too few vertices");
  const Point& u = g.vertices.front();
  const Point& v = g.vertices.back();
  if ((u - v).norm() == 0.0)
    throw std::invalid_argument("transversal_fluctuation: degenerate endpoints");
  double best = 0.0;
  for (std::size_t i = 0; i < g.vertices.size(); ++i) {
    best = std::max(best, point_line_distance(g.vertices[i], u, v));
    if (i > 0) {
      Point mid = 0.5 * (g.vertices[i - 1] + g.vertices[i]);
      best = std::max(best, point_line_distance(mid, u, v));
    }
  }
  return best;
}

Point point_along(const Geodesic& g, double t) {
  if (g.vertices.empty()) throw std::invalid_argument("point_along: empty path");
  if (t <= 0) return g.vertices.front();
  if (t >= 1) return g.vertices.back();
  double total = 0;
  for (std::size_t i = 1; i < g.vertices.size(); ++i)
    total += (g.vertices[i] - g.vertices[i - 1]).norm();
  if (total == 0) return g.vertices.front();
  double want = t * total, acc = 0;
  for (std::size_t i = 1; i < g.vertices.size(); ++i) {
    double len = (g.vertices[i] - g.vertices[i - 1]).norm();
    if (acc + len >= want) {
      double s = len == 0 ? 0 : (want - acc) / len;
      return g.vertices[i - 1] + s * (g.vertices[i] - g.vertices[i - 1]);
    }
    acc += len;
  }
  return g.vertices.back();
}

CrossingProfile crossing_profile(const Geodesic& g, double n, int M, double W) {
  if (g.vertices.size() < 2) throw std::invalid_argument("crossing_profile: too few vertices");
  CrossingProfile out;
  for (int i = 1; i <= M - 1; ++i) {
    double X = i * n;
    bool found = false;
    double height = 0;
    for (std::size_t e = 1; e < g.vertices.size() && !found; ++e) {
      const Point& a = g.vertices[e - 1];
      const Point& b = g.vertices[e];
      if (a.x() == X) {
        height = a.y();
        found = true;
      } else if ((a.x() - X) * (b.x() - X) <= 0 && a.x() != b.x()) {
        double s = (X - a.x()) / (b.x() - a.x());
        height = a.y() + s * (b.y() - a.y());
        found = true;
      }
    }
    if (!found && g.vertices.back().x() == X) {
      height = g.vertices.back().y();
      found = true;
    }
    if (!found) throw std::invalid_argument("crossing_profile: path does not span line");
    out.lines_x.push_back(X);
    out.heights.push_back(height);
    out.k_indices.push_back(static_cast<long>(std::floor(height / W)));
  }
  return out;
}

double tau1_of_profile(const Geodesic& g, const CrossingProfile& p, double W) {
  long k_prev = static_cast<long>(std::floor(g.vertices.front().y() / W));
  double tau = 0;
  for (long k : p.k_indices) {
    tau += std::abs(k - k_prev);
    k_prev = k;
  }
  long k_end = static_cast<long>(std::floor(g.vertices.back().y() / W));
  tau += std::abs(k_end - k_prev);
  return tau;
}

namespace {

std::vector<Point> sample_segment(const Point& a, const Point& b, double step, int cap) {
  double len = (b - a).norm();
  int ns = static_cast<int>(std::floor(len / step + 1e-12)) + 1;
  if (cap > 0) ns = std::min(ns, cap);
  std::vector<Point> out;
  if (ns <= 1) {
    out.push_back(0.5 * (a + b));
    return out;
  }
  for (int i = 0; i < ns; ++i) out.push_back(a + (static_cast<double>(i) / (ns - 1)) * (b - a));
  return out;
}

}  // namespace

ModelInstance::SideResult corridor_passage(const ModelInstance& m, const CorridorQuery& q) {
  if (!(q.side_sample_step > 0)) throw std::invalid_argument("corridor_passage: bad sample step");
  Point l0{0, 0}, l1{0, 0}, r0{0, 0}, r1{0, 0};
  if (q.rect) {
    l0 = {q.rect->x0, q.rect->y0};
    l1 = {q.rect->x0, q.rect->y1};
    r0 = {q.rect->x1, q.rect->y0};
    r1 = {q.rect->x1, q.rect->y1};
  } else if (q.para) {
    l0 = q.para->left_side(0);
    l1 = q.para->left_side(1);
    r0 = q.para->right_side(0);
    r1 = q.para->right_side(1);
  } else {
    throw std::invalid_argument("corridor_passage: no region");
  }
  int cap = (q.mode == CorridorQuery::Mode::max) ? 16 : 0;
  auto left = sample_segment(l0, l1, q.side_sample_step, cap);
  auto right = sample_segment(r0, r1, q.side_sample_step, cap);
  return m.side_to_side(left, right, q.mode == CorridorQuery::Mode::max);
}

double gamma_defect(const ModelInstance& m, const Geodesic& g,
                    const std::vector<double>& breakpoints) {
  if (breakpoints.empty()) return 0.0;
  for (std::size_t i = 0; i < breakpoints.size(); ++i) {
    if (!(breakpoints[i] > 0 && breakpoints[i] < 1))
      throw std::invalid_argument("gamma_defect: breakpoint outside (0,1)");
    if (i > 0 && !(breakpoints[i] > breakpoints[i - 1]))
      throw std::invalid_argument("gamma_defect: breakpoints must be strictly increasing");
  }
  std::vector<Point> w;
  w.push_back(g.vertices.front());
  for (double t : breakpoints) w.push_back(point_along(g, t));
  w.push_back(g.vertices.back());
  double sum = 0;
  for (std::size_t i = 1; i < w.size(); ++i) sum += m.passage(w[i - 1], w[i]).passage_time;
  return (sum - g.passage_time) / static_cast<double>(breakpoints.size());
}

double local_tf_audit(const ModelInstance& m, double n, double M, double y1, double y2) {
  if (!(M >= 1.5)) throw std::invalid_argument("local_tf_audit: require M >= 3/2");
  Geodesic g = m.passage({0, y1}, {M * n, y2});
  CrossingProfile p = crossing_profile(g, n, 2, 1.0);
  return p.heights.front();
}

}  // namespace fpplab
