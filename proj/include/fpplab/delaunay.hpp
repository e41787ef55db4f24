#pragma once

#include <array>
#include <vector>

#include "fpplab/geometry.hpp"

namespace fpplab {

// Incremental Bowyer-Watson triangulation.  The convex hull is closed off by
// three symbolic vertices at infinity, so circumcircle tests against hull
// triangles reduce to orientation tests and no giant super-triangle
// coordinates enter the arithmetic.  Near-degenerate circumcircle tests fall
// back to the per-point tiebreak marks.
class Delaunay {
 public:
  Delaunay(const std::vector<Point>& pts, const std::vector<double>& tiebreaks);

  int size() const { return static_cast<int>(pts_.size()); }
  // Delaunay edges (hull edges included), as sorted neighbor lists per point.
  const std::vector<std::vector<int>>& neighbors() const { return adj_; }
  // Triangles with all-real vertices, each CCW.
  const std::vector<std::array<int, 3>>& triangles() const { return real_tris_; }

 private:
  struct Tri {
    int v[3];
    int n[3];  // neighbor opposite v[i], -1 if none
    bool alive;
  };

  bool is_ghost(int v) const { return v >= static_cast<int>(pts_.size()); }
  Point ghost_dir(int v) const;
  int orient_sign(int a, int b, int c) const;
  bool in_circumcircle(const Tri& t, int p) const;
  int locate(int p, int hint) const;
  int insert(int p, int hint);
  void finalize();

  std::vector<Point> pts_;
  std::vector<double> tb_;
  std::vector<Tri> tris_;
  mutable std::vector<int> stamp_;
  mutable int epoch_ = 0;

  std::vector<std::vector<int>> adj_;
  std::vector<std::array<int, 3>> real_tris_;
};

}  // namespace fpplab
