#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "fpplab/delaunay.hpp"
#include "fpplab/rng.hpp"

using namespace fpplab;

namespace {

struct Circum {
  Point c;
  double r2;
  bool ok;
};

Circum circumcircle(const Point& a, const Point& b, const Point& c) {
  Point u = b - a, v = c - a;
  double det = 2.0 * (u.x() * v.y() - u.y() * v.x());
  if (std::abs(det) < 1e-14) return {Point{0, 0}, 0, false};
  double u2 = u.squaredNorm(), v2 = v.squaredNorm();
  Point cc = a + Point{(v.y() * u2 - u.y() * v2) / det, (u.x() * v2 - v.x() * u2) / det};
  return {cc, (cc - a).squaredNorm(), true};
}

// Edge (i,j) belongs to the Delaunay graph iff some circumdisk through i, j
// and a third point contains no other point strictly inside.
bool edge_oracle(const std::vector<Point>& pts, int i, int j) {
  int n = static_cast<int>(pts.size());
  if (n == 2) return true;
  for (int k = 0; k < n; ++k) {
    if (k == i || k == j) continue;
    Circum cc = circumcircle(pts[i], pts[j], pts[k]);
    if (!cc.ok) continue;
    bool empty = true;
    for (int l = 0; l < n && empty; ++l) {
      if (l == i || l == j || l == k) continue;
      if ((pts[l] - cc.c).squaredNorm() < cc.r2 * (1 - 1e-12)) empty = false;
    }
    if (empty) return true;
  }
  return false;
}

std::vector<Point> random_points(int n, std::uint64_t seed, double span) {
  rng::Stream g(seed);
  std::vector<Point> pts;
  for (int i = 0; i < n; ++i)
    pts.push_back({rng::uniform(g, 0, span), rng::uniform(g, 0, span)});
  return pts;
}

std::vector<double> random_tiebreaks(int n, std::uint64_t seed) {
  rng::Stream g(seed);
  std::vector<double> tb(n);
  for (double& t : tb) t = rng::uniform(g);
  return tb;
}

}  // namespace

TEST_CASE("edges match the empty-circumdisk oracle on random sets") {
  for (int trial = 0; trial < 30; ++trial) {
    int n = 5 + trial % 16;
    auto pts = random_points(n, 100 + trial, 10.0);
    Delaunay d(pts, random_tiebreaks(n, 200 + trial));
    const auto& adj = d.neighbors();
    REQUIRE(static_cast<int>(adj.size()) == n);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        bool have = std::binary_search(adj[i].begin(), adj[i].end(), j);
        bool want = edge_oracle(pts, i, j);
        CHECK(have == want);
      }
      // symmetry of adjacency
      for (int j : adj[i]) {
        CHECK(std::binary_search(adj[j].begin(), adj[j].end(), i));
        CHECK(j != i);
      }
    }
  }
}

TEST_CASE("triangles have empty circumcircles") {
  for (int trial = 0; trial < 10; ++trial) {
    int n = 40 + 10 * trial;
    auto pts = random_points(n, 7000 + trial, 20.0);
    Delaunay d(pts, random_tiebreaks(n, 8000 + trial));
    for (const auto& t : d.triangles()) {
      Circum cc = circumcircle(pts[t[0]], pts[t[1]], pts[t[2]]);
      REQUIRE(cc.ok);
      for (int l = 0; l < n; ++l) {
        if (l == t[0] || l == t[1] || l == t[2]) continue;
        CHECK((pts[l] - cc.c).squaredNorm() >= cc.r2 * (1 - 1e-9));
      }
    }
  }
}

TEST_CASE("cocircular grid is triangulated consistently") {
  // 4x4 integer grid: every unit square is a cocircular quadruple
  std::vector<Point> pts;
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) pts.push_back({static_cast<double>(i), static_cast<double>(j)});
  Delaunay d(pts, random_tiebreaks(16, 55));

  // Euler count: 2n - 2 - h triangles for n points with h on the hull
  CHECK(d.triangles().size() == 2 * 16 - 2 - 12);

  // no triangle circumdisk strictly contains another point
  for (const auto& t : d.triangles()) {
    Circum cc = circumcircle(pts[t[0]], pts[t[1]], pts[t[2]]);
    REQUIRE(cc.ok);
    for (int l = 0; l < 16; ++l) {
      if (l == t[0] || l == t[1] || l == t[2]) continue;
      CHECK((pts[l] - cc.c).squaredNorm() >= cc.r2 * (1 - 1e-9));
    }
  }

  // every lattice edge of length 1 must be present (diametral disk is empty)
  const auto& adj = d.neighbors();
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) {
      int id = j * 4 + i;
      if (i + 1 < 4) CHECK(std::binary_search(adj[id].begin(), adj[id].end(), id + 1));
      if (j + 1 < 4) CHECK(std::binary_search(adj[id].begin(), adj[id].end(), id + 4));
    }
}

TEST_CASE("triangle count matches Euler formula on random sets") {
  for (int trial = 0; trial < 10; ++trial) {
    int n = 25 + trial * 7;
    auto pts = random_points(n, 300 + trial, 15.0);
    Delaunay d(pts, random_tiebreaks(n, 400 + trial));
    // hull size via gift wrapping
    int start = 0;
    for (int i = 1; i < n; ++i)
      if (pts[i].x() < pts[start].x() || (pts[i].x() == pts[start].x() && pts[i].y() < pts[start].y()))
        start = i;
    int h = 0, cur = start;
    do {
      ++h;
      int next = (cur + 1) % n;
      for (int i = 0; i < n; ++i) {
        if (i == cur) continue;
        double cr = cross2(pts[next] - pts[cur], pts[i] - pts[cur]);
        if (next == cur || cr < 0 ||
            (cr == 0 && (pts[i] - pts[cur]).norm() > (pts[next] - pts[cur]).norm()))
          next = i;
      }
      cur = next;
    } while (cur != start && h < n + 1);
    CHECK(static_cast<int>(d.triangles().size()) == 2 * n - 2 - h);
  }
}
