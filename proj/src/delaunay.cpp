#include "fpplab/delaunay.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace fpplab {

namespace {

int sign_of(long double v) { return v > 0 ? 1 : (v < 0 ? -1 : 0); }

long double cross_ld(const Point& o, const Point& a, const Point& b) {
  long double ax = static_cast<long double>(a.x()) - o.x();
  long double ay = static_cast<long double>(a.y()) - o.y();
  long double bx = static_cast<long double>(b.x()) - o.x();
  long double by = static_cast<long double>(b.y()) - o.y();
  return ax * by - ay * bx;
}

// Standard incircle determinant for CCW triangle (a,b,c); positive iff d
// strictly inside.  Returns the raw value together with an error scale.
long double incircle_ld(const Point& a, const Point& b, const Point& c, const Point& d,
                        long double& scale) {
  long double adx = static_cast<long double>(a.x()) - d.x();
  long double ady = static_cast<long double>(a.y()) - d.y();
  long double bdx = static_cast<long double>(b.x()) - d.x();
  long double bdy = static_cast<long double>(b.y()) - d.y();
  long double cdx = static_cast<long double>(c.x()) - d.x();
  long double cdy = static_cast<long double>(c.y()) - d.y();
  long double ad2 = adx * adx + ady * ady;
  long double bd2 = bdx * bdx + bdy * bdy;
  long double cd2 = cdx * cdx + cdy * cdy;
  long double det = ad2 * (bdx * cdy - bdy * cdx) - bd2 * (adx * cdy - ady * cdx) +
                    cd2 * (adx * bdy - ady * bdx);
  scale = std::abs(ad2 * (bdx * cdy)) + std::abs(ad2 * (bdy * cdx)) +
          std::abs(bd2 * (adx * cdy)) + std::abs(bd2 * (ady * cdx)) +
          std::abs(cd2 * (adx * bdy)) + std::abs(cd2 * (ady * bdx));
  return det;
}

}  // namespace

Point Delaunay::ghost_dir(int v) const {
  // Three directions in CCW order: 90, 210, 330 degrees.
  static const Point dirs[3] = {
      {0.0, 1.0}, {-0.8660254037844386, -0.5}, {0.8660254037844386, -0.5}};
  return dirs[v - static_cast<int>(pts_.size())];
}

int Delaunay::orient_sign(int a, int b, int c) const {
  // Rotate cyclically so ghosts come last.
  int v[3] = {a, b, c};
  for (int r = 0; r < 3 && (is_ghost(v[0]) && (!is_ghost(v[1]) || !is_ghost(v[2]))); ++r) {
    int t = v[0];
    v[0] = v[1];
    v[1] = v[2];
    v[2] = t;
  }
  int ghosts = is_ghost(v[0]) + is_ghost(v[1]) + is_ghost(v[2]);
  if (ghosts == 0) {
    long double s = cross_ld(pts_[v[0]], pts_[v[1]], pts_[v[2]]);
    return sign_of(s);
  }
  if (ghosts == 1) {
    // (A, B, ghost d): sign of cross(B-A, d); secondary term breaks exact zeros.
    if (is_ghost(v[1])) {  // order became (B, ghost, A); rotate once more
      int t = v[0];
      v[0] = v[2];
      v[2] = v[1];
      v[1] = t;
    }
    Point A = pts_[v[0]], B = pts_[v[1]], d = ghost_dir(v[2]);
    long double s = (static_cast<long double>(B.x()) - A.x()) * d.y() -
                    (static_cast<long double>(B.y()) - A.y()) * d.x();
    if (s != 0) return sign_of(s);
    long double s2 = -((static_cast<long double>(B.x()) - A.x()) * A.y() -
                       (static_cast<long double>(B.y()) - A.y()) * A.x());
    return sign_of(s2);
  }
  if (ghosts == 2) {
    Point d1 = ghost_dir(v[1]), d2 = ghost_dir(v[2]);
    return sign_of(static_cast<long double>(d1.x()) * d2.y() -
                   static_cast<long double>(d1.y()) * d2.x());
  }
  return 1;
}

bool Delaunay::in_circumcircle(const Tri& t, int p) const {
  int v[3] = {t.v[0], t.v[1], t.v[2]};
  // Ensure ghosts occupy trailing slots via cyclic rotation.
  for (int r = 0; r < 3; ++r) {
    bool ok;
    int g = is_ghost(v[0]) + is_ghost(v[1]) + is_ghost(v[2]);
    if (g == 1)
      ok = is_ghost(v[2]);
    else if (g == 2)
      ok = !is_ghost(v[0]);
    else
      ok = true;
    if (ok) break;
    int tmp = v[0];
    v[0] = v[1];
    v[1] = v[2];
    v[2] = tmp;
  }
  int ghosts = is_ghost(v[0]) + is_ghost(v[1]) + is_ghost(v[2]);
  const Point& D = pts_[p];
  if (ghosts == 0) {
    const Point& A = pts_[v[0]];
    const Point& B = pts_[v[1]];
    const Point& C = pts_[v[2]];
    long double scale;
    long double det = incircle_ld(A, B, C, D, scale);
    long double err = scale * 1e-17L;
    if (det > err) return true;
    if (det < -err) return false;
    // Cocircular within precision.  Perturb the lifted coordinates to
    // z_i = |p_i|^2 - eps*tb_i; to first order in eps the determinant becomes
    // -eps * (tb_a*o(dbc) - tb_b*o(dac) + tb_c*o(dab) - tb_d*o(abc)), which is
    // the incircle rule of a genuine (regular) triangulation, so cavities stay
    // consistent across queries.
    long double oa = cross_ld(D, B, C);
    long double ob = cross_ld(D, A, C);
    long double oc = cross_ld(D, A, B);
    long double od = cross_ld(A, B, C);
    long double pert = static_cast<long double>(tb_[v[0]]) * oa -
                       static_cast<long double>(tb_[v[1]]) * ob +
                       static_cast<long double>(tb_[v[2]]) * oc -
                       static_cast<long double>(tb_[p]) * od;
    if (pert != 0) return pert < 0;
    return false;  // fully degenerate (collinear quadruple): stay out
  }
  if (ghosts == 1) {
    const Point& A = pts_[v[0]];
    const Point& B = pts_[v[1]];
    long double s = cross_ld(A, B, D);
    if (s != 0) return s > 0;
    // p on the line through hull edge AB.  The limit of a circle through A, B
    // and a point at infinity meets that line only at A and B, so p conflicts
    // exactly when it lies strictly inside the segment.
    long double ux = static_cast<long double>(B.x()) - A.x();
    long double uy = static_cast<long double>(B.y()) - A.y();
    long double t = (static_cast<long double>(D.x()) - A.x()) * ux +
                    (static_cast<long double>(D.y()) - A.y()) * uy;
    return t > 0 && t < ux * ux + uy * uy;
  }
  if (ghosts == 2) {
    Point A = pts_[v[0]];
    Point d1 = ghost_dir(v[1]), d2 = ghost_dir(v[2]);
    long double s = (static_cast<long double>(A.x()) - D.x()) * (d1.y() - d2.y()) -
                    (static_cast<long double>(A.y()) - D.y()) * (d1.x() - d2.x());
    return s >= 0;
  }
  return true;
}

int Delaunay::locate(int p, int hint) const {
  int cur = hint, prev = -1;
  int guard = 4 * static_cast<int>(tris_.size()) + 64;
  while (guard-- > 0) {
    const Tri& t = tris_[cur];
    int next = -1;
    for (int i = 0; i < 3; ++i) {
      int a = t.v[(i + 1) % 3], b = t.v[(i + 2) % 3];
      if (orient_sign(a, b, p) < 0 && t.n[i] != -1 && t.n[i] != prev) {
        next = t.n[i];
        break;
      }
    }
    if (next == -1) return cur;
    prev = cur;
    cur = next;
  }
  // Walk failed to settle (can happen with degenerate input); scan.
  for (int i = 0; i < static_cast<int>(tris_.size()); ++i) {
    if (!tris_[i].alive) continue;
    const Tri& t = tris_[i];
    bool inside = true;
    for (int e = 0; e < 3 && inside; ++e)
      inside = orient_sign(t.v[(e + 1) % 3], t.v[(e + 2) % 3], p) >= 0;
    if (inside) return i;
  }
  throw std::runtime_error("Delaunay: point location failed");
}

int Delaunay::insert(int p, int hint) {
  int t0 = locate(p, hint);

  // Grow the cavity of triangles whose circumcircle contains p.
  ++epoch_;
  std::vector<int> cavity;
  std::vector<int> queue{t0};
  stamp_.resize(tris_.size() + 8, 0);
  stamp_[t0] = epoch_;
  while (!queue.empty()) {
    int ti = queue.back();
    queue.pop_back();
    cavity.push_back(ti);
    for (int i = 0; i < 3; ++i) {
      int nb = tris_[ti].n[i];
      if (nb == -1 || stamp_[nb] == epoch_) continue;
      if (in_circumcircle(tris_[nb], p)) {
        stamp_[nb] = epoch_;
        queue.push_back(nb);
      }
    }
  }

  // Collect boundary edges (oriented CCW as stored in their cavity triangle).
  struct BEdge {
    int a, b, outside;
  };
  std::vector<BEdge> boundary;
  for (int ti : cavity) {
    const Tri& t = tris_[ti];
    for (int i = 0; i < 3; ++i) {
      int nb = t.n[i];
      if (nb != -1 && stamp_[nb] == epoch_) continue;
      boundary.push_back({t.v[(i + 1) % 3], t.v[(i + 2) % 3], nb});
    }
  }
  for (int ti : cavity) tris_[ti].alive = false;

  // Star the cavity from p.
  std::unordered_map<int, int> by_first, by_second;
  by_first.reserve(boundary.size() * 2);
  by_second.reserve(boundary.size() * 2);
  std::vector<int> created;
  created.reserve(boundary.size());
  for (const BEdge& e : boundary) {
    int id;
    Tri nt;
    nt.v[0] = e.a;
    nt.v[1] = e.b;
    nt.v[2] = p;
    nt.n[0] = -1;
    nt.n[1] = -1;
    nt.n[2] = e.outside;
    nt.alive = true;
    id = static_cast<int>(tris_.size());
    tris_.push_back(nt);
    if (e.outside != -1) {
      Tri& ot = tris_[e.outside];
      for (int i = 0; i < 3; ++i) {
        int oa = ot.v[(i + 1) % 3], ob = ot.v[(i + 2) % 3];
        if (oa == e.b && ob == e.a) ot.n[i] = id;
      }
    }
    by_first[e.a] = id;
    by_second[e.b] = id;
    created.push_back(id);
  }
  for (int id : created) {
    Tri& t = tris_[id];
    t.n[0] = by_first.at(t.v[1]);   // shares edge (v1, p)
    t.n[1] = by_second.at(t.v[0]);  // shares edge (p, v0)
  }
  stamp_.resize(tris_.size() + 8, 0);
  return created.empty() ? t0 : created.back();
}

Delaunay::Delaunay(const std::vector<Point>& pts, const std::vector<double>& tiebreaks)
    : pts_(pts), tb_(tiebreaks) {
  if (pts_.empty()) throw std::invalid_argument("Delaunay: empty point set");
  if (tb_.size() != pts_.size()) tb_.assign(pts_.size(), 0.0);

  int n = static_cast<int>(pts_.size());
  int g0 = n, g1 = n + 1, g2 = n + 2;
  Tri root;
  root.v[0] = g0;
  root.v[1] = g1;
  root.v[2] = g2;
  root.n[0] = root.n[1] = root.n[2] = -1;
  root.alive = true;
  tris_.push_back(root);
  stamp_.assign(8, 0);

  // Insert in spatially sorted (snaked row-major) order so walks stay short.
  double minx = pts_[0].x(), miny = pts_[0].y(), maxx = minx, maxy = miny;
  for (const auto& p : pts_) {
    minx = std::min(minx, p.x());
    maxx = std::max(maxx, p.x());
    miny = std::min(miny, p.y());
    maxy = std::max(maxy, p.y());
  }
  double span = std::max({maxx - minx, maxy - miny, 1e-9});
  double cell = std::max(span / std::max(1.0, std::sqrt(static_cast<double>(n))), 1e-9);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  auto key = [&](int i) {
    long row = static_cast<long>((pts_[i].y() - miny) / cell);
    long col = static_cast<long>((pts_[i].x() - minx) / cell);
    if (row & 1) col = static_cast<long>(span / cell) + 2 - col;
    return std::make_tuple(row, col, pts_[i].x(), pts_[i].y(), i);
  };
  std::sort(order.begin(), order.end(), [&](int a, int b) { return key(a) < key(b); });

  int hint = 0;
  for (int idx : order) hint = insert(idx, hint);
  finalize();
}

void Delaunay::finalize() {
  int n = static_cast<int>(pts_.size());
  adj_.assign(n, {});
  for (const Tri& t : tris_) {
    if (!t.alive) continue;
    int ghosts = is_ghost(t.v[0]) + is_ghost(t.v[1]) + is_ghost(t.v[2]);
    if (ghosts == 0) real_tris_.push_back({t.v[0], t.v[1], t.v[2]});
    for (int i = 0; i < 3; ++i) {
      int a = t.v[i], b = t.v[(i + 1) % 3];
      if (!is_ghost(a) && !is_ghost(b)) adj_[a].push_back(b);
    }
  }
  for (auto& nb : adj_) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  // Symmetrize (each undirected edge appears in two triangles normally, but
  // hull edges may be seen from one side only).
  for (int a = 0; a < n; ++a)
    for (int b : adj_[a])
      if (!std::binary_search(adj_[b].begin(), adj_[b].end(), a)) {
        adj_[b].insert(std::lower_bound(adj_[b].begin(), adj_[b].end(), a), a);
      }
}

}  // namespace fpplab
