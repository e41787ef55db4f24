#include "fpplab/models.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <queue>

namespace fpplab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct UnionFind {
  std::vector<int> parent, rank_;
  explicit UnionFind(int n) : parent(n), rank_(n, 0) {
    for (int i = 0; i < n; ++i) parent[i] = i;
  }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }
};

struct PQItem {
  double d;
  double len;  // Euclidean tie-break key, secondary to d
  int node;
  bool operator>(const PQItem& o) const {
    if (d != o.d) return d > o.d;
    return len > o.len;
  }
};
using MinPQ = std::priority_queue<PQItem, std::vector<PQItem>, std::greater<PQItem>>;

struct Sweep {
  std::vector<double> dist;
  std::vector<double> len;  // Euclidean length of the chosen path
  std::vector<int> parent;
  std::vector<int> label;  // source index that reached the node
};

struct Source {
  int node;
  double cost;
  int label;
};

}  // namespace

struct ModelInstance::Derived {
  // Voronoi variants
  std::unique_ptr<Delaunay> tri;
  std::vector<std::vector<int>> adj;  // certified Delaunay adjacency
  std::vector<double> node_weight;

  // RGG
  std::vector<int> comp;
  int giant = -1;
  double giant_frac = 0.0;

  // Riemannian
  int nx = 0, ny = 0;
  double h = 0, ox = 0, oy = 0;
  std::vector<double> phi;

  double psi(double t, const RiemannianParams& r) const {
    return r.d1 + (r.d2 - r.d1) / (1.0 + std::exp(-t));
  }
  double phi_at(double x, double y) const {
    double fx = std::clamp((x - ox) / h, 0.0, nx - 1.000001);
    double fy = std::clamp((y - oy) / h, 0.0, ny - 1.000001);
    int i = static_cast<int>(fx), j = static_cast<int>(fy);
    double ax = fx - i, ay = fy - j;
    auto at = [&](int ii, int jj) { return phi[static_cast<std::size_t>(jj) * nx + ii]; };
    return (1 - ax) * (1 - ay) * at(i, j) + ax * (1 - ay) * at(i + 1, j) +
           (1 - ax) * ay * at(i, j + 1) + ax * ay * at(i + 1, j + 1);
  }
  Point node_pos(int idx) const {
    return {ox + (idx % nx) * h, oy + (idx / nx) * h};
  }
  double edge_w(const Point& a, const Point& b, const RiemannianParams& r) const {
    Point mid = 0.5 * (a + b);
    return (a - b).norm() * psi(phi_at(mid.x(), mid.y()), r);
  }
};

// Keep only Delaunay edges witnessed by an empty disk through both sites that
// lies entirely inside the window.  Such an edge is a true cell adjacency of
// the infinite process: no point outside the window could invalidate the
// witness.  Without this filter the truncated triangulation closes its hull
// with long edges joining far-apart boundary cells, which act as cheap
// shortcuts along the window edge.
//
// The empty-disk pencil through an edge is delimited by the circumcenters of
// its (at most two) adjacent triangles; a hull edge is unbounded on the
// outward side.  Disk-in-window feasibility along the pencil reduces to four
// constraints of the form A + B t >= sqrt(e^2 + t^2), each an interval in the
// pencil parameter t.
static void build_certified_adjacency(ModelInstance::Derived& d, const std::vector<Point>& ps,
                                      const Rect& w) {
  d.adj.assign(ps.size(), {});
  double diag = std::hypot(w.width(), w.height());

  struct EdgeInfo {
    double t[2];
    int opp = -1;
    int cnt = 0;
  };
  std::map<std::pair<int, int>, EdgeInfo> edges;
  auto param = [&](int i, int j, const Point& p) {
    Point a = ps[i], b = ps[j];
    Point dv = b - a;
    Point dir{-dv.y(), dv.x()};
    dir /= dv.norm();
    return dir.dot(p - 0.5 * (a + b));
  };
  for (const auto& t : d.tri->triangles()) {
    Point a = ps[t[0]], b = ps[t[1]] - a, c = ps[t[2]] - a;
    double det = 2.0 * (b.x() * c.y() - b.y() * c.x());
    if (det == 0.0) continue;
    double b2 = b.squaredNorm(), c2 = c.squaredNorm();
    Point cc = a + Point{(c.y() * b2 - b.y() * c2) / det, (b.x() * c2 - c.x() * b2) / det};
    for (int e = 0; e < 3; ++e) {
      int p = t[e], q = t[(e + 1) % 3], o = t[(e + 2) % 3];
      auto key = std::minmax(p, q);
      EdgeInfo& ei = edges[{key.first, key.second}];
      if (ei.cnt < 2) ei.t[ei.cnt] = param(key.first, key.second, cc);
      ei.opp = o;
      ++ei.cnt;
    }
  }
  // Make sure every triangulation edge is present; edges without any real
  // adjacent triangle (tiny or collinear point sets) get their pencil bounds
  // from first principles below.
  const auto& nb = d.tri->neighbors();
  for (int i = 0; i < static_cast<int>(nb.size()); ++i)
    for (int j : nb[i])
      if (i < j) edges.try_emplace({i, j});

  for (const auto& [key, ei] : edges) {
    int i = key.first, j = key.second;
    Point a = ps[i], b = ps[j];
    Point dv = b - a;
    double len = dv.norm();
    if (len == 0.0) continue;
    Point dir{-dv.y() / len, dv.x() / len};
    Point mid = 0.5 * (a + b);
    double e = 0.5 * len;

    double lo, hi;
    if (ei.cnt >= 2) {
      lo = std::min(ei.t[0], ei.t[1]);
      hi = std::max(ei.t[0], ei.t[1]);
    } else if (ei.cnt == 1) {
      // unbounded away from the lone opposite vertex
      if (param(i, j, ps[ei.opp]) > 0) {
        lo = -diag;
        hi = ei.t[0];
      } else {
        lo = ei.t[0];
        hi = diag;
      }
    } else {
      // no adjacent triangle: intersect the per-site half-lines directly
      lo = -diag;
      hi = diag;
      for (std::size_t s = 0; s < ps.size() && lo <= hi; ++s) {
        if (static_cast<int>(s) == i || static_cast<int>(s) == j) continue;
        // disk excludes site s iff 2 c(t).(a - s) + |s|^2 - |a|^2 >= 0
        Point am = a - ps[s];
        double slope = 2.0 * dir.dot(am);
        double off = 2.0 * mid.dot(am) + ps[s].squaredNorm() - a.squaredNorm();
        if (slope > 1e-300) {
          lo = std::max(lo, -off / slope);
        } else if (slope < -1e-300) {
          hi = std::min(hi, -off / slope);
        } else if (off < 0) {
          lo = 1;
          hi = 0;
        }
      }
    }

    // containment: A + B t >= sqrt(e^2 + t^2) for each window side
    auto clip = [&](double A, double B) {
      if (lo > hi) return;
      if (std::abs(1.0 - B * B) < 1e-12) {
        if (A <= 0) {
          lo = 1;
          hi = 0;
          return;
        }
        double bound = (e * e - A * A) / (2 * A);
        if (B > 0)
          lo = std::max(lo, bound);
        else
          hi = std::min(hi, -bound);
        return;
      }
      double disc = A * A - e * e * (1.0 - B * B);
      if (A <= 0 || disc < 0) {
        lo = 1;
        hi = 0;
        return;
      }
      double s = std::sqrt(disc);
      lo = std::max(lo, (A * B - s) / (1.0 - B * B));
      hi = std::min(hi, (A * B + s) / (1.0 - B * B));
    };
    clip(mid.x() - w.x0, dir.x());
    clip(w.x1 - mid.x(), -dir.x());
    clip(mid.y() - w.y0, dir.y());
    clip(w.y1 - mid.y(), -dir.y());
    if (lo > hi) continue;

    // numeric re-check of the witness disk at the interval midpoint
    double t = 0.5 * (lo + hi);
    Point c = mid + t * dir;
    double r = std::sqrt(e * e + t * t);
    double tol = 1e-9 * (1.0 + r);
    if (c.x() - r < w.x0 - tol || c.x() + r > w.x1 + tol || c.y() - r < w.y0 - tol ||
        c.y() + r > w.y1 + tol)
      continue;
    d.adj[i].push_back(j);
    d.adj[j].push_back(i);
  }
  for (auto& v : d.adj) std::sort(v.begin(), v.end());
}

ModelInstance::ModelInstance(ModelSpec spec, FieldRealization field, double safety_margin)
    : spec_(spec),
      field_(std::make_shared<FieldRealization>(std::move(field))),
      margin_(safety_margin) {
  spec_.validate();
  auto d = std::make_shared<Derived>();
  const auto& f = *field_;
  const auto& pts = f.points();

  switch (spec_.kind) {
    case ModelKind::voronoi:
    case ModelKind::voronoi_weighted: {
      std::vector<Point> ps(pts.size());
      std::vector<double> tb(pts.size());
      d->node_weight.resize(pts.size());
      for (std::size_t i = 0; i < pts.size(); ++i) {
        ps[i] = pts[i].pos;
        tb[i] = pts[i].tiebreak;
        d->node_weight[i] = (spec_.kind == ModelKind::voronoi) ? 1.0 : pts[i].mark;
      }
      d->tri = std::make_unique<Delaunay>(ps, tb);
      build_certified_adjacency(*d, ps, f.spec().window);
      break;
    }
    case ModelKind::howard_newman:
      break;
    case ModelKind::rgg: {
      int n = static_cast<int>(pts.size());
      if (n == 0) throw SubcriticalWindow("rgg: empty field");
      UnionFind uf(n);
      double L = spec_.rgg_threshold;
      for (int i = 0; i < n; ++i)
        for (int j : f.points_within(pts[i].pos, L))
          if (j > i) uf.unite(i, j);
      d->comp.resize(n);
      std::vector<int> count(n, 0);
      for (int i = 0; i < n; ++i) {
        d->comp[i] = uf.find(i);
        ++count[d->comp[i]];
      }
      int giant = 0;
      for (int i = 1; i < n; ++i)
        if (count[i] > count[giant]) giant = i;
      d->giant = giant;
      d->giant_frac = static_cast<double>(count[giant]) / n;
      if (d->giant_frac < 0.25)
        throw SubcriticalWindow("rgg: giant component below 25% of points");
      break;
    }
    case ModelKind::riemannian: {
      const Rect& w = f.spec().window;
      d->h = spec_.riem.grid_step;
      d->ox = w.x0;
      d->oy = w.y0;
      d->nx = static_cast<int>(std::floor(w.width() / d->h + 1e-9)) + 1;
      d->ny = static_cast<int>(std::floor(w.height() / d->h + 1e-9)) + 1;
      d->phi.resize(static_cast<std::size_t>(d->nx) * d->ny);
      for (int j = 0; j < d->ny; ++j)
        for (int i = 0; i < d->nx; ++i)
          d->phi[static_cast<std::size_t>(j) * d->nx + i] =
              f.smoothed_value({d->ox + i * d->h, d->oy + j * d->h}, spec_.riem.kernel);
      break;
    }
  }
  der_ = std::move(d);
}

void ModelInstance::check_endpoint(const Point& p) const {
  const Rect& w = field_->spec().window;
  if (p.x() < w.x0 + margin_ || p.x() > w.x1 - margin_ || p.y() < w.y0 + margin_ ||
      p.y() > w.y1 - margin_)
    throw WindowViolation("endpoint outside safe window");
}

double ModelInstance::giant_fraction() const { return der_->giant_frac; }

const std::vector<std::vector<int>>& ModelInstance::delaunay_neighbors() const {
  return der_->adj;
}

namespace {

// Node-weighted Dijkstra over explicit adjacency (Voronoi models).  Costs are
// frequently tied (all-ones weights), so among equal-cost paths the one with
// the smallest Euclidean length between cell sites wins; this pins down a
// canonical geodesic instead of an arbitrary tie order.
Sweep dijkstra_adj(const std::vector<std::vector<int>>& adj, const std::vector<double>& w,
                   const std::vector<FieldPoint>& pts, const std::vector<Source>& sources,
                   const std::vector<int>& targets) {
  int n = static_cast<int>(adj.size());
  Sweep s{std::vector<double>(n, kInf), std::vector<double>(n, kInf), std::vector<int>(n, -1),
          std::vector<int>(n, -1)};
  MinPQ pq;
  for (const auto& src : sources) {
    if (src.cost < s.dist[src.node] || (src.cost == s.dist[src.node] && 0.0 < s.len[src.node])) {
      s.dist[src.node] = src.cost;
      s.len[src.node] = 0.0;
      s.label[src.node] = src.label;
      pq.push({src.cost, 0.0, src.node});
    }
  }
  std::vector<char> want(n, 0);
  int remaining = 0;
  for (int t : targets)
    if (!want[t]) {
      want[t] = 1;
      ++remaining;
    }
  std::vector<char> done(n, 0);
  while (!pq.empty()) {
    auto [dd, dl, u] = pq.top();
    pq.pop();
    if (done[u]) continue;
    done[u] = 1;
    if (want[u] && --remaining == 0) break;
    for (int v : adj[u]) {
      double nd = dd + w[v];
      double nl = dl + (pts[v].pos - pts[u].pos).norm();
      if (nd < s.dist[v] || (nd == s.dist[v] && nl < s.len[v])) {
        s.dist[v] = nd;
        s.len[v] = nl;
        s.parent[v] = u;
        s.label[v] = s.label[u];
        pq.push({nd, nl, v});
      }
    }
  }
  return s;
}

}  // namespace

// Edge-weighted Dijkstra over the implicit proximity graph (Howard-Newman).
static Sweep dijkstra_hn(const FieldRealization& f, double beta, double r_cut,
                         const std::vector<Source>& sources, const std::vector<int>& targets) {
  const auto& pts = f.points();
  int n = static_cast<int>(pts.size());
  Sweep s{std::vector<double>(n, kInf), std::vector<double>(n, kInf), std::vector<int>(n, -1),
          std::vector<int>(n, -1)};
  MinPQ pq;
  for (const auto& src : sources) {
    if (src.cost < s.dist[src.node]) {
      s.dist[src.node] = src.cost;
      s.len[src.node] = 0.0;
      s.label[src.node] = src.label;
      pq.push({src.cost, 0.0, src.node});
    }
  }
  std::vector<char> want(n, 0);
  int remaining = 0;
  for (int t : targets)
    if (!want[t]) {
      want[t] = 1;
      ++remaining;
    }
  std::vector<char> done(n, 0);
  while (!pq.empty()) {
    auto [dd, dl, u] = pq.top();
    pq.pop();
    if (done[u]) continue;
    done[u] = 1;
    if (want[u] && --remaining == 0) break;
    for (int v : f.points_within(pts[u].pos, r_cut)) {
      if (v == u) continue;
      double step = (pts[v].pos - pts[u].pos).norm();
      double nd = dd + std::pow(step, beta);
      if (nd < s.dist[v]) {
        s.dist[v] = nd;
        s.len[v] = dl + step;
        s.parent[v] = u;
        s.label[v] = s.label[u];
        pq.push({nd, s.len[v], v});
      }
    }
  }
  return s;
}

// Hop-count shortest paths; many paths tie, so the Euclidean length of the
// chain breaks ties exactly as in dijkstra_adj (hop counts are exact ints).
static Sweep bfs_rgg(const FieldRealization& f, double L, const std::vector<int>& comp, int giant,
                     const std::vector<Source>& sources) {
  const auto& pts = f.points();
  int n = static_cast<int>(pts.size());
  Sweep s{std::vector<double>(n, kInf), std::vector<double>(n, kInf), std::vector<int>(n, -1),
          std::vector<int>(n, -1)};
  MinPQ pq;
  for (const auto& src : sources) {
    if (src.cost < s.dist[src.node] || (src.cost == s.dist[src.node] && 0.0 < s.len[src.node])) {
      s.dist[src.node] = src.cost;
      s.len[src.node] = 0.0;
      s.label[src.node] = src.label;
      pq.push({src.cost, 0.0, src.node});
    }
  }
  std::vector<char> done(n, 0);
  while (!pq.empty()) {
    auto [dd, dl, u] = pq.top();
    pq.pop();
    if (done[u]) continue;
    done[u] = 1;
    for (int v : f.points_within(pts[u].pos, L)) {
      if (v == u || comp[v] != giant) continue;
      double nd = dd + 1;
      double nl = dl + (pts[v].pos - pts[u].pos).norm();
      if (nd < s.dist[v] || (nd == s.dist[v] && nl < s.len[v])) {
        s.dist[v] = nd;
        s.len[v] = nl;
        s.parent[v] = u;
        s.label[v] = s.label[u];
        pq.push({nd, nl, v});
      }
    }
  }
  return s;
}

// Dijkstra over the Psi grid graph (Riemannian).
static Sweep dijkstra_grid(const ModelInstance::Derived& d, const RiemannianParams& rp,
                           const std::vector<Source>& sources) {
  int n = d.nx * d.ny;
  Sweep s{std::vector<double>(n, kInf), std::vector<double>(n, kInf), std::vector<int>(n, -1),
          std::vector<int>(n, -1)};
  static const int off8[8][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1},
                                 {1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
  static const int off16[8][2] = {{1, 2}, {2, 1}, {-1, 2}, {-2, 1},
                                  {1, -2}, {2, -1}, {-1, -2}, {-2, -1}};
  int extra = (rp.connectivity == 16) ? 8 : 0;
  MinPQ pq;
  for (const auto& src : sources) {
    if (src.cost < s.dist[src.node]) {
      s.dist[src.node] = src.cost;
      s.len[src.node] = 0.0;
      s.label[src.node] = src.label;
      pq.push({src.cost, 0.0, src.node});
    }
  }
  std::vector<char> done(n, 0);
  while (!pq.empty()) {
    auto [dd, dl, u] = pq.top();
    pq.pop();
    if (done[u]) continue;
    done[u] = 1;
    int ui = u % d.nx, uj = u / d.nx;
    Point pu = d.node_pos(u);
    auto relax = [&](int vi, int vj) {
      if (vi < 0 || vi >= d.nx || vj < 0 || vj >= d.ny) return;
      int v = vj * d.nx + vi;
      Point pv = d.node_pos(v);
      double nd = dd + d.edge_w(pu, pv, rp);
      double nl = dl + (pv - pu).norm();
      if (nd < s.dist[v] || (nd == s.dist[v] && nl < s.len[v])) {
        s.dist[v] = nd;
        s.len[v] = nl;
        s.parent[v] = u;
        s.label[v] = s.label[u];
        pq.push({nd, nl, v});
      }
    };
    for (const auto& o : off8) relax(ui + o[0], uj + o[1]);
    for (int k = 0; k < extra; ++k) relax(ui + off16[k][0], uj + off16[k][1]);
  }
  return s;
}

namespace {

// Nearest grid node; exact half-step ties round toward the smaller index so
// points on a grid edge always snap to one of its endpoints.  Endpoint hops
// carry zero cost, which makes the continuum passage time the pull-back of
// the grid shortest-path metric and keeps the triangle inequality exact.
int snap_node(const ModelInstance::Derived& d, const Point& u) {
  auto round_down = [](double v) { return static_cast<int>(std::ceil(v - 0.5)); };
  int i = std::clamp(round_down((u.x() - d.ox) / d.h), 0, d.nx - 1);
  int j = std::clamp(round_down((u.y() - d.oy) / d.h), 0, d.ny - 1);
  return j * d.nx + i;
}

int nearest_in_giant(const FieldRealization& f, const std::vector<int>& comp, int giant,
                     const Point& u) {
  double r = 2.0;
  const auto& pts = f.points();
  const Rect& w = f.spec().window;
  double rlim = std::hypot(w.width(), w.height()) + 1;
  while (r <= 2 * rlim) {
    int best = -1;
    double best_d2 = kInf, best_tb = 0;
    for (int i : f.points_within(u, r)) {
      if (comp[i] != giant) continue;
      double d2 = (pts[i].pos - u).squaredNorm();
      double tol = 1e-12 * (1.0 + d2);
      if (best < 0 || d2 < best_d2 - tol) {
        best = i;
        best_d2 = d2;
        best_tb = pts[i].tiebreak;
      } else if (std::abs(d2 - best_d2) <= tol && pts[i].tiebreak < best_tb) {
        best = i;
        best_tb = pts[i].tiebreak;
      }
    }
    if (best >= 0 && best_d2 <= r * r) return best;
    r *= 2;
  }
  throw SubcriticalWindow("rgg: no giant-component point found");
}

std::vector<int> unwind(const Sweep& s, int target) {
  std::vector<int> path;
  for (int v = target; v != -1; v = s.parent[v]) path.push_back(v);
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace

Geodesic ModelInstance::passage(const Point& u, const Point& v) const {
  if ((u - v).norm() == 0.0) return Geodesic{{u, v}, 0.0, {0.0}};
  // Solve every query in a canonical endpoint order so X(u,v) and X(v,u) run
  // the identical sweep and agree to the last bit.
  if (v.x() < u.x() || (v.x() == u.x() && v.y() < u.y())) {
    Geodesic g = passage(v, u);
    std::reverse(g.vertices.begin(), g.vertices.end());
    std::reverse(g.per_edge_costs.begin(), g.per_edge_costs.end());
    return g;
  }
  check_endpoint(u);
  check_endpoint(v);
  const auto& f = *field_;
  const auto& pts = f.points();
  const Derived& d = *der_;
  Geodesic g;

  switch (spec_.kind) {
    case ModelKind::voronoi:
    case ModelKind::voronoi_weighted: {
      int su = f.nearest(u), sv = f.nearest(v);
      std::vector<int> nodes;
      if (su == sv) {
        nodes = {su};
        g.passage_time = d.node_weight[su];
      } else {
        Sweep s = dijkstra_adj(d.adj, d.node_weight, pts, {{su, d.node_weight[su], 0}}, {sv});
        if (!(s.dist[sv] < kInf))
          throw WindowViolation("voronoi: endpoints not connected by certified adjacency");
        g.passage_time = s.dist[sv];
        nodes = unwind(s, sv);
      }
      g.vertices.push_back(u);
      g.per_edge_costs.push_back(d.node_weight[nodes.front()]);
      for (int node : nodes) g.vertices.push_back(pts[node].pos);
      // cost of entering each subsequent cell rides on the edge into it
      for (std::size_t i = 1; i < nodes.size(); ++i)
        g.per_edge_costs.push_back(d.node_weight[nodes[i]]);
      g.vertices.push_back(v);
      g.per_edge_costs.push_back(0.0);
      break;
    }
    case ModelKind::howard_newman: {
      int su = f.nearest(u), sv = f.nearest(v);
      std::vector<int> nodes;
      if (su == sv) {
        nodes = {su};
        g.passage_time = 0.0;
      } else {
        double r = 2.0 / std::sqrt(std::max(f.spec().ppp_rate, 1e-12));
        r = std::max(r, 1.5);
        const Rect& w = f.spec().window;
        double rmax = std::hypot(w.width(), w.height()) + 1;
        Sweep prev = dijkstra_hn(f, spec_.beta, r, {{su, 0.0, 0}}, {sv});
        bool certified = false;
        Sweep cur = prev;
        while (true) {
          cur = dijkstra_hn(f, spec_.beta, 2 * r, {{su, 0.0, 0}}, {sv});
          if (prev.dist[sv] < kInf && cur.dist[sv] < kInf &&
              std::abs(prev.dist[sv] - cur.dist[sv]) <= 1e-9 * (1.0 + cur.dist[sv])) {
            certified = true;
            break;
          }
          if (2 * r >= rmax) {
            // cutoff covers the whole window: the graph is complete, so this
            // sweep is exact even without agreement with the previous one
            certified = cur.dist[sv] < kInf;
            break;
          }
          prev = std::move(cur);
          r *= 2;
        }
        if (!certified) throw CutoffTooSmall("howard_newman: r_cut doubling did not stabilize");
        g.passage_time = cur.dist[sv];
        nodes = unwind(cur, sv);
      }
      g.vertices.push_back(u);
      g.per_edge_costs.push_back(0.0);
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        g.vertices.push_back(pts[nodes[i]].pos);
        if (i > 0)
          g.per_edge_costs.push_back(
              std::pow((pts[nodes[i]].pos - pts[nodes[i - 1]].pos).norm(), spec_.beta));
      }
      g.vertices.push_back(v);
      g.per_edge_costs.push_back(0.0);
      break;
    }
    case ModelKind::rgg: {
      int su = nearest_in_giant(f, d.comp, d.giant, u);
      int sv = nearest_in_giant(f, d.comp, d.giant, v);
      std::vector<int> nodes;
      if (su == sv) {
        nodes = {su};
        g.passage_time = 0.0;
      } else {
        Sweep s = bfs_rgg(f, spec_.rgg_threshold, d.comp, d.giant, {{su, 0.0, 0}});
        g.passage_time = s.dist[sv];
        nodes = unwind(s, sv);
      }
      g.vertices.push_back(u);
      g.per_edge_costs.push_back(0.0);
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        g.vertices.push_back(pts[nodes[i]].pos);
        if (i > 0) g.per_edge_costs.push_back(1.0);
      }
      g.vertices.push_back(v);
      g.per_edge_costs.push_back(0.0);
      break;
    }
    case ModelKind::riemannian: {
      int su = snap_node(d, u);
      int sv = snap_node(d, v);
      std::vector<int> nodes;
      if (su == sv) {
        nodes = {su};
        g.passage_time = 0.0;
      } else {
        Sweep s = dijkstra_grid(d, spec_.riem, {{su, 0.0, 0}});
        g.passage_time = s.dist[sv];
        nodes = unwind(s, sv);
        g.vertices.push_back(u);
        g.per_edge_costs.push_back(0.0);  // snap hops are free
        double acc = 0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
          g.vertices.push_back(d.node_pos(nodes[i]));
          if (i > 0) {
            double dd = s.dist[nodes[i]] - acc;
            acc = s.dist[nodes[i]];
            g.per_edge_costs.push_back(dd);
          }
        }
        g.vertices.push_back(v);
        g.per_edge_costs.push_back(0.0);
        break;
      }
      g.vertices.push_back(u);
      g.per_edge_costs.push_back(0.0);
      g.vertices.push_back(d.node_pos(su));
      g.vertices.push_back(v);
      g.per_edge_costs.push_back(0.0);
      break;
    }
  }
  return g;
}

ModelInstance ModelInstance::resampled(const RegionSelector& sel, std::uint64_t seed) const {
  return ModelInstance(spec_, field_->resampled(sel, seed), margin_);
}

Geodesic ModelInstance::passage_resampled(const Point& u, const Point& v,
                                          const RegionSelector& sel, std::uint64_t seed) const {
  return resampled(sel, seed).passage(u, v);
}

double ModelInstance::path_cost(const std::vector<Point>& vertices) const {
  const Derived& d = *der_;
  const auto& f = *field_;
  if (vertices.size() < 2) return 0.0;
  if (vertices.size() == 2 && (vertices[0] - vertices[1]).norm() == 0.0) return 0.0;
  switch (spec_.kind) {
    case ModelKind::voronoi:
    case ModelKind::voronoi_weighted: {
      double sum = 0;
      for (std::size_t i = 1; i + 1 < vertices.size(); ++i) sum += d.node_weight[f.nearest(vertices[i])];
      return sum;
    }
    case ModelKind::howard_newman: {
      double sum = 0;
      for (std::size_t i = 2; i + 1 < vertices.size(); ++i)
        sum += std::pow((vertices[i] - vertices[i - 1]).norm(), spec_.beta);
      return sum;
    }
    case ModelKind::rgg:
      return vertices.size() >= 3 ? static_cast<double>(vertices.size()) - 3.0 : 0.0;
    case ModelKind::riemannian: {
      // first and last hops are free snap hops
      double sum = 0;
      for (std::size_t i = 2; i + 1 < vertices.size(); ++i)
        sum += d.edge_w(vertices[i - 1], vertices[i], spec_.riem);
      return sum;
    }
  }
  return 0.0;
}

ModelInstance::SideResult ModelInstance::side_to_side(const std::vector<Point>& left,
                                                      const std::vector<Point>& right,
                                                      bool maximize) const {
  if (left.empty() || right.empty())
    throw std::invalid_argument("side_to_side: empty discretization");
  const auto& f = *field_;
  const Derived& d = *der_;

  // Entry nodes with connection costs, per endpoint, per model.
  auto attach = [&](const Point& p) -> std::vector<std::pair<int, double>> {
    switch (spec_.kind) {
      case ModelKind::voronoi:
      case ModelKind::voronoi_weighted: {
        int s = f.nearest(p);
        return {{s, d.node_weight[s]}};
      }
      case ModelKind::howard_newman:
        return {{f.nearest(p), 0.0}};
      case ModelKind::rgg:
        return {{nearest_in_giant(f, d.comp, d.giant, p), 0.0}};
      case ModelKind::riemannian:
        return {{snap_node(d, p), 0.0}};
    }
    return {};
  };
  // Exit cost added when reading a distance at the far endpoint.
  auto exit_costs = [&](const Point& p) -> std::vector<std::pair<int, double>> {
    switch (spec_.kind) {
      case ModelKind::voronoi:
      case ModelKind::voronoi_weighted:
        return {{f.nearest(p), 0.0}};
      default:
        return attach(p);
    }
  };

  auto run_sweep = [&](const std::vector<Source>& sources,
                       const std::vector<int>& targets) -> Sweep {
    switch (spec_.kind) {
      case ModelKind::voronoi:
      case ModelKind::voronoi_weighted:
        return dijkstra_adj(d.adj, d.node_weight, f.points(), sources, targets);
      case ModelKind::howard_newman: {
        double r = std::max(1.5, 2.0 / std::sqrt(std::max(f.spec().ppp_rate, 1e-12)));
        const Rect& w = f.spec().window;
        double rmax = std::hypot(w.width(), w.height()) + 1;
        Sweep prev = dijkstra_hn(f, spec_.beta, r, sources, targets);
        while (true) {
          Sweep cur = dijkstra_hn(f, spec_.beta, 2 * r, sources, targets);
          bool stable = true;
          for (int t : targets) {
            if (!(prev.dist[t] < kInf && cur.dist[t] < kInf &&
                  std::abs(prev.dist[t] - cur.dist[t]) <= 1e-9 * (1.0 + cur.dist[t]))) {
              stable = false;
              break;
            }
          }
          if (stable) return cur;
          if (2 * r >= rmax) {
            // complete graph; exact as long as every target was reached
            bool reached = true;
            for (int t : targets) reached = reached && cur.dist[t] < kInf;
            if (reached) return cur;
            throw CutoffTooSmall("howard_newman: r_cut doubling did not stabilize");
          }
          prev = std::move(cur);
          r *= 2;
        }
      }
      case ModelKind::rgg:
        return bfs_rgg(f, spec_.rgg_threshold, d.comp, d.giant, sources);
      case ModelKind::riemannian:
        return dijkstra_grid(d, spec_.riem, sources);
    }
    throw std::logic_error("unreachable");
  };

  SideResult res;
  if (!maximize) {
    std::vector<Source> sources;
    std::vector<int> targets;
    std::vector<std::vector<std::pair<int, double>>> exits(right.size());
    for (std::size_t i = 0; i < left.size(); ++i)
      for (const auto& [node, c] : attach(left[i])) sources.push_back({node, c, static_cast<int>(i)});
    for (std::size_t j = 0; j < right.size(); ++j) {
      exits[j] = exit_costs(right[j]);
      for (const auto& [node, c] : exits[j]) targets.push_back(node);
    }
    Sweep s = run_sweep(sources, targets);
    res.value = kInf;
    for (std::size_t j = 0; j < right.size(); ++j) {
      for (const auto& [node, c] : exits[j]) {
        double val = s.dist[node] + c;
        if (val < res.value) {
          res.value = val;
          res.arg_right = right[j];
          res.arg_left = left[s.label[node] >= 0 ? s.label[node] : 0];
        }
      }
    }
  } else {
    res.value = -kInf;
    for (std::size_t i = 0; i < left.size(); ++i) {
      std::vector<Source> sources;
      for (const auto& [node, c] : attach(left[i])) sources.push_back({node, c, 0});
      std::vector<int> targets;
      std::vector<std::vector<std::pair<int, double>>> exits(right.size());
      for (std::size_t j = 0; j < right.size(); ++j) {
        exits[j] = exit_costs(right[j]);
        for (const auto& [node, c] : exits[j]) targets.push_back(node);
      }
      Sweep s = run_sweep(sources, targets);
      for (std::size_t j = 0; j < right.size(); ++j) {
        double best = kInf;
        for (const auto& [node, c] : exits[j]) best = std::min(best, s.dist[node] + c);
        if (best > res.value) {
          res.value = best;
          res.arg_left = left[i];
          res.arg_right = right[j];
        }
      }
    }
  }
  return res;
}

}  // namespace fpplab
