#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "fpplab/field.hpp"
#include "fpplab/models.hpp"
#include "fpplab/path_obs.hpp"
#include "fpplab/rng.hpp"

using namespace fpplab;

namespace {

Geodesic poly(std::vector<Point> v) {
  Geodesic g;
  g.vertices = std::move(v);
  return g;
}

FieldRealization make_field(Rect w, double rate, std::uint64_t seed) {
  FieldSpec s(w);
  s.ppp_rate = rate;
  s.master_seed = seed;
  return FieldRealization::sample(s);
}

}  // namespace

TEST_CASE("transversal fluctuation hand values and oracle") {
  CHECK(transversal_fluctuation(poly({{0, 0}, {2, 0}})) == 0.0);
  CHECK(transversal_fluctuation(poly({{0, 0}, {1, 3}, {2, 0}})) == doctest::Approx(3.0));

  rng::Stream g(4);
  for (int q = 0; q < 300; ++q) {
    std::vector<Point> v{{0, 0}};
    for (int i = 0; i < 8; ++i)
      v.push_back({rng::uniform(g, 0, 10), rng::uniform(g, -4, 4)});
    v.push_back({10, 0});
    Geodesic gg = poly(v);
    double want = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      want = std::max(want, point_line_distance(v[i], v.front(), v.back()));
      if (i) want = std::max(want, point_line_distance(0.5 * (v[i - 1] + v[i]), v.front(), v.back()));
    }
    CHECK(transversal_fluctuation(gg) == doctest::Approx(want).epsilon(1e-12));
  }
  CHECK_THROWS_AS(transversal_fluctuation(poly({{1, 1}, {1, 1}})), std::invalid_argument);
}

TEST_CASE("crossing profile first hits and floor indices") {
  // straight axis path
  Geodesic s = poly({{0, 0}, {12, 0}});
  CrossingProfile ps = crossing_profile(s, 4, 3, 1.0);
  REQUIRE(ps.heights.size() == 2);
  CHECK(ps.heights[0] == 0.0);
  CHECK(ps.heights[1] == 0.0);
  CHECK(ps.k_indices[0] == 0);

  // single peak crossing x=n at height 1.7W
  Geodesic pk = poly({{0, 0}, {4, 1.7}, {8, 0}});
  CrossingProfile pp = crossing_profile(pk, 4, 2, 1.0);
  CHECK(pp.heights[0] == doctest::Approx(1.7));
  CHECK(pp.k_indices[0] == 1);

  // zig-zag recrossing: the FIRST crossing counts
  Geodesic zz = poly({{0, 0}, {5, 2}, {3, -1}, {5, -1}, {8, 0}});
  CrossingProfile pz = crossing_profile(zz, 4, 2, 1.0);
  // dense-parameter sweep oracle
  double t_hit = -1, h_hit = 0;
  for (double t = 0; t <= 1.0; t += 1e-5) {
    Point p = point_along(zz, t);
    if (std::abs(p.x() - 4.0) < 2e-4) {
      t_hit = t;
      h_hit = p.y();
      break;
    }
  }
  REQUIRE(t_hit >= 0);
  CHECK(pz.heights[0] == doctest::Approx(h_hit).epsilon(1e-3));
  CHECK(pz.heights[0] == doctest::Approx(1.6));

  CHECK_THROWS_AS(crossing_profile(poly({{0, 0}, {3, 0}}), 4, 2, 1.0), std::invalid_argument);
}

TEST_CASE("tau1 telescopes and is invariant under W-multiple shifts") {
  Geodesic g = poly({{0, 0.5}, {4, 2.5}, {8, -1.5}, {12, 0.5}});
  CrossingProfile p = crossing_profile(g, 4, 3, 1.0);
  double tau = tau1_of_profile(g, p, 1.0);
  // k-sequence: floor(0.5)=0 -> floor(2.5)=2 -> floor(-1.5)=-2 -> floor(0.5)=0
  CHECK(tau == 2 + 4 + 2);

  // integer multiple of W vertical translation cancels in the differences
  Geodesic gs = poly({{0, 3.5}, {4, 5.5}, {8, 1.5}, {12, 3.5}});
  CrossingProfile p2 = crossing_profile(gs, 4, 3, 1.0);
  CHECK(tau1_of_profile(gs, p2, 1.0) == tau);

  // straight path has tau = 0
  Geodesic st = poly({{0, 0.25}, {12, 0.25}});
  CHECK(tau1_of_profile(st, crossing_profile(st, 4, 3, 1.0), 1.0) == 0.0);
}

TEST_CASE("point_along endpoints and midpoints") {
  Geodesic g = poly({{0, 0}, {1, 0}, {1, 1}});
  CHECK(point_along(g, 0) == Point{0, 0});
  CHECK(point_along(g, 1) == Point{1, 1});
  CHECK(point_along(g, 0.5) == Point{1, 0});
  CHECK(point_along(g, 0.25) == Point{0.5, 0});
}

TEST_CASE("corridor passage against pairwise enumeration") {
  Rect w(0, 10, 0, 10);
  ModelSpec spec;
  spec.kind = ModelKind::voronoi_weighted;
  ModelInstance m(spec, make_field(w, 0.8, 606));

  CorridorQuery q;
  q.rect = Rect(2, 8, 3, 7);
  q.side_sample_step = 2.0;  // 3 samples per side
  for (auto mode : {CorridorQuery::Mode::min, CorridorQuery::Mode::max}) {
    q.mode = mode;
    auto res = corridor_passage(m, q);
    std::vector<Point> left{{2, 3}, {2, 5}, {2, 7}}, right{{8, 3}, {8, 5}, {8, 7}};
    double want = (mode == CorridorQuery::Mode::min) ? 1e300 : -1e300;
    for (const auto& a : left)
      for (const auto& b : right) {
        double x = m.passage(a, b).passage_time;
        want = (mode == CorridorQuery::Mode::min) ? std::min(want, x) : std::max(want, x);
      }
    CHECK(res.value == doctest::Approx(want).epsilon(1e-9));
    CHECK(m.passage(res.arg_left, res.arg_right).passage_time ==
          doctest::Approx(res.value).epsilon(1e-9));
  }

  // degenerate one-sample sides reduce to a point query
  CorridorQuery q1;
  q1.rect = Rect(3, 7, 4.9, 5.1);
  q1.side_sample_step = 10.0;
  auto r1 = corridor_passage(m, q1);
  CHECK(r1.value ==
        doctest::Approx(m.passage({3, 5}, {7, 5}).passage_time).epsilon(1e-9));

  // envelope: Y- <= X(mid, mid) <= Y+
  CorridorQuery qm;
  qm.rect = Rect(2, 8, 3, 7);
  qm.side_sample_step = 0.25;
  auto lo = corridor_passage(m, qm);
  qm.mode = CorridorQuery::Mode::max;
  auto hi = corridor_passage(m, qm);
  double mid = m.passage({2, 5}, {8, 5}).passage_time;
  CHECK(lo.value <= mid + 1e-9);
  CHECK(hi.value + 1e-9 >= mid);
  CHECK(lo.value <= hi.value + 1e-9);

  // finer nets can only lower the min
  qm.mode = CorridorQuery::Mode::min;
  qm.side_sample_step = 1.0;
  auto coarse = corridor_passage(m, qm);
  CHECK(lo.value <= coarse.value + 1e-9);
}

TEST_CASE("corridor passage on a parallelogram region") {
  Rect w(-2, 12, -6, 10);
  ModelSpec spec;
  spec.kind = ModelKind::voronoi;
  ModelInstance m(spec, make_field(w, 1.0, 77));
  Parallelogram pg(1, 0, 1, 8, 2);  // left side x=0 [0,2], right side x=8 [2,4]
  CorridorQuery q;
  q.para = pg;
  q.side_sample_step = 1.0;
  auto res = corridor_passage(m, q);
  std::vector<Point> left{{0, 0}, {0, 1}, {0, 2}}, right{{8, 2}, {8, 3}, {8, 4}};
  double want = 1e300;
  for (const auto& a : left)
    for (const auto& b : right) want = std::min(want, m.passage(a, b).passage_time);
  CHECK(res.value == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("gamma defect is nonnegative and matches direct evaluation") {
  Rect w(0, 20, 0, 20);
  for (ModelKind kind : {ModelKind::voronoi, ModelKind::voronoi_weighted,
                         ModelKind::howard_newman}) {
    ModelSpec spec;
    spec.kind = kind;
    ModelInstance m(spec, make_field(w, 1.0, 2121));
    Geodesic g = m.passage({2, 10}, {18, 10});
    CHECK(gamma_defect(m, g, {}) == 0.0);

    double gd = gamma_defect(m, g, {0.5});
    Point mid = point_along(g, 0.5);
    double direct = m.passage({2, 10}, mid).passage_time +
                    m.passage(mid, {18, 10}).passage_time - g.passage_time;
    CHECK(gd == doctest::Approx(direct).epsilon(1e-12));
    CHECK(gd >= -1e-9 * (1 + g.passage_time));

    double gd3 = gamma_defect(m, g, {0.25, 0.5, 0.75});
    CHECK(gd3 >= -1e-9 * (1 + g.passage_time));

    CHECK_THROWS_AS(gamma_defect(m, g, {0.5, 0.25}), std::invalid_argument);
    CHECK_THROWS_AS(gamma_defect(m, g, {0.0, 0.5}), std::invalid_argument);
  }
}

TEST_CASE("gamma defect vanishes for the grid metric") {
  Rect w(0, 16, 0, 16);
  ModelSpec spec;
  spec.kind = ModelKind::riemannian;
  ModelInstance m(spec, make_field(w, 1.0, 3333));
  rng::Stream g(9);
  for (int q = 0; q < 20; ++q) {
    Point u{rng::uniform(g, 1, 5), rng::uniform(g, 1, 15)};
    Point v{rng::uniform(g, 11, 15), rng::uniform(g, 1, 15)};
    Geodesic geo = m.passage(u, v);
    double gd = gamma_defect(m, geo, {0.25, 0.5, 0.75});
    CHECK(gd >= -1e-9 * (1 + geo.passage_time));
    CHECK(gd <= 1e-9 * (1 + geo.passage_time));
  }
}

TEST_CASE("local tf audit equals the crossing profile height") {
  Rect w(-4, 30, -12, 12);
  ModelSpec spec;
  spec.kind = ModelKind::howard_newman;
  ModelInstance m(spec, make_field(w, 1.0, 414));
  double n = 8, M = 3;
  double h = local_tf_audit(m, n, M, 1.0, -1.0);
  Geodesic g = m.passage({0, 1.0}, {M * n, -1.0});
  CrossingProfile p = crossing_profile(g, n, 2, 1.0);
  CHECK(h == p.heights.front());
  CHECK_THROWS_AS(local_tf_audit(m, 8, 1.2, 0, 0), std::invalid_argument);
}
