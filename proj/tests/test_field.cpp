#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "fpplab/field.hpp"
#include "fpplab/rng.hpp"
#include "fpplab/stats.hpp"

using namespace fpplab;

namespace {

FieldSpec basic_spec(Rect w, std::uint64_t seed) {
  FieldSpec s(w);
  s.master_seed = seed;
  return s;
}

bool same_points(const FieldRealization& a, const FieldRealization& b) {
  const auto& pa = a.points();
  const auto& pb = b.points();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (pa[i].pos != pb[i].pos || pa[i].mark != pb[i].mark || pa[i].tiebreak != pb[i].tiebreak)
      return false;
  return true;
}

}  // namespace

TEST_CASE("sampling is a pure function of the spec") {
  FieldSpec s = basic_spec(Rect(-3, 17, -5, 5), 77);
  FieldRealization a = FieldRealization::sample(s);
  FieldRealization b = FieldRealization::sample(s);
  CHECK(same_points(a, b));
  CHECK(!a.points().empty());
  for (const auto& p : a.points()) {
    CHECK(s.window.contains(p.pos));
    CHECK(p.mark >= 0);
    CHECK(p.tiebreak >= 0);
    CHECK(p.tiebreak < 1);
  }

  FieldSpec s2 = s;
  s2.master_seed = 78;
  CHECK(!same_points(a, FieldRealization::sample(s2)));
}

TEST_CASE("point counts are Poisson-consistent") {
  int outliers = 0;
  for (int seed = 0; seed < 100; ++seed) {
    FieldSpec s = basic_spec(Rect(0, 100, 0, 100), 1000 + seed);
    FieldRealization f = FieldRealization::sample(s);
    double count = static_cast<double>(f.points().size());
    if (std::abs(count - 10000.0) > 4.0 * 100.0) ++outliers;
  }
  CHECK(outliers <= 1);  // 4-sigma events at ~6e-5 each
}

TEST_CASE("disjoint subwindow counts are uncorrelated") {
  std::vector<double> left, right;
  // 4000 draws puts the 0.05 bound at 3.2 sigma under independence
  for (int seed = 0; seed < 4000; ++seed) {
    FieldSpec s = basic_spec(Rect(0, 20, 0, 10), 5000 + seed);
    FieldRealization f = FieldRealization::sample(s);
    int nl = 0, nr = 0;
    for (const auto& p : f.points()) (p.pos.x() < 10 ? nl : nr)++;
    left.push_back(nl);
    right.push_back(nr);
  }
  double ml = stats::mean(left), mr = stats::mean(right);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < left.size(); ++i) {
    sxy += (left[i] - ml) * (right[i] - mr);
    sxx += (left[i] - ml) * (left[i] - ml);
    syy += (right[i] - mr) * (right[i] - mr);
  }
  double rho = sxy / std::sqrt(sxx * syy);
  CHECK(std::abs(rho) < 0.05);
}

TEST_CASE("resampled region counts keep the Poisson law") {
  // chi-squared goodness of fit on per-unit-cell counts pooled over resamples
  FieldSpec s = basic_spec(Rect(0, 10, 0, 10), 31337);
  FieldRealization base = FieldRealization::sample(s);
  RegionSelector whole = RegionSelector::from_rect(Rect(-1, 11, -1, 11));
  std::vector<long> hist(6, 0);  // counts 0..4, >=5 pooled
  long total = 0;
  for (int r = 0; r < 300; ++r) {
    FieldRealization f = base.resampled(whole, 999 + r);
    std::vector<int> cells(100, 0);
    for (const auto& p : f.points()) {
      int cx = std::min(9, static_cast<int>(p.pos.x()));
      int cy = std::min(9, static_cast<int>(p.pos.y()));
      ++cells[cy * 10 + cx];
    }
    for (int c : cells) {
      ++hist[std::min(c, 5)];
      ++total;
    }
  }
  // Poisson(1) cell probabilities
  double e = std::exp(-1.0);
  double probs[6] = {e, e, e / 2, e / 6, e / 24, 1 - e * (1 + 1 + 0.5 + 1.0 / 6 + 1.0 / 24)};
  double chi2 = 0;
  for (int k = 0; k < 6; ++k) {
    double expd = probs[k] * total;
    chi2 += (hist[k] - expd) * (hist[k] - expd) / expd;
  }
  CHECK(stats::chi2_sf(chi2, 5) > 0.01);
}

TEST_CASE("resampling is exact outside and fresh inside") {
  FieldSpec s = basic_spec(Rect(0, 30, 0, 30), 4242);
  FieldRealization base = FieldRealization::sample(s);

  auto check_selector = [&](const RegionSelector& sel, std::uint64_t seed) {
    FieldRealization r = base.resampled(sel, seed);
    // every outside point of base survives bit-for-bit
    for (const auto& p : base.points()) {
      if (sel.contains(p.pos)) continue;
      bool found = false;
      for (const auto& q : r.points())
        if (q.pos == p.pos && q.mark == p.mark && q.tiebreak == p.tiebreak) {
          found = true;
          break;
        }
      CHECK(found);
    }
    // no inside point of base survives
    for (const auto& q : r.points()) {
      if (!sel.contains(q.pos)) continue;
      for (const auto& p : base.points()) CHECK(!(q.pos == p.pos && q.mark == p.mark));
    }
    CHECK(r.points().size() > 0);
    // determinism of the resample
    CHECK(same_points(r, base.resampled(sel, seed)));
  };

  check_selector(RegionSelector::from_rect(Rect(5, 15, 5, 15)), 1);
  check_selector(RegionSelector::complement_of_rect(Rect(5, 15, 5, 15)), 2);
  check_selector(RegionSelector::from_vstrip(VStrip(10, 20)), 3);
  check_selector(RegionSelector::complement_of_vstrip(VStrip(10, 20)), 4);

  BlockMask m;
  m.x0 = 0;
  m.y0 = 0;
  m.bw = 10;
  m.bh = 10;
  m.nbx = 3;
  m.nby = 3;
  m.mask.assign(9, 0);
  m.mask[4] = 1;  // center block only
  check_selector(RegionSelector::from_blocks(m), 5);

  // empty intersection leaves the field untouched
  FieldRealization same = base.resampled(RegionSelector::from_rect(Rect(100, 110, 100, 110)), 9);
  CHECK(same_points(base, same));

  // different resample seeds give different inside content
  RegionSelector mid = RegionSelector::from_rect(Rect(5, 25, 5, 25));
  CHECK(!same_points(base.resampled(mid, 1), base.resampled(mid, 2)));
}

TEST_CASE("nearest matches the exhaustive oracle") {
  FieldSpec s = basic_spec(Rect(0, 24, 0, 24), 616);
  FieldRealization f = FieldRealization::sample(s);
  const auto& pts = f.points();
  rng::Stream g(8);
  for (int q = 0; q < 1000; ++q) {
    Point u{rng::uniform(g, 0, 24), rng::uniform(g, 0, 24)};
    int got = f.nearest(u);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : pts) best = std::min(best, (p.pos - u).squaredNorm());
    CHECK((pts[got].pos - u).squaredNorm() == doctest::Approx(best).epsilon(1e-12));
  }
  // query at an existing point returns that point
  for (int i = 0; i < 50; ++i) CHECK(f.nearest(pts[i].pos) == i);
}

TEST_CASE("points_within matches the exhaustive oracle") {
  FieldSpec s = basic_spec(Rect(-5, 15, -5, 15), 99);
  FieldRealization f = FieldRealization::sample(s);
  const auto& pts = f.points();
  rng::Stream g(3);
  for (int q = 0; q < 300; ++q) {
    Point u{rng::uniform(g, -5, 15), rng::uniform(g, -5, 15)};
    double r = rng::uniform(g, 0.1, 6.0);
    auto got = f.points_within(u, r);
    std::sort(got.begin(), got.end());
    std::vector<int> want;
    for (int i = 0; i < static_cast<int>(pts.size()); ++i)
      if ((pts[i].pos - u).squaredNorm() <= r * r) want.push_back(i);
    CHECK(got == want);
  }
}

TEST_CASE("smoothed_value equals direct kernel summation") {
  FieldSpec s = basic_spec(Rect(0, 12, 0, 12), 2718);
  FieldRealization f = FieldRealization::sample(s);
  Kernel k;
  CHECK(k(Point{0, 0}) == 1.0);
  CHECK(k(Point{1, 0}) == 0.0);
  CHECK(k(Point{1.5, 0}) == 0.0);

  rng::Stream g(17);
  for (int q = 0; q < 200; ++q) {
    Point x{rng::uniform(g, 1, 11), rng::uniform(g, 1, 11)};
    double direct = 0;
    for (const auto& p : f.points())
      if ((p.pos - x).norm() <= 1.0) direct += k(p.pos - x);
    CHECK(f.smoothed_value(x, k) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("white-noise grid determinism resampling and smoothing oracle") {
  FieldSpec s = basic_spec(Rect(0, 8, 0, 8), 5150);
  s.kind = FieldKind::white_noise_grid;
  s.grid_step = 0.5;
  FieldRealization f = FieldRealization::sample(s);
  CHECK(f.grid_nx() == 17);
  CHECK(f.grid_ny() == 17);

  FieldRealization f2 = FieldRealization::sample(s);
  for (int j = 0; j < f.grid_ny(); ++j)
    for (int i = 0; i < f.grid_nx(); ++i) CHECK(f.grid_value(i, j) == f2.grid_value(i, j));

  // resampling swaps inside nodes and keeps outside nodes bit-for-bit
  RegionSelector sel = RegionSelector::from_rect(Rect(2, 5, 2, 5));
  FieldRealization r = f.resampled(sel, 12);
  bool changed = false;
  for (int j = 0; j < f.grid_ny(); ++j) {
    for (int i = 0; i < f.grid_nx(); ++i) {
      if (sel.contains(f.grid_node(i, j))) {
        changed = changed || (r.grid_value(i, j) != f.grid_value(i, j));
      } else {
        CHECK(r.grid_value(i, j) == f.grid_value(i, j));
      }
    }
  }
  CHECK(changed);

  // direct convolution oracle
  Kernel k;
  rng::Stream g(6);
  for (int q = 0; q < 100; ++q) {
    Point x{rng::uniform(g, 1, 7), rng::uniform(g, 1, 7)};
    double direct = 0;
    for (int j = 0; j < f.grid_ny(); ++j)
      for (int i = 0; i < f.grid_nx(); ++i) {
        Point node = f.grid_node(i, j);
        if ((node - x).norm() <= 1.0) direct += k(node - x) * s.grid_step * f.grid_value(i, j);
      }
    CHECK(f.smoothed_value(x, k) == doctest::Approx(direct).epsilon(1e-9));
  }
}

TEST_CASE("spec validation rejects bad inputs") {
  FieldSpec s = basic_spec(Rect(0, 1, 0, 1), 0);
  s.ppp_rate = 0;
  CHECK_THROWS_AS(FieldRealization::sample(s), std::invalid_argument);
  FieldSpec s2 = basic_spec(Rect(0, 1e5, 0, 1e5), 0);
  CHECK_THROWS_AS(FieldRealization::sample(s2), std::runtime_error);
}
