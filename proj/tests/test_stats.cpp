#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "fpplab/rng.hpp"
#include "fpplab/stats.hpp"

using namespace fpplab;
using stats::ScalingTable;
using stats::TableRow;

namespace {

ScalingTable table_from(const std::vector<double>& ns, const std::vector<double>& qhats) {
  ScalingTable t;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    TableRow r;
    r.n = ns[i];
    r.qhat = qhats[i];
    t.rows.push_back(r);
  }
  return t;
}

}  // namespace

TEST_CASE("summarize basic moments") {
  stats::SampleSet s;
  s.n = 10;
  s.values = {1, 2, 3, 4};
  TableRow r = stats::summarize(s);
  CHECK(r.count == 4);
  CHECK(r.mean == doctest::Approx(2.5));
  CHECK(r.sd == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(r.se_mean == doctest::Approx(r.sd / 2.0));
}

TEST_CASE("build_q_and_w hand example and envelope bound") {
  ScalingTable t = table_from({1, 16}, {1, 1});
  stats::build_q_and_w(t, 0.25);
  CHECK(t.rows[0].q == doctest::Approx(1.0));
  CHECK(t.rows[1].q == doctest::Approx(2.0));  // max(16^{1/4}*1, 1)
  CHECK(t.rows[1].w == doctest::Approx(std::sqrt(32.0)));

  // single row: Q = Qhat, W = sqrt(n*Qhat)
  ScalingTable one = table_from({9}, {4});
  stats::build_q_and_w(one, 0.1);
  CHECK(one.rows[0].q == doctest::Approx(4.0));
  CHECK(one.rows[0].w == doctest::Approx(6.0));

  // qhat <= q always, q nondecreasing, and q <= C*sqrt(n) when qhat_m <= sqrt(m)
  rng::Stream g(5);
  for (int trial = 0; trial < 200; ++trial) {
    ScalingTable rt;
    double n = 1;
    for (int i = 0; i < 8; ++i) {
      TableRow r;
      r.n = n;
      r.qhat = rng::uniform(g) * std::sqrt(n);
      rt.rows.push_back(r);
      n *= 2;
    }
    double alpha = rng::uniform(g, 0.02, 0.48);
    stats::build_q_and_w(rt, alpha);
    for (std::size_t i = 0; i < rt.rows.size(); ++i) {
      CHECK(rt.rows[i].qhat <= rt.rows[i].q * (1 + 1e-12));
      CHECK(rt.rows[i].q <= std::sqrt(rt.rows[i].n) * (1 + 1e-12));
      if (i) CHECK(rt.rows[i - 1].q <= rt.rows[i].q * (1 + 1e-12));
    }
  }
  CHECK_THROWS_AS(stats::build_q_and_w(t, 0.7), std::invalid_argument);
}

TEST_CASE("record_points against double-loop oracle") {
  // hand example: flat qhat means n=16 is not a record under the envelope
  ScalingTable t = table_from({1, 16}, {1, 1});
  stats::record_points(t, 0.25);
  CHECK(t.rows[0].is_record);
  CHECK(!t.rows[1].is_record);

  rng::Stream g(99);
  for (int trial = 0; trial < 100; ++trial) {
    ScalingTable rt;
    double n = 2;
    for (int i = 0; i < 10; ++i) {
      TableRow r;
      r.n = n;
      r.qhat = rng::uniform(g, 0.1, 4.0);
      rt.rows.push_back(r);
      n *= 2;
    }
    double alpha = rng::uniform(g, 0.02, 0.45);
    double C = rng::uniform(g, 1.0, 3.0), alpha_p = rng::uniform(g, 0.02, 0.45);
    stats::record_points(rt, alpha, std::make_pair(C, alpha_p));
    for (std::size_t i = 0; i < rt.rows.size(); ++i) {
      double q = 0, supp = 0;
      for (std::size_t j = 0; j <= i; ++j) {
        q = std::max(q, std::pow(rt.rows[i].n / rt.rows[j].n, alpha) * rt.rows[j].qhat);
        supp = std::max(supp, std::pow(rt.rows[i].n / rt.rows[j].n, alpha_p) * rt.rows[j].qhat);
      }
      bool rec = std::abs(q - rt.rows[i].qhat) <= 1e-9 * rt.rows[i].qhat;
      bool quasi = supp <= C * rt.rows[i].qhat * (1 + 1e-12);
      CHECK(rt.rows[i].is_record == rec);
      CHECK(rt.rows[i].is_quasi == quasi);
    }
  }

  // scaling all qhat by a common factor leaves the flags unchanged
  ScalingTable a = table_from({2, 4, 8, 16}, {1.0, 1.3, 1.1, 2.0});
  ScalingTable b = table_from({2, 4, 8, 16}, {7.0, 9.1, 7.7, 14.0});
  stats::record_points(a, 0.2, std::make_pair(1.5, 0.3));
  stats::record_points(b, 0.2, std::make_pair(1.5, 0.3));
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].is_record == b.rows[i].is_record);
    CHECK(a.rows[i].is_quasi == b.rows[i].is_quasi);
  }
}

TEST_CASE("qhat_empirical properties and grid-search oracle") {
  std::vector<double> c100(200, 3.5);
  CHECK(stats::qhat_empirical(c100, 1.0) == 0.0);

  rng::Stream g(123);
  std::vector<double> v(10000);
  for (double& x : v) x = rng::exponential(g);
  double q = stats::qhat_empirical(v, 1.0);
  CHECK(q > 0);

  // homogeneity and shift invariance
  std::vector<double> v2 = v, v3 = v;
  for (double& x : v2) x *= 7.0;
  for (double& x : v3) x += 11.0;
  CHECK(stats::qhat_empirical(v2, 1.0) == doctest::Approx(7 * q).epsilon(1e-9));
  CHECK(stats::qhat_empirical(v3, 1.0) == doctest::Approx(q).epsilon(1e-9));

  // direct grid search over Q must agree to 1%
  double m = stats::mean(v);
  std::vector<double> dev;
  for (double x : v) dev.push_back(std::abs(x - m));
  std::sort(dev.begin(), dev.end(), std::greater<>());
  auto feasible = [&](double Q) {
    for (std::size_t k = 0; k < dev.size(); ++k) {
      if (dev[k] == 0.0) break;
      double surv = static_cast<double>(k + 1) / static_cast<double>(dev.size());
      if (surv > std::exp(1.0 - dev[k] / Q)) return false;
    }
    return true;
  };
  double qg = 0;
  for (double cand = 1e-3; cand < 100; cand *= 1.001)
    if (feasible(cand)) {
      qg = cand;
      break;
    }
  CHECK(q == doctest::Approx(qg).epsilon(0.01));

  std::vector<double> tiny(10, 1.0);
  CHECK_THROWS_AS(stats::qhat_empirical(tiny, 1.0), std::invalid_argument);
}

TEST_CASE("fit_tail_exponent recovers known exponents") {
  rng::Stream g(2024);
  std::vector<double> gauss(100000), expo(100000);
  for (double& x : gauss) x = rng::normal(g);
  for (double& x : expo) x = rng::exponential(g);

  stats::TailFit fg = stats::fit_tail_exponent(gauss);
  CHECK(fg.theta >= 1.6);
  CHECK(fg.theta <= 2.4);

  stats::TailFit fe = stats::fit_tail_exponent(expo);
  CHECK(fe.theta >= 0.8);
  CHECK(fe.theta <= 1.2);

  // affine invariance of theta-hat
  std::vector<double> scaled = gauss;
  for (double& x : scaled) x = 7.0 * x - 3.0;
  stats::TailFit fs = stats::fit_tail_exponent(scaled);
  CHECK(fs.theta == doctest::Approx(fg.theta).epsilon(1e-9));

  std::vector<double> flat(2000, 1.0);
  CHECK_THROWS_AS(stats::fit_tail_exponent(flat), std::invalid_argument);
}

TEST_CASE("estimate_mu on synthetic tables") {
  ScalingTable exact;
  for (double n : {8, 16, 32, 64, 128}) {
    TableRow r;
    r.n = n;
    r.mean = 2.5 * n;
    r.se_mean = 0.01;
    exact.rows.push_back(r);
  }
  stats::MuEstimate m = stats::estimate_mu(exact);
  CHECK(m.mu == doctest::Approx(2.5));
  CHECK(m.gamma_degenerate);

  ScalingTable corr;
  for (double n : {8, 16, 32, 64, 128, 256, 512}) {
    TableRow r;
    r.n = n;
    r.mean = 2.5 * n + std::pow(n, 1.0 / 3.0);
    r.se_mean = 0.01;
    corr.rows.push_back(r);
  }
  stats::MuEstimate mc = stats::estimate_mu(corr);
  CHECK(mc.mu > 2.5);                         // subadditive overestimate direction
  CHECK(mc.mu == doctest::Approx(2.5).epsilon(0.01));
  CHECK(mc.fit_gamma == doctest::Approx(1.0 / 3.0).epsilon(0.2));
  CHECK(!mc.gamma_degenerate);

  ScalingTable narrow = table_from({8, 16}, {0, 0});
  CHECK_THROWS_AS(stats::estimate_mu(narrow), std::invalid_argument);
}

TEST_CASE("kpz_ratio exact synthetic scaling") {
  ScalingTable t;
  std::vector<std::vector<double>> tf;
  for (double n : {64, 128, 256, 512}) {
    TableRow r;
    r.n = n;
    r.count = 3;
    r.sd = std::pow(n, 1.0 / 3.0);
    r.se_sd = 0;
    t.rows.push_back(r);
    tf.push_back(std::vector<double>(3, std::pow(n, 2.0 / 3.0)));
  }
  auto rows = stats::kpz_ratio(t, tf);
  for (const auto& k : rows) {
    CHECK(k.r == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(k.r_median == doctest::Approx(1.0).epsilon(1e-12));
  }

  // doubling the tf samples quadruples the ratio
  for (auto& v : tf)
    for (double& x : v) x *= 2;
  auto rows4 = stats::kpz_ratio(t, tf);
  for (const auto& k : rows4) CHECK(k.r == doctest::Approx(4.0).epsilon(1e-12));

  // E tf = 2 n^{2/3} with SD = n^{1/3} gives r = 4 constant in n
  for (std::size_t i = 0; i < rows4.size(); ++i)
    CHECK(rows4[i].r == doctest::Approx(rows4[0].r).epsilon(1e-12));
}

TEST_CASE("ks_two_sample calibration") {
  rng::Stream g(31);
  std::vector<double> a(2000), b(2000), c(2000);
  for (double& x : a) x = rng::normal(g);
  for (double& x : b) x = rng::normal(g);
  for (double& x : c) x = rng::normal(g) + 1.0;

  auto [d_same, p_same] = stats::ks_two_sample(a, b);
  CHECK(d_same < 0.06);
  CHECK(p_same > 0.01);

  auto [d_diff, p_diff] = stats::ks_two_sample(a, c);
  CHECK(d_diff > 0.3);
  CHECK(p_diff < 1e-6);

  // order invariance
  std::vector<double> ar(a.rbegin(), a.rend());
  auto [d2, p2] = stats::ks_two_sample(ar, b);
  CHECK(d2 == d_same);
  CHECK(p2 == p_same);
}

TEST_CASE("chi2_sf reference values") {
  // chi^2 with 2 dof: SF(x) = exp(-x/2)
  for (double x : {0.5, 1.0, 3.0, 10.0})
    CHECK(stats::chi2_sf(x, 2) == doctest::Approx(std::exp(-x / 2)).epsilon(1e-9));
  // median of chi^2_1 ~ 0.4549
  CHECK(stats::chi2_sf(0.454936, 1) == doctest::Approx(0.5).epsilon(1e-4));
  CHECK(stats::chi2_sf(0.0, 5) == 1.0);
}

TEST_CASE("wilson_interval sanity") {
  auto [lo, hi] = stats::wilson_interval(50, 100);
  CHECK(lo < 0.5);
  CHECK(hi > 0.5);
  CHECK(lo > 0.39);
  CHECK(hi < 0.61);
  auto [lo0, hi0] = stats::wilson_interval(0, 100);
  CHECK(lo0 == 0.0);
  CHECK(hi0 > 0.0);
  auto [loF, hiF] = stats::wilson_interval(100, 100);
  CHECK(hiF == 1.0);
  CHECK(loF < 1.0);
}

TEST_CASE("median even and odd") {
  CHECK(stats::median({3, 1, 2}) == 2);
  CHECK(stats::median({4, 1, 3, 2}) == doctest::Approx(2.5));
}
