#include "fpplab/experiments.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include "fpplab/path_obs.hpp"
#include "fpplab/rng.hpp"

namespace fpplab {

namespace {

constexpr std::uint64_t kSampleTag = 0x53616d70;
constexpr std::uint64_t kCorridorTag = 0x436f7272;
constexpr std::uint64_t kVarDecompTag = 0x56446370;
constexpr std::uint64_t kBootTag = 0x426f6f74;
constexpr std::uint64_t kAuditTag = 0x41756474;

std::uint64_t dbits(double v) { return std::bit_cast<std::uint64_t>(v); }

FieldSpec field_spec_for(const ExperimentPlan& plan, const Rect& window, std::uint64_t seed) {
  FieldSpec fs(window);
  fs.kind = plan.field_kind;
  fs.ppp_rate = plan.ppp_rate;
  fs.mark_law = plan.mark_law;
  fs.grid_step = plan.noise_grid_step;
  fs.master_seed = seed;
  return fs;
}

}  // namespace

void ExperimentPlan::validate() const {
  model.validate();
  if (n_grid.empty()) throw std::invalid_argument("ExperimentPlan: empty n_grid");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (!(n_grid[i] > 0)) throw std::invalid_argument("ExperimentPlan: n must be positive");
    if (i > 0 && !(n_grid[i] > n_grid[i - 1]))
      throw std::invalid_argument("ExperimentPlan: n_grid must be increasing");
  }
  if (samples_per_n < 2) throw std::invalid_argument("ExperimentPlan: samples_per_n must be >= 2");
  if (direction_angles.empty())
    throw std::invalid_argument("ExperimentPlan: need at least one direction angle");
  if (workers < 1) throw std::invalid_argument("ExperimentPlan: workers must be >= 1");
  if (!(ppp_rate > 0)) throw std::invalid_argument("ExperimentPlan: ppp_rate must be positive");
  if (!(noise_grid_step > 0)) throw std::invalid_argument("ExperimentPlan: bad noise_grid_step");
  if (!(alpha > 0 && alpha < 0.5))
    throw std::invalid_argument("ExperimentPlan: alpha must lie in (0, 1/2)");
  if (!(theta > 0)) throw std::invalid_argument("ExperimentPlan: theta must be positive");
  for (double L : lowertail_levels)
    if (L < 0) throw std::invalid_argument("ExperimentPlan: lowertail levels must be >= 0");
  if (!(vd_len > 0 && vd_halfheight > 0 && vd_block_w > 0 && vd_block_h > 0))
    throw std::invalid_argument("ExperimentPlan: bad var-decomp geometry");
  if (vd_outer < 8) throw std::invalid_argument("ExperimentPlan: vd_outer must be >= 8");
  if (vd_inner < 4 || vd_inner % 2 != 0)
    throw std::invalid_argument("ExperimentPlan: vd_inner must be even and >= 4");
  if (meso_columns < 2) throw std::invalid_argument("ExperimentPlan: meso_columns must be >= 2");
}

double tf_margin(double n) { return 8.0 + 3.0 * std::cbrt(n * n); }

Rect sample_window(double n, double angle) {
  double m = tf_margin(n);
  double c = std::cos(angle), s = std::sin(angle);
  // corners of the oriented corridor [-10, n+10] x [-m, m]
  double xs[2] = {-10.0, n + 10.0};
  double ys[2] = {-m, m};
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (double a : xs)
    for (double b : ys) {
      double px = a * c - b * s, py = a * s + b * c;
      x0 = std::min(x0, px);
      x1 = std::max(x1, px);
      y0 = std::min(y0, py);
      y1 = std::max(y1, py);
    }
  return Rect{x0, x1, y0, y1};
}

std::uint64_t sample_seed(const ExperimentPlan& plan, double n, double angle, int index) {
  return rng::derive(plan.seed_base,
                     {kSampleTag, dbits(n), dbits(angle), static_cast<std::uint64_t>(index)});
}

SampleRecord compute_sample(const ExperimentPlan& plan, double n, double angle, int index,
                            bool want_tf) {
  SampleRecord r;
  r.n = n;
  r.angle = angle;
  r.index = index;
  r.seed = sample_seed(plan, n, angle, index);
  auto t0 = std::chrono::steady_clock::now();
  try {
    FieldSpec fs = field_spec_for(plan, sample_window(n, angle), r.seed);
    ModelInstance m(plan.model, FieldRealization::sample(fs));
    Point u{0, 0}, v{n * std::cos(angle), n * std::sin(angle)};
    Geodesic g = m.passage(u, v);
    r.x = g.passage_time;
    if (want_tf) r.tf = transversal_fluctuation(g);
  } catch (const std::exception& e) {
    r.status = 1;
    r.error = e.what();
  }
  r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                  .count();
  return r;
}

std::vector<SampleRecord> collect_samples(const ExperimentPlan& plan, double n, double angle,
                                          bool want_tf, const SampleFetch* fetch,
                                          const SampleSink* sink) {
  int count = plan.samples_per_n;
  std::vector<SampleRecord> out(count);
  std::vector<int> missing;
  std::vector<char> fresh(count, 0);
  for (int i = 0; i < count; ++i) {
    std::uint64_t seed = sample_seed(plan, n, angle, i);
    const SampleRecord* hit = (fetch && *fetch) ? (*fetch)(n, angle, seed) : nullptr;
    if (hit) {
      out[i] = *hit;
      out[i].index = i;
    } else {
      missing.push_back(i);
      fresh[i] = 1;
    }
  }
  int workers = std::max(1, plan.workers);
  workers = std::min<int>(workers, std::max<std::size_t>(missing.size(), 1));
  if (workers <= 1) {
    for (int i : missing) out[i] = compute_sample(plan, n, angle, i, want_tf);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t j = w; j < missing.size(); j += workers)
          out[missing[j]] = compute_sample(plan, n, angle, missing[j], want_tf);
      });
    for (auto& t : pool) t.join();
  }
  if (sink && *sink)
    for (int i = 0; i < count; ++i)
      if (fresh[i]) (*sink)(out[i]);
  return out;
}

namespace {

struct PerN {
  stats::SampleSet xs;                // successes only
  std::vector<double> tfs;            // paired with xs when collected
};

PerN gather(const ExperimentPlan& plan, double n, double angle, bool want_tf,
            const SampleFetch* fetch, const SampleSink* sink, RunCounters& counters) {
  PerN p;
  p.xs.n = n;
  for (const SampleRecord& r : collect_samples(plan, n, angle, want_tf, fetch, sink)) {
    ++counters.total;
    if (r.status != 0) {
      ++counters.failed;
      continue;
    }
    p.xs.values.push_back(r.x);
    p.xs.seeds.push_back(r.seed);
    if (want_tf) p.tfs.push_back(r.tf);
  }
  return p;
}

stats::TableRow table_row(const ExperimentPlan& plan, const stats::SampleSet& s) {
  stats::TableRow row = stats::summarize(s);
  row.qhat = s.values.size() >= 100 ? stats::qhat_empirical(s.values, plan.theta) : 0.0;
  return row;
}

void finish_table(const ExperimentPlan& plan, stats::ScalingTable& t) {
  stats::build_q_and_w(t, plan.alpha);
  stats::record_points(t, plan.alpha);
}

bool sd_degenerate(const stats::TableRow& r) { return !(r.sd > 1e-12 * (1.0 + std::abs(r.mean))); }

stats::MuEstimate mu_or_fallback(const stats::ScalingTable& t) {
  try {
    return stats::estimate_mu(t);
  } catch (const std::exception&) {
    stats::MuEstimate mu;
    const stats::TableRow& last = t.rows.back();
    mu.mu = last.mean / last.n;
    mu.ci_lo = (last.mean - 2 * last.se_mean) / last.n;
    mu.ci_hi = (last.mean + 2 * last.se_mean) / last.n;
    mu.fit_mu = mu.mu;
    mu.gamma_degenerate = true;
    return mu;
  }
}

}  // namespace

ConcentrationReport run_concentration(const ExperimentPlan& plan, const SampleFetch* fetch,
                                      const SampleSink* sink) {
  plan.validate();
  double angle = plan.direction_angles.front();
  ConcentrationReport rep;
  for (double n : plan.n_grid) {
    PerN p = gather(plan, n, angle, false, fetch, sink, rep.counters);
    stats::TableRow row = table_row(plan, p.xs);
    bool degen = sd_degenerate(row);
    rep.sd_degenerate.push_back(degen);
    std::vector<double> norm;
    if (!degen)
      for (double x : p.xs.values) norm.push_back((x - row.mean) / row.sd);
    rep.normalized.push_back(std::move(norm));
    rep.fits.push_back(!degen && p.xs.values.size() >= 1000 ? stats::fit_tail_exponent(p.xs.values)
                                                           : stats::TailFit{});
    rep.table.rows.push_back(row);
  }
  finish_table(plan, rep.table);
  {
    stats::MuEstimate mu = mu_or_fallback(rep.table);
    for (std::size_t i = 0; i < rep.table.rows.size(); ++i) {
      auto& r = rep.table.rows[i];
      r.a_hat = r.mean - mu.mu * r.n;
      r.theta_hat = rep.fits[i].theta;
      r.r2 = rep.fits[i].r2;
    }
  }
  for (std::size_t i = 1; i < rep.normalized.size(); ++i) {
    if (rep.normalized[i - 1].empty() || rep.normalized[i].empty()) {
      rep.ks_dist.push_back(0);
      rep.ks_p.push_back(1);
      continue;
    }
    auto [d, pv] = stats::ks_two_sample(rep.normalized[i - 1], rep.normalized[i]);
    rep.ks_dist.push_back(d);
    rep.ks_p.push_back(pv);
  }
  return rep;
}

KpzReport run_kpz(const ExperimentPlan& plan, const SampleFetch* fetch, const SampleSink* sink) {
  plan.validate();
  if (plan.n_grid.size() < 3) throw std::invalid_argument("run_kpz: need >= 3 n values");
  double angle = plan.direction_angles.front();
  KpzReport rep;
  std::vector<std::vector<double>> tf_samples;
  for (double n : plan.n_grid) {
    PerN p = gather(plan, n, angle, true, fetch, sink, rep.counters);
    rep.table.rows.push_back(table_row(plan, p.xs));
    rep.mean_tf.push_back(stats::mean(p.tfs));
    rep.median_tf.push_back(p.tfs.empty() ? 0.0 : stats::median(p.tfs));
    tf_samples.push_back(std::move(p.tfs));
  }
  finish_table(plan, rep.table);
  {
    stats::MuEstimate mu = mu_or_fallback(rep.table);
    for (auto& r : rep.table.rows) r.a_hat = r.mean - mu.mu * r.n;
  }
  rep.rows = stats::kpz_ratio(rep.table, tf_samples);
  double rmax = 0, rmin = 1e300;
  for (const auto& r : rep.rows) {
    if (r.r > 0) {
      rmax = std::max(rmax, r.r);
      rmin = std::min(rmin, r.r);
    }
  }
  rep.r_max_over_min = (rmin < 1e300 && rmin > 0) ? rmax / rmin : 0.0;
  const double zs[3] = {1, 2, 4};
  for (std::size_t i = 0; i < plan.n_grid.size(); ++i) {
    std::array<double, 3> f{0, 0, 0};
    double w = rep.table.rows[i].w;
    if (!tf_samples[i].empty()) {
      for (int k = 0; k < 3; ++k) {
        int hits = 0;
        for (double t : tf_samples[i])
          if (t >= zs[k] * w) ++hits;
        f[k] = static_cast<double>(hits) / tf_samples[i].size();
      }
    }
    rep.tail_freq.push_back(f);
  }
  return rep;
}

NonrandomReport run_nonrandom(const ExperimentPlan& plan, const SampleFetch* fetch,
                              const SampleSink* sink) {
  plan.validate();
  double angle = plan.direction_angles.front();
  NonrandomReport rep;
  stats::ScalingTable table;
  std::vector<stats::SampleSet> sets;
  for (double n : plan.n_grid) {
    PerN p = gather(plan, n, angle, false, fetch, sink, rep.counters);
    table.rows.push_back(table_row(plan, p.xs));
    sets.push_back(std::move(p.xs));
  }
  finish_table(plan, table);
  rep.mu = mu_or_fallback(table);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const stats::TableRow& r = table.rows[i];
    NonrandomRow row;
    row.n = r.n;
    row.count = r.count;
    row.mean = r.mean;
    row.se_mean = r.se_mean;
    row.sd = r.sd;
    row.a_hat = r.mean - rep.mu.mu * r.n;
    row.ratio = sd_degenerate(r) ? 0.0 : row.a_hat / r.sd;
    row.a_nonneg_ok = row.a_hat >= -3.0 * r.se_mean;
    // percentile bootstrap for the ratio, mu-hat held fixed
    const auto& vals = sets[i].values;
    if (!vals.empty() && !sd_degenerate(r)) {
      rng::Stream st(rng::derive(plan.seed_base, {kBootTag, dbits(r.n)}));
      const int B = 400;
      std::vector<double> ratios;
      ratios.reserve(B);
      for (int b = 0; b < B; ++b) {
        std::vector<double> rs(vals.size());
        for (auto& x : rs) x = vals[static_cast<std::size_t>(rng::uniform(st) * vals.size())];
        double m = stats::mean(rs), s = stats::sample_sd(rs);
        if (s > 0) ratios.push_back((m - rep.mu.mu * r.n) / s);
      }
      if (!ratios.empty()) {
        std::sort(ratios.begin(), ratios.end());
        row.ci_lo = ratios[static_cast<std::size_t>(0.025 * (ratios.size() - 1))];
        row.ci_hi = ratios[static_cast<std::size_t>(0.975 * (ratios.size() - 1))];
      }
    }
    // subadditivity gate against the doubled scale, when tabulated
    for (std::size_t j = 0; j < table.rows.size(); ++j) {
      if (std::abs(table.rows[j].n - 2 * r.n) < 1e-9) {
        double combined =
            std::sqrt(table.rows[j].se_mean * table.rows[j].se_mean + 4 * r.se_mean * r.se_mean);
        row.subadd_ok = table.rows[j].mean <= 2 * r.mean + 3 * combined;
      }
    }
    rep.rows.push_back(row);
  }
  return rep;
}

CorridorReport run_corridor(const ExperimentPlan& plan, const SampleFetch* fetch,
                            const SampleSink* sink) {
  plan.validate();
  double angle = 0.0;
  CorridorReport rep;
  std::vector<stats::SampleSet> sets;
  for (double n : plan.n_grid) {
    PerN p = gather(plan, n, angle, false, fetch, sink, rep.counters);
    rep.table.rows.push_back(table_row(plan, p.xs));
    sets.push_back(std::move(p.xs));
  }
  finish_table(plan, rep.table);
  rep.mu = mu_or_fallback(rep.table);
  int csamples = plan.corridor_samples > 0 ? plan.corridor_samples : plan.samples_per_n;
  for (std::size_t i = 0; i < plan.n_grid.size(); ++i) {
    double n = plan.n_grid[i];
    const stats::TableRow& row = rep.table.rows[i];
    double H = plan.corridor_height > 0 ? plan.corridor_height : std::max(row.w, 1.0);
    rep.n.push_back(n);
    rep.height.push_back(H);
    std::vector<double> ym(csamples), yp(csamples);
    std::vector<char> ok(csamples, 1);
    Rect corridor{0, n, -H / 2, H / 2};
    Rect window{-8, n + 8, -(0.75 * H + 8), 0.75 * H + 8};
    int workers = std::max(1, plan.workers);
    auto work = [&](int w) {
      for (int s = w; s < csamples; s += workers) {
        std::uint64_t seed = rng::derive(plan.seed_base,
                                         {kCorridorTag, dbits(n), static_cast<std::uint64_t>(s)});
        try {
          ModelInstance m(plan.model,
                          FieldRealization::sample(field_spec_for(plan, window, seed)));
          CorridorQuery q;
          q.rect = corridor;
          q.mode = CorridorQuery::Mode::min;
          ym[s] = corridor_passage(m, q).value;
          q.mode = CorridorQuery::Mode::max;
          yp[s] = corridor_passage(m, q).value;
        } catch (const std::exception&) {
          ok[s] = 0;
        }
      }
    };
    if (workers <= 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
      for (auto& t : pool) t.join();
    }
    std::vector<double> ymn, ypn;
    double sd = sd_degenerate(row) ? 1.0 : row.sd;
    for (int s = 0; s < csamples; ++s) {
      ++rep.counters.total;
      if (!ok[s]) {
        ++rep.counters.failed;
        continue;
      }
      ymn.push_back((ym[s] - rep.mu.mu * n) / sd);
      ypn.push_back((yp[s] - rep.mu.mu * n) / sd);
    }
    rep.fit_minus.push_back(ymn.size() >= 1000 ? stats::fit_tail_exponent(ymn)
                                               : stats::TailFit{});
    rep.fit_plus.push_back(ypn.size() >= 1000 ? stats::fit_tail_exponent(ypn) : stats::TailFit{});
    rep.y_minus_norm.push_back(std::move(ymn));
    rep.y_plus_norm.push_back(std::move(ypn));
  }
  return rep;
}

LowertailReport run_lowertail(const ExperimentPlan& plan, const SampleFetch* fetch,
                              const SampleSink* sink) {
  plan.validate();
  double angle = plan.direction_angles.front();
  LowertailReport rep;
  stats::ScalingTable table;
  std::vector<stats::SampleSet> sets;
  for (double n : plan.n_grid) {
    PerN p = gather(plan, n, angle, false, fetch, sink, rep.counters);
    table.rows.push_back(table_row(plan, p.xs));
    sets.push_back(std::move(p.xs));
  }
  finish_table(plan, table);
  rep.mu = mu_or_fallback(table);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const stats::TableRow& r = table.rows[i];
    for (double L : plan.lowertail_levels) {
      LowertailCell c;
      c.n = r.n;
      c.level = L;
      c.count = static_cast<int>(sets[i].values.size());
      double cut = rep.mu.mu * r.n - L * r.sd;
      for (double x : sets[i].values)
        if (x < cut) ++c.hits;
      c.freq = c.count ? static_cast<double>(c.hits) / c.count : 0.0;
      auto [lo, hi] = stats::wilson_interval(c.hits, std::max(c.count, 1));
      c.ci_lo = lo;
      c.ci_hi = hi;
      rep.cells.push_back(c);
    }
  }
  return rep;
}

bool AuditReport::all_pass() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Fresh model instance on a square window for pointwise metric checks.
ModelInstance audit_instance(const ExperimentPlan& plan, double half, std::uint64_t seed) {
  Rect w{-half, half, -half, half};
  return ModelInstance(plan.model, FieldRealization::sample(field_spec_for(plan, w, seed)));
}

}  // namespace

AuditReport run_assumption_audit(const ExperimentPlan& plan) {
  plan.validate();
  AuditReport rep;
  double n0 = plan.n_grid.front();
  double n_top = plan.n_grid.back();
  RunCounters counters;

  // per-n sampling used by several checks
  stats::ScalingTable table;
  std::vector<stats::SampleSet> sets;
  for (double n : plan.n_grid) {
    PerN p = gather(plan, n, 0.0, false, nullptr, nullptr, counters);
    table.rows.push_back(table_row(plan, p.xs));
    sets.push_back(std::move(p.xs));
  }
  finish_table(plan, table);
  stats::MuEstimate mu = mu_or_fallback(table);

  {  // 1: rotational invariance at 30 degrees
    RunCounters c2;
    ExperimentPlan rot = plan;
    rot.n_grid = {n0};
    PerN p30 = gather(rot, n0, 0.5235987755982988, false, nullptr, nullptr, c2);
    AuditCheck c{1, "rotational invariance (KS 0 vs 30 deg)", "", false};
    if (!sets.front().values.empty() && !p30.xs.values.empty()) {
      auto [d, pv] = stats::ks_two_sample(sets.front().values, p30.xs.values);
      c.statistic = "D=" + fmt(d) + " p=" + fmt(pv);
      c.pass = pv > 0.01;
    } else {
      c.statistic = "no samples";
    }
    rep.checks.push_back(c);
  }
  {  // 2: geodesic existence = solver success rate
    double rate = counters.total ? 1.0 - static_cast<double>(counters.failed) / counters.total : 0;
    rep.checks.push_back(
        {2, "geodesic existence (solver success rate)", fmt(rate), rate >= 0.98});
  }
  {  // 3: mu-hat stability across the two largest scales
    AuditCheck c{3, "mu-hat stability", "", true};
    if (table.rows.size() >= 2) {
      const auto& a = table.rows[table.rows.size() - 2];
      const auto& b = table.rows.back();
      double m1 = a.mean / a.n, m2 = b.mean / b.n;
      double rel = std::abs(m1 - m2) / std::max(std::abs(m2), 1e-12);
      c.statistic = "rel change " + fmt(rel);
      c.pass = rel <= 0.1;
    } else {
      c.statistic = "single scale";
    }
    rep.checks.push_back(c);
  }
  {  // 4: stretched-exponential tail on the sqrt(n) scale
    AuditCheck c{4, "tail exponent at largest scale", "", true};
    const auto& vals = sets.back().values;
    if (vals.size() >= 1000) {
      stats::TailFit f = stats::fit_tail_exponent(vals);
      c.statistic = "theta=" + fmt(f.theta) + " r2=" + fmt(f.r2);
      c.pass = f.theta > 0.2;
    } else {
      c.statistic = "skipped (<1000 samples)";
    }
    rep.checks.push_back(c);
  }
  {  // 5: nonnegative non-random fluctuation A_n
    bool ok = true;
    double worst = 0;
    for (const auto& r : table.rows) {
      double a = r.mean - mu.mu * r.n;
      worst = std::min(worst, a + 3 * r.se_mean);
      if (a < -3 * r.se_mean) ok = false;
    }
    rep.checks.push_back({5, "A_n >= 0 within 3 SE", "min slack " + fmt(worst), ok});
  }
  {  // 6: local ball diameter (largest empty ball seen from query points)
    AuditCheck c{6, "local ball diameter tail", "", true};
    if (plan.field_kind == FieldKind::poisson_marked) {
      ModelInstance m = audit_instance(plan, 12, rng::derive(plan.seed_base, {kAuditTag, 6}));
      rng::Stream st(rng::derive(plan.seed_base, {kAuditTag, 66}));
      double worst = 0;
      for (int i = 0; i < 1000; ++i) {
        Point q{rng::uniform(st, -10, 10), rng::uniform(st, -10, 10)};
        int j = m.field().nearest(q);
        worst = std::max(worst, (m.field().points()[j].pos - q).norm());
      }
      c.statistic = "max nearest distance " + fmt(worst);
      c.pass = worst <= 6.0 / std::sqrt(plan.ppp_rate);
    } else {
      c.statistic = "grid field";
    }
    rep.checks.push_back(c);
  }
  {  // 7: triangle inequality on random triples
    ModelInstance m = audit_instance(plan, 10, rng::derive(plan.seed_base, {kAuditTag, 7}));
    rng::Stream st(rng::derive(plan.seed_base, {kAuditTag, 77}));
    int violations = 0;
    double worst = 0;
    for (int i = 0; i < 1000; ++i) {
      Point u{rng::uniform(st, -9, 9), rng::uniform(st, -9, 9)};
      Point v{rng::uniform(st, -9, 9), rng::uniform(st, -9, 9)};
      Point w{rng::uniform(st, -9, 9), rng::uniform(st, -9, 9)};
      double xuv = m.passage(u, v).passage_time;
      double xuw = m.passage(u, w).passage_time;
      double xwv = m.passage(w, v).passage_time;
      double slack = xuw + xwv - xuv;
      worst = std::min(worst, slack);
      if (slack < -1e-9 * (1.0 + xuv)) ++violations;
    }
    rep.checks.push_back({7, "triangle inequality violations",
                          fmt(violations) + " (worst slack " + fmt(worst) + ")",
                          violations == 0});
  }
  {  // 8: concatenation defect of geodesics
    double worst_neg = 0, worst_abs = 0;
    for (int i = 0; i < 50; ++i) {
      std::uint64_t seed = rng::derive(plan.seed_base, {kAuditTag, 8, static_cast<std::uint64_t>(i)});
      try {
        FieldSpec fs = field_spec_for(plan, sample_window(n0, 0), seed);
        ModelInstance m(plan.model, FieldRealization::sample(fs));
        Geodesic g = m.passage({0, 0}, {n0, 0});
        double d = gamma_defect(m, g, {0.25, 0.5, 0.75});
        worst_neg = std::min(worst_neg, d);
        worst_abs = std::max(worst_abs, std::abs(d));
      } catch (const std::exception&) {
      }
    }
    bool ok = worst_neg >= -1e-9 * (1.0 + mu.mu * n0);
    if (plan.model.kind == ModelKind::riemannian)
      ok = ok && worst_abs <= 1e-9 * (1.0 + mu.mu * n0);
    rep.checks.push_back({8, "concatenation defect",
                          "worst " + fmt(worst_neg) + ", max |.| " + fmt(worst_abs), ok});
  }
  {  // 9: variance positivity across scales
    bool ok = true;
    for (const auto& r : table.rows)
      if (sd_degenerate(r)) ok = false;
    rep.checks.push_back({9, "SD positive at every n", ok ? "all > 0" : "degenerate scale", ok});
  }
  {  // 10: first-crossing heights of long geodesics stay within the margin
    rng::Stream st(rng::derive(plan.seed_base, {kAuditTag, 10}));
    double worst = 0;
    double band = tf_margin(n0) / 3;
    int done = 0;
    for (int i = 0; i < 50; ++i) {
      std::uint64_t seed =
          rng::derive(plan.seed_base, {kAuditTag, 100, static_cast<std::uint64_t>(i)});
      double y1 = rng::uniform(st, -band, band), y2 = rng::uniform(st, -band, band);
      try {
        FieldSpec fs = field_spec_for(plan, sample_window(2 * n0, 0), seed);
        ModelInstance m(plan.model, FieldRealization::sample(fs));
        worst = std::max(worst, std::abs(local_tf_audit(m, n0, 2, y1, y2)));
        ++done;
      } catch (const std::exception&) {
      }
    }
    rep.checks.push_back({10, "mid-crossing height within margin",
                          "max |H| " + fmt(worst) + " over " + fmt(done),
                          done > 0 && worst <= tf_margin(n0)});
  }
  {  // 11: locality -- confined geodesics unchanged under outside resampling
    int okcount = 0, confined = 0;
    const int trials = 100;
    double nloc = std::min(n0, 32.0);
    double m_half = tf_margin(nloc) * 0.6;
    Rect lam{-4, nloc + 4, -m_half, m_half};
    for (int i = 0; i < trials; ++i) {
      std::uint64_t seed =
          rng::derive(plan.seed_base, {kAuditTag, 11, static_cast<std::uint64_t>(i)});
      try {
        FieldSpec fs = field_spec_for(plan, sample_window(nloc, 0), seed);
        ModelInstance m(plan.model, FieldRealization::sample(fs));
        Geodesic g = m.passage({0, 0}, {nloc, 0});
        bool inside = true;
        for (const Point& p : g.vertices)
          if (!(p.x() > lam.x0 + 2 && p.x() < lam.x1 - 2 && p.y() > lam.y0 + 2 &&
                p.y() < lam.y1 - 2))
            inside = false;
        if (!inside) {
          ++okcount;  // nothing to check for this instance
          continue;
        }
        ++confined;
        Geodesic g2 = m.passage_resampled({0, 0}, {nloc, 0},
                                          RegionSelector::complement_of_rect(lam), seed ^ 0x5a5a);
        if (std::abs(g2.passage_time - g.passage_time) <= 1e-9 * (1.0 + g.passage_time))
          ++okcount;
      } catch (const std::exception&) {
      }
    }
    rep.checks.push_back({11, "locality under outside resampling",
                          fmt(okcount) + "/" + fmt(trials) + " (confined " + fmt(confined) + ")",
                          okcount >= 99});
  }
  {  // 12: resampling preserves the outside exactly
    bool ok = true;
    for (int i = 0; i < 100 && ok; ++i) {
      std::uint64_t seed =
          rng::derive(plan.seed_base, {kAuditTag, 12, static_cast<std::uint64_t>(i)});
      FieldSpec fs = field_spec_for(plan, Rect{-8, 8, -8, 8}, seed);
      FieldRealization f = FieldRealization::sample(fs);
      RegionSelector sel = RegionSelector::from_rect(Rect{-3, 3, -3, 3});
      FieldRealization g = f.resampled(sel, seed ^ 0xa5a5);
      if (fs.kind == FieldKind::poisson_marked) {
        for (const auto& p : f.points()) {
          if (sel.contains(p.pos)) continue;
          bool found = false;
          for (const auto& q : g.points())
            if (q.pos.x() == p.pos.x() && q.pos.y() == p.pos.y() && q.mark == p.mark) {
              found = true;
              break;
            }
          if (!found) ok = false;
        }
      } else {
        for (int j = 0; j < f.grid_ny() && ok; ++j)
          for (int i2 = 0; i2 < f.grid_nx(); ++i2)
            if (!sel.contains(f.grid_node(i2, j)) && g.grid_value(i2, j) != f.grid_value(i2, j))
              ok = false;
      }
    }
    rep.checks.push_back({12, "outside region preserved bit-for-bit", ok ? "exact" : "mismatch",
                          ok});
  }
  return rep;
}

VarDecompReport run_var_decomp(const ExperimentPlan& plan,
                               std::function<double(const FieldRealization&)> functional) {
  plan.validate();
  Rect core{0, plan.vd_len, -plan.vd_halfheight, plan.vd_halfheight};
  int nbx = static_cast<int>(std::lround(plan.vd_len / plan.vd_block_w));
  int nby = static_cast<int>(std::lround(2 * plan.vd_halfheight / plan.vd_block_h));
  if (nbx < 1 || nby < 1 || std::abs(nbx * plan.vd_block_w - plan.vd_len) > 1e-9 ||
      std::abs(nby * plan.vd_block_h - 2 * plan.vd_halfheight) > 1e-9)
    throw std::invalid_argument("run_var_decomp: blocks must tile the core window");
  const int K = nbx * nby;
  const int S = plan.vd_outer;
  const int half_sz = plan.vd_inner / 2;

  bool default_functional = !functional;
  Point u{1, 0}, v{plan.vd_len - 1, 0};
  if (default_functional) {
    ModelSpec ms = plan.model;
    functional = [ms, u, v](const FieldRealization& f) {
      return ModelInstance(ms, f).passage(u, v).passage_time;
    };
  }

  // selector for "everything not yet revealed" after k blocks (row-major)
  auto remainder = [&](int k) {
    BlockMask m;
    m.x0 = core.x0;
    m.y0 = core.y0;
    m.bw = plan.vd_block_w;
    m.bh = plan.vd_block_h;
    m.nbx = nbx;
    m.nby = nby;
    m.mask.assign(static_cast<std::size_t>(K), 0);
    for (int b = k; b < K; ++b) m.mask[b] = 1;
    m.outside = false;  // the field window is exactly the block union
    return RegionSelector::from_blocks(std::move(m));
  };

  std::vector<double> xs(S, 0.0);
  std::vector<char> covered(S, 1);
  // prod[k-1][s] = split-half product estimate of (a_k - a_{k-1})^2 at outer s
  std::vector<std::vector<double>> prod(K, std::vector<double>(S, 0.0));

  int workers = std::max(1, plan.workers);
  auto outer_work = [&](int w) {
    for (int s = w; s < S; s += workers) {
      std::uint64_t oseed = rng::derive(plan.seed_base, {kVarDecompTag, static_cast<std::uint64_t>(s)});
      FieldSpec fs = field_spec_for(plan, core, oseed);
      FieldRealization base = FieldRealization::sample(fs);
      xs[s] = functional(base);
      if (default_functional) {
        ModelSpec ms = plan.model;
        Geodesic g = ModelInstance(ms, base).passage(u, v);
        for (const Point& p : g.vertices)
          if (!core.contains(p)) covered[s] = 0;
      }
      // a-hat[k][half]; inner resample seeds shared across k (common random
      // numbers), so increments of blocks the functional ignores vanish
      // exactly.
      std::vector<std::array<double, 2>> ahat(K + 1);
      for (int h = 0; h < 2; ++h) {
        std::vector<std::uint64_t> iseeds(half_sz);
        for (int j = 0; j < half_sz; ++j)
          iseeds[j] = rng::derive(oseed, {static_cast<std::uint64_t>(h) + 1,
                                          static_cast<std::uint64_t>(j)});
        for (int k = 0; k <= K; ++k) {
          if (k == K) {
            ahat[k][h] = xs[s];  // nothing left to resample
            continue;
          }
          RegionSelector sel = remainder(k);
          double acc = 0;
          for (int j = 0; j < half_sz; ++j) acc += functional(base.resampled(sel, iseeds[j]));
          ahat[k][h] = acc / half_sz;
        }
      }
      for (int k = 1; k <= K; ++k)
        prod[k - 1][s] = (ahat[k][0] - ahat[k - 1][0]) * (ahat[k][1] - ahat[k - 1][1]);
    }
  };
  if (workers <= 1) {
    outer_work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(outer_work, w);
    for (auto& t : pool) t.join();
  }

  VarDecompReport rep;
  rep.blocks_x = nbx;
  rep.blocks_y = nby;
  double cov = 0;
  for (int s = 0; s < S; ++s) cov += covered[s];
  rep.coverage_fraction = default_functional ? cov / S : 1.0;

  double mx = stats::mean(xs);
  double var = 0;
  for (double x : xs) var += (x - mx) * (x - mx);
  var /= (S - 1);
  rep.total_variance = var;
  {  // jackknife SE of the variance
    double sum = 0, sumsq = 0;
    for (double x : xs) {
      sum += x;
      sumsq += x * x;
    }
    std::vector<double> loo(S);
    for (int s = 0; s < S; ++s) {
      double m1 = (sum - xs[s]) / (S - 1);
      double v1 = (sumsq - xs[s] * xs[s] - (S - 1) * m1 * m1) / (S - 2);
      loo[s] = v1;
    }
    double lm = stats::mean(loo), acc = 0;
    for (double l : loo) acc += (l - lm) * (l - lm);
    rep.total_se = std::sqrt(acc * (S - 1) / S);
  }
  std::vector<double> per_outer_sum(S, 0.0);
  for (int k = 0; k < K; ++k) {
    double m = stats::mean(prod[k]);
    rep.increments.push_back(m);
    rep.increment_se.push_back(stats::sample_sd(prod[k]) / std::sqrt(static_cast<double>(S)));
    for (int s = 0; s < S; ++s) per_outer_sum[s] += prod[k][s];
  }
  rep.sum_increments = stats::mean(per_outer_sum);
  rep.sum_se = stats::sample_sd(per_outer_sum) / std::sqrt(static_cast<double>(S));
  return rep;
}

MesoReport run_meso_crossings(const ExperimentPlan& plan) {
  plan.validate();
  double n = plan.n_grid.front();
  int M = plan.meso_columns;
  MesoReport rep;

  // W_n from a point-to-point pilot at scale n
  ExperimentPlan pilot = plan;
  pilot.n_grid = {n};
  RunCounters pc;
  PerN p = gather(pilot, n, 0.0, false, nullptr, nullptr, pc);
  stats::ScalingTable t;
  t.rows.push_back(table_row(plan, p.xs));
  finish_table(plan, t);
  double W = std::max(t.rows.front().w, 1.0);

  int count = plan.samples_per_n;
  std::vector<double> tau(count, -1.0);
  std::vector<std::vector<long>> jumps(count);
  int workers = std::max(1, plan.workers);
  auto work = [&](int w) {
    for (int s = w; s < count; s += workers) {
      std::uint64_t seed =
          rng::derive(plan.seed_base, {0x4d65736f, static_cast<std::uint64_t>(s)});
      try {
        FieldSpec fs = field_spec_for(plan, sample_window(M * n, 0), seed);
        ModelInstance m(plan.model, FieldRealization::sample(fs));
        Geodesic g = m.passage({0, 0}, {M * n, 0});
        CrossingProfile cp = crossing_profile(g, n, M, W);
        tau[s] = tau1_of_profile(g, cp, W);
        long prev = static_cast<long>(std::floor(g.vertices.front().y() / W));
        for (long k : cp.k_indices) {
          jumps[s].push_back(std::labs(k - prev));
          prev = k;
        }
        jumps[s].push_back(
            std::labs(static_cast<long>(std::floor(g.vertices.back().y() / W)) - prev));
      } catch (const std::exception&) {
      }
    }
  };
  if (workers <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t2 : pool) t2.join();
  }
  std::vector<double> per_col;
  for (int s = 0; s < count; ++s) {
    ++rep.counters.total;
    if (tau[s] < 0) {
      ++rep.counters.failed;
      continue;
    }
    rep.tau1.push_back(tau[s]);
    per_col.push_back(tau[s] / M);
    for (long j : jumps[s]) {
      if (static_cast<std::size_t>(j) >= rep.jump_hist.size()) rep.jump_hist.resize(j + 1, 0);
      ++rep.jump_hist[j];
    }
  }
  rep.mean_tau1_per_col = stats::mean(per_col);
  rep.se = per_col.empty() ? 0.0
                           : stats::sample_sd(per_col) / std::sqrt(static_cast<double>(per_col.size()));
  return rep;
}

}  // namespace fpplab
