#include "fpplab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fpplab::stats {

double mean(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("mean: empty");
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) throw std::invalid_argument("sample_sd: need >= 2 values");
  double m = mean(v), s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty");
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return (n % 2) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

TableRow summarize(const SampleSet& s) {
  if (s.values.size() < 2) throw std::invalid_argument("summarize: need >= 2 samples");
  TableRow r;
  r.n = s.n;
  r.count = static_cast<int>(s.values.size());
  r.mean = mean(s.values);
  r.sd = sample_sd(s.values);
  r.se_mean = r.sd / std::sqrt(static_cast<double>(r.count));
  r.se_sd = r.sd / std::sqrt(2.0 * (r.count - 1));
  return r;
}

MuEstimate estimate_mu(const ScalingTable& table) {
  const auto& rows = table.rows;
  if (rows.size() < 3 || rows.back().n < 4 * rows.front().n)
    throw std::invalid_argument("estimate_mu: need >= 3 scales spanning a factor >= 4");
  MuEstimate out;
  const TableRow& top = rows.back();
  out.mu = top.mean / top.n;
  out.ci_lo = (top.mean - 1.96 * top.se_mean) / top.n;
  out.ci_hi = (top.mean + 1.96 * top.se_mean) / top.n;

  // Diagnostic: least squares of mean(n) = mu*n + a*n^gamma over a gamma grid.
  double best_rss = std::numeric_limits<double>::infinity();
  for (double gamma = 0.05; gamma < 0.96; gamma += 0.05) {
    // Normal equations for the two-column design [n, n^gamma].
    double s11 = 0, s12 = 0, s22 = 0, b1 = 0, b2 = 0;
    for (const auto& r : rows) {
      double c1 = r.n, c2 = std::pow(r.n, gamma);
      s11 += c1 * c1;
      s12 += c1 * c2;
      s22 += c2 * c2;
      b1 += c1 * r.mean;
      b2 += c2 * r.mean;
    }
    double det = s11 * s22 - s12 * s12;
    if (std::abs(det) < 1e-12 * s11 * s22) continue;
    double mu = (b1 * s22 - b2 * s12) / det;
    double a = (s11 * b2 - s12 * b1) / det;
    double rss = 0;
    for (const auto& r : rows) {
      double pred = mu * r.n + a * std::pow(r.n, gamma);
      rss += (r.mean - pred) * (r.mean - pred);
    }
    if (rss < best_rss) {
      best_rss = rss;
      out.fit_mu = mu;
      out.fit_a = a;
      out.fit_gamma = gamma;
    }
  }
  // Degenerate when the correction term carries no signal.
  double scale = std::abs(top.mean) + 1e-300;
  out.gamma_degenerate =
      std::abs(out.fit_a) * std::pow(top.n, out.fit_gamma) < 1e-7 * scale || best_rss < 1e-18 * scale * scale;
  return out;
}

double qhat_empirical(const std::vector<double>& values, double theta) {
  if (values.size() < 100) throw std::invalid_argument("qhat_empirical: need >= 100 samples");
  if (!(theta > 0)) throw std::invalid_argument("qhat_empirical: theta must be positive");
  double m = mean(values);
  std::vector<double> dev(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) dev[i] = std::abs(values[i] - m);
  std::sort(dev.begin(), dev.end(), std::greater<>());
  double N = static_cast<double>(dev.size());
  if (dev.front() == 0.0) return 0.0;

  // Feasible(Q): empirical survival just below each deviation is dominated by
  // exp(1 - (x/Q)^theta).  Monotone in Q, so bisect.
  auto feasible = [&](double Q) {
    for (std::size_t k = 0; k < dev.size(); ++k) {
      if (dev[k] == 0.0) break;
      double surv = static_cast<double>(k + 1) / N;
      if (surv > std::exp(1.0 - std::pow(dev[k] / Q, theta))) return false;
    }
    return true;
  };
  double hi = dev.front();
  while (!feasible(hi)) hi *= 2;
  double lo = 0;
  for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (feasible(mid) ? hi : lo) = mid;
  }
  return hi;
}

void build_q_and_w(ScalingTable& table, double alpha) {
  if (!(alpha > 0 && alpha < 0.5)) throw std::invalid_argument("build_q_and_w: need 0 < alpha < 1/2");
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    double n = table.rows[i].n, q = 0;
    for (std::size_t j = 0; j <= i; ++j) {
      double m = table.rows[j].n;
      q = std::max(q, std::pow(n / m, alpha) * table.rows[j].qhat);
    }
    table.rows[i].q = q;
    table.rows[i].w = std::sqrt(n * q);
  }
}

void record_points(ScalingTable& table, double alpha,
                   std::optional<std::pair<double, double>> quasi) {
  build_q_and_w(table, alpha);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    TableRow& r = table.rows[i];
    r.is_record = std::abs(r.q - r.qhat) <= 1e-9 * std::max(r.qhat, 1e-300);
    if (quasi) {
      auto [C, alpha_p] = *quasi;
      double sup = 0;
      for (std::size_t j = 0; j <= i; ++j)
        sup = std::max(sup, std::pow(r.n / table.rows[j].n, alpha_p) * table.rows[j].qhat);
      r.is_quasi = sup <= C * r.qhat * (1 + 1e-12);
    }
  }
}

TailFit fit_tail_exponent(const std::vector<double>& values) {
  if (values.size() < 1000) throw std::invalid_argument("fit_tail_exponent: need >= 1000 samples");
  double m = mean(values), sd = sample_sd(values);
  if (sd == 0.0) throw std::invalid_argument("fit_tail_exponent: degenerate tail");
  std::vector<double> dev(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) dev[i] = std::abs(values[i] - m) / sd;
  std::sort(dev.begin(), dev.end(), std::greater<>());
  double N = static_cast<double>(dev.size());
  std::size_t K = dev.size() / 5;

  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < K; ++k) {
    double x = dev[k];
    if (x <= 0) break;
    double surv = (static_cast<double>(k) + 0.5) / N;
    xs.push_back(x);
    ys.push_back(-std::log(surv));
  }
  if (xs.size() < 10) throw std::invalid_argument("fit_tail_exponent: degenerate tail");

  // Fit -log S = c * x^theta + d.  A free offset d is essential: for an
  // exponential tail -log S = x + const, and forcing d = 0 (the plain log-log
  // regression) biases theta low.  Linear least squares in (c, d) for fixed
  // theta; theta by grid search with one refinement pass.
  double my = mean(ys), tss = 0;
  for (double y : ys) tss += (y - my) * (y - my);
  double nn = static_cast<double>(xs.size());
  auto rss_at = [&](double theta, double& c_out, double& d_out) {
    double st = 0, stt = 0, sty = 0, sy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      double t = std::pow(xs[i], theta);
      st += t;
      stt += t * t;
      sty += t * ys[i];
      sy += ys[i];
    }
    double det = nn * stt - st * st;
    if (!(det > 1e-12 * nn * stt)) return std::numeric_limits<double>::infinity();
    double c = (nn * sty - st * sy) / det;
    double d = (sy - c * st) / nn;
    if (!(c > 0)) return std::numeric_limits<double>::infinity();
    double rss = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      double e = ys[i] - c * std::pow(xs[i], theta) - d;
      rss += e * e;
    }
    c_out = c;
    d_out = d;
    return rss;
  };
  TailFit f;
  double best_rss = std::numeric_limits<double>::infinity();
  auto scan = [&](double lo, double hi, double step) {
    for (double th = lo; th <= hi; th *= step) {
      double c = 0, d = 0;
      double rss = rss_at(th, c, d);
      if (rss < best_rss) {
        best_rss = rss;
        f.theta = th;
        f.c = c;
      }
    }
  };
  scan(0.05, 5.0, 1.04);
  if (best_rss < std::numeric_limits<double>::infinity())
    scan(f.theta / 1.04, f.theta * 1.04, 1.004);
  f.r2 = (tss == 0 || !(best_rss < std::numeric_limits<double>::infinity()))
             ? 0.0
             : std::max(0.0, 1.0 - best_rss / tss);
  f.x_lo = dev[K - 1];
  f.x_hi = dev[0];
  return f;
}

std::vector<KpzRow> kpz_ratio(const ScalingTable& table,
                              const std::vector<std::vector<double>>& tf_samples) {
  if (tf_samples.size() != table.rows.size())
    throw std::invalid_argument("kpz_ratio: per-n tf samples must match table rows");
  std::vector<KpzRow> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const TableRow& r = table.rows[i];
    const auto& tf = tf_samples[i];
    if (r.sd == 0) throw std::invalid_argument("kpz_ratio: zero SD");
    double mtf = mean(tf);
    double se_mtf = sample_sd(tf) / std::sqrt(static_cast<double>(tf.size()));
    KpzRow k;
    k.n = r.n;
    k.r = mtf * mtf / (r.n * r.sd);
    k.r_median = median(tf) * median(tf) / (r.n * r.sd);
    // Delta method over (mean tf, sd):
    double d_mtf = 2 * mtf / (r.n * r.sd);
    double d_sd = -mtf * mtf / (r.n * r.sd * r.sd);
    k.se_r = std::sqrt(d_mtf * d_mtf * se_mtf * se_mtf + d_sd * d_sd * r.se_sd * r.se_sd);
    out.push_back(k);
  }
  return out;
}

std::pair<double, double> ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  double en = std::sqrt(na * nb / (na + nb));
  double lambda = (en + 0.12 + 0.11 / en) * d;
  double p = 0;
  for (int k = 1; k <= 100; ++k) {
    double term = 2 * std::pow(-1.0, k - 1) * std::exp(-2.0 * k * k * lambda * lambda);
    p += term;
    if (std::abs(term) < 1e-12) break;
  }
  p = std::clamp(p, 0.0, 1.0);
  return {d, p};
}

namespace {
// Regularized lower incomplete gamma P(a,x) by series / continued fraction.
double gamma_p(double a, double x) {
  if (x < 0 || a <= 0) throw std::invalid_argument("gamma_p: bad arguments");
  if (x == 0) return 0;
  double gln = std::lgamma(a);
  if (x < a + 1) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - gln);
  }
  // Lentz continued fraction for Q(a,x).
  double b = x + 1 - a, c = 1e300, d = 1 / b, h = d;
  for (int i = 1; i <= 500; ++i) {
    double an = -static_cast<double>(i) * (i - a);
    b += 2;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  double q = std::exp(-x + a * std::log(x) - gln) * h;
  return 1 - q;
}
}  // namespace

double chi2_sf(double x, int k) {
  if (k <= 0) throw std::invalid_argument("chi2_sf: dof must be positive");
  if (x <= 0) return 1.0;
  return 1.0 - gamma_p(0.5 * k, 0.5 * x);
}

std::pair<double, double> wilson_interval(int hits, int trials) {
  if (trials <= 0) throw std::invalid_argument("wilson_interval: no trials");
  double z = 1.96, n = trials, p = static_cast<double>(hits) / n;
  double denom = 1 + z * z / n;
  double center = (p + z * z / (2 * n)) / denom;
  double half = z * std::sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom;
  double lo = hits == 0 ? 0.0 : std::max(0.0, center - half);
  double hi = hits == trials ? 1.0 : std::min(1.0, center + half);
  return {lo, hi};
}

}  // namespace fpplab::stats
