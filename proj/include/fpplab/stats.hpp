#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace fpplab::stats {

struct SampleSet {
  double n = 0;
  std::vector<double> values;
  std::vector<std::uint64_t> seeds;
};

struct TableRow {
  double n = 0;
  int count = 0;
  double mean = 0, se_mean = 0, sd = 0, se_sd = 0;
  double a_hat = 0;      // mean - mu*n (filled once mu is known)
  double qhat = 0, q = 0, w = 0;
  double theta_hat = 0, r2 = 0;
  bool is_record = false, is_quasi = false;
};

struct ScalingTable {
  std::vector<TableRow> rows;  // sorted by n ascending
};

struct TailFit {
  double theta = 0, c = 0, r2 = 0;
  double x_lo = 0, x_hi = 0;  // fitted deviation range
};

struct MuEstimate {
  double mu = 0, ci_lo = 0, ci_hi = 0;
  double fit_mu = 0, fit_a = 0, fit_gamma = 0;
  bool gamma_degenerate = false;
};

double mean(const std::vector<double>& v);
double sample_sd(const std::vector<double>& v);

TableRow summarize(const SampleSet& s);

// mu-hat from the largest tabulated scale plus a slope-based diagnostic fit
// mean(n) = mu*n + a*n^gamma.  Requires >= 3 scales spanning a factor >= 4.
MuEstimate estimate_mu(const ScalingTable& table);

// Smallest Q such that the empirical survival function of |X - mean| is
// dominated by exp(1 - (x/Q)^theta); computed by bisection.
double qhat_empirical(const std::vector<double>& values, double theta);

// Fill Q_n = max over tabulated m<=n of (n/m)^alpha Qhat_m and W = sqrt(nQ).
void build_q_and_w(ScalingTable& table, double alpha);

// Flag alpha-record points (Q_n == Qhat_n) and optionally (C,alpha')-quasi
// record points.
void record_points(ScalingTable& table, double alpha,
                   std::optional<std::pair<double, double>> quasi = std::nullopt);

// Stretched-exponential tail fit of normalized deviations, top quintile.
TailFit fit_tail_exponent(const std::vector<double>& values);

struct KpzRow {
  double n = 0, r = 0, se_r = 0, r_median = 0;
};
// r_n = (mean tf)^2 / (n * sd) with delta-method SE; median variant alongside.
std::vector<KpzRow> kpz_ratio(const ScalingTable& table,
                              const std::vector<std::vector<double>>& tf_samples);

// Two-sample Kolmogorov-Smirnov distance and asymptotic p-value.
std::pair<double, double> ks_two_sample(std::vector<double> a, std::vector<double> b);

// Upper tail of chi-squared with k dof at value x (for goodness-of-fit tests).
double chi2_sf(double x, int k);

// Wilson score interval for a binomial proportion at ~95%.
std::pair<double, double> wilson_interval(int hits, int trials);

double median(std::vector<double> v);

}  // namespace fpplab::stats
