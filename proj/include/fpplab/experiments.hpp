#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fpplab/field.hpp"
#include "fpplab/models.hpp"
#include "fpplab/stats.hpp"

namespace fpplab {

enum class ExperimentKind {
  concentration,
  kpz,
  nonrandom,
  corridor,
  lowertail,
  tf_tail,
  assumptions,
  var_decomp,
  meso_crossings,
};

struct ExperimentPlan {
  ModelSpec model;
  FieldKind field_kind = FieldKind::poisson_marked;
  MarkLaw mark_law = MarkLaw::exponential_unit;
  double ppp_rate = 1.0;
  double noise_grid_step = 0.25;

  std::vector<double> n_grid{64, 128, 256, 512};
  int samples_per_n = 2000;
  std::vector<double> direction_angles{0.0};
  std::uint64_t seed_base = 1;
  ExperimentKind experiment = ExperimentKind::concentration;
  int workers = 1;

  // scaling-table knobs
  double alpha = 1.0 / 30.0;  // envelope exponent for Q_n
  double theta = 1.0;    // stretched-exponential exponent for Qhat

  // corridor knobs
  double corridor_height = 0.0;  // 0 -> use W_n from the scaling table
  int corridor_samples = 0;      // 0 -> samples_per_n

  // lowertail knobs
  std::vector<double> lowertail_levels{0, 1, 2};

  // var-decomp knobs: core window [0,len] x [-halfheight,halfheight] tiled by
  // blocks of block_w x block_h model units, revealed row-major.
  double vd_len = 32, vd_halfheight = 4;
  double vd_block_w = 4, vd_block_h = 4;
  int vd_outer = 256, vd_inner = 64;

  // meso-crossing knobs
  int meso_columns = 4;

  void validate() const;  // throws std::invalid_argument
};

// Vertical half-width of the simulation window around the endpoint chord;
// generous against transversal fluctuations at scale n^(2/3).
double tf_margin(double n);

// Axis-aligned bounding window for a passage query of length n at the given
// direction angle (endpoints (0,0) and n*(cos a, sin a)).
Rect sample_window(double n, double angle);

struct SampleRecord {
  double n = 0;
  double angle = 0;
  int index = 0;
  std::uint64_t seed = 0;
  double x = 0;
  double tf = 0;
  int status = 0;  // 0 ok, nonzero failed
  std::string error;
  double wall_ms = 0;
};

// Resume hook: return a previously computed record for this key, if any.
using SampleFetch =
    std::function<const SampleRecord*(double n, double angle, std::uint64_t seed)>;
// Streaming log hook, invoked in canonical index order.
using SampleSink = std::function<void(const SampleRecord&)>;

std::uint64_t sample_seed(const ExperimentPlan& plan, double n, double angle, int index);

// One passage-time draw on a fresh environment; never throws (failures are
// recorded in status/error).
SampleRecord compute_sample(const ExperimentPlan& plan, double n, double angle, int index,
                            bool want_tf);

// samples_per_n draws at (n, angle), statically partitioned across
// plan.workers; output order and content are worker-count independent.
std::vector<SampleRecord> collect_samples(const ExperimentPlan& plan, double n, double angle,
                                          bool want_tf, const SampleFetch* fetch = nullptr,
                                          const SampleSink* sink = nullptr);

struct RunCounters {
  int total = 0, failed = 0;
  bool exclusion_ok() const { return total == 0 || failed <= 0.02 * total; }
};

struct ConcentrationReport {
  stats::ScalingTable table;
  std::vector<stats::TailFit> fits;            // per n
  std::vector<bool> sd_degenerate;             // per n
  std::vector<double> ks_dist, ks_p;           // consecutive pairs of n
  std::vector<std::vector<double>> normalized;  // per n, (x - mean)/sd
  RunCounters counters;
};
ConcentrationReport run_concentration(const ExperimentPlan& plan,
                                      const SampleFetch* fetch = nullptr,
                                      const SampleSink* sink = nullptr);

struct KpzReport {
  stats::ScalingTable table;
  std::vector<stats::KpzRow> rows;
  double r_max_over_min = 0;
  // tail_freq[i][j] = P-hat[tf >= z_j * W_n_i], z = {1,2,4}
  std::vector<std::array<double, 3>> tail_freq;
  std::vector<double> mean_tf, median_tf;
  RunCounters counters;
};
KpzReport run_kpz(const ExperimentPlan& plan, const SampleFetch* fetch = nullptr,
                  const SampleSink* sink = nullptr);

struct NonrandomRow {
  double n = 0;
  int count = 0;
  double mean = 0, se_mean = 0, sd = 0;
  double a_hat = 0;          // mean - mu*n
  double ratio = 0;          // a_hat / sd
  double ci_lo = 0, ci_hi = 0;  // bootstrap CI for ratio
  bool a_nonneg_ok = true;   // a_hat >= -3*se
  bool subadd_ok = true;     // mean(2n) <= 2 mean(n) + 3 se, when 2n tabulated
};
struct NonrandomReport {
  stats::MuEstimate mu;
  std::vector<NonrandomRow> rows;
  RunCounters counters;
};
NonrandomReport run_nonrandom(const ExperimentPlan& plan, const SampleFetch* fetch = nullptr,
                              const SampleSink* sink = nullptr);

struct CorridorReport {
  std::vector<double> n;
  std::vector<double> height;                      // rectangle height used
  std::vector<std::vector<double>> y_minus_norm;   // (Y- - n mu)/sd per n
  std::vector<std::vector<double>> y_plus_norm;
  std::vector<stats::TailFit> fit_minus, fit_plus;
  stats::MuEstimate mu;
  stats::ScalingTable table;  // from the point-to-point samples
  RunCounters counters;
};
CorridorReport run_corridor(const ExperimentPlan& plan, const SampleFetch* fetch = nullptr,
                            const SampleSink* sink = nullptr);

struct LowertailCell {
  double n = 0, level = 0;
  int hits = 0, count = 0;
  double freq = 0, ci_lo = 0, ci_hi = 0;
};
struct LowertailReport {
  stats::MuEstimate mu;
  std::vector<LowertailCell> cells;  // n-major, level-minor
  RunCounters counters;
};
LowertailReport run_lowertail(const ExperimentPlan& plan, const SampleFetch* fetch = nullptr,
                              const SampleSink* sink = nullptr);

struct AuditCheck {
  int id = 0;
  std::string name;
  std::string statistic;  // human-readable value summary
  bool pass = false;
};
struct AuditReport {
  std::vector<AuditCheck> checks;
  bool all_pass() const;
};
AuditReport run_assumption_audit(const ExperimentPlan& plan);

struct VarDecompReport {
  double total_variance = 0, total_se = 0;
  std::vector<double> increments, increment_se;  // reveal order, last = tail region
  double sum_increments = 0, sum_se = 0;
  double coverage_fraction = 0;
  int blocks_x = 0, blocks_y = 0;
};
// functional: if empty, the plan's model passage time across the core window.
VarDecompReport run_var_decomp(const ExperimentPlan& plan,
                               std::function<double(const FieldRealization&)> functional = {});

struct MesoReport {
  std::vector<double> tau1;        // per sample
  double mean_tau1_per_col = 0, se = 0;
  std::vector<long> jump_hist;     // |k_i - k_{i-1}| histogram, index = jump size
  RunCounters counters;
};
MesoReport run_meso_crossings(const ExperimentPlan& plan);

}  // namespace fpplab
