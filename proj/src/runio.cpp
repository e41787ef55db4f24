#include "fpplab/runio.hpp"

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace fpplab::runio {

namespace {

const char* kVersion = "0.1.0";

[[noreturn]] void semantic_error(const std::string& path, const std::string& msg) {
  throw std::invalid_argument("config: " + path + ": " + msg);
}

void check_keys(const ordered_json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok) semantic_error(path.empty() ? it.key() : path + "." + it.key(), "unknown key");
  }
}

template <class T>
void get_if(const ordered_json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

ModelKind model_from(const std::string& s) {
  if (s == "voronoi") return ModelKind::voronoi;
  if (s == "voronoi_weighted") return ModelKind::voronoi_weighted;
  if (s == "howard_newman") return ModelKind::howard_newman;
  if (s == "rgg") return ModelKind::rgg;
  if (s == "riemannian") return ModelKind::riemannian;
  semantic_error("model.kind", "unknown model '" + s + "'");
}

FieldKind field_from(const std::string& s) {
  if (s == "poisson_marked") return FieldKind::poisson_marked;
  if (s == "white_noise_grid") return FieldKind::white_noise_grid;
  semantic_error("field.kind", "unknown field kind '" + s + "'");
}

MarkLaw marks_from(const std::string& s) {
  if (s == "exponential_unit") return MarkLaw::exponential_unit;
  if (s == "uniform_unit") return MarkLaw::uniform_unit;
  if (s == "constant_one") return MarkLaw::constant_one;
  semantic_error("field.marks", "unknown mark law '" + s + "'");
}

ExperimentKind experiment_from(const std::string& s) {
  if (s == "concentration") return ExperimentKind::concentration;
  if (s == "kpz") return ExperimentKind::kpz;
  if (s == "nonrandom") return ExperimentKind::nonrandom;
  if (s == "corridor") return ExperimentKind::corridor;
  if (s == "lowertail") return ExperimentKind::lowertail;
  if (s == "tf_tail") return ExperimentKind::tf_tail;
  if (s == "assumptions") return ExperimentKind::assumptions;
  if (s == "var_decomp") return ExperimentKind::var_decomp;
  if (s == "meso_crossings") return ExperimentKind::meso_crossings;
  semantic_error("experiment", "unknown experiment '" + s + "'");
}

std::string marks_name(MarkLaw m) {
  switch (m) {
    case MarkLaw::exponential_unit: return "exponential_unit";
    case MarkLaw::uniform_unit: return "uniform_unit";
    case MarkLaw::constant_one: return "constant_one";
  }
  return "?";
}

std::string field_name(FieldKind k) {
  return k == FieldKind::poisson_marked ? "poisson_marked" : "white_noise_grid";
}

}  // namespace

std::string model_name(ModelKind k) {
  switch (k) {
    case ModelKind::voronoi: return "voronoi";
    case ModelKind::voronoi_weighted: return "voronoi_weighted";
    case ModelKind::howard_newman: return "howard_newman";
    case ModelKind::rgg: return "rgg";
    case ModelKind::riemannian: return "riemannian";
  }
  return "?";
}

std::string experiment_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::concentration: return "concentration";
    case ExperimentKind::kpz: return "kpz";
    case ExperimentKind::nonrandom: return "nonrandom";
    case ExperimentKind::corridor: return "corridor";
    case ExperimentKind::lowertail: return "lowertail";
    case ExperimentKind::tf_tail: return "tf_tail";
    case ExperimentKind::assumptions: return "assumptions";
    case ExperimentKind::var_decomp: return "var_decomp";
    case ExperimentKind::meso_crossings: return "meso_crossings";
  }
  return "?";
}

RunConfig parse_config(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("config parse error: ") + e.what());
  }
  RunConfig c;
  ExperimentPlan& p = c.plan;
  check_keys(j, "",
             {"model", "field", "experiment", "n_grid", "samples_per_n", "angles", "seed",
              "alpha", "theta", "corridor", "lowertail_levels", "var_decomp", "meso_columns",
              "workers", "output_dir", "resume"});
  if (!j.contains("model") || !j.contains("experiment"))
    semantic_error("", "keys 'model' and 'experiment' are required");

  {
    const ordered_json& m = j.at("model");
    check_keys(m, "model", {"kind", "beta", "rgg_threshold", "riemannian"});
    if (!m.contains("kind")) semantic_error("model.kind", "required");
    p.model.kind = model_from(m.at("kind").get<std::string>());
    get_if(m, "beta", p.model.beta);
    get_if(m, "rgg_threshold", p.model.rgg_threshold);
    if (m.contains("riemannian")) {
      const ordered_json& r = m.at("riemannian");
      check_keys(r, "model.riemannian", {"d1", "d2", "grid_step", "connectivity"});
      get_if(r, "d1", p.model.riem.d1);
      get_if(r, "d2", p.model.riem.d2);
      get_if(r, "grid_step", p.model.riem.grid_step);
      get_if(r, "connectivity", p.model.riem.connectivity);
    }
    if (p.model.kind == ModelKind::howard_newman && !(p.model.beta > 1))
      semantic_error("model.beta", "beta must exceed 1");
  }
  if (j.contains("field")) {
    const ordered_json& f = j.at("field");
    check_keys(f, "field", {"kind", "rate", "marks", "grid_step"});
    if (f.contains("kind")) p.field_kind = field_from(f.at("kind").get<std::string>());
    get_if(f, "rate", p.ppp_rate);
    if (f.contains("marks")) p.mark_law = marks_from(f.at("marks").get<std::string>());
    get_if(f, "grid_step", p.noise_grid_step);
  }
  p.experiment = experiment_from(j.at("experiment").get<std::string>());
  if (j.contains("n_grid")) p.n_grid = j.at("n_grid").get<std::vector<double>>();
  get_if(j, "samples_per_n", p.samples_per_n);
  if (j.contains("angles")) p.direction_angles = j.at("angles").get<std::vector<double>>();
  get_if(j, "seed", p.seed_base);
  get_if(j, "alpha", p.alpha);
  get_if(j, "theta", p.theta);
  if (j.contains("corridor")) {
    const ordered_json& co = j.at("corridor");
    check_keys(co, "corridor", {"height", "samples"});
    get_if(co, "height", p.corridor_height);
    get_if(co, "samples", p.corridor_samples);
  }
  if (j.contains("lowertail_levels"))
    p.lowertail_levels = j.at("lowertail_levels").get<std::vector<double>>();
  if (j.contains("var_decomp")) {
    const ordered_json& v = j.at("var_decomp");
    check_keys(v, "var_decomp", {"len", "halfheight", "block_w", "block_h", "outer", "inner"});
    get_if(v, "len", p.vd_len);
    get_if(v, "halfheight", p.vd_halfheight);
    get_if(v, "block_w", p.vd_block_w);
    get_if(v, "block_h", p.vd_block_h);
    get_if(v, "outer", p.vd_outer);
    get_if(v, "inner", p.vd_inner);
  }
  get_if(j, "meso_columns", p.meso_columns);
  get_if(j, "workers", p.workers);
  get_if(j, "output_dir", c.output_dir);
  get_if(j, "resume", c.resume);

  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& c) {
  const ExperimentPlan& p = c.plan;
  ordered_json j;
  j["model"] = {{"kind", model_name(p.model.kind)},
                {"beta", p.model.beta},
                {"rgg_threshold", p.model.rgg_threshold},
                {"riemannian",
                 {{"d1", p.model.riem.d1},
                  {"d2", p.model.riem.d2},
                  {"grid_step", p.model.riem.grid_step},
                  {"connectivity", p.model.riem.connectivity}}}};
  j["field"] = {{"kind", field_name(p.field_kind)},
                {"rate", p.ppp_rate},
                {"marks", marks_name(p.mark_law)},
                {"grid_step", p.noise_grid_step}};
  j["experiment"] = experiment_name(p.experiment);
  j["n_grid"] = p.n_grid;
  j["samples_per_n"] = p.samples_per_n;
  j["angles"] = p.direction_angles;
  j["seed"] = p.seed_base;
  j["alpha"] = p.alpha;
  j["theta"] = p.theta;
  j["corridor"] = {{"height", p.corridor_height}, {"samples", p.corridor_samples}};
  j["lowertail_levels"] = p.lowertail_levels;
  j["var_decomp"] = {{"len", p.vd_len},         {"halfheight", p.vd_halfheight},
                     {"block_w", p.vd_block_w}, {"block_h", p.vd_block_h},
                     {"outer", p.vd_outer},     {"inner", p.vd_inner}};
  j["meso_columns"] = p.meso_columns;
  j["workers"] = p.workers;
  j["output_dir"] = c.output_dir;
  j["resume"] = c.resume;
  return j.dump(2) + "\n";
}

std::string config_digest(const RunConfig& c) {
  RunConfig canon = c;
  canon.plan.workers = 1;
  canon.output_dir.clear();
  canon.resume = false;
  std::string s = serialize_config(canon);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

SampleLog::SampleLog(std::string path, std::string digest)
    : path_(std::move(path)), digest_(std::move(digest)) {}

void SampleLog::load() {
  std::ifstream in(path_, std::ios::binary);
  if (!in) return;
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  in.close();
  // An interrupted writer can leave a torn final fragment with no newline;
  // drop it from the file so later appends start on a fresh line.
  std::size_t keep = text.find_last_of('\n');
  keep = (keep == std::string::npos) ? 0 : keep + 1;
  if (keep < text.size()) {
    std::filesystem::resize_file(path_, keep);
    text.resize(keep);
  }
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      continue;  // torn tail line from an interrupted run
    }
    if (!j.contains("digest") || j.at("digest").get<std::string>() != digest_) continue;
    SampleRecord r;
    r.n = j.at("n").get<double>();
    r.angle = j.at("angle").get<double>();
    r.index = j.at("index").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.x = j.at("x").get<double>();
    r.tf = j.at("tf").get<double>();
    r.status = j.at("status").get<int>();
    r.error = j.at("error").get<std::string>();
    records_[{std::bit_cast<std::uint64_t>(r.n), std::bit_cast<std::uint64_t>(r.angle),
              r.seed}] = r;
  }
}

const SampleRecord* SampleLog::find(double n, double angle, std::uint64_t seed) const {
  auto it = records_.find(
      {std::bit_cast<std::uint64_t>(n), std::bit_cast<std::uint64_t>(angle), seed});
  return it == records_.end() ? nullptr : &it->second;
}

void SampleLog::append(const SampleRecord& r) {
  std::ofstream out(path_, std::ios::app);
  out << "{\"v\":1,\"digest\":" << ordered_json(digest_).dump() << ",\"n\":" << num(r.n)
      << ",\"angle\":" << num(r.angle) << ",\"index\":" << r.index << ",\"seed\":" << r.seed
      << ",\"x\":" << num(r.x) << ",\"tf\":" << num(r.tf) << ",\"status\":" << r.status
      << ",\"error\":" << ordered_json(r.error).dump() << ",\"wall_ms\":0}\n";
  records_[{std::bit_cast<std::uint64_t>(r.n), std::bit_cast<std::uint64_t>(r.angle), r.seed}] =
      r;
}

void write_scaling_csv(const std::string& path, const stats::ScalingTable& t) {
  std::ofstream out(path, std::ios::binary);
  out << "n,count,mean,se_mean,sd,se_sd,a_hat,qhat,q,w,theta_hat,r2,is_record,is_quasi\n";
  for (const auto& r : t.rows)
    out << num(r.n) << ',' << r.count << ',' << num(r.mean) << ',' << num(r.se_mean) << ','
        << num(r.sd) << ',' << num(r.se_sd) << ',' << num(r.a_hat) << ',' << num(r.qhat) << ','
        << num(r.q) << ',' << num(r.w) << ',' << num(r.theta_hat) << ',' << num(r.r2) << ','
        << (r.is_record ? 1 : 0) << ',' << (r.is_quasi ? 1 : 0) << '\n';
}

namespace {

struct Gate {
  std::string name;
  bool pass;
  std::string detail;
};

void write_gates(const std::string& path, const std::vector<Gate>& gates) {
  std::ofstream out(path, std::ios::binary);
  out << "[\n";
  for (std::size_t i = 0; i < gates.size(); ++i) {
    out << "  {\"name\":" << ordered_json(gates[i].name).dump()
        << ",\"pass\":" << (gates[i].pass ? "true" : "false")
        << ",\"detail\":" << ordered_json(gates[i].detail).dump() << "}"
        << (i + 1 < gates.size() ? "," : "") << "\n";
  }
  out << "]\n";
}

void write_mu_csv(const std::string& path, const stats::MuEstimate& mu) {
  std::ofstream out(path, std::ios::binary);
  out << "schema_version,mu,ci_lo,ci_hi,fit_mu,fit_a,fit_gamma,gamma_degenerate\n";
  out << 1 << ',' << num(mu.mu) << ',' << num(mu.ci_lo) << ',' << num(mu.ci_hi) << ','
      << num(mu.fit_mu) << ',' << num(mu.fit_a) << ',' << num(mu.fit_gamma) << ','
      << (mu.gamma_degenerate ? 1 : 0) << '\n';
}

std::string exclusion_detail(const RunCounters& c) {
  return std::to_string(c.failed) + "/" + std::to_string(c.total) + " failed";
}

}  // namespace

int execute(const RunConfig& c) {
  const ExperimentPlan& plan = c.plan;
  plan.validate();
  fs::create_directories(c.output_dir);
  std::string digest = config_digest(c);
  std::string log_path = (fs::path(c.output_dir) / "samples.jsonl").string();
  if (!c.resume && fs::exists(log_path)) fs::remove(log_path);
  SampleLog log(log_path, digest);
  if (c.resume) log.load();
  SampleFetch fetch = [&log](double n, double angle, std::uint64_t seed) {
    return log.find(n, angle, seed);
  };
  SampleSink sink = [&log](const SampleRecord& r) { log.append(r); };

  std::vector<Gate> gates;
  auto out = [&](const char* name) { return (fs::path(c.output_dir) / name).string(); };

  switch (plan.experiment) {
    case ExperimentKind::concentration: {
      ConcentrationReport rep = run_concentration(plan, &fetch, &sink);
      write_scaling_csv(out("scaling.csv"), rep.table);
      std::ofstream f(out("concentration.csv"), std::ios::binary);
      f << "schema_version,n,theta_hat,tail_c,tail_r2,sd_degenerate,ks_to_next,ks_p\n";
      for (std::size_t i = 0; i < rep.table.rows.size(); ++i) {
        double ks = i + 1 < rep.table.rows.size() ? rep.ks_dist[i] : 0;
        double kp = i + 1 < rep.table.rows.size() ? rep.ks_p[i] : 1;
        f << 1 << ',' << num(rep.table.rows[i].n) << ',' << num(rep.fits[i].theta) << ','
          << num(rep.fits[i].c) << ',' << num(rep.fits[i].r2) << ','
          << (rep.sd_degenerate[i] ? 1 : 0) << ',' << num(ks) << ',' << num(kp) << '\n';
      }
      gates.push_back({"exclusion_fraction", rep.counters.exclusion_ok(),
                       exclusion_detail(rep.counters)});
      break;
    }
    case ExperimentKind::kpz:
    case ExperimentKind::tf_tail: {
      KpzReport rep = run_kpz(plan, &fetch, &sink);
      write_scaling_csv(out("scaling.csv"), rep.table);
      std::ofstream f(out("kpz.csv"), std::ios::binary);
      f << "schema_version,n,r,se_r,r_median,mean_tf,median_tf,tail_z1,tail_z2,tail_z4\n";
      for (std::size_t i = 0; i < rep.rows.size(); ++i)
        f << 1 << ',' << num(rep.rows[i].n) << ',' << num(rep.rows[i].r) << ','
          << num(rep.rows[i].se_r) << ',' << num(rep.rows[i].r_median) << ','
          << num(rep.mean_tf[i]) << ',' << num(rep.median_tf[i]) << ','
          << num(rep.tail_freq[i][0]) << ',' << num(rep.tail_freq[i][1]) << ','
          << num(rep.tail_freq[i][2]) << '\n';
      bool mono = true;
      for (const auto& t : rep.tail_freq)
        if (!(t[0] >= t[1] && t[1] >= t[2])) mono = false;
      gates.push_back({"exclusion_fraction", rep.counters.exclusion_ok(),
                       exclusion_detail(rep.counters)});
      gates.push_back({"tf_tail_monotone", mono, ""});
      gates.push_back({"kpz_ratio_band", rep.r_max_over_min > 0 && rep.r_max_over_min <= 4,
                       "max/min r = " + num(rep.r_max_over_min)});
      break;
    }
    case ExperimentKind::nonrandom: {
      NonrandomReport rep = run_nonrandom(plan, &fetch, &sink);
      write_mu_csv(out("mu.csv"), rep.mu);
      std::ofstream f(out("nonrandom.csv"), std::ios::binary);
      f << "schema_version,n,count,mean,se_mean,sd,a_hat,ratio,ci_lo,ci_hi,a_nonneg_ok,"
           "subadd_ok\n";
      bool a_ok = true, s_ok = true;
      for (const auto& r : rep.rows) {
        f << 1 << ',' << num(r.n) << ',' << r.count << ',' << num(r.mean) << ','
          << num(r.se_mean) << ',' << num(r.sd) << ',' << num(r.a_hat) << ',' << num(r.ratio)
          << ',' << num(r.ci_lo) << ',' << num(r.ci_hi) << ',' << (r.a_nonneg_ok ? 1 : 0) << ','
          << (r.subadd_ok ? 1 : 0) << '\n';
        a_ok = a_ok && r.a_nonneg_ok;
        s_ok = s_ok && r.subadd_ok;
      }
      gates.push_back({"exclusion_fraction", rep.counters.exclusion_ok(),
                       exclusion_detail(rep.counters)});
      gates.push_back({"a_n_nonnegative", a_ok, ""});
      gates.push_back({"subadditivity", s_ok, ""});
      break;
    }
    case ExperimentKind::corridor: {
      CorridorReport rep = run_corridor(plan, &fetch, &sink);
      write_scaling_csv(out("scaling.csv"), rep.table);
      write_mu_csv(out("mu.csv"), rep.mu);
      std::ofstream f(out("corridor.csv"), std::ios::binary);
      f << "schema_version,n,height,count,mean_minus_norm,sd_minus_norm,theta_minus,"
           "mean_plus_norm,sd_plus_norm,theta_plus\n";
      for (std::size_t i = 0; i < rep.n.size(); ++i)
        f << 1 << ',' << num(rep.n[i]) << ',' << num(rep.height[i]) << ','
          << rep.y_minus_norm[i].size() << ',' << num(stats::mean(rep.y_minus_norm[i])) << ','
          << num(stats::sample_sd(rep.y_minus_norm[i])) << ',' << num(rep.fit_minus[i].theta)
          << ',' << num(stats::mean(rep.y_plus_norm[i])) << ','
          << num(stats::sample_sd(rep.y_plus_norm[i])) << ',' << num(rep.fit_plus[i].theta)
          << '\n';
      gates.push_back({"exclusion_fraction", rep.counters.exclusion_ok(),
                       exclusion_detail(rep.counters)});
      break;
    }
    case ExperimentKind::lowertail: {
      LowertailReport rep = run_lowertail(plan, &fetch, &sink);
      write_mu_csv(out("mu.csv"), rep.mu);
      std::ofstream f(out("lowertail.csv"), std::ios::binary);
      f << "schema_version,n,level,hits,count,freq,ci_lo,ci_hi\n";
      for (const auto& cell : rep.cells)
        f << 1 << ',' << num(cell.n) << ',' << num(cell.level) << ',' << cell.hits << ','
          << cell.count << ',' << num(cell.freq) << ',' << num(cell.ci_lo) << ','
          << num(cell.ci_hi) << '\n';
      gates.push_back({"exclusion_fraction", rep.counters.exclusion_ok(),
                       exclusion_detail(rep.counters)});
      break;
    }
    case ExperimentKind::assumptions: {
      AuditReport rep = run_assumption_audit(plan);
      std::ofstream f(out("audit.csv"), std::ios::binary);
      f << "schema_version,id,name,statistic,pass\n";
      for (const auto& ch : rep.checks) {
        f << 1 << ',' << ch.id << ',' << ordered_json(ch.name).dump() << ','
          << ordered_json(ch.statistic).dump() << ',' << (ch.pass ? 1 : 0) << '\n';
        gates.push_back({"assumption_" + std::to_string(ch.id), ch.pass, ch.statistic});
      }
      break;
    }
    case ExperimentKind::var_decomp: {
      VarDecompReport rep = run_var_decomp(plan);
      std::ofstream f(out("vardecomp.csv"), std::ios::binary);
      f << "schema_version,block,increment,se\n";
      for (std::size_t k = 0; k < rep.increments.size(); ++k)
        f << 1 << ',' << k + 1 << ',' << num(rep.increments[k]) << ','
          << num(rep.increment_se[k]) << '\n';
      std::ofstream g(out("vardecomp_summary.csv"), std::ios::binary);
      g << "schema_version,total_variance,total_se,sum_increments,sum_se,coverage_fraction,"
           "blocks_x,blocks_y\n";
      g << 1 << ',' << num(rep.total_variance) << ',' << num(rep.total_se) << ','
        << num(rep.sum_increments) << ',' << num(rep.sum_se) << ','
        << num(rep.coverage_fraction) << ',' << rep.blocks_x << ',' << rep.blocks_y << '\n';
      bool nn = true;
      for (std::size_t k = 0; k < rep.increments.size(); ++k)
        if (rep.increments[k] < -3 * rep.increment_se[k]) nn = false;
      double diff = std::abs(rep.sum_increments - rep.total_variance);
      double tol = 3 * std::sqrt(rep.sum_se * rep.sum_se + rep.total_se * rep.total_se);
      gates.push_back({"increments_nonnegative", nn, ""});
      gates.push_back({"sum_matches_variance", diff <= tol,
                       "|sum - var| = " + num(diff) + ", 3 SE = " + num(tol)});
      break;
    }
    case ExperimentKind::meso_crossings: {
      MesoReport rep = run_meso_crossings(plan);
      std::ofstream f(out("meso.csv"), std::ios::binary);
      f << "schema_version,count,mean_tau1_per_col,se\n";
      f << 1 << ',' << rep.tau1.size() << ',' << num(rep.mean_tau1_per_col) << ',' << num(rep.se)
        << '\n';
      std::ofstream g(out("jumps.csv"), std::ios::binary);
      g << "schema_version,jump,count\n";
      for (std::size_t j = 0; j < rep.jump_hist.size(); ++j)
        g << 1 << ',' << j << ',' << rep.jump_hist[j] << '\n';
      gates.push_back({"exclusion_fraction", rep.counters.exclusion_ok(),
                       exclusion_detail(rep.counters)});
      break;
    }
  }

  {  // manifest: stable metadata only (no timestamps -- reruns are byte-identical)
    ordered_json m;
    m["schema_version"] = 1;
    m["version"] = kVersion;
    m["digest"] = digest;
    m["experiment"] = experiment_name(plan.experiment);
    m["model"] = model_name(plan.model.kind);
    m["seed_base"] = plan.seed_base;
    m["samples_per_n"] = plan.samples_per_n;
    m["n_grid"] = plan.n_grid;
    m["config"] = ordered_json::parse(serialize_config(c));
    std::ofstream f(out("manifest.json"), std::ios::binary);
    f << m.dump(2) << "\n";
  }
  write_gates(out("gates.json"), gates);
  for (const auto& g : gates)
    if (!g.pass) return 1;
  return 0;
}

namespace {

void write_histogram_svg(const std::string& path, const std::vector<double>& xs,
                         const std::string& title) {
  if (xs.empty()) return;
  double lo = xs.front(), hi = xs.front();
  for (double x : xs) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  if (hi <= lo) hi = lo + 1;
  const int bins = 40;
  std::vector<int> h(bins, 0);
  for (double x : xs) {
    int b = static_cast<int>((x - lo) / (hi - lo) * bins);
    ++h[std::min(b, bins - 1)];
  }
  int hmax = 1;
  for (int v : h) hmax = std::max(hmax, v);
  const double W = 640, H = 400, pad = 40;
  std::ofstream out(path, std::ios::binary);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\">\n<text x=\"10\" y=\"20\">" << title << "</text>\n";
  double bw = (W - 2 * pad) / bins;
  for (int b = 0; b < bins; ++b) {
    double bh = (H - 2 * pad) * h[b] / hmax;
    out << "<rect x=\"" << pad + b * bw << "\" y=\"" << H - pad - bh << "\" width=\"" << bw * 0.9
        << "\" height=\"" << bh << "\" fill=\"#4477aa\"/>\n";
  }
  out << "<line x1=\"" << pad << "\" y1=\"" << H - pad << "\" x2=\"" << W - pad << "\" y2=\""
      << H - pad << "\" stroke=\"black\"/>\n</svg>\n";
}

}  // namespace

int report(const std::string& dir, bool plots) {
  fs::path manifest = fs::path(dir) / "manifest.json";
  if (!fs::exists(manifest)) {
    std::fprintf(stderr, "no runs found in '%s' (missing manifest.json)\n", dir.c_str());
    return 1;
  }
  ordered_json m;
  {
    std::ifstream in(manifest);
    in >> m;
  }
  std::printf("run: experiment=%s model=%s digest=%s version=%s\n",
              m.value("experiment", std::string("?")).c_str(),
              m.value("model", std::string("?")).c_str(),
              m.value("digest", std::string("?")).c_str(),
              m.value("version", std::string("?")).c_str());
  for (const char* name :
       {"scaling.csv", "concentration.csv", "kpz.csv", "nonrandom.csv", "mu.csv", "corridor.csv",
        "lowertail.csv", "audit.csv", "vardecomp.csv", "vardecomp_summary.csv", "meso.csv",
        "jumps.csv"}) {
    fs::path p = fs::path(dir) / name;
    if (!fs::exists(p)) continue;
    std::printf("\n== %s ==\n", name);
    std::ifstream in(p);
    std::string line;
    while (std::getline(in, line)) std::printf("%s\n", line.c_str());
  }
  fs::path gp = fs::path(dir) / "gates.json";
  if (fs::exists(gp)) {
    ordered_json g;
    std::ifstream in(gp);
    in >> g;
    std::printf("\n== gates ==\n");
    for (const auto& e : g)
      std::printf("[%s] %s %s\n", e.value("pass", false) ? "PASS" : "FAIL",
                  e.value("name", std::string("?")).c_str(),
                  e.value("detail", std::string("")).c_str());
  }
  if (plots) {
    fs::path lp = fs::path(dir) / "samples.jsonl";
    if (fs::exists(lp)) {
      std::map<double, std::vector<double>> by_n;
      std::ifstream in(lp);
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
          ordered_json j = ordered_json::parse(line);
          if (j.value("status", 1) == 0) by_n[j.at("n").get<double>()].push_back(
              j.at("x").get<double>());
        } catch (const nlohmann::json::parse_error&) {
        }
      }
      int idx = 0;
      for (const auto& [n, xs] : by_n) {
        std::string name = "hist_" + std::to_string(idx++) + ".svg";
        write_histogram_svg((fs::path(dir) / name).string(), xs,
                            "X_n histogram, n = " + num(n));
        std::printf("wrote %s (%zu samples)\n", name.c_str(), xs.size());
      }
    }
  }
  return 0;
}

}  // namespace fpplab::runio
