#include <cstdio>
#include <cstdlib>
#include <string>

#include "CLI11.hpp"
#include "fpplab/path_obs.hpp"
#include "fpplab/runio.hpp"

using namespace fpplab;

namespace {

int default_workers() {
  if (const char* env = std::getenv("FPP_LAB_WORKERS")) {
    int w = std::atoi(env);
    if (w >= 1) return w;
  }
  return 1;
}

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "runs";
  std::uint64_t seed = 0;
  int workers = 0;
  bool resume = false;
  bool seed_set = false, out_set = false, workers_set = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("-c,--config", o.config_path, "JSON config file");
  cmd->add_option("--seed", o.seed, "master seed (overrides config)")
      ->each([&o](const std::string&) { o.seed_set = true; });
  cmd->add_option("--workers", o.workers, "worker thread count (overrides config)")
      ->each([&o](const std::string&) { o.workers_set = true; });
  cmd->add_option("--out", o.out_dir, "output directory")
      ->each([&o](const std::string&) { o.out_set = true; });
  cmd->add_flag("--resume", o.resume, "reuse samples already present in the log");
}

runio::RunConfig build_config(const CommonOpts& o, ExperimentKind kind) {
  runio::RunConfig c;
  if (!o.config_path.empty()) c = runio::load_config(o.config_path);
  c.plan.experiment = kind;
  if (o.seed_set) c.plan.seed_base = o.seed;
  if (o.workers_set)
    c.plan.workers = o.workers;
  else if (o.config_path.empty())
    c.plan.workers = default_workers();
  if (o.out_set || o.config_path.empty()) c.output_dir = o.out_dir;
  if (o.resume) c.resume = true;
  return c;
}

int run_experiment(const CommonOpts& o, ExperimentKind kind) {
  try {
    runio::RunConfig c = build_config(o, kind);
    return runio::execute(c);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simulation laboratory for planar first passage percolation models"};
  app.require_subcommand(1);

  struct Sub {
    const char* name;
    const char* help;
    ExperimentKind kind;
  };
  const Sub subs[] = {
      {"concentration", "passage-time concentration across a grid of scales",
       ExperimentKind::concentration},
      {"kpz", "transversal fluctuations and the scaling-relation ratio", ExperimentKind::kpz},
      {"nonrandom", "non-random fluctuation term E X_n - mu n", ExperimentKind::nonrandom},
      {"corridor", "side-to-side passage times of the canonical rectangle",
       ExperimentKind::corridor},
      {"lowertail", "lower-tail frequencies below mu n - L SD", ExperimentKind::lowertail},
      {"tf-tail", "transversal fluctuation tail frequencies", ExperimentKind::tf_tail},
      {"assumptions", "empirical audit of the model assumptions", ExperimentKind::assumptions},
      {"var-decomp", "block-revealing variance decomposition", ExperimentKind::var_decomp},
      {"meso", "mesoscopic column-crossing statistics", ExperimentKind::meso_crossings},
  };
  std::vector<std::pair<CommonOpts, ExperimentKind>> runs(std::size(subs));
  for (std::size_t i = 0; i < std::size(subs); ++i) {
    CLI::App* cmd = app.add_subcommand(subs[i].name, subs[i].help);
    runs[i].second = subs[i].kind;
    add_common(cmd, runs[i].first);
    ExperimentKind kind = subs[i].kind;
    CommonOpts* opts = &runs[i].first;
    cmd->callback([opts, kind] { std::exit(run_experiment(*opts, kind)); });
  }

  {  // one-off sample draw, mostly for debugging and smoke tests
    static CommonOpts o;
    static std::string model = "howard_newman";
    static double n = 64, angle = 0;
    static int index = 0;
    CLI::App* cmd = app.add_subcommand("sample", "draw one passage-time sample and print it");
    add_common(cmd, o);
    cmd->add_option("--model", model, "model kind");
    cmd->add_option("-n", n, "scale n");
    cmd->add_option("--angle", angle, "direction angle in radians");
    cmd->add_option("--index", index, "sample index within the seed stream");
    cmd->callback([] {
      try {
        runio::RunConfig c = build_config(o, ExperimentKind::concentration);
        if (o.config_path.empty()) {
          std::string cfg = "{\"model\":{\"kind\":\"" + model + "\"},"
                            "\"experiment\":\"concentration\"}";
          c.plan.model = runio::parse_config(cfg).plan.model;
          if (o.seed_set) c.plan.seed_base = o.seed;
        }
        SampleRecord r = compute_sample(c.plan, n, angle, index, true);
        if (r.status != 0) {
          std::printf("status=failed error=%s\n", r.error.c_str());
          std::exit(1);
        }
        std::printf("n=%s angle=%s seed=%llu x=%s tf=%s\n", runio::num(r.n).c_str(),
                    runio::num(r.angle).c_str(), static_cast<unsigned long long>(r.seed),
                    runio::num(r.x).c_str(), runio::num(r.tf).c_str());
        std::exit(0);
      } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        std::exit(2);
      }
    });
  }
  {
    static std::string dir = "runs";
    static bool plots = false;
    CLI::App* cmd = app.add_subcommand("report", "summarize a finished run directory");
    cmd->add_option("--out,--dir", dir, "run directory");
    cmd->add_flag("--plots", plots, "write SVG histograms");
    cmd->callback([] { std::exit(runio::report(dir, plots)); });
  }

  CLI11_PARSE(app, argc, argv);
  return 0;
}
