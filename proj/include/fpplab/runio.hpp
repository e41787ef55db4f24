#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "fpplab/experiments.hpp"

namespace fpplab::runio {

struct RunConfig {
  ExperimentPlan plan;
  std::string output_dir = "runs";
  bool resume = false;
};

// JSON config text -> validated config with defaults; unknown keys rejected.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Canonical serialization; parse(serialize(c)) == c.
std::string serialize_config(const RunConfig& c);

// FNV-1a digest over the result-affecting part of the config (excludes
// workers, output_dir, resume).
std::string config_digest(const RunConfig& c);

std::string experiment_name(ExperimentKind k);
std::string model_name(ModelKind k);

// Append-only JSONL sample store.  Keys: (n, angle, seed).
class SampleLog {
 public:
  explicit SampleLog(std::string path, std::string digest);

  // Load existing records matching the digest (for resume).
  void load();
  const SampleRecord* find(double n, double angle, std::uint64_t seed) const;
  std::size_t size() const { return records_.size(); }

  // Append one record (coordinator thread only).
  void append(const SampleRecord& r);

 private:
  std::string path_, digest_;
  std::map<std::tuple<std::uint64_t, std::uint64_t, std::uint64_t>, SampleRecord> records_;
};

// 17-significant-digit float formatting used in every artifact.
std::string num(double v);

void write_scaling_csv(const std::string& path, const stats::ScalingTable& t);

// Run the configured experiment; writes samples.jsonl, CSV summaries,
// manifest.json and gates.json under output_dir.  Returns a process exit
// status (0 = all gates pass).
int execute(const RunConfig& c);

// Print a human-readable summary of a finished run; optionally write SVG
// histograms next to the artifacts.  Returns exit status.
int report(const std::string& dir, bool plots);

}  // namespace fpplab::runio
