#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "agcl/curriculum.hpp"
#include "agcl/gridworld.hpp"
#include "agcl/learner.hpp"

namespace agcl {

inline constexpr const char* kToolVersion = "0.1.0";

/// Everything a run needs. Parsed from (and serialized back to) the JSON config.
struct ExperimentConfig {
  std::string name = "experiment";
  std::string formula;
  std::vector<std::string> ap;
  OomdpSpec oomdp;
  OomdpState target_s0, target_sf;

  /// "sequence", "graph" or "both"
  std::string mode = "both";
  std::optional<double> eta;
  double eta_percentile = 0.4;
  std::size_t b = 25;
  double subset_fraction = 1.0;
  std::size_t max_per_path = 1;
  std::size_t grid_cap = 5'000;
  std::size_t candidate_cap = 1'000'000;

  bool noise = false;
  std::uint64_t noise_seed = 0;

  DqnHyper learner;
  std::size_t budget = 200'000;
  std::optional<std::size_t> source_budget;  ///< default budget / (2|V|)
  std::size_t seeds = 1;
  std::uint64_t master_seed = 0;
  std::vector<std::string> baselines = {"scratch"};

  double threshold = 0.8;  ///< delta for time-to-threshold
  double gsrs_c = 1.0;
  GridworldSchema env;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Compiled formula, effective (possibly noised) task space and target.
struct Problem {
  PropositionSet ap;
  Dfa dfa;
  OomdpSpec spec;
  TaskConfig target;
};

Problem build_problem(const ExperimentConfig& c);
AgcgOptions agcg_options(const ExperimentConfig& c, CurriculumMode mode);

/// A planned curriculum keyed by method name ("agcl-sequence", "agcl-graph").
struct PlannedCurriculum {
  std::string method;
  AgcgResult result;
};
std::vector<PlannedCurriculum> plan(const ExperimentConfig& c, const Problem& p);

struct PhaseLog {
  std::size_t vertex = 0;
  std::string task_id;
  bool is_target = false;
  std::size_t offset = 0;  ///< training steps charged before this phase
  TrainReport report;
};

struct MethodRun {
  std::string method;
  std::size_t seed_index = 0;
  std::vector<PhaseLog> phases;  ///< training order; target last
  std::size_t source_steps = 0;
  std::optional<std::size_t> time_to_threshold;
};

struct TTestResult {
  double t = 0;
  double p = 1;
  double df = 0;
};

struct Comparison {
  std::string a, b;
  std::vector<double> samples_a, samples_b;
  TTestResult test;
  std::optional<std::string> error;
};

struct ExperimentReport {
  std::vector<MethodRun> runs;
  std::vector<Comparison> comparisons;

  std::vector<const MethodRun*> runs_for(const std::string& method) const;
};

/// Earliest checkpoint with success >= delta, shifted by offset.
std::optional<std::size_t> time_to_threshold(const std::vector<EvalRecord>& curve, double delta,
                                             std::size_t offset);

/// Welch's unequal-variance t-test with a 1e-12 variance floor.
TTestResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

struct RunOptions {
  std::size_t threads = 1;
  /// Train the ready vertices of a curriculum concurrently (same results).
  bool parallel_leaves = false;
};

/// Seed for replicate `index` of a run with `master` seed.
std::uint64_t replicate_seed(std::uint64_t master, std::size_t index);

MethodRun run_curriculum(const CurriculumDag& dag, const ExperimentConfig& c, const Problem& p,
                         const std::string& method, std::size_t seed_index,
                         const RunOptions& opts = {});
MethodRun run_baseline(const std::string& kind, const ExperimentConfig& c, const Problem& p,
                       std::size_t seed_index);

/// Runs every method for every seed and computes the comparisons. Curricula
/// come from `curricula` (normally plan()).
ExperimentReport run_experiment(const ExperimentConfig& c, const Problem& p,
                                const std::vector<PlannedCurriculum>& curricula,
                                const RunOptions& opts = {});

nlohmann::json build_manifest(const ExperimentConfig& c, const Problem& p,
                              const std::vector<PlannedCurriculum>& curricula);
/// Config and recorded curricula from a manifest.
struct ManifestInputs {
  ExperimentConfig config;
  std::vector<PlannedCurriculum> curricula;
};
ManifestInputs manifest_inputs(const nlohmann::json& m);

std::string curves_csv(const ExperimentReport& r);
std::string summary_csv(const ExperimentReport& r, const ExperimentConfig& c);
std::string phases_csv(const ExperimentReport& r);
nlohmann::json stats_json(const ExperimentReport& r, const ExperimentConfig& c);

/// Writes manifest.json, dfa.dot, curriculum*.dot, curves.csv, summary.csv,
/// phases.csv and stats.json into `dir`.
void write_outputs(const std::filesystem::path& dir, const ExperimentConfig& c, const Problem& p,
                   const std::vector<PlannedCurriculum>& curricula, const ExperimentReport& r);

/// Per-method aggregate over seeds; unreached runs count as `budget`.
struct MethodSummary {
  std::string method;
  std::size_t seeds = 0;
  std::size_t reached = 0;
  double median_ttt = 0;
  double mean_ttt = 0;
};
std::vector<MethodSummary> summarize(const ExperimentReport& r, const ExperimentConfig& c);

}  // namespace agcl
