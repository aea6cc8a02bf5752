#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "agcl/dfa.hpp"
#include "agcl/oomdp.hpp"

namespace agcl {

/// Per-parameter similarity: 1 for equal values (including 0 and 0), 0 when
/// only one side is positive, min/max otherwise.
double param_ratio(double v, double v_target) noexcept;

/// Mean initial-state similarity to the target.
double sim_t(const TaskConfig& task, const TaskConfig& target);
/// Mean goal-state similarity to the target.
double sim_g(const TaskConfig& task, const TaskConfig& target);
/// Half the change in (sim_t + sim_g) going from mi to mj. Negative when mj
/// is further from the target than mi.
double jump_score(const TaskConfig& mi, const TaskConfig& mj, const TaskConfig& target);

/// A sequence-curriculum candidate: one task per non-initial node of a trace
/// path, ending at the target.
struct CandidateList {
  std::size_t path_index = 0;
  std::vector<TaskRef> tasks;
  double avg_jump = 0;
};

/// Sum of consecutive jump scores divided by |psi| (not the pair count).
double avg_jump(std::span<const TaskRef> psi, const TaskConfig& target);

/// Cartesian product of per-node task sets in path order, last node varying
/// fastest. `node_tasks[k]` holds the tasks of path node k+1. Throws
/// InfeasibleError if a node has no tasks, ResourceLimitError above `cap`.
std::vector<CandidateList> list_candidates(std::size_t path_index,
                                           const std::vector<std::vector<TaskRef>>& node_tasks,
                                           const TaskConfig& target,
                                           std::size_t cap = 1'000'000);

/// Score ties within this tolerance go to the earlier candidate.
inline constexpr double kScoreTieTolerance = 1e-12;

/// Index of the lowest avg_jump; first wins on ties.
std::size_t select_sequence(std::span<const CandidateList> candidates);

/// Normalized inverse jump scores; J is floored at 1e-6.
std::vector<double> beta_weights(std::span<const double> jumps);

/// Uniform sample without replacement of ceil(fraction * N) indices into
/// [0, N), in increasing order.
std::vector<std::size_t> sample_indices(std::size_t n, double fraction, std::uint64_t seed);
std::vector<CandidateList> sample_candidate_subset(std::span<const CandidateList> candidates,
                                                   double fraction, std::uint64_t seed);

struct DagEdge {
  std::size_t from = 0;
  std::size_t to = 0;
  double jump = 0;
  double beta = 1;
};

/// Curriculum graph. Vertices are distinct tasks (by s0, sf); edges point
/// from a source task to the task it transfers into; `sink` is the target.
struct CurriculumDag {
  std::vector<TaskRef> vertices;
  std::vector<DagEdge> edges;
  std::size_t sink = 0;

  std::size_t size() const noexcept { return vertices.size(); }
  std::vector<std::size_t> in_edges(std::size_t v) const;
  std::vector<std::size_t> out_edges(std::size_t v) const;
  std::vector<std::size_t> roots() const;
  /// Kahn order with the lowest ready index first; roots come before their
  /// successors and the sink comes last.
  std::vector<std::size_t> topological_order() const;
  /// Throws PreconditionError naming the first violated invariant.
  void validate() const;
};

/// Incrementally merges candidate lists into a DAG, identifying equal tasks.
class DagBuilder {
 public:
  explicit DagBuilder(TaskRef target);
  void add(std::span<const TaskRef> psi);
  /// Assigns beta weights and returns the graph.
  CurriculumDag finish() const;

 private:
  std::size_t vertex_for(const TaskRef& t);

  TaskRef target_;
  std::vector<TaskRef> vertices_;
  std::vector<DagEdge> edges_;
  std::map<std::pair<OomdpState, OomdpState>, std::size_t> index_;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> edge_index_;
};

CurriculumDag chain_dag(const CandidateList& psi, const TaskRef& target);

struct GraphSelection {
  CurriculumDag dag;
  std::size_t admitted = 0;  ///< |T'| before the per-path limit
  bool fell_back = false;
};

/// Merges every candidate with avg_jump <= eta. With max_per_path > 0 only
/// that many best candidates per trace path are kept. Falls back to the
/// sequence winner when nothing is admitted.
GraphSelection select_graph(std::span<const CandidateList> candidates, double eta,
                            const TaskRef& target, std::size_t max_per_path = 1);

enum class CurriculumMode { Sequence, Graph };

struct AgcgOptions {
  CurriculumMode mode = CurriculumMode::Sequence;
  std::optional<double> eta;      ///< default: eta_percentile of all scores
  double eta_percentile = 0.4;
  std::size_t b = 25;             ///< per-node sample size when sampling
  double subset_fraction = 1.0;
  std::size_t grid_cap = 5'000;
  std::size_t candidate_cap = 1'000'000;
  std::size_t max_per_path = 1;
  std::uint64_t seed = 0;
  StateFilter filter;
};

struct AgcgResult {
  CurriculumDag dag;
  std::optional<double> eta_used;
  std::size_t path_count = 0;
  std::size_t candidate_count = 0;  ///< size of the full candidate space
  std::size_t scored_count = 0;     ///< after subsampling
  std::size_t admitted = 0;
  bool sampled_nodes = false;
  bool fell_back = false;
  double best_avg_jump = 0;
  std::vector<std::string> warnings;
};

AgcgResult agcg(const Dfa& dfa, const OomdpSpec& spec, const TaskConfig& target,
                const AgcgOptions& opts = {});

/// Nearest-rank percentile (q in (0, 1]) of unsorted values.
double nearest_rank(std::vector<double> values, double q);

nlohmann::json dag_to_json(const CurriculumDag& dag, const OomdpSpec& spec);
CurriculumDag dag_from_json(const nlohmann::json& j, const OomdpSpec& spec);
std::string dag_to_dot(const CurriculumDag& dag, const OomdpSpec& spec);

}  // namespace agcl
