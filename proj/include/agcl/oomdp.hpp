#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "agcl/dfa.hpp"

namespace agcl {

enum class ParamKind : std::uint8_t { Integer, Real };

struct ParamSpec {
  std::string name;
  ParamKind kind = ParamKind::Integer;
  double lo = 0;
  double hi = 0;

  bool operator==(const ParamSpec&) const = default;
};

struct ClassSpec {
  std::string name;
  std::vector<ParamSpec> params;

  bool operator==(const ClassSpec&) const = default;
};

struct Requirement {
  std::string param;
  double at_least = 0;

  bool operator==(const Requirement&) const = default;
};

/// How an atomic proposition maps onto the task space. A consuming binding
/// moves one object from `env_param` into `inv_param` per event; a terminal
/// binding only imposes `preconditions` on the initial state.
struct PropositionBinding {
  std::string proposition;
  std::string env_param;
  std::string inv_param;
  bool terminal = false;
  std::vector<Requirement> preconditions;

  bool operator==(const PropositionBinding&) const = default;
};

/// Object-oriented task-space description: classes with ranged parameters
/// plus proposition bindings. Parameters are addressed by their flattened
/// position (classes in order, parameters in order within a class).
class OomdpSpec {
 public:
  OomdpSpec() = default;
  OomdpSpec(std::vector<ClassSpec> classes, std::vector<PropositionBinding> bindings);

  const std::vector<ClassSpec>& classes() const noexcept { return classes_; }
  const std::vector<PropositionBinding>& bindings() const noexcept { return bindings_; }
  std::span<const ParamSpec> params() const noexcept { return params_; }
  std::size_t param_count() const noexcept { return params_.size(); }
  const ParamSpec& param(std::size_t i) const { return params_.at(i); }

  std::optional<std::size_t> find(std::string_view name) const noexcept;
  /// Throws SchemaError for unknown names.
  std::size_t index_of(std::string_view name) const;

  const PropositionBinding* binding_for(std::string_view proposition) const noexcept;
  bool has_real_params() const noexcept;
  /// True for parameters named as `inv_param` by some binding.
  bool is_inventory(std::size_t i) const noexcept;

  /// Every proposition in `ap` has exactly one binding.
  void validate_bindings(const PropositionSet& ap) const;

  bool operator==(const OomdpSpec& o) const {
    return classes_ == o.classes_ && bindings_ == o.bindings_;
  }

 private:
  std::vector<ClassSpec> classes_;
  std::vector<PropositionBinding> bindings_;
  std::vector<ParamSpec> params_;
};

/// Total assignment of every declared parameter, aligned with OomdpSpec::params().
struct OomdpState {
  std::vector<double> values;

  double operator[](std::size_t i) const { return values[i]; }
  bool operator==(const OomdpState&) const = default;
  auto operator<=>(const OomdpState&) const = default;
};

/// A concrete task: initial and goal OOMDP states plus a layout seed.
struct TaskConfig {
  std::string id;
  OomdpState s0;
  OomdpState sf;
  std::uint64_t placement_seed = 0;
  bool is_target = false;

  /// Task identity used when merging curricula; ignores id and seed.
  bool same_task(const TaskConfig& o) const { return s0 == o.s0 && sf == o.sf; }
};

using TaskRef = std::shared_ptr<const TaskConfig>;

/// Optional extra feasibility predicate on candidate initial states (e.g.
/// objects must fit on the grid).
using StateFilter = std::function<bool(const OomdpState&)>;

/// Per-node constraints derived from the event multiset on a path prefix.
struct NodeRequirement {
  std::vector<std::size_t> event_counts;  ///< per AP index
  std::vector<double> lower_bound;        ///< per parameter; -inf when unconstrained
  std::vector<double> delta;              ///< sf - s0 per parameter
  std::vector<bool> pinned;               ///< parameter copied from the target's s0
};

NodeRequirement node_requirement(const Dfa& dfa, const TracePath& path, std::size_t node_index,
                                 const OomdpSpec& spec, const TaskConfig& target);

struct NodeTaskOptions {
  std::size_t grid_cap = 5'000;
  std::uint64_t seed = 0;  ///< base for placement seeds
  StateFilter filter;
};

/// Number of integer grid points satisfying the node requirement; nullopt if
/// the spec has real-valued parameters.
std::optional<double> node_grid_size(const Dfa& dfa, const TracePath& path, std::size_t node_index,
                                     const OomdpSpec& spec, const TaskConfig& target);

/// Every task that can reach path.nodes[node_index] (the function P). For an
/// accepting last node this is the target alone. Enumeration is lexicographic
/// over parameters with the first parameter varying slowest.
std::vector<TaskConfig> tasks_for_node(const Dfa& dfa, const TracePath& path,
                                       std::size_t node_index, const OomdpSpec& spec,
                                       const TaskConfig& target, const NodeTaskOptions& opts = {});

/// `b` distinct tasks drawn uniformly from the feasible region, returned in
/// canonical (sorted) order.
std::vector<TaskConfig> sample_node_tasks(const Dfa& dfa, const TracePath& path,
                                          std::size_t node_index, const OomdpSpec& spec,
                                          const TaskConfig& target, std::size_t b,
                                          std::uint64_t seed, const NodeTaskOptions& opts = {});

/// Widens/perturbs each range to [lo - N(0,s), hi + N(0,s)] with s = (hi-lo)/6.
/// Integer ranges round outward and stay non-negative.
OomdpSpec apply_range_noise(const OomdpSpec& spec, std::uint64_t seed);

std::uint64_t placement_seed_for(std::uint64_t base, const OomdpState& s0, const OomdpState& sf);

// JSON (de)serialization; SchemaError carries the offending field path.
OomdpSpec spec_from_json(const nlohmann::json& j, const std::string& path = "oomdp");
nlohmann::json spec_to_json(const OomdpSpec& spec);
OomdpState state_from_json(const OomdpSpec& spec, const nlohmann::json& j, const std::string& path);
nlohmann::json state_to_json(const OomdpSpec& spec, const OomdpState& state);
nlohmann::json task_to_json(const OomdpSpec& spec, const TaskConfig& task);

}  // namespace agcl
