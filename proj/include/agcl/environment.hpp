#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "agcl/dfa.hpp"
#include "agcl/rng.hpp"

namespace agcl {

using Observation = std::vector<double>;

struct StepOutcome {
  Observation observation;
  double reward = 0;
  bool done = false;
  bool success = false;
  bool truncated = false;  ///< ended by the step cap rather than a terminal event
  Symbol labels = 0;
  /// Automaton node after this step when the environment runs a monitor.
  std::optional<NodeId> monitor_node;
};

/// Episodic environment with a discrete action space. Instances are not
/// thread-safe; run one per thread.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::size_t observation_size() const = 0;
  virtual std::size_t action_count() const = 0;
  virtual Observation reset(Rng& rng) = 0;
  virtual StepOutcome step(std::size_t action) = 0;
  /// Monitor node right after reset, if any.
  virtual std::optional<NodeId> monitor_node() const { return std::nullopt; }
};

}  // namespace agcl
