#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "agcl/environment.hpp"
#include "agcl/oomdp.hpp"

namespace agcl {

enum class Cell : std::uint8_t { Empty, Tree, Rock, Table, Distractor };
enum class Heading : std::uint8_t { North, East, South, West };
enum class Action : std::uint8_t { Forward, RotateLeft, RotateRight, Break, Craft };

inline constexpr std::size_t kActionCount = 5;
inline constexpr std::size_t kBeamCount = 8;
/// tree, rock, table, distractor, wall
inline constexpr std::size_t kBeamChannels = 5;
inline constexpr std::size_t kObservationSize = kBeamCount * kBeamChannels + 2;

/// Names of the task-space parameters the gridworld reads and writes. Empty
/// names (or names absent from the spec) disable the corresponding feature.
struct GridworldSchema {
  std::string width = "width";
  std::string height = "height";
  std::string trees_env = "trees_env";
  std::string trees_inv = "trees_inv";
  std::string rocks_env = "rocks_env";
  std::string rocks_inv = "rocks_inv";
  std::string table_env = "table_env";
  std::string distractor_env = "distractor_env";
  std::string distractor_inv = "distractor_inv";
  int craft_trees = 2;
  int craft_rocks = 1;
  std::size_t step_cap = 500;
  double success_reward = 1000;
  double step_reward = -1;
};

struct EnvState {
  int width = 0;
  int height = 0;
  int x = 0;
  int y = 0;
  Heading heading = Heading::North;
  std::vector<Cell> cells;  // row-major, y * width + x
  int trees_inv = 0;
  int rocks_inv = 0;
  int distractor_inv = 0;
  std::size_t steps = 0;

  bool in_bounds(int cx, int cy) const { return cx >= 0 && cy >= 0 && cx < width && cy < height; }
  Cell at(int cx, int cy) const { return cells[static_cast<std::size_t>(cy * width + cx)]; }
  Cell& at(int cx, int cy) { return cells[static_cast<std::size_t>(cy * width + cx)]; }
  std::size_t count(Cell c) const;
  bool operator==(const EnvState&) const = default;
};

/// Resolved parameter indices for one OomdpSpec.
struct GridworldBinding {
  std::optional<std::size_t> width, height, trees_env, trees_inv, rocks_env, rocks_inv, table_env,
      distractor_env, distractor_inv;
  /// AP index emitted when breaking each object type, and on crafting.
  std::optional<std::size_t> tree_label, rock_label, distractor_label, craft_label;

  static GridworldBinding resolve(const OomdpSpec& spec, const GridworldSchema& schema,
                                  const PropositionSet& ap);
};

/// Objects plus the agent fit on the grid described by `s0`.
bool placement_fits(const OomdpSpec& spec, const GridworldSchema& schema, const OomdpState& s0);
StateFilter placement_filter(const OomdpSpec& spec, const GridworldSchema& schema);

/// Agent-agnostic projection of an environment state onto the task space.
/// Parameters the gridworld does not model keep their value from `fallback`.
OomdpState map_w(const EnvState& env, const OomdpSpec& spec, const GridworldBinding& bind,
                 const OomdpState& fallback);

/// Inventory parameters of map_w(env) reach the task's goal values.
bool source_goal_check(const TaskConfig& task, const EnvState& env, const OomdpSpec& spec,
                       const GridworldBinding& bind);

/// Crafting gridworld instantiated from a TaskConfig. With a monitor the
/// episode succeeds when the automaton accepts (target task); without one it
/// succeeds on source_goal_check.
class Gridworld final : public Environment {
 public:
  Gridworld(const OomdpSpec& spec, const GridworldSchema& schema, const PropositionSet& ap,
            TaskConfig task, const Dfa* monitor = nullptr);

  std::size_t observation_size() const override { return kObservationSize; }
  std::size_t action_count() const override { return kActionCount; }
  Observation reset(Rng& rng) override;
  StepOutcome step(std::size_t action) override;
  std::optional<NodeId> monitor_node() const override;

  /// Installs an explicit state (tests, replays). Resets the monitor.
  Observation reset_to(EnvState state);

  const EnvState& state() const noexcept { return state_; }
  const TaskConfig& task() const noexcept { return task_; }
  const GridworldBinding& binding() const noexcept { return bind_; }
  Observation observe() const;
  OomdpState project() const { return map_w(state_, spec_, bind_, task_.s0); }
  std::string render() const;

 private:
  OomdpSpec spec_;
  GridworldSchema schema_;
  PropositionSet ap_;
  TaskConfig task_;
  const Dfa* monitor_;
  GridworldBinding bind_;
  EnvState state_;
  NodeId node_ = 0;
  bool done_ = true;
};

}  // namespace agcl
