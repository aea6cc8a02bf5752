#include "agcl/gridworld.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "agcl/error.hpp"

namespace agcl {

namespace {

constexpr std::array<std::pair<int, int>, kBeamCount> kDirections = {{
    {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1},
}};

std::pair<int, int> facing(Heading h) { return kDirections[2 * static_cast<std::size_t>(h)]; }

int as_count(const OomdpState& s, const std::optional<std::size_t>& i) {
  return i ? static_cast<int>(std::lround(s[*i])) : 0;
}

std::optional<std::size_t> param(const OomdpSpec& spec, const std::string& name) {
  return name.empty() ? std::nullopt : spec.find(name);
}

std::optional<std::size_t> label_for_env(const OomdpSpec& spec, const PropositionSet& ap,
                                         const std::string& env_param) {
  if (env_param.empty()) return std::nullopt;
  for (const auto& b : spec.bindings()) {
    if (!b.terminal && b.env_param == env_param && ap.contains(b.proposition)) {
      return ap.index_of(b.proposition);
    }
  }
  return std::nullopt;
}

}  // namespace

std::size_t EnvState::count(Cell c) const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), c));
}

GridworldBinding GridworldBinding::resolve(const OomdpSpec& spec, const GridworldSchema& schema,
                                           const PropositionSet& ap) {
  GridworldBinding b;
  b.width = param(spec, schema.width);
  b.height = param(spec, schema.height);
  if (!b.width || !b.height) throw SchemaError("oomdp", "gridworld needs width and height parameters");
  b.trees_env = param(spec, schema.trees_env);
  b.trees_inv = param(spec, schema.trees_inv);
  b.rocks_env = param(spec, schema.rocks_env);
  b.rocks_inv = param(spec, schema.rocks_inv);
  b.table_env = param(spec, schema.table_env);
  b.distractor_env = param(spec, schema.distractor_env);
  b.distractor_inv = param(spec, schema.distractor_inv);
  b.tree_label = label_for_env(spec, ap, schema.trees_env);
  b.rock_label = label_for_env(spec, ap, schema.rocks_env);
  b.distractor_label = label_for_env(spec, ap, schema.distractor_env);
  for (const auto& bind : spec.bindings()) {
    if (bind.terminal && ap.contains(bind.proposition)) {
      b.craft_label = ap.index_of(bind.proposition);
      break;
    }
  }
  return b;
}

bool placement_fits(const OomdpSpec& spec, const GridworldSchema& schema, const OomdpState& s0) {
  auto b = GridworldBinding::resolve(spec, schema, PropositionSet{});
  const long long w = std::max(1L, std::lround(s0[*b.width]));
  const long long h = std::max(1L, std::lround(s0[*b.height]));
  const long long objects = as_count(s0, b.trees_env) + as_count(s0, b.rocks_env) +
                            as_count(s0, b.table_env) + as_count(s0, b.distractor_env);
  return objects + 1 <= w * h;
}

StateFilter placement_filter(const OomdpSpec& spec, const GridworldSchema& schema) {
  return [spec, schema](const OomdpState& s0) { return placement_fits(spec, schema, s0); };
}

OomdpState map_w(const EnvState& env, const OomdpSpec& spec, const GridworldBinding& bind,
                 const OomdpState& fallback) {
  OomdpState out = fallback;
  out.values.resize(spec.param_count(), 0.0);
  auto set = [&](const std::optional<std::size_t>& i, double v) {
    if (i) out.values[*i] = v;
  };
  set(bind.width, env.width);
  set(bind.height, env.height);
  set(bind.trees_env, static_cast<double>(env.count(Cell::Tree)));
  set(bind.rocks_env, static_cast<double>(env.count(Cell::Rock)));
  set(bind.table_env, static_cast<double>(env.count(Cell::Table)));
  set(bind.distractor_env, static_cast<double>(env.count(Cell::Distractor)));
  set(bind.trees_inv, env.trees_inv);
  set(bind.rocks_inv, env.rocks_inv);
  set(bind.distractor_inv, env.distractor_inv);
  return out;
}

bool source_goal_check(const TaskConfig& task, const EnvState& env, const OomdpSpec& spec,
                       const GridworldBinding& bind) {
  auto now = map_w(env, spec, bind, task.s0);
  for (std::size_t i = 0; i < spec.param_count(); ++i) {
    if (spec.is_inventory(i) && now[i] < task.sf[i]) return false;
  }
  return true;
}

Gridworld::Gridworld(const OomdpSpec& spec, const GridworldSchema& schema, const PropositionSet& ap,
                     TaskConfig task, const Dfa* monitor)
    : spec_(spec),
      schema_(schema),
      ap_(ap),
      task_(std::move(task)),
      monitor_(monitor),
      bind_(GridworldBinding::resolve(spec, schema, ap)) {
  if (task_.s0.values.size() != spec_.param_count()) {
    throw PreconditionError("task does not match the task space");
  }
  if (monitor_ && monitor_->propositions() != ap_) {
    throw PreconditionError("monitor alphabet differs from the environment's");
  }
  if (!placement_fits(spec_, schema_, task_.s0)) {
    throw InfeasibleError("task '" + task_.id + "' has more objects than free cells");
  }
}

Observation Gridworld::reset(Rng& rng) {
  EnvState s;
  s.width = static_cast<int>(std::max(1L, std::lround(task_.s0[*bind_.width])));
  s.height = static_cast<int>(std::max(1L, std::lround(task_.s0[*bind_.height])));
  s.cells.assign(static_cast<std::size_t>(s.width * s.height), Cell::Empty);
  std::vector<std::size_t> order(s.cells.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t next = 0;
  auto place = [&](Cell c, int n) {
    for (int k = 0; k < n; ++k) s.cells[order[next++]] = c;
  };
  place(Cell::Tree, as_count(task_.s0, bind_.trees_env));
  place(Cell::Rock, as_count(task_.s0, bind_.rocks_env));
  place(Cell::Table, as_count(task_.s0, bind_.table_env));
  place(Cell::Distractor, as_count(task_.s0, bind_.distractor_env));
  const auto agent = order[next];
  s.x = static_cast<int>(agent % static_cast<std::size_t>(s.width));
  s.y = static_cast<int>(agent / static_cast<std::size_t>(s.width));
  s.heading = static_cast<Heading>(std::uniform_int_distribution<int>(0, 3)(rng));
  s.trees_inv = as_count(task_.s0, bind_.trees_inv);
  s.rocks_inv = as_count(task_.s0, bind_.rocks_inv);
  s.distractor_inv = as_count(task_.s0, bind_.distractor_inv);
  return reset_to(std::move(s));
}

Observation Gridworld::reset_to(EnvState state) {
  if (!state.in_bounds(state.x, state.y) || state.at(state.x, state.y) != Cell::Empty) {
    throw PreconditionError("agent must stand on an empty in-bounds cell");
  }
  state_ = std::move(state);
  node_ = monitor_ ? monitor_->initial() : 0;
  done_ = false;
  return observe();
}

std::optional<NodeId> Gridworld::monitor_node() const {
  return monitor_ ? std::optional<NodeId>(node_) : std::nullopt;
}

StepOutcome Gridworld::step(std::size_t action) {
  if (done_) throw PreconditionError("step on a finished episode");
  auto& s = state_;
  StepOutcome out;
  out.reward = schema_.step_reward;
  bool crafted = false;
  auto emit = [&](const std::optional<std::size_t>& label) {
    if (label) out.labels |= Symbol{1} << *label;
  };

  auto [dx, dy] = facing(s.heading);
  const int fx = s.x + dx;
  const int fy = s.y + dy;
  const bool ahead_in = s.in_bounds(fx, fy);
  switch (static_cast<Action>(action)) {
    case Action::Forward:
      if (ahead_in && s.at(fx, fy) == Cell::Empty) {
        s.x = fx;
        s.y = fy;
      }
      break;
    case Action::RotateLeft:
      s.heading = static_cast<Heading>((static_cast<int>(s.heading) + 3) % 4);
      break;
    case Action::RotateRight:
      s.heading = static_cast<Heading>((static_cast<int>(s.heading) + 1) % 4);
      break;
    case Action::Break:
      if (!ahead_in) break;
      switch (s.at(fx, fy)) {
        case Cell::Tree:
          s.at(fx, fy) = Cell::Empty;
          ++s.trees_inv;
          emit(bind_.tree_label);
          break;
        case Cell::Rock:
          s.at(fx, fy) = Cell::Empty;
          ++s.rocks_inv;
          emit(bind_.rock_label);
          break;
        case Cell::Distractor:
          s.at(fx, fy) = Cell::Empty;
          ++s.distractor_inv;
          emit(bind_.distractor_label);
          break;
        default:
          break;
      }
      break;
    case Action::Craft:
      if (ahead_in && s.at(fx, fy) == Cell::Table && s.trees_inv >= schema_.craft_trees &&
          s.rocks_inv >= schema_.craft_rocks) {
        s.trees_inv -= schema_.craft_trees;
        s.rocks_inv -= schema_.craft_rocks;
        emit(bind_.craft_label);
        crafted = true;
      }
      break;
    default:
      break;  // unknown actions are no-ops
  }
  ++s.steps;

  if (monitor_) {
    node_ = monitor_->step(node_, out.labels);
    out.monitor_node = node_;
    out.success = monitor_->is_accepting(node_);
  } else {
    out.success = source_goal_check(task_, s, spec_, bind_);
  }
  if (out.success) out.reward = schema_.success_reward;
  out.done = out.success || crafted || s.steps >= schema_.step_cap;
  out.truncated = out.done && !out.success && !crafted;
  done_ = out.done;
  out.observation = observe();
  return out;
}

Observation Gridworld::observe() const {
  const auto& s = state_;
  Observation obs(kObservationSize, 1.0);
  const double diag = std::hypot(static_cast<double>(s.width), static_cast<double>(s.height));
  for (std::size_t b = 0; b < kBeamCount; ++b) {
    auto [dx, dy] = kDirections[(2 * static_cast<std::size_t>(s.heading) + b) % kBeamCount];
    const double unit = std::hypot(static_cast<double>(dx), static_cast<double>(dy)) / diag;
    double* beam = obs.data() + b * kBeamChannels;
    for (int k = 1;; ++k) {
      const int cx = s.x + k * dx;
      const int cy = s.y + k * dy;
      const double d = std::min(1.0, k * unit);
      if (!s.in_bounds(cx, cy)) {
        beam[4] = d;
        break;
      }
      const Cell c = s.at(cx, cy);
      if (c == Cell::Empty) continue;
      double& slot = beam[static_cast<std::size_t>(c) - 1];
      slot = std::min(slot, d);
    }
  }
  auto inv_norm = [&](const std::optional<std::size_t>& i, int v) {
    if (!i) return 0.0;
    const double hi = spec_.param(*i).hi;
    return hi > 0 ? std::clamp(v / hi, 0.0, 1.0) : 0.0;
  };
  obs[kBeamCount * kBeamChannels] = inv_norm(bind_.trees_inv, s.trees_inv);
  obs[kBeamCount * kBeamChannels + 1] = inv_norm(bind_.rocks_inv, s.rocks_inv);
  return obs;
}

std::string Gridworld::render() const {
  static constexpr char kCells[] = {'.', 'T', 'R', 'C', 'D'};
  static constexpr char kAgent[] = {'^', '>', 'v', '<'};
  const auto& s = state_;
  std::string out;
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      out += (x == s.x && y == s.y) ? kAgent[static_cast<int>(s.heading)]
                                    : kCells[static_cast<int>(s.at(x, y))];
    }
    out += '\n';
  }
  out += "inventory trees=" + std::to_string(s.trees_inv) + " rocks=" + std::to_string(s.rocks_inv);
  if (bind_.distractor_inv) out += " distractors=" + std::to_string(s.distractor_inv);
  return out + " step=" + std::to_string(s.steps) + "\n";
}

}  // namespace agcl
