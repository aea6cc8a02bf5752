#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "agcl/dfa.hpp"
#include "agcl/environment.hpp"

namespace agcl {

/// Layer widths from input to output, e.g. {42, 64, 64, 5}.
struct Architecture {
  std::vector<std::size_t> layers;

  std::size_t input_size() const { return layers.front(); }
  std::size_t output_size() const { return layers.back(); }
  std::size_t param_count() const;
  void validate() const;
  bool operator==(const Architecture&) const = default;
};

Architecture default_architecture(std::size_t inputs, std::size_t actions,
                                  const std::vector<std::size_t>& hidden = {64, 64});

/// Flat network parameters. Layer l stores its weight matrix input-major
/// (w[i * out + o]) followed by its bias vector.
struct QParams {
  Architecture arch;
  std::uint64_t seed = 0;
  std::vector<double> values;

  void validate() const;
  bool operator==(const QParams&) const = default;
};

/// He-uniform weights (output layer scaled by 0.01), zero biases.
QParams init_params(const Architecture& arch, std::uint64_t seed);

/// Binary format, little-endian:
///   "AGQP" | u32 version=1 | u32 L | u64 layers[L] | u64 seed | u64 n
///   | f64 values[n] | u64 FNV-1a over the preceding bytes
void write_params(std::ostream& out, const QParams& p);
QParams read_params(std::istream& in);
void save_params(const std::string& path, const QParams& p);
QParams load_params(const std::string& path);

/// Forward/backward pass with reusable scratch buffers. One instance per thread.
class QNetwork {
 public:
  explicit QNetwork(Architecture arch);

  const Architecture& arch() const noexcept { return arch_; }

  /// Q-values for a single input.
  std::span<const double> forward(const QParams& p, std::span<const double> x);
  std::size_t greedy(const QParams& p, std::span<const double> x);

  /// Mean Huber loss of Q(x_b, a_b) against y_b over a batch laid out row-major
  /// in `xs`. Writes d loss / d params into `grad` (resized, overwritten).
  double loss_and_grad(const QParams& p, std::span<const double> xs,
                       std::span<const std::size_t> actions, std::span<const double> targets,
                       std::vector<double>& grad);

 private:
  void forward_into(const QParams& p, const double* x, std::vector<std::vector<double>>& acts,
                    std::size_t row);

  Architecture arch_;
  std::vector<std::size_t> offsets_;  // start of each layer's weights
  std::vector<std::vector<double>> single_;
  std::vector<std::vector<double>> batch_acts_;
  std::vector<std::vector<double>> batch_delta_;
};

double huber(double x);

/// Largest relative error between analytic and central-difference gradients on
/// a random network and batch. Relative error uses max(|a|+|n|, 1e-8).
double gradient_check(const Architecture& arch, std::uint64_t seed, std::size_t batch = 4,
                      double h = 1e-6);

struct DqnHyper {
  std::size_t replay_capacity = 50'000;
  std::size_t batch = 64;
  double gamma = 0.99;
  double learning_rate = 5e-4;
  double eps_start = 1.0;
  double eps_end = 0.05;
  double eps_fraction = 0.1;
  std::size_t target_sync = 1000;
  std::size_t eval_every = 5000;
  std::size_t eval_episodes = 50;
  double success_threshold = 0.9;
  bool early_stop = true;
  std::size_t train_every = 4;
  std::size_t learning_starts = 1000;
  double reward_scale = 0.001;
  double grad_clip = 10.0;
  std::vector<std::size_t> hidden = {64, 64};

  bool operator==(const DqnHyper&) const = default;
};

nlohmann::json hyper_to_json(const DqnHyper& h);
DqnHyper hyper_from_json(const nlohmann::json& j, const std::string& path = "learner");

using EnvFactory = std::function<std::unique_ptr<Environment>()>;
/// Extra training reward for one transition; never enters reported returns.
using RewardShaper = std::function<double(const StepOutcome&)>;

struct EpisodeRecord {
  std::size_t end_step = 0;  ///< cumulative training steps at episode end
  std::size_t length = 0;
  double ret = 0;
  bool success = false;
  bool operator==(const EpisodeRecord&) const = default;
};

struct EvalRecord {
  std::size_t step = 0;
  double success_rate = 0;
  double mean_return = 0;
  bool operator==(const EvalRecord&) const = default;
};

struct TrainReport {
  std::vector<EpisodeRecord> episodes;
  std::vector<EvalRecord> evals;
  QParams params;
  std::size_t steps = 0;       ///< environment steps spent on training
  std::size_t eval_steps = 0;  ///< evaluation rollouts, tracked apart
  std::size_t updates = 0;
  bool reached_threshold = false;
  bool budget_exhausted = false;
  bool operator==(const TrainReport&) const = default;
};

/// Steps at the first checkpoint whose success rate reaches `threshold`.
std::optional<std::size_t> first_reaching(const std::vector<EvalRecord>& evals, double threshold);

struct EvalResult {
  double success_rate = 0;
  double mean_return = 0;
  std::size_t steps = 0;
};

using Policy = std::function<std::size_t(const Observation&)>;

/// `episodes` rollouts seeded from `seed`, the same layouts for equal seeds.
EvalResult evaluate_policy(const Policy& policy, const EnvFactory& make_env, std::size_t episodes,
                           std::uint64_t seed);
EvalResult evaluate(const QParams& params, const EnvFactory& make_env, std::size_t episodes,
                    std::uint64_t seed);

/// Epsilon-greedy DQN with replay and a periodically synced target network.
/// Evaluates at step 0, every `eval_every` steps and at the end; with
/// `early_stop` it stops at the first checkpoint reaching `success_threshold`.
TrainReport train(const EnvFactory& make_env, const QParams& init, std::size_t budget,
                  const DqnHyper& hyper, std::uint64_t seed, const RewardShaper& shaper = {});

QParams transfer_sequence(const QParams& src, const Architecture& expected);
QParams transfer_sequence(const QParams& src);

/// Convex combination p0 + sum_i beta_i (p_i - p0), which equals sum_i beta_i p_i
/// when the weights sum to 1 and returns identical sources bit-for-bit.
QParams transfer_weighted(const std::vector<std::pair<const QParams*, double>>& sources);

/// Bonus c / (1 + accept_distance(node)); zero where no accepting node is reachable.
class GsrsShaper {
 public:
  explicit GsrsShaper(const Dfa& dfa, double c = 1.0);
  double bonus(NodeId after) const;
  double operator()(const StepOutcome& o) const;

 private:
  std::vector<std::optional<std::size_t>> dist_;
  double c_;
};

}  // namespace agcl
