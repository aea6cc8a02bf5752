#include "agcl/learner.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "agcl/error.hpp"
#include "agcl/rng.hpp"

namespace agcl {

using nlohmann::json;

std::size_t Architecture::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 1; l < layers.size(); ++l) n += layers[l - 1] * layers[l] + layers[l];
  return n;
}

void Architecture::validate() const {
  if (layers.size() < 2) throw PreconditionError("architecture needs at least two layers");
  for (auto w : layers) {
    if (w == 0) throw PreconditionError("architecture has a zero-width layer");
  }
}

Architecture default_architecture(std::size_t inputs, std::size_t actions,
                                  const std::vector<std::size_t>& hidden) {
  Architecture a;
  a.layers.push_back(inputs);
  a.layers.insert(a.layers.end(), hidden.begin(), hidden.end());
  a.layers.push_back(actions);
  a.validate();
  return a;
}

void QParams::validate() const {
  arch.validate();
  if (values.size() != arch.param_count()) {
    throw PreconditionError("parameter vector length " + std::to_string(values.size()) +
                            " does not match architecture (" + std::to_string(arch.param_count()) +
                            ")");
  }
}

namespace {
constexpr double kOutputInitScale = 0.01;
}  // namespace

QParams init_params(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  QParams p{arch, seed, {}};
  p.values.reserve(arch.param_count());
  Rng rng(derive_seed(seed, "init"));
  for (std::size_t l = 1; l < arch.layers.size(); ++l) {
    const auto in = arch.layers[l - 1];
    const auto out = arch.layers[l];
    // small output layer so initial Q-values start near zero
    const double scale = l + 1 == arch.layers.size() ? kOutputInitScale : 1.0;
    const double bound = scale * std::sqrt(6.0 / static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t k = 0; k < in * out; ++k) p.values.push_back(u(rng));
    p.values.insert(p.values.end(), out, 0.0);
  }
  return p;
}

// ---------------------------------------------------------------------------
// binary I/O

namespace {

constexpr std::array<char, 4> kMagic = {'A', 'G', 'Q', 'P'};
constexpr std::uint32_t kVersion = 1;

struct Fnv {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void feed(const unsigned char* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  }
};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void bytes(const unsigned char* b, std::size_t n) {
    fnv_.feed(b, n);
    out_.write(reinterpret_cast<const char*>(b), static_cast<std::streamsize>(n));
  }
  template <class T>
  void le(T v) {
    std::array<unsigned char, sizeof(T)> b{};
    std::uint64_t bits;
    if constexpr (sizeof(T) == 8) {
      bits = std::bit_cast<std::uint64_t>(v);
    } else {
      bits = std::bit_cast<std::uint32_t>(v);
    }
    for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    bytes(b.data(), b.size());
  }
  std::uint64_t checksum() const { return fnv_.h; }

 private:
  std::ostream& out_;
  Fnv fnv_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  void bytes(unsigned char* b, std::size_t n, bool hash = true) {
    in_.read(reinterpret_cast<char*>(b), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw SchemaError("qparams", "truncated file");
    if (hash) fnv_.feed(b, n);
  }
  template <class T>
  T le(bool hash = true) {
    std::array<unsigned char, sizeof(T)> b{};
    bytes(b.data(), b.size(), hash);
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= std::uint64_t{b[i]} << (8 * i);
    if constexpr (sizeof(T) == 8) {
      return std::bit_cast<T>(bits);
    } else {
      return std::bit_cast<T>(static_cast<std::uint32_t>(bits));
    }
  }
  std::uint64_t checksum() const { return fnv_.h; }

 private:
  std::istream& in_;
  Fnv fnv_;
};

}  // namespace

void write_params(std::ostream& out, const QParams& p) {
  p.validate();
  Writer w(out);
  w.bytes(reinterpret_cast<const unsigned char*>(kMagic.data()), kMagic.size());
  w.le<std::uint32_t>(kVersion);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(p.arch.layers.size()));
  for (auto l : p.arch.layers) w.le<std::uint64_t>(l);
  w.le<std::uint64_t>(p.seed);
  w.le<std::uint64_t>(p.values.size());
  for (double v : p.values) w.le<double>(v);
  const auto sum = w.checksum();
  w.le<std::uint64_t>(sum);
  if (!out) throw Error("failed writing parameters");
}

QParams read_params(std::istream& in) {
  Reader r(in);
  std::array<unsigned char, 4> magic{};
  r.bytes(magic.data(), magic.size());
  if (std::memcmp(magic.data(), kMagic.data(), 4) != 0) throw SchemaError("qparams", "bad magic");
  if (r.le<std::uint32_t>() != kVersion) throw SchemaError("qparams", "unsupported version");
  const auto nl = r.le<std::uint32_t>();
  if (nl < 2 || nl > 64) throw SchemaError("qparams", "implausible layer count");
  QParams p;
  for (std::uint32_t i = 0; i < nl; ++i) p.arch.layers.push_back(r.le<std::uint64_t>());
  p.seed = r.le<std::uint64_t>();
  const auto n = r.le<std::uint64_t>();
  if (n != p.arch.param_count()) throw SchemaError("qparams", "length does not match architecture");
  p.values.resize(n);
  for (auto& v : p.values) v = r.le<double>();
  const auto expect = r.checksum();
  if (r.le<std::uint64_t>(false) != expect) throw SchemaError("qparams", "checksum mismatch");
  return p;
}

void save_params(const std::string& path, const QParams& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_params(out, p);
}

QParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return read_params(in);
}

// ---------------------------------------------------------------------------
// network

double huber(double x) {
  const double a = std::abs(x);
  return a <= 1.0 ? 0.5 * x * x : a - 0.5;
}

QNetwork::QNetwork(Architecture arch) : arch_(std::move(arch)) {
  arch_.validate();
  std::size_t off = 0;
  for (std::size_t l = 1; l < arch_.layers.size(); ++l) {
    offsets_.push_back(off);
    off += arch_.layers[l - 1] * arch_.layers[l] + arch_.layers[l];
  }
  single_.resize(arch_.layers.size());
  for (std::size_t l = 0; l < arch_.layers.size(); ++l) single_[l].resize(arch_.layers[l]);
}

void QNetwork::forward_into(const QParams& p, const double* x, std::vector<std::vector<double>>& acts,
                            std::size_t row) {
  const auto L = arch_.layers.size();
  std::copy(x, x + arch_.layers[0], acts[0].begin() + static_cast<std::ptrdiff_t>(row * arch_.layers[0]));
  for (std::size_t l = 1; l < L; ++l) {
    const auto in = arch_.layers[l - 1];
    const auto out = arch_.layers[l];
    const double* w = p.values.data() + offsets_[l - 1];
    const double* b = w + in * out;
    const double* a = acts[l - 1].data() + row * in;
    double* z = acts[l].data() + row * out;
    std::copy(b, b + out, z);
    for (std::size_t i = 0; i < in; ++i) {
      const double ai = a[i];
      if (ai == 0.0) continue;
      const double* wi = w + i * out;
      for (std::size_t o = 0; o < out; ++o) z[o] += ai * wi[o];
    }
    if (l + 1 < L) {
      for (std::size_t o = 0; o < out; ++o) z[o] = std::max(z[o], 0.0);
    }
  }
}

std::span<const double> QNetwork::forward(const QParams& p, std::span<const double> x) {
  if (x.size() != arch_.input_size()) throw PreconditionError("input size mismatch");
  forward_into(p, x.data(), single_, 0);
  return single_.back();
}

std::size_t QNetwork::greedy(const QParams& p, std::span<const double> x) {
  auto q = forward(p, x);
  return static_cast<std::size_t>(std::max_element(q.begin(), q.end()) - q.begin());
}

double QNetwork::loss_and_grad(const QParams& p, std::span<const double> xs,
                               std::span<const std::size_t> actions,
                               std::span<const double> targets, std::vector<double>& grad) {
  const auto B = actions.size();
  const auto L = arch_.layers.size();
  if (B == 0 || targets.size() != B || xs.size() != B * arch_.input_size()) {
    throw PreconditionError("batch shape mismatch");
  }
  batch_acts_.resize(L);
  batch_delta_.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    batch_acts_[l].assign(B * arch_.layers[l], 0.0);
    batch_delta_[l].assign(B * arch_.layers[l], 0.0);
  }
  grad.assign(p.values.size(), 0.0);

  const auto nout = arch_.output_size();
  double loss = 0;
  for (std::size_t r = 0; r < B; ++r) {
    forward_into(p, xs.data() + r * arch_.input_size(), batch_acts_, r);
    const auto a = actions[r];
    if (a >= nout) throw PreconditionError("action out of range");
    const double err = batch_acts_[L - 1][r * nout + a] - targets[r];
    loss += huber(err);
    batch_delta_[L - 1][r * nout + a] = std::clamp(err, -1.0, 1.0) / static_cast<double>(B);
  }
  loss /= static_cast<double>(B);

  for (std::size_t l = L - 1; l >= 1; --l) {
    const auto in = arch_.layers[l - 1];
    const auto out = arch_.layers[l];
    const double* w = p.values.data() + offsets_[l - 1];
    double* gw = grad.data() + offsets_[l - 1];
    double* gb = gw + in * out;
    for (std::size_t r = 0; r < B; ++r) {
      const double* d = batch_delta_[l].data() + r * out;
      const double* a = batch_acts_[l - 1].data() + r * in;
      for (std::size_t o = 0; o < out; ++o) gb[o] += d[o];
      for (std::size_t i = 0; i < in; ++i) {
        const double ai = a[i];
        if (ai == 0.0) continue;
        double* gwi = gw + i * out;
        for (std::size_t o = 0; o < out; ++o) gwi[o] += ai * d[o];
      }
      if (l > 1) {
        double* dp = batch_delta_[l - 1].data() + r * in;
        for (std::size_t i = 0; i < in; ++i) {
          if (a[i] <= 0.0) continue;  // ReLU gate
          const double* wi = w + i * out;
          double s = 0;
          for (std::size_t o = 0; o < out; ++o) s += wi[o] * d[o];
          dp[i] = s;
        }
      }
    }
  }
  return loss;
}

double gradient_check(const Architecture& arch, std::uint64_t seed, std::size_t batch, double h) {
  Rng rng(derive_seed(seed, "gradcheck"));
  auto p = init_params(arch, seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  // non-zero biases so every bias gradient is exercised
  for (auto& v : p.values) v += 0.05 * n01(rng);
  std::vector<double> xs(batch * arch.input_size());
  for (auto& x : xs) x = n01(rng);
  std::vector<std::size_t> acts(batch);
  std::uniform_int_distribution<std::size_t> pick(0, arch.output_size() - 1);
  for (auto& a : acts) a = pick(rng);
  QNetwork net(arch);
  std::vector<double> targets(batch);
  for (std::size_t r = 0; r < batch; ++r) {
    auto q = net.forward(p, std::span<const double>(xs.data() + r * arch.input_size(), arch.input_size()));
    // both Huber regimes
    targets[r] = q[acts[r]] + (r % 2 == 0 ? 0.3 : -2.5) * (1.0 + 0.1 * n01(rng));
  }
  std::vector<double> grad, scratch;
  net.loss_and_grad(p, xs, acts, targets, grad);
  double worst = 0;
  for (std::size_t k = 0; k < p.values.size(); ++k) {
    const double orig = p.values[k];
    p.values[k] = orig + h;
    const double up = net.loss_and_grad(p, xs, acts, targets, scratch);
    p.values[k] = orig - h;
    const double down = net.loss_and_grad(p, xs, acts, targets, scratch);
    p.values[k] = orig;
    const double numeric = (up - down) / (2 * h);
    const double denom = std::max(std::abs(grad[k]) + std::abs(numeric), 1e-8);
    worst = std::max(worst, std::abs(grad[k] - numeric) / denom);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// hyperparameters

json hyper_to_json(const DqnHyper& h) {
  return json{{"replay_capacity", h.replay_capacity},
              {"batch", h.batch},
              {"gamma", h.gamma},
              {"learning_rate", h.learning_rate},
              {"eps_start", h.eps_start},
              {"eps_end", h.eps_end},
              {"eps_fraction", h.eps_fraction},
              {"target_sync", h.target_sync},
              {"eval_every", h.eval_every},
              {"eval_episodes", h.eval_episodes},
              {"success_threshold", h.success_threshold},
              {"early_stop", h.early_stop},
              {"train_every", h.train_every},
              {"learning_starts", h.learning_starts},
              {"reward_scale", h.reward_scale},
              {"grad_clip", h.grad_clip},
              {"hidden", h.hidden}};
}

DqnHyper hyper_from_json(const json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  DqnHyper h;
  auto count = [&](const std::string& k, const json& v, std::size_t& out, bool positive) {
    const bool whole = v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    if (!whole || (positive && v.get<std::size_t>() == 0)) {
      throw SchemaError(path + "." + k, positive ? "expected a positive integer" : "expected a non-negative integer");
    }
    out = v.get<std::size_t>();
  };
  auto real = [&](const std::string& k, const json& v, double& out, double lo, double hi) {
    if (!v.is_number() || !std::isfinite(v.get<double>()) || v.get<double>() < lo || v.get<double>() > hi) {
      throw SchemaError(path + "." + k, "expected a number in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    out = v.get<double>();
  };
  for (const auto& [k, v] : j.items()) {
    if (k == "replay_capacity") count(k, v, h.replay_capacity, true);
    else if (k == "batch") count(k, v, h.batch, true);
    else if (k == "gamma") real(k, v, h.gamma, 0, 1);
    else if (k == "learning_rate") real(k, v, h.learning_rate, 0, 1);
    else if (k == "eps_start") real(k, v, h.eps_start, 0, 1);
    else if (k == "eps_end") real(k, v, h.eps_end, 0, 1);
    else if (k == "eps_fraction") real(k, v, h.eps_fraction, 0, 1);
    else if (k == "target_sync") count(k, v, h.target_sync, true);
    else if (k == "eval_every") count(k, v, h.eval_every, true);
    else if (k == "eval_episodes") count(k, v, h.eval_episodes, true);
    else if (k == "success_threshold") real(k, v, h.success_threshold, 0, 1);
    else if (k == "early_stop") {
      if (!v.is_boolean()) throw SchemaError(path + "." + k, "expected a boolean");
      h.early_stop = v.get<bool>();
    } else if (k == "train_every") count(k, v, h.train_every, true);
    else if (k == "learning_starts") count(k, v, h.learning_starts, false);
    else if (k == "reward_scale") real(k, v, h.reward_scale, 1e-12, 1e6);
    else if (k == "grad_clip") real(k, v, h.grad_clip, 0, 1e12);
    else if (k == "hidden") {
      if (!v.is_array() || v.empty()) throw SchemaError(path + "." + k, "expected a non-empty array");
      h.hidden.clear();
      for (std::size_t i = 0; i < v.size(); ++i) {
        std::size_t w = 0;
        count(k + "[" + std::to_string(i) + "]", v[i], w, true);
        h.hidden.push_back(w);
      }
    } else {
      throw SchemaError(path + "." + k, "unknown key");
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// evaluation

std::optional<std::size_t> first_reaching(const std::vector<EvalRecord>& evals, double threshold) {
  for (const auto& e : evals) {
    if (e.success_rate >= threshold) return e.step;
  }
  return std::nullopt;
}

EvalResult evaluate_policy(const Policy& policy, const EnvFactory& make_env, std::size_t episodes,
                           std::uint64_t seed) {
  if (episodes == 0) throw PreconditionError("evaluation needs at least one episode");
  auto env = make_env();
  Rng rng(derive_seed(seed, "eval"));
  EvalResult r;
  std::size_t wins = 0;
  double total = 0;
  for (std::size_t e = 0; e < episodes; ++e) {
    auto obs = env->reset(rng);
    for (;;) {
      auto out = env->step(policy(obs));
      ++r.steps;
      total += out.reward;
      if (out.done) {
        wins += out.success ? 1 : 0;
        break;
      }
      obs = std::move(out.observation);
    }
  }
  r.success_rate = static_cast<double>(wins) / static_cast<double>(episodes);
  r.mean_return = total / static_cast<double>(episodes);
  return r;
}

EvalResult evaluate(const QParams& params, const EnvFactory& make_env, std::size_t episodes,
                    std::uint64_t seed) {
  params.validate();
  QNetwork net(params.arch);
  return evaluate_policy([&](const Observation& o) { return net.greedy(params, o); }, make_env,
                         episodes, seed);
}

// ---------------------------------------------------------------------------
// training

namespace {

class Replay {
 public:
  Replay(std::size_t capacity, std::size_t obs_size)
      : cap_(capacity), dim_(obs_size), obs_(capacity * obs_size), next_(capacity * obs_size),
        action_(capacity), reward_(capacity), terminal_(capacity) {}

  void push(const Observation& o, std::size_t a, double r, const Observation& n, bool terminal) {
    std::copy(o.begin(), o.end(), obs_.begin() + static_cast<std::ptrdiff_t>(head_ * dim_));
    std::copy(n.begin(), n.end(), next_.begin() + static_cast<std::ptrdiff_t>(head_ * dim_));
    action_[head_] = a;
    reward_[head_] = r;
    terminal_[head_] = terminal ? 1 : 0;
    head_ = (head_ + 1) % cap_;
    size_ = std::min(size_ + 1, cap_);
  }

  std::size_t size() const { return size_; }
  const float* obs(std::size_t i) const { return obs_.data() + i * dim_; }
  const float* next(std::size_t i) const { return next_.data() + i * dim_; }
  std::size_t action(std::size_t i) const { return action_[i]; }
  double reward(std::size_t i) const { return reward_[i]; }
  bool terminal(std::size_t i) const { return terminal_[i] != 0; }

 private:
  std::size_t cap_, dim_;
  std::vector<float> obs_, next_;
  std::vector<std::size_t> action_;
  std::vector<double> reward_;
  std::vector<std::uint8_t> terminal_;
  std::size_t head_ = 0, size_ = 0;
};

class Adam {
 public:
  explicit Adam(std::size_t n) : m_(n, 0.0), v_(n, 0.0) {}
  void step(std::vector<double>& params, const std::vector<double>& grad, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(kB1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kB2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = kB1 * m_[i] + (1 - kB1) * grad[i];
      v_[i] = kB2 * v_[i] + (1 - kB2) * grad[i] * grad[i];
      params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + kEps);
    }
  }

 private:
  static constexpr double kB1 = 0.9, kB2 = 0.999, kEps = 1e-8;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace

TrainReport train(const EnvFactory& make_env, const QParams& init, std::size_t budget,
                  const DqnHyper& hyper, std::uint64_t seed, const RewardShaper& shaper) {
  if (budget == 0) throw PreconditionError("training budget must be at least 1 step");
  init.validate();
  auto env = make_env();
  if (init.arch.input_size() != env->observation_size() ||
      init.arch.output_size() != env->action_count()) {
    throw PreconditionError("architecture does not match the environment");
  }
  if (hyper.batch == 0 || hyper.replay_capacity == 0 || hyper.train_every == 0 ||
      hyper.target_sync == 0 || hyper.eval_every == 0 || hyper.eval_episodes == 0) {
    throw PreconditionError("hyperparameters must be positive");
  }

  TrainReport rep;
  rep.params = init;
  QParams target = init;
  QNetwork net(init.arch);
  QNetwork target_net(init.arch);
  Adam adam(init.values.size());
  Replay replay(hyper.replay_capacity, env->observation_size());

  Rng env_rng(derive_seed(seed, "env"));
  Rng act_rng(derive_seed(seed, "explore"));
  Rng batch_rng(derive_seed(seed, "replay"));
  const auto eval_seed = derive_seed(seed, "evaluation");
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> random_action(0, env->action_count() - 1);

  const auto dim = env->observation_size();
  const auto nact = env->action_count();
  std::vector<double> xs(hyper.batch * dim), ys(hyper.batch), grad, qnext;
  std::vector<std::size_t> acts(hyper.batch);
  const double anneal = std::max(1.0, hyper.eps_fraction * static_cast<double>(budget));

  auto checkpoint = [&](std::size_t step) {
    auto r = evaluate(rep.params, make_env, hyper.eval_episodes, eval_seed);
    rep.eval_steps += r.steps;
    rep.evals.push_back({step, r.success_rate, r.mean_return});
    if (r.success_rate >= hyper.success_threshold) rep.reached_threshold = true;
    return hyper.early_stop && r.success_rate >= hyper.success_threshold;
  };

  if (checkpoint(0)) return rep;

  auto obs = env->reset(env_rng);
  double ep_return = 0;
  std::size_t ep_len = 0;
  bool stopped = false;
  for (std::size_t t = 1; t <= budget; ++t) {
    const double frac = std::min(1.0, static_cast<double>(t - 1) / anneal);
    const double eps = hyper.eps_start + frac * (hyper.eps_end - hyper.eps_start);
    const std::size_t a = coin(act_rng) < eps ? random_action(act_rng) : net.greedy(rep.params, obs);

    auto out = env->step(a);
    ep_return += out.reward;
    ++ep_len;
    double r = out.reward + (shaper ? shaper(out) : 0.0);
    replay.push(obs, a, r * hyper.reward_scale, out.observation, out.done && !out.truncated);
    rep.steps = t;

    if (out.done) {
      rep.episodes.push_back({t, ep_len, ep_return, out.success});
      ep_return = 0;
      ep_len = 0;
      obs = env->reset(env_rng);
    } else {
      obs = std::move(out.observation);
    }

    if (t >= hyper.learning_starts && t % hyper.train_every == 0 && replay.size() >= hyper.batch) {
      std::uniform_int_distribution<std::size_t> pick(0, replay.size() - 1);
      for (std::size_t b = 0; b < hyper.batch; ++b) {
        const auto i = pick(batch_rng);
        std::copy(replay.obs(i), replay.obs(i) + dim, xs.begin() + static_cast<std::ptrdiff_t>(b * dim));
        acts[b] = replay.action(i);
        double y = replay.reward(i);
        if (!replay.terminal(i)) {
          qnext.assign(replay.next(i), replay.next(i) + dim);
          auto q = target_net.forward(target, qnext);
          y += hyper.gamma * *std::max_element(q.begin(), q.begin() + static_cast<std::ptrdiff_t>(nact));
        }
        ys[b] = y;
      }
      const double loss = net.loss_and_grad(rep.params, xs, acts, ys, grad);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "non-finite loss at step " << t << " after " << rep.updates << " updates (loss=" << loss
            << ")";
        throw NumericalError(msg.str());
      }
      if (hyper.grad_clip > 0) {
        double norm = 0;
        for (double g : grad) norm += g * g;
        norm = std::sqrt(norm);
        if (norm > hyper.grad_clip) {
          for (double& g : grad) g *= hyper.grad_clip / norm;
        }
      }
      if (hyper.learning_rate > 0) adam.step(rep.params.values, grad, hyper.learning_rate);
      ++rep.updates;
    }
    if (t % hyper.target_sync == 0) target.values = rep.params.values;
    if (t % hyper.eval_every == 0 || t == budget) {
      if (checkpoint(t)) {
        stopped = true;
        break;
      }
    }
  }
  rep.budget_exhausted = !stopped && rep.steps == budget;
  return rep;
}

// ---------------------------------------------------------------------------
// transfer

QParams transfer_sequence(const QParams& src, const Architecture& expected) {
  src.validate();
  if (src.arch != expected) throw PreconditionError("architecture mismatch in transfer");
  return src;
}

QParams transfer_sequence(const QParams& src) { return transfer_sequence(src, src.arch); }

QParams transfer_weighted(const std::vector<std::pair<const QParams*, double>>& sources) {
  if (sources.empty()) throw PreconditionError("weighted transfer needs at least one source");
  double sum = 0;
  for (const auto& [p, beta] : sources) {
    if (p == nullptr) throw PreconditionError("null source parameters");
    p->validate();
    if (p->arch != sources.front().first->arch) throw PreconditionError("architecture mismatch in transfer");
    if (!(beta >= 0) || !std::isfinite(beta)) throw PreconditionError("transfer weights must be non-negative");
    sum += beta;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw PreconditionError("transfer weights must sum to 1");
  QParams out = *sources.front().first;
  const auto& base = sources.front().first->values;
  for (std::size_t k = 0; k < out.values.size(); ++k) {
    double acc = base[k];
    for (std::size_t s = 1; s < sources.size(); ++s) {
      acc += sources[s].second * (sources[s].first->values[k] - base[k]);
    }
    out.values[k] = acc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// shaping

GsrsShaper::GsrsShaper(const Dfa& dfa, double c) : dist_(accept_distances(dfa)), c_(c) {}

double GsrsShaper::bonus(NodeId after) const {
  const auto& d = dist_.at(after);
  return d ? c_ / (1.0 + static_cast<double>(*d)) : 0.0;
}

double GsrsShaper::operator()(const StepOutcome& o) const {
  return o.monitor_node ? bonus(*o.monitor_node) : 0.0;
}

}  // namespace agcl
