#include "agcl/oomdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "agcl/error.hpp"
#include "agcl/rng.hpp"

namespace agcl {

namespace {

bool is_integral(double v) { return std::isfinite(v) && v == std::floor(v); }

const char* kind_name(ParamKind k) { return k == ParamKind::Integer ? "integer" : "real"; }

}  // namespace

OomdpSpec::OomdpSpec(std::vector<ClassSpec> classes, std::vector<PropositionBinding> bindings)
    : classes_(std::move(classes)), bindings_(std::move(bindings)) {
  std::set<std::string> names;
  for (const auto& c : classes_) {
    for (const auto& p : c.params) {
      const std::string where = "oomdp." + c.name + "." + p.name;
      if (p.name.empty()) throw SchemaError(where, "empty parameter name");
      if (!names.insert(p.name).second) throw SchemaError(where, "duplicate parameter name");
      if (!std::isfinite(p.lo) || !std::isfinite(p.hi)) throw SchemaError(where, "non-finite range");
      if (p.lo > p.hi) throw SchemaError(where, "range has lo > hi");
      if (p.kind == ParamKind::Integer && (!is_integral(p.lo) || !is_integral(p.hi))) {
        throw SchemaError(where, "integer range needs integer endpoints");
      }
      params_.push_back(p);
    }
  }
  std::set<std::string> props;
  for (const auto& b : bindings_) {
    const std::string where = "oomdp.bindings." + b.proposition;
    if (!props.insert(b.proposition).second) throw SchemaError(where, "duplicate binding");
    if (!b.terminal) {
      for (const auto* name : {&b.env_param, &b.inv_param}) {
        auto i = find(*name);
        if (!i) throw SchemaError(where, "unknown parameter '" + *name + "'");
        if (params_[*i].kind != ParamKind::Integer) {
          throw SchemaError(where, "consumed parameter '" + *name + "' must be integer");
        }
      }
      if (b.env_param == b.inv_param) throw SchemaError(where, "env and inventory must differ");
    }
    for (const auto& r : b.preconditions) {
      if (!find(r.param)) throw SchemaError(where, "unknown parameter '" + r.param + "'");
    }
  }
}

std::optional<std::size_t> OomdpSpec::find(std::string_view name) const noexcept {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t OomdpSpec::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw SchemaError("oomdp", "unknown parameter '" + std::string(name) + "'");
}

const PropositionBinding* OomdpSpec::binding_for(std::string_view proposition) const noexcept {
  for (const auto& b : bindings_) {
    if (b.proposition == proposition) return &b;
  }
  return nullptr;
}

bool OomdpSpec::has_real_params() const noexcept {
  return std::any_of(params_.begin(), params_.end(),
                     [](const ParamSpec& p) { return p.kind == ParamKind::Real; });
}

bool OomdpSpec::is_inventory(std::size_t i) const noexcept {
  if (i >= params_.size()) return false;
  return std::any_of(bindings_.begin(), bindings_.end(), [&](const PropositionBinding& b) {
    return !b.terminal && b.inv_param == params_[i].name;
  });
}

void OomdpSpec::validate_bindings(const PropositionSet& ap) const {
  for (const auto& name : ap.names()) {
    if (!binding_for(name)) throw SchemaError("oomdp.bindings", "no binding for '" + name + "'");
  }
  for (const auto& b : bindings_) {
    if (!ap.contains(b.proposition)) {
      throw SchemaError("oomdp.bindings", "binding for undeclared proposition '" + b.proposition + "'");
    }
  }
}

// ---------------------------------------------------------------------------

NodeRequirement node_requirement(const Dfa& dfa, const TracePath& path, std::size_t node_index,
                                 const OomdpSpec& spec, const TaskConfig& target) {
  if (node_index >= path.nodes.size()) throw PreconditionError("node index outside path");
  if (target.s0.values.size() != spec.param_count()) {
    throw PreconditionError("target state does not match spec");
  }
  const auto& ap = dfa.propositions();
  const auto n = spec.param_count();
  NodeRequirement req;
  req.event_counts.assign(ap.size(), 0);
  req.lower_bound.assign(n, -std::numeric_limits<double>::infinity());
  req.delta.assign(n, 0.0);
  req.pinned.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) req.pinned[i] = spec.is_inventory(i);

  for (std::size_t step = 0; step < node_index; ++step) {
    const auto& props = path.labels.at(step);
    if (props.empty()) throw PreconditionError("path edge without a proposition");
    // Several single propositions may trigger the same edge; the lowest index
    // is taken as the representative event.
    req.event_counts[props.front()] += 1;
  }
  for (std::size_t p = 0; p < ap.size(); ++p) {
    const auto count = req.event_counts[p];
    if (count == 0) continue;
    const auto* b = spec.binding_for(ap.name(p));
    if (!b) throw SchemaError("oomdp.bindings", "no binding for '" + ap.name(p) + "'");
    if (!b->terminal) {
      auto env = spec.index_of(b->env_param);
      auto inv = spec.index_of(b->inv_param);
      req.lower_bound[env] = std::max(req.lower_bound[env], static_cast<double>(count));
      req.delta[env] -= static_cast<double>(count);
      req.delta[inv] += static_cast<double>(count);
    }
    for (const auto& r : b->preconditions) {
      auto i = spec.index_of(r.param);
      req.lower_bound[i] = std::max(req.lower_bound[i], r.at_least);
    }
  }
  return req;
}

namespace {

// Feasible per-parameter domain: a pinned value, an integer interval or a real interval.
struct Domain {
  bool pinned = false;
  ParamKind kind = ParamKind::Integer;
  double lo = 0;
  double hi = 0;

  double size() const { return pinned ? 1.0 : (kind == ParamKind::Integer ? hi - lo + 1 : 0); }
};

std::vector<Domain> domains_for(const NodeRequirement& req, const OomdpSpec& spec,
                                const TaskConfig& target) {
  std::vector<Domain> out(spec.param_count());
  for (std::size_t i = 0; i < spec.param_count(); ++i) {
    const auto& p = spec.param(i);
    auto& d = out[i];
    d.kind = p.kind;
    if (req.pinned[i]) {
      d.pinned = true;
      d.lo = d.hi = target.s0[i];
      if (d.lo < req.lower_bound[i]) {
        throw InfeasibleError("pinned parameter '" + p.name + "' below its requirement");
      }
    } else {
      d.lo = std::max(p.lo, req.lower_bound[i]);
      d.hi = p.hi;
      if (p.kind == ParamKind::Integer) d.lo = std::ceil(d.lo);
      if (d.lo > d.hi) {
        throw InfeasibleError("parameter '" + p.name + "' needs at least " +
                              std::to_string(d.lo) + " but range max is " + std::to_string(d.hi));
      }
    }
    if (req.delta[i] > 0 && d.hi + req.delta[i] > p.hi) {
      throw InfeasibleError("goal value of '" + p.name + "' exceeds range max");
    }
  }
  return out;
}

bool is_final_accepting(const Dfa& dfa, const TracePath& path, std::size_t node_index) {
  return node_index + 1 == path.nodes.size() && dfa.is_accepting(path.nodes[node_index]);
}

TaskConfig make_task(const NodeRequirement& req, OomdpState s0, std::uint64_t seed_base,
                     std::string id) {
  TaskConfig t;
  t.id = std::move(id);
  t.sf = s0;
  for (std::size_t i = 0; i < req.delta.size(); ++i) t.sf.values[i] += req.delta[i];
  t.s0 = std::move(s0);
  t.placement_seed = placement_seed_for(seed_base, t.s0, t.sf);
  return t;
}

std::string task_id(NodeId node, std::string_view tag, std::size_t k) {
  return "n" + std::to_string(node) + "." + std::string(tag) + std::to_string(k);
}

}  // namespace

std::uint64_t placement_seed_for(std::uint64_t base, const OomdpState& s0, const OomdpState& sf) {
  std::uint64_t h = base;
  for (const auto* s : {&s0, &sf}) {
    for (double v : s->values) {
      std::uint64_t bits;
      static_assert(sizeof bits == sizeof v);
      std::memcpy(&bits, &v, sizeof v);
      h = derive_seed(h, bits);
    }
  }
  return h;
}

std::optional<double> node_grid_size(const Dfa& dfa, const TracePath& path, std::size_t node_index,
                                     const OomdpSpec& spec, const TaskConfig& target) {
  if (is_final_accepting(dfa, path, node_index)) return 1.0;
  if (spec.has_real_params()) return std::nullopt;
  auto req = node_requirement(dfa, path, node_index, spec, target);
  double total = 1.0;
  for (const auto& d : domains_for(req, spec, target)) total *= d.size();
  return total;
}

std::vector<TaskConfig> tasks_for_node(const Dfa& dfa, const TracePath& path,
                                       std::size_t node_index, const OomdpSpec& spec,
                                       const TaskConfig& target, const NodeTaskOptions& opts) {
  if (is_final_accepting(dfa, path, node_index)) return {target};
  if (spec.has_real_params()) {
    throw PreconditionError("spec has real parameters; use sample_node_tasks");
  }
  auto req = node_requirement(dfa, path, node_index, spec, target);
  auto doms = domains_for(req, spec, target);
  double total = 1.0;
  for (const auto& d : doms) total *= d.size();
  if (total > static_cast<double>(opts.grid_cap)) {
    throw ResourceLimitError("node grid has " + std::to_string(static_cast<long long>(total)) +
                             " configurations, above cap " + std::to_string(opts.grid_cap));
  }

  const NodeId node = path.nodes[node_index];
  std::vector<TaskConfig> out;
  OomdpState s;
  s.values.resize(doms.size());
  for (std::size_t i = 0; i < doms.size(); ++i) s.values[i] = doms[i].lo;
  while (true) {
    if (!opts.filter || opts.filter(s)) {
      out.push_back(make_task(req, s, opts.seed, task_id(node, "", out.size())));
    }
    // Odometer increment, last parameter fastest.
    std::size_t i = doms.size();
    while (i > 0) {
      --i;
      if (s.values[i] < doms[i].hi) {
        s.values[i] += 1;
        break;
      }
      s.values[i] = doms[i].lo;
      if (i == 0) return out;
    }
    if (doms.empty()) return out;
  }
}

std::vector<TaskConfig> sample_node_tasks(const Dfa& dfa, const TracePath& path,
                                          std::size_t node_index, const OomdpSpec& spec,
                                          const TaskConfig& target, std::size_t b,
                                          std::uint64_t seed, const NodeTaskOptions& opts) {
  if (b == 0) throw PreconditionError("sample size must be positive");
  if (is_final_accepting(dfa, path, node_index)) return {target};
  auto req = node_requirement(dfa, path, node_index, spec, target);
  auto doms = domains_for(req, spec, target);
  if (!spec.has_real_params()) {
    double total = 1.0;
    for (const auto& d : doms) total *= d.size();
    if (total < static_cast<double>(b)) {
      throw ResourceLimitError("feasible region holds " +
                               std::to_string(static_cast<long long>(total)) +
                               " configurations, fewer than " + std::to_string(b));
    }
  }

  Rng rng(seed);
  std::set<OomdpState> seen;
  const std::size_t max_attempts = 100 * b + 1000;
  for (std::size_t attempt = 0; attempt < max_attempts && seen.size() < b; ++attempt) {
    OomdpState s;
    s.values.reserve(doms.size());
    for (const auto& d : doms) {
      if (d.pinned || d.lo == d.hi) {
        s.values.push_back(d.lo);
      } else if (d.kind == ParamKind::Integer) {
        std::uniform_int_distribution<long long> dist(static_cast<long long>(d.lo),
                                                      static_cast<long long>(d.hi));
        s.values.push_back(static_cast<double>(dist(rng)));
      } else {
        std::uniform_real_distribution<double> dist(d.lo, d.hi);
        s.values.push_back(dist(rng));
      }
    }
    if (opts.filter && !opts.filter(s)) continue;
    seen.insert(std::move(s));
  }
  if (seen.size() < b) {
    throw ResourceLimitError("sampling retries exhausted after " + std::to_string(seen.size()) +
                             " distinct configurations");
  }
  const NodeId node = path.nodes[node_index];
  std::vector<TaskConfig> out;
  out.reserve(b);
  for (const auto& s : seen) out.push_back(make_task(req, s, opts.seed, task_id(node, "s", out.size())));
  return out;
}

OomdpSpec apply_range_noise(const OomdpSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  auto classes = spec.classes();
  for (auto& c : classes) {
    for (auto& p : c.params) {
      const double sigma = (p.hi - p.lo) / 6.0;
      double g1 = 0;
      double g2 = 0;
      if (sigma > 0) {
        std::normal_distribution<double> gauss(0.0, sigma);
        g1 = gauss(rng);
        g2 = gauss(rng);
      }
      double lo = p.lo - g1;
      double hi = p.hi + g2;
      if (p.kind == ParamKind::Integer) {
        lo = std::floor(lo);
        hi = std::ceil(hi);
      }
      if (p.lo >= 0) lo = std::max(lo, 0.0);
      hi = std::max(hi, lo);
      p.lo = lo;
      p.hi = hi;
    }
  }
  return OomdpSpec(std::move(classes), spec.bindings());
}

// ---------------------------------------------------------------------------
// JSON

namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed,
                    const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  for (const auto& [k, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw SchemaError(path + "." + k, "unknown key");
    }
  }
}

template <class T>
T field(const json& j, const char* key, const std::string& path) {
  if (!j.contains(key)) throw SchemaError(path + "." + key, "missing");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw SchemaError(path + "." + key, "wrong type");
  }
}

ParamKind parse_kind(const std::string& s, const std::string& path) {
  if (s == "integer") return ParamKind::Integer;
  if (s == "real") return ParamKind::Real;
  throw SchemaError(path, "kind must be 'integer' or 'real'");
}

}  // namespace

OomdpSpec spec_from_json(const json& j, const std::string& path) {
  reject_unknown(j, {"classes", "bindings"}, path);
  std::vector<ClassSpec> classes;
  const auto& jc = j.contains("classes") ? j["classes"] : throw SchemaError(path + ".classes", "missing");
  if (!jc.is_array()) throw SchemaError(path + ".classes", "expected an array");
  for (std::size_t ci = 0; ci < jc.size(); ++ci) {
    const std::string cpath = path + ".classes[" + std::to_string(ci) + "]";
    reject_unknown(jc[ci], {"name", "params"}, cpath);
    ClassSpec c;
    c.name = field<std::string>(jc[ci], "name", cpath);
    const auto& jp = jc[ci].contains("params") ? jc[ci]["params"]
                                               : throw SchemaError(cpath + ".params", "missing");
    if (!jp.is_array()) throw SchemaError(cpath + ".params", "expected an array");
    for (std::size_t pi = 0; pi < jp.size(); ++pi) {
      const std::string ppath = cpath + ".params[" + std::to_string(pi) + "]";
      reject_unknown(jp[pi], {"name", "kind", "range"}, ppath);
      ParamSpec p;
      p.name = field<std::string>(jp[pi], "name", ppath);
      p.kind = jp[pi].contains("kind") ? parse_kind(field<std::string>(jp[pi], "kind", ppath), ppath + ".kind")
                                       : ParamKind::Integer;
      auto range = field<std::vector<double>>(jp[pi], "range", ppath);
      if (range.size() != 2) throw SchemaError(ppath + ".range", "expected [lo, hi]");
      p.lo = range[0];
      p.hi = range[1];
      c.params.push_back(std::move(p));
    }
    classes.push_back(std::move(c));
  }

  std::vector<PropositionBinding> bindings;
  if (j.contains("bindings")) {
    const auto& jb = j["bindings"];
    if (!jb.is_array()) throw SchemaError(path + ".bindings", "expected an array");
    for (std::size_t bi = 0; bi < jb.size(); ++bi) {
      const std::string bpath = path + ".bindings[" + std::to_string(bi) + "]";
      reject_unknown(jb[bi], {"proposition", "env", "inv", "terminal", "requires"}, bpath);
      PropositionBinding b;
      b.proposition = field<std::string>(jb[bi], "proposition", bpath);
      b.terminal = jb[bi].value("terminal", false);
      if (!b.terminal) {
        b.env_param = field<std::string>(jb[bi], "env", bpath);
        b.inv_param = field<std::string>(jb[bi], "inv", bpath);
      }
      if (jb[bi].contains("requires")) {
        const auto& jr = jb[bi]["requires"];
        if (!jr.is_object()) throw SchemaError(bpath + ".preconditions", "expected an object");
        for (const auto& [k, v] : jr.items()) {
          if (!v.is_number()) throw SchemaError(bpath + ".preconditions." + k, "expected a number");
          b.preconditions.push_back({k, v.get<double>()});
        }
      }
      bindings.push_back(std::move(b));
    }
  }
  return OomdpSpec(std::move(classes), std::move(bindings));
}

json spec_to_json(const OomdpSpec& spec) {
  json classes = json::array();
  for (const auto& c : spec.classes()) {
    json params = json::array();
    for (const auto& p : c.params) {
      params.push_back({{"name", p.name}, {"kind", kind_name(p.kind)}, {"range", {p.lo, p.hi}}});
    }
    classes.push_back({{"name", c.name}, {"params", std::move(params)}});
  }
  json bindings = json::array();
  for (const auto& b : spec.bindings()) {
    json jb = {{"proposition", b.proposition}};
    if (b.terminal) {
      jb["terminal"] = true;
    } else {
      jb["env"] = b.env_param;
      jb["inv"] = b.inv_param;
    }
    if (!b.preconditions.empty()) {
      json r = json::object();
      for (const auto& req : b.preconditions) r[req.param] = req.at_least;
      jb["requires"] = std::move(r);
    }
    bindings.push_back(std::move(jb));
  }
  return {{"classes", std::move(classes)}, {"bindings", std::move(bindings)}};
}

OomdpState state_from_json(const OomdpSpec& spec, const json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  for (const auto& [k, _] : j.items()) {
    if (!spec.find(k)) throw SchemaError(path + "." + k, "unknown parameter");
  }
  OomdpState s;
  for (const auto& p : spec.params()) {
    if (!j.contains(p.name)) throw SchemaError(path + "." + p.name, "missing");
    const auto& v = j[p.name];
    if (!v.is_number()) throw SchemaError(path + "." + p.name, "expected a number");
    double x = v.get<double>();
    if (p.kind == ParamKind::Integer && !is_integral(x)) {
      throw SchemaError(path + "." + p.name, "expected an integer");
    }
    s.values.push_back(x);
  }
  return s;
}

json state_to_json(const OomdpSpec& spec, const OomdpState& state) {
  json j = json::object();
  for (std::size_t i = 0; i < spec.param_count(); ++i) {
    const auto& p = spec.param(i);
    if (p.kind == ParamKind::Integer) {
      j[p.name] = static_cast<long long>(state.values.at(i));
    } else {
      j[p.name] = state.values.at(i);
    }
  }
  return j;
}

json task_to_json(const OomdpSpec& spec, const TaskConfig& task) {
  return {{"id", task.id},
          {"s0", state_to_json(spec, task.s0)},
          {"sf", state_to_json(spec, task.sf)},
          {"placement_seed", task.placement_seed},
          {"is_target", task.is_target}};
}

}  // namespace agcl
