#include "agcl/ltlf.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "agcl/error.hpp"

namespace agcl {

// ---------------------------------------------------------------------------
// PropositionSet

PropositionSet::PropositionSet(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.size() > kMaxPropositions) {
    throw PreconditionError("at most " + std::to_string(kMaxPropositions) +
                            " atomic propositions are supported");
  }
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (!seen.insert(n).second) throw PreconditionError("duplicate proposition '" + n + "'");
  }
}

std::size_t PropositionSet::index_of(std::string_view name) const noexcept {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return names_.size();
}

Symbol PropositionSet::symbol(std::initializer_list<std::string_view> props) const {
  Symbol s = 0;
  for (auto p : props) {
    auto i = index_of(p);
    if (i == size()) throw UnknownAtomError(std::string(p));
    s |= Symbol{1} << i;
  }
  return s;
}

Symbol PropositionSet::symbol(std::span<const std::string> props) const {
  Symbol s = 0;
  for (const auto& p : props) {
    auto i = index_of(p);
    if (i == size()) throw UnknownAtomError(p);
    s |= Symbol{1} << i;
  }
  return s;
}

std::string PropositionSet::describe(Symbol s) const {
  std::string out = "{";
  bool first = true;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (s & (Symbol{1} << i)) {
      if (!first) out += ",";
      out += names_[i];
      first = false;
    }
  }
  return out + "}";
}

// ---------------------------------------------------------------------------
// Formula nodes

struct Formula::Node {
  FormulaKind kind;
  std::size_t atom = 0;
  std::string name;
  std::vector<Formula> children;
  std::string key;
};

namespace {

const char* kind_name(FormulaKind k) {
  switch (k) {
    case FormulaKind::True: return "True";
    case FormulaKind::False: return "False";
    case FormulaKind::Atom: return "Atom";
    case FormulaKind::Not: return "Not";
    case FormulaKind::And: return "And";
    case FormulaKind::Or: return "Or";
    case FormulaKind::Next: return "Next";
    case FormulaKind::Always: return "Always";
    case FormulaKind::Eventually: return "Eventually";
    case FormulaKind::Until: return "Until";
  }
  return "?";
}

}  // namespace

Formula Formula::make(FormulaKind kind, std::vector<Formula> children, std::size_t atom,
                      std::string name) {
  auto node = std::make_shared<Node>();
  node->kind = kind;
  node->atom = atom;
  node->name = std::move(name);
  node->children = std::move(children);
  if (kind == FormulaKind::Atom) {
    node->key = "a" + std::to_string(atom);
  } else {
    node->key = std::string(1, static_cast<char>('A' + static_cast<int>(kind)));
    if (!node->children.empty()) {
      node->key += "(";
      for (std::size_t i = 0; i < node->children.size(); ++i) {
        if (i) node->key += ",";
        node->key += node->children[i].key();
      }
      node->key += ")";
    }
  }
  return Formula(std::move(node));
}

Formula Formula::truth() {
  static const Formula t = make(FormulaKind::True, {});
  return t;
}
Formula Formula::falsity() {
  static const Formula f = make(FormulaKind::False, {});
  return f;
}
Formula Formula::atom(std::size_t index, std::string name) {
  return make(FormulaKind::Atom, {}, index, std::move(name));
}
Formula Formula::negation(Formula f) { return make(FormulaKind::Not, {std::move(f)}); }
Formula Formula::conjunction(std::vector<Formula> ops) {
  if (ops.size() < 2) throw PreconditionError("conjunction needs at least two operands");
  return make(FormulaKind::And, std::move(ops));
}
Formula Formula::disjunction(std::vector<Formula> ops) {
  if (ops.size() < 2) throw PreconditionError("disjunction needs at least two operands");
  return make(FormulaKind::Or, std::move(ops));
}
Formula Formula::next(Formula f) { return make(FormulaKind::Next, {std::move(f)}); }
Formula Formula::always(Formula f) { return make(FormulaKind::Always, {std::move(f)}); }
Formula Formula::eventually(Formula f) { return make(FormulaKind::Eventually, {std::move(f)}); }
Formula Formula::until(Formula lhs, Formula rhs) {
  return make(FormulaKind::Until, {std::move(lhs), std::move(rhs)});
}

FormulaKind Formula::kind() const noexcept { return node_->kind; }
std::size_t Formula::atom_index() const noexcept { return node_->atom; }
const std::string& Formula::atom_name() const noexcept { return node_->name; }
std::span<const Formula> Formula::children() const noexcept { return node_->children; }
const std::string& Formula::key() const noexcept { return node_->key; }

std::string Formula::describe() const {
  switch (kind()) {
    case FormulaKind::True: return "True";
    case FormulaKind::False: return "False";
    case FormulaKind::Atom: return atom_name();
    default: break;
  }
  std::string out = kind_name(kind());
  out += "(";
  for (std::size_t i = 0; i < children().size(); ++i) {
    if (i) out += ",";
    out += children()[i].describe();
  }
  return out + ")";
}

std::string Formula::to_string() const {
  auto wrap = [](const Formula& f) {
    auto k = f.kind();
    bool simple = k == FormulaKind::Atom || k == FormulaKind::True || k == FormulaKind::False ||
                  k == FormulaKind::Not || k == FormulaKind::Next || k == FormulaKind::Always ||
                  k == FormulaKind::Eventually;
    return simple ? f.to_string() : "(" + f.to_string() + ")";
  };
  switch (kind()) {
    case FormulaKind::True: return "true";
    case FormulaKind::False: return "false";
    case FormulaKind::Atom: return atom_name();
    case FormulaKind::Not: return "!" + wrap(child(0));
    case FormulaKind::Next: return "X(" + child(0).to_string() + ")";
    case FormulaKind::Always: return "G(" + child(0).to_string() + ")";
    case FormulaKind::Eventually: return "F(" + child(0).to_string() + ")";
    case FormulaKind::Until: return wrap(child(0)) + " U " + wrap(child(1));
    case FormulaKind::And:
    case FormulaKind::Or: {
      std::string sep = kind() == FormulaKind::And ? " & " : " | ";
      std::string out;
      for (std::size_t i = 0; i < children().size(); ++i) {
        if (i) out += sep;
        out += wrap(child(i));
      }
      return out;
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// Parser

namespace {

class Parser {
 public:
  Parser(std::string_view text, const PropositionSet& ap) : text_(text), ap_(ap) {}

  Formula parse() {
    Formula f = parse_implication();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected input");
    return f;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  static bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
  static bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

  std::string_view peek_ident() {
    skip_ws();
    std::size_t end = pos_;
    if (end < text_.size() && ident_start(text_[end])) {
      while (end < text_.size() && ident_char(text_[end])) ++end;
    }
    return text_.substr(pos_, end - pos_);
  }

  bool accept(std::string_view tok) {
    skip_ws();
    if (text_.substr(pos_, tok.size()) == tok) {
      pos_ += tok.size();
      return true;
    }
    return false;
  }

  // Single-letter temporal operators are reserved identifiers.
  bool accept_keyword(char k) {
    auto id = peek_ident();
    if (id.size() == 1 && id[0] == k) {
      pos_ += 1;
      return true;
    }
    return false;
  }

  Formula parse_implication() {
    Formula lhs = parse_or();
    if (accept("->")) {
      Formula rhs = parse_implication();
      return Formula::disjunction({Formula::negation(std::move(lhs)), std::move(rhs)});
    }
    return lhs;
  }

  Formula parse_or() {
    Formula f = parse_and();
    while (true) {
      skip_ws();
      if (pos_ < text_.size() && text_[pos_] == '|') {
        ++pos_;
        f = Formula::disjunction({std::move(f), parse_and()});
      } else {
        return f;
      }
    }
  }

  Formula parse_and() {
    Formula f = parse_until();
    while (true) {
      skip_ws();
      if (pos_ < text_.size() && text_[pos_] == '&') {
        ++pos_;
        f = Formula::conjunction({std::move(f), parse_until()});
      } else {
        return f;
      }
    }
  }

  Formula parse_until() {
    Formula lhs = parse_unary();
    if (accept_keyword('U')) return Formula::until(std::move(lhs), parse_until());
    return lhs;
  }

  Formula parse_unary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of formula");
    if (text_[pos_] == '!') {
      ++pos_;
      return Formula::negation(parse_unary());
    }
    if (accept_keyword('X')) return Formula::next(parse_unary());
    if (accept_keyword('F')) return Formula::eventually(parse_unary());
    if (accept_keyword('G')) return Formula::always(parse_unary());
    if (text_[pos_] == '(') {
      ++pos_;
      Formula f = parse_implication();
      skip_ws();
      if (pos_ >= text_.size() || text_[pos_] != ')') fail("expected ')'");
      ++pos_;
      return f;
    }
    auto id = peek_ident();
    if (id.empty()) fail(std::string("unexpected character '") + text_[pos_] + "'");
    if (id == "U") fail("'U' needs a left operand");
    auto idx = ap_.index_of(id);
    if (idx == ap_.size()) throw UnknownAtomError(std::string(id));
    pos_ += id.size();
    return Formula::atom(idx, std::string(id));
  }

  std::string_view text_;
  const PropositionSet& ap_;
  std::size_t pos_ = 0;
};

}  // namespace

Formula parse_ltlf(std::string_view text, const PropositionSet& ap) {
  return Parser(text, ap).parse();
}

// ---------------------------------------------------------------------------
// Semantics

namespace {

bool sat(const Formula& f, std::span<const Symbol> t, std::size_t i) {
  switch (f.kind()) {
    case FormulaKind::True: return true;
    case FormulaKind::False: return false;
    case FormulaKind::Atom: return (t[i] >> f.atom_index()) & 1U;
    case FormulaKind::Not: return !sat(f.child(0), t, i);
    case FormulaKind::And:
      return std::all_of(f.children().begin(), f.children().end(),
                         [&](const Formula& c) { return sat(c, t, i); });
    case FormulaKind::Or:
      return std::any_of(f.children().begin(), f.children().end(),
                         [&](const Formula& c) { return sat(c, t, i); });
    case FormulaKind::Next: return i + 1 < t.size() && sat(f.child(0), t, i + 1);
    case FormulaKind::Always:
      for (std::size_t j = i; j < t.size(); ++j) {
        if (!sat(f.child(0), t, j)) return false;
      }
      return true;
    case FormulaKind::Eventually:
      for (std::size_t j = i; j < t.size(); ++j) {
        if (sat(f.child(0), t, j)) return true;
      }
      return false;
    case FormulaKind::Until:
      for (std::size_t j = i; j < t.size(); ++j) {
        if (sat(f.child(1), t, j)) return true;
        if (!sat(f.child(0), t, j)) return false;
      }
      return false;
  }
  return false;
}

}  // namespace

bool eval_trace(const Formula& f, std::span<const Symbol> trace) {
  if (trace.empty()) return false;
  return sat(f, trace, 0);
}

// ---------------------------------------------------------------------------
// Normalization and progression

namespace {

Formula mk_not(Formula f) {
  switch (f.kind()) {
    case FormulaKind::True: return Formula::falsity();
    case FormulaKind::False: return Formula::truth();
    case FormulaKind::Not: return f.child(0);
    default: return Formula::negation(std::move(f));
  }
}

bool complementary(const Formula& a, const Formula& b) {
  return (a.kind() == FormulaKind::Not && a.child(0) == b) ||
         (b.kind() == FormulaKind::Not && b.child(0) == a);
}

Formula mk_junction(FormulaKind kind, std::vector<Formula> ops) {
  const bool is_and = kind == FormulaKind::And;
  const FormulaKind unit = is_and ? FormulaKind::True : FormulaKind::False;
  const FormulaKind zero = is_and ? FormulaKind::False : FormulaKind::True;

  std::vector<Formula> flat;
  for (auto& op : ops) {
    if (op.kind() == kind) {
      for (const auto& c : op.children()) flat.push_back(c);
    } else {
      flat.push_back(std::move(op));
    }
  }
  std::vector<Formula> kept;
  for (auto& op : flat) {
    if (op.kind() == zero) return op;
    if (op.kind() != unit) kept.push_back(std::move(op));
  }
  std::sort(kept.begin(), kept.end());
  kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    for (std::size_t j = i + 1; j < kept.size(); ++j) {
      if (complementary(kept[i], kept[j])) return is_and ? Formula::falsity() : Formula::truth();
    }
  }
  if (kept.empty()) return is_and ? Formula::truth() : Formula::falsity();
  if (kept.size() == 1) return kept.front();
  return is_and ? Formula::conjunction(std::move(kept)) : Formula::disjunction(std::move(kept));
}

Formula mk_and(std::vector<Formula> ops) { return mk_junction(FormulaKind::And, std::move(ops)); }
Formula mk_or(std::vector<Formula> ops) { return mk_junction(FormulaKind::Or, std::move(ops)); }

Formula mk_eventually(Formula f) {
  if (f.kind() == FormulaKind::True || f.kind() == FormulaKind::False) return f;
  if (f.kind() == FormulaKind::Eventually) return f;
  return Formula::eventually(std::move(f));
}

Formula mk_always(Formula f) {
  if (f.kind() == FormulaKind::True || f.kind() == FormulaKind::False) return f;
  if (f.kind() == FormulaKind::Always) return f;
  return Formula::always(std::move(f));
}

Formula mk_until(Formula lhs, Formula rhs) {
  if (rhs.kind() == FormulaKind::True || rhs.kind() == FormulaKind::False) return rhs;
  if (lhs.kind() == FormulaKind::False) return rhs;
  if (lhs.kind() == FormulaKind::True) return mk_eventually(std::move(rhs));
  if (lhs == rhs) return lhs;
  return Formula::until(std::move(lhs), std::move(rhs));
}

}  // namespace

Formula normalize(const Formula& f) {
  switch (f.kind()) {
    case FormulaKind::True:
    case FormulaKind::False:
    case FormulaKind::Atom:
      return f;
    case FormulaKind::Not: return mk_not(normalize(f.child(0)));
    case FormulaKind::And:
    case FormulaKind::Or: {
      std::vector<Formula> ops;
      for (const auto& c : f.children()) ops.push_back(normalize(c));
      return mk_junction(f.kind(), std::move(ops));
    }
    case FormulaKind::Next: return Formula::next(normalize(f.child(0)));
    case FormulaKind::Always: return mk_always(normalize(f.child(0)));
    case FormulaKind::Eventually: return mk_eventually(normalize(f.child(0)));
    case FormulaKind::Until: return mk_until(normalize(f.child(0)), normalize(f.child(1)));
  }
  return f;
}

Formula progress(const Formula& f, Symbol s) {
  switch (f.kind()) {
    case FormulaKind::True:
    case FormulaKind::False:
      return f;
    case FormulaKind::Atom:
      return ((s >> f.atom_index()) & 1U) ? Formula::truth() : Formula::falsity();
    case FormulaKind::Not: return mk_not(progress(f.child(0), s));
    case FormulaKind::And:
    case FormulaKind::Or: {
      std::vector<Formula> ops;
      for (const auto& c : f.children()) ops.push_back(progress(c, s));
      return mk_junction(f.kind(), std::move(ops));
    }
    case FormulaKind::Next: return normalize(f.child(0));
    case FormulaKind::Always: return mk_and({progress(f.child(0), s), f});
    case FormulaKind::Eventually: return mk_or({progress(f.child(0), s), f});
    case FormulaKind::Until:
      return mk_or({progress(f.child(1), s), mk_and({progress(f.child(0), s), f})});
  }
  return f;
}

bool holds_at_end(const Formula& f, Symbol s) {
  switch (f.kind()) {
    case FormulaKind::True: return true;
    case FormulaKind::False: return false;
    case FormulaKind::Atom: return (s >> f.atom_index()) & 1U;
    case FormulaKind::Not: return !holds_at_end(f.child(0), s);
    case FormulaKind::And:
      return std::all_of(f.children().begin(), f.children().end(),
                         [&](const Formula& c) { return holds_at_end(c, s); });
    case FormulaKind::Or:
      return std::any_of(f.children().begin(), f.children().end(),
                         [&](const Formula& c) { return holds_at_end(c, s); });
    case FormulaKind::Next: return false;
    case FormulaKind::Always:
    case FormulaKind::Eventually:
      return holds_at_end(f.child(0), s);
    case FormulaKind::Until: return holds_at_end(f.child(1), s);
  }
  return false;
}

}  // namespace agcl
