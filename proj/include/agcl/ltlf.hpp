#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace agcl {

/// A set of atomic propositions, encoded as a bitmask over the declared AP order.
using Symbol = std::uint32_t;

/// A finite trace: one symbol per position.
using Trace = std::vector<Symbol>;

constexpr std::size_t kMaxPropositions = 16;

/// Ordered set of atomic proposition names. The order fixes the bit layout of
/// every Symbol built against it.
class PropositionSet {
 public:
  PropositionSet() = default;
  explicit PropositionSet(std::vector<std::string> names);

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& name(std::size_t i) const { return names_.at(i); }

  /// Index of `name`, or size() if absent.
  std::size_t index_of(std::string_view name) const noexcept;
  bool contains(std::string_view name) const noexcept { return index_of(name) < size(); }

  Symbol alphabet_size() const noexcept { return Symbol{1} << names_.size(); }
  Symbol symbol(std::initializer_list<std::string_view> props) const;
  Symbol symbol(std::span<const std::string> props) const;
  std::string describe(Symbol s) const;

  bool operator==(const PropositionSet&) const = default;

 private:
  std::vector<std::string> names_;
};

enum class FormulaKind : std::uint8_t {
  True,
  False,
  Atom,
  Not,
  And,
  Or,
  Next,
  Always,
  Eventually,
  Until,
};

/// Immutable LTLf syntax tree with value semantics (nodes are shared).
///
/// Parsed formulas are strictly binary for And/Or; the normalizer used by the
/// compiler flattens them into n-ary sorted form. Atoms refer to propositions
/// by index into the PropositionSet they were parsed against.
class Formula {
 public:
  static Formula truth();
  static Formula falsity();
  static Formula atom(std::size_t index, std::string name);
  static Formula negation(Formula f);
  static Formula conjunction(std::vector<Formula> operands);
  static Formula disjunction(std::vector<Formula> operands);
  static Formula next(Formula f);
  static Formula always(Formula f);
  static Formula eventually(Formula f);
  static Formula until(Formula lhs, Formula rhs);

  FormulaKind kind() const noexcept;
  std::size_t atom_index() const noexcept;
  const std::string& atom_name() const noexcept;
  std::span<const Formula> children() const noexcept;
  const Formula& child(std::size_t i) const { return children()[i]; }

  /// Canonical structural key; equal keys mean structurally equal trees.
  const std::string& key() const noexcept;

  /// Constructor-style rendering, e.g. And(Eventually(tree),Eventually(rock)).
  std::string describe() const;
  /// Infix rendering in the input grammar.
  std::string to_string() const;

  bool operator==(const Formula& other) const noexcept { return key() == other.key(); }
  bool operator<(const Formula& other) const noexcept { return key() < other.key(); }

 private:
  struct Node;
  explicit Formula(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  static Formula make(FormulaKind kind, std::vector<Formula> children, std::size_t atom = 0,
                      std::string name = {});

  std::shared_ptr<const Node> node_;
};

/// Parses the textual grammar (| & U ! X F G -> and parentheses) against `ap`.
/// Throws ParseError (with byte offset) or UnknownAtomError.
Formula parse_ltlf(std::string_view text, const PropositionSet& ap);

/// Finite-trace semantics. The empty trace satisfies nothing.
bool eval_trace(const Formula& f, std::span<const Symbol> trace);

/// Boolean simplification used to memoize progression states: constants are
/// folded, And/Or flattened, sorted and deduplicated, double negation removed.
Formula normalize(const Formula& f);

/// Obligation on the remaining (non-empty) suffix after reading `s`.
Formula progress(const Formula& f, Symbol s);

/// Whether the one-symbol trace [s] satisfies `f`, i.e. acceptance if the
/// trace ends right after `s`.
bool holds_at_end(const Formula& f, Symbol s);

}  // namespace agcl
