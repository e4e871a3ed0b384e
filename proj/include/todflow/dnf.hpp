#pragma once

#include <compare>
#include <string>
#include <vector>

#include "todflow/core.hpp"

namespace todflow {

/// Signed reference to one act's completion bit.
struct Literal {
  ActIndex act = 0;
  bool negated = false;

  bool satisfied_by(const CompletionVector& c) const { return c.test(act) != negated; }

  friend auto operator<=>(const Literal&, const Literal&) = default;
};

/// Conjunction of literals, sorted and duplicate-free once inside a DnfCondition.
using Clause = std::vector<Literal>;

/// Disjunction of conjunctions of signed act literals.
///
/// Canonical form, enforced on construction:
///   - no clause contains both polarities of the same act;
///   - literals sorted within each clause, clauses sorted and unique;
///   - no clause is a superset of another (subsumed clauses are dropped).
/// No clauses means constant False; a single empty clause means constant True.
class DnfCondition {
 public:
  /// Constant False.
  DnfCondition() = default;
  explicit DnfCondition(std::vector<Clause> clauses);

  static DnfCondition always() { return DnfCondition(std::vector<Clause>{Clause{}}); }
  static DnfCondition never() { return DnfCondition(); }
  static DnfCondition literal(ActIndex act, bool negated = false) {
    return DnfCondition({Clause{Literal{act, negated}}});
  }
  static DnfCondition all_of(Clause literals) { return DnfCondition({std::move(literals)}); }

  const std::vector<Clause>& clauses() const { return clauses_; }
  bool is_true() const { return clauses_.size() == 1 && clauses_.front().empty(); }
  bool is_false() const { return clauses_.empty(); }

  /// True iff some clause has every literal satisfied by c. Throws
  /// VocabularyError when a literal indexes past c.size().
  bool evaluate(const CompletionVector& c) const;
  /// Index of the first satisfied clause, or -1.
  int first_satisfied(const CompletionVector& c) const;

  std::size_t literal_count() const;
  /// One past the largest act index referenced (0 when none).
  std::size_t index_bound() const;

  /// Truth-table-preserving reduction: merges clauses that differ only in the
  /// polarity of one literal, then re-applies subsumption, to a fixpoint.
  DnfCondition simplified() const;

  DnfCondition with_clause(Clause clause) const;
  /// Drops the clause equal (after canonicalization) to `clause`; returns
  /// false in `removed` when it is absent.
  DnfCondition without_clause(Clause clause, bool* removed = nullptr) const;

  /// "[C] | ([A] & ![B])": bracketed labels when a vocabulary is given, "#i"
  /// indices otherwise. Shorter clauses come first.
  std::string to_string(const ActVocabulary* vocab = nullptr) const;
  static std::string clause_to_string(const Clause& clause, const ActVocabulary* vocab = nullptr);

  friend bool operator==(const DnfCondition&, const DnfCondition&) = default;

 private:
  std::vector<Clause> clauses_;
};

/// Sorts, dedups and drops contradictory clauses. Returns false when the
/// clause contains some act with both polarities.
bool canonicalize_clause(Clause& clause);

}  // namespace todflow
