#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "todflow/core.hpp"
#include "todflow/dnf.hpp"
#include "todflow/graph.hpp"
#include "todflow/rng.hpp"

namespace todflow::test {

// Brute-force evaluation, written independently of DnfCondition::evaluate.
inline bool eval_oracle(const std::vector<Clause>& clauses, std::uint64_t mask) {
  for (const auto& cl : clauses) {
    bool all = true;
    for (const auto& l : cl) {
      const bool bit = (mask >> l.act) & 1U;
      if (bit == l.negated) {
        all = false;
        break;
      }
    }
    if (all) return true;
  }
  return false;
}

inline CompletionVector completion(std::size_t n, std::initializer_list<ActIndex> set) {
  CompletionVector c(n);
  for (auto i : set) c.set(i);
  return c;
}

// Same function on every one of the 2^n inputs.
inline bool same_truth_table(const DnfCondition& a, const DnfCondition& b, std::size_t n) {
  for (std::uint64_t m = 0; m < (std::uint64_t{1} << n); ++m) {
    const auto c = BitVector::from_mask(n, m);
    if (a.evaluate(c) != b.evaluate(c)) return false;
  }
  return true;
}

inline std::vector<Clause> random_clauses(Rng& rng, std::size_t n, std::size_t max_clauses,
                                          std::size_t max_literals) {
  std::vector<Clause> clauses;
  const std::size_t k = rng.below(max_clauses + 1);
  for (std::size_t j = 0; j < k; ++j) {
    Clause cl;
    const std::size_t len = rng.below(max_literals + 1);
    for (std::size_t t = 0; t < len; ++t) cl.push_back(Literal{rng.below(n), rng.bernoulli(0.5)});
    clauses.push_back(std::move(cl));
  }
  return clauses;
}

inline ActVocabulary letters(std::size_t n) {
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i) labels.push_back(std::string(1, static_cast<char>('A' + i)));
  return ActVocabulary(labels);
}

inline TodFlowGraph random_graph(Rng& rng, std::size_t n) {
  TodFlowGraph g(letters(n));
  for (ActIndex i = 0; i < n; ++i) {
    ActConditions ac;
    ac.can_shdnt = DnfCondition(random_clauses(rng, n, 3, 3));
    ac.shd = DnfCondition(random_clauses(rng, n, 2, 3));
    if (rng.bernoulli(0.2)) ac.can_only = DnfCondition(random_clauses(rng, n, 2, 2));
    g.set_conditions(i, ac);
  }
  return g;
}

}  // namespace todflow::test
