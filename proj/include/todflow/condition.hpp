#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "todflow/core.hpp"
#include "todflow/graph.hpp"

namespace todflow {

struct Candidate {
  ActionSet acts;
  /// 0 is the provider's top choice.
  std::size_t provider_rank = 0;
  std::optional<double> provider_score;
};

struct ConditionedCandidate {
  Candidate original;
  ActionSet final_acts;
  /// Fired Shd acts the candidate lacked.
  ActionSet added;
  /// Acts of the candidate or the fired Shd set that fail Can-and-not-Shdnt.
  /// An act can be both added and removed.
  ActionSet removed;

  std::size_t compliance_size() const { return final_acts.size(); }
};

/// a <- cand; a <- a | should(c); a <- a & allowed(c). Throws
/// VocabularyError when the candidate or c does not fit the graph.
ConditionedCandidate condition_candidate(const TodFlowGraph& graph, const CompletionVector& c,
                                         const Candidate& cand);

struct RankingStrategy {
  enum class Kind { greedy, compliance, majority, violation, uniform };
  Kind kind = Kind::compliance;
  /// Used by uniform only.
  std::uint64_t seed = 0;
};

std::string_view to_string(RankingStrategy::Kind k);
std::optional<RankingStrategy::Kind> parse_strategy(std::string_view s);

struct Selection {
  ActionSet acts;
  /// Index into the candidate list of the chosen candidate.
  std::size_t chosen = 0;
  /// Every candidate after conditioning, in input order (empty for greedy).
  std::vector<ConditionedCandidate> conditioned;
};

/// Applies a ranking strategy. Greedy returns the rank-0 candidate
/// unconditioned; the others condition every candidate first. Ties go to
/// the lowest provider rank. Throws NoCandidates on an empty list.
Selection rank_and_select(const TodFlowGraph& graph, const CompletionVector& c,
                          std::span<const Candidate> candidates, const RankingStrategy& strategy);

struct ResponseCandidate {
  std::string text;
  ActionSet acts;
  std::size_t provider_rank = 0;
};

/// (Can violations among the response's acts + fired Shd acts it misses)
/// over (|acts| + |fired Shd|); 0 when both are empty.
double violation_rate(const TodFlowGraph& graph, const CompletionVector& c,
                      const ResponseCandidate& resp);

/// Index of the response with the lowest violation rate, ties to the
/// lowest provider rank. Throws NoCandidates on an empty list.
std::size_t select_response(const TodFlowGraph& graph, const CompletionVector& c,
                            std::span<const ResponseCandidate> responses);

}  // namespace todflow
