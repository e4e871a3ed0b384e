#include "todflow/condition.hpp"

#include <map>

#include "todflow/errors.hpp"
#include "todflow/rng.hpp"

namespace todflow {

namespace {

void check_acts(const TodFlowGraph& graph, const ActionSet& acts) {
  if (!acts.empty() && acts.values().back() >= graph.size()) {
    throw VocabularyError("candidate act " + std::to_string(acts.values().back()) +
                          " is outside the " + std::to_string(graph.size()) + "-act vocabulary");
  }
}

// Lowest provider rank first, input order as the final tie-break.
bool earlier(const Candidate& a, std::size_t ia, const Candidate& b, std::size_t ib) {
  if (a.provider_rank != b.provider_rank) return a.provider_rank < b.provider_rank;
  return ia < ib;
}

}  // namespace

ConditionedCandidate condition_candidate(const TodFlowGraph& graph, const CompletionVector& c,
                                         const Candidate& cand) {
  check_acts(graph, cand.acts);
  const ActionSet should = should_acts(graph, c);
  const ActionSet allowed = allowed_acts(graph, c);
  ConditionedCandidate out;
  out.original = cand;
  const ActionSet with_shd = cand.acts.united(should);
  out.added = should.minus(cand.acts);
  out.removed = with_shd.minus(allowed);
  out.final_acts = with_shd.intersected(allowed);
  return out;
}

std::string_view to_string(RankingStrategy::Kind k) {
  switch (k) {
    case RankingStrategy::Kind::greedy: return "greedy";
    case RankingStrategy::Kind::compliance: return "compliance";
    case RankingStrategy::Kind::majority: return "majority";
    case RankingStrategy::Kind::violation: return "violation";
    case RankingStrategy::Kind::uniform: return "uniform";
  }
  return "greedy";
}

std::optional<RankingStrategy::Kind> parse_strategy(std::string_view s) {
  using K = RankingStrategy::Kind;
  for (K k : {K::greedy, K::compliance, K::majority, K::violation, K::uniform}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

Selection rank_and_select(const TodFlowGraph& graph, const CompletionVector& c,
                          std::span<const Candidate> candidates, const RankingStrategy& strategy) {
  using K = RankingStrategy::Kind;
  if (candidates.empty()) throw NoCandidates("no candidates to rank");

  // Candidate indices in preference order.
  std::vector<std::size_t> order(candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return earlier(candidates[a], a, candidates[b], b);
  });

  Selection sel;
  if (strategy.kind == K::greedy) {
    check_acts(graph, candidates[order.front()].acts);
    sel.chosen = order.front();
    sel.acts = candidates[sel.chosen].acts;
    return sel;
  }

  sel.conditioned.reserve(candidates.size());
  for (const auto& cand : candidates) sel.conditioned.push_back(condition_candidate(graph, c, cand));

  std::size_t pick = order.front();
  switch (strategy.kind) {
    case K::compliance:
      for (std::size_t i : order) {
        if (sel.conditioned[i].compliance_size() > sel.conditioned[pick].compliance_size()) pick = i;
      }
      break;
    case K::violation: {
      auto cost = [&](std::size_t i) {
        return sel.conditioned[i].added.size() + sel.conditioned[i].removed.size();
      };
      for (std::size_t i : order) {
        if (cost(i) < cost(pick)) pick = i;
      }
      break;
    }
    case K::majority: {
      // Count per distinct final set; the representative of a set is its
      // best-ranked member, visited first.
      std::map<ActionSet, std::pair<std::size_t, std::size_t>> votes;
      for (std::size_t i : order) {
        auto [it, fresh] = votes.try_emplace(sel.conditioned[i].final_acts, 0, i);
        it->second.first++;
      }
      std::size_t best_count = 0;
      for (std::size_t i : order) {
        const auto& [count, rep] = votes.at(sel.conditioned[i].final_acts);
        if (rep == i && count > best_count) {
          best_count = count;
          pick = i;
        }
      }
      break;
    }
    case K::uniform: {
      Rng rng(strategy.seed);
      pick = order[rng.below(order.size())];
      break;
    }
    case K::greedy:
      break;
  }
  sel.chosen = pick;
  sel.acts = sel.conditioned[pick].final_acts;
  return sel;
}

double violation_rate(const TodFlowGraph& graph, const CompletionVector& c,
                      const ResponseCandidate& resp) {
  check_acts(graph, resp.acts);
  const ActionSet allowed = allowed_acts(graph, c);
  const ActionSet should = should_acts(graph, c);
  const std::size_t den = resp.acts.size() + should.size();
  if (den == 0) return 0.0;
  const std::size_t can_violations = resp.acts.minus(allowed).size();
  const std::size_t missed_shd = should.minus(resp.acts).size();
  return static_cast<double>(can_violations + missed_shd) / static_cast<double>(den);
}

std::size_t select_response(const TodFlowGraph& graph, const CompletionVector& c,
                            std::span<const ResponseCandidate> responses) {
  if (responses.empty()) throw NoCandidates("no responses to select from");
  std::size_t best = 0;
  double best_rate = violation_rate(graph, c, responses[0]);
  for (std::size_t i = 1; i < responses.size(); ++i) {
    const double r = violation_rate(graph, c, responses[i]);
    if (r < best_rate ||
        (r == best_rate && responses[i].provider_rank < responses[best].provider_rank)) {
      best = i;
      best_rate = r;
    }
  }
  return best;
}

}  // namespace todflow
