#include "todflow/eval.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "todflow/errors.hpp"
#include "todflow/rng.hpp"

namespace todflow {

TurnScore f1_turn(const ActionSet& predicted, const ActionSet& gold) {
  TurnScore s;
  s.predicted = predicted;
  s.gold = gold;
  if (predicted.empty() && gold.empty()) return s;
  if (predicted.empty() || gold.empty()) {
    s.precision = predicted.empty() ? 1.0 : 0.0;
    s.recall = gold.empty() ? 1.0 : 0.0;
    s.f1 = 0.0;
    return s;
  }
  const double tp = static_cast<double>(predicted.intersected(gold).size());
  s.precision = tp / static_cast<double>(predicted.size());
  s.recall = tp / static_cast<double>(gold.size());
  s.f1 = tp == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

double score_domain(std::span<const double> turn_f1) {
  if (turn_f1.empty()) throw NoTurns("no scored turns in domain");
  return std::accumulate(turn_f1.begin(), turn_f1.end(), 0.0) / static_cast<double>(turn_f1.size());
}

double score_domain(std::span<const TurnScore> turns) {
  std::vector<double> f1;
  f1.reserve(turns.size());
  for (const auto& t : turns) f1.push_back(t.f1);
  return score_domain(std::span<const double>(f1));
}

double aggregate_domains(std::span<const double> domain_means) {
  if (domain_means.empty()) throw NoTurns("no domains to aggregate");
  return std::accumulate(domain_means.begin(), domain_means.end(), 0.0) /
         static_cast<double>(domain_means.size());
}

double micro_f1(std::span<const TurnScore> turns) {
  if (turns.empty()) throw NoTurns("no scored turns");
  std::size_t tp = 0;
  std::size_t pred = 0;
  std::size_t gold = 0;
  for (const auto& t : turns) {
    tp += t.predicted.intersected(t.gold).size();
    pred += t.predicted.size();
    gold += t.gold.size();
  }
  if (pred == 0 && gold == 0) return 1.0;
  if (tp == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(pred + gold);
}

// ---- recovery --------------------------------------------------------------

namespace {

std::set<Literal> pooled_literals(const DnfCondition& cond) {
  std::set<Literal> out;
  for (const auto& cl : cond.clauses()) out.insert(cl.begin(), cl.end());
  return out;
}

bool same_on(const DnfCondition& a, const DnfCondition& b, std::span<const CompletionVector> cs) {
  for (const auto& c : cs) {
    if (a.evaluate(c) != b.evaluate(c)) return false;
  }
  return true;
}

}  // namespace

ConditionDiff diff_conditions(const DnfCondition& inferred, const DnfCondition& truth) {
  ConditionDiff d;
  const auto& ic = inferred.clauses();
  const auto& tc = truth.clauses();
  for (const auto& cl : tc) {
    if (std::find(ic.begin(), ic.end(), cl) == ic.end()) d.missing_clauses.push_back(cl);
  }
  for (const auto& cl : ic) {
    if (std::find(tc.begin(), tc.end(), cl) == tc.end()) d.redundant_clauses.push_back(cl);
  }
  const auto il = pooled_literals(inferred);
  const auto tl = pooled_literals(truth);
  std::set_difference(tl.begin(), tl.end(), il.begin(), il.end(), std::back_inserter(d.missing_literals));
  std::set_difference(il.begin(), il.end(), tl.begin(), tl.end(), std::back_inserter(d.redundant_literals));
  return d;
}

RecoveryReport graph_recovery_score(const TodFlowGraph& inferred_in, const TodFlowGraph& truth,
                                    const RecoveryOptions& options) {
  const TodFlowGraph inferred = inferred_in.with_vocabulary(truth.vocabulary());
  const std::size_t n = truth.size();

  RecoveryReport report;
  std::vector<CompletionVector> table;
  if (n <= 16) {
    table.reserve(std::size_t{1} << n);
    for (std::uint64_t m = 0; m < (std::uint64_t{1} << n); ++m) table.push_back(BitVector::from_mask(n, m));
  } else {
    report.sampled = true;
    Rng rng(derive_seed(options.seed, fnv1a("recovery-samples")));
    table.reserve(options.samples);
    for (std::size_t s = 0; s < options.samples; ++s) {
      BitVector c(n);
      for (std::size_t i = 0; i < n; ++i) c.set(i, rng.next() & 1U);
      table.push_back(std::move(c));
    }
  }

  std::size_t scored = 0;
  std::size_t reach_ok = 0, full_ok = 0, reach_both = 0, full_both = 0;
  for (ActIndex i = 0; i < n; ++i) {
    if (options.acts && !options.acts->contains(i)) continue;
    const auto& ti = truth.conditions(i);
    const auto& ii = inferred.conditions(i);
    std::span<const CompletionVector> reach = table;
    if (i < options.act_contexts.size() && !options.act_contexts[i].empty()) {
      reach = options.act_contexts[i];
    } else if (!options.contexts.empty()) {
      reach = options.contexts;
    }
    ActRecovery r;
    r.act = i;
    r.contexts = reach.size();
    r.can_shdnt_full = same_on(ii.can_shdnt, ti.can_shdnt, table);
    r.shd_full = same_on(ii.shd, ti.shd, table);
    r.can_shdnt_reachable = r.can_shdnt_full || same_on(ii.can_shdnt, ti.can_shdnt, reach);
    r.shd_reachable = r.shd_full || same_on(ii.shd, ti.shd, reach);
    r.can_shdnt_diff = diff_conditions(ii.can_shdnt, ti.can_shdnt);
    r.shd_diff = diff_conditions(ii.shd, ti.shd);
    ++scored;
    reach_ok += r.can_shdnt_reachable;
    full_ok += r.can_shdnt_full;
    reach_both += r.can_shdnt_reachable && r.shd_reachable;
    full_both += r.can_shdnt_full && r.shd_full;
    report.acts.push_back(std::move(r));
  }
  if (scored > 0) {
    const auto d = static_cast<double>(scored);
    report.reachable_rate = static_cast<double>(reach_ok) / d;
    report.full_rate = static_cast<double>(full_ok) / d;
    report.reachable_rate_both = static_cast<double>(reach_both) / d;
    report.full_rate_both = static_cast<double>(full_both) / d;
  }
  return report;
}

RecoveryOptions synth_recovery_options(const TodFlowGraph& truth, std::size_t max_turns,
                                       TargetSpeaker target) {
  const auto roles = synth_roles(truth.vocabulary());
  RecoveryOptions opt;
  std::vector<ActIndex> acts;
  for (ActIndex i = 0; i < roles.size(); ++i) {
    if (roles[i] != Speaker::db && speaker_matches(roles[i], target)) acts.push_back(i);
  }
  opt.acts = ActionSet(std::move(acts));
  std::vector<CompletionVector> user_ctx;
  std::vector<CompletionVector> system_ctx;
  if (speaker_matches(Speaker::user, target)) user_ctx = reachable_contexts(truth, Speaker::user, max_turns);
  if (speaker_matches(Speaker::system, target)) {
    system_ctx = reachable_contexts(truth, Speaker::system, max_turns);
  }
  opt.act_contexts.resize(truth.size());
  for (ActIndex i : *opt.acts) {
    opt.act_contexts[i] = roles[i] == Speaker::user ? user_ctx : system_ctx;
  }
  return opt;
}

namespace {

nlohmann::ordered_json literals_json(const std::vector<Literal>& lits, const ActVocabulary& vocab) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& l : lits) out.push_back((l.negated ? "!" : "") + vocab.label(l.act));
  return out;
}

nlohmann::ordered_json clauses_json(const std::vector<Clause>& cls, const ActVocabulary& vocab) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& cl : cls) out.push_back(DnfCondition::clause_to_string(cl, &vocab));
  return out;
}

nlohmann::ordered_json diff_json(const ConditionDiff& d, const ActVocabulary& vocab) {
  nlohmann::ordered_json j;
  j["missing_clauses"] = clauses_json(d.missing_clauses, vocab);
  j["redundant_clauses"] = clauses_json(d.redundant_clauses, vocab);
  j["missing_literals"] = literals_json(d.missing_literals, vocab);
  j["redundant_literals"] = literals_json(d.redundant_literals, vocab);
  return j;
}

}  // namespace

nlohmann::ordered_json to_json(const RecoveryReport& report, const ActVocabulary& vocab) {
  nlohmann::ordered_json j;
  j["reachable_rate"] = report.reachable_rate;
  j["full_rate"] = report.full_rate;
  j["reachable_rate_both"] = report.reachable_rate_both;
  j["full_rate_both"] = report.full_rate_both;
  j["sampled"] = report.sampled;
  auto acts = nlohmann::ordered_json::array();
  for (const auto& r : report.acts) {
    nlohmann::ordered_json a;
    a["act"] = vocab.label(r.act);
    a["contexts"] = r.contexts;
    a["can_shdnt_reachable"] = r.can_shdnt_reachable;
    a["can_shdnt_full"] = r.can_shdnt_full;
    a["shd_reachable"] = r.shd_reachable;
    a["shd_full"] = r.shd_full;
    a["can_shdnt_diff"] = diff_json(r.can_shdnt_diff, vocab);
    a["shd_diff"] = diff_json(r.shd_diff, vocab);
    acts.push_back(std::move(a));
  }
  j["acts"] = std::move(acts);
  return j;
}

}  // namespace todflow
